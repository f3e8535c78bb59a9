//! Batch commands behind the `excitent` binary: tables for the dimer,
//! maximal-concurrence scans, the small-amplitude coefficients, and
//! transport robustness reports, written as CSV or JSON.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::dynamics::{decohered_dimer_state, evolve_with_vacuum};
use crate::entanglement::{
    cmax, concurrence_pure, concurrence_wootters, fn_estimate, fn_reference, project_renormalize, ExcitationProjector,
};
use crate::error::{Error, Result};
use crate::states::{coherent_truncated, default_cutoff};
use crate::transport::{fit_alpha_squared, robustness_sweep, EfficiencyReport, NetworkSpec, RobustnessSettings, ScalingFit};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Process exit status for an error: 2 for bad input or configuration,
/// 3 for a numerical tolerance failure.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_numerical() {
        3
    } else {
        2
    }
}

/// Twelve significant digits.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:.11e}")
    }
}

/// A numeric table plus the configuration that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub command: String,
    pub config: Value,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Extra `key: value` lines for the header (summary statistics).
    pub notes: Vec<(String, String)>,
}

impl Table {
    fn new(command: &str, config: Value, columns: &[&str]) -> Self {
        Table {
            command: command.to_string(),
            config,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = header(&self.command, &self.config);
        for (k, v) in &self.notes {
            let _ = writeln!(out, "# {k}: {v}");
        }
        let _ = writeln!(out, "{}", self.columns.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|x| fmt_num(*x)).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    pub fn to_json(&self) -> String {
        let notes: serde_json::Map<String, Value> =
            self.notes.iter().map(|(k, v)| (k.clone(), Value::String(v.clone()))).collect();
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| Value::Array(r.iter().map(|x| if x.is_nan() { Value::Null } else { json!(x) }).collect()))
            .collect();
        let doc = json!({
            "version": VERSION,
            "command": self.command,
            "config": self.config,
            "notes": notes,
            "columns": self.columns,
            "rows": rows,
        });
        serde_json::to_string_pretty(&doc).expect("table serializes") + "\n"
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }
}

fn header(command: &str, config: &Value) -> String {
    format!(
        "# excitent {VERSION}\n# command: {command}\n# config: {}\n",
        serde_json::to_string(config).expect("config serializes")
    )
}

fn check_alphas(alphas: &[f64]) -> Result<()> {
    if alphas.is_empty() {
        return Err(Error::Config("alpha list is empty".into()));
    }
    if let Some(a) = alphas.iter().find(|a| !a.is_finite() || **a < 0.0) {
        return Err(Error::Config(format!("alpha {a} must be finite and non-negative")));
    }
    Ok(())
}

/// Tail tolerance of the coherent input in [`cmd_dimer`]. The residual
/// full-state concurrence of a truncated coherent state is about twice the
/// square root of its tail, so this keeps that column below `1e-7`.
pub const DIMER_TAIL_TOL: f64 = 1e-16;

/// Uniform grid of `steps + 1` phases on `[0, pi]`.
pub fn gt_grid(steps: usize) -> Result<Vec<f64>> {
    if steps == 0 {
        return Err(Error::Config("gt grid needs at least one step".into()));
    }
    Ok((0..=steps).map(|k| PI * k as f64 / steps as f64).collect())
}

/// Dimer concurrences per `(alpha, gt)`: the full evolved coherent state,
/// its single-excitation projection, its zero-and-one projection, and the
/// Wootters value of the decohered dimer.
pub fn cmd_dimer(alphas: &[f64], gt_steps: usize) -> Result<Table> {
    check_alphas(alphas)?;
    let grid = gt_grid(gt_steps)?;
    let config = json!({ "alpha": alphas, "gt_steps": gt_steps, "gt_range": [0.0, PI], "tail_tol": DIMER_TAIL_TOL });
    let mut table = Table::new("dimer", config, &["alpha", "gt", "full", "p1", "p01", "wootters_decohered"]);
    let points: Vec<(f64, f64)> = alphas.iter().flat_map(|&a| grid.iter().map(move |&gt| (a, gt))).collect();
    table.rows = points
        .par_iter()
        .map(|&(alpha, gt)| dimer_row(alpha, gt))
        .collect::<Result<Vec<_>>>()?;
    Ok(table)
}

fn dimer_row(alpha: f64, gt: f64) -> Result<Vec<f64>> {
    let dim = default_cutoff(alpha, DIMER_TAIL_TOL);
    let psi = evolve_with_vacuum(&coherent_truncated(alpha, dim, DIMER_TAIL_TOL)?, dim, gt)?;
    let full = concurrence_pure(&psi, &[0])?.value;
    let projected = |p: ExcitationProjector| -> Result<f64> {
        match project_renormalize(&psi, &p) {
            Ok((s, _)) => Ok(concurrence_pure(&s, &[0])?.value),
            Err(Error::ZeroWeight(_)) => Ok(0.0),
            Err(e) => Err(e),
        }
    };
    let p1 = projected(ExcitationProjector::single(psi.dims().clone()))?;
    let p01 = projected(ExcitationProjector::ground_and_single(psi.dims().clone()))?;
    let wootters = concurrence_wootters(&decohered_dimer_state(alpha, gt))?.value;
    Ok(vec![alpha, gt, full, p1, p01, wootters])
}

/// Maximal concurrence of the evolved leveled coherent state for every
/// alpha and `N = 2..=n_max`.
pub fn cmd_cmax_scan(alphas: &[f64], n_max: usize) -> Result<Table> {
    check_alphas(alphas)?;
    if alphas.contains(&0.0) {
        return Err(Error::Config("cmax scan needs alpha > 0".into()));
    }
    if n_max < 2 {
        return Err(Error::Config(format!("n-max must be at least 2, got {n_max}")));
    }
    let config = json!({ "alpha": alphas, "n_range": [2, n_max] });
    let mut table = Table::new("cmax-scan", config, &["alpha", "n", "cmax"]);
    let points: Vec<(f64, usize)> = alphas.iter().flat_map(|&a| (2..=n_max).map(move |n| (a, n))).collect();
    table.rows = points
        .par_iter()
        .map(|&(a, n)| Ok(vec![a, n as f64, cmax(a, n)?]))
        .collect::<Result<Vec<_>>>()?;
    Ok(table)
}

/// Extrapolated small-amplitude coefficients next to their closed forms.
pub fn cmd_fn_table(n_max: usize) -> Result<Table> {
    if n_max < 2 {
        return Err(Error::Config(format!("n-max must be at least 2, got {n_max}")));
    }
    let config = json!({ "n_range": [2, n_max], "probes": crate::entanglement::FN_PROBES });
    let mut table = Table::new("fn-table", config, &["n", "estimate", "reference", "delta", "probe_1e-2", "probe_1e-3"]);
    let estimates = (2..=n_max).into_par_iter().map(fn_estimate).collect::<Result<Vec<_>>>()?;
    let mut max_delta: f64 = 0.0;
    for est in estimates {
        let reference = fn_reference(est.n).unwrap_or(f64::NAN);
        let delta = est.value - reference;
        if delta.is_finite() {
            max_delta = max_delta.max(delta.abs());
        }
        table.rows.push(vec![est.n as f64, est.value, reference, delta, est.probes[0], est.probes[1]]);
    }
    table.notes.push(("max_abs_delta".into(), fmt_num(max_delta)));
    Ok(table)
}

fn default_alphas() -> Vec<f64> {
    vec![0.1, 0.2, 0.4]
}

/// Transport run description as read from TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransportConfig {
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default)]
    pub settings: RobustnessSettings,
    pub network: NetworkSpec,
}

/// Deserializes TOML, reporting parse failures (with their line and column)
/// as configuration errors.
pub fn parse_toml<T: DeserializeOwned>(text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
}

impl TransportConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: TransportConfig = parse_toml(text)?;
        cfg.network.validate()?;
        check_alphas(&cfg.alphas)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}

/// Result of the `transport` command.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransportOutput {
    pub version: String,
    pub config: TransportConfig,
    pub fit: Option<ScalingFit>,
    pub reports: Vec<EfficiencyReport>,
}

pub fn cmd_transport(config: &TransportConfig) -> Result<TransportOutput> {
    check_alphas(&config.alphas)?;
    let reports = robustness_sweep(&config.network, &config.alphas, &config.settings)?;
    Ok(TransportOutput {
        version: VERSION.to_string(),
        config: config.clone(),
        fit: fit_alpha_squared(&reports),
        reports,
    })
}

impl TransportOutput {
    pub const COLUMNS: [&'static str; 12] = [
        "alpha",
        "eff_full",
        "eff_restricted",
        "relative_difference",
        "scaling_coefficient",
        "normalized_eff_full",
        "normalized_eff_restricted",
        "max_c_p1",
        "max_c_p01_full",
        "max_c_p01_restricted",
        "predicted_prefactor",
        "unitary_full_concurrence",
    ];

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.reports
            .iter()
            .map(|r| {
                vec![
                    r.alpha,
                    r.full.efficiency.value,
                    r.restricted.efficiency.value,
                    r.relative_difference,
                    r.scaling_coefficient.unwrap_or(f64::NAN),
                    r.full.normalized_efficiency,
                    r.restricted.normalized_efficiency,
                    r.full.max_concurrence_p1,
                    r.full.max_concurrence_p01,
                    r.restricted.max_concurrence_p01,
                    r.predicted_prefactor,
                    r.unitary.as_ref().map_or(f64::NAN, |u| u.max_concurrence),
                ]
            })
            .collect()
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => serde_json::to_string_pretty(self).expect("report serializes") + "\n",
            Format::Csv => {
                let config = serde_json::to_value(&self.config).expect("config serializes");
                let mut out = header("transport", &config);
                if let Some(fit) = &self.fit {
                    let _ = writeln!(out, "# alpha2_coefficient: {}", fmt_num(fit.coefficient));
                    let _ = writeln!(out, "# alpha2_within_factor_two: {}", fit.within_factor_two);
                }
                for r in &self.reports {
                    let _ = writeln!(
                        out,
                        "# alpha {}: converged full={} restricted={}",
                        fmt_num(r.alpha),
                        r.full.efficiency.converged,
                        r.restricted.efficiency.converged
                    );
                }
                let _ = writeln!(out, "{}", Self::COLUMNS.join(","));
                for row in self.rows() {
                    let cells: Vec<String> = row.iter().map(|x| fmt_num(*x)).collect();
                    let _ = writeln!(out, "{}", cells.join(","));
                }
                out
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn dimer_row_at_quarter_period() {
        let table = cmd_dimer(&[0.3], 100).unwrap();
        let row = &table.rows[25];
        assert_abs_diff_eq!(row[1], PI / 4.0, epsilon = 1e-15);
        assert!(row[2] <= 1e-7);
        assert_abs_diff_eq!(row[3], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(row[4], 0.082569, epsilon = 1e-6);
        assert_abs_diff_eq!(row[5], 0.082569, epsilon = 1e-6);
        assert!(table.rows[0][2..].iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn csv_layout() {
        let csv = cmd_cmax_scan(&[0.3], 3).unwrap().to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], format!("# excitent {VERSION}"));
        assert_eq!(lines[1], "# command: cmax-scan");
        assert!(lines[2].starts_with("# config: {"));
        assert_eq!(lines[3], "alpha,n,cmax");
        assert_eq!(lines[4], "3.00000000000e-1,2.00000000000e0,8.25688073394e-2");
        assert!(lines[5].starts_with("3.00000000000e-1,3.00000000000e0,1.79347"));
    }

    #[test]
    fn bad_inputs_are_config_errors() {
        for err in [
            cmd_dimer(&[], 10).unwrap_err(),
            cmd_dimer(&[0.3], 0).unwrap_err(),
            cmd_cmax_scan(&[0.0], 4).unwrap_err(),
            cmd_fn_table(1).unwrap_err(),
        ] {
            assert_eq!(exit_code(&err), 2, "{err}");
        }
        let num = Error::PrecisionLoss { n: 9, first: 1.0, second: 2.0, rel: 0.5 };
        assert_eq!(exit_code(&num), 3);
    }

    #[test]
    fn transport_config_parse_errors_carry_location() {
        let err = TransportConfig::from_toml("alphas = [0.1,\n[network]\nenergies = 3\n").unwrap_err();
        assert!(err.to_string().contains("line"), "{err}");
        let err = TransportConfig::from_toml("[network]\nenergies = [0.0]\nentry = 0\nexit = 0\nsink_rate = 1.0\nbogus = 1\n")
            .unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }
}
