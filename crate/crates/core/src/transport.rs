//! Excitation transport on small coupled-site networks.
//!
//! Sites are bosonic modes coupled by pairwise exchange,
//! `H = sum_i e_i n_i - sum_{i<j} (g_ij a_i^dag a_j + h.c.)`. The minus sign
//! makes a resonant dimer with coupling `g` evolve exactly as
//! [`exchange_unitary`](crate::dynamics::exchange_unitary) at phase `g t`.
//!
//! Noise channels, all in units of a reference coupling:
//! - dephasing on site `i`: jump `sqrt(2 gamma_i) n_i`, so a coherence
//!   between site `i` and the vacuum decays as `exp(-gamma_i t)`;
//! - relaxation on site `i`: jump `sqrt(kappa_i) a_i`;
//! - trapping: an extra sink mode counts excitations taken from the exit
//!   site. The jump moves one quantum with amplitude `sqrt(Gamma n_exit)`
//!   and no `sqrt(n_sink + 1)` enhancement, so the sites see a plain
//!   `sqrt(Gamma) a_exit` loss and the sink occupation equals
//!   `Gamma * int <n_exit> dt`.
//!
//! The state space keeps every occupation pattern of sites plus sink whose
//! total excitation is at most `cap`. All channels except relaxation
//! conserve the total excitation number.

use std::collections::HashMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{lindblad_propagate, Integrator, LindbladSpec, Trajectory};
use crate::entanglement::linear_entropy_from_weights;
use crate::error::{Error, Result};
use crate::hilbert::{FockVector, ModeDims, ModeOperator};
use crate::linalg::{self, c, CMatrix, CVector, ZERO};
use crate::states::{coherent_tail, default_cutoff, leveled_coherent, Alpha};

/// One exchange bond `g_ij = g + i g_im` between two distinct sites.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coupling {
    pub sites: [usize; 2],
    pub g: f64,
    #[serde(default)]
    pub g_im: f64,
}

/// Sites, couplings and noise rates of a transport network. Energies and
/// rates are dimensionless (in units of a reference coupling).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub energies: Vec<f64>,
    #[serde(default)]
    pub couplings: Vec<Coupling>,
    /// Per-site pure dephasing rates; empty means none.
    #[serde(default)]
    pub dephasing: Vec<f64>,
    /// Per-site relaxation (excitation loss) rates; empty means none.
    #[serde(default)]
    pub relaxation: Vec<f64>,
    pub entry: usize,
    pub exit: usize,
    pub sink_rate: f64,
    /// Levels kept per site. `None` keeps every occupation allowed by the
    /// total cap; `Some(2)` makes sites hard-core two-level systems.
    #[serde(default)]
    pub site_levels: Option<usize>,
}

fn rates_ok(name: &str, rates: &[f64], m: usize) -> Result<()> {
    if !rates.is_empty() && rates.len() != m {
        return Err(Error::Config(format!("{name} has {} entries for {m} sites", rates.len())));
    }
    if let Some(r) = rates.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
        return Err(Error::Config(format!("{name} rate {r} must be finite and non-negative")));
    }
    Ok(())
}

impl NetworkSpec {
    pub fn sites(&self) -> usize {
        self.energies.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.sites();
        if m == 0 {
            return Err(Error::Config("network needs at least one site".into()));
        }
        if self.energies.iter().any(|e| !e.is_finite()) {
            return Err(Error::Config("site energies must be finite".into()));
        }
        rates_ok("dephasing", &self.dephasing, m)?;
        rates_ok("relaxation", &self.relaxation, m)?;
        if !(self.sink_rate.is_finite() && self.sink_rate >= 0.0) {
            return Err(Error::Config(format!("sink rate {} must be finite and non-negative", self.sink_rate)));
        }
        if self.entry >= m || self.exit >= m {
            return Err(Error::Config(format!(
                "entry {} / exit {} out of range for {m} sites",
                self.entry, self.exit
            )));
        }
        if let Some(levels) = self.site_levels {
            if levels < 2 {
                return Err(Error::Config(format!("site_levels must be at least 2, got {levels}")));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for bond in &self.couplings {
            let [i, j] = bond.sites;
            if i >= m || j >= m || i == j {
                return Err(Error::Config(format!("coupling between sites {i} and {j} is invalid")));
            }
            if !(bond.g.is_finite() && bond.g_im.is_finite()) {
                return Err(Error::Config(format!("coupling ({i}, {j}) is not finite")));
            }
            if !seen.insert((i.min(j), i.max(j))) {
                return Err(Error::Config(format!("coupling ({i}, {j}) listed twice")));
            }
        }
        Ok(())
    }

    /// Hermitian single-excitation hopping matrix `h_ij`, with
    /// `H = sum_ij h_ij a_i^dag a_j`.
    pub fn hopping_matrix(&self) -> CMatrix {
        let m = self.sites();
        let mut h = CMatrix::zeros(m, m);
        for (i, e) in self.energies.iter().enumerate() {
            h[(i, i)] = c(*e, 0.0);
        }
        for bond in &self.couplings {
            let [i, j] = bond.sites;
            let g = c(bond.g, bond.g_im);
            h[(i, j)] -= g;
            h[(j, i)] -= g.conj();
        }
        h
    }

    pub fn max_coupling(&self) -> f64 {
        self.couplings
            .iter()
            .map(|b| c(b.g, b.g_im).norm())
            .fold(0.0, f64::max)
    }

    /// Ten exchange periods `pi / g_max` of the strongest bond, or `10 pi`
    /// for an uncoupled network.
    pub fn default_window(&self) -> f64 {
        let g = self.max_coupling();
        if g > 0.0 {
            10.0 * PI / g
        } else {
            10.0 * PI
        }
    }

    /// Uniform chain `0 - 1 - ... - (m-1)` with equal couplings, entry at
    /// site 0 and exit at the last site.
    pub fn chain(m: usize, g: f64, dephasing: f64, sink_rate: f64) -> Self {
        NetworkSpec {
            energies: vec![0.0; m],
            couplings: (1..m).map(|i| Coupling { sites: [i - 1, i], g, g_im: 0.0 }).collect(),
            dephasing: vec![dephasing; m],
            relaxation: Vec::new(),
            entry: 0,
            exit: m.saturating_sub(1),
            sink_rate,
            site_levels: None,
        }
    }

    /// Seven-site demonstration network. The couplings and energies are
    /// arbitrary illustrative numbers, not fitted to any real complex.
    pub fn demo_seven_site() -> Self {
        let bonds = [
            ([0, 1], 1.0),
            ([1, 2], 0.6),
            ([2, 3], 0.8),
            ([3, 4], 0.5),
            ([4, 5], 0.9),
            ([5, 6], 0.7),
            ([0, 5], 0.3),
            ([1, 6], 0.4),
            ([2, 6], 0.35),
        ];
        NetworkSpec {
            energies: vec![0.0, 0.3, -0.2, 0.5, 0.1, -0.4, 0.2],
            couplings: bonds
                .iter()
                .map(|&(sites, g)| Coupling { sites, g, g_im: 0.0 })
                .collect(),
            dephasing: vec![0.5; 7],
            relaxation: Vec::new(),
            entry: 0,
            exit: 2,
            sink_rate: 1.0,
            site_levels: None,
        }
    }
}

/// Occupation patterns with bounded total excitation, ordered by total
/// excitation and then lexicographically.
#[derive(Clone, Debug)]
struct OccupationBasis {
    states: Vec<Vec<usize>>,
    index: HashMap<Vec<usize>, usize>,
}

impl OccupationBasis {
    fn new(mode_max: &[usize], cap: usize) -> Self {
        let mut states = Vec::new();
        for total in 0..=cap {
            let mut occ = vec![0; mode_max.len()];
            fill(&mut occ, 0, total, mode_max, &mut states);
        }
        let index = states.iter().enumerate().map(|(k, s)| (s.clone(), k)).collect();
        OccupationBasis { states, index }
    }

    fn len(&self) -> usize {
        self.states.len()
    }

    /// Matrix of the annihilation operator of `mode`, restricted to the basis.
    fn lower(&self, mode: usize) -> CMatrix {
        let n = self.len();
        let mut a = CMatrix::zeros(n, n);
        for (col, occ) in self.states.iter().enumerate() {
            if occ[mode] == 0 {
                continue;
            }
            let mut target = occ.clone();
            target[mode] -= 1;
            if let Some(&row) = self.index.get(&target) {
                a[(row, col)] = c((occ[mode] as f64).sqrt(), 0.0);
            }
        }
        a
    }

    /// Moves one quantum from `from` to `to` with amplitude `sqrt(n_from)`.
    fn transfer(&self, from: usize, to: usize) -> CMatrix {
        let n = self.len();
        let mut t = CMatrix::zeros(n, n);
        for (col, occ) in self.states.iter().enumerate() {
            if occ[from] == 0 {
                continue;
            }
            let mut target = occ.clone();
            target[from] -= 1;
            target[to] += 1;
            if let Some(&row) = self.index.get(&target) {
                t[(row, col)] = c((occ[from] as f64).sqrt(), 0.0);
            }
        }
        t
    }

    fn number(&self, mode: usize) -> CMatrix {
        let diag = CVector::from_iterator(self.len(), self.states.iter().map(|s| c(s[mode] as f64, 0.0)));
        CMatrix::from_diagonal(&diag)
    }

    fn excitation(&self, k: usize) -> usize {
        self.states[k].iter().sum()
    }
}

fn fill(occ: &mut Vec<usize>, mode: usize, left: usize, mode_max: &[usize], out: &mut Vec<Vec<usize>>) {
    if mode + 1 == occ.len() {
        if left <= mode_max[mode] {
            occ[mode] = left;
            out.push(occ.clone());
            occ[mode] = 0;
        }
        return;
    }
    for k in 0..=left.min(mode_max[mode]) {
        occ[mode] = k;
        fill(occ, mode + 1, left - k, mode_max, out);
    }
    occ[mode] = 0;
}

/// A network assembled on its excitation-capped state space, ready for
/// propagation.
#[derive(Clone, Debug)]
pub struct NetworkModel {
    spec: NetworkSpec,
    cap: usize,
    basis: OccupationBasis,
    lindblad: LindbladSpec,
}

/// Builds the Hamiltonian and jump operators of `spec` on the space of at
/// most `cap` total excitations (sites plus sink).
pub fn build_network(spec: &NetworkSpec, cap: usize) -> Result<NetworkModel> {
    spec.validate()?;
    if cap == 0 {
        return Err(Error::InvalidArgument("excitation cap must be at least 1".into()));
    }
    let m = spec.sites();
    let site_max = spec.site_levels.map_or(cap, |l| (l - 1).min(cap));
    let mut mode_max = vec![site_max; m];
    mode_max.push(cap);
    let basis = OccupationBasis::new(&mode_max, cap);
    let dims = ModeDims::single(basis.len())?;
    let lowers: Vec<CMatrix> = (0..m).map(|i| basis.lower(i)).collect();
    let hop = spec.hopping_matrix();
    let mut h = CMatrix::zeros(basis.len(), basis.len());
    for i in 0..m {
        for j in 0..m {
            if hop[(i, j)] != ZERO {
                h += lowers[i].adjoint() * &lowers[j] * hop[(i, j)];
            }
        }
    }
    let op = |mat: CMatrix| ModeOperator::new(dims.clone(), mat);
    let mut lindblad = LindbladSpec::new(&op(h)?.mark_hermitian()?)?;
    for (i, &g) in spec.dephasing.iter().enumerate() {
        lindblad = lindblad.with_jump(&op(basis.number(i))?, 2.0 * g)?;
    }
    for (i, &k) in spec.relaxation.iter().enumerate() {
        lindblad = lindblad.with_jump(&op(lowers[i].clone())?, k)?;
    }
    let trap = basis.transfer(spec.exit, m);
    lindblad = lindblad.with_jump(&op(trap)?, spec.sink_rate)?;
    Ok(NetworkModel {
        spec: spec.clone(),
        cap,
        basis,
        lindblad,
    })
}

impl NetworkModel {
    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn dimension(&self) -> usize {
        self.basis.len()
    }

    /// Number of basis states with exactly `n` excitations.
    pub fn block_dimension(&self, n: usize) -> usize {
        (0..self.dimension()).filter(|&k| self.basis.excitation(k) == n).count()
    }

    /// Occupations of basis state `k`; the last entry is the sink.
    pub fn occupations(&self, k: usize) -> &[usize] {
        &self.basis.states[k]
    }

    pub fn lindblad(&self) -> &LindbladSpec {
        &self.lindblad
    }

    pub fn hamiltonian(&self) -> &CMatrix {
        self.lindblad.hamiltonian()
    }

    /// Mode index of the sink.
    pub fn sink_mode(&self) -> usize {
        self.spec.sites()
    }

    pub fn number_operator(&self, mode: usize) -> CMatrix {
        self.basis.number(mode)
    }

    /// Basis index of the state with one excitation on `mode`.
    pub fn single_excitation_index(&self, mode: usize) -> Option<usize> {
        let mut occ = vec![0; self.spec.sites() + 1];
        occ[mode] = 1;
        self.basis.index.get(&occ).copied()
    }

    /// Diagonal projector onto the retained total-excitation numbers.
    pub fn projector(&self, retained: &[usize]) -> CMatrix {
        let diag = CVector::from_iterator(
            self.dimension(),
            (0..self.dimension()).map(|k| {
                if retained.contains(&self.basis.excitation(k)) {
                    c(1.0, 0.0)
                } else {
                    ZERO
                }
            }),
        );
        CMatrix::from_diagonal(&diag)
    }

    /// Pure state with `input` on the entry site and every other mode empty.
    pub fn entry_state(&self, input: &FockVector) -> Result<CVector> {
        if input.dims().num_modes() != 1 {
            return Err(Error::DimensionMismatch("entry input must be a single-mode state".into()));
        }
        let mut psi = CVector::zeros(self.dimension());
        for (n, amp) in input.amps().iter().enumerate() {
            if *amp == ZERO {
                continue;
            }
            let mut occ = vec![0; self.spec.sites() + 1];
            occ[self.spec.entry] = n;
            match self.basis.index.get(&occ) {
                Some(&k) => psi[k] = *amp,
                None => {
                    return Err(Error::DimensionMismatch(format!(
                        "input level {n} is outside the cap-{} network space",
                        self.cap
                    )))
                }
            }
        }
        Ok(psi)
    }

    /// Density matrix of [`entry_state`](Self::entry_state).
    pub fn entry_density(&self, input: &FockVector) -> Result<CMatrix> {
        let psi = self.entry_state(input)?;
        Ok(&psi * psi.adjoint())
    }

    /// Highest input level the entry site can hold.
    pub fn entry_levels(&self) -> usize {
        self.spec.site_levels.map_or(self.cap, |l| (l - 1).min(self.cap)) + 1
    }

    pub fn propagate(&self, rho0: &CMatrix, times: &[f64], integrator: Integrator) -> Result<Trajectory> {
        lindblad_propagate(&self.lindblad, rho0, times, integrator)
    }

    /// Pairwise concurrence `2 |rho_ij| / Tr(P rho)` between the
    /// single-excitation states of sites `i` and `j`, with `P` the projector
    /// onto `retained`. On a state supported on zero and one excitation this
    /// equals the Wootters concurrence of the reduced two-site state.
    pub fn pair_concurrence(&self, rho: &CMatrix, i: usize, j: usize, retained: &[usize]) -> f64 {
        let (Some(ki), Some(kj)) = (self.single_excitation_index(i), self.single_excitation_index(j)) else {
            return 0.0;
        };
        let weight: f64 = (0..self.dimension())
            .filter(|&k| retained.contains(&self.basis.excitation(k)))
            .map(|k| rho[(k, k)].re)
            .sum();
        if weight <= 0.0 {
            return 0.0;
        }
        2.0 * rho[(ki, kj)].norm() / weight
    }

    /// Largest [`pair_concurrence`](Self::pair_concurrence) over all site pairs.
    pub fn max_pair_concurrence(&self, rho: &CMatrix, retained: &[usize]) -> f64 {
        let m = self.spec.sites();
        let mut best: f64 = 0.0;
        for i in 0..m {
            for j in i + 1..m {
                best = best.max(self.pair_concurrence(rho, i, j, retained));
            }
        }
        best
    }
}

/// Uniform grid of `steps + 1` times on `[0, t_final]`.
pub fn time_grid(t_final: f64, steps: usize) -> Result<Vec<f64>> {
    if !(t_final > 0.0 && t_final.is_finite()) || steps == 0 {
        return Err(Error::InvalidArgument(format!(
            "time window {t_final} with {steps} steps is empty"
        )));
    }
    Ok((0..=steps).map(|k| t_final * k as f64 / steps as f64).collect())
}

/// Sink population at the end of a trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IntegratedEfficiency {
    pub value: f64,
    /// Growth of the sink population over the last tenth of the grid.
    pub tail_increment: f64,
    /// True when `tail_increment` is below [`CONVERGENCE_TOL`].
    pub converged: bool,
}

pub const CONVERGENCE_TOL: f64 = 1e-6;

/// Integrated efficiency: mean sink occupation at the final time, equal to
/// `Gamma * int <n_exit> dt`.
pub fn efficiency_integrated(trajectory: &Trajectory, model: &NetworkModel) -> Result<IntegratedEfficiency> {
    check_trajectory(trajectory, model)?;
    let sink = model.number_operator(model.sink_mode());
    let series = trajectory.expectation(&sink);
    let last = series.len() - 1;
    let start = last - (series.len() / 10).min(last);
    let value = series[last];
    let tail_increment = (value - series[start]).abs();
    Ok(IntegratedEfficiency {
        value,
        tail_increment,
        converged: tail_increment < CONVERGENCE_TOL,
    })
}

/// Highest mean exit-site occupation within `window` (the whole trajectory
/// when `None`) and the time it is reached.
pub fn efficiency_peak(
    trajectory: &Trajectory,
    model: &NetworkModel,
    window: Option<(f64, f64)>,
) -> Result<(f64, f64)> {
    check_trajectory(trajectory, model)?;
    let exit = model.number_operator(model.spec().exit);
    let (lo, hi) = window.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    trajectory
        .times
        .iter()
        .zip(trajectory.expectation(&exit))
        .filter(|(t, _)| **t >= lo && **t <= hi)
        .fold(None, |best: Option<(f64, f64)>, (t, p)| match best {
            Some((bp, _)) if bp >= p => best,
            _ => Some((p, *t)),
        })
        .ok_or_else(|| Error::InvalidArgument("peak window contains no grid time".into()))
}

fn check_trajectory(trajectory: &Trajectory, model: &NetworkModel) -> Result<()> {
    if trajectory.dims.total() != model.dimension() {
        return Err(Error::DimensionMismatch("trajectory does not belong to this network".into()));
    }
    if trajectory.states.is_empty() {
        return Err(Error::InvalidArgument("trajectory is empty".into()));
    }
    Ok(())
}

/// Options for [`truncation_robustness`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RobustnessSettings {
    /// End of the time window; `None` uses [`NetworkSpec::default_window`].
    pub t_final: Option<f64>,
    pub steps: usize,
    /// Fixed RK4 step; `None` selects the adaptive integrator.
    pub fixed_step: Option<f64>,
    pub peak_window: Option<(f64, f64)>,
    /// Run the noiseless full-state concurrence check.
    pub unitary_check: bool,
    /// Largest state space the noiseless check may use.
    pub unitary_max_dim: usize,
    pub unitary_tail: f64,
    pub unitary_samples: usize,
}

impl Default for RobustnessSettings {
    fn default() -> Self {
        RobustnessSettings {
            t_final: None,
            steps: 400,
            fixed_step: None,
            peak_window: None,
            unitary_check: true,
            unitary_max_dim: 1200,
            unitary_tail: 1e-12,
            unitary_samples: 64,
        }
    }
}

impl RobustnessSettings {
    pub fn integrator(&self) -> Integrator {
        match self.fixed_step {
            Some(dt) => Integrator::FixedStep { dt },
            None => Integrator::default(),
        }
    }
}

/// Observables of one propagation in a [`EfficiencyReport`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub cap: usize,
    /// `<n>` of the input on the entry site.
    pub input_mean_excitation: f64,
    /// Probability that the input holds at least one excitation.
    pub input_excitation_probability: f64,
    pub efficiency: IntegratedEfficiency,
    /// Efficiency divided by the input `<n>` (zero for the vacuum).
    pub normalized_efficiency: f64,
    pub peak_population: f64,
    pub peak_time: f64,
    /// Max pairwise concurrence over site pairs at each time, single-excitation projection.
    pub concurrence_p1: Vec<f64>,
    /// Same, projection onto zero and one excitation.
    pub concurrence_p01: Vec<f64>,
    pub max_concurrence_p1: f64,
    pub max_concurrence_p01: f64,
}

/// Largest bipartite concurrence of the noiseless network under coherent input.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UnitaryCheck {
    /// Total-excitation cap of the pure-state simulation.
    pub cap: usize,
    pub dimension: usize,
    /// Weight of the coherent input beyond the cap.
    pub input_tail: f64,
    /// Max over sample times and sites of the concurrence of `site | rest`.
    pub max_concurrence: f64,
}

/// Full-vs-restricted comparison for one input amplitude.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EfficiencyReport {
    pub alpha: f64,
    pub t_final: f64,
    pub times: Vec<f64>,
    /// Input `|alpha_N>` with every level the cap allows.
    pub full: RunSummary,
    /// Input projected onto zero and one excitation and renormalized.
    pub restricted: RunSummary,
    /// `|eff_full - eff_restricted| / eff_full` (zero when both vanish).
    pub relative_difference: f64,
    /// `relative_difference / |alpha|^2`.
    pub scaling_coefficient: Option<f64>,
    /// `|<T>(rho) - <T>(P01 rho P01)|` with the unnormalized projection.
    pub projected_difference: f64,
    /// `sum_{n >= 2} n p_n` of the input; bounds `projected_difference`.
    pub projected_bound: f64,
    /// `|alpha|^2 / (1 + |alpha|^2)`.
    pub predicted_prefactor: f64,
    pub unitary: Option<UnitaryCheck>,
}

/// Compares transport from the full capped input with transport from its
/// zero-plus-one-excitation projection.
pub fn truncation_robustness(spec: &NetworkSpec, alpha: f64, settings: &RobustnessSettings) -> Result<EfficiencyReport> {
    if !alpha.is_finite() {
        return Err(Error::NonFinite);
    }
    let t_final = settings.t_final.unwrap_or_else(|| spec.default_window());
    let times = time_grid(t_final, settings.steps)?;
    let full_model = build_network(spec, 2)?;
    let restricted_model = build_network(spec, 1)?;

    let full_input = leveled_coherent(alpha, full_model.entry_levels())?;
    let restricted_input = leveled_coherent(alpha, 2)?;

    let full = run_summary(&full_model, &full_input, &times, settings)?;
    let restricted = run_summary(&restricted_model, &restricted_input, &times, settings)?;

    let relative_difference = if full.efficiency.value.abs() > 0.0 {
        (full.efficiency.value - restricted.efficiency.value).abs() / full.efficiency.value.abs()
    } else {
        (restricted.efficiency.value).abs()
    };
    let x = alpha * alpha;
    let scaling_coefficient = (x > 0.0).then(|| relative_difference / x);

    // <T> on P01 rho P01 without renormalization: the restricted run scaled
    // by the input's zero-and-one-excitation weight
    let p = full_input.amps().map(|a| a.norm_sqr());
    let weight01 = p[0] + if p.len() > 1 { p[1] } else { 0.0 };
    let projected = restricted.efficiency.value * weight01;
    let projected_difference = (full.efficiency.value - projected).abs();
    let projected_bound = p.iter().enumerate().skip(2).map(|(n, w)| n as f64 * w).sum();

    let unitary = if settings.unitary_check {
        unitary_full_concurrence(spec, alpha, &times, settings)?
    } else {
        None
    };

    Ok(EfficiencyReport {
        alpha,
        t_final,
        times,
        full,
        restricted,
        relative_difference,
        scaling_coefficient,
        projected_difference,
        projected_bound,
        predicted_prefactor: x / (1.0 + x),
        unitary,
    })
}

fn run_summary(model: &NetworkModel, input: &FockVector, times: &[f64], settings: &RobustnessSettings) -> Result<RunSummary> {
    let rho0 = model.entry_density(input)?;
    let trajectory = model.propagate(&rho0, times, settings.integrator())?;
    let efficiency = efficiency_integrated(&trajectory, model)?;
    let (peak_population, peak_time) = efficiency_peak(&trajectory, model, settings.peak_window)?;
    let p = input.amps().map(|a| a.norm_sqr());
    let mean: f64 = p.iter().enumerate().map(|(n, w)| n as f64 * w).sum();
    let concurrence_p1: Vec<f64> = trajectory.states.iter().map(|r| model.max_pair_concurrence(r, &[1])).collect();
    let concurrence_p01: Vec<f64> = trajectory.states.iter().map(|r| model.max_pair_concurrence(r, &[0, 1])).collect();
    let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    Ok(RunSummary {
        cap: model.cap(),
        input_mean_excitation: mean,
        input_excitation_probability: 1.0 - p[0],
        normalized_efficiency: if mean > 0.0 { efficiency.value / mean } else { 0.0 },
        efficiency,
        peak_population,
        peak_time,
        max_concurrence_p1: max(&concurrence_p1),
        max_concurrence_p01: max(&concurrence_p01),
        concurrence_p1,
        concurrence_p01,
    })
}

/// Noiseless run with a coherent entry state kept to `unitary_tail`. The
/// exact evolution is a product of coherent states, so every `site | rest`
/// concurrence stays at the level set by the truncated tail.
fn unitary_full_concurrence(
    spec: &NetworkSpec,
    alpha: f64,
    times: &[f64],
    settings: &RobustnessSettings,
) -> Result<Option<UnitaryCheck>> {
    let levels = default_cutoff(alpha, settings.unitary_tail);
    let cap = levels - 1;
    let m = spec.sites();
    let basis = OccupationBasis::new(&vec![cap; m], cap);
    if basis.len() > settings.unitary_max_dim {
        return Ok(None);
    }
    let mut h = CMatrix::zeros(basis.len(), basis.len());
    let hop = spec.hopping_matrix();
    let lowers: Vec<CMatrix> = (0..m).map(|i| basis.lower(i)).collect();
    for i in 0..m {
        for j in 0..m {
            if hop[(i, j)] != ZERO {
                h += lowers[i].adjoint() * &lowers[j] * hop[(i, j)];
            }
        }
    }
    let (vals, vecs) = linalg::hermitian_eigen(&h);
    let input = leveled_coherent(alpha, levels)?;
    let mut psi0 = CVector::zeros(basis.len());
    for (n, amp) in input.amps().iter().enumerate() {
        let mut occ = vec![0; m];
        occ[spec.entry] = n;
        psi0[basis.index[&occ]] = *amp;
    }
    let coeffs = vecs.adjoint() * &psi0;
    let samples = settings.unitary_samples.max(1);
    let t_end = *times.last().expect("grid is non-empty");
    let mut worst: f64 = 0.0;
    for s in 0..=samples {
        let t = t_end * s as f64 / samples as f64;
        let phased = CVector::from_iterator(
            vals.len(),
            vals.iter().zip(coeffs.iter()).map(|(e, k)| k * c(0.0, -e * t).exp()),
        );
        let psi = &vecs * phased;
        for site in 0..m {
            worst = worst.max(site_concurrence(&basis, &psi, site, cap));
        }
    }
    Ok(Some(UnitaryCheck {
        cap,
        dimension: basis.len(),
        input_tail: coherent_tail(Alpha::from(alpha), levels),
        max_concurrence: worst,
    }))
}

/// Pure-state concurrence of `site | rest` for a vector on an occupation basis.
fn site_concurrence(basis: &OccupationBasis, psi: &CVector, site: usize, cap: usize) -> f64 {
    let mut rest_index: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut entries = Vec::with_capacity(basis.len());
    for (k, occ) in basis.states.iter().enumerate() {
        let mut rest = occ.clone();
        rest.remove(site);
        let next = rest_index.len();
        let col = *rest_index.entry(rest).or_insert(next);
        entries.push((occ[site], col, psi[k]));
    }
    let mut mat = CMatrix::zeros(cap + 1, rest_index.len());
    for (row, col, amp) in entries {
        mat[(row, col)] = amp;
    }
    let weights: Vec<f64> = linalg::singular_values(&mat).iter().map(|s| s * s).collect();
    (2.0 * linear_entropy_from_weights(&weights)).sqrt()
}

/// Least-squares fit `relative_difference = c |alpha|^2` over a sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingFit {
    pub coefficient: f64,
    /// `relative_difference / (c |alpha|^2)` at each nonzero alpha.
    pub ratios: Vec<f64>,
    /// All ratios lie in `[1/2, 2]`.
    pub within_factor_two: bool,
}

pub fn fit_alpha_squared(reports: &[EfficiencyReport]) -> Option<ScalingFit> {
    let points: Vec<(f64, f64)> = reports
        .iter()
        .filter(|r| r.alpha != 0.0)
        .map(|r| (r.alpha * r.alpha, r.relative_difference))
        .collect();
    if points.is_empty() {
        return None;
    }
    let sxx: f64 = points.iter().map(|(x, _)| x * x).sum();
    let sxy: f64 = points.iter().map(|(x, y)| x * y).sum();
    let coefficient = sxy / sxx;
    let ratios: Vec<f64> = points.iter().map(|(x, y)| y / (coefficient * x)).collect();
    let within_factor_two = ratios.iter().all(|r| (0.5..=2.0).contains(r));
    Some(ScalingFit {
        coefficient,
        ratios,
        within_factor_two,
    })
}

/// Reports for every alpha, computed in parallel and returned in input order.
pub fn robustness_sweep(spec: &NetworkSpec, alphas: &[f64], settings: &RobustnessSettings) -> Result<Vec<EfficiencyReport>> {
    spec.validate()?;
    alphas
        .par_iter()
        .map(|&a| truncation_robustness(spec, a, settings))
        .collect()
}
