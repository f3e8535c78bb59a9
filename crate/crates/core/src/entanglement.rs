//! Excitation-number projections and concurrence.
//!
//! Pure-state concurrence is `sqrt(2 (1 - Tr rho_A^2))`. The linear entropy
//! `1 - Tr rho_A^2` is evaluated from the Schmidt weights as
//! `2 * sum_{i<j} w_i w_j`, which has no cancellation, so values down to the
//! underflow range keep full relative accuracy. That matters for the
//! maximal concurrence of leveled coherent states, which scales like
//! `|alpha|^N`.

use std::collections::BTreeSet;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::Serialize;
use twofloat::TwoFloat;

use crate::dynamics::evolve_with_vacuum;
use crate::error::{Error, Result};
use crate::hilbert::{partial_trace, purity, DensityMatrix, FockVector, ModeDims, ModeOperator};
use crate::linalg::{self, c, CMatrix, CVector, ONE, ZERO};
use crate::states::{leveled_coherent, leveled_norm, Alpha};

/// Smallest projected norm accepted by [`project_renormalize`].
pub const MIN_PROJECTED_NORM: f64 = 1e-14;

static CLAMP_COUNT: AtomicUsize = AtomicUsize::new(0);

/// How many times a negative linear entropy from round-off was clamped to
/// zero since process start.
pub fn clamp_count() -> usize {
    CLAMP_COUNT.load(Ordering::Relaxed)
}

/// Projector onto the basis states whose total excitation number is in
/// `retained`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExcitationProjector {
    dims: ModeDims,
    retained: BTreeSet<usize>,
}

impl ExcitationProjector {
    pub fn new(dims: ModeDims, retained: impl IntoIterator<Item = usize>) -> Self {
        ExcitationProjector {
            dims,
            retained: retained.into_iter().collect(),
        }
    }

    /// Single-excitation projector `P_1`.
    pub fn single(dims: ModeDims) -> Self {
        Self::new(dims, [1])
    }

    /// Ground plus single-excitation projector `P_{0,1}`.
    pub fn ground_and_single(dims: ModeDims) -> Self {
        Self::new(dims, [0, 1])
    }

    /// `P_{0,1,...,k}`.
    pub fn up_to(dims: ModeDims, k: usize) -> Self {
        Self::new(dims, 0..=k)
    }

    pub fn dims(&self) -> &ModeDims {
        &self.dims
    }

    pub fn retained(&self) -> &BTreeSet<usize> {
        &self.retained
    }

    pub fn keeps(&self, index: usize) -> bool {
        self.retained.contains(&self.dims.excitations_of(index))
    }

    pub fn operator(&self) -> ModeOperator {
        let n = self.dims.total();
        let diag = CVector::from_iterator(n, (0..n).map(|i| if self.keeps(i) { ONE } else { ZERO }));
        ModeOperator::new(self.dims.clone(), CMatrix::from_diagonal(&diag))
            .and_then(ModeOperator::mark_hermitian)
            .expect("diagonal projector has matching shape")
    }

    /// `P |psi>`, unnormalized.
    pub fn apply(&self, psi: &FockVector) -> Result<CVector> {
        if psi.dims() != &self.dims {
            return Err(Error::DimensionMismatch("projector and state dims differ".into()));
        }
        let mut out = psi.amps().clone();
        for i in 0..out.len() {
            if !self.keeps(i) {
                out[i] = ZERO;
            }
        }
        Ok(out)
    }

    /// `P rho P`, unnormalized.
    pub fn sandwich(&self, rho: &CMatrix) -> CMatrix {
        let n = self.dims.total();
        CMatrix::from_fn(n, n, |i, j| if self.keeps(i) && self.keeps(j) { rho[(i, j)] } else { ZERO })
    }
}

/// Projects and renormalizes, returning the new state and the squared weight
/// `||P psi||^2`.
pub fn project_renormalize(state: &FockVector, projector: &ExcitationProjector) -> Result<(FockVector, f64)> {
    let raw = projector.apply(state)?;
    let norm = raw.norm();
    if norm.is_nan() || norm <= MIN_PROJECTED_NORM {
        return Err(Error::ZeroWeight(norm * norm));
    }
    let psi = FockVector::normalized(state.dims().clone(), raw)?;
    Ok((psi, norm * norm))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConcurrenceMethod {
    PurePurity,
    Wootters,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConcurrenceResult {
    pub value: f64,
    /// Modes on the A side of the bipartition.
    pub side_a: Vec<usize>,
    pub method: ConcurrenceMethod,
}

/// `sqrt(2 (1 - purity))`, clamping negative round-off to zero.
pub fn concurrence_from_purity(purity: f64) -> f64 {
    let linear_entropy = 1.0 - purity;
    if linear_entropy < 0.0 {
        CLAMP_COUNT.fetch_add(1, Ordering::Relaxed);
        return 0.0;
    }
    (2.0 * linear_entropy).sqrt()
}

/// `1 - sum w_i^2` for weights summing to one, as `2 sum_{i<j} w_i w_j`
/// accumulated from the smallest weights up.
pub fn linear_entropy_from_weights(weights: &[f64]) -> f64 {
    let mut w: Vec<f64> = weights.iter().map(|&x| x.max(0.0)).collect();
    w.sort_by(|a, b| a.total_cmp(b));
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let mut suffix = 0.0;
    let mut pairs = 0.0;
    for &x in &w {
        pairs += x * suffix;
        suffix += x;
    }
    2.0 * pairs / (total * total)
}

/// Pure-state concurrence across `side_a | rest`.
pub fn concurrence_pure(state: &FockVector, side_a: &[usize]) -> Result<ConcurrenceResult> {
    let norm = state.amps().norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized(norm));
    }
    let weights = state.schmidt_weights(side_a)?;
    let value = (2.0 * linear_entropy_from_weights(&weights)).sqrt();
    let mut side = side_a.to_vec();
    side.sort_unstable();
    side.dedup();
    Ok(ConcurrenceResult {
        value,
        side_a: side,
        method: ConcurrenceMethod::PurePurity,
    })
}

/// Same quantity as [`concurrence_pure`], evaluated literally as a partial
/// trace followed by the purity. Loses relative accuracy once the
/// concurrence drops below about `1e-8`.
pub fn concurrence_pure_via_trace(state: &FockVector, side_a: &[usize]) -> Result<ConcurrenceResult> {
    let rho_a = partial_trace(&state.to_density(), side_a)?;
    Ok(ConcurrenceResult {
        value: concurrence_from_purity(purity(&rho_a)),
        side_a: side_a.to_vec(),
        method: ConcurrenceMethod::PurePurity,
    })
}

/// Wootters concurrence of a two-qubit density matrix.
///
/// With `rho = sum_i |v_i><v_i|` (eigenvectors scaled by the square roots of
/// their eigenvalues), the numbers `lambda_i` are the singular values of
/// `tau_ij = <v_i| (sigma_y x sigma_y) |v_j^*>`; this avoids square roots of
/// near-zero eigenvalues of `rho rho~`.
pub fn concurrence_wootters(rho: &DensityMatrix) -> Result<ConcurrenceResult> {
    if rho.dims().modes() != [2, 2] {
        return Err(Error::DimensionMismatch(format!(
            "Wootters concurrence needs dims (2, 2), got {:?}",
            rho.dims().modes()
        )));
    }
    let herm = (rho.mat() + rho.mat().adjoint()) * c(0.5, 0.0);
    let (vals, vecs) = linalg::hermitian_eigen(&herm);
    let mut v = vecs.clone();
    for (j, &p) in vals.iter().enumerate() {
        let s = p.max(0.0).sqrt();
        for i in 0..4 {
            v[(i, j)] *= s;
        }
    }
    let m1 = c(-1.0, 0.0);
    let yy = CMatrix::from_row_slice(
        4,
        4,
        &[ZERO, ZERO, ZERO, m1, ZERO, ZERO, ONE, ZERO, ZERO, ONE, ZERO, ZERO, m1, ZERO, ZERO, ZERO],
    );
    let tau = v.adjoint() * yy * v.conjugate();
    let lambdas = linalg::singular_values(&tau);
    let value = (lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3]).max(0.0);
    Ok(ConcurrenceResult {
        value,
        side_a: vec![0],
        method: ConcurrenceMethod::Wootters,
    })
}

/// Leveled coherent state `|alpha_N>` on site A and vacuum on site B,
/// evolved by the exchange interaction on dims `(N, N)`.
pub fn evolved_leveled_state(alpha: impl Into<Alpha>, levels: usize, gt: f64) -> Result<FockVector> {
    if levels < 2 {
        return Err(Error::InvalidDimension(levels));
    }
    evolve_with_vacuum(&leveled_coherent(alpha, levels)?, levels, gt)
}

/// Number of grid intervals used by [`cmax`] to confirm the maximizer.
pub const CMAX_GRID: usize = 256;
/// Relative slack allowed when comparing grid values against `gt = pi/4`.
pub const CMAX_TOL: f64 = 1e-9;

/// Concurrence of [`evolved_leveled_state`] at small and moderate `|alpha|`.
///
/// Exchange maps `a^dag -> cos(gt) a^dag + i sin(gt) b^dag`, so the evolved
/// amplitude on `|j, k>` is `(alpha cos)^j (i alpha sin)^k / sqrt(j! k!)` for
/// `j + k < N` and zero otherwise. Up to local phases this is a rank-one
/// matrix cut to a triangle, and every 2x2 minor of the coefficient matrix
/// is of order `|alpha|^N` or smaller. Double precision cannot resolve that
/// below `|alpha|` of about `1e-2`, so the coefficients and minors are formed
/// in double-double arithmetic and the linear entropy is summed from the
/// minors (`sum_{i<j} w_i w_j` equals the sum of squared 2x2 minors).
pub fn leveled_concurrence(alpha: impl Into<Alpha>, levels: usize, gt: f64) -> Result<f64> {
    let alpha = alpha.into();
    if levels < 2 {
        return Err(Error::InvalidDimension(levels));
    }
    if !gt.is_finite() || !alpha.modulus().is_finite() {
        return Err(Error::NonFinite);
    }
    let x = TwoFloat::from(alpha.modulus() * gt.cos().abs());
    let y = TwoFloat::from(alpha.modulus() * gt.sin().abs());
    // both products in a minor share the factor 1/sqrt(j1! j2! k1! k2!), so
    // only the powers go through double-double (its division is not exact)
    let mut inv_sqrt_fact = vec![1.0f64; levels];
    let mut fact = 1.0f64;
    for (n, slot) in inv_sqrt_fact.iter_mut().enumerate().skip(1) {
        fact *= n as f64;
        *slot = 1.0 / fact.sqrt();
    }
    let mut pow_x = vec![TwoFloat::from(1.0); levels];
    let mut pow_y = vec![TwoFloat::from(1.0); levels];
    for n in 1..levels {
        pow_x[n] = pow_x[n - 1] * x;
        pow_y[n] = pow_y[n - 1] * y;
    }
    let zero = TwoFloat::from(0.0);
    let powers = |j: usize, k: usize| if j + k < levels { pow_x[j] * pow_y[k] } else { zero };
    let mut norm_sq = 0.0;
    for j in 0..levels {
        for k in 0..levels - j {
            let v = f64::from(powers(j, k)) * inv_sqrt_fact[j] * inv_sqrt_fact[k];
            norm_sq += v * v;
        }
    }
    let mut minors = 0.0;
    for j1 in 0..levels {
        for j2 in j1 + 1..levels {
            for k1 in 0..levels - j1 {
                for k2 in k1 + 1..levels - j1 {
                    let diff = powers(j1, k1) * powers(j2, k2) - powers(j1, k2) * powers(j2, k1);
                    let det = f64::from(diff) * inv_sqrt_fact[j1] * inv_sqrt_fact[j2] * inv_sqrt_fact[k1] * inv_sqrt_fact[k2];
                    minors += det * det;
                }
            }
        }
    }
    // C = sqrt(2 (1 - Tr rho_A^2)) = 2 sqrt(sum_{i<j} w_i w_j) for unit norm
    Ok(2.0 * minors.sqrt() / norm_sq)
}

/// Maximal concurrence over `gt` of the evolved leveled coherent state.
///
/// Evaluates `gt = pi/4` and confirms on a uniform grid over `[0, pi/2]` that
/// no point exceeds it by more than [`CMAX_TOL`] (relative).
pub fn cmax(alpha: impl Into<Alpha>, levels: usize) -> Result<f64> {
    let alpha = alpha.into();
    if levels < 2 {
        return Err(Error::InvalidDimension(levels));
    }
    if alpha.modulus() == 0.0 {
        return Err(Error::InvalidArgument("cmax needs |alpha| > 0".into()));
    }
    let quarter = leveled_concurrence(alpha, levels, FRAC_PI_4)?;
    for k in 0..=CMAX_GRID {
        let gt = FRAC_PI_2 * k as f64 / CMAX_GRID as f64;
        let value = leveled_concurrence(alpha, levels, gt)?;
        if value > quarter * (1.0 + CMAX_TOL) {
            return Err(Error::MaximizerMismatch {
                n: levels,
                gt,
                grid: value,
                quarter,
            });
        }
    }
    Ok(quarter)
}

/// `f_N(|alpha|^2) = C_max^(N) * norm_{alpha,N} / |alpha|^N` at a given alpha.
pub fn fn_at(alpha: f64, levels: usize) -> Result<f64> {
    let value = cmax(alpha, levels)?;
    Ok(value * leveled_norm(alpha, levels) / alpha.abs().powi(levels as i32))
}

/// Small-alpha probe points used by [`fn_estimate`].
pub const FN_PROBES: [f64; 2] = [1e-2, 1e-3];
/// Relative disagreement between the two probes that counts as precision loss.
pub const FN_AGREEMENT: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FnEstimate {
    pub n: usize,
    /// Extrapolated leading-order coefficient.
    pub value: f64,
    /// Raw `f_N` at the two probe amplitudes.
    pub probes: [f64; 2],
}

/// Leading-order coefficient of `f_N` as `|alpha| -> 0`, extrapolated
/// linearly in `|alpha|^2` from two small-alpha evaluations.
pub fn fn_estimate(levels: usize) -> Result<FnEstimate> {
    if levels < 2 {
        return Err(Error::InvalidDimension(levels));
    }
    let [a1, a2] = FN_PROBES;
    let f1 = fn_at(a1, levels)?;
    let f2 = fn_at(a2, levels)?;
    let rel = (f1 - f2).abs() / f2.abs();
    if !rel.is_finite() || rel > FN_AGREEMENT {
        return Err(Error::PrecisionLoss {
            n: levels,
            first: f1,
            second: f2,
            rel,
        });
    }
    let (x1, x2) = (a1 * a1, a2 * a2);
    let value = (x1 * f2 - x2 * f1) / (x1 - x2);
    Ok(FnEstimate {
        n: levels,
        value,
        probes: [f1, f2],
    })
}

/// Tabulated leading-order coefficients `f_N` for `N = 2..=7`, in closed form.
pub fn fn_reference(levels: usize) -> Option<f64> {
    let v = match levels {
        2 => 1.0,
        3 => 1.0 / 2f64.sqrt(),
        4 => 0.25 * (7.0f64 / 3.0).sqrt(),
        5 => 1.0 / (4.0 * 2f64.sqrt()),
        6 => (31.0f64 / 10.0).sqrt() / 24.0,
        7 => 1.0 / (16.0 * 5f64.sqrt()),
        _ => return None,
    };
    Some(v)
}

/// Four-decimal values printed alongside the closed forms.
#[allow(clippy::approx_constant)]
pub fn fn_reference_rounded(levels: usize) -> Option<f64> {
    match levels {
        2 => Some(1.0),
        3 => Some(0.7071),
        4 => Some(0.3819),
        5 => Some(0.1768),
        6 => Some(0.0734),
        7 => Some(0.0280),
        _ => None,
    }
}
