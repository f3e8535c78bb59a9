//! Initial-state constructors: number states, truncated and leveled coherent
//! states, and spin (atomic) coherent states.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{annihilation, FockVector, ModeDims, ModeOperator};
use crate::linalg::{self, c, CVector, C64};

/// Default bound on the probability mass discarded by truncating a coherent
/// state.
pub const DEFAULT_TAIL_TOL: f64 = 1e-12;

/// Coherent amplitude; `|alpha|^2` is the mean excitation number.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Alpha(pub C64);

impl Alpha {
    pub fn value(self) -> C64 {
        self.0
    }

    pub fn modulus(self) -> f64 {
        self.0.norm()
    }

    pub fn mean_excitation(self) -> f64 {
        self.0.norm_sqr()
    }
}

impl From<f64> for Alpha {
    fn from(x: f64) -> Self {
        Alpha(c(x, 0.0))
    }
}

impl From<C64> for Alpha {
    fn from(z: C64) -> Self {
        Alpha(z)
    }
}

pub fn fock(dim: usize, n: usize) -> Result<FockVector> {
    let dims = ModeDims::single(dim)?;
    if n >= dim {
        return Err(Error::LevelOutOfRange { level: n, dim });
    }
    FockVector::basis(dims, &[n])
}

/// Unnormalized coefficients `alpha^n / sqrt(n!)` for `n < dim`.
fn poisson_amplitudes(alpha: C64, dim: usize) -> CVector {
    let mut amps = CVector::zeros(dim);
    let mut a = c(1.0, 0.0);
    for n in 0..dim {
        if n > 0 {
            a = a * alpha / (n as f64).sqrt();
        }
        amps[n] = a;
    }
    amps
}

/// Probability weight of a coherent state beyond level `dim - 1`,
/// `exp(-|alpha|^2) * sum_{n >= dim} |alpha|^(2n) / n!`, summed directly so
/// that tiny tails keep their relative accuracy.
pub fn coherent_tail(alpha: impl Into<Alpha>, dim: usize) -> f64 {
    let x = alpha.into().mean_excitation();
    if x == 0.0 {
        return if dim == 0 { 1.0 } else { 0.0 };
    }
    // log of the first neglected term, exp(-x) x^dim / dim!
    let mut log_term = -x + dim as f64 * x.ln() - ln_factorial(dim);
    let mut sum = 0.0;
    let mut n = dim;
    loop {
        let term = log_term.exp();
        sum += term;
        n += 1;
        log_term += x.ln() - (n as f64).ln();
        if n as f64 > x && (term < sum * 1e-17 || term == 0.0) {
            break;
        }
        if n > dim + 10_000 {
            break;
        }
    }
    sum.min(1.0)
}

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

/// Smallest cutoff dimension (at least 2) whose discarded tail is at most
/// `tail_tol`.
pub fn default_cutoff(alpha: impl Into<Alpha>, tail_tol: f64) -> usize {
    let alpha = alpha.into();
    let mut dim = 2;
    while coherent_tail(alpha, dim) > tail_tol {
        dim += 1;
    }
    dim
}

/// Coherent state truncated to `dim` levels and renormalized. Fails when the
/// discarded Poisson tail exceeds `tail_tol`.
pub fn coherent_truncated(alpha: impl Into<Alpha>, dim: usize, tail_tol: f64) -> Result<FockVector> {
    let alpha = alpha.into();
    if dim < 2 {
        return Err(Error::InvalidDimension(dim));
    }
    let tail = coherent_tail(alpha, dim);
    if tail > tail_tol {
        return Err(Error::Truncation {
            tail,
            tol: tail_tol,
            dim,
        });
    }
    FockVector::normalized(ModeDims::single(dim)?, poisson_amplitudes(alpha.value(), dim))
}

/// Coherent state on the smallest cutoff meeting [`DEFAULT_TAIL_TOL`].
pub fn coherent(alpha: impl Into<Alpha>) -> FockVector {
    let alpha = alpha.into();
    let dim = default_cutoff(alpha, DEFAULT_TAIL_TOL);
    coherent_truncated(alpha, dim, DEFAULT_TAIL_TOL).expect("cutoff chosen to meet the tail bound")
}

/// Squared norm of the first `levels` coherent-state terms,
/// `sum_{n < levels} |alpha|^(2n) / n!`.
pub fn leveled_norm(alpha: impl Into<Alpha>, levels: usize) -> f64 {
    let x = alpha.into().mean_excitation();
    let mut term = 1.0;
    let mut sum = 0.0;
    for n in 0..levels {
        if n > 0 {
            term *= x / n as f64;
        }
        sum += term;
    }
    sum
}

/// Coherent state projected onto the lowest `levels` levels and
/// renormalized, living on a single mode of dimension `levels`.
pub fn leveled_coherent(alpha: impl Into<Alpha>, levels: usize) -> Result<FockVector> {
    if levels < 1 {
        return Err(Error::InvalidDimension(levels));
    }
    let alpha = alpha.into();
    let amps = poisson_amplitudes(alpha.value(), levels) / c(leveled_norm(alpha, levels).sqrt(), 0.0);
    FockVector::new(ModeDims::single(levels)?, amps)
}

/// Displacement operator `exp(alpha a^dag - alpha^* a)` on a truncated mode.
/// Only the low-lying columns are faithful to the untruncated operator.
pub fn displacement(alpha: impl Into<Alpha>, dim: usize) -> Result<ModeOperator> {
    let alpha = alpha.into().value();
    let a = annihilation(dim)?;
    let generator = a.mat().adjoint() * alpha - a.mat() * alpha.conj();
    let mat = linalg::expm(&generator, 1.0)?;
    ModeOperator::new(a.dims().clone(), mat)?.mark_unitary()
}

/// Spin coherent state parameters: spin `s = twice_s / 2` rotated from the
/// lowest-weight state to polar angle `theta` and azimuth `phi`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinParam {
    twice_s: u32,
    pub theta: f64,
    pub phi: f64,
}

impl SpinParam {
    pub fn new(twice_s: u32, theta: f64, phi: f64) -> Result<Self> {
        if twice_s < 1 {
            return Err(Error::InvalidArgument("spin must be at least 1/2".into()));
        }
        if !theta.is_finite() || !phi.is_finite() {
            return Err(Error::InvalidArgument("non-finite spin angle".into()));
        }
        Ok(SpinParam { twice_s, theta, phi })
    }

    /// Chooses the angles so that the mean excitation `2s sin^2(theta/2)`
    /// equals `|alpha|^2` and the azimuth equals `arg(alpha)`.
    pub fn matching(alpha: impl Into<Alpha>, twice_s: u32) -> Result<Self> {
        let alpha = alpha.into();
        let ratio = alpha.mean_excitation() / twice_s.max(1) as f64;
        if ratio > 1.0 {
            return Err(Error::InvalidArgument(format!(
                "mean excitation {} exceeds 2s = {twice_s}",
                alpha.mean_excitation()
            )));
        }
        let theta = 2.0 * ratio.sqrt().asin();
        Self::new(twice_s, theta.min(PI), alpha.value().arg())
    }

    pub fn twice_s(&self) -> u32 {
        self.twice_s
    }

    /// Number of levels, `2s + 1`.
    pub fn levels(&self) -> usize {
        self.twice_s as usize + 1
    }
}

/// SU(2) coherent state in the Dicke basis; level `m` counts raisings from
/// the lowest-weight state, which maps to the vacuum.
pub fn spin_coherent(param: SpinParam) -> Result<FockVector> {
    let k = param.twice_s as usize;
    let (half_sin, half_cos) = (param.theta / 2.0).sin_cos();
    let mut amps = CVector::zeros(k + 1);
    for m in 0..=k {
        let binom = ln_factorial(k) - ln_factorial(m) - ln_factorial(k - m);
        let mag = (0.5 * binom).exp() * half_cos.powi((k - m) as i32) * half_sin.powi(m as i32);
        amps[m] = C64::from_polar(mag, m as f64 * param.phi);
    }
    FockVector::normalized(ModeDims::single(k + 1)?, amps)
}

/// [`spin_coherent`] with an explicit target dimension, which must equal
/// `2s + 1`.
pub fn spin_coherent_in(param: SpinParam, dim: usize) -> Result<FockVector> {
    if param.levels() != dim {
        return Err(Error::DimensionMismatch(format!(
            "spin 2s = {} needs {} levels, target has {dim}",
            param.twice_s,
            param.levels()
        )));
    }
    spin_coherent(param)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::number;
    use crate::linalg::{CMatrix, ZERO};
    use approx::assert_abs_diff_eq;

    #[test]
    fn fock_examples() {
        let one = fock(2, 1).unwrap();
        assert_eq!(one.amps()[1], c(1.0, 0.0));
        let vac = fock(3, 0).unwrap();
        assert_eq!(vac.amps()[0], c(1.0, 0.0));
        let three = fock(5, 3).unwrap();
        assert_abs_diff_eq!(three.expectation(&number(5).unwrap()).unwrap().re, 3.0, epsilon = 1e-15);
        assert!(matches!(fock(3, 3), Err(Error::LevelOutOfRange { level: 3, dim: 3 })));
    }

    #[test]
    fn coherent_vacuum_and_ratio() {
        let vac = coherent_truncated(0.0, 5, DEFAULT_TAIL_TOL).unwrap();
        assert_eq!(vac.amps()[0], c(1.0, 0.0));
        let psi = coherent_truncated(0.2, 8, DEFAULT_TAIL_TOL).unwrap();
        let ratio = psi.amps()[1] / psi.amps()[0];
        assert_abs_diff_eq!(ratio.re, 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(ratio.im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn coherent_single_excitation_probability() {
        // Poisson weight exp(-0.04) * 0.04
        let psi = coherent_truncated(0.2, 8, DEFAULT_TAIL_TOL).unwrap();
        let p1 = psi.amps()[1].norm_sqr();
        assert_abs_diff_eq!(p1, (-0.04f64).exp() * 0.04, epsilon = 1e-14);
        assert_abs_diff_eq!(p1, 0.03843, epsilon = 1e-5);
    }

    #[test]
    fn coherent_truncation_error_reports_tail() {
        match coherent_truncated(1.0, 3, 1e-12) {
            Err(Error::Truncation { tail, .. }) => {
                // 1 - e^{-1}(1 + 1 + 1/2)
                assert_abs_diff_eq!(tail, 1.0 - (-1f64).exp() * 2.5, epsilon = 1e-14);
            }
            other => panic!("expected truncation error, got {other:?}"),
        }
        assert!(matches!(coherent_truncated(0.1, 1, 1.0), Err(Error::InvalidDimension(1))));
    }

    #[test]
    fn default_cutoff_is_minimal() {
        for &a in &[0.05, 0.1, 0.3, 0.5, 1.0, 2.0] {
            let d = default_cutoff(a, DEFAULT_TAIL_TOL);
            assert!(coherent_tail(a, d) <= DEFAULT_TAIL_TOL);
            if d > 2 {
                assert!(coherent_tail(a, d - 1) > DEFAULT_TAIL_TOL);
            }
        }
    }

    #[test]
    fn tail_matches_complement_sum() {
        let x: f64 = 0.7 * 0.7;
        let head: f64 = (0..4).map(|n| x.powi(n) / (1..=n).product::<i32>().max(1) as f64).sum();
        assert_abs_diff_eq!(coherent_tail(0.7, 4), 1.0 - (-x).exp() * head, epsilon = 1e-15);
    }

    #[test]
    fn coherent_matches_displaced_vacuum() {
        let alpha = c(0.4, -0.3);
        let d = displacement(alpha, 30).unwrap();
        let displaced = d.mat().column(0).clone_owned();
        let psi = coherent_truncated(alpha, 12, DEFAULT_TAIL_TOL).unwrap();
        for n in 0..12 {
            assert!((displaced[n] - psi.amps()[n]).norm() < 1e-11);
        }
    }

    #[test]
    fn leveled_examples() {
        let vac = leveled_coherent(0.7, 1).unwrap();
        assert_eq!(vac.amps().len(), 1);
        assert_abs_diff_eq!(vac.amps()[0].re, 1.0, epsilon = 1e-15);

        let a: f64 = 0.3;
        let psi = leveled_coherent(a, 3).unwrap();
        let norm = psi.amps()[0].re;
        assert_abs_diff_eq!(psi.amps()[1].re / norm, a, epsilon = 1e-15);
        assert_abs_diff_eq!(psi.amps()[2].re / norm, a * a / 2f64.sqrt(), epsilon = 1e-15);

        assert_abs_diff_eq!(leveled_norm(0.3, 3), 1.0 + 0.09 + 0.09 * 0.09 / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(leveled_norm(0.3, 3), 1.09405, epsilon = 1e-5);
        assert!(leveled_coherent(0.3, 0).is_err());
    }

    #[test]
    fn leveled_norm_approaches_exponential() {
        let a: f64 = 0.8;
        assert_abs_diff_eq!(leveled_norm(a, 40), (a * a).exp(), epsilon = 1e-14);
    }

    #[test]
    fn leveled_equals_renormalized_truncation() {
        for &a in &[0.1, 0.3, 0.5, 0.9] {
            for n in 2..10 {
                let lev = leveled_coherent(a, n).unwrap();
                let tr = coherent_truncated(a, n, f64::INFINITY).unwrap();
                assert!(linalg::max_abs_diff_vec(lev.amps(), tr.amps()) < 1e-12);
            }
        }
    }

    #[test]
    fn leveled_converges_fast() {
        for &a in &[0.1, 0.3, 0.5] {
            for n in 8..14 {
                let x = leveled_coherent(a, n).unwrap();
                let y = leveled_coherent(a, n + 1).unwrap();
                let overlap: C64 = (0..n).map(|k| x.amps()[k].conj() * y.amps()[k]).sum();
                assert!(overlap.norm() >= 1.0 - 1e-6);
            }
        }
    }

    #[test]
    fn spin_half_bloch() {
        let (theta, phi) = (1.1, 0.4);
        let psi = spin_coherent(SpinParam::new(1, theta, phi).unwrap()).unwrap();
        assert!((psi.amps()[0] - c((theta / 2.0).cos(), 0.0)).norm() < 1e-15);
        assert!((psi.amps()[1] - C64::from_polar((theta / 2.0).sin(), phi)).norm() < 1e-15);
        let vac = spin_coherent(SpinParam::new(4, 0.0, 1.0).unwrap()).unwrap();
        assert_abs_diff_eq!(vac.amps()[0].re, 1.0, epsilon = 1e-15);
    }

    /// Rotation of the lowest-weight state, built from the angular momentum
    /// ladder operators and a dense exponential.
    fn rotated_lowest_weight(twice_s: u32, theta: f64, phi: f64) -> CVector {
        let k = twice_s as usize;
        let s = twice_s as f64 / 2.0;
        let mut j_plus = CMatrix::from_element(k + 1, k + 1, ZERO);
        for level in 0..k {
            let m = level as f64 - s;
            j_plus[(level + 1, level)] = c((s * (s + 1.0) - m * (m + 1.0)).sqrt(), 0.0);
        }
        let zeta = C64::from_polar(theta / 2.0, phi);
        let generator = &j_plus * zeta - j_plus.adjoint() * zeta.conj();
        linalg::expm(&generator, 1.0).unwrap().column(0).clone_owned()
    }

    #[test]
    fn spin_coherent_matches_rotation() {
        for twice_s in 1..7 {
            for &(theta, phi) in &[(0.3, 0.0), (1.2, 0.7), (2.5, -1.9)] {
                let psi = spin_coherent(SpinParam::new(twice_s, theta, phi).unwrap()).unwrap();
                let oracle = rotated_lowest_weight(twice_s, theta, phi);
                assert!(linalg::max_abs_diff_vec(psi.amps(), &oracle) < 1e-12);
            }
        }
    }

    #[test]
    fn spin_one_binomial_populations() {
        let theta: f64 = 0.2;
        let p = (theta / 2.0).sin().powi(2);
        let psi = spin_coherent(SpinParam::new(2, theta, 0.0).unwrap()).unwrap();
        let pops: Vec<f64> = psi.amps().iter().map(|z| z.norm_sqr()).collect();
        assert_abs_diff_eq!(pops[0], (1.0 - p) * (1.0 - p), epsilon = 1e-15);
        assert_abs_diff_eq!(pops[1], 2.0 * p * (1.0 - p), epsilon = 1e-15);
        assert_abs_diff_eq!(pops[2], p * p, epsilon = 1e-15);
        assert_abs_diff_eq!(pops.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn spin_dimension_checks() {
        let p = SpinParam::new(3, 0.5, 0.0).unwrap();
        assert!(spin_coherent_in(p, 4).is_ok());
        assert!(matches!(spin_coherent_in(p, 3), Err(Error::DimensionMismatch(_))));
        assert!(SpinParam::new(0, 0.1, 0.0).is_err());
        assert!(SpinParam::matching(2.0, 1).is_err());
    }

    #[test]
    fn spin_coherent_approaches_truncated_coherent() {
        // At fixed mean excitation the spin coherent state tends to the
        // Glauber coherent state as s grows.
        for &a in &[0.3, 0.6] {
            let glauber = coherent(a);
            let mut last = 0.0;
            for twice_s in 1..40 {
                let spin = spin_coherent(SpinParam::matching(a, twice_s).unwrap()).unwrap();
                let overlap: C64 = spin
                    .amps()
                    .iter()
                    .zip(glauber.amps().iter())
                    .map(|(s, g)| s.conj() * g)
                    .sum();
                let overlap = overlap.norm();
                assert!(overlap >= last - 1e-12, "overlap {overlap} dropped at 2s = {twice_s}");
                last = overlap;
            }
            assert!(last > 0.999);
        }
    }
}
