//! Two-mode excitation exchange, number decoherence, and Lindblad
//! propagation.
//!
//! Phase convention: `exchange_unitary(gt)` maps `|10>` to
//! `cos(gt)|10> + i sin(gt)|01>`, i.e. `U a^dag U^dag = cos(gt) a^dag + i sin(gt) b^dag`
//! and `U a U^dag = cos(gt) a - i sin(gt) b`. As an exponential this is
//! `U = exp(+i gt (a^dag b + a b^dag))`. Every concurrence in this crate is
//! invariant under the choice of sign.

use nalgebra::{DMatrix, Matrix2};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::{annihilation, DensityMatrix, FockVector, ModeDims, ModeOperator, Tensor};
use crate::linalg::{self, c, CMatrix, CVector, C64, I, ZERO};
use crate::states::Alpha;

/// Coupling strength and time of a resonant exchange interaction. Only the
/// product `g * t` enters any observable.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExchangeParams {
    pub g: f64,
    pub t: f64,
}

impl ExchangeParams {
    pub fn phase(gt: f64) -> Self {
        ExchangeParams { g: 1.0, t: gt }
    }

    pub fn gt(&self) -> f64 {
        self.g * self.t
    }
}

/// Exchange generator `a^dag b + a b^dag` on a two-mode truncated space.
pub fn exchange_generator(dim_a: usize, dim_b: usize) -> Result<ModeOperator> {
    let a = annihilation(dim_a)?;
    let b = annihilation(dim_b)?;
    let ia = ModeOperator::identity(a.dims().clone());
    let ib = ModeOperator::identity(b.dims().clone());
    let a_full = a.tensor(&ib);
    let b_full = ia.tensor(&b);
    let hop = a_full.adjoint().compose(&b_full)?;
    hop.plus(&hop.adjoint())?.mark_hermitian()
}

/// Basis indices of the total-excitation block `n` of a two-mode space, in
/// order of increasing level of mode A.
fn exchange_block(dim_a: usize, dim_b: usize, n: usize) -> Vec<(usize, usize)> {
    let lo = n.saturating_sub(dim_b - 1);
    let hi = n.min(dim_a - 1);
    (lo..=hi).map(|k| (k, n - k)).collect()
}

/// Exchange evolution for phase `gt`, assembled block by block in the total
/// excitation number. Each block's real tridiagonal generator is
/// diagonalized and exponentiated exactly; entries between different blocks
/// are exact zeros.
pub fn exchange_unitary(dim_a: usize, dim_b: usize, gt: f64) -> Result<ModeOperator> {
    if dim_a < 2 {
        return Err(Error::InvalidDimension(dim_a));
    }
    if dim_b < 2 {
        return Err(Error::InvalidDimension(dim_b));
    }
    let dims = ModeDims::pair(dim_a, dim_b)?;
    let total = dims.total();
    let mut u = CMatrix::zeros(total, total);
    for n in 0..(dim_a + dim_b - 1) {
        let block = exchange_block(dim_a, dim_b, n);
        let size = block.len();
        // <k+1, n-k-1| a^dag b |k, n-k> = sqrt(k+1) sqrt(n-k)
        let mut gen = DMatrix::<f64>::zeros(size, size);
        for j in 0..size.saturating_sub(1) {
            let (k, m) = block[j];
            let w = ((k + 1) as f64).sqrt() * (m as f64).sqrt();
            gen[(j + 1, j)] = w;
            gen[(j, j + 1)] = w;
        }
        let eig = nalgebra::SymmetricEigen::new(gen);
        let v = eig.eigenvectors.map(|x| c(x, 0.0));
        let phases = CVector::from_iterator(size, eig.eigenvalues.iter().map(|&lam| C64::from_polar(1.0, gt * lam)));
        let ub = &v * CMatrix::from_diagonal(&phases) * v.transpose();
        let idx: Vec<usize> = block
            .iter()
            .map(|&(k, m)| k * dim_b + m)
            .collect();
        for (r, &ir) in idx.iter().enumerate() {
            for (s, &is) in idx.iter().enumerate() {
                u[(ir, is)] = ub[(r, s)];
            }
        }
    }
    ModeOperator::new(dims, u)?.mark_unitary()
}

/// Dense `exp(scale * generator)`, kept as an independent cross-check for
/// the block construction and the Lindblad integrator.
pub fn expm_oracle(generator: &ModeOperator, scale: f64) -> Result<ModeOperator> {
    let mat = linalg::expm(generator.mat(), scale)?;
    ModeOperator::new(generator.dims().clone(), mat)
}

/// Mixing matrix of the Heisenberg-picture mode operators,
/// `(U a U^dag, U b U^dag)^T = M (a, b)^T`.
pub fn heisenberg_transform(gt: f64) -> Matrix2<C64> {
    let (s, co) = gt.sin_cos();
    Matrix2::new(c(co, 0.0), c(0.0, -s), c(0.0, -s), c(co, 0.0))
}

/// Removes every coherence between different excitation numbers of `site`.
pub fn decohere_number(rho: &DensityMatrix, site: usize) -> Result<DensityMatrix> {
    let dims = rho.dims();
    if site >= dims.num_modes() {
        return Err(Error::InvalidArgument(format!(
            "site {site} out of range for {} modes",
            dims.num_modes()
        )));
    }
    let levels: Vec<usize> = (0..dims.total()).map(|i| dims.levels_of(i)[site]).collect();
    let mut mat = rho.mat().clone();
    for i in 0..dims.total() {
        for j in 0..dims.total() {
            if levels[i] != levels[j] {
                mat[(i, j)] = ZERO;
            }
        }
    }
    Ok(DensityMatrix::from_parts_unchecked(dims.clone(), mat))
}

/// Two-qubit state left after full number decoherence of a coherent input,
/// restricted to the ground and single-excitation manifold:
/// `(|00><00| + |alpha|^2 |phi><phi|) / (1 + |alpha|^2)` with
/// `|phi> = cos(gt)|10> + i sin(gt)|01>`.
pub fn decohered_dimer_state(alpha: impl Into<Alpha>, gt: f64) -> DensityMatrix {
    let x = alpha.into().mean_excitation();
    let dims = ModeDims::pair(2, 2).expect("static dims");
    let mut phi = CVector::zeros(4);
    phi[2] = c(gt.cos(), 0.0);
    phi[1] = c(0.0, gt.sin());
    let mut mat = &phi * phi.adjoint() * c(x, 0.0);
    mat[(0, 0)] += c(1.0, 0.0);
    DensityMatrix::from_parts_unchecked(dims, mat / c(1.0 + x, 0.0))
}

/// Evolves `|alpha>|0>`-type inputs: `exchange_unitary` applied to
/// `psi_a (x) |0>` with mode B of dimension `dim_b`.
pub fn evolve_with_vacuum(psi_a: &FockVector, dim_b: usize, gt: f64) -> Result<FockVector> {
    if psi_a.dims().num_modes() != 1 {
        return Err(Error::InvalidArgument("expected a single-mode input".into()));
    }
    let dim_a = psi_a.dims().modes()[0];
    let input = psi_a.tensor(&FockVector::basis(ModeDims::single(dim_b)?, &[0])?);
    input.evolve(&exchange_unitary(dim_a, dim_b, gt)?)
}

/// GKSL generator data.
///
/// `jumps` are recycling channels `r (L rho L^dag - {L^dag L, rho}/2)`;
/// `losses` only contribute the anticommutator `-r {K^dag K, rho}/2`, so they
/// remove trace (a pure loss term rather than a transfer into a tracked
/// level).
#[derive(Clone, Debug)]
pub struct LindbladSpec {
    dims: ModeDims,
    hamiltonian: CMatrix,
    jumps: Vec<(CMatrix, f64)>,
    losses: Vec<(CMatrix, f64)>,
}

impl LindbladSpec {
    pub fn new(hamiltonian: &ModeOperator) -> Result<Self> {
        if !linalg::is_hermitian(hamiltonian.mat(), 1e-12) {
            return Err(Error::InvalidArgument("Hamiltonian is not Hermitian".into()));
        }
        Ok(LindbladSpec {
            dims: hamiltonian.dims().clone(),
            hamiltonian: hamiltonian.mat().clone(),
            jumps: Vec::new(),
            losses: Vec::new(),
        })
    }

    pub fn with_jump(mut self, op: &ModeOperator, rate: f64) -> Result<Self> {
        self.check_channel(op, rate)?;
        if rate > 0.0 {
            self.jumps.push((op.mat().clone(), rate));
        }
        Ok(self)
    }

    pub fn with_loss(mut self, op: &ModeOperator, rate: f64) -> Result<Self> {
        self.check_channel(op, rate)?;
        if rate > 0.0 {
            self.losses.push((op.mat().clone(), rate));
        }
        Ok(self)
    }

    fn check_channel(&self, op: &ModeOperator, rate: f64) -> Result<()> {
        if rate < 0.0 || !rate.is_finite() {
            return Err(Error::InvalidArgument(format!("rate {rate} must be finite and non-negative")));
        }
        if op.dims() != &self.dims {
            return Err(Error::DimensionMismatch("jump operator dims differ from Hamiltonian".into()));
        }
        Ok(())
    }

    pub fn dims(&self) -> &ModeDims {
        &self.dims
    }

    pub fn hamiltonian(&self) -> &CMatrix {
        &self.hamiltonian
    }

    /// `H - (i/2) sum r L^dag L` over jumps and losses.
    fn effective_hamiltonian(&self) -> CMatrix {
        let mut h = self.hamiltonian.clone();
        for (l, r) in self.jumps.iter().chain(&self.losses) {
            h -= l.adjoint() * l * c(0.0, 0.5 * r);
        }
        h
    }

    /// Vectorized generator acting on column-stacked density matrices.
    pub fn liouvillian(&self) -> CMatrix {
        let n = self.dims.total();
        let id = CMatrix::identity(n, n);
        let h_eff = self.effective_hamiltonian();
        let mut sup = id.kronecker(&h_eff) * (-I) + h_eff.conjugate().kronecker(&id) * I;
        for (l, r) in &self.jumps {
            sup += l.conjugate().kronecker(l) * c(*r, 0.0);
        }
        sup
    }
}

/// Right-hand side `d rho / dt`, precomputed for repeated evaluation.
///
/// Diagonal jump operators (dephasing) act elementwise, so their recycling
/// terms are summed into one weight matrix. Sparse jumps are applied
/// through their nonzero entries; the rest use dense products.
/// Row, column and value of each nonzero entry.
type Triplets = Vec<(usize, usize, C64)>;

struct Generator {
    h_eff: CMatrix,
    h_eff_adj: CMatrix,
    /// Nonzeros of `h_eff` when it is sparse enough to pay off.
    h_sparse: Option<Triplets>,
    diagonal_weights: Option<CMatrix>,
    sparse: Vec<(Triplets, f64)>,
    dense: Vec<(CMatrix, CMatrix, f64)>,
}

fn nonzeros(l: &CMatrix) -> Vec<(usize, usize, C64)> {
    let mut out = Vec::new();
    for j in 0..l.ncols() {
        for i in 0..l.nrows() {
            if l[(i, j)] != ZERO {
                out.push((i, j, l[(i, j)]));
            }
        }
    }
    out
}

impl Generator {
    fn new(spec: &LindbladSpec) -> Self {
        let h_eff = spec.effective_hamiltonian();
        let n = h_eff.nrows();
        let mut diagonal_weights: Option<CMatrix> = None;
        let mut sparse = Vec::new();
        let mut dense = Vec::new();
        for (l, r) in &spec.jumps {
            let nz = nonzeros(l);
            if nz.iter().all(|(i, j, _)| i == j) {
                let d: Vec<C64> = (0..n).map(|k| l[(k, k)]).collect();
                let w = diagonal_weights.get_or_insert_with(|| CMatrix::zeros(n, n));
                for j in 0..n {
                    for i in 0..n {
                        w[(i, j)] += d[i] * d[j].conj() * c(*r, 0.0);
                    }
                }
            } else if nz.len() * nz.len() < n * n * n {
                sparse.push((nz, *r));
            } else {
                dense.push((l.clone(), l.adjoint(), *r));
            }
        }
        let h_nz = nonzeros(&h_eff);
        Generator {
            h_sparse: (h_nz.len() * 4 < n * n).then_some(h_nz),
            h_eff_adj: h_eff.adjoint(),
            h_eff,
            diagonal_weights,
            sparse,
            dense,
        }
    }

    fn apply(&self, rho: &CMatrix) -> CMatrix {
        let mut out = match &self.h_sparse {
            Some(nz) => {
                let n = rho.nrows();
                let mut out = CMatrix::zeros(n, n);
                // -i (H rho - rho H^dag): row i gains -i H_ik rho[k, :],
                // column i gains +i conj(H_ik) rho[:, k]
                for &(i, k, h) in nz {
                    let f = -I * h;
                    let g = I * h.conj();
                    for j in 0..n {
                        out[(i, j)] += f * rho[(k, j)];
                        out[(j, i)] += g * rho[(j, k)];
                    }
                }
                out
            }
            None => (&self.h_eff * rho - rho * &self.h_eff_adj) * (-I),
        };
        if let Some(w) = &self.diagonal_weights {
            out += w.component_mul(rho);
        }
        for (nz, r) in &self.sparse {
            // L rho L^dag = sum L_ik rho_kl conj(L_jl) |i><j|
            for &(i, k, lik) in nz {
                for &(j, l, ljl) in nz {
                    out[(i, j)] += lik * rho[(k, l)] * ljl.conj() * c(*r, 0.0);
                }
            }
        }
        for (l, l_adj, r) in &self.dense {
            out += l * rho * l_adj * c(*r, 0.0);
        }
        out
    }
}

/// Time-stepping scheme for [`lindblad_propagate`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Integrator {
    /// Dormand-Prince 5(4) with per-step error control.
    Adaptive { rtol: f64, atol: f64 },
    /// Classical RK4 with at most `dt` per step; reproducible to the bit.
    FixedStep { dt: f64 },
}

impl Default for Integrator {
    fn default() -> Self {
        Integrator::Adaptive { rtol: 1e-9, atol: 1e-12 }
    }
}

/// Density matrices sampled on a time grid. States produced with loss
/// channels are sub-normalized, so they are kept as raw matrices.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub dims: ModeDims,
    pub times: Vec<f64>,
    pub states: Vec<CMatrix>,
}

impl Trajectory {
    pub fn final_state(&self) -> &CMatrix {
        self.states.last().expect("trajectory is never empty")
    }

    /// `Tr(op rho(t))` at every grid time.
    pub fn expectation(&self, op: &CMatrix) -> Vec<f64> {
        self.states.iter().map(|rho| (op * rho).trace().re).collect()
    }

    pub fn traces(&self) -> Vec<f64> {
        self.states.iter().map(|rho| rho.trace().re).collect()
    }

    /// The state at grid index `k` as a validated density matrix.
    pub fn density_at(&self, k: usize, tol: f64) -> Result<DensityMatrix> {
        DensityMatrix::with_tolerance(self.dims.clone(), self.states[k].clone(), tol)
    }
}

const MAX_STEPS: usize = 5_000_000;

/// Integrates the Lindblad equation from `t = 0` and samples the state at
/// each time of `t_grid` (non-negative, strictly increasing).
pub fn lindblad_propagate(
    spec: &LindbladSpec,
    rho0: &CMatrix,
    t_grid: &[f64],
    integrator: Integrator,
) -> Result<Trajectory> {
    let n = spec.dims.total();
    if rho0.nrows() != n || rho0.ncols() != n {
        return Err(Error::DimensionMismatch("initial state does not match the generator".into()));
    }
    if t_grid.is_empty() {
        return Err(Error::InvalidArgument("time grid is empty".into()));
    }
    if t_grid[0] < 0.0 || t_grid.windows(2).any(|w| w[1] <= w[0]) || t_grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidArgument("time grid must start at t >= 0 and increase strictly".into()));
    }
    let gen = Generator::new(spec);
    let mut states = Vec::with_capacity(t_grid.len());
    let mut rho = rho0.clone();
    let mut t = 0.0;
    let mut h_guess = match integrator {
        Integrator::Adaptive { .. } => initial_step(&gen, rho0, t_grid),
        Integrator::FixedStep { dt } => {
            if dt <= 0.0 || !dt.is_finite() {
                return Err(Error::InvalidArgument(format!("fixed step {dt} must be positive")));
            }
            dt
        }
    };
    for &target in t_grid {
        if target > t {
            rho = match integrator {
                Integrator::FixedStep { dt } => rk4_span(&gen, rho, t, target, dt),
                Integrator::Adaptive { rtol, atol } => dopri_span(&gen, rho, t, target, rtol, atol, &mut h_guess)?,
            };
            t = target;
        }
        if rho.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::StepSize {
                t,
                reason: "state became non-finite".into(),
            });
        }
        states.push(rho.clone());
    }
    Ok(Trajectory {
        dims: spec.dims.clone(),
        times: t_grid.to_vec(),
        states,
    })
}

fn initial_step(gen: &Generator, rho0: &CMatrix, t_grid: &[f64]) -> f64 {
    let span = t_grid.last().copied().unwrap_or(1.0).max(1e-12);
    let rate = linalg::one_norm(&gen.apply(rho0)).max(linalg::one_norm(&gen.h_eff));
    if rate > 0.0 {
        (0.01 / rate).min(span)
    } else {
        span
    }
}

fn rk4_span(gen: &Generator, mut rho: CMatrix, t0: f64, t1: f64, dt: f64) -> CMatrix {
    let steps = ((t1 - t0) / dt).ceil().max(1.0) as usize;
    let h = (t1 - t0) / steps as f64;
    let half = c(0.5 * h, 0.0);
    let full = c(h, 0.0);
    let sixth = c(h / 6.0, 0.0);
    for _ in 0..steps {
        let k1 = gen.apply(&rho);
        let k2 = gen.apply(&(&rho + &k1 * half));
        let k3 = gen.apply(&(&rho + &k2 * half));
        let k4 = gen.apply(&(&rho + &k3 * full));
        rho += (k1 + (k2 + k3) * c(2.0, 0.0) + k4) * sixth;
    }
    rho
}

// Dormand-Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn dopri_span(
    gen: &Generator,
    mut rho: CMatrix,
    t0: f64,
    t1: f64,
    rtol: f64,
    atol: f64,
    h_guess: &mut f64,
) -> Result<CMatrix> {
    let mut t = t0;
    let mut h = h_guess.min(t1 - t0);
    let mut k1 = gen.apply(&rho);
    let mut steps = 0usize;
    let s = |x: f64| c(x, 0.0);
    while t < t1 {
        steps += 1;
        if steps > MAX_STEPS {
            return Err(Error::StepSize {
                t,
                reason: "too many steps".into(),
            });
        }
        let last = t + h >= t1;
        let h_step = if last { t1 - t } else { h };
        if h_step <= 1e-14 * t.abs().max(1.0) && !last {
            return Err(Error::StepSize {
                t,
                reason: format!("step size underflow (h = {h_step:.3e})"),
            });
        }
        let k2 = gen.apply(&(&rho + &k1 * s(h_step * A21)));
        let k3 = gen.apply(&(&rho + (&k1 * s(A31) + &k2 * s(A32)) * s(h_step)));
        let k4 = gen.apply(&(&rho + (&k1 * s(A41) + &k2 * s(A42) + &k3 * s(A43)) * s(h_step)));
        let k5 = gen.apply(&(&rho + (&k1 * s(A51) + &k2 * s(A52) + &k3 * s(A53) + &k4 * s(A54)) * s(h_step)));
        let k6 = gen.apply(
            &(&rho + (&k1 * s(A61) + &k2 * s(A62) + &k3 * s(A63) + &k4 * s(A64) + &k5 * s(A65)) * s(h_step)),
        );
        let next = &rho + (&k1 * s(B1) + &k3 * s(B3) + &k4 * s(B4) + &k5 * s(B5) + &k6 * s(B6)) * s(h_step);
        let k7 = gen.apply(&next);
        let err = (&k1 * s(E1) + &k3 * s(E3) + &k4 * s(E4) + &k5 * s(E5) + &k6 * s(E6) + &k7 * s(E7)) * s(h_step);

        let mut err_norm: f64 = 0.0;
        for ((e, y0), y1) in err.iter().zip(rho.iter()).zip(next.iter()) {
            let sc = atol + rtol * y0.norm().max(y1.norm());
            err_norm = err_norm.max(e.norm() / sc);
        }
        if !err_norm.is_finite() {
            return Err(Error::StepSize {
                t,
                reason: "non-finite error estimate".into(),
            });
        }
        if err_norm <= 1.0 {
            t = if last { t1 } else { t + h_step };
            rho = next;
            k1 = k7;
            let grow = if err_norm == 0.0 { 5.0 } else { (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0) };
            if !last {
                h = h_step * grow;
            } else {
                *h_guess = h.max(h_step * grow.min(1.0));
            }
        } else {
            h = h_step * (0.9 * err_norm.powf(-0.2)).clamp(0.1, 1.0);
            if h <= 1e-14 * t.abs().max(1.0) {
                return Err(Error::StepSize {
                    t,
                    reason: format!("step size underflow (h = {h:.3e})"),
                });
            }
        }
    }
    if *h_guess <= 0.0 {
        *h_guess = h;
    }
    Ok(rho)
}

/// `rho(t)` from the dense exponential of the vectorized generator.
pub fn lindblad_expm_oracle(spec: &LindbladSpec, rho0: &CMatrix, t: f64) -> Result<CMatrix> {
    let n = spec.dims.total();
    let prop = linalg::expm(&spec.liouvillian(), t)?;
    Ok(linalg::unvectorize(&(prop * linalg::vectorize(rho0)), n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{number, partial_trace, purity, total_number};
    use crate::linalg::{max_abs_diff, ONE};
    use crate::states::{coherent_truncated, fock};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn two_mode_ops(da: usize, db: usize) -> (CMatrix, CMatrix) {
        let a = annihilation(da).unwrap();
        let b = annihilation(db).unwrap();
        let ia = ModeOperator::identity(a.dims().clone());
        let ib = ModeOperator::identity(b.dims().clone());
        (a.tensor(&ib).into_mat(), ia.tensor(&b).into_mat())
    }

    #[test]
    fn zero_phase_is_identity() {
        let u = exchange_unitary(4, 3, 0.0).unwrap();
        assert!(max_abs_diff(u.mat(), &CMatrix::identity(12, 12)) < 1e-15);
    }

    #[test]
    fn single_photon_splits_into_bell_state() {
        let u = exchange_unitary(2, 2, FRAC_PI_4).unwrap();
        let dims = ModeDims::pair(2, 2).unwrap();
        let out = FockVector::basis(dims.clone(), &[1, 0]).unwrap().evolve(&u).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((out.amp(&[1, 0]).unwrap() - c(h, 0.0)).norm() < 1e-15);
        assert!((out.amp(&[0, 1]).unwrap() - c(0.0, h)).norm() < 1e-15);
    }

    #[test]
    fn coherent_input_stays_product() {
        let alpha = 0.4;
        let dim = 14;
        let psi = coherent_truncated(alpha, dim, 1e-12).unwrap();
        for &gt in &[0.3, FRAC_PI_4, 1.2, 2.9] {
            let out = evolve_with_vacuum(&psi, dim, gt).unwrap();
            let a_part = coherent_truncated(c(alpha * gt.cos(), 0.0), dim, 1.0).unwrap();
            let b_part = coherent_truncated(c(0.0, alpha * gt.sin()), dim, 1.0).unwrap();
            let product = a_part.tensor(&b_part);
            let fid = out.fidelity(&product).unwrap();
            assert!(fid >= 1.0 - 1e-11, "fidelity {fid} at gt = {gt}");
        }
    }

    #[test]
    fn block_unitary_matches_dense_exponential() {
        let gen = exchange_generator(6, 6).unwrap();
        for k in 0..20 {
            let gt = 0.17 * k as f64 - 0.4;
            let block = exchange_unitary(6, 6, gt).unwrap();
            let dense = expm_oracle(&gen.scaled(I), gt).unwrap();
            assert!(max_abs_diff(block.mat(), dense.mat()) <= 1e-10);
        }
    }

    #[test]
    fn exchange_conserves_total_number() {
        let u = exchange_unitary(5, 4, 0.77).unwrap();
        let n = total_number(u.dims());
        let comm = linalg::commutator(u.mat(), n.mat());
        assert!(comm.iter().all(|z| z.norm() <= 1e-12));
        assert!(linalg::is_unitary(u.mat(), 1e-12));
    }

    #[test]
    fn heisenberg_identity_on_complete_blocks() {
        // U a^dag U^dag = cos a^dag + i sin b^dag, checked on states with at
        // most d-2 excitations so that truncation cannot interfere.
        let d = 5;
        let (a, b) = two_mode_ops(d, d);
        let dims = ModeDims::pair(d, d).unwrap();
        let low = CMatrix::from_diagonal(&CVector::from_iterator(
            d * d,
            (0..d * d).map(|i| if dims.excitations_of(i) <= d - 2 { ONE } else { ZERO }),
        ));
        for &gt in &[0.0, 0.4, FRAC_PI_4, 2.2] {
            let u = exchange_unitary(d, d, gt).unwrap().into_mat();
            let lhs = &u * a.adjoint() * u.adjoint() * &low;
            let rhs = (a.adjoint() * c(gt.cos(), 0.0) + b.adjoint() * c(0.0, gt.sin())) * &low;
            assert!(max_abs_diff(&lhs, &rhs) < 1e-12);
            let lhs = &u * &a * u.adjoint() * &low;
            let m = heisenberg_transform(gt);
            let rhs = (&a * m[(0, 0)] + &b * m[(0, 1)]) * &low;
            assert!(max_abs_diff(&lhs, &rhs) < 1e-12);
        }
    }

    #[test]
    fn heisenberg_matrix_examples() {
        assert_eq!(heisenberg_transform(0.0), Matrix2::identity());
        let swap = heisenberg_transform(FRAC_PI_2);
        assert!((swap[(0, 1)] - c(0.0, -1.0)).norm() < 1e-15);
        assert!(swap[(0, 0)].norm() < 1e-15);
        for &gt in &[0.1, 0.9, 2.5] {
            let twice = heisenberg_transform(gt) * heisenberg_transform(gt);
            assert!((twice - heisenberg_transform(2.0 * gt)).norm() < 1e-14);
            let m = heisenberg_transform(gt);
            assert!((m.adjoint() * m - Matrix2::identity()).norm() < 1e-15);
        }
    }

    #[test]
    fn decoherence_of_coherent_state_is_poisson() {
        let alpha: f64 = 0.2;
        let psi = coherent_truncated(alpha, 10, 1e-12).unwrap();
        let rho = decohere_number(&psi.to_density(), 0).unwrap();
        let x = alpha * alpha;
        let mut weight = (-x).exp();
        for n in 0..10 {
            if n > 0 {
                weight *= x / n as f64;
            }
            assert_abs_diff_eq!(rho.mat()[(n, n)].re, weight, epsilon = 1e-13);
            for m in 0..10 {
                if m != n {
                    assert_eq!(rho.mat()[(n, m)], ZERO);
                }
            }
        }
    }

    #[test]
    fn decoherence_properties() {
        let dims = ModeDims::pair(3, 2).unwrap();
        let amps = CVector::from_iterator(6, (0..6).map(|k| c(1.0 + k as f64, 0.5 * k as f64)));
        let rho = FockVector::normalized(dims, amps).unwrap().to_density();
        let once = decohere_number(&rho, 0).unwrap();
        let twice = decohere_number(&once, 0).unwrap();
        assert!(max_abs_diff(once.mat(), twice.mat()) <= 1e-14);
        assert_abs_diff_eq!(once.trace(), 1.0, epsilon = 1e-14);
        let diag = decohere_number(&once, 1).unwrap();
        let again = decohere_number(&diag, 0).unwrap();
        assert!(max_abs_diff(diag.mat(), again.mat()) <= 1e-15);
        assert!(decohere_number(&rho, 2).is_err());
    }

    #[test]
    fn decoherence_choi_is_positive() {
        // Choi matrix sum_ij |i><j| (x) Phi(|i><j|) for a single mode of dim 4.
        let d = 4;
        let dims = ModeDims::single(d).unwrap();
        let mut choi = CMatrix::zeros(d * d, d * d);
        for i in 0..d {
            for j in 0..d {
                let mut e = CMatrix::zeros(d, d);
                e[(i, j)] = ONE;
                let out = decohere_number(&DensityMatrix::from_parts_unchecked(dims.clone(), e.clone()), 0).unwrap();
                choi += e.kronecker(out.mat());
            }
        }
        let (vals, _) = linalg::hermitian_eigen(&choi);
        assert!(vals[0] >= -1e-14);
        // trace preservation: partial trace over the output factor is identity
        let choi_rho = DensityMatrix::from_parts_unchecked(ModeDims::pair(d, d).unwrap(), choi);
        let tr_out = partial_trace(&choi_rho, &[0]).unwrap();
        assert!(max_abs_diff(tr_out.mat(), &CMatrix::identity(d, d)) < 1e-14);
    }

    #[test]
    fn decohered_dimer_examples() {
        let rho = decohered_dimer_state(0.0, 0.7);
        assert_abs_diff_eq!(rho.mat()[(0, 0)].re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(purity(&rho), 1.0, epsilon = 1e-15);
        for &a in &[0.1, 0.5, 0.9] {
            for &gt in &[0.0, 0.3, 1.4] {
                let r = decohered_dimer_state(a, gt);
                assert_abs_diff_eq!(r.trace(), 1.0, epsilon = 1e-15);
                assert!(DensityMatrix::new(r.dims().clone(), r.mat().clone()).is_ok());
            }
        }
    }

    fn dimer_spec(dephasing: f64) -> LindbladSpec {
        let gen = exchange_generator(2, 2).unwrap();
        let (a, b) = two_mode_ops(2, 2);
        let dims = ModeDims::pair(2, 2).unwrap();
        let na = ModeOperator::new(dims.clone(), a.adjoint() * &a).unwrap();
        let nb = ModeOperator::new(dims, b.adjoint() * &b).unwrap();
        LindbladSpec::new(&gen)
            .unwrap()
            .with_jump(&na, dephasing)
            .unwrap()
            .with_jump(&nb, dephasing)
            .unwrap()
    }

    #[test]
    fn unitary_lindblad_gives_cos_sin_populations() {
        let spec = dimer_spec(0.0);
        let dims = ModeDims::pair(2, 2).unwrap();
        let rho0 = FockVector::basis(dims.clone(), &[1, 0]).unwrap().to_density().into_mat();
        let times: Vec<f64> = (0..=20).map(|k| 0.1 * k as f64).collect();
        let traj = lindblad_propagate(&spec, &rho0, &times, Integrator::default()).unwrap();
        let ia = dims.index_of(&[1, 0]).unwrap();
        let ib = dims.index_of(&[0, 1]).unwrap();
        for (t, rho) in traj.times.iter().zip(&traj.states) {
            assert_abs_diff_eq!(rho[(ia, ia)].re, t.cos().powi(2), epsilon = 1e-8);
            assert_abs_diff_eq!(rho[(ib, ib)].re, t.sin().powi(2), epsilon = 1e-8);
        }
    }

    #[test]
    fn single_site_dephasing_decays_coherence() {
        let gamma = 0.3;
        let n = number(2).unwrap();
        let h = ModeOperator::new(n.dims().clone(), CMatrix::zeros(2, 2)).unwrap();
        // dephasing convention used throughout: jump sqrt(2 gamma) n
        let spec = LindbladSpec::new(&h).unwrap().with_jump(&n, 2.0 * gamma).unwrap();
        let rho0 = CMatrix::from_element(2, 2, c(0.5, 0.0));
        let times = [0.0, 0.5, 1.0, 4.0];
        for integ in [Integrator::default(), Integrator::FixedStep { dt: 1e-3 }] {
            let traj = lindblad_propagate(&spec, &rho0, &times, integ).unwrap();
            for (t, rho) in traj.times.iter().zip(&traj.states) {
                assert_abs_diff_eq!(rho[(0, 1)].re, 0.5 * (-gamma * t).exp(), epsilon = 1e-9);
                assert_abs_diff_eq!(rho[(0, 0)].re, 0.5, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn propagator_matches_vectorized_exponential() {
        let spec = dimer_spec(0.25);
        let dims = ModeDims::pair(2, 2).unwrap();
        let psi = FockVector::normalized(dims, CVector::from_vec(vec![ONE, c(0.2, 0.1), c(0.7, 0.0), ZERO])).unwrap();
        let rho0 = psi.to_density().into_mat();
        let times = [0.0, 0.7, 1.9, 3.0];
        let traj = lindblad_propagate(&spec, &rho0, &times, Integrator::default()).unwrap();
        for (t, rho) in traj.times.iter().zip(&traj.states) {
            let exact = lindblad_expm_oracle(&spec, &rho0, *t).unwrap();
            assert!(max_abs_diff(rho, &exact) < 1e-8);
        }
    }

    #[test]
    fn loss_channel_drains_trace() {
        let (a, _) = two_mode_ops(2, 2);
        let gen = exchange_generator(2, 2).unwrap();
        let a_op = ModeOperator::new(gen.dims().clone(), a).unwrap();
        let spec = LindbladSpec::new(&gen).unwrap().with_loss(&a_op, 0.5).unwrap();
        let rho0 = fock(2, 1).unwrap().tensor(&fock(2, 0).unwrap()).to_density().into_mat();
        let times: Vec<f64> = (0..=30).map(|k| 0.2 * k as f64).collect();
        let traj = lindblad_propagate(&spec, &rho0, &times, Integrator::default()).unwrap();
        let tr = traj.traces();
        assert!(tr.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!(tr.last().unwrap() < &0.5);
    }

    #[test]
    fn bad_inputs_are_rejected() {
        let spec = dimer_spec(0.1);
        let rho0 = CMatrix::identity(4, 4) * c(0.25, 0.0);
        assert!(lindblad_propagate(&spec, &rho0, &[], Integrator::default()).is_err());
        assert!(lindblad_propagate(&spec, &rho0, &[0.0, 1.0, 0.5], Integrator::default()).is_err());
        assert!(lindblad_propagate(&spec, &CMatrix::identity(3, 3), &[0.0], Integrator::default()).is_err());
        let n = ModeOperator::identity(spec.dims().clone());
        assert!(spec.clone().with_jump(&n, -1.0).is_err());
        assert!(exchange_unitary(1, 3, 0.1).is_err());
        let h = ModeOperator::new(ModeDims::single(2).unwrap(), CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO])).unwrap();
        assert!(LindbladSpec::new(&h).is_err());
    }

    #[test]
    fn fixed_step_is_reproducible() {
        let spec = dimer_spec(0.2);
        let rho0 = FockVector::basis(ModeDims::pair(2, 2).unwrap(), &[1, 0]).unwrap().to_density().into_mat();
        let times = [0.0, 1.0, PI];
        let a = lindblad_propagate(&spec, &rho0, &times, Integrator::FixedStep { dt: 0.01 }).unwrap();
        let b = lindblad_propagate(&spec, &rho0, &times, Integrator::FixedStep { dt: 0.01 }).unwrap();
        assert_eq!(a.states, b.states);
    }
}
