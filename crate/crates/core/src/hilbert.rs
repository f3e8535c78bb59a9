//! Truncated Fock-space linear algebra.
//!
//! A multi-mode space is described by [`ModeDims`]: one truncation dimension
//! per mode, with mode 0 (site A) as the slowest-varying index of the
//! row-major flattening. Every type in this module carries its `ModeDims`, and
//! no operation here ever enlarges a space on its own.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, CVector, C64, ZERO};

/// Tolerance for the unit-norm invariant of [`FockVector`].
pub const NORM_TOL: f64 = 1e-12;
/// Tolerance for hermiticity and unit trace of [`DensityMatrix`].
pub const DENSITY_TOL: f64 = 1e-12;
/// Most negative eigenvalue accepted in a [`DensityMatrix`].
pub const EIGEN_FLOOR: f64 = -1e-10;
/// Tolerance used when verifying the unitary flag of a [`ModeOperator`].
pub const UNITARY_TOL: f64 = 1e-10;

/// Per-mode truncation dimensions. A mode of dimension `d` holds the levels
/// `0..d`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct ModeDims(Vec<usize>);

impl ModeDims {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidArgument("mode list is empty".into()));
        }
        if let Some(&d) = dims.iter().find(|&&d| d == 0) {
            return Err(Error::InvalidDimension(d));
        }
        Ok(ModeDims(dims))
    }

    pub fn single(dim: usize) -> Result<Self> {
        Self::new(vec![dim])
    }

    pub fn pair(dim_a: usize, dim_b: usize) -> Result<Self> {
        Self::new(vec![dim_a, dim_b])
    }

    pub fn modes(&self) -> &[usize] {
        &self.0
    }

    pub fn num_modes(&self) -> usize {
        self.0.len()
    }

    pub fn total(&self) -> usize {
        self.0.iter().product()
    }

    /// Row-major strides; the last mode has stride 1.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.0.len()];
        for k in (0..self.0.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.0[k + 1];
        }
        strides
    }

    pub fn index_of(&self, levels: &[usize]) -> Result<usize> {
        if levels.len() != self.0.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} levels given for {} modes",
                levels.len(),
                self.0.len()
            )));
        }
        let mut index = 0;
        for (&level, &dim) in levels.iter().zip(&self.0) {
            if level >= dim {
                return Err(Error::LevelOutOfRange { level, dim });
            }
            index = index * dim + level;
        }
        Ok(index)
    }

    pub fn levels_of(&self, mut index: usize) -> Vec<usize> {
        let mut levels = vec![0; self.0.len()];
        for k in (0..self.0.len()).rev() {
            levels[k] = index % self.0[k];
            index /= self.0[k];
        }
        levels
    }

    /// Total excitation number of the basis state at `index`.
    pub fn excitations_of(&self, index: usize) -> usize {
        self.levels_of(index).iter().sum()
    }

    pub fn concat(&self, other: &ModeDims) -> ModeDims {
        let mut dims = self.0.clone();
        dims.extend_from_slice(&other.0);
        ModeDims(dims)
    }

    fn check_keep(&self, keep: &[usize]) -> Result<Vec<usize>> {
        if keep.is_empty() {
            return Err(Error::InvalidArgument("keep set is empty".into()));
        }
        let mut keep = keep.to_vec();
        keep.sort_unstable();
        keep.dedup();
        if let Some(&bad) = keep.iter().find(|&&m| m >= self.0.len()) {
            return Err(Error::InvalidArgument(format!(
                "mode {bad} out of range for {} modes",
                self.0.len()
            )));
        }
        Ok(keep)
    }

    /// Splits the flattened index space into (kept, traced) sub-indices:
    /// returns the kept dims, the traced dims, and `full[k][t]`, the full
    /// index of kept sub-index `k` combined with traced sub-index `t`.
    fn bipartite_map(&self, keep: &[usize]) -> Result<(ModeDims, Option<ModeDims>, Vec<Vec<usize>>)> {
        let keep = self.check_keep(keep)?;
        let traced: Vec<usize> = (0..self.0.len()).filter(|m| !keep.contains(m)).collect();
        let kept_dims = ModeDims(keep.iter().map(|&m| self.0[m]).collect());
        let traced_dims = if traced.is_empty() {
            None
        } else {
            Some(ModeDims(traced.iter().map(|&m| self.0[m]).collect()))
        };
        let strides = self.strides();
        let n_traced = traced_dims.as_ref().map_or(1, ModeDims::total);
        let mut full = vec![vec![0usize; n_traced]; kept_dims.total()];
        for (k, row) in full.iter_mut().enumerate() {
            let kl = kept_dims.levels_of(k);
            let base: usize = keep.iter().zip(&kl).map(|(&m, &l)| strides[m] * l).sum();
            for (t, slot) in row.iter_mut().enumerate() {
                let offset: usize = match &traced_dims {
                    Some(td) => {
                        let tl = td.levels_of(t);
                        traced.iter().zip(&tl).map(|(&m, &l)| strides[m] * l).sum()
                    }
                    None => 0,
                };
                *slot = base + offset;
            }
        }
        Ok((kept_dims, traced_dims, full))
    }
}

/// Shared Kronecker-product operation for vectors, operators and density
/// matrices. The receiver is the slower (left) factor.
pub trait Tensor: Sized {
    fn tensor(&self, other: &Self) -> Self;
}

/// Unit-norm pure state on a truncated multi-mode space.
#[derive(Clone, Debug, PartialEq)]
pub struct FockVector {
    dims: ModeDims,
    amps: CVector,
}

impl FockVector {
    /// Wraps amplitudes that must already be normalized.
    pub fn new(dims: ModeDims, amps: CVector) -> Result<Self> {
        check_len(&dims, amps.len())?;
        let norm = amps.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(norm));
        }
        Ok(FockVector { dims, amps })
    }

    /// Normalizes arbitrary (non-zero) amplitudes.
    pub fn normalized(dims: ModeDims, amps: CVector) -> Result<Self> {
        check_len(&dims, amps.len())?;
        let norm = amps.norm();
        if !norm.is_finite() {
            return Err(Error::NonFinite);
        }
        if norm <= f64::MIN_POSITIVE {
            return Err(Error::ZeroWeight(norm * norm));
        }
        Ok(FockVector {
            dims,
            amps: amps / c(norm, 0.0),
        })
    }

    /// Number state with the given level in each mode.
    pub fn basis(dims: ModeDims, levels: &[usize]) -> Result<Self> {
        let index = dims.index_of(levels)?;
        let mut amps = CVector::zeros(dims.total());
        amps[index] = c(1.0, 0.0);
        Ok(FockVector { dims, amps })
    }

    pub fn dims(&self) -> &ModeDims {
        &self.dims
    }

    pub fn amps(&self) -> &CVector {
        &self.amps
    }

    pub fn into_amps(self) -> CVector {
        self.amps
    }

    pub fn amp(&self, levels: &[usize]) -> Result<C64> {
        Ok(self.amps[self.dims.index_of(levels)?])
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &FockVector) -> Result<C64> {
        same_dims(&self.dims, &other.dims)?;
        Ok(self.amps.dotc(&other.amps))
    }

    pub fn fidelity(&self, other: &FockVector) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    pub fn expectation(&self, op: &ModeOperator) -> Result<C64> {
        same_dims(&self.dims, &op.dims)?;
        Ok(self.amps.dotc(&(&op.mat * &self.amps)))
    }

    /// `op |self>` without renormalization. The caller owns the result as an
    /// explicitly unnormalized intermediate.
    pub fn apply_raw(&self, op: &ModeOperator) -> Result<CVector> {
        same_dims(&self.dims, &op.dims)?;
        Ok(&op.mat * &self.amps)
    }

    /// `op |self>` for a norm-preserving `op`; fails if the norm drifts.
    pub fn evolve(&self, op: &ModeOperator) -> Result<FockVector> {
        FockVector::new(self.dims.clone(), self.apply_raw(op)?)
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix {
            dims: self.dims.clone(),
            mat: &self.amps * self.amps.adjoint(),
        }
    }

    /// Coefficient matrix for the bipartition `keep | rest`: rows index the
    /// kept modes, columns the remaining ones.
    pub fn bipartite_matrix(&self, keep: &[usize]) -> Result<CMatrix> {
        let (kept, traced, full) = self.dims.bipartite_map(keep)?;
        let cols = traced.as_ref().map_or(1, ModeDims::total);
        Ok(CMatrix::from_fn(kept.total(), cols, |k, t| self.amps[full[k][t]]))
    }

    /// Squared Schmidt coefficients across `keep | rest`, descending.
    pub fn schmidt_weights(&self, keep: &[usize]) -> Result<Vec<f64>> {
        let m = self.bipartite_matrix(keep)?;
        Ok(linalg::singular_values(&m).into_iter().map(|s| s * s).collect())
    }

    /// Reduced state on `keep`, computed directly from the amplitudes.
    pub fn reduced(&self, keep: &[usize]) -> Result<DensityMatrix> {
        let (kept, _, _) = self.dims.bipartite_map(keep)?;
        let m = self.bipartite_matrix(keep)?;
        Ok(DensityMatrix {
            dims: kept,
            mat: &m * m.adjoint(),
        })
    }
}

impl Tensor for FockVector {
    fn tensor(&self, other: &Self) -> Self {
        FockVector {
            dims: self.dims.concat(&other.dims),
            amps: self.amps.kronecker(&other.amps),
        }
    }
}

/// Mixed state on a truncated multi-mode space.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    dims: ModeDims,
    mat: CMatrix,
}

impl DensityMatrix {
    /// Validates hermiticity, unit trace and positivity at the default
    /// tolerances.
    pub fn new(dims: ModeDims, mat: CMatrix) -> Result<Self> {
        Self::with_tolerance(dims, mat, DENSITY_TOL)
    }

    /// Same as [`DensityMatrix::new`] with a caller-chosen tolerance for
    /// hermiticity and trace, for states produced by an approximate
    /// integrator.
    pub fn with_tolerance(dims: ModeDims, mat: CMatrix, tol: f64) -> Result<Self> {
        check_square(&dims, &mat)?;
        if mat.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        let herm = linalg::max_abs_diff(&mat, &mat.adjoint());
        if herm > tol {
            return Err(Error::InvalidDensity(format!("not Hermitian (deviation {herm:.3e})")));
        }
        let tr = mat.trace();
        if (tr.re - 1.0).abs() > tol || tr.im.abs() > tol {
            return Err(Error::InvalidDensity(format!("trace is {tr}")));
        }
        let hermitian_part = (&mat + mat.adjoint()) * c(0.5, 0.0);
        let (vals, _) = linalg::hermitian_eigen(&hermitian_part);
        if let Some(&min) = vals.first() {
            if min < EIGEN_FLOOR {
                return Err(Error::InvalidDensity(format!("negative eigenvalue {min:.3e}")));
            }
        }
        Ok(DensityMatrix { dims, mat })
    }

    pub fn from_pure(psi: &FockVector) -> Self {
        psi.to_density()
    }

    pub fn maximally_mixed(dims: ModeDims) -> Self {
        let n = dims.total();
        DensityMatrix {
            mat: CMatrix::identity(n, n) * c(1.0 / n as f64, 0.0),
            dims,
        }
    }

    pub(crate) fn from_parts_unchecked(dims: ModeDims, mat: CMatrix) -> Self {
        debug_assert_eq!(dims.total(), mat.nrows());
        DensityMatrix { dims, mat }
    }

    pub fn dims(&self) -> &ModeDims {
        &self.dims
    }

    pub fn mat(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_mat(self) -> CMatrix {
        self.mat
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    pub fn purity(&self) -> f64 {
        purity(self)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::hermitian_eigen(&self.mat).0
    }

    pub fn expectation(&self, op: &ModeOperator) -> Result<f64> {
        same_dims(&self.dims, &op.dims)?;
        Ok((&op.mat * &self.mat).trace().re)
    }
}

impl Tensor for DensityMatrix {
    fn tensor(&self, other: &Self) -> Self {
        DensityMatrix {
            dims: self.dims.concat(&other.dims),
            mat: self.mat.kronecker(&other.mat),
        }
    }
}

/// Matrix representation of an operator on a truncated multi-mode space.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeOperator {
    dims: ModeDims,
    mat: CMatrix,
    hermitian: bool,
    unitary: bool,
}

impl ModeOperator {
    pub fn new(dims: ModeDims, mat: CMatrix) -> Result<Self> {
        check_square(&dims, &mat)?;
        Ok(ModeOperator {
            dims,
            mat,
            hermitian: false,
            unitary: false,
        })
    }

    pub fn identity(dims: ModeDims) -> Self {
        let n = dims.total();
        ModeOperator {
            dims,
            mat: CMatrix::identity(n, n),
            hermitian: true,
            unitary: true,
        }
    }

    /// Sets the Hermitian flag after checking it to [`DENSITY_TOL`].
    pub fn mark_hermitian(mut self) -> Result<Self> {
        if !linalg::is_hermitian(&self.mat, DENSITY_TOL) {
            return Err(Error::Numerical("operator flagged Hermitian is not".into()));
        }
        self.hermitian = true;
        Ok(self)
    }

    /// Sets the unitary flag after checking `U^dag U = I` to [`UNITARY_TOL`].
    pub fn mark_unitary(mut self) -> Result<Self> {
        if !linalg::is_unitary(&self.mat, UNITARY_TOL) {
            return Err(Error::Numerical("operator flagged unitary is not".into()));
        }
        self.unitary = true;
        Ok(self)
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn is_unitary(&self) -> bool {
        self.unitary
    }

    pub fn dims(&self) -> &ModeDims {
        &self.dims
    }

    pub fn mat(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_mat(self) -> CMatrix {
        self.mat
    }

    pub fn adjoint(&self) -> ModeOperator {
        ModeOperator {
            dims: self.dims.clone(),
            mat: self.mat.adjoint(),
            hermitian: self.hermitian,
            unitary: self.unitary,
        }
    }

    /// Operator product `self * rhs`.
    pub fn compose(&self, rhs: &ModeOperator) -> Result<ModeOperator> {
        same_dims(&self.dims, &rhs.dims)?;
        ModeOperator::new(self.dims.clone(), &self.mat * &rhs.mat)
    }

    pub fn scaled(&self, factor: C64) -> ModeOperator {
        ModeOperator {
            dims: self.dims.clone(),
            mat: &self.mat * factor,
            hermitian: self.hermitian && factor.im == 0.0,
            unitary: self.unitary && (factor.norm() - 1.0).abs() < f64::EPSILON,
        }
    }

    pub fn plus(&self, rhs: &ModeOperator) -> Result<ModeOperator> {
        same_dims(&self.dims, &rhs.dims)?;
        ModeOperator::new(self.dims.clone(), &self.mat + &rhs.mat)
    }

    /// Lifts a single-mode operator onto `mode` of the space `dims`.
    pub fn embed(&self, dims: &ModeDims, mode: usize) -> Result<ModeOperator> {
        if self.dims.num_modes() != 1 {
            return Err(Error::InvalidArgument("embed expects a single-mode operator".into()));
        }
        if mode >= dims.num_modes() {
            return Err(Error::InvalidArgument(format!("mode {mode} out of range")));
        }
        if dims.modes()[mode] != self.dims.modes()[0] {
            return Err(Error::DimensionMismatch(format!(
                "operator dimension {} vs mode dimension {}",
                self.dims.modes()[0],
                dims.modes()[mode]
            )));
        }
        let mut mat = CMatrix::identity(1, 1);
        for (k, &d) in dims.modes().iter().enumerate() {
            let factor = if k == mode {
                self.mat.clone()
            } else {
                CMatrix::identity(d, d)
            };
            mat = mat.kronecker(&factor);
        }
        Ok(ModeOperator {
            dims: dims.clone(),
            mat,
            hermitian: self.hermitian,
            unitary: self.unitary,
        })
    }
}

impl Tensor for ModeOperator {
    fn tensor(&self, other: &Self) -> Self {
        ModeOperator {
            dims: self.dims.concat(&other.dims),
            mat: self.mat.kronecker(&other.mat),
            hermitian: self.hermitian && other.hermitian,
            unitary: self.unitary && other.unitary,
        }
    }
}

/// Truncated annihilation operator, `<n-1|a|n> = sqrt(n)`.
pub fn annihilation(dim: usize) -> Result<ModeOperator> {
    if dim < 2 {
        return Err(Error::InvalidDimension(dim));
    }
    let mut mat = CMatrix::zeros(dim, dim);
    for n in 1..dim {
        mat[(n - 1, n)] = c((n as f64).sqrt(), 0.0);
    }
    ModeOperator::new(ModeDims::single(dim)?, mat)
}

pub fn creation(dim: usize) -> Result<ModeOperator> {
    Ok(annihilation(dim)?.adjoint())
}

/// Number operator `a^dag a`, built directly as `diag(0, 1, ..., dim-1)`.
pub fn number(dim: usize) -> Result<ModeOperator> {
    if dim < 2 {
        return Err(Error::InvalidDimension(dim));
    }
    let mat = CMatrix::from_diagonal(&CVector::from_iterator(dim, (0..dim).map(|n| c(n as f64, 0.0))));
    ModeOperator::new(ModeDims::single(dim)?, mat)?.mark_hermitian()
}

/// Diagonal operator counting the total excitation number of each basis state.
pub fn total_number(dims: &ModeDims) -> ModeOperator {
    let n = dims.total();
    let diag = CVector::from_iterator(n, (0..n).map(|i| c(dims.excitations_of(i) as f64, 0.0)));
    ModeOperator {
        dims: dims.clone(),
        mat: CMatrix::from_diagonal(&diag),
        hermitian: true,
        unitary: false,
    }
}

/// Reduced density matrix on the modes in `keep` (any order; the result
/// lists them in ascending mode order).
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let (kept, traced, full) = rho.dims.bipartite_map(keep)?;
    let nk = kept.total();
    let nt = traced.as_ref().map_or(1, ModeDims::total);
    let mut out = CMatrix::from_element(nk, nk, ZERO);
    for i in 0..nk {
        for j in 0..nk {
            out[(i, j)] = full[i].iter().zip(&full[j]).take(nt).map(|(&a, &b)| rho.mat[(a, b)]).sum();
        }
    }
    Ok(DensityMatrix::from_parts_unchecked(kept, out))
}

/// `Tr rho^2`, evaluated as the squared Frobenius norm of the Hermitian matrix.
pub fn purity(rho: &DensityMatrix) -> f64 {
    rho.mat.iter().map(|z| z.norm_sqr()).sum()
}

fn check_len(dims: &ModeDims, len: usize) -> Result<()> {
    if dims.total() != len {
        return Err(Error::DimensionMismatch(format!(
            "{len} amplitudes for total dimension {}",
            dims.total()
        )));
    }
    Ok(())
}

fn check_square(dims: &ModeDims, mat: &CMatrix) -> Result<()> {
    let n = dims.total();
    if mat.nrows() != n || mat.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} matrix for total dimension {n}",
            mat.nrows(),
            mat.ncols()
        )));
    }
    Ok(())
}

pub(crate) fn same_dims(a: &ModeDims, b: &ModeDims) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch(format!("{:?} vs {:?}", a.modes(), b.modes())));
    }
    Ok(())
}
