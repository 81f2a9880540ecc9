//! Pauli-transfer-matrix representation of states, observables and operations.
//!
//! Normalization is deliberately asymmetric and every GST formula depends on it:
//!
//! * a state `rho` becomes the column `s_i = Tr(sigma_i rho)` (not divided by 2^n),
//! * an observable `Q` becomes the row `o_i = Tr(sigma_i Q) / 2^n`,
//! * an operation `E` becomes `M_ij = Tr(sigma_i E(sigma_j)) / 2^n`.
//!
//! With these conventions `Tr(Q E_N ... E_1 (rho)) = o . M_N ... M_1 . s`.
//! Complex matrices only appear inside the constructors of this module; all
//! downstream algebra is real.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::pauli::{pauli_matrix, CMatrix, PauliString};

/// Tolerance for validating user-supplied physical objects.
pub const VALIDATION_TOL: f64 = 1e-9;

pub fn dim_for(n_qubits: usize) -> usize {
    4usize.pow(n_qubits as u32)
}

fn hilbert_dim(n_qubits: usize) -> usize {
    1usize << n_qubits
}

fn qubits_for_hilbert_dim(d: usize) -> Result<usize> {
    if d < 2 || !d.is_power_of_two() {
        return Err(Error::validation(format!("matrix dimension {d} is not 2^n")));
    }
    Ok(d.trailing_zeros() as usize)
}

fn pauli_basis_matrices(n_qubits: usize) -> Vec<CMatrix> {
    PauliString::basis(n_qubits).iter().map(pauli_matrix).collect()
}

/// Trace of a product without forming it.
fn trace_of_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let n = a.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn check_hermitian(m: &CMatrix, what: &str) -> Result<()> {
    if !m.is_square() {
        return Err(Error::validation(format!("{what} is not square")));
    }
    let err = max_abs_diff(m, &m.adjoint());
    if err > VALIDATION_TOL {
        return Err(Error::validation(format!(
            "{what} is not Hermitian (deviation {err:e})"
        )));
    }
    Ok(())
}

/// Column vector `Tr(sigma_i rho)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PtmState {
    n_qubits: usize,
    entries: DVector<f64>,
}

impl PtmState {
    pub fn from_entries(n_qubits: usize, entries: Vec<f64>) -> Result<Self> {
        let dim = dim_for(n_qubits);
        if entries.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, actual: entries.len() });
        }
        Ok(PtmState { n_qubits, entries: DVector::from_vec(entries) })
    }

    pub(crate) fn from_vector(n_qubits: usize, entries: DVector<f64>) -> Self {
        debug_assert_eq!(entries.len(), dim_for(n_qubits));
        PtmState { n_qubits, entries }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn entries(&self) -> &DVector<f64> {
        &self.entries
    }

    /// `Tr(rho)`, the entry of the all-identity string.
    pub fn trace(&self) -> f64 {
        self.entries[0]
    }

    pub fn purity_sum(&self) -> f64 {
        self.entries.norm_squared()
    }

    pub fn tensor(&self, other: &PtmState) -> PtmState {
        PtmState {
            n_qubits: self.n_qubits + other.n_qubits,
            entries: self.entries.kronecker(&other.entries),
        }
    }

    /// Back to the density matrix `rho = sum_i s_i sigma_i / 2^n`.
    pub fn to_density_matrix(&self) -> CMatrix {
        let d = hilbert_dim(self.n_qubits);
        let mut rho = CMatrix::zeros(d, d);
        for (p, &c) in PauliString::basis(self.n_qubits).iter().zip(self.entries.iter()) {
            if c != 0.0 {
                rho += pauli_matrix(p) * Complex64::new(c / d as f64, 0.0);
            }
        }
        rho
    }
}

/// Row vector `Tr(sigma_i Q) / 2^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct PtmObservable {
    n_qubits: usize,
    entries: DVector<f64>,
}

impl PtmObservable {
    pub fn from_entries(n_qubits: usize, entries: Vec<f64>) -> Result<Self> {
        let dim = dim_for(n_qubits);
        if entries.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, actual: entries.len() });
        }
        Ok(PtmObservable { n_qubits, entries: DVector::from_vec(entries) })
    }

    pub(crate) fn from_vector(n_qubits: usize, entries: DVector<f64>) -> Self {
        debug_assert_eq!(entries.len(), dim_for(n_qubits));
        PtmObservable { n_qubits, entries }
    }

    /// Unit coordinate row of a Pauli observable.
    pub fn pauli(p: &PauliString) -> Self {
        let mut entries = DVector::zeros(dim_for(p.n_qubits()));
        entries[p.index()] = 1.0;
        PtmObservable { n_qubits: p.n_qubits(), entries }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn entries(&self) -> &DVector<f64> {
        &self.entries
    }

    pub fn tensor(&self, other: &PtmObservable) -> PtmObservable {
        PtmObservable {
            n_qubits: self.n_qubits + other.n_qubits,
            entries: self.entries.kronecker(&other.entries),
        }
    }

    pub fn dot(&self, state: &PtmState) -> Result<f64> {
        if self.n_qubits != state.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                actual: state.n_qubits,
            });
        }
        Ok(self.entries.dot(&state.entries))
    }
}

/// Real `4^n x 4^n` matrix of a (possibly trace-decreasing) operation.
#[derive(Debug, Clone, PartialEq)]
pub struct PtmMap {
    n_qubits: usize,
    matrix: DMatrix<f64>,
}

impl PtmMap {
    pub fn from_matrix(n_qubits: usize, matrix: DMatrix<f64>) -> Result<Self> {
        let dim = dim_for(n_qubits);
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::DimensionMismatch { expected: dim, actual: matrix.nrows() });
        }
        Ok(PtmMap { n_qubits, matrix })
    }

    pub fn identity(n_qubits: usize) -> Self {
        let dim = dim_for(n_qubits);
        PtmMap { n_qubits, matrix: DMatrix::identity(dim, dim) }
    }

    pub fn zeros(n_qubits: usize) -> Self {
        let dim = dim_for(n_qubits);
        PtmMap { n_qubits, matrix: DMatrix::zeros(dim, dim) }
    }

    pub fn diagonal(n_qubits: usize, diag: &[f64]) -> Result<Self> {
        let dim = dim_for(n_qubits);
        if diag.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, actual: diag.len() });
        }
        Ok(PtmMap {
            n_qubits,
            matrix: DMatrix::from_diagonal(&DVector::from_column_slice(diag)),
        })
    }

    /// Rank-1 map `|state>> <<effect|`.
    pub fn outer(state: &PtmState, effect: &PtmObservable) -> Result<Self> {
        if state.n_qubits != effect.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: state.n_qubits,
                actual: effect.n_qubits,
            });
        }
        Ok(PtmMap {
            n_qubits: state.n_qubits,
            matrix: &state.entries * effect.entries.transpose(),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    /// `self` after `other`: the matrix product `self * other`.
    pub fn compose(&self, other: &PtmMap) -> Result<PtmMap> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                actual: other.n_qubits,
            });
        }
        Ok(PtmMap { n_qubits: self.n_qubits, matrix: &self.matrix * &other.matrix })
    }

    pub fn tensor(&self, other: &PtmMap) -> PtmMap {
        PtmMap {
            n_qubits: self.n_qubits + other.n_qubits,
            matrix: self.matrix.kronecker(&other.matrix),
        }
    }

    pub fn apply(&self, state: &PtmState) -> Result<PtmState> {
        if self.n_qubits != state.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                actual: state.n_qubits,
            });
        }
        Ok(PtmState { n_qubits: self.n_qubits, entries: &self.matrix * &state.entries })
    }

    pub fn scaled(&self, factor: f64) -> PtmMap {
        PtmMap { n_qubits: self.n_qubits, matrix: &self.matrix * factor }
    }

    pub fn add(&self, other: &PtmMap) -> Result<PtmMap> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                actual: other.n_qubits,
            });
        }
        Ok(PtmMap { n_qubits: self.n_qubits, matrix: &self.matrix + &other.matrix })
    }

    /// Embed a single-qubit map on `qubit` of an `n_qubits` register.
    pub fn embed(&self, n_qubits: usize, qubit: usize) -> Result<PtmMap> {
        if self.n_qubits != 1 || qubit >= n_qubits {
            return Err(Error::validation(format!(
                "cannot embed a {}-qubit map on qubit {qubit} of {n_qubits}",
                self.n_qubits
            )));
        }
        let mut out = if qubit == 0 { self.clone() } else { PtmMap::identity(1) };
        for q in 1..n_qubits {
            let factor = if q == qubit { self.clone() } else { PtmMap::identity(1) };
            out = out.tensor(&factor);
        }
        Ok(out)
    }

    /// Row-major flattening, the column layout used by decomposition solvers.
    pub fn vectorize(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.matrix.len(),
            (0..self.matrix.nrows())
                .flat_map(|i| (0..self.matrix.ncols()).map(move |j| (i, j)))
                .map(|(i, j)| self.matrix[(i, j)]),
        )
    }

    pub fn max_abs_diff(&self, other: &PtmMap) -> f64 {
        (&self.matrix - &other.matrix).amax()
    }

    pub fn is_trace_preserving(&self, tol: f64) -> bool {
        let row = self.matrix.row(0);
        (row[0] - 1.0).abs() <= tol && row.iter().skip(1).all(|x| x.abs() <= tol)
    }

    pub fn is_orthogonal(&self, tol: f64) -> bool {
        let dim = self.matrix.nrows();
        (self.matrix.transpose() * &self.matrix - DMatrix::<f64>::identity(dim, dim)).amax() <= tol
    }

    /// Choi matrix `J = (1/d) sum_ij M_ij sigma_j^T (x) sigma_i`, i.e.
    /// `(id (x) E)(|Omega><Omega|)` with the unnormalized maximally entangled vector.
    pub fn choi(&self) -> CMatrix {
        let d = hilbert_dim(self.n_qubits);
        let paulis = pauli_basis_matrices(self.n_qubits);
        let mut j = CMatrix::zeros(d * d, d * d);
        for (col, sj) in paulis.iter().enumerate() {
            let sj_t = sj.transpose();
            for (row, si) in paulis.iter().enumerate() {
                let c = self.matrix[(row, col)];
                if c != 0.0 {
                    j += sj_t.kronecker(si) * Complex64::new(c / d as f64, 0.0);
                }
            }
        }
        j
    }

    /// Complete positivity via the Choi spectrum.
    pub fn is_completely_positive(&self, tol: f64) -> bool {
        let eig = self.choi().symmetric_eigen();
        eig.eigenvalues.iter().all(|&v| v >= -tol)
    }
}

/// `|rho>>_i = Tr(sigma_i rho)`.
pub fn vectorize_state(rho: &CMatrix) -> Result<PtmState> {
    let n = qubits_for_hilbert_dim(rho.nrows())?;
    check_hermitian(rho, "density matrix")?;
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > VALIDATION_TOL || tr.im.abs() > VALIDATION_TOL {
        return Err(Error::validation(format!("density matrix trace is {tr}, expected 1")));
    }
    let entries = pauli_basis_matrices(n)
        .iter()
        .map(|s| trace_of_product(s, rho).re)
        .collect();
    PtmState::from_entries(n, entries)
}

/// `<<Q|_i = Tr(sigma_i Q) / 2^n`.
pub fn covectorize_observable(q: &CMatrix) -> Result<PtmObservable> {
    let n = qubits_for_hilbert_dim(q.nrows())?;
    check_hermitian(q, "observable")?;
    let d = hilbert_dim(n) as f64;
    let entries = pauli_basis_matrices(n)
        .iter()
        .map(|s| trace_of_product(s, q).re / d)
        .collect();
    PtmObservable::from_entries(n, entries)
}

fn ptm_from_kraus_unchecked(ops: &[CMatrix], n: usize) -> PtmMap {
    let d = hilbert_dim(n);
    let paulis = pauli_basis_matrices(n);
    let dim = paulis.len();
    // Image of each basis element under the channel.
    let images: Vec<CMatrix> = paulis
        .iter()
        .map(|sj| {
            ops.iter()
                .fold(CMatrix::zeros(d, d), |acc, k| acc + k * sj * k.adjoint())
        })
        .collect();
    let mut m = DMatrix::zeros(dim, dim);
    for (j, img) in images.iter().enumerate() {
        for (i, si) in paulis.iter().enumerate() {
            m[(i, j)] = trace_of_product(si, img).re / d as f64;
        }
    }
    PtmMap { n_qubits: n, matrix: m }
}

/// `M_ij = Tr(sigma_i U sigma_j U^dagger) / 2^n`.
pub fn ptm_of_unitary(u: &CMatrix) -> Result<PtmMap> {
    let n = qubits_for_hilbert_dim(u.nrows())?;
    if !u.is_square() {
        return Err(Error::validation("unitary is not square"));
    }
    let d = u.nrows();
    let err = max_abs_diff(&(u.adjoint() * u), &CMatrix::identity(d, d));
    if err > VALIDATION_TOL {
        return Err(Error::validation(format!("matrix is not unitary (deviation {err:e})")));
    }
    Ok(ptm_from_kraus_unchecked(std::slice::from_ref(u), n))
}

/// `M_ij = sum_k Tr(sigma_i K_k sigma_j K_k^dagger) / 2^n`; trace-decreasing sets allowed.
pub fn ptm_of_kraus(ops: &[CMatrix]) -> Result<PtmMap> {
    let first = ops
        .first()
        .ok_or_else(|| Error::validation("empty Kraus set"))?;
    let d = first.nrows();
    let n = qubits_for_hilbert_dim(d)?;
    if ops.iter().any(|k| k.nrows() != d || k.ncols() != d) {
        return Err(Error::validation("Kraus operators have inconsistent shapes"));
    }
    let gram = ops
        .iter()
        .fold(CMatrix::zeros(d, d), |acc, k| acc + k.adjoint() * k);
    let slack = CMatrix::identity(d, d) - gram;
    let min_eig = slack
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if min_eig < -VALIDATION_TOL {
        return Err(Error::validation(format!(
            "Kraus set is trace-increasing (min eigenvalue of I - sum K^dagger K is {min_eig:e})"
        )));
    }
    Ok(ptm_from_kraus_unchecked(ops, n))
}

/// Free-function form of [`PtmMap::compose`]: `a` after `b`.
pub fn compose(a: &PtmMap, b: &PtmMap) -> Result<PtmMap> {
    a.compose(b)
}

pub fn tensor(a: &PtmMap, b: &PtmMap) -> PtmMap {
    a.tensor(b)
}

/// `<<Q| M_N ... M_1 |rho>>`, with `maps` listed in application order.
pub fn expectation(obs: &PtmObservable, maps: &[PtmMap], state: &PtmState) -> Result<f64> {
    let mut s = state.clone();
    for m in maps {
        s = m.apply(&s)?;
    }
    obs.dot(&s)
}
