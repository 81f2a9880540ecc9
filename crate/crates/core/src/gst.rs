//! Gate set tomography by linear inversion.
//!
//! Preparations are assumed ideal (`A_hat` is the ideal preparation matrix),
//! so `B_hat = g A_hat^-1` and `U_hat = B_hat^-1 U_tilde A_hat^-1`. Two-qubit
//! gate sets are factorized: `A_hat` and `B_hat` are tensor products of the
//! single-qubit ones and only two-qubit gates get a full 16x16 transfer run.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::Serialize;

use crate::circuit::SampledCircuit;
use crate::device::DeviceModel;
use crate::error::{Error, Result};
use crate::gates::{preparation_matrix, EffectiveOp, Prep};
use crate::pauli::{CMatrix, PauliString};
use crate::ptm::PtmMap;
use crate::rng::SeedStream;

/// Largest condition number accepted for the Gram and readout matrices.
pub const MAX_CONDITION: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Infinite-shot expectations.
    Exact,
    /// Empirical means over this many shots per circuit.
    Shots(u64),
}

/// Counts of shot values `-1`, `0` and `+1` for one tomography circuit.
pub type ValueCounts = [u64; 3];

/// Measured `4^n x 4^n` matrix, with raw counts when sampled.
#[derive(Debug, Clone, PartialEq)]
pub struct TomographyData {
    pub matrix: DMatrix<f64>,
    /// Row-major counts, present in shot mode.
    pub counts: Option<Vec<ValueCounts>>,
    pub shots: u64,
}

fn mean_of(c: &ValueCounts) -> f64 {
    let n = (c[0] + c[1] + c[2]) as f64;
    (c[2] as f64 - c[0] as f64) / n
}

fn sample_counts(probs: [f64; 3], shots: u64, rng: &mut impl Rng) -> ValueCounts {
    let p_plus = probs[2].clamp(0.0, 1.0);
    let plus = Binomial::new(shots, p_plus).expect("valid probability").sample(rng);
    let rest = shots - plus;
    let denom = 1.0 - p_plus;
    let p_zero = if denom > 0.0 { (probs[1] / denom).clamp(0.0, 1.0) } else { 0.0 };
    let zero = if rest > 0 { Binomial::new(rest, p_zero).expect("valid probability").sample(rng) } else { 0 };
    [rest - zero, zero, plus]
}

impl TomographyData {
    /// Parametric bootstrap replicate: each circuit's counts redrawn from its empirical frequencies.
    pub fn resample(&self, rng: &mut impl Rng) -> DMatrix<f64> {
        let Some(counts) = &self.counts else {
            return self.matrix.clone();
        };
        let (rows, cols) = self.matrix.shape();
        let mut m = DMatrix::zeros(rows, cols);
        for (k, c) in counts.iter().enumerate() {
            let n = self.shots as f64;
            let probs = [c[0] as f64 / n, c[1] as f64 / n, c[2] as f64 / n];
            m[(k / cols, k % cols)] = mean_of(&sample_counts(probs, self.shots, rng));
        }
        m
    }
}

/// `g[i][j] = <<sigma_i^exp | rho_j^exp>>`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub n_qubits: usize,
    pub data: TomographyData,
}

impl GramMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data.matrix
    }
}

fn register_preps(n_qubits: usize) -> Vec<Vec<Prep>> {
    (0..4usize.pow(n_qubits as u32))
        .map(|j| {
            (0..n_qubits)
                .map(|q| Prep::ALL[(j / 4usize.pow((n_qubits - 1 - q) as u32)) % 4])
                .collect()
        })
        .collect()
}

/// Run every `(effect i, preparation j)` circuit with `ops` in between.
fn measure_matrix(
    device: &DeviceModel,
    ops: &[EffectiveOp],
    mode: Mode,
    seeds: &SeedStream,
) -> Result<TomographyData> {
    let n = device.n_qubits();
    let preps = register_preps(n);
    let effects = PauliString::basis(n);
    let dim = effects.len();
    if let Mode::Shots(0) = mode {
        return Err(Error::validation("shot mode needs at least one shot"));
    }
    let cells: Vec<(f64, Option<ValueCounts>)> = (0..dim * dim)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / dim, k % dim);
            let circuit = SampledCircuit::new(n, preps[j].clone(), ops.to_vec(), effects[i].clone(), 1.0)?;
            let compiled = circuit.compile(device)?;
            match mode {
                Mode::Exact => Ok((compiled.exact_value()?, None)),
                Mode::Shots(shots) => {
                    let mut probs = [0.0; 3];
                    for (v, p) in compiled.outcome_distribution()? {
                        let slot = if v > 0.5 { 2 } else if v < -0.5 { 0 } else { 1 };
                        probs[slot] += p;
                    }
                    let counts = sample_counts(probs, shots, &mut seeds.rng(k as u64));
                    Ok((mean_of(&counts), Some(counts)))
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let matrix = DMatrix::from_row_iterator(dim, dim, cells.iter().map(|c| c.0));
    let counts = match mode {
        Mode::Exact => None,
        Mode::Shots(_) => Some(cells.into_iter().map(|c| c.1.expect("sampled")).collect()),
    };
    let shots = match mode {
        Mode::Exact => 0,
        Mode::Shots(s) => s,
    };
    Ok(TomographyData { matrix, counts, shots })
}

/// Gram matrix of the device register (no gate between preparation and measurement).
pub fn measure_gram(device: &DeviceModel, mode: Mode, seeds: &SeedStream) -> Result<GramMatrix> {
    let data = measure_matrix(device, &[], mode, &seeds.derive("gram"))?;
    Ok(GramMatrix { n_qubits: device.n_qubits(), data })
}

/// Transfer matrix `U_tilde = B U A` of `op`; instrument outcomes weight the recorded values.
pub fn measure_transfer_op(
    device: &DeviceModel,
    op: &EffectiveOp,
    mode: Mode,
    seeds: &SeedStream,
) -> Result<TomographyData> {
    if op.n_qubits() != device.n_qubits() {
        return Err(Error::DimensionMismatch { expected: device.n_qubits(), actual: op.n_qubits() });
    }
    measure_matrix(device, std::slice::from_ref(op), mode, &seeds.derive(&format!("transfer:{}", op.label)))
}

/// Transfer matrix of the catalog entry labelled `label`.
pub fn measure_transfer(
    device: &DeviceModel,
    catalog: &[EffectiveOp],
    label: &str,
    mode: Mode,
    seeds: &SeedStream,
) -> Result<TomographyData> {
    let op = catalog
        .iter()
        .find(|o| o.label == label)
        .ok_or_else(|| Error::UnknownGate(label.to_string()))?;
    measure_transfer_op(device, op, mode, seeds)
}

pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let (max, min) = (sv.max(), sv.min());
    if min == 0.0 { f64::INFINITY } else { max / min }
}

/// Inverse, refusing ill-conditioned input.
pub fn checked_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let condition = condition_number(m);
    if !(condition < MAX_CONDITION) {
        return Err(Error::Inversion { condition });
    }
    m.clone().try_inverse().ok_or(Error::Inversion { condition })
}

/// Output of linear-inversion GST.
#[derive(Debug, Clone, PartialEq)]
pub struct GateSetEstimate {
    pub n_qubits: usize,
    pub a_hat: DMatrix<f64>,
    pub b_hat: DMatrix<f64>,
    pub gates: Vec<(String, PtmMap)>,
}

impl GateSetEstimate {
    pub fn gate(&self, label: &str) -> Result<&PtmMap> {
        self.gates
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, m)| m)
            .ok_or_else(|| Error::UnknownGate(label.to_string()))
    }

    /// Estimate a further gate from its transfer matrix with this set's `A_hat` and `B_hat`.
    pub fn estimate_gate(&self, transfer: &DMatrix<f64>) -> Result<PtmMap> {
        estimate_from_transfer(&self.b_hat, &self.a_hat, transfer, self.n_qubits)
    }

    /// Predicted outcome `<<effect i| U |prep j>>` under the estimated gate set.
    pub fn predict(&self, gate: Option<&str>, effect: usize, prep: usize) -> Result<f64> {
        let a_col = self.a_hat.column(prep).into_owned();
        let state = match gate {
            Some(l) => self.gate(l)?.matrix() * a_col,
            None => a_col,
        };
        Ok(self.b_hat.row(effect).dot(&state.transpose()))
    }
}

/// `U_hat = B_hat^-1 U_tilde A_hat^-1`.
pub fn estimate_from_transfer(
    b_hat: &DMatrix<f64>,
    a_hat: &DMatrix<f64>,
    transfer: &DMatrix<f64>,
    n_qubits: usize,
) -> Result<PtmMap> {
    let b_inv = checked_inverse(b_hat)?;
    let a_inv = checked_inverse(a_hat)?;
    PtmMap::from_matrix(n_qubits, b_inv * transfer * a_inv)
}

/// `B_hat = g A_hat^-1`, `U_hat = B_hat^-1 U_tilde A_hat^-1`.
pub fn linear_inversion(gram: &GramMatrix, transfers: &[(String, DMatrix<f64>)]) -> Result<GateSetEstimate> {
    let a_hat = preparation_matrix(gram.n_qubits);
    let condition = condition_number(gram.matrix());
    if !(condition < MAX_CONDITION) {
        return Err(Error::Inversion { condition });
    }
    let b_hat = gram.matrix() * checked_inverse(&a_hat)?;
    let gates = transfers
        .iter()
        .map(|(label, t)| Ok((label.clone(), estimate_from_transfer(&b_hat, &a_hat, t, gram.n_qubits)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(GateSetEstimate { n_qubits: gram.n_qubits, a_hat, b_hat, gates })
}

/// Readout estimate of a register from independent single-qubit estimates.
pub fn factorized_readout(per_qubit: &[&GateSetEstimate]) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut a = per_qubit[0].a_hat.clone();
    let mut b = per_qubit[0].b_hat.clone();
    for est in &per_qubit[1..] {
        a = a.kronecker(&est.a_hat);
        b = b.kronecker(&est.b_hat);
    }
    (a, b)
}

/// `chi_mn` with `E(rho) = sum_mn chi_mn sigma_m rho sigma_n^dagger`, from the Choi matrix:
/// `chi_mn = v_m^dagger J v_n / d^2` with `v_m = (I (x) sigma_m)|Omega>`.
pub fn ptm_to_chi(m: &PtmMap) -> CMatrix {
    let n = m.n_qubits();
    let d = 1usize << n;
    let choi = m.choi();
    let vs: Vec<CMatrix> = PauliString::basis(n)
        .iter()
        .map(|p| {
            let s = crate::pauli::pauli_matrix(p);
            CMatrix::from_fn(d * d, 1, |k, _| s[(k % d, k / d)])
        })
        .collect();
    let dim = vs.len();
    let scale = Complex64::new(1.0 / (d * d) as f64, 0.0);
    let jv: Vec<CMatrix> = vs.iter().map(|v| &choi * v).collect();
    CMatrix::from_fn(dim, dim, |a, b| (vs[a].adjoint() * &jv[b])[(0, 0)] * scale)
}

/// `F = Tr(chi_exp chi_ideal) / (Tr chi_exp Tr chi_ideal)`.
pub fn process_fidelity(experimental: &PtmMap, ideal: &PtmMap) -> Result<f64> {
    if experimental.n_qubits() != ideal.n_qubits() {
        return Err(Error::DimensionMismatch { expected: ideal.n_qubits(), actual: experimental.n_qubits() });
    }
    let ce = ptm_to_chi(experimental);
    let ci = ptm_to_chi(ideal);
    let (te, ti) = (ce.trace().re, ci.trace().re);
    if te.abs() < 1e-15 || ti.abs() < 1e-15 {
        return Err(Error::Numerical("chi matrix has zero trace; fidelity undefined".into()));
    }
    Ok((ce * ci).trace().re / (te * ti))
}

// ---------------------------------------------------------------------------
// Report document
// ---------------------------------------------------------------------------

/// Row-major nested vectors, for report documents.
pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GateReport {
    pub label: String,
    pub u_hat: Vec<Vec<f64>>,
    pub process_fidelity: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub process_fidelity_se: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u_hat_se: Option<Vec<Vec<f64>>>,
}

/// Gate-set report: Gram matrix, readout estimate and per-gate estimates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GstReport {
    pub n_qubits: usize,
    pub mode: Mode,
    pub gram: Vec<Vec<f64>>,
    pub a_hat: Vec<Vec<f64>>,
    pub b_hat: Vec<Vec<f64>>,
    pub gram_condition_number: f64,
    pub bootstrap_resamples: usize,
    pub gates: Vec<GateReport>,
}

/// Run GST on `device` for every op in `catalog`, with bootstrap errors in shot mode.
pub fn gst_report(
    device: &DeviceModel,
    catalog: &[EffectiveOp],
    mode: Mode,
    seeds: &SeedStream,
    bootstrap_resamples: usize,
) -> Result<GstReport> {
    let gram = measure_gram(device, mode, seeds)?;
    let transfers = catalog
        .iter()
        .map(|op| Ok((op.label.clone(), measure_transfer_op(device, op, mode, seeds)?)))
        .collect::<Result<Vec<_>>>()?;
    let plain: Vec<(String, DMatrix<f64>)> =
        transfers.iter().map(|(l, t)| (l.clone(), t.matrix.clone())).collect();
    let est = linear_inversion(&gram, &plain)?;
    let fidelities = catalog
        .iter()
        .zip(&est.gates)
        .map(|(op, (_, u))| process_fidelity(u, &op.ptm))
        .collect::<Result<Vec<_>>>()?;

    let resamples = if matches!(mode, Mode::Shots(_)) { bootstrap_resamples } else { 0 };
    let boot_seeds = seeds.derive("bootstrap");
    let replicates: Vec<(Vec<f64>, Vec<DMatrix<f64>>)> = (0..resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = boot_seeds.rng(r as u64);
            let g = GramMatrix { n_qubits: gram.n_qubits, data: TomographyData { matrix: gram.data.resample(&mut rng), counts: None, shots: 0 } };
            let ts: Vec<(String, DMatrix<f64>)> =
                transfers.iter().map(|(l, t)| (l.clone(), t.resample(&mut rng))).collect();
            let e = linear_inversion(&g, &ts)?;
            let fids = catalog
                .iter()
                .zip(&e.gates)
                .map(|(op, (_, u))| process_fidelity(u, &op.ptm))
                .collect::<Result<Vec<_>>>()?;
            Ok((fids, e.gates.into_iter().map(|(_, u)| u.into_matrix()).collect()))
        })
        .collect::<Result<Vec<_>>>()?;

    let gates = catalog
        .iter()
        .enumerate()
        .map(|(k, op)| {
            let (fid_se, u_se) = if replicates.is_empty() {
                (None, None)
            } else {
                let count = replicates.len() as f64;
                let f_mean = replicates.iter().map(|r| r.0[k]).sum::<f64>() / count;
                let f_var = replicates.iter().map(|r| (r.0[k] - f_mean).powi(2)).sum::<f64>() / (count - 1.0).max(1.0);
                let dim = est.gates[k].1.matrix().nrows();
                let mean = replicates.iter().fold(DMatrix::zeros(dim, dim), |acc, r| acc + &r.1[k]) / count;
                let var = replicates
                    .iter()
                    .fold(DMatrix::zeros(dim, dim), |acc, r| acc + (&r.1[k] - &mean).map(|x| x * x))
                    / (count - 1.0).max(1.0);
                (Some(f_var.sqrt()), Some(matrix_rows(&var.map(f64::sqrt))))
            };
            GateReport {
                label: op.label.clone(),
                u_hat: matrix_rows(est.gates[k].1.matrix()),
                process_fidelity: fidelities[k],
                process_fidelity_se: fid_se,
                u_hat_se: u_se,
            }
        })
        .collect();

    Ok(GstReport {
        n_qubits: gram.n_qubits,
        mode,
        gram: matrix_rows(gram.matrix()),
        a_hat: matrix_rows(&est.a_hat),
        b_hat: matrix_rows(&est.b_hat),
        gram_condition_number: condition_number(gram.matrix()),
        bootstrap_resamples: resamples,
        gates,
    })
}
