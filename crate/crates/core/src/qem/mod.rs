//! Quasiprobability error mitigation: decompositions, twirling and sampling plans,
//! plus the characterization pipeline feeding them.

pub mod decompose;
pub mod plan;
pub mod twirl;

pub use decompose::{decompose_gate, decompose_observable, min_l1, Method, QuasiDecomposition, RESIDUAL_TOL};
pub use plan::{build_plan, CompiledPlan, Estimate, SamplingPlan, SlotChoice, SlotDecomposition};
pub use twirl::{
    default_twirl_pairs, pauli_recovery, twirl_estimate, twirl_estimate_with_layers, twirled_cphase, PauliRecovery,
};

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::device::DeviceModel;
use crate::error::{Error, Result};
use crate::gates::{basis_operations_1q, basis_operations_2q, EffectiveOp, GateSpec, Step};
use crate::gst::{self, estimate_from_transfer, factorized_readout, linear_inversion, GateSetEstimate, Mode};
use crate::pauli::{Pauli, PauliString};
use crate::ptm::{PtmMap, PtmObservable};
use crate::rng::SeedStream;

/// Knobs of the characterization pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QemOptions {
    pub gst_mode: Mode,
    /// Treat the twirling Pauli gates as ideal when forming `U'`; otherwise use their GST estimates.
    pub assume_ideal_single_qubit_gates: bool,
    /// Twirl the controlled-phase gate; off means op 257 is the bare gate.
    pub twirl: bool,
}

impl Default for QemOptions {
    fn default() -> Self {
        QemOptions { gst_mode: Mode::Exact, assume_ideal_single_qubit_gates: true, twirl: true }
    }
}

/// Single-qubit GST of the 16 basis operations on a one-qubit device.
pub fn characterize_qubit(device: &DeviceModel, mode: Mode, seeds: &SeedStream) -> Result<GateSetEstimate> {
    if device.n_qubits() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, actual: device.n_qubits() });
    }
    let gram = gst::measure_gram(device, mode, seeds)?;
    let transfers = basis_operations_1q()
        .iter()
        .map(|op| Ok((op.label.clone(), gst::measure_transfer_op(device, op, mode, seeds)?.matrix)))
        .collect::<Result<Vec<_>>>()?;
    linear_inversion(&gram, &transfers)
}

/// Readout estimate `B_hat` of a one-qubit device from its Gram matrix alone.
pub fn characterize_readout(device: &DeviceModel, mode: Mode, seeds: &SeedStream) -> Result<DMatrix<f64>> {
    let gram = gst::measure_gram(device, mode, seeds)?;
    Ok(linear_inversion(&gram, &[])?.b_hat)
}

/// Decompose the single-qubit Pauli `letter` over the noisy effects `I, X, Y, Z`.
pub fn decompose_pauli_measurement(letter: Pauli, b_hat: &DMatrix<f64>) -> Result<QuasiDecomposition> {
    let labels: Vec<String> = Pauli::ALL.iter().map(|p| format!("M_{p}")).collect();
    let mut d = decompose_observable(&PtmObservable::pauli(&PauliString::single(1, 0, letter)), b_hat, &labels)?;
    d.target = format!("M_{letter}");
    Ok(d)
}

/// Everything estimated about a two-qubit device for one `C_phi`.
#[derive(Debug, Clone)]
pub struct TwoQubitModel {
    pub phi: f64,
    pub per_qubit: [GateSetEstimate; 2],
    /// Factorized register readout estimate.
    pub b_hat: DMatrix<f64>,
    pub cphase_hat: PtmMap,
    /// Estimate of op 257 (twirled or bare `C_phi`).
    pub gate_hat: PtmMap,
    pub basis: Vec<EffectiveOp>,
    pub basis_estimates: Vec<PtmMap>,
}

fn pauli_layer_estimate(per_qubit: &[GateSetEstimate; 2], layer: &PauliString) -> PtmMap {
    // Basis ops 1-4 are I, X_pi, Y_pi, Z_pi.
    let single = |q: usize, letter: Pauli| per_qubit[q].gates[letter.index()].1.clone();
    let l = layer.letters();
    single(0, l[0]).tensor(&single(1, l[1]))
}

/// Characterize the two-qubit device for `C_phi` and assemble the 257 basis estimates.
pub fn characterize_two_qubit(
    device: &DeviceModel,
    phi: f64,
    options: &QemOptions,
    seeds: &SeedStream,
) -> Result<TwoQubitModel> {
    if device.n_qubits() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, actual: device.n_qubits() });
    }
    let per_qubit: Vec<GateSetEstimate> = (0..2)
        .into_par_iter()
        .map(|q| characterize_qubit(&device.single_qubit_view(q)?, options.gst_mode, &seeds.derive(&format!("qubit{q}"))))
        .collect::<Result<Vec<_>>>()?;
    let per_qubit: [GateSetEstimate; 2] = per_qubit.try_into().expect("two qubits");
    let (a_hat, b_hat) = factorized_readout(&[&per_qubit[0], &per_qubit[1]]);

    let gate = GateSpec::ControlledPhase { phi };
    let bare = EffectiveOp {
        number: 257,
        label: gate.to_string(),
        ptm: gate.ptm(),
        realization: vec![Step::Gate { gate: gate.clone(), qubits: vec![0, 1] }],
    };
    let transfer = gst::measure_transfer_op(device, &bare, options.gst_mode, &seeds.derive("cphase"))?;
    let cphase_hat = estimate_from_transfer(&b_hat, &a_hat, &transfer.matrix, 2)?;

    let (op257, gate_hat) = if options.twirl {
        let pairs = default_twirl_pairs(phi);
        let est = if options.assume_ideal_single_qubit_gates {
            twirl_estimate(&cphase_hat, phi, &pairs)?
        } else {
            twirl_estimate_with_layers(&cphase_hat, phi, &pairs, |p| pauli_layer_estimate(&per_qubit, p))?
        };
        (twirled_cphase(phi, pairs)?, est)
    } else {
        (bare, cphase_hat.clone())
    };

    let basis = basis_operations_2q(op257)?;
    let mut basis_estimates = Vec::with_capacity(basis.len());
    for a in &per_qubit[0].gates {
        for b in &per_qubit[1].gates {
            basis_estimates.push(a.1.tensor(&b.1));
        }
    }
    basis_estimates.push(gate_hat.clone());
    Ok(TwoQubitModel { phi, per_qubit, b_hat, cphase_hat, gate_hat, basis, basis_estimates })
}

impl TwoQubitModel {
    /// Minimum-L1 decomposition of the ideal `C_phi` over the 257 estimates.
    pub fn decompose_cphase(&self) -> Result<QuasiDecomposition> {
        let gate = GateSpec::ControlledPhase { phi: self.phi };
        let labels: Vec<String> = self.basis.iter().map(|o| o.label.clone()).collect();
        decompose_gate(&gate.ptm(), &self.basis_estimates, &labels, &gate.to_string())
    }

    /// Decomposition of measuring `letter` on `qubit` over that qubit's noisy effects.
    pub fn decompose_measurement(&self, letter: Pauli, qubit: usize) -> Result<QuasiDecomposition> {
        decompose_pauli_measurement(letter, &self.per_qubit[qubit].b_hat)
    }
}
