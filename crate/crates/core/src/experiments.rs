//! End-to-end experiments: one-qubit readout mitigation, the two-qubit DQCp
//! sweep and the depolarizing accuracy model.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::circuit::{CircuitTemplate, Slot};
use crate::device::DeviceModel;
use crate::error::{Error, Result};
use crate::gates::{tensor_ops, EffectiveOp, GateSpec, Prep, Step};
use crate::gst::Mode;
use crate::pauli::{Pauli, PauliString};
use crate::ptm::{expectation, PtmObservable};
use crate::qem::{
    build_plan, characterize_readout, characterize_two_qubit, decompose_pauli_measurement, QemOptions,
    QuasiDecomposition, SamplingPlan, SlotChoice, SlotDecomposition,
};
use crate::rng::SeedStream;

pub const DEFAULT_ONE_QUBIT_SHOTS: u64 = 3000;
pub const DEFAULT_TWO_QUBIT_SHOTS: u64 = 10_000;
pub const DEFAULT_REPETITIONS: usize = 100;
/// Budget divisor of the quick profile.
pub const QUICK_DIVISOR: u64 = 100;
pub const DEFAULT_SEED: u64 = 7;
/// Environment variable overriding [`DEFAULT_SEED`].
pub const SEED_ENV: &str = "UQEM_SEED";

pub fn default_phis() -> Vec<f64> {
    vec![PI / 4.0, PI / 2.0, 3.0 * PI / 4.0, PI]
}

/// Sample budget and characterization options of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunSettings {
    /// Random circuits per average.
    pub shots: u64,
    /// Number of averages.
    pub repetitions: usize,
    pub seed: u64,
    pub gst_mode: Mode,
    pub assume_ideal_single_qubit_gates: bool,
    pub twirl: bool,
}

impl RunSettings {
    pub fn new(shots: u64, repetitions: usize, seed: u64) -> Self {
        RunSettings {
            shots,
            repetitions,
            seed,
            gst_mode: Mode::Exact,
            assume_ideal_single_qubit_gates: true,
            twirl: true,
        }
    }

    pub fn options(&self) -> QemOptions {
        QemOptions {
            gst_mode: self.gst_mode,
            assume_ideal_single_qubit_gates: self.assume_ideal_single_qubit_gates,
            twirl: self.twirl,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.shots == 0 || self.repetitions == 0 {
            return Err(Error::validation("shots and repetitions must be positive"));
        }
        Ok(())
    }
}

/// Spread of repeated averages.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub grand_mean: f64,
    /// Standard deviation across repetitions.
    pub sd: f64,
    /// `sd / sqrt(repetitions)`.
    pub se: f64,
    /// Per-repetition averages, for histograms.
    pub values: Vec<f64>,
}

impl Summary {
    pub fn from_values(values: Vec<f64>) -> Summary {
        let n = values.len() as f64;
        let grand_mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - grand_mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Summary { grand_mean, sd: var.sqrt(), se: (var / n).sqrt(), values }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
    pub ideal: f64,
    pub raw: Summary,
    pub qem: Summary,
    /// Weight magnitude of the mitigated estimator.
    pub cost: f64,
    /// Circuits per estimator (`shots x repetitions`).
    pub n_samples: u64,
    pub decompositions: Vec<QuasiDecomposition>,
}

fn repeat(plan: &SamplingPlan, device: &DeviceModel, settings: &RunSettings, seeds: &SeedStream) -> Result<Summary> {
    let estimates = plan.compile(device)?.estimate_repetitions(settings.shots, settings.repetitions, seeds)?;
    Ok(Summary::from_values(estimates.into_iter().map(|e| e.mean).collect()))
}

fn pauli_choices(n_qubits: usize, qubit: usize) -> Vec<SlotChoice> {
    Pauli::ALL.iter().map(|&p| SlotChoice::Measurement(PauliString::single(n_qubits, qubit, p))).collect()
}

fn half_pi(axis: Pauli) -> EffectiveOp {
    EffectiveOp::from_gates(0, vec![GateSpec::rotation(axis, PI / 2.0)]).expect("one gate")
}

/// `|0>`, `X_pi/2`, then a measurement slot (or `Z` when `measure` is `None`).
pub fn one_qubit_template(measure: Option<&str>) -> CircuitTemplate {
    CircuitTemplate {
        n_qubits: 1,
        prep: vec![Prep::Zero],
        ops: vec![Slot::Fixed(half_pi(Pauli::X))],
        measurement: match measure {
            Some(id) => Slot::Replaceable(id.to_string()),
            None => Slot::Fixed(PauliString::single(1, 0, Pauli::Z)),
        },
    }
}

/// Ideal `<Z>` of the one-qubit circuit.
pub fn one_qubit_ideal() -> Result<f64> {
    expectation(
        &PtmObservable::pauli(&PauliString::single(1, 0, Pauli::Z)),
        &[GateSpec::rotation(Pauli::X, PI / 2.0).ptm()],
        &Prep::Zero.ptm_state(),
    )
}

/// Mitigated plan for the one-qubit circuit on `device`.
pub fn one_qubit_plan(device: &DeviceModel, mode: Mode, seeds: &SeedStream) -> Result<SamplingPlan> {
    let b_hat = characterize_readout(device, mode, &seeds.derive("gst"))?;
    let d = decompose_pauli_measurement(Pauli::Z, &b_hat)?;
    build_plan(
        one_qubit_template(Some("measure")),
        vec![SlotDecomposition { slot: "measure".into(), choices: pauli_choices(1, 0), decomposition: d }],
    )
}

pub fn run_one_qubit(device: &DeviceModel, settings: &RunSettings) -> Result<ExperimentResult> {
    settings.validate()?;
    if device.n_qubits() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, actual: device.n_qubits() });
    }
    let seeds = SeedStream::new(settings.seed);
    let plan = one_qubit_plan(device, settings.gst_mode, &seeds)?;
    let raw_plan = build_plan(one_qubit_template(None), vec![])?;
    Ok(ExperimentResult {
        phi: None,
        ideal: one_qubit_ideal()?,
        raw: repeat(&raw_plan, device, settings, &seeds.derive("raw"))?,
        qem: repeat(&plan, device, settings, &seeds.derive("qem"))?,
        cost: plan.total_cost,
        n_samples: settings.shots * settings.repetitions as u64,
        decompositions: vec![decomposition_of(&plan, 0)],
    })
}

fn decomposition_of(plan: &SamplingPlan, slot: usize) -> QuasiDecomposition {
    plan.slots[slot].decomposition.clone()
}

/// `Y_pi/2` on both qubits of `|00>`.
fn dqcp_preparation() -> EffectiveOp {
    tensor_ops(0, &half_pi(Pauli::Y), &half_pi(Pauli::Y))
}

/// Target qubit carrying the final `X` measurement.
pub const DQCP_TARGET: usize = 1;

/// DQCp: `|00>`, `Y_pi/2 (x) Y_pi/2`, `C_phi`, measure `X` on the target qubit.
/// With `slots`, the gate and the measurement are replaceable (`gate`, `measure`).
pub fn dqcp_template(phi: f64, slots: bool) -> CircuitTemplate {
    let gate = GateSpec::ControlledPhase { phi };
    let cphase = EffectiveOp {
        number: 0,
        label: gate.to_string(),
        ptm: gate.ptm(),
        realization: vec![Step::Gate { gate, qubits: vec![0, 1] }],
    };
    CircuitTemplate {
        n_qubits: 2,
        prep: vec![Prep::Zero, Prep::Zero],
        ops: vec![
            Slot::Fixed(dqcp_preparation()),
            if slots { Slot::Replaceable("gate".into()) } else { Slot::Fixed(cphase) },
        ],
        measurement: if slots {
            Slot::Replaceable("measure".into())
        } else {
            Slot::Fixed(PauliString::single(2, DQCP_TARGET, Pauli::X))
        },
    }
}

/// Ideal DQCp value, `cos^2(phi/2)`, from the PTM contraction.
pub fn dqcp_ideal(phi: f64) -> Result<f64> {
    let prep = Prep::Zero.ptm_state().tensor(&Prep::Zero.ptm_state());
    expectation(
        &PtmObservable::pauli(&PauliString::single(2, DQCP_TARGET, Pauli::X)),
        &[dqcp_preparation().ptm, GateSpec::ControlledPhase { phi }.ptm()],
        &prep,
    )
}

/// Mitigated DQCp plan for `C_phi` on `device`.
pub fn dqcp_plan(device: &DeviceModel, phi: f64, options: &QemOptions, seeds: &SeedStream) -> Result<SamplingPlan> {
    let model = characterize_two_qubit(device, phi, options, &seeds.derive("gst"))?;
    let gate = model.decompose_cphase()?;
    let measure = model.decompose_measurement(Pauli::X, DQCP_TARGET)?;
    build_plan(
        dqcp_template(phi, true),
        vec![
            SlotDecomposition {
                slot: "gate".into(),
                choices: model.basis.iter().cloned().map(SlotChoice::Op).collect(),
                decomposition: gate,
            },
            SlotDecomposition { slot: "measure".into(), choices: pauli_choices(2, DQCP_TARGET), decomposition: measure },
        ],
    )
}

/// Exact value of the DQCp circuit with the device's own preparation and
/// fixed gates but an ideal `C_phi` and ideal `X` measurement. The mitigated
/// estimator is unbiased for this value.
pub fn dqcp_reference(device: &DeviceModel, phi: f64) -> Result<f64> {
    let t = dqcp_template(phi, false);
    let mut state = device.prep_register(&t.prep)?;
    for step in device.compile_steps(&dqcp_preparation().realization, 2)? {
        state = step.effective_map().apply(&state)?;
    }
    state = GateSpec::ControlledPhase { phi }.ptm().apply(&state)?;
    PtmObservable::pauli(&PauliString::single(2, DQCP_TARGET, Pauli::X)).dot(&state)
}

pub fn run_two_qubit_point(device: &DeviceModel, phi: f64, settings: &RunSettings, seeds: &SeedStream) -> Result<ExperimentResult> {
    settings.validate()?;
    if device.n_qubits() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, actual: device.n_qubits() });
    }
    let plan = dqcp_plan(device, phi, &settings.options(), seeds)?;
    let raw_plan = build_plan(dqcp_template(phi, false), vec![])?;
    let gate = plan.slots.iter().position(|s| s.slot == "gate").expect("gate slot");
    let measure = plan.slots.iter().position(|s| s.slot == "measure").expect("measure slot");
    Ok(ExperimentResult {
        phi: Some(phi),
        ideal: dqcp_ideal(phi)?,
        raw: repeat(&raw_plan, device, settings, &seeds.derive("raw"))?,
        qem: repeat(&plan, device, settings, &seeds.derive("qem"))?,
        cost: plan.total_cost,
        n_samples: settings.shots * settings.repetitions as u64,
        decompositions: vec![decomposition_of(&plan, gate), decomposition_of(&plan, measure)],
    })
}

/// One result per `phi`; each point draws from its own seed stream.
pub fn run_two_qubit_sweep(device: &DeviceModel, phis: &[f64], settings: &RunSettings) -> Result<Vec<ExperimentResult>> {
    let seeds = SeedStream::new(settings.seed);
    phis.par_iter()
        .enumerate()
        .map(|(k, &phi)| run_two_qubit_point(device, phi, settings, &seeds.derive(&format!("phi{k}"))))
        .collect()
}

// ---------------------------------------------------------------------------
// Depolarizing accuracy model
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DepolarizingAnalysis {
    pub f2: f64,
    pub fm: f64,
    pub phi: f64,
    /// Full-mixing probability of the two-qubit gate, `16 (1 - F2) / 15`.
    pub eps2: f64,
    /// Random-outcome probability of the measurement, `2 (1 - FM)`.
    pub eps_m: f64,
    pub ideal: f64,
    /// First-order deviation `ideal (eps2 + eps_m)`.
    pub delta: f64,
}

fn check_fidelity(name: &str, f: f64) -> Result<()> {
    if !(f > 0.5 && f <= 1.0) {
        return Err(Error::validation(format!("{name} = {f} is outside (0.5, 1]")));
    }
    Ok(())
}

pub fn depolarizing_analysis(f2: f64, fm: f64, phi: f64) -> Result<DepolarizingAnalysis> {
    check_fidelity("F2", f2)?;
    check_fidelity("FM", fm)?;
    let ideal = dqcp_ideal(phi)?;
    let eps2 = 16.0 * (1.0 - f2) / 15.0;
    let eps_m = 2.0 * (1.0 - fm);
    Ok(DepolarizingAnalysis { f2, fm, phi, eps2, eps_m, ideal, delta: ideal * (eps2 + eps_m) })
}

/// Common fidelity `F = F2 = FM` at which the deviation equals `target_delta`.
pub fn required_fidelity(target_delta: f64, phi: f64) -> Result<f64> {
    let ideal = dqcp_ideal(phi)?;
    if !(target_delta >= 0.0) {
        return Err(Error::validation(format!("target deviation {target_delta} must be non-negative")));
    }
    if ideal.abs() < 1e-12 {
        return Err(Error::Infeasible(format!("the ideal value vanishes at phi = {phi}")));
    }
    // delta = ideal (16/15 + 2) (1 - F)
    let f = 1.0 - target_delta / (ideal.abs() * (16.0 / 15.0 + 2.0));
    check_fidelity("required fidelity", f).map_err(|_| {
        Error::Infeasible(format!("no fidelity in (0.5, 1] gives deviation {target_delta}"))
    })?;
    Ok(f)
}

// ---------------------------------------------------------------------------
// Output documents
// ---------------------------------------------------------------------------

/// Hex SHA-256 of the JSON form of `value`.
pub fn config_hash(value: &impl Serialize) -> String {
    let bytes = serde_json::to_vec(value).expect("serializable");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metadata {
    pub seed: u64,
    pub config_hash: String,
    pub version: String,
}

impl Metadata {
    pub fn new(seed: u64, config: &impl Serialize) -> Self {
        Metadata { seed, config_hash: config_hash(config), version: env!("CARGO_PKG_VERSION").to_string() }
    }
}

/// Column names of the delimited result table.
pub const DELIMITED_COLUMNS: [&str; 8] = ["phi", "ideal", "raw_mean", "raw_sd", "qem_mean", "qem_sd", "cost", "n_samples"];

/// Comma-separated table with a header row; `phi` is empty for the one-qubit experiment.
pub fn to_delimited(results: &[ExperimentResult]) -> String {
    let mut out = DELIMITED_COLUMNS.join(",");
    out.push('\n');
    for r in results {
        let phi = r.phi.map(|p| p.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{phi},{},{},{},{},{},{},{}\n",
            r.ideal, r.raw.grand_mean, r.raw.sd, r.qem.grand_mean, r.qem.sd, r.cost, r.n_samples
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::ReadoutConfusion;

    #[test]
    fn ideal_values() {
        assert!(one_qubit_ideal().unwrap().abs() < 1e-12);
        for phi in [0.0, PI / 4.0, PI / 2.0, PI] {
            assert!((dqcp_ideal(phi).unwrap() - (phi / 2.0).cos().powi(2)).abs() < 1e-12);
        }
        assert!((dqcp_ideal(PI / 2.0).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn depolarizing_examples() {
        let a = depolarizing_analysis(1.0, 1.0, PI / 2.0).unwrap();
        assert_eq!(a.delta, 0.0);
        let a = depolarizing_analysis(0.993, 0.993, PI / 2.0).unwrap();
        assert!((a.delta - 0.5 * (16.0 * 0.007 / 15.0 + 0.014)).abs() < 1e-12);
        let f = required_fidelity(0.0102, PI / 2.0).unwrap();
        assert!((f - 0.993).abs() < 1e-3, "{f}");
        assert!(depolarizing_analysis(0.4, 0.9, 0.0).is_err());
        assert!(required_fidelity(0.1, PI).is_err());
        assert!(required_fidelity(10.0, 0.0).is_err());
    }

    #[test]
    fn one_qubit_quick_run() {
        let dev = DeviceModel::ideal(1).with_readout(ReadoutConfusion { e0: 0.035, e1: 0.057 });
        let s = RunSettings::new(300, 20, 3);
        let r = run_one_qubit(&dev, &s).unwrap();
        assert_eq!(r.raw.values.len(), 20);
        assert!((r.raw.grand_mean - 0.022).abs() < 4.0 * r.raw.se);
        assert!(r.qem.grand_mean.abs() < 4.0 * r.qem.se);
        assert_eq!(r, run_one_qubit(&dev, &s).unwrap());
        let table = to_delimited(&[r]);
        assert!(table.starts_with("phi,ideal,raw_mean"));
    }

    #[test]
    fn mitigated_dqcp_is_exactly_unbiased() {
        let dev = DeviceModel::paper_preset(2);
        for phi in [PI / 2.0, PI] {
            let plan = dqcp_plan(&dev, phi, &QemOptions::default(), &SeedStream::new(0)).unwrap();
            let exact = plan.compile(&dev).unwrap().exact_expectation(&plan).unwrap();
            assert!((exact - dqcp_ideal(phi).unwrap()).abs() < 1e-9, "{phi}: {exact}");
            assert!((dqcp_reference(&dev, phi).unwrap() - dqcp_ideal(phi).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn hash_is_stable() {
        let s = RunSettings::new(1, 1, 1);
        assert_eq!(config_hash(&s), config_hash(&s));
        assert_ne!(config_hash(&s), config_hash(&RunSettings::new(1, 1, 2)));
        assert_eq!(config_hash(&s).len(), 64);
    }
}
