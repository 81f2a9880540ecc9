//! The simulated noisy device and its configuration file.
//!
//! Every ideal operation is mapped to a noisy counterpart by composing its
//! ideal PTM with a channel. Noise on different qubits is independent; the
//! only correlated channel is the one attached to the controlled-phase gate.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gates::{
    embed_gate, pauli_gate_ptm, GateSpec, Instrument, MeasureResetSpec, Prep, ResetTarget, Step,
};
use crate::gst::process_fidelity;
use crate::noise::{
    depolarizing_epsilon_for_fidelity, noisy_pauli_effect, state_channel, NoiseSpec, ReadoutConfusion,
};
use crate::pauli::{Pauli, PauliString};
use crate::ptm::{PtmMap, PtmObservable, PtmState};

/// Name of the preset modelled on the reported hardware numbers.
pub const PAPER_PRESET: &str = "paper-device";
pub const IDEAL_PRESET: &str = "ideal";

/// Readout error rates of the preset (ground, excited).
pub const PAPER_READOUT: (f64, f64) = (0.035, 0.057);
/// Process fidelity of `C_phi` for `phi = pi/4, pi/2, 3pi/4, pi`.
pub const PAPER_CPHASE_FIDELITIES: [(f64, f64); 4] =
    [(PI / 4.0, 0.958), (PI / 2.0, 0.935), (3.0 * PI / 4.0, 0.920), (PI, 0.915)];
/// Target fidelity of the measurement-reset operations.
pub const PAPER_INSTRUMENT_FIDELITY: f64 = 0.916;

/// How the controlled-phase gate is corrupted.
#[derive(Debug, Clone, PartialEq)]
pub enum CphaseNoise {
    Channel(NoiseSpec),
    /// Two-qubit depolarizing noise matched to a process fidelity that is
    /// interpolated linearly in `phi` between table points and clamped outside.
    FidelityTable(Vec<(f64, f64)>),
}

impl CphaseNoise {
    fn channel(&self, phi: f64) -> Result<PtmMap> {
        match self {
            CphaseNoise::Channel(spec) => state_channel(spec, 2),
            CphaseNoise::FidelityTable(table) => {
                let f = interpolate(table, phi);
                state_channel(&NoiseSpec::Depolarizing2Q(depolarizing_epsilon_for_fidelity(f, 2)), 2)
            }
        }
    }
}

fn interpolate(table: &[(f64, f64)], x: f64) -> f64 {
    let (first, last) = (table[0], table[table.len() - 1]);
    if x <= first.0 {
        return first.1;
    }
    if x >= last.0 {
        return last.1;
    }
    for w in table.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if x <= x1 {
            return y0 + (y1 - y0) * (x - x0) / (x1 - x0);
        }
    }
    last.1
}

/// Per-qubit noise description.
#[derive(Debug, Clone, PartialEq)]
struct QubitNoise {
    prep: PtmMap,
    readout: ReadoutConfusion,
    single_qubit: PtmMap,
    instrument: PtmMap,
}

impl QubitNoise {
    fn ideal() -> Self {
        QubitNoise {
            prep: PtmMap::identity(1),
            readout: ReadoutConfusion::IDEAL,
            single_qubit: PtmMap::identity(1),
            instrument: PtmMap::identity(1),
        }
    }
}

/// A simulated noisy device with one or two qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceModel {
    n_qubits: usize,
    qubits: Vec<QubitNoise>,
    cphase: CphaseNoise,
}

impl DeviceModel {
    pub fn ideal(n_qubits: usize) -> Self {
        assert!((1..=2).contains(&n_qubits), "devices have one or two qubits");
        DeviceModel {
            n_qubits,
            qubits: vec![QubitNoise::ideal(); n_qubits],
            cphase: CphaseNoise::Channel(NoiseSpec::None),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// The one-qubit device seen by characterizing `qubit` on its own.
    pub fn single_qubit_view(&self, qubit: usize) -> Result<DeviceModel> {
        self.check_qubit(qubit)?;
        Ok(DeviceModel { n_qubits: 1, qubits: vec![self.qubits[qubit].clone()], cphase: CphaseNoise::Channel(NoiseSpec::None) })
    }

    fn check_qubit(&self, qubit: usize) -> Result<()> {
        if qubit >= self.n_qubits {
            return Err(Error::validation(format!("qubit {qubit} out of range for {}-qubit device", self.n_qubits)));
        }
        Ok(())
    }

    pub fn with_readout(mut self, readout: ReadoutConfusion) -> Self {
        self.qubits.iter_mut().for_each(|q| q.readout = readout);
        self
    }

    pub fn with_readout_on(mut self, qubit: usize, readout: ReadoutConfusion) -> Result<Self> {
        self.check_qubit(qubit)?;
        self.qubits[qubit].readout = readout;
        Ok(self)
    }

    pub fn with_prep_noise(mut self, spec: &NoiseSpec) -> Result<Self> {
        let m = state_channel(spec, 1)?;
        self.qubits.iter_mut().for_each(|q| q.prep = m.clone());
        Ok(self)
    }

    pub fn with_single_qubit_noise(mut self, spec: &NoiseSpec) -> Result<Self> {
        let m = state_channel(spec, 1)?;
        self.qubits.iter_mut().for_each(|q| q.single_qubit = m.clone());
        Ok(self)
    }

    pub fn with_single_qubit_noise_on(mut self, qubit: usize, spec: &NoiseSpec) -> Result<Self> {
        self.check_qubit(qubit)?;
        self.qubits[qubit].single_qubit = state_channel(spec, 1)?;
        Ok(self)
    }

    pub fn with_instrument_noise(mut self, spec: &NoiseSpec) -> Result<Self> {
        let m = state_channel(spec, 1)?;
        self.qubits.iter_mut().for_each(|q| q.instrument = m.clone());
        Ok(self)
    }

    pub fn with_instrument_noise_on(mut self, qubit: usize, spec: &NoiseSpec) -> Result<Self> {
        self.check_qubit(qubit)?;
        self.qubits[qubit].instrument = state_channel(spec, 1)?;
        Ok(self)
    }

    pub fn with_cphase_noise(mut self, noise: CphaseNoise) -> Result<Self> {
        if let CphaseNoise::FidelityTable(t) = &noise {
            if t.is_empty() || t.iter().any(|&(_, f)| !(0.0..=1.0).contains(&f)) {
                return Err(Error::validation("fidelity table must be non-empty with entries in [0, 1]"));
            }
        }
        noise.channel(0.0)?;
        self.cphase = noise;
        Ok(self)
    }

    /// The preset modelled on the reported hardware: readout error 3.5% / 5.7%,
    /// depolarizing `C_phi` matched to the reported fidelities, depolarized
    /// measurement-reset operations near fidelity 0.916, ideal preparations and
    /// single-qubit gates.
    pub fn paper_preset(n_qubits: usize) -> Self {
        let readout = ReadoutConfusion { e0: PAPER_READOUT.0, e1: PAPER_READOUT.1 };
        let base = DeviceModel::ideal(n_qubits)
            .with_readout(readout)
            .with_cphase_noise(CphaseNoise::FidelityTable(PAPER_CPHASE_FIDELITIES.to_vec()))
            .expect("preset table is valid");
        let eps = calibrate_instrument_depolarizing(readout, PAPER_INSTRUMENT_FIDELITY);
        base.with_instrument_noise(&NoiseSpec::Depolarizing1Q(eps))
            .expect("calibrated epsilon is a probability")
    }

    /// Noisy preparation of `prep` on one qubit.
    pub fn prep_state(&self, prep: Prep, qubit: usize) -> Result<PtmState> {
        self.check_qubit(qubit)?;
        self.qubits[qubit].prep.apply(&prep.ptm_state())
    }

    /// Noisy product preparation on the whole register.
    pub fn prep_register(&self, preps: &[Prep]) -> Result<PtmState> {
        if preps.len() != self.n_qubits {
            return Err(Error::DimensionMismatch { expected: self.n_qubits, actual: preps.len() });
        }
        let mut states = preps.iter().enumerate().map(|(q, &p)| self.prep_state(p, q));
        let first = states.next().expect("at least one qubit")?;
        states.try_fold(first, |acc, s| Ok(acc.tensor(&s?)))
    }

    pub fn readout(&self, qubit: usize) -> ReadoutConfusion {
        self.qubits[qubit].readout
    }

    /// Noisy effect row for measuring `string` on the register (identity letters are not measured).
    pub fn noisy_effect(&self, string: &PauliString) -> Result<PtmObservable> {
        if string.n_qubits() != self.n_qubits {
            return Err(Error::DimensionMismatch { expected: self.n_qubits, actual: string.n_qubits() });
        }
        let readout: Vec<_> = self.qubits.iter().map(|q| q.readout).collect();
        noisy_pauli_effect(string, &readout)
    }

    /// Noisy single-qubit measurement effect (a row of the one-qubit readout matrix).
    pub fn noisy_effect_1q(&self, letter: Pauli, qubit: usize) -> Result<PtmObservable> {
        self.check_qubit(qubit)?;
        Ok(self.qubits[qubit].readout.noisy_effect(letter))
    }

    fn noisy_single(&self, ideal: &PtmMap, qubit: usize) -> Result<PtmMap> {
        self.qubits[qubit].single_qubit.compose(ideal)
    }

    /// Noisy PTM of `gate` acting on `qubits`, embedded in a `register`-qubit space.
    pub fn noisy_gate_on(&self, gate: &GateSpec, qubits: &[usize], register: usize) -> Result<PtmMap> {
        if qubits.len() != gate.n_qubits() || qubits.iter().any(|&q| q >= register || q >= self.n_qubits) {
            return Err(Error::validation(format!("gate {gate} cannot act on qubits {qubits:?}")));
        }
        match gate {
            GateSpec::Identity { .. } => Ok(PtmMap::identity(register)),
            GateSpec::Rotation { .. } => embed_gate(&self.noisy_single(&gate.ptm(), qubits[0])?, qubits, register),
            GateSpec::PauliGate(p) => {
                let mut acc = PtmMap::identity(register);
                for (&letter, &q) in p.letters().iter().zip(qubits) {
                    if letter == Pauli::I {
                        continue;
                    }
                    let single = pauli_gate_ptm(&PauliString::new(vec![letter])?);
                    acc = self.noisy_single(&single, q)?.embed(register, q)?.compose(&acc)?;
                }
                Ok(acc)
            }
            GateSpec::ControlledPhase { phi } => {
                if qubits != [0, 1] || register != 2 {
                    return Err(Error::validation("controlled-phase gates act on qubits [0, 1] of a two-qubit register"));
                }
                self.cphase.channel(*phi)?.compose(&gate.ptm())
            }
        }
    }

    /// Noisy PTM of a gate acting on the leading qubits of the device.
    pub fn noisy_gate(&self, gate: &GateSpec) -> Result<PtmMap> {
        let qubits: Vec<usize> = (0..gate.n_qubits()).collect();
        self.noisy_gate_on(gate, &qubits, gate.n_qubits())
    }

    /// Noisy measurement-reset instrument on `qubit`, embedded in a `register`-qubit space.
    ///
    /// The mid-circuit readout shares the qubit's confusion rates; the
    /// qubit's instrument channel acts after the reset.
    pub fn noisy_instrument_on(&self, spec: &MeasureResetSpec, qubit: usize, register: usize) -> Result<Instrument> {
        self.check_qubit(qubit)?;
        let noise = &self.qubits[qubit];
        let ideal = spec.instrument();
        let minus = &ideal.branches[0].1;
        let plus = &ideal.branches[1].1;
        let ReadoutConfusion { e0, e1 } = noise.readout;
        let reported_one = plus.scaled(1.0 - e0).add(&minus.scaled(e1))?;
        let reported_zero = plus.scaled(e0).add(&minus.scaled(1.0 - e1))?;
        let branches = [(0.0, reported_zero), (1.0, reported_one)]
            .into_iter()
            .map(|(v, b)| Ok((v, noise.instrument.compose(&b)?.embed(register, qubit)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Instrument { branches })
    }

    pub fn noisy_instrument(&self, spec: &MeasureResetSpec, qubit: usize) -> Result<Instrument> {
        self.noisy_instrument_on(spec, qubit, 1)
    }

    /// Compile an ideal recipe into noisy executable steps on a `register`-qubit space.
    pub fn compile_steps(&self, steps: &[Step], register: usize) -> Result<Vec<NoisyStep>> {
        steps
            .iter()
            .map(|step| match step {
                Step::Gate { gate, qubits } => Ok(NoisyStep::Map(self.noisy_gate_on(gate, qubits, register)?)),
                Step::MeasureReset { spec, qubit } => {
                    Ok(NoisyStep::Instrument(self.noisy_instrument_on(spec, *qubit, register)?))
                }
                Step::TwirledGate { gate, pairs } => {
                    let qubits: Vec<usize> = (0..gate.n_qubits()).collect();
                    let core = self.noisy_gate_on(gate, &qubits, register)?;
                    let mut probs = Vec::with_capacity(pairs.len());
                    let mut maps = Vec::with_capacity(pairs.len());
                    for pair in pairs {
                        let input = self.noisy_gate_on(&GateSpec::PauliGate(pair.input.clone()), &qubits, register)?;
                        let recovery =
                            self.noisy_gate_on(&GateSpec::PauliGate(pair.recovery.clone()), &qubits, register)?;
                        probs.push(pair.probability);
                        maps.push(recovery.compose(&core.compose(&input)?)?);
                    }
                    Ok(NoisyStep::Mixture { probs, maps })
                }
            })
            .collect()
    }
}

/// An executable noisy operation on the full register.
#[derive(Debug, Clone, PartialEq)]
pub enum NoisyStep {
    Map(PtmMap),
    Instrument(Instrument),
    /// One map drawn per shot with the given probabilities (Pauli twirling).
    Mixture { probs: Vec<f64>, maps: Vec<PtmMap> },
}

impl NoisyStep {
    /// Outcome-weighted average map, as seen by an infinite-shot estimator.
    pub fn effective_map(&self) -> PtmMap {
        match self {
            NoisyStep::Map(m) => m.clone(),
            NoisyStep::Instrument(inst) => inst.effective_map(),
            NoisyStep::Mixture { probs, maps } => {
                let n = maps[0].n_qubits();
                probs
                    .iter()
                    .zip(maps)
                    .fold(PtmMap::zeros(n), |acc, (p, m)| acc.add(&m.scaled(*p)).expect("same size"))
            }
        }
    }
}

/// Depolarizing strength after the reset that brings the mean process fidelity
/// of the six basis measurement-reset operations to `target`.
pub fn calibrate_instrument_depolarizing(readout: ReadoutConfusion, target: f64) -> f64 {
    let specs: Vec<MeasureResetSpec> = [
        (Pauli::X, ResetTarget::plus()),
        (Pauli::X, ResetTarget::minus()),
        (Pauli::Y, ResetTarget::plus_i()),
        (Pauli::Y, ResetTarget::minus_i()),
        (Pauli::Z, ResetTarget::zero()),
        (Pauli::Z, ResetTarget::one()),
    ]
    .into_iter()
    .map(|(a, t)| MeasureResetSpec::new(a, t).expect("table entries"))
    .collect();
    let mean_fidelity = |eps: f64| {
        let dev = DeviceModel::ideal(1)
            .with_readout(readout)
            .with_instrument_noise(&NoiseSpec::Depolarizing1Q(eps))
            .expect("eps in range");
        specs
            .iter()
            .map(|s| {
                let noisy = dev.noisy_instrument(s, 0).expect("qubit 0").effective_map();
                let ideal = s.instrument().effective_map();
                process_fidelity(&noisy, &ideal).expect("non-zero trace")
            })
            .sum::<f64>()
            / specs.len() as f64
    };
    if mean_fidelity(0.0) <= target {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if mean_fidelity(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

// ---------------------------------------------------------------------------
// Configuration file
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    None,
    Depolarizing,
    Dephasing,
    AmplitudeDamping,
    Overrotation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub kind: NoiseKind,
    #[serde(default)]
    pub param: f64,
    /// Rotation axis for `overrotation`; defaults to `Z`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<Pauli>,
}

impl NoiseConfig {
    /// Resolve to a channel for a gate of the given arity.
    pub fn to_spec(&self, arity: usize) -> NoiseSpec {
        match self.kind {
            NoiseKind::None => NoiseSpec::None,
            NoiseKind::Depolarizing if arity == 2 => NoiseSpec::Depolarizing2Q(self.param),
            NoiseKind::Depolarizing => NoiseSpec::Depolarizing1Q(self.param),
            NoiseKind::Dephasing => NoiseSpec::Dephasing(self.param),
            NoiseKind::AmplitudeDamping => NoiseSpec::AmplitudeDamping(self.param),
            NoiseKind::Overrotation => NoiseSpec::CoherentOverrotation {
                axis: self.axis.unwrap_or(Pauli::Z),
                delta: self.param,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadoutConfig {
    pub e0: f64,
    pub e1: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateNoiseConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub single_qubit: Option<NoiseConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cphase: Option<NoiseConfig>,
}

/// Device description file (TOML). Explicit keys override the preset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_qubits: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub readout: Option<ReadoutConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate_noise: Option<GateNoiseConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instrument_noise: Option<NoiseConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn config_error(path: &str, message: impl Into<String>) -> Error {
    Error::Config { path: path.to_string(), message: message.into() }
}

impl DeviceConfig {
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            PAPER_PRESET | IDEAL_PRESET => Ok(DeviceConfig { preset: Some(name.to_string()), ..Default::default() }),
            other => Err(config_error("preset", format!("unknown preset `{other}`"))),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::new(text);
        let cfg: DeviceConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            config_error(&path, e.into_inner().message().trim().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_toml_str(&text)
    }

    /// Accept either a preset name or a path to a TOML file.
    pub fn load(reference: &str) -> Result<Self> {
        let path = Path::new(reference);
        if !path.exists() && matches!(reference, PAPER_PRESET | IDEAL_PRESET) {
            return Self::preset(reference);
        }
        Self::from_file(path)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(n) = self.n_qubits {
            if !(1..=2).contains(&n) {
                return Err(config_error("n_qubits", format!("{n} qubits requested, devices have 1 or 2")));
            }
        }
        if let Some(p) = &self.preset {
            Self::preset(p)?;
        }
        if let Some(r) = &self.readout {
            ReadoutConfusion::new(r.e0, r.e1).map_err(|e| config_error("readout", e.to_string()))?;
        }
        let checks = [
            ("gate_noise.single_qubit", self.gate_noise.as_ref().and_then(|g| g.single_qubit.as_ref()), 1),
            ("gate_noise.cphase", self.gate_noise.as_ref().and_then(|g| g.cphase.as_ref()), 2),
            ("instrument_noise", self.instrument_noise.as_ref(), 1),
        ];
        for (path, cfg, arity) in checks {
            if let Some(cfg) = cfg {
                if cfg.axis == Some(Pauli::I) {
                    return Err(config_error(&format!("{path}.axis"), "axis must be X, Y or Z"));
                }
                state_channel(&cfg.to_spec(arity), arity).map_err(|e| config_error(&format!("{path}.param"), e.to_string()))?;
            }
        }
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits.unwrap_or(2)
    }

    /// Build the device on `n_qubits` qubits.
    pub fn build(&self, n_qubits: usize) -> Result<DeviceModel> {
        self.validate()?;
        if !(1..=2).contains(&n_qubits) {
            return Err(config_error("n_qubits", "devices have 1 or 2 qubits"));
        }
        let mut dev = match self.preset.as_deref() {
            Some(PAPER_PRESET) => DeviceModel::paper_preset(n_qubits),
            _ => DeviceModel::ideal(n_qubits),
        };
        if let Some(r) = &self.readout {
            dev = dev.with_readout(ReadoutConfusion::new(r.e0, r.e1)?);
        }
        if let Some(g) = &self.gate_noise {
            if let Some(c) = &g.single_qubit {
                dev = dev.with_single_qubit_noise(&c.to_spec(1))?;
            }
            if let Some(c) = &g.cphase {
                dev = dev.with_cphase_noise(CphaseNoise::Channel(c.to_spec(2)))?;
            }
        }
        if let Some(c) = &self.instrument_noise {
            dev = dev.with_instrument_noise(&c.to_spec(1))?;
        }
        Ok(dev)
    }
}

/// Build a device from a parsed configuration on `n_qubits` qubits.
pub fn build_device(config: &DeviceConfig, n_qubits: usize) -> Result<DeviceModel> {
    config.build(n_qubits)
}
