//! Circuit templates, sampled circuits and their execution on a device.

use rand::Rng;

use crate::device::{DeviceModel, NoisyStep};
use crate::error::{Error, Result};
use crate::gates::{EffectiveOp, Prep};
use crate::pauli::PauliString;
use crate::ptm::{PtmObservable, PtmState};

/// Probability slack tolerated before a branch weight counts as negative.
pub const PROBABILITY_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum Slot<T> {
    Fixed(T),
    /// Placeholder bound later by a sampling plan.
    Replaceable(String),
}

/// Preparation, a sequence of operation slots and a final Pauli measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitTemplate {
    pub n_qubits: usize,
    pub prep: Vec<Prep>,
    pub ops: Vec<Slot<EffectiveOp>>,
    pub measurement: Slot<PauliString>,
}

impl CircuitTemplate {
    pub fn replaceable_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .ops
            .iter()
            .filter_map(|s| match s {
                Slot::Replaceable(id) => Some(id.clone()),
                Slot::Fixed(_) => None,
            })
            .collect();
        if let Slot::Replaceable(id) = &self.measurement {
            ids.push(id.clone());
        }
        ids
    }

    /// The circuit itself, when every slot is fixed.
    pub fn bind_fixed(&self) -> Result<SampledCircuit> {
        let ops = self
            .ops
            .iter()
            .map(|s| match s {
                Slot::Fixed(op) => Ok(op.clone()),
                Slot::Replaceable(id) => Err(Error::validation(format!("slot `{id}` is unbound"))),
            })
            .collect::<Result<Vec<_>>>()?;
        let measurement = match &self.measurement {
            Slot::Fixed(m) => m.clone(),
            Slot::Replaceable(id) => return Err(Error::validation(format!("slot `{id}` is unbound"))),
        };
        SampledCircuit::new(self.n_qubits, self.prep.clone(), ops, measurement, 1.0)
    }
}

/// A fully bound circuit with its sample weight.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledCircuit {
    pub n_qubits: usize,
    pub prep: Vec<Prep>,
    pub ops: Vec<EffectiveOp>,
    pub measurement: PauliString,
    pub weight: f64,
}

impl SampledCircuit {
    pub fn new(
        n_qubits: usize,
        prep: Vec<Prep>,
        ops: Vec<EffectiveOp>,
        measurement: PauliString,
        weight: f64,
    ) -> Result<Self> {
        if prep.len() != n_qubits || measurement.n_qubits() != n_qubits {
            return Err(Error::DimensionMismatch { expected: n_qubits, actual: prep.len() });
        }
        if let Some(op) = ops.iter().find(|o| o.n_qubits() != n_qubits) {
            return Err(Error::validation(format!("op `{}` does not act on the {n_qubits}-qubit register", op.label)));
        }
        if !weight.is_finite() || weight == 0.0 {
            return Err(Error::validation(format!("sample weight {weight} must be finite and non-zero")));
        }
        Ok(SampledCircuit { n_qubits, prep, ops, measurement, weight })
    }

    pub fn compile(&self, device: &DeviceModel) -> Result<CompiledCircuit> {
        if device.n_qubits() != self.n_qubits {
            return Err(Error::DimensionMismatch { expected: device.n_qubits(), actual: self.n_qubits });
        }
        let mut steps = Vec::new();
        for op in &self.ops {
            steps.extend(device.compile_steps(&op.realization, self.n_qubits)?);
        }
        Ok(CompiledCircuit {
            initial: device.prep_register(&self.prep)?,
            steps,
            effect: device.noisy_effect(&self.measurement)?,
            weight: self.weight,
        })
    }
}

/// A circuit lowered to noisy PTM steps.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledCircuit {
    pub initial: PtmState,
    pub steps: Vec<NoisyStep>,
    /// Expectation row of the reported `+-1` outcome (product over measured qubits).
    pub effect: PtmObservable,
    pub weight: f64,
}

fn pick(probs: impl Iterator<Item = f64> + Clone, total: f64, rng: &mut impl Rng) -> usize {
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (k, p) in probs.enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = k;
        if u < acc {
            return k;
        }
    }
    last
}

/// Run one shot of `steps` from a normalized `state`; returns the final state
/// and the product of mid-circuit outcome values.
pub fn propagate_shot(mut state: PtmState, steps: &[NoisyStep], rng: &mut impl Rng) -> Result<(PtmState, f64)> {
    let mut value = 1.0;
    for step in steps {
        state = match step {
            NoisyStep::Map(m) => m.apply(&state)?,
            NoisyStep::Mixture { probs, maps } => {
                let k = pick(probs.iter().copied(), probs.iter().sum(), rng);
                maps[k].apply(&state)?
            }
            NoisyStep::Instrument(inst) => {
                let outs = inst
                    .branches
                    .iter()
                    .map(|(v, b)| Ok((*v, b.apply(&state)?)))
                    .collect::<Result<Vec<_>>>()?;
                if let Some((_, s)) = outs.iter().find(|(_, s)| s.trace() < -PROBABILITY_SLACK) {
                    return Err(Error::Numerical(format!("negative branch probability {}", s.trace())));
                }
                let probs = outs.iter().map(|(_, s)| s.trace().max(0.0));
                let total: f64 = probs.clone().sum();
                if total <= 0.0 {
                    return Err(Error::Numerical("instrument has no branch with positive probability".into()));
                }
                let k = pick(probs, total, rng);
                let (v, s) = &outs[k];
                value *= v;
                let p = s.trace();
                PtmState::from_vector(s.n_qubits(), s.entries() / p)
            }
        };
    }
    Ok((state, value))
}

/// Draw the reported `+-1` outcome of measuring `effect` on a normalized state.
pub fn sample_outcome(effect: &PtmObservable, state: &PtmState, rng: &mut impl Rng) -> Result<f64> {
    let m = effect.dot(state)?;
    if m.abs() > 1.0 + PROBABILITY_SLACK {
        return Err(Error::Numerical(format!("outcome expectation {m} outside [-1, 1]")));
    }
    let p_plus = 0.5 * (1.0 + m.clamp(-1.0, 1.0));
    Ok(if rng.random::<f64>() < p_plus { 1.0 } else { -1.0 })
}

impl CompiledCircuit {
    /// One shot: final outcome x mid-circuit outcome values x weight.
    pub fn run_shot(&self, rng: &mut impl Rng) -> Result<f64> {
        let (state, value) = propagate_shot(self.initial.clone(), &self.steps, rng)?;
        if value == 0.0 {
            return Ok(0.0);
        }
        Ok(sample_outcome(&self.effect, &state, rng)? * value * self.weight)
    }

    /// Infinite-shot mean of `run_shot`.
    pub fn exact_value(&self) -> Result<f64> {
        let mut s = self.initial.clone();
        for step in &self.steps {
            s = step.effective_map().apply(&s)?;
        }
        Ok(self.weight * self.effect.dot(&s)?)
    }

    /// Exact distribution of shot values as `(value, probability)` pairs, sorted by value.
    pub fn outcome_distribution(&self) -> Result<Vec<(f64, f64)>> {
        // Leaves carry unnormalized states whose trace is their probability.
        let mut leaves = vec![(self.initial.clone(), 1.0)];
        for step in &self.steps {
            let mut next = Vec::with_capacity(leaves.len() * 2);
            for (s, v) in leaves {
                match step {
                    NoisyStep::Map(m) => next.push((m.apply(&s)?, v)),
                    NoisyStep::Mixture { probs, maps } => {
                        for (p, m) in probs.iter().zip(maps) {
                            let t = m.apply(&s)?;
                            next.push((PtmState::from_vector(t.n_qubits(), t.entries() * *p), v));
                        }
                    }
                    NoisyStep::Instrument(inst) => {
                        for (bv, b) in &inst.branches {
                            next.push((b.apply(&s)?, v * bv));
                        }
                    }
                }
            }
            leaves = next;
        }
        let mut dist: Vec<(f64, f64)> = Vec::new();
        let mut add = |value: f64, p: f64| {
            if let Some(e) = dist.iter_mut().find(|(v, _)| *v == value) {
                e.1 += p;
            } else {
                dist.push((value, p));
            }
        };
        for (s, v) in leaves {
            let tr = s.trace();
            if tr < -PROBABILITY_SLACK {
                return Err(Error::Numerical(format!("negative branch probability {tr}")));
            }
            let m = self.effect.dot(&s)?;
            let plus = 0.5 * (tr + m);
            let minus = 0.5 * (tr - m);
            if v == 0.0 {
                add(0.0, tr.max(0.0));
            } else {
                add(v * self.weight, plus.max(0.0));
                add(-v * self.weight, minus.max(0.0));
            }
        }
        dist.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(dist)
    }
}

/// Execute one shot of a bound circuit.
pub fn execute_shot(circuit: &SampledCircuit, device: &DeviceModel, rng: &mut impl Rng) -> Result<f64> {
    circuit.compile(device)?.run_shot(rng)
}

/// Exact (infinite-shot) expectation of a fully fixed template.
pub fn exact_expectation(template: &CircuitTemplate, device: &DeviceModel) -> Result<f64> {
    template.bind_fixed()?.compile(device)?.exact_value()
}
