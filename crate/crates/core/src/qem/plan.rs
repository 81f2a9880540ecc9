//! Weighted random-circuit sampling.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::circuit::{propagate_shot, sample_outcome, CircuitTemplate, SampledCircuit, Slot};
use crate::device::{DeviceModel, NoisyStep};
use crate::error::{Error, Result};
use crate::gates::EffectiveOp;
use crate::pauli::PauliString;
use crate::ptm::{PtmObservable, PtmState};
use crate::rng::SeedStream;

use super::decompose::QuasiDecomposition;

/// What a replaceable slot can be bound to.
#[derive(Debug, Clone, PartialEq)]
pub enum SlotChoice {
    Op(EffectiveOp),
    Measurement(PauliString),
}

/// Decomposition of one replaceable slot together with the executable choices.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotDecomposition {
    pub slot: String,
    pub choices: Vec<SlotChoice>,
    pub decomposition: QuasiDecomposition,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlotPlan {
    pub slot: String,
    pub labels: Vec<String>,
    pub q: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub cost: f64,
    #[serde(skip)]
    pub decomposition: QuasiDecomposition,
    #[serde(skip)]
    choices: Vec<SlotChoice>,
}

/// Template plus per-slot sampling distributions; `total_cost` is the weight magnitude `W`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplingPlan {
    #[serde(skip)]
    pub template: CircuitTemplate,
    pub slots: Vec<SlotPlan>,
    pub total_cost: f64,
}

/// Pair every replaceable slot of `template` with its decomposition.
pub fn build_plan(template: CircuitTemplate, decompositions: Vec<SlotDecomposition>) -> Result<SamplingPlan> {
    let ids = template.replaceable_ids();
    let mut slots = Vec::with_capacity(ids.len());
    for id in &ids {
        let mut found = decompositions.iter().filter(|d| &d.slot == id);
        let d = found.next().ok_or_else(|| Error::validation(format!("slot `{id}` has no decomposition")))?;
        if found.next().is_some() {
            return Err(Error::validation(format!("slot `{id}` has more than one decomposition")));
        }
        if d.choices.len() != d.decomposition.q.len() {
            return Err(Error::validation(format!(
                "slot `{id}`: {} choices for {} coefficients",
                d.choices.len(),
                d.decomposition.q.len()
            )));
        }
        let is_measurement = matches!(template.measurement, Slot::Replaceable(ref m) if m == id);
        let kinds_match = d.choices.iter().all(|c| match c {
            SlotChoice::Measurement(p) => is_measurement && p.n_qubits() == template.n_qubits,
            SlotChoice::Op(op) => !is_measurement && op.n_qubits() == template.n_qubits,
        });
        if !kinds_match {
            return Err(Error::validation(format!("slot `{id}`: choices do not fit the slot")));
        }
        if !(d.decomposition.cost > 0.0) {
            return Err(Error::validation(format!("slot `{id}`: decomposition is zero")));
        }
        slots.push(SlotPlan {
            slot: id.clone(),
            labels: d.decomposition.basis.clone(),
            q: d.decomposition.q.clone(),
            probabilities: d.decomposition.probabilities(),
            cost: d.decomposition.cost,
            decomposition: d.decomposition.clone(),
            choices: d.choices.clone(),
        });
    }
    if let Some(extra) = decompositions.iter().find(|d| !ids.contains(&d.slot)) {
        return Err(Error::validation(format!("template has no slot `{}`", extra.slot)));
    }
    let total_cost = slots.iter().map(|s| s.cost).product();
    Ok(SamplingPlan { template, slots, total_cost })
}

impl SamplingPlan {
    fn slot_index(&self, id: &str) -> usize {
        self.slots.iter().position(|s| s.slot == id).expect("slot checked at build time")
    }

    /// Bind slot `k` to its `choices[k]`-th option; the weight is `sgn(prod q) W`.
    pub fn bind(&self, picks: &[usize]) -> Result<SampledCircuit> {
        let t = &self.template;
        let mut sign = 1.0;
        for (s, &k) in self.slots.iter().zip(picks) {
            sign *= s.q[k].signum();
        }
        let ops = t
            .ops
            .iter()
            .map(|slot| match slot {
                Slot::Fixed(op) => Ok(op.clone()),
                Slot::Replaceable(id) => {
                    let i = self.slot_index(id);
                    match &self.slots[i].choices[picks[i]] {
                        SlotChoice::Op(op) => Ok(op.clone()),
                        SlotChoice::Measurement(_) => Err(Error::validation("measurement bound to an op slot")),
                    }
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let measurement = match &t.measurement {
            Slot::Fixed(m) => m.clone(),
            Slot::Replaceable(id) => {
                let i = self.slot_index(id);
                match &self.slots[i].choices[picks[i]] {
                    SlotChoice::Measurement(m) => m.clone(),
                    SlotChoice::Op(_) => return Err(Error::validation("op bound to the measurement slot")),
                }
            }
        };
        SampledCircuit::new(t.n_qubits, t.prep.clone(), ops, measurement, sign * self.total_cost)
    }

    /// Draw one circuit.
    pub fn sample(&self, rng: &mut impl Rng) -> Result<SampledCircuit> {
        let picks = self
            .slots
            .iter()
            .map(|s| Ok(WeightedIndex::new(&s.probabilities).map_err(|e| Error::Numerical(e.to_string()))?.sample(rng)))
            .collect::<Result<Vec<_>>>()?;
        self.bind(&picks)
    }

    /// Lower every option once so that shots only propagate states.
    pub fn compile(&self, device: &DeviceModel) -> Result<CompiledPlan> {
        let t = &self.template;
        if device.n_qubits() != t.n_qubits {
            return Err(Error::DimensionMismatch { expected: device.n_qubits(), actual: t.n_qubits });
        }
        let mut segments = Vec::with_capacity(t.ops.len());
        for slot in &t.ops {
            segments.push(match slot {
                Slot::Fixed(op) => Segment::Fixed(device.compile_steps(&op.realization, t.n_qubits)?),
                Slot::Replaceable(id) => {
                    let i = self.slot_index(id);
                    let options = self.slots[i]
                        .choices
                        .iter()
                        .map(|c| match c {
                            SlotChoice::Op(op) => device.compile_steps(&op.realization, t.n_qubits),
                            SlotChoice::Measurement(_) => Err(Error::validation("measurement bound to an op slot")),
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Segment::Sampled { slot: i, options }
                }
            });
        }
        let effects = match &t.measurement {
            Slot::Fixed(m) => Effects { rows: vec![device.noisy_effect(m)?], slot: None },
            Slot::Replaceable(id) => {
                let i = self.slot_index(id);
                let rows = self.slots[i]
                    .choices
                    .iter()
                    .map(|c| match c {
                        SlotChoice::Measurement(m) => device.noisy_effect(m),
                        SlotChoice::Op(_) => Err(Error::validation("op bound to the measurement slot")),
                    })
                    .collect::<Result<Vec<_>>>()?;
                Effects { rows, slot: Some(i) }
            }
        };
        let samplers = self
            .slots
            .iter()
            .map(|s| WeightedIndex::new(&s.probabilities).map_err(|e| Error::Numerical(e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        Ok(CompiledPlan {
            initial: device.prep_register(&t.prep)?,
            segments,
            effects,
            samplers,
            signs: self.slots.iter().map(|s| s.q.iter().map(|x| x.signum()).collect()).collect(),
            total_cost: self.total_cost,
        })
    }
}

#[derive(Debug, Clone)]
enum Segment {
    Fixed(Vec<NoisyStep>),
    Sampled { slot: usize, options: Vec<Vec<NoisyStep>> },
}

#[derive(Debug, Clone)]
struct Effects {
    rows: Vec<PtmObservable>,
    slot: Option<usize>,
}

/// A plan lowered to noisy steps on a particular device.
#[derive(Debug, Clone)]
pub struct CompiledPlan {
    initial: PtmState,
    segments: Vec<Segment>,
    effects: Effects,
    samplers: Vec<WeightedIndex<f64>>,
    signs: Vec<Vec<f64>>,
    total_cost: f64,
}

/// Mean and standard error of a batch of weighted shots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub standard_error: f64,
    pub samples: u64,
}

impl Estimate {
    pub fn from_values(values: &[f64]) -> Estimate {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Estimate { mean, standard_error: (var / n).sqrt(), samples: values.len() as u64 }
    }
}

impl CompiledPlan {
    /// One random circuit, one shot: `w * outcome`.
    pub fn run_shot(&self, rng: &mut impl Rng) -> Result<f64> {
        let picks: Vec<usize> = self.samplers.iter().map(|s| s.sample(rng)).collect();
        let mut state = self.initial.clone();
        let mut value = 1.0;
        for seg in &self.segments {
            let steps = match seg {
                Segment::Fixed(steps) => steps,
                Segment::Sampled { slot, options } => &options[picks[*slot]],
            };
            let (s, v) = propagate_shot(state, steps, rng)?;
            state = s;
            value *= v;
            if value == 0.0 {
                return Ok(0.0);
            }
        }
        let effect = match self.effects.slot {
            Some(i) => &self.effects.rows[picks[i]],
            None => &self.effects.rows[0],
        };
        let sign: f64 = picks.iter().enumerate().map(|(i, &k)| self.signs[i][k]).product();
        Ok(sample_outcome(effect, &state, rng)? * value * sign * self.total_cost)
    }

    /// Weighted mean over `samples` random circuits.
    pub fn estimate(&self, samples: u64, rng: &mut impl Rng) -> Result<Estimate> {
        if samples == 0 {
            return Err(Error::validation("estimate needs at least one sample"));
        }
        let values = (0..samples).map(|_| self.run_shot(rng)).collect::<Result<Vec<_>>>()?;
        Ok(Estimate::from_values(&values))
    }

    /// `repetitions` independent estimates, each on its own stream; the
    /// result does not depend on the number of worker threads.
    pub fn estimate_repetitions(&self, samples: u64, repetitions: usize, seeds: &SeedStream) -> Result<Vec<Estimate>> {
        (0..repetitions)
            .into_par_iter()
            .map(|r| self.estimate(samples, &mut seeds.rng(r as u64)))
            .collect()
    }

    /// Exact mean of the estimator: `sum over all bindings of prod q * exact value`.
    pub fn exact_expectation(&self, plan: &SamplingPlan) -> Result<f64> {
        let mut states = vec![(self.initial.clone(), vec![], 1.0)];
        for seg in &self.segments {
            let mut next = Vec::new();
            for (s, picks, coeff) in states {
                match seg {
                    Segment::Fixed(steps) => next.push((apply_effective(steps, s)?, picks, coeff)),
                    Segment::Sampled { slot, options } => {
                        for (k, steps) in options.iter().enumerate() {
                            let q = plan.slots[*slot].q[k];
                            if q == 0.0 {
                                continue;
                            }
                            let mut p: Vec<(usize, usize)> = picks.clone();
                            p.push((*slot, k));
                            next.push((apply_effective(steps, s.clone())?, p, coeff * q));
                        }
                    }
                }
            }
            states = next;
        }
        let mut total = 0.0;
        for (s, _, coeff) in states {
            match self.effects.slot {
                Some(i) => {
                    for (k, row) in self.effects.rows.iter().enumerate() {
                        total += coeff * plan.slots[i].q[k] * row.dot(&s)?;
                    }
                }
                None => total += coeff * self.effects.rows[0].dot(&s)?,
            }
        }
        Ok(total)
    }
}

fn apply_effective(steps: &[NoisyStep], mut state: PtmState) -> Result<PtmState> {
    for step in steps {
        state = step.effective_map().apply(&state)?;
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates::{GateSpec, Prep};
    use crate::noise::ReadoutConfusion;
    use crate::pauli::Pauli;
    use crate::qem::decompose::decompose_observable;
    use std::f64::consts::PI;

    fn one_qubit_template() -> CircuitTemplate {
        CircuitTemplate {
            n_qubits: 1,
            prep: vec![Prep::Zero],
            ops: vec![Slot::Fixed(EffectiveOp::from_gates(0, vec![GateSpec::rotation(Pauli::X, PI / 2.0)]).unwrap())],
            measurement: Slot::Replaceable("measure".into()),
        }
    }

    fn readout_plan(r: ReadoutConfusion) -> SamplingPlan {
        let rows: Vec<_> = Pauli::ALL.iter().map(|&p| r.noisy_effect(p).entries().transpose()).collect();
        let b = nalgebra::DMatrix::from_rows(&rows);
        let labels: Vec<String> = Pauli::ALL.iter().map(|p| p.to_string()).collect();
        let z = PtmObservable::pauli(&PauliString::single(1, 0, Pauli::Z));
        let d = decompose_observable(&z, &b, &labels).unwrap();
        let choices = Pauli::ALL.iter().map(|&p| SlotChoice::Measurement(PauliString::single(1, 0, p))).collect();
        build_plan(one_qubit_template(), vec![SlotDecomposition { slot: "measure".into(), choices, decomposition: d }]).unwrap()
    }

    #[test]
    fn single_slot_plan_weights() {
        let r = ReadoutConfusion { e0: 0.0343, e1: 0.0526 };
        let plan = readout_plan(r);
        assert!((plan.total_cost - 1.11521).abs() < 5e-6);
        let p: f64 = plan.slots[0].probabilities.iter().sum();
        assert!((p - 1.0).abs() < 1e-12);
        let mut rng = SeedStream::new(1).rng(0);
        for _ in 0..50 {
            let c = plan.sample(&mut rng).unwrap();
            assert!((c.weight.abs() - plan.total_cost).abs() < 1e-12);
            // Only I and Z carry weight; I has a negative coefficient.
            let letter = c.measurement.letters()[0];
            assert!(matches!(letter, Pauli::I | Pauli::Z));
            assert_eq!(c.weight < 0.0, letter == Pauli::I);
        }
    }

    #[test]
    fn exact_mean_is_mitigated() {
        let r = ReadoutConfusion { e0: 0.035, e1: 0.057 };
        let dev = DeviceModel::ideal(1).with_readout(r);
        let plan = readout_plan(r);
        let compiled = plan.compile(&dev).unwrap();
        assert!(compiled.exact_expectation(&plan).unwrap().abs() < 1e-12);
        // Sum of q, the mean weight per unit outcome.
        let sum_q: f64 = plan.slots[0].q.iter().sum();
        let mean_weight: f64 = plan.slots[0]
            .probabilities
            .iter()
            .zip(&plan.slots[0].q)
            .map(|(p, q)| p * q.signum() * plan.total_cost)
            .sum();
        assert!((sum_q - mean_weight).abs() < 1e-12);
    }

    #[test]
    fn trivial_plan_is_the_original_circuit() {
        let z = PauliString::single(1, 0, Pauli::Z);
        let choices = vec![SlotChoice::Measurement(z.clone())];
        let plan = build_plan(
            one_qubit_template(),
            vec![SlotDecomposition { slot: "measure".into(), choices, decomposition: QuasiDecomposition::trivial("Z") }],
        )
        .unwrap();
        assert_eq!(plan.total_cost, 1.0);
        let c = plan.sample(&mut SeedStream::new(0).rng(0)).unwrap();
        assert_eq!(c.weight, 1.0);
        assert_eq!(c.measurement, z);
    }

    #[test]
    fn plan_mismatches_are_rejected() {
        let z = PauliString::single(1, 0, Pauli::Z);
        let d = |slot: &str| SlotDecomposition {
            slot: slot.into(),
            choices: vec![SlotChoice::Measurement(z.clone())],
            decomposition: QuasiDecomposition::trivial("Z"),
        };
        assert!(build_plan(one_qubit_template(), vec![]).is_err());
        assert!(build_plan(one_qubit_template(), vec![d("measure"), d("other")]).is_err());
        assert!(build_plan(one_qubit_template(), vec![d("measure"), d("measure")]).is_err());
        let wrong_kind = SlotDecomposition {
            slot: "measure".into(),
            choices: vec![SlotChoice::Op(EffectiveOp::from_gates(0, vec![GateSpec::Identity { n_qubits: 1 }]).unwrap())],
            decomposition: QuasiDecomposition::trivial("id"),
        };
        assert!(build_plan(one_qubit_template(), vec![wrong_kind]).is_err());
    }

    #[test]
    fn repetitions_are_deterministic() {
        let r = ReadoutConfusion { e0: 0.035, e1: 0.057 };
        let dev = DeviceModel::ideal(1).with_readout(r);
        let compiled = readout_plan(r).compile(&dev).unwrap();
        let seeds = SeedStream::new(9);
        let a = compiled.estimate_repetitions(200, 8, &seeds).unwrap();
        let b = compiled.estimate_repetitions(200, 8, &seeds).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0], a[1]);
    }
}
