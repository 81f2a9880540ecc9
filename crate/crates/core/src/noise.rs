//! Noise channels attached to device operations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gates::GateSpec;
use crate::pauli::{CMatrix, Pauli, PauliString};
use crate::ptm::{dim_for, ptm_of_kraus, PtmMap, PtmObservable};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NoiseSpec {
    None,
    /// Each qubit independently replaced by `I/2` with probability `epsilon`.
    Depolarizing1Q(f64),
    /// Two-qubit state replaced by `I/4` with probability `epsilon`.
    Depolarizing2Q(f64),
    /// Phase flip with probability `p` on each qubit.
    Dephasing(f64),
    AmplitudeDamping(f64),
    /// Extra rotation `P_delta` on each qubit.
    CoherentOverrotation { axis: Pauli, delta: f64 },
    /// Classical flip of reported outcomes: `e0` for a true `+1`, `e1` for a true `-1`.
    ReadoutConfusion { e0: f64, e1: f64 },
}

/// What a [`NoiseSpec`] turns into once built.
#[derive(Debug, Clone, PartialEq)]
pub enum Channel {
    State(PtmMap),
    Readout(ReadoutConfusion),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadoutConfusion {
    pub e0: f64,
    pub e1: f64,
}

impl ReadoutConfusion {
    pub const IDEAL: ReadoutConfusion = ReadoutConfusion { e0: 0.0, e1: 0.0 };

    pub fn new(e0: f64, e1: f64) -> Result<Self> {
        check_probability("readout e0", e0)?;
        check_probability("readout e1", e1)?;
        Ok(ReadoutConfusion { e0, e1 })
    }

    /// Noisy single-qubit effect for a Pauli measurement:
    /// `<<P^exp| = (e1 - e0) <<I| + (1 - e0 - e1) <<P|`. The identity row is exact.
    pub fn noisy_effect(&self, letter: Pauli) -> PtmObservable {
        let mut entries = vec![0.0; 4];
        if letter == Pauli::I {
            entries[0] = 1.0;
        } else {
            entries[0] = self.e1 - self.e0;
            entries[letter.index()] = 1.0 - self.e0 - self.e1;
        }
        PtmObservable::from_entries(1, entries).expect("four entries")
    }

    /// `(bias, contrast)` of the reported `+-1` outcome for a true outcome expectation `m`:
    /// reported expectation is `bias + contrast * m`.
    pub fn affine(&self) -> (f64, f64) {
        (self.e1 - self.e0, 1.0 - self.e0 - self.e1)
    }
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(Error::validation(format!("{name} = {p} is outside [0, 1]")));
    }
    Ok(())
}

fn cplx(x: f64) -> num_complex::Complex64 {
    num_complex::Complex64::new(x, 0.0)
}

fn per_qubit(single: PtmMap, n_qubits: usize) -> PtmMap {
    (1..n_qubits).fold(single.clone(), |acc, _| acc.tensor(&single))
}

fn depolarizing(epsilon: f64, n_qubits: usize) -> PtmMap {
    let dim = dim_for(n_qubits);
    let mut diag = vec![1.0 - epsilon; dim];
    diag[0] = 1.0;
    PtmMap::diagonal(n_qubits, &diag).expect("dimension matches")
}

/// Build the channel for `spec` acting on an `n_qubits` register.
pub fn build_channel(spec: &NoiseSpec, n_qubits: usize) -> Result<Channel> {
    let map = match *spec {
        NoiseSpec::None => PtmMap::identity(n_qubits),
        NoiseSpec::Depolarizing1Q(eps) => {
            check_probability("depolarizing epsilon", eps)?;
            per_qubit(depolarizing(eps, 1), n_qubits)
        }
        NoiseSpec::Depolarizing2Q(eps) => {
            check_probability("depolarizing epsilon", eps)?;
            if n_qubits != 2 {
                return Err(Error::validation("two-qubit depolarizing needs a two-qubit register"));
            }
            depolarizing(eps, 2)
        }
        NoiseSpec::Dephasing(p) => {
            check_probability("dephasing p", p)?;
            let k = [CMatrix::identity(2, 2) * cplx((1.0 - p).sqrt()), Pauli::Z.matrix() * cplx(p.sqrt())];
            per_qubit(ptm_of_kraus(&k)?, n_qubits)
        }
        NoiseSpec::AmplitudeDamping(gamma) => {
            check_probability("amplitude damping gamma", gamma)?;
            let mut k0 = CMatrix::identity(2, 2);
            k0[(1, 1)] = cplx((1.0 - gamma).sqrt());
            let mut k1 = CMatrix::zeros(2, 2);
            k1[(0, 1)] = cplx(gamma.sqrt());
            per_qubit(ptm_of_kraus(&[k0, k1])?, n_qubits)
        }
        NoiseSpec::CoherentOverrotation { axis, delta } => {
            if axis == Pauli::I || !delta.is_finite() {
                return Err(Error::validation("overrotation needs an X, Y or Z axis and a finite angle"));
            }
            per_qubit(GateSpec::rotation(axis, delta).ptm(), n_qubits)
        }
        NoiseSpec::ReadoutConfusion { e0, e1 } => {
            return Ok(Channel::Readout(ReadoutConfusion::new(e0, e1)?));
        }
    };
    Ok(Channel::State(map))
}

/// State channel for `spec`; readout confusion is rejected here.
pub fn state_channel(spec: &NoiseSpec, n_qubits: usize) -> Result<PtmMap> {
    match build_channel(spec, n_qubits)? {
        Channel::State(m) => Ok(m),
        Channel::Readout(_) => Err(Error::validation(
            "readout confusion acts on measurement effects, not on states",
        )),
    }
}

/// Full-mixing probability of an `n`-qubit depolarizing channel with process fidelity `f`:
/// `epsilon = d^2 (1 - f) / (d^2 - 1)`, i.e. `16 (1 - f) / 15` for two qubits.
pub fn depolarizing_epsilon_for_fidelity(fidelity: f64, n_qubits: usize) -> f64 {
    let d2 = dim_for(n_qubits) as f64;
    d2 * (1.0 - fidelity) / (d2 - 1.0)
}

/// Noisy effect row for measuring `string` with independent per-qubit confusion.
pub fn noisy_pauli_effect(string: &PauliString, readout: &[ReadoutConfusion]) -> Result<PtmObservable> {
    if readout.len() != string.n_qubits() {
        return Err(Error::DimensionMismatch { expected: string.n_qubits(), actual: readout.len() });
    }
    let mut rows = string.letters().iter().zip(readout).map(|(&l, r)| r.noisy_effect(l));
    let first = rows.next().expect("non-empty string");
    Ok(rows.fold(first, |acc, r| acc.tensor(&r)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_noise_is_identity() {
        assert_eq!(state_channel(&NoiseSpec::Depolarizing2Q(0.0), 2).unwrap(), PtmMap::identity(2));
        assert_eq!(state_channel(&NoiseSpec::None, 1).unwrap(), PtmMap::identity(1));
    }

    #[test]
    fn depolarizing_shapes() {
        let m = state_channel(&NoiseSpec::Depolarizing1Q(0.1), 1).unwrap();
        assert_eq!(m, PtmMap::diagonal(1, &[1.0, 0.9, 0.9, 0.9]).unwrap());
        let m = state_channel(&NoiseSpec::Depolarizing2Q(0.2), 2).unwrap();
        assert_eq!(m.matrix()[(0, 0)], 1.0);
        assert!((1..16).all(|i| (m.matrix()[(i, i)] - 0.8).abs() < 1e-15));
        assert!(state_channel(&NoiseSpec::Depolarizing2Q(0.2), 1).is_err());
        assert!(state_channel(&NoiseSpec::Depolarizing1Q(1.2), 1).is_err());
    }

    #[test]
    fn readout_confusion_effect() {
        let r = ReadoutConfusion::new(0.0343, 0.0526).unwrap();
        let z = r.noisy_effect(Pauli::Z);
        let expected = [0.0183, 0.0, 0.0, 0.9131];
        for (a, b) in z.entries().iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(r.noisy_effect(Pauli::I).entries().as_slice(), &[1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            state_channel(&NoiseSpec::ReadoutConfusion { e0: 0.1, e1: 0.1 }, 1),
            Err(Error::Validation(_))
        ));
        assert!(ReadoutConfusion::new(-0.1, 0.0).is_err());
    }

    #[test]
    fn fidelity_calibration() {
        let eps = depolarizing_epsilon_for_fidelity(0.993, 2);
        assert!((eps - 0.007466666666666667).abs() < 1e-12);
    }

    #[test]
    fn all_state_channels_are_cptp() {
        let specs = [
            NoiseSpec::Depolarizing1Q(0.3),
            NoiseSpec::Dephasing(0.2),
            NoiseSpec::AmplitudeDamping(0.4),
            NoiseSpec::CoherentOverrotation { axis: Pauli::Y, delta: 0.3 },
        ];
        for spec in &specs {
            for n in 1..=2 {
                let m = state_channel(spec, n).unwrap();
                assert!(m.is_trace_preserving(1e-12), "{spec:?}");
                assert!(m.is_completely_positive(1e-9), "{spec:?}");
            }
        }
        let m = state_channel(&NoiseSpec::Depolarizing2Q(0.5), 2).unwrap();
        assert!(m.is_completely_positive(1e-9));
    }

    proptest::proptest! {
        #[test]
        fn depolarizing_composes_multiplicatively(a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let ma = state_channel(&NoiseSpec::Depolarizing2Q(a), 2).unwrap();
            let mb = state_channel(&NoiseSpec::Depolarizing2Q(b), 2).unwrap();
            let combined = state_channel(&NoiseSpec::Depolarizing2Q(1.0 - (1.0 - a) * (1.0 - b)), 2).unwrap();
            proptest::prop_assert!(mb.compose(&ma).unwrap().max_abs_diff(&combined) < 1e-12);
        }
    }
}
