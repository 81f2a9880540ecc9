//! Pauli twirling of the controlled-phase gate.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gates::{pauli_gate_ptm, twirled_ptm, EffectiveOp, GateSpec, Step, TwirlPair};
use crate::pauli::{pauli_matrix, Pauli, PauliString};
use crate::ptm::PtmMap;

const PHASE_TOL: f64 = 1e-12;

/// `(sigma_c (x) sigma_d) C_phi (sigma_a (x) sigma_b) = eta C_phi`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PauliRecovery {
    pub input: (Pauli, Pauli),
    pub recovery: (Pauli, Pauli),
    /// `(re, im)` of the unit-modulus phase.
    pub eta: (f64, f64),
}

fn pair(a: Pauli, b: Pauli) -> PauliString {
    PauliString::new(vec![a, b]).expect("two letters")
}

/// The Pauli pair restoring `C_phi` after inserting `sigma_a (x) sigma_b` before it, if any.
pub fn pauli_recovery(phi: f64, a: Pauli, b: Pauli) -> Option<PauliRecovery> {
    let c = GateSpec::ControlledPhase { phi }.unitary();
    let conj = &c * pauli_matrix(&pair(a, b)) * c.adjoint();
    for ca in Pauli::ALL {
        for cb in Pauli::ALL {
            let p = pauli_matrix(&pair(ca, cb));
            let lambda: Complex64 = (p.adjoint() * &conj).trace() / Complex64::new(4.0, 0.0);
            if (lambda.norm() - 1.0).abs() < PHASE_TOL {
                // conj = lambda P, so P C (a b) = conj(lambda) C.
                let eta = lambda.conj();
                let check = &p * &c * pauli_matrix(&pair(a, b)) - &c * eta;
                if check.iter().all(|z| z.norm() < PHASE_TOL) {
                    return Some(PauliRecovery { input: (a, b), recovery: (ca, cb), eta: (eta.re, eta.im) });
                }
            }
        }
    }
    None
}

fn is_cz(phi: f64) -> bool {
    let r = phi.rem_euclid(2.0 * PI);
    (r - PI).abs() < 1e-12
}

/// Default twirl set: uniform over all 16 pairs for `C_pi`, otherwise uniform
/// over `{I, Z} (x) {I, Z}`.
pub fn default_twirl_pairs(phi: f64) -> Vec<TwirlPair> {
    let letters: &[Pauli] = if is_cz(phi) { &Pauli::ALL } else { &[Pauli::I, Pauli::Z] };
    let p = 1.0 / (letters.len() * letters.len()) as f64;
    let mut pairs = Vec::new();
    for &a in letters {
        for &b in letters {
            let r = pauli_recovery(phi, a, b).expect("listed pairs have recoveries");
            pairs.push(TwirlPair { probability: p, input: pair(a, b), recovery: pair(r.recovery.0, r.recovery.1) });
        }
    }
    pairs
}

/// Check that `pairs` is a distribution over pairs whose recoveries are correct for `C_phi`.
pub fn validate_twirl(phi: f64, pairs: &[TwirlPair]) -> Result<()> {
    let total: f64 = pairs.iter().map(|p| p.probability).sum();
    if (total - 1.0).abs() > 1e-9 || pairs.iter().any(|p| p.probability < 0.0) {
        return Err(Error::validation(format!("twirl probabilities sum to {total}, not 1")));
    }
    for p in pairs {
        let (l, r) = (p.input.letters(), p.recovery.letters());
        if l.len() != 2 || r.len() != 2 {
            return Err(Error::validation("twirl pairs act on two qubits"));
        }
        match pauli_recovery(phi, l[0], l[1]) {
            Some(rec) if rec.recovery == (r[0], r[1]) => {}
            Some(rec) => {
                return Err(Error::validation(format!(
                    "input {} needs recovery {}{}, got {}",
                    p.input, rec.recovery.0, rec.recovery.1, p.recovery
                )))
            }
            None if p.probability == 0.0 => {}
            None => return Err(Error::validation(format!("input {} has no Pauli recovery for phi = {phi}", p.input))),
        }
    }
    Ok(())
}

/// `U' = sum p_ab [sigma_c sigma_d] U [sigma_a sigma_b]` with ideal Pauli layers.
pub fn twirl_estimate(u_hat: &PtmMap, phi: f64, pairs: &[TwirlPair]) -> Result<PtmMap> {
    twirl_estimate_with_layers(u_hat, phi, pairs, pauli_gate_ptm)
}

/// As [`twirl_estimate`], with the Pauli layers supplied (e.g. their own estimates).
pub fn twirl_estimate_with_layers(
    u_hat: &PtmMap,
    phi: f64,
    pairs: &[TwirlPair],
    layer: impl Fn(&PauliString) -> PtmMap,
) -> Result<PtmMap> {
    if u_hat.n_qubits() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, actual: u_hat.n_qubits() });
    }
    validate_twirl(phi, pairs)?;
    twirled_ptm(u_hat, pairs, layer)
}

/// Executable twirled `C_phi`: one pair is drawn per shot.
pub fn twirled_cphase(phi: f64, pairs: Vec<TwirlPair>) -> Result<EffectiveOp> {
    validate_twirl(phi, &pairs)?;
    let gate = GateSpec::ControlledPhase { phi };
    Ok(EffectiveOp {
        number: 257,
        label: format!("twirled {gate}"),
        ptm: gate.ptm(),
        realization: vec![Step::TwirledGate { gate, pairs }],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{state_channel, NoiseSpec};

    #[test]
    fn recovery_examples() {
        let r = pauli_recovery(0.7, Pauli::Z, Pauli::Z).unwrap();
        assert_eq!(r.recovery, (Pauli::Z, Pauli::Z));
        assert_eq!(r.eta, (1.0, 0.0));
        let r = pauli_recovery(PI, Pauli::X, Pauli::I).unwrap();
        assert_eq!(r.recovery, (Pauli::X, Pauli::Z));
        assert!((r.eta.0 - 1.0).abs() < 1e-12 && r.eta.1.abs() < 1e-12);
        assert!(pauli_recovery(PI / 2.0, Pauli::X, Pauli::I).is_none());
    }

    #[test]
    fn recovery_counts() {
        let count = |phi: f64| {
            Pauli::ALL
                .iter()
                .flat_map(|&a| Pauli::ALL.iter().map(move |&b| (a, b)))
                .filter(|&(a, b)| pauli_recovery(phi, a, b).is_some())
                .count()
        };
        assert_eq!(count(PI), 16);
        for phi in [PI / 4.0, PI / 2.0, 3.0 * PI / 4.0, 1.0] {
            assert_eq!(count(phi), 4);
        }
    }

    #[test]
    fn twirl_fixes_ideal_and_depolarized_gates() {
        for phi in [PI / 2.0, PI] {
            let ideal = GateSpec::ControlledPhase { phi }.ptm();
            let t = twirl_estimate(&ideal, phi, &default_twirl_pairs(phi)).unwrap();
            assert!(t.max_abs_diff(&ideal) < 1e-12);
        }
        let cz = GateSpec::ControlledPhase { phi: PI }.ptm();
        let noisy = state_channel(&NoiseSpec::Depolarizing2Q(0.05), 2).unwrap().compose(&cz).unwrap();
        let t = twirl_estimate(&noisy, PI, &default_twirl_pairs(PI)).unwrap();
        assert!(t.max_abs_diff(&noisy) < 1e-12);
    }

    #[test]
    fn full_twirl_diagonalizes_overrotation() {
        let cz = GateSpec::ControlledPhase { phi: PI }.ptm();
        let over = state_channel(&NoiseSpec::CoherentOverrotation { axis: Pauli::X, delta: 0.2 }, 2).unwrap();
        let noisy = over.compose(&cz).unwrap();
        let t = twirl_estimate(&noisy, PI, &default_twirl_pairs(PI)).unwrap();
        // C_pi is its own inverse.
        let residual = t.compose(&cz).unwrap();
        let m = residual.matrix();
        let off = (0..16).flat_map(|i| (0..16).map(move |j| (i, j))).filter(|(i, j)| i != j);
        assert!(off.map(|(i, j)| m[(i, j)].abs()).fold(0.0, f64::max) < 1e-10);
    }

    #[test]
    fn invalid_distributions_are_rejected() {
        let u = GateSpec::ControlledPhase { phi: PI / 2.0 }.ptm();
        let bad = vec![TwirlPair { probability: 1.0, input: pair(Pauli::X, Pauli::I), recovery: pair(Pauli::X, Pauli::Z) }];
        assert!(twirl_estimate(&u, PI / 2.0, &bad).is_err());
        let mut short = default_twirl_pairs(PI / 2.0);
        short.pop();
        assert!(twirl_estimate(&u, PI / 2.0, &short).is_err());
        assert!(twirled_cphase(PI, default_twirl_pairs(PI)).is_ok());
    }
}
