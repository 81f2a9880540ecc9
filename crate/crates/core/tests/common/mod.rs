#![allow(dead_code)]

use rand::Rng;
use uqem::device::{CphaseNoise, DeviceModel};
use uqem::noise::{NoiseSpec, ReadoutConfusion};
use uqem::pauli::Pauli;

pub fn random_axis(rng: &mut impl Rng) -> Pauli {
    [Pauli::X, Pauli::Y, Pauli::Z][rng.random_range(0..3)]
}

/// A single-qubit channel of a random kind with small strength.
pub fn random_single_qubit_noise(rng: &mut impl Rng) -> NoiseSpec {
    match rng.random_range(0..5) {
        0 => NoiseSpec::None,
        1 => NoiseSpec::Depolarizing1Q(rng.random_range(0.0..0.08)),
        2 => NoiseSpec::Dephasing(rng.random_range(0.0..0.08)),
        3 => NoiseSpec::AmplitudeDamping(rng.random_range(0.0..0.08)),
        _ => NoiseSpec::CoherentOverrotation { axis: random_axis(rng), delta: rng.random_range(-0.2..0.2) },
    }
}

pub fn random_cphase_noise(rng: &mut impl Rng) -> NoiseSpec {
    match rng.random_range(0..4) {
        0 => NoiseSpec::Depolarizing2Q(rng.random_range(0.0..0.15)),
        1 => NoiseSpec::Dephasing(rng.random_range(0.0..0.08)),
        2 => NoiseSpec::Depolarizing1Q(rng.random_range(0.0..0.08)),
        _ => NoiseSpec::CoherentOverrotation { axis: random_axis(rng), delta: rng.random_range(-0.2..0.2) },
    }
}

pub fn random_readout(rng: &mut impl Rng) -> ReadoutConfusion {
    ReadoutConfusion::new(rng.random_range(0.0..0.1), rng.random_range(0.0..0.1)).unwrap()
}

/// Random noise on gates, instruments and readout; preparations stay ideal.
pub fn random_device(n_qubits: usize, rng: &mut impl Rng) -> DeviceModel {
    let mut dev = DeviceModel::ideal(n_qubits);
    for q in 0..n_qubits {
        dev = dev
            .with_readout_on(q, random_readout(rng))
            .unwrap()
            .with_single_qubit_noise_on(q, &random_single_qubit_noise(rng))
            .unwrap()
            .with_instrument_noise_on(q, &random_single_qubit_noise(rng))
            .unwrap();
    }
    if n_qubits == 2 {
        dev = dev.with_cphase_noise(CphaseNoise::Channel(random_cphase_noise(rng))).unwrap();
    }
    dev
}
