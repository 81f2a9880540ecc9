use std::f64::consts::PI;
use std::process::{Command, ExitCode};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use uqem::device::{CphaseNoise, DeviceModel};
use uqem::experiments::{
    default_phis, depolarizing_analysis, dqcp_plan, dqcp_reference, one_qubit_plan, required_fidelity,
    run_one_qubit, run_two_qubit_sweep, RunSettings,
};
use uqem::gates::{basis_operations_1q, preparation_matrix, EffectiveOp, GateSpec};
use uqem::gst::{checked_inverse, measure_gram, process_fidelity, Mode};
use uqem::noise::{NoiseSpec, ReadoutConfusion};
use uqem::pauli::{Pauli, PauliString};
use uqem::ptm::PtmMap;
use uqem::qem::{characterize_qubit, characterize_two_qubit, decompose_gate, default_twirl_pairs, twirl_estimate, QemOptions, RESIDUAL_TOL};
use uqem::rng::SeedStream;

const UNBIASED_TOL: f64 = 1e-9;
const UNBIASED_CONFIGS: usize = 50;
const SE_MULTIPLE: f64 = 3.0;
const ONE_QUBIT_BIAS: f64 = 0.057 - 0.035;
const MIN_IMPROVEMENT: f64 = 5.0;
const DELTA_EXPECTED: f64 = 0.01073;
const DELTA_TOL: f64 = 5e-4;
const FIDELITY_EXPECTED: f64 = 0.993;
const REQUIRED_F_TOL: f64 = 1e-3;
const TARGET_DELTA: f64 = 0.0102;
const GST_TOL: f64 = 1e-10;
const ORACLE_BASES: usize = 12;
const ORACLE_TOL: f64 = 1e-8;
const DIAGONAL_TOL: f64 = 1e-10;
const FIDELITY_TOL: f64 = 1e-9;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fail(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn axis(rng: &mut impl Rng) -> Pauli {
    [Pauli::X, Pauli::Y, Pauli::Z][rng.random_range(0..3)]
}

fn noise_1q(rng: &mut impl Rng) -> NoiseSpec {
    match rng.random_range(0..4) {
        0 => NoiseSpec::Depolarizing1Q(rng.random_range(0.0..0.08)),
        1 => NoiseSpec::Dephasing(rng.random_range(0.0..0.08)),
        2 => NoiseSpec::AmplitudeDamping(rng.random_range(0.0..0.08)),
        _ => NoiseSpec::CoherentOverrotation { axis: axis(rng), delta: rng.random_range(-0.2..0.2) },
    }
}

fn noise_2q(rng: &mut impl Rng) -> NoiseSpec {
    match rng.random_range(0..3) {
        0 => NoiseSpec::Depolarizing2Q(rng.random_range(0.0..0.15)),
        1 => NoiseSpec::Dephasing(rng.random_range(0.0..0.08)),
        _ => NoiseSpec::CoherentOverrotation { axis: axis(rng), delta: rng.random_range(-0.2..0.2) },
    }
}

fn readout(rng: &mut impl Rng) -> ReadoutConfusion {
    ReadoutConfusion::new(rng.random_range(0.0..0.1), rng.random_range(0.0..0.1)).unwrap()
}

fn true_ptm(dev: &DeviceModel, op: &EffectiveOp) -> DMatrix<f64> {
    let n = op.n_qubits();
    let d = 4usize.pow(n as u32);
    let mut acc = DMatrix::identity(d, d);
    for step in dev.compile_steps(&op.realization, n).unwrap() {
        acc = step.effective_map().matrix() * acc;
    }
    acc
}

fn exact_dqcp(dev: &DeviceModel, phi: f64, options: &QemOptions, seed: u64) -> Result<f64, String> {
    let plan = dqcp_plan(dev, phi, options, &SeedStream::new(seed)).map_err(fail)?;
    plan.compile(dev).map_err(fail)?.exact_expectation(&plan).map_err(fail)
}

fn unbiasedness() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for k in 0..UNBIASED_CONFIGS {
        let phi = rng.random_range(0.0..PI);
        let mut dev = DeviceModel::ideal(2)
            .with_cphase_noise(CphaseNoise::Channel(noise_2q(&mut rng)))
            .map_err(fail)?;
        for q in 0..2 {
            dev = dev
                .with_readout_on(q, readout(&mut rng))
                .and_then(|d| d.with_instrument_noise_on(q, &noise_1q(&mut rng)))
                .map_err(fail)?;
        }
        let ideal = (phi / 2.0).cos().powi(2);
        worst = worst.max((exact_dqcp(&dev, phi, &QemOptions::default(), k as u64)? - ideal).abs());

        // Noisy single-qubit gates: compare against the same circuit with an ideal C_phi and X.
        let noisy = (0..2).try_fold(dev, |d, q| d.with_single_qubit_noise_on(q, &noise_1q(&mut rng))).map_err(fail)?;
        let options = QemOptions { assume_ideal_single_qubit_gates: false, ..QemOptions::default() };
        let reference = dqcp_reference(&noisy, phi).map_err(fail)?;
        worst = worst.max((exact_dqcp(&noisy, phi, &options, k as u64)? - reference).abs());

        let one = DeviceModel::ideal(1).with_readout(readout(&mut rng));
        let plan = one_qubit_plan(&one, Mode::Exact, &SeedStream::new(k as u64)).map_err(fail)?;
        worst = worst.max(plan.compile(&one).map_err(fail)?.exact_expectation(&plan).map_err(fail)?.abs());
    }
    ensure(worst < UNBIASED_TOL, format!("{} configurations, max |error| = {worst:.2e} (tol {UNBIASED_TOL:e})", 3 * UNBIASED_CONFIGS))
}

fn one_qubit_experiment() -> Check {
    let dev = DeviceModel::ideal(1).with_readout(ReadoutConfusion { e0: 0.035, e1: 0.057 });
    let res = run_one_qubit(&dev, &RunSettings::new(3000, 100, 7)).map_err(fail)?;
    let (raw, qem) = (&res.raw, &res.qem);
    let raw_ok = (raw.grand_mean - ONE_QUBIT_BIAS).abs() <= SE_MULTIPLE * raw.se;
    let qem_ok = qem.grand_mean.abs() <= SE_MULTIPLE * qem.se;
    ensure(
        raw_ok && qem_ok,
        format!(
            "raw {:.4} +- {:.4} (expect {ONE_QUBIT_BIAS}), mitigated {:.4} +- {:.4} (expect 0)",
            raw.grand_mean, raw.se, qem.grand_mean, qem.se
        ),
    )
}

fn two_qubit_experiment() -> Check {
    let dev = DeviceModel::paper_preset(2);
    let res = run_two_qubit_sweep(&dev, &[PI / 2.0], &RunSettings::new(10_000, 100, 7)).map_err(fail)?;
    let r = &res[0];
    let raw_dev = (r.raw.grand_mean - 0.5).abs();
    let qem_dev = (r.qem.grand_mean - 0.5).abs();
    let ratio = raw_dev / qem_dev;
    ensure(
        ratio >= MIN_IMPROVEMENT && qem_dev <= SE_MULTIPLE * r.qem.se,
        format!(
            "raw deviation {raw_dev:.4}, mitigated deviation {qem_dev:.4} (s.e. {:.4}), ratio {ratio:.1}",
            r.qem.se
        ),
    )
}

fn depolarizing_model() -> Check {
    let a = depolarizing_analysis(FIDELITY_EXPECTED, FIDELITY_EXPECTED, PI / 2.0).map_err(fail)?;
    let f = required_fidelity(TARGET_DELTA, PI / 2.0).map_err(fail)?;
    ensure(
        (a.delta - DELTA_EXPECTED).abs() <= DELTA_TOL && (f - FIDELITY_EXPECTED).abs() <= REQUIRED_F_TOL,
        format!("delta {:.6}, required F for {TARGET_DELTA} is {f:.5}", a.delta),
    )
}

fn gst_round_trip() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst: f64 = 0.0;
    for k in 0..10 {
        let dev = DeviceModel::ideal(1)
            .with_readout(readout(&mut rng))
            .with_single_qubit_noise(&noise_1q(&mut rng))
            .and_then(|d| d.with_instrument_noise(&noise_1q(&mut rng)))
            .map_err(fail)?;
        let seeds = SeedStream::new(k);
        let est = characterize_qubit(&dev, Mode::Exact, &seeds).map_err(fail)?;
        for (op, (_, u)) in basis_operations_1q().iter().zip(&est.gates) {
            worst = worst.max((u.matrix() - true_ptm(&dev, op)).amax());
        }
        let gram = measure_gram(&dev, Mode::Exact, &seeds).map_err(fail)?;
        let b = gram.matrix() * checked_inverse(&preparation_matrix(1)).map_err(fail)?;
        worst = worst.max((&est.b_hat - b).amax());
        let effects: Vec<_> = PauliString::basis(1)
            .iter()
            .map(|p| dev.noisy_effect(p).unwrap().entries().transpose())
            .collect();
        worst = worst.max((&est.b_hat - DMatrix::from_rows(&effects)).amax());
    }
    let mut gram_exact = true;
    for n in [1, 2] {
        let g = measure_gram(&DeviceModel::ideal(n), Mode::Exact, &SeedStream::new(0)).map_err(fail)?;
        gram_exact &= g.matrix() == &preparation_matrix(n);
    }
    ensure(
        worst < GST_TOL && gram_exact,
        format!("max entry error {worst:.2e} (tol {GST_TOL:e}), ideal Gram equals A: {gram_exact}"),
    )
}

/// Minimum L1 over the basic solutions: every vertex of `{q : M q = t}` in
/// split form has at most `rows` nonzero entries.
fn vertex_oracle(m: &DMatrix<f64>, t: &DVector<f64>) -> f64 {
    let (rows, cols) = m.shape();
    let mut best = f64::INFINITY;
    let mut subset: Vec<usize> = (0..rows).collect();
    loop {
        let sub = DMatrix::from_columns(&subset.iter().map(|&c| m.column(c).into_owned()).collect::<Vec<_>>());
        let lu = sub.lu();
        if lu.determinant().abs() > 1e-12 {
            if let Some(q) = lu.solve(t) {
                best = best.min(q.iter().map(|x| x.abs()).sum());
            }
        }
        let mut i = rows;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if subset[i] < cols - rows + i {
                subset[i] += 1;
                for j in i + 1..rows {
                    subset[j] = subset[j - 1] + 1;
                }
                break;
            }
        }
    }
}

fn decomposition_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst_cost: f64 = 0.0;
    let mut worst_residual: f64 = 0.0;
    for k in 0..ORACLE_BASES {
        let dev = DeviceModel::ideal(1)
            .with_single_qubit_noise(&noise_1q(&mut rng))
            .and_then(|d| d.with_instrument_noise(&noise_1q(&mut rng)))
            .map_err(fail)?;
        let mut basis: Vec<PtmMap> = basis_operations_1q()
            .iter()
            .map(|op| PtmMap::from_matrix(1, true_ptm(&dev, op)).unwrap())
            .collect();
        for _ in 0..1 + k % 3 {
            let gate = GateSpec::rotation(axis(&mut rng), rng.random_range(-PI..PI));
            basis.push(dev.noisy_gate(&gate).map_err(fail)?);
        }
        let labels: Vec<String> = (0..basis.len()).map(|i| format!("b{i}")).collect();
        let target = GateSpec::rotation(axis(&mut rng), rng.random_range(-PI..PI)).ptm();
        let d = decompose_gate(&target, &basis, &labels, "target").map_err(fail)?;
        let m = DMatrix::from_columns(&basis.iter().map(|b| b.vectorize()).collect::<Vec<_>>());
        let oracle = vertex_oracle(&m, &target.vectorize());
        worst_cost = worst_cost.max((d.cost - oracle).abs());
        worst_residual = worst_residual.max(d.residual);
    }
    ensure(
        worst_cost < ORACLE_TOL && worst_residual < RESIDUAL_TOL,
        format!("{ORACLE_BASES} bases, max |cost - oracle| {worst_cost:.2e}, max residual {worst_residual:.2e}"),
    )
}

fn twirling() -> Check {
    let over = NoiseSpec::CoherentOverrotation { axis: Pauli::X, delta: 0.25 };
    let dev = DeviceModel::paper_preset(2).with_cphase_noise(CphaseNoise::Channel(over)).map_err(fail)?;
    let model = characterize_two_qubit(&dev, PI, &QemOptions::default(), &SeedStream::new(0)).map_err(fail)?;
    let twirled = twirl_estimate(&model.cphase_hat, PI, &default_twirl_pairs(PI)).map_err(fail)?;
    let cz = GateSpec::ControlledPhase { phi: PI }.ptm();
    let residual = twirled.matrix() * cz.matrix().transpose();
    let off_diagonal = (0..16)
        .flat_map(|i| (0..16).map(move |j| (i, j)))
        .filter(|(i, j)| i != j)
        .fold(0.0f64, |m, (i, j)| m.max(residual[(i, j)].abs()));

    let paper = DeviceModel::paper_preset(2);
    let seeds = SeedStream::new(0);
    let mut costs = Vec::new();
    for phi in default_phis() {
        let t = characterize_two_qubit(&paper, phi, &QemOptions::default(), &seeds).map_err(fail)?;
        let b = characterize_two_qubit(&paper, phi, &QemOptions { twirl: false, ..QemOptions::default() }, &seeds)
            .map_err(fail)?;
        costs.push((t.decompose_cphase().map_err(fail)?.cost, b.decompose_cphase().map_err(fail)?.cost));
    }
    let ordered = costs.iter().all(|(t, b)| *t <= b + 1e-9);
    ensure(
        off_diagonal < DIAGONAL_TOL && ordered,
        format!(
            "max off-diagonal {off_diagonal:.2e}, twirled vs bare costs {}",
            costs.iter().map(|(t, b)| format!("{t:.4}<={b:.4}")).collect::<Vec<_>>().join(" ")
        ),
    )
}

fn fidelity() -> Check {
    let eps = 16.0 * (1.0 - FIDELITY_EXPECTED) / 15.0;
    let cz = GateSpec::ControlledPhase { phi: PI };
    let dev = DeviceModel::ideal(2)
        .with_cphase_noise(CphaseNoise::Channel(NoiseSpec::Depolarizing2Q(eps)))
        .map_err(fail)?;
    let f = process_fidelity(&dev.noisy_gate(&cz).map_err(fail)?, &cz.ptm()).map_err(fail)?;
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let u = GateSpec::rotation(axis(&mut rng), rng.random_range(-PI..PI)).ptm();
        let c = GateSpec::ControlledPhase { phi: rng.random_range(-PI..PI) }.ptm();
        worst = worst.max((process_fidelity(&u, &u).map_err(fail)? - 1.0).abs());
        worst = worst.max((process_fidelity(&c, &c).map_err(fail)? - 1.0).abs());
    }
    ensure(
        (f - FIDELITY_EXPECTED).abs() < FIDELITY_TOL && worst < FIDELITY_TOL,
        format!("depolarized C_pi fidelity {f:.12}, max |1 - self-fidelity| {worst:.2e}"),
    )
}

fn run_cli(args: &[&str], threads: &str) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_uqem"))
        .args(args)
        .env("RAYON_NUM_THREADS", threads)
        .env_remove("UQEM_SEED")
        .output()
        .map_err(fail)?;
    if !out.status.success() {
        return Err(format!("{args:?} exited with {}: {}", out.status, String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out.stdout)
}

fn determinism() -> Check {
    let invocations: [&[&str]; 5] = [
        &["run", "two-qubit", "--quick", "--phi", "pi/4,pi/2,pi"],
        &["--format", "delimited", "run", "two-qubit", "--quick", "--reps", "20"],
        &["run", "one-qubit", "--quick", "--seed", "11"],
        &["gst", "--gst-shots", "2000", "--bootstrap", "10"],
        &["decompose", "--phi", "pi/2", "--gst-shots", "5000"],
    ];
    for args in invocations {
        let first = run_cli(args, "1")?;
        let again = run_cli(args, "1")?;
        let wide = run_cli(args, "4")?;
        if first != again || first != wide {
            return Err(format!("{args:?} differs between runs"));
        }
    }
    Ok(format!("{} invocations byte-identical across repeats and 1 vs 4 threads", invocations.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("unbiasedness on random noise", unbiasedness),
        ("one-qubit readout mitigation", one_qubit_experiment),
        ("two-qubit DQCp at pi/2", two_qubit_experiment),
        ("depolarizing accuracy model", depolarizing_model),
        ("GST round trip", gst_round_trip),
        ("decomposition vs vertex oracle", decomposition_oracle),
        ("twirling", twirling),
        ("fidelity pipeline", fidelity),
        ("CLI determinism", determinism),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let (status, detail) = match check() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{status} criterion {}: {name}: {detail}", k + 1);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
