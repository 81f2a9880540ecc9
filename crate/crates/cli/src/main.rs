//! `uqem`: characterize a simulated device, decompose, and run mitigated experiments.

use std::f64::consts::PI;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use uqem::device::{DeviceConfig, DeviceModel, PAPER_PRESET};
use uqem::experiments::{
    default_phis, depolarizing_analysis, required_fidelity, run_one_qubit, run_two_qubit_sweep, to_delimited,
    DepolarizingAnalysis, ExperimentResult, Metadata, RunSettings, DEFAULT_ONE_QUBIT_SHOTS, DEFAULT_REPETITIONS,
    DEFAULT_SEED, DEFAULT_TWO_QUBIT_SHOTS, QUICK_DIVISOR, SEED_ENV,
};
use uqem::gates::basis_operations_1q;
use uqem::gates::GateSpec;
use uqem::gst::{gst_report, matrix_rows, process_fidelity, GstReport, Mode};
use uqem::qem::{characterize_two_qubit, QemOptions, QuasiDecomposition};
use uqem::rng::SeedStream;
use uqem::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Format {
    /// Structured JSON report document.
    TableDoc,
    /// Comma-separated table.
    Delimited,
}

#[derive(Debug, Parser)]
#[command(name = "uqem", version, about = "Quasiprobability error mitigation on a simulated device")]
struct Cli {
    /// Device preset name (`paper-device`, `ideal`) or TOML file.
    #[arg(long, global = true, default_value = PAPER_PRESET)]
    config: String,
    /// Master seed; defaults to the config's seed, then $UQEM_SEED, then 7.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::TableDoc)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
struct Characterization {
    /// Shots per tomography circuit; exact (infinite-shot) tomography when omitted.
    #[arg(long)]
    gst_shots: Option<u64>,
    /// Use GST estimates of the twirling Pauli gates instead of ideal ones.
    #[arg(long)]
    estimate_pauli_gates: bool,
    /// Decompose the bare controlled-phase gate instead of its twirled version.
    #[arg(long)]
    no_twirl: bool,
}

impl Characterization {
    fn mode(&self) -> Mode {
        self.gst_shots.map_or(Mode::Exact, Mode::Shots)
    }

    fn options(&self) -> QemOptions {
        QemOptions {
            gst_mode: self.mode(),
            assume_ideal_single_qubit_gates: !self.estimate_pauli_gates,
            twirl: !self.no_twirl,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Gate set tomography report of the device.
    Gst {
        /// Controlled-phase angles to characterize on a two-qubit device.
        #[arg(long, value_delimiter = ',', value_parser = parse_angle)]
        phi: Option<Vec<f64>>,
        /// Bootstrap replicates for standard errors (shot mode only).
        #[arg(long, default_value_t = 100)]
        bootstrap: usize,
        #[command(flatten)]
        characterization: Characterization,
    },
    /// Quasiprobability decompositions of `C_phi` and of the `X` measurement.
    Decompose {
        #[arg(long, value_delimiter = ',', value_parser = parse_angle)]
        phi: Option<Vec<f64>>,
        #[command(flatten)]
        characterization: Characterization,
    },
    /// Run an experiment.
    Run {
        #[command(subcommand)]
        experiment: Experiment,
    },
    /// Analytic models.
    Analyze {
        #[command(subcommand)]
        analysis: Analysis,
    },
}

#[derive(Debug, Clone, Args)]
struct Budget {
    /// Random circuits per average.
    #[arg(long)]
    shots: Option<u64>,
    /// Number of averages.
    #[arg(long)]
    reps: Option<usize>,
    /// Use 1/100 of the default shots per average.
    #[arg(long)]
    quick: bool,
}

impl Budget {
    fn resolve(&self, default_shots: u64) -> (u64, usize) {
        let shots = self
            .shots
            .unwrap_or(if self.quick { (default_shots / QUICK_DIVISOR).max(1) } else { default_shots });
        (shots, self.reps.unwrap_or(DEFAULT_REPETITIONS))
    }
}

#[derive(Debug, Subcommand)]
enum Experiment {
    /// Readout mitigation of `<Z>` after `X_pi/2`.
    OneQubit {
        #[command(flatten)]
        budget: Budget,
        #[command(flatten)]
        characterization: Characterization,
    },
    /// DQCp sweep over the controlled-phase angle.
    TwoQubit {
        #[arg(long, value_delimiter = ',', value_parser = parse_angle)]
        phi: Option<Vec<f64>>,
        #[command(flatten)]
        budget: Budget,
        #[command(flatten)]
        characterization: Characterization,
    },
}

#[derive(Debug, Subcommand)]
enum Analysis {
    /// Deviation of `<X>` under depolarizing gate and measurement errors.
    Depolarizing {
        #[arg(long)]
        f2: f64,
        #[arg(long)]
        fm: f64,
        #[arg(long, value_parser = parse_angle, default_value = "pi/2")]
        phi: f64,
        /// Also solve for the common fidelity giving this deviation.
        #[arg(long)]
        target_delta: Option<f64>,
    },
}

/// Angles as plain numbers or multiples of pi: `1.5708`, `pi/2`, `3pi/4`, `pi`.
fn parse_angle(s: &str) -> Result<f64, String> {
    let t = s.trim().to_ascii_lowercase();
    if let Ok(x) = t.parse::<f64>() {
        return Ok(x);
    }
    let bad = || format!("`{s}` is not an angle (use e.g. 1.57, pi/2, 3pi/4)");
    let (num, den) = match t.split_once('/') {
        Some((n, d)) => (n, d.parse::<f64>().map_err(|_| bad())?),
        None => (t.as_str(), 1.0),
    };
    let coeff = match num.strip_suffix("pi").ok_or_else(bad)?.trim_end_matches('*') {
        "" => 1.0,
        c => c.parse::<f64>().map_err(|_| bad())?,
    };
    Ok(coeff * PI / den)
}

#[derive(Debug, Serialize)]
struct Document<C: Serialize, R: Serialize> {
    command: &'static str,
    metadata: Metadata,
    config: C,
    results: R,
}

#[derive(Debug, Serialize)]
struct RunConfig<'a> {
    device: &'a DeviceConfig,
    settings: RunSettings,
    #[serde(skip_serializing_if = "Option::is_none")]
    phis: Option<&'a [f64]>,
}

#[derive(Debug, Serialize)]
struct CharacterizationConfig<'a> {
    device: &'a DeviceConfig,
    seed: u64,
    gst_mode: Mode,
    assume_ideal_single_qubit_gates: bool,
    twirl: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    phis: Option<&'a [f64]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bootstrap: Option<usize>,
}

#[derive(Debug, Serialize)]
struct CphaseEstimate {
    phi: f64,
    u_hat: Vec<Vec<f64>>,
    process_fidelity: f64,
    twirled_u_hat: Vec<Vec<f64>>,
    twirled_process_fidelity: f64,
}

#[derive(Debug, Serialize)]
struct GstResults {
    qubits: Vec<GstReport>,
    cphase: Vec<CphaseEstimate>,
}

#[derive(Debug, Serialize)]
struct DecomposeResult {
    phi: f64,
    gate: QuasiDecomposition,
    measurement: QuasiDecomposition,
    total_cost: f64,
}

#[derive(Debug, Serialize)]
struct AnalysisResult {
    #[serde(flatten)]
    analysis: DepolarizingAnalysis,
    #[serde(skip_serializing_if = "Option::is_none")]
    target_delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    required_fidelity: Option<f64>,
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure { code: if e.is_numerical() { 2 } else { 1 }, message: e.to_string() }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: 1, message: message.into() }
}

fn resolve_seed(flag: Option<u64>, config: &DeviceConfig) -> Result<u64, Failure> {
    if let Some(s) = flag.or(config.seed) {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| usage(format!("{SEED_ENV}=`{v}` is not an unsigned integer"))),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable document");
    s.push('\n');
    s
}

fn csv_line(fields: &[String]) -> String {
    let mut s = fields.join(",");
    s.push('\n');
    s
}

fn gst_delimited(res: &GstResults) -> String {
    let mut out = csv_line(&["qubit".into(), "label".into(), "process_fidelity".into(), "process_fidelity_se".into()]);
    for (q, rep) in res.qubits.iter().enumerate() {
        for g in &rep.gates {
            let se = g.process_fidelity_se.map(|x| x.to_string()).unwrap_or_default();
            out.push_str(&csv_line(&[q.to_string(), g.label.clone(), g.process_fidelity.to_string(), se]));
        }
    }
    for c in &res.cphase {
        let label = GateSpec::ControlledPhase { phi: c.phi }.to_string();
        out.push_str(&csv_line(&["01".into(), label, c.process_fidelity.to_string(), String::new()]));
    }
    out
}

fn decompose_delimited(res: &[DecomposeResult]) -> String {
    let mut out = csv_line(&["phi".into(), "target".into(), "index".into(), "label".into(), "q".into()]);
    for r in res {
        for d in [&r.gate, &r.measurement] {
            for (k, (label, q)) in d.basis.iter().zip(&d.q).enumerate() {
                out.push_str(&csv_line(&[
                    r.phi.to_string(),
                    d.target.clone(),
                    (k + 1).to_string(),
                    format!("\"{label}\""),
                    q.to_string(),
                ]));
            }
        }
    }
    out
}

fn run(cli: Cli) -> Result<String, Failure> {
    let device_config = DeviceConfig::load(&cli.config)?;
    let seed = resolve_seed(cli.seed, &device_config)?;
    let delimited = cli.format == Format::Delimited;
    match &cli.command {
        Command::Gst { phi, bootstrap, characterization } => {
            let n = device_config.n_qubits();
            let device = device_config.build(n)?;
            let phis = phi.clone().unwrap_or_else(default_phis);
            let seeds = SeedStream::new(seed);
            let catalog = basis_operations_1q();
            let qubits = (0..n)
                .map(|q| {
                    gst_report(
                        &device.single_qubit_view(q)?,
                        &catalog,
                        characterization.mode(),
                        &seeds.derive(&format!("qubit{q}")),
                        *bootstrap,
                    )
                })
                .collect::<Result<Vec<_>, Error>>()?;
            let mut cphase = Vec::new();
            if n == 2 {
                for (k, &p) in phis.iter().enumerate() {
                    let model = characterize_two_qubit(
                        &device,
                        p,
                        &characterization.options(),
                        &seeds.derive(&format!("phi{k}")),
                    )?;
                    let ideal = GateSpec::ControlledPhase { phi: p }.ptm();
                    cphase.push(CphaseEstimate {
                        phi: p,
                        u_hat: matrix_rows(model.cphase_hat.matrix()),
                        process_fidelity: process_fidelity(&model.cphase_hat, &ideal)?,
                        twirled_u_hat: matrix_rows(model.gate_hat.matrix()),
                        twirled_process_fidelity: process_fidelity(&model.gate_hat, &ideal)?,
                    });
                }
            }
            let results = GstResults { qubits, cphase };
            if delimited {
                return Ok(gst_delimited(&results));
            }
            let opts = characterization.options();
            let config = CharacterizationConfig {
                device: &device_config,
                seed,
                gst_mode: opts.gst_mode,
                assume_ideal_single_qubit_gates: opts.assume_ideal_single_qubit_gates,
                twirl: opts.twirl,
                phis: (n == 2).then_some(phis.as_slice()),
                bootstrap: Some(*bootstrap),
            };
            Ok(json(&Document { command: "gst", metadata: Metadata::new(seed, &config), config, results }))
        }
        Command::Decompose { phi, characterization } => {
            let device = device_config.build(2)?;
            let phis = phi.clone().unwrap_or_else(default_phis);
            let seeds = SeedStream::new(seed);
            let opts = characterization.options();
            let results = phis
                .iter()
                .enumerate()
                .map(|(k, &p)| {
                    let model = characterize_two_qubit(&device, p, &opts, &seeds.derive(&format!("phi{k}")))?;
                    let gate = model.decompose_cphase()?;
                    let measurement = model.decompose_measurement(uqem::pauli::Pauli::X, uqem::experiments::DQCP_TARGET)?;
                    let total_cost = gate.cost * measurement.cost;
                    Ok(DecomposeResult { phi: p, gate, measurement, total_cost })
                })
                .collect::<Result<Vec<_>, Error>>()?;
            if delimited {
                return Ok(decompose_delimited(&results));
            }
            let config = CharacterizationConfig {
                device: &device_config,
                seed,
                gst_mode: opts.gst_mode,
                assume_ideal_single_qubit_gates: opts.assume_ideal_single_qubit_gates,
                twirl: opts.twirl,
                phis: Some(&phis),
                bootstrap: None,
            };
            Ok(json(&Document { command: "decompose", metadata: Metadata::new(seed, &config), config, results }))
        }
        Command::Run { experiment } => {
            let (name, results, settings, phis): (_, Vec<ExperimentResult>, _, Option<Vec<f64>>) = match experiment {
                Experiment::OneQubit { budget, characterization } => {
                    let settings = settings_for(budget, characterization, DEFAULT_ONE_QUBIT_SHOTS, seed);
                    let device = device_config.build(1)?;
                    ("run one-qubit", vec![run_one_qubit(&device, &settings)?], settings, None)
                }
                Experiment::TwoQubit { phi, budget, characterization } => {
                    let settings = settings_for(budget, characterization, DEFAULT_TWO_QUBIT_SHOTS, seed);
                    let device: DeviceModel = device_config.build(2)?;
                    let phis = phi.clone().unwrap_or_else(default_phis);
                    ("run two-qubit", run_two_qubit_sweep(&device, &phis, &settings)?, settings, Some(phis))
                }
            };
            if delimited {
                return Ok(to_delimited(&results));
            }
            let config = RunConfig { device: &device_config, settings, phis: phis.as_deref() };
            Ok(json(&Document { command: name, metadata: Metadata::new(seed, &config), config, results }))
        }
        Command::Analyze { analysis: Analysis::Depolarizing { f2, fm, phi, target_delta } } => {
            let analysis = depolarizing_analysis(*f2, *fm, *phi)?;
            let required = target_delta.map(|d| required_fidelity(d, *phi)).transpose()?;
            let result = AnalysisResult { analysis, target_delta: *target_delta, required_fidelity: required };
            if delimited {
                let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
                let mut out = csv_line(
                    &["f2", "fm", "phi", "eps2", "eps_m", "ideal", "delta", "target_delta", "required_fidelity"]
                        .map(String::from),
                );
                out.push_str(&csv_line(&[
                    analysis.f2.to_string(),
                    analysis.fm.to_string(),
                    analysis.phi.to_string(),
                    analysis.eps2.to_string(),
                    analysis.eps_m.to_string(),
                    analysis.ideal.to_string(),
                    analysis.delta.to_string(),
                    opt(*target_delta),
                    opt(required),
                ]));
                return Ok(out);
            }
            let config = serde_json::json!({ "f2": f2, "fm": fm, "phi": phi, "target_delta": target_delta });
            Ok(json(&Document {
                command: "analyze depolarizing",
                metadata: Metadata::new(seed, &config),
                config,
                results: result,
            }))
        }
    }
}

fn settings_for(budget: &Budget, c: &Characterization, default_shots: u64, seed: u64) -> RunSettings {
    let (shots, reps) = budget.resolve(default_shots);
    let opts = c.options();
    RunSettings {
        gst_mode: opts.gst_mode,
        assume_ideal_single_qubit_gates: opts.assume_ideal_single_qubit_gates,
        twirl: opts.twirl,
        ..RunSettings::new(shots, reps, seed)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let output = cli.output.clone();
    match run(cli) {
        Ok(text) => {
            let written = match &output {
                Some(path) => std::fs::write(path, text).map_err(|e| format!("cannot write `{}`: {e}", path.display())),
                None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| e.to_string()),
            };
            match written {
                Ok(()) => ExitCode::SUCCESS,
                Err(msg) => {
                    eprintln!("error: {msg}");
                    ExitCode::from(1)
                }
            }
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
