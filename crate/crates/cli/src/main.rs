use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use nhdeco::dynamics::Method;
use nhdeco::ModelKind;
use nhdeco_cli::config::parse_angle;
use nhdeco_cli::presets::PRESETS;
use nhdeco_cli::{resolve, run_scan, CliError, Experiment, ExperimentConfig, Overrides};

#[derive(Debug, Parser)]
#[command(
    name = "nhdeco",
    version,
    about = "Qubit decoherence in non-Hermitian spin-chain and Fermi-gas environments",
    after_help = "Angles accept radians or multiples of pi, e.g. --theta 45pi/200,pi/4.\n\
                  Exit codes: 0 success, 2 invalid configuration, 3 some scan points failed, 4 I/O error."
)]
struct Cli {
    /// JSON configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Figure preset.
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(PRESETS))]
    preset: Option<String>,
    /// Model kind for a custom run: ising, heisenberg, or fermi.
    #[arg(long)]
    model: Option<ModelKind>,
    /// coherence, susceptibility, or circuit.
    #[arg(long, value_parser = parse_experiment)]
    experiment: Option<Experiment>,
    /// Number of sites.
    #[arg(short = 'N')]
    n: Option<usize>,
    /// Exchange (spins) or hopping (fermions).
    #[arg(long = "J", allow_negative_numbers = true)]
    j: Option<f64>,
    /// On-site interaction (fermions).
    #[arg(long = "U", allow_negative_numbers = true)]
    u: Option<f64>,
    /// Real transverse field h_x.
    #[arg(long, allow_negative_numbers = true)]
    hx: Option<f64>,
    /// Comma-separated h_y scan axis.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    hy: Option<Vec<f64>>,
    /// Coupling δ_x added to h_x on the qubit's |1⟩ branch.
    #[arg(long, allow_negative_numbers = true)]
    dx: Option<f64>,
    /// Coupling δ_y added to h_y on the qubit's |1⟩ branch.
    #[arg(long, allow_negative_numbers = true)]
    dy: Option<f64>,
    /// Comma-separated coupling angles, (δx, δy) = |δ|(sin θ, cos θ).
    #[arg(long, value_delimiter = ',', value_parser = parse_angle, allow_hyphen_values = true)]
    theta: Option<Vec<f64>>,
    /// Final time of the trace.
    #[arg(long)]
    tmax: Option<f64>,
    /// Number of time steps on [0, tmax].
    #[arg(long)]
    steps: Option<usize>,
    /// dense or krylov.
    #[arg(long)]
    method: Option<Method>,
    /// Circuit trajectories per time point; 0 disables shot mode.
    #[arg(long)]
    shots: Option<u64>,
    /// Seed of the shot sampler.
    #[arg(long)]
    seed: Option<u64>,
    /// Local step tolerance of the circuit schedule.
    #[arg(long = "tol")]
    tolerance: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_experiment(s: &str) -> Result<Experiment, String> {
    serde_json::from_value(serde_json::Value::String(s.to_ascii_lowercase()))
        .map_err(|_| format!("unknown experiment `{s}`"))
}

impl Cli {
    fn overrides(self) -> (Option<PathBuf>, Overrides) {
        let ov = Overrides {
            preset: self.preset,
            model: self.model,
            experiment: self.experiment,
            n: self.n,
            j: self.j,
            u: self.u,
            hx: self.hx,
            hy: self.hy,
            dx: self.dx,
            dy: self.dy,
            theta: self.theta,
            t_max: self.tmax,
            steps: self.steps,
            method: self.method,
            shots: self.shots,
            seed: self.seed,
            tolerance: self.tolerance,
            out: self.out,
        };
        (self.config, ov)
    }
}

fn run(cli: Cli) -> Result<u8, CliError> {
    let (path, ov) = cli.overrides();
    let config = match path {
        Some(p) => ExperimentConfig::from_json(&std::fs::read_to_string(&p)?)?,
        None => ExperimentConfig::default(),
    };
    let resolved = resolve(&config, &ov)?;
    for w in &resolved.warnings {
        eprintln!("warning: {w}");
    }
    let report = run_scan(&resolved)?;
    let failed: Vec<_> = report.failures().collect();
    eprintln!(
        "{}: {} points, {} failed, {} files in {} ({:.1}s)",
        resolved.name,
        report.points.len(),
        failed.len(),
        report.files.len(),
        report.out.display(),
        report.wall_seconds
    );
    for p in &failed {
        eprintln!(
            "failed point {} ({}): {}",
            p.point.id,
            p.point.label,
            p.message.as_deref().unwrap_or("")
        );
    }
    Ok(if failed.is_empty() {
        0
    } else {
        nhdeco_cli::EXIT_POINT_FAILURES
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
