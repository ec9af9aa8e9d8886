use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use nullflow::flow::{evolve, initial_curve, write_drift_csv, write_snapshot, EvolutionMode, FlowError};
use nullflow::flowfield::Coefficient;
use nullflow::scenario::{audit_problems, load_scenario, Scenario, ScenarioError};
use nullflow::verify::{audit, run_verification, VariantPolicy, VerifyError};

/// Largest frame residual accepted from `synth`.
const SYNTH_RESIDUAL_LIMIT: f64 = 1e-8;
/// Largest relative length change accepted from `simulate` on an inextensible flow.
const DRIFT_LIMIT: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(name = "nullflow", version, about = "Null curves in Minkowski space-time and their flows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// Scenario file, or `builtin:NAME`.
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory; defaults to the scenario's `run.out`, then `out/<name>`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of grids in the refinement ladder.
    #[arg(long)]
    refinements: Option<usize>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate the initial curve and write its frames.
    Synth(Common),
    /// Evolve the curve and write the grid and its length drift.
    Simulate(Common),
    /// Check every identity over a refinement ladder.
    Verify {
        #[command(flatten)]
        common: Common,
        /// `printed` requires the displayed form of each disputed identity.
        #[arg(long, value_enum)]
        variants: Option<Variants>,
    },
    /// Compare the forms of each disputed identity on seeded random flows.
    Audit(Common),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Transport,
    Position,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Variants {
    Auto,
    Printed,
}

#[derive(Debug, thiserror::Error)]
enum Failure {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("writing {path}: {source}")]
    Output { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Scenario(_) | Failure::Output { .. } => 2,
            Failure::Flow(e) if e.is_input_error() => 2,
            Failure::Verify(e) if e.is_input_error() => 2,
            Failure::Flow(_) | Failure::Verify(_) => 3,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, variants) = match &cli.command {
        Command::Synth(c) | Command::Simulate(c) | Command::Audit(c) => (c, None),
        Command::Verify { common, variants } => (common, *variants),
    };
    let mut sc = match load_scenario(&common.scenario) {
        Ok(sc) => sc,
        Err(e) => {
            eprintln!("{}: {e}", common.scenario.display());
            return ExitCode::from(2);
        }
    };
    apply_overrides(&mut sc, common, variants);
    let out = common.out.clone().or_else(|| sc.out.clone()).unwrap_or_else(|| Path::new("out").join(&sc.name));
    let result = fs::create_dir_all(&out)
        .map_err(|source| Failure::Output { path: out.clone(), source })
        .and_then(|()| match cli.command {
            Command::Synth(_) => synth(&sc, &out),
            Command::Simulate(_) => simulate(&sc, &out),
            Command::Verify { .. } => verify(&sc, &out),
            Command::Audit(_) => run_audit(&sc, &out),
        });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("scenario {}: {e}", sc.name);
            ExitCode::from(e.exit_code())
        }
    }
}

fn apply_overrides(sc: &mut Scenario, c: &Common, variants: Option<Variants>) {
    if let Some(n) = c.refinements {
        sc.refinements = n;
    }
    if let Some(m) = c.mode {
        sc.problem.mode = match m {
            Mode::Transport => EvolutionMode::Transport,
            Mode::Position => EvolutionMode::Position,
        };
    }
    if let Some(v) = variants {
        sc.variants = match v {
            Variants::Auto => VariantPolicy::Auto,
            Variants::Printed => VariantPolicy::Printed,
        };
    }
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<(), Failure> {
    let err = |source| Failure::Output { path: path.to_path_buf(), source };
    let mut w = BufWriter::new(File::create(path).map_err(err)?);
    f(&mut w).and_then(|()| w.flush()).map_err(err)
}

fn synth(sc: &Scenario, out: &Path) -> Result<bool, Failure> {
    let curve = initial_curve(&sc.problem)?;
    let path = out.join("curve.csv");
    write_file(&path, |w| curve.write_csv(w))?;
    let r = curve.max_frame_residual();
    println!("{}: {} samples, max frame residual {r:.3e} -> {}", sc.name, curve.len(), path.display());
    Ok(r <= SYNTH_RESIDUAL_LIMIT)
}

fn simulate(sc: &Scenario, out: &Path) -> Result<bool, Failure> {
    let grid = evolve(&sc.problem)?;
    write_file(&out.join("grid.csv"), |w| grid.write_csv(w))?;
    write_file(&out.join("grid.bin"), |w| write_snapshot(&grid, w))?;
    let drift = grid.drift_series();
    write_file(&out.join("drift.csv"), |w| write_drift_csv(&drift, w))?;
    let worst = drift.iter().map(|r| r.drift.abs()).fold(0.0, f64::max);
    println!(
        "{}: {} x {} samples, max relative length drift {worst:.3e} -> {}",
        sc.name,
        grid.num_u(),
        grid.num_t(),
        out.display()
    );
    let inextensible = sc.problem.coeffs.c[0] == Coefficient::Inextensible;
    Ok(!inextensible || worst <= DRIFT_LIMIT)
}

fn verify(sc: &Scenario, out: &Path) -> Result<bool, Failure> {
    let v = run_verification(&sc.problem, &sc.verify_options())?;
    write_file(&out.join("verify.json"), |w| v.write_json(w))?;
    write_file(&out.join("verify.txt"), |w| v.write_table(w))?;
    v.write_table(io::stdout().lock()).map_err(|source| Failure::Output { path: "<stdout>".into(), source })?;
    Ok(v.pass)
}

fn run_audit(sc: &Scenario, out: &Path) -> Result<bool, Failure> {
    let problems = audit_problems(sc);
    let a = audit(&problems, &sc.verify_options())?;
    write_file(&out.join("audit.json"), |w| a.write_json(w))?;
    write_file(&out.join("audit.txt"), |w| a.write_table(w))?;
    a.write_table(io::stdout().lock()).map_err(|source| Failure::Output { path: "<stdout>".into(), source })?;
    Ok(a.pass)
}
