use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use covariant_dilation::workbench::{self, Command, Overrides, RawScenario, Report, Scenario};
use covariant_dilation::{Error, Result};

/// Verification workbench for covariant pairs: extensions, dilations and
/// equivalence certificates, reported as JSON.
#[derive(Parser)]
#[command(name = "covdil", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Covariance, contraction, defect commutation and transfer calculus.
    Check(RunArgs),
    /// Truncated coisometric extension (ρ_N, V_N).
    Extend(RunArgs),
    /// Minimal isometric dilation with M defect copies.
    Dilate(RunArgs),
    /// Unitary dilation composed from the extension and its isometric dilation.
    Unitary(RunArgs),
    /// Explicit block-matrix unitary, certified against the composed one.
    Matricial(RunArgs),
    /// Certify two scenarios' extensions equivalent or produce a witness.
    Compare(RunArgs),
    /// Run a built-in scenario.
    Demo(DemoArgs),
}

#[derive(Args)]
struct Common {
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the residual threshold.
    #[arg(long)]
    tol: Option<f64>,
    /// Override N, the number of extension steps.
    #[arg(long)]
    levels: Option<usize>,
    /// Override M, the number of defect copies.
    #[arg(long)]
    copies: Option<usize>,
    /// Override the seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Include wall-clock time (makes reports differ between runs).
    #[arg(long)]
    timing: bool,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            residual_tol: self.tol,
            levels: self.levels,
            copies: self.copies,
            seed: self.seed,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (give it twice for compare).
    #[arg(long, required = true)]
    scenario: Vec<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, ValueEnum)]
enum DemoCommand {
    Check,
    Extend,
    Dilate,
    Unitary,
    Matricial,
    Compare,
}

impl From<DemoCommand> for Command {
    fn from(c: DemoCommand) -> Self {
        match c {
            DemoCommand::Check => Command::Check,
            DemoCommand::Extend => Command::Extend,
            DemoCommand::Dilate => Command::Dilate,
            DemoCommand::Unitary => Command::Unitary,
            DemoCommand::Matricial => Command::Matricial,
            DemoCommand::Compare => Command::Compare,
        }
    }
}

#[derive(Args)]
struct DemoArgs {
    /// scalar, automorphism or tower.
    name: String,
    /// Command to run on it.
    #[arg(long, value_enum, default_value = "unitary")]
    run: DemoCommand,
    /// Print the scenario JSON instead of running it.
    #[arg(long)]
    print_scenario: bool,
    #[command(flatten)]
    common: Common,
}

fn exit_code_for(e: &Error) -> u8 {
    if e.is_validation() {
        2
    } else {
        3
    }
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn execute(command: Command, scenarios: Vec<RawScenario>, common: &Common) -> Result<Report> {
    let o = common.overrides();
    let loaded = scenarios
        .into_iter()
        .map(|mut raw| {
            raw.apply(&o);
            Scenario::from_raw(raw)
        })
        .collect::<Result<Vec<_>>>()?;
    let start = Instant::now();
    let mut report = match (command, loaded.as_slice()) {
        (Command::Compare, [a, b]) => workbench::compare(a, b)?,
        (Command::Compare, _) => {
            return Err(Error::validation("scenario", "compare needs exactly two scenarios"))
        }
        (c, [one]) => workbench::run(one, c)?,
        (c, _) => return Err(Error::validation("scenario", format!("{c} takes exactly one scenario"))),
    };
    if common.timing {
        report.timing_ms = Some(start.elapsed().as_secs_f64() * 1e3);
    }
    Ok(report)
}

fn read_raw(path: &PathBuf) -> Result<RawScenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    RawScenario::from_json(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn main_inner(cli: Cli) -> Result<u8> {
    let (command, scenarios, common) = match cli.command {
        Cmd::Demo(d) => {
            let raw = workbench::demo_scenario(&d.name)?;
            if d.print_scenario {
                let mut text = serde_json::to_string_pretty(&raw).expect("scenario serializes");
                text.push('\n');
                emit(&text, d.common.out.as_ref())?;
                return Ok(0);
            }
            let command: Command = d.run.into();
            let mut list = vec![raw];
            if command == Command::Compare {
                list.push(workbench::demo_partner(&d.name)?);
            }
            (command, list, d.common)
        }
        other => {
            let (command, args) = match other {
                Cmd::Check(a) => (Command::Check, a),
                Cmd::Extend(a) => (Command::Extend, a),
                Cmd::Dilate(a) => (Command::Dilate, a),
                Cmd::Unitary(a) => (Command::Unitary, a),
                Cmd::Matricial(a) => (Command::Matricial, a),
                Cmd::Compare(a) => (Command::Compare, a),
                Cmd::Demo(_) => unreachable!(),
            };
            let raws = args.scenario.iter().map(read_raw).collect::<Result<Vec<_>>>()?;
            (command, raws, args.common)
        }
    };
    let report = execute(command, scenarios, &common)?;
    emit(&report.to_json(), common.out.as_ref())?;
    for c in report.failed() {
        eprintln!("FAILED {}: residual {:e} > {:e} ({})", c.name, c.residual, c.threshold, c.anchor);
    }
    Ok(report.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("covdil: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
