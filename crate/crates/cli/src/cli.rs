//! Command-line surface of the `genflow` binary.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{self, Overrides, RunConfig, Scenario};
use crate::error::{exit, CliError, Result};
use crate::output::write_outcome;
use crate::run::{execute, Command, Outcome};

#[derive(Debug, Parser)]
#[command(name = "genflow", version, about = "Flows of regularized singular vector fields and their limits")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

/// Flags shared by every computing subcommand. Precedence, lowest first:
/// preset, --config file, $GENFLOW_OUT, flags.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// JSON config file; a report.json is accepted and its embedded config reused
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long, value_name = "EPS")]
    pub epsilon_min: Option<f64>,
    #[arg(long, value_name = "EPS")]
    pub epsilon_max: Option<f64>,
    #[arg(long, value_name = "N")]
    pub epsilon_count: Option<usize>,
    /// integrator tolerance (absolute and relative)
    #[arg(long)]
    pub tol: Option<f64>,
    /// time grid; for `solve` this is the trajectory grid
    #[arg(long, value_name = "START,STOP,COUNT[,pi]", allow_hyphen_values = true)]
    pub grid_t: Option<String>,
    /// points per axis of the flow-table grid on [-RADIUS, RADIUS]
    #[arg(long, value_name = "N[,RADIUS[,pi]]")]
    pub grid_p: Option<String>,
    /// bump placement: a (symmetric), b (right of 0), c (left of 0)
    #[arg(long, value_parser = ["a", "b", "c"])]
    pub case: Option<String>,
    /// field kind: marsden, torus, zero, linear, monomial
    #[arg(long)]
    pub field: Option<String>,
    /// output directory
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// only print errors
    #[arg(long, short)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Run a preset scenario and check its expected outcomes
    Scenario {
        #[arg(value_parser = ["marsden", "torus", "hierarchy", "custom"])]
        name: String,
        #[command(flatten)]
        common: Common,
    },
    /// Run the scenario described by --config
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Solve trajectories from the given starting points
    Solve {
        /// preset supplying the defaults
        #[arg(long, default_value = "custom")]
        preset: String,
        /// starting point, comma-separated coordinates; repeatable
        #[arg(long, value_name = "COORDS", allow_hyphen_values = true)]
        p0: Vec<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Fill the flow table and extract the limit candidate
    Flow {
        #[arg(long, default_value = "custom")]
        preset: String,
        #[command(flatten)]
        common: Common,
    },
    /// One association verdict between the flow at time t and its limit
    Associate {
        #[arg(long, default_value = "custom")]
        preset: String,
        /// zero, pw, pwae, model, assoc-rn or fast
        #[arg(long)]
        notion: Option<String>,
        /// time, in the unit of the associate section (pi by default)
        #[arg(long, allow_hyphen_values = true)]
        t: Option<f64>,
        /// closed-form or extracted
        #[arg(long)]
        reference: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Check the field hypotheses on a sample grid
    Conditions {
        #[arg(long, default_value = "custom")]
        preset: String,
        #[command(flatten)]
        common: Common,
    },
    /// Print a preset configuration as JSON
    Preset {
        #[arg(value_parser = ["marsden", "torus", "hierarchy", "custom"])]
        name: String,
    },
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            epsilon_min: self.epsilon_min,
            epsilon_max: self.epsilon_max,
            epsilon_count: self.epsilon_count,
            tol: self.tol,
            grid_t: self.grid_t.clone(),
            grid_p: self.grid_p.clone(),
            case: self.case.clone(),
            field: self.field.clone(),
            out: self.out.as_ref().map(|p| p.display().to_string()),
            ..Overrides::default()
        }
    }

    fn file(&self) -> Result<Option<serde_json::Value>> {
        self.config.as_deref().map(config::read_config_file).transpose()
    }
}

fn env_out() -> Option<String> {
    std::env::var(config::OUT_ENV).ok()
}

/// Resolves the config for a parsed command line.
pub fn resolve_command(cmd: &Cmd) -> Result<(Command, RunConfig, bool)> {
    let module = |preset: &str, common: &Common, o: Overrides, which: Command| -> Result<(Command, RunConfig, bool)> {
        let base: Scenario = preset.parse()?;
        let cfg = config::resolve_module(base, common.file()?.as_ref(), env_out().as_deref(), &o)?;
        Ok((which, cfg, common.quiet))
    };
    match cmd {
        Cmd::Scenario { name, common } => {
            let cfg = config::resolve(Some(name.parse()?), common.file()?.as_ref(), env_out().as_deref(), &common.overrides())?;
            Ok((Command::Scenario, cfg, common.quiet))
        }
        Cmd::Run { common } => {
            let file = common.file()?.ok_or_else(|| CliError::Config("run needs --config FILE".into()))?;
            let cfg = config::resolve(None, Some(&file), env_out().as_deref(), &common.overrides())?;
            Ok((Command::Run, cfg, common.quiet))
        }
        Cmd::Solve { preset, p0, common } => {
            let mut o = common.overrides();
            o.traj_t = o.grid_t.take();
            o.p0 = p0.clone();
            module(preset, common, o, Command::Solve)
        }
        Cmd::Flow { preset, common } => module(preset, common, common.overrides(), Command::Flow),
        Cmd::Associate { preset, notion, t, reference, common } => {
            let o = Overrides { notion: notion.clone(), at: *t, reference: reference.clone(), ..common.overrides() };
            module(preset, common, o, Command::Associate)
        }
        Cmd::Conditions { preset, common } => module(preset, common, common.overrides(), Command::Conditions),
        Cmd::Preset { .. } => Err(CliError::Config("preset does not compute anything".into())),
    }
}

fn summarize(outcome: &Outcome, dir: &Path, w: &mut impl Write) -> std::io::Result<()> {
    let r = &outcome.report;
    writeln!(w, "genflow {} ({}) -> {}", r.command.name(), r.config.scenario, dir.display())?;
    for f in &r.findings {
        writeln!(w, "  finding: {f}")?;
    }
    if let Some(v) = &r.association {
        writeln!(w, "  {} association: {}", v.notion.label(), v.verdict.label())?;
    }
    for c in &r.conditions {
        writeln!(w, "  {}: {} ({} growth)", c.condition.label(), c.verdict.label(), c.growth.class.label())?;
    }
    for a in &r.assertions {
        writeln!(w, "  {} {}: {}", if a.passed { "PASS" } else { "FAIL" }, a.name, a.detail)?;
    }
    Ok(())
}

/// Parses, runs and writes; returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::CONFIG } else { exit::OK };
        }
    };
    if let Cmd::Preset { name } = &cli.command {
        let s: Scenario = name.parse().expect("clap restricts the names");
        let json = serde_json::to_string_pretty(&config::preset(s)).expect("presets serialize");
        // a closed pipe is not an error worth reporting
        let _ = writeln!(std::io::stdout(), "{json}");
        return exit::OK;
    }
    let result = resolve_command(&cli.command).and_then(|(cmd, cfg, quiet)| {
        let outcome = execute(cmd, &cfg)?;
        let dir = PathBuf::from(&cfg.out);
        write_outcome(&outcome, &dir)?;
        if !quiet {
            let _ = summarize(&outcome, &dir, &mut std::io::stdout().lock());
        }
        Ok(outcome.report.passed)
    });
    match result {
        Ok(true) => exit::OK,
        Ok(false) => exit::ASSERTION,
        Err(e) => {
            eprintln!("genflow: {e}");
            e.exit_code()
        }
    }
}
