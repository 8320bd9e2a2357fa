mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{ConfigError, RunConfig};

#[derive(Parser)]
#[command(name = "dotsim", version, about = "Symmetric-operation exchange and charge-noise simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; omitted sections take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Override a configuration value by dotted path, e.g. noise.amplitude=0.5.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true, env = "DOTSIM_THREADS")]
    threads: Option<usize>,
    /// Detuning of the trace, GHz.
    #[arg(long, global = true, allow_hyphen_values = true)]
    delta: Option<f64>,
    /// Last sample time, ns.
    #[arg(long, global = true)]
    tmax: Option<f64>,
    /// Target exchange, GHz.
    #[arg(long = "j-target", global = true)]
    j_target: Option<f64>,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Rabi trace at one bias, with a damped-cosine fit.
    Rabi,
    /// Rabi traces versus detuning.
    Chevron,
    /// Singlet probability after a fixed evolution versus detuning and exchange bias.
    Fingerprint,
    /// Insensitivity and fringe counts along a constant-J contour.
    Contour,
    /// Exchange and insensitivity along the symmetric axis.
    Ivj,
    /// Symmetric axes recovered from two synthetic stability maps.
    Calibrate,
    /// WKB barrier parameters fitted to exchange along the symmetric axis.
    Fitwkb,
    /// Synthetic charge-stability map.
    Stability,
    /// Two-frequency mixture trace with its spectral peaks.
    Twofreq,
    /// Fourier magnitude of the two-frequency trace.
    Spectrum,
    /// Run the subcommand named by the configuration's `command` field.
    Run,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Rabi => "rabi",
            Command::Chevron => "chevron",
            Command::Fingerprint => "fingerprint",
            Command::Contour => "contour",
            Command::Ivj => "ivj",
            Command::Calibrate => "calibrate",
            Command::Fitwkb => "fitwkb",
            Command::Stability => "stability",
            Command::Twofreq => "twofreq",
            Command::Spectrum => "spectrum",
            Command::Run => "run",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        [
            Command::Rabi,
            Command::Chevron,
            Command::Fingerprint,
            Command::Contour,
            Command::Ivj,
            Command::Calibrate,
            Command::Fitwkb,
            Command::Stability,
            Command::Twofreq,
            Command::Spectrum,
        ]
        .into_iter()
        .find(|c| c.name() == s)
    }

    /// Configuration section read by the command.
    fn section(self) -> &'static str {
        match self {
            Command::Spectrum => "twofreq",
            c => c.name(),
        }
    }
}

enum Failure {
    Config(String),
    Numerical(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

/// Shorthand flags rewritten as overrides on the command's section.
fn flag_overrides(cmd: Command, c: &Common) -> Result<Vec<String>, Failure> {
    let mut out = Vec::new();
    if let Some(s) = c.seed {
        out.push(format!("seed={s}"));
    }
    let sec = cmd.section();
    let flags: [(&str, Option<f64>, &str, &[Command]); 3] = [
        ("--delta", c.delta, "delta", &[Command::Rabi, Command::Twofreq, Command::Spectrum]),
        ("--tmax", c.tmax, "t_max", &[Command::Rabi, Command::Chevron, Command::Twofreq, Command::Spectrum]),
        (
            "--j-target",
            c.j_target,
            "j_target",
            &[Command::Rabi, Command::Chevron, Command::Contour, Command::Twofreq, Command::Spectrum],
        ),
    ];
    for (flag, value, key, allowed) in flags {
        if let Some(v) = value {
            if !allowed.contains(&cmd) {
                return Err(Failure::Config(format!("{flag} does not apply to `{}`", cmd.name())));
            }
            out.push(format!("{sec}.{key}={v}"));
        }
    }
    Ok(out)
}

/// Line of the first mention of `needle` as a JSON string in `text`.
fn line_of(text: &str, needle: &str) -> Option<usize> {
    let quoted = format!("\"{needle}\"");
    text.lines().position(|l| l.contains(&quoted)).map(|i| i + 1)
}

fn classify(e: dotsim_core::Error, cfg_text: Option<&str>, path: &str) -> Failure {
    match &e {
        dotsim_core::Error::UnknownGate(g) => match cfg_text.and_then(|t| line_of(t, g)) {
            Some(line) => Failure::Config(format!("{path}: line {line}: {e}")),
            None => Failure::Config(e.to_string()),
        },
        _ if e.is_numerical() => Failure::Numerical(e.to_string()),
        _ => Failure::Config(e.to_string()),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let c = &cli.common;
    let path = c.config.as_ref().map(|p| p.to_string_lossy().into_owned());
    // Resolve `run` first so shorthand flags land in the right section.
    let mut cmd = cli.command;
    if cmd == Command::Run {
        let (cfg, _) = config::load(path.as_deref(), &[])?;
        let name =
            cfg.command.ok_or_else(|| Failure::Config("`run` needs a `command` field in the configuration".into()))?;
        cmd = Command::from_name(&name)
            .ok_or_else(|| Failure::Config(format!("unknown command `{name}` in configuration")))?;
    }
    let mut overrides = flag_overrides(cmd, c)?;
    overrides.extend(c.set.iter().cloned());
    let (cfg, text): (RunConfig, Option<String>) = config::load(path.as_deref(), &overrides)?;
    if let Some(want) = &cfg.command {
        if want != cmd.name() {
            return Err(Failure::Config(format!("configuration is for `{want}`, not `{}`", cmd.name())));
        }
    }
    if let Some(n) = c.threads {
        if n == 0 {
            return Err(Failure::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(format!("thread pool: {e}")))?;
    }
    let result = match cmd {
        Command::Rabi => commands::rabi(&cfg),
        Command::Chevron => commands::chevron(&cfg),
        Command::Fingerprint => commands::fingerprint(&cfg),
        Command::Contour => commands::contour(&cfg),
        Command::Ivj => commands::ivj(&cfg),
        Command::Calibrate => commands::calibrate(&cfg),
        Command::Fitwkb => commands::fitwkb(&cfg),
        Command::Stability => commands::stability(&cfg),
        Command::Twofreq => commands::twofreq(&cfg),
        Command::Spectrum => commands::spectrum(&cfg),
        Command::Run => unreachable!("resolved above"),
    };
    let out = result.map_err(|e| classify(e, text.as_deref(), path.as_deref().unwrap_or("<defaults>")))?;
    output::write(&c.out, cmd.name(), &cfg, &out)
        .map_err(|e| Failure::Config(format!("writing {}: {e}", c.out.display())))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(2)
        }
    }
}
