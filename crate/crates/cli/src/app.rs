//! Argument parsing, worker-pool setup and exit codes.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Arg, ArgAction, Command};

use crate::commands::{dispatch, keys, COMMANDS};
use crate::config::{read_config_file, Settings};
use crate::error::{CliError, Result};

pub const THREADS_ENV: &str = "CARMA_FIELD_THREADS";

pub fn command() -> Command {
    let mut cmd = Command::new("carma-field")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Simulate, fit and identify Lévy-driven CARMA random fields")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for (name, about) in COMMANDS {
        let mut sub = Command::new(name).about(about).arg(
            Arg::new("config")
                .long("config")
                .value_name("PATH")
                .help("key = value configuration file; flags override it"),
        );
        for k in keys(name) {
            let help = match k.default {
                Some(d) => format!("{} [default: {d}]", k.help),
                None => k.help.to_string(),
            };
            sub = sub.arg(
                Arg::new(k.name)
                    .long(k.flag())
                    .value_name("VALUE")
                    .action(ArgAction::Set)
                    .allow_hyphen_values(true)
                    .help(help),
            );
        }
        cmd = cmd.subcommand(sub);
    }
    cmd
}

/// Resolves the settings of one invocation without running it.
pub fn settings_from_args<I, T>(args: I) -> std::result::Result<Settings, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = command().try_get_matches_from(args)?;
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let mut flags = BTreeMap::new();
    for k in keys(name) {
        if let Some(v) = sub.get_one::<String>(k.name) {
            flags.insert(k.name.to_string(), v.clone());
        }
    }
    let file = match sub.get_one::<String>("config") {
        Some(path) => read_config_file(&PathBuf::from(path)),
        None => Ok(BTreeMap::new()),
    };
    let resolved = file.and_then(|file| Settings::resolve(name, &keys(name), &file, &flags));
    resolved.map_err(|e| {
        let kind = match e {
            CliError::Io(_) => clap::error::ErrorKind::Io,
            _ => clap::error::ErrorKind::ValueValidation,
        };
        clap::Error::raw(kind, format!("{e}\n"))
    })
}

fn pool_size(settings: &Settings) -> Result<Option<usize>> {
    let requested = settings.opt::<usize>("threads")?;
    let cap = match std::env::var(THREADS_ENV) {
        Ok(v) => Some(
            v.trim()
                .parse::<usize>()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| CliError::Validation(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?,
        ),
        Err(_) => None,
    };
    if requested == Some(0) {
        return Err(CliError::Validation("`threads` must be at least 1".into()));
    }
    Ok(match (requested, cap) {
        (Some(r), Some(c)) => Some(r.min(c)),
        (r, c) => r.or(c),
    })
}

/// Runs resolved settings inside a worker pool of the configured size.
pub fn execute(settings: &Settings) -> Result<PathBuf> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = pool_size(settings)? {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Io(format!("cannot start worker pool: {e}")))?;
    pool.install(|| dispatch(settings))
}

/// Full command-line entry point; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let settings = match settings_from_args(args) {
        Ok(s) => s,
        Err(e) => {
            use clap::error::ErrorKind as K;
            let code = match e.kind() {
                K::DisplayHelp | K::DisplayVersion | K::DisplayHelpOnMissingArgumentOrSubcommand => 0,
                K::Io => 3,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(&settings) {
        Ok(manifest) => {
            println!("{}", manifest.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
