mod args;
mod commands;
mod failure;
mod manifest;

use args::{Cli, Command};
use clap::parser::ValueSource;
use clap::{ArgAction, ArgMatches, CommandFactory, FromArgMatches};
use failure::CliError;
use std::path::Path;
use std::process::ExitCode;

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    match run(argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn parse_matches(argv: &[String]) -> Result<ArgMatches, CliError> {
    Cli::command().try_get_matches_from(argv).map_err(|e| {
        use clap::error::ErrorKind as K;
        if matches!(
            e.kind(),
            K::DisplayHelp | K::DisplayVersion | K::DisplayHelpOnMissingArgumentOrSubcommand
        ) {
            e.exit();
        }
        let first = e.to_string();
        let line = first.lines().next().unwrap_or("invalid arguments");
        CliError::usage(line.trim_start_matches("error: "))
    })
}

/// Tokens for the file entries that the command line did not set.
fn file_tokens(path: &Path, top: &ArgMatches) -> Result<Vec<String>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let pairs = manifest::parse_pairs(&text, path)?;
    let root = Cli::command();
    let (name, sub) = top.subcommand().ok_or_else(|| CliError::usage("missing subcommand"))?;
    let sub_cmd = root.find_subcommand(name).expect("subcommand comes from the parser");

    let mut tokens = Vec::new();
    for (key, value) in pairs {
        let id = key.replace('-', "_");
        if id == "config" {
            return Err(CliError::validation("a config file cannot name another config file"));
        }
        let (arg, matches) = match sub_cmd.get_arguments().find(|a| a.get_id() == id.as_str()) {
            Some(a) => (a, sub),
            None => match root.get_arguments().find(|a| a.get_id() == id.as_str()) {
                Some(a) => (a, top),
                None => {
                    return Err(CliError::validation(format!(
                        "{}: unknown key `{key}` for `{name}`",
                        path.display()
                    )))
                }
            },
        };
        if matches.value_source(&id) == Some(ValueSource::CommandLine) {
            continue;
        }
        let Some(long) = arg.get_long() else {
            tokens.extend(value.split_whitespace().map(str::to_string));
            continue;
        };
        let flag = format!("--{long}");
        match arg.get_action() {
            ArgAction::SetTrue => match value.as_str() {
                "true" | "1" | "yes" => tokens.push(flag),
                "false" | "0" | "no" => {}
                other => {
                    return Err(CliError::validation(format!(
                        "`{key}` expects true or false, got `{other}`"
                    )))
                }
            },
            ArgAction::Count => {
                let n: usize = value
                    .parse()
                    .map_err(|_| CliError::validation(format!("`{key}` expects a count, got `{value}`")))?;
                tokens.extend(std::iter::repeat_n(flag, n));
            }
            _ => {
                tokens.push(flag);
                tokens.push(value);
            }
        }
    }
    Ok(tokens)
}

fn run(mut argv: Vec<String>) -> Result<(), CliError> {
    let top = parse_matches(&argv)?;
    if let Some(path) = top.get_one::<std::path::PathBuf>("config") {
        let extra = file_tokens(path, &top)?;
        argv.extend(extra);
    }
    let matches = parse_matches(&argv)?;
    let cli = Cli::from_arg_matches(&matches).map_err(|e| CliError::usage(e.to_string()))?;

    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(CliError::validation("--workers must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::validation(format!("cannot start worker pool: {e}")))?;
    }

    match &cli.command {
        Command::Fit(a) => commands::fit(a, cli.verbose),
        Command::Predict(a) => commands::predict_cmd(a),
        Command::Cv(a) => commands::cv(a, cli.verbose),
        Command::Theory(a) => commands::theory(a),
        Command::Simulate(a) => commands::simulate(a, cli.verbose),
        Command::KernelInfo(a) => commands::kernel_info(a),
    }
}
