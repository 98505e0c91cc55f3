mod args;
mod commands;
mod config;

use std::collections::HashSet;
use std::process::ExitCode;

use anyhow::Result;
use clap::{CommandFactory, Parser};

use crate::args::Cli;

/// Long names of a subcommand's options, and the subset that are switches.
fn option_names(cmd: &clap::Command) -> (HashSet<String>, HashSet<String>) {
    let mut all = HashSet::new();
    let mut switches = HashSet::new();
    for arg in cmd.get_arguments() {
        if let Some(long) = arg.get_long() {
            all.insert(long.to_owned());
            if !arg.get_action().takes_values() {
                switches.insert(long.to_owned());
            }
        }
    }
    (all, switches)
}

fn parse_args() -> Result<Cli> {
    let (config, args) = config::take_config_flag(std::env::args_os().collect())?;
    let Some(path) = config else {
        return Ok(Cli::parse_from(args));
    };
    let entries = config::read_config(path.as_ref())?;
    let root = Cli::command();
    let sub = args.get(1).and_then(|s| s.to_str()).and_then(|name| root.find_subcommand(name));
    let Some(sub) = sub else {
        return Ok(Cli::parse_from(args));
    };
    let (accepted, switches) = option_names(sub);
    let everywhere: HashSet<String> = root.get_subcommands().flat_map(|c| option_names(c).0).collect();
    Ok(Cli::parse_from(config::splice(args, &entries, &accepted, &switches, &everywhere)?))
}

/// The error chain joined by `: `, skipping causes already quoted by their parent.
fn describe(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain() {
        let msg = cause.to_string();
        if !out.contains(&msg) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&msg);
        }
    }
    out
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match parse_args().and_then(|cli| commands::run(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", describe(&err));
            ExitCode::FAILURE
        }
    }
}
