//! Precedence chain: built-in defaults, then the optional key=value file,
//! then command-line flags.

use std::fmt::Write as _;
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches};

use crate::Cli;

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_DIVERGENCE: u8 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_DATA,
            message: message.into(),
        }
    }

    pub fn exit(self) -> ExitCode {
        if !self.message.is_empty() {
            eprintln!("error: {}", self.message);
        }
        ExitCode::from(self.code)
    }
}

impl From<rwtn_core::Error> for CliError {
    fn from(e: rwtn_core::Error) -> Self {
        use rwtn_core::Error as E;
        let code = match &e {
            E::Config(_) | E::Infeasible(_) => EXIT_USAGE,
            E::Divergence { .. } | E::NotConverged { .. } | E::Singular | E::ZeroSpectralRadius => EXIT_DIVERGENCE,
            _ => EXIT_DATA,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::data(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::data(e.to_string())
    }
}

/// `key=value` lines; `#` starts a comment.
pub fn parse_config_file(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("config line {}: expected key=value", i + 1)))?;
        let k = k.trim().trim_start_matches("--").replace('_', "-");
        out.push((k, v.trim().to_string()));
    }
    Ok(out)
}

fn config_path(raw: &[String]) -> Option<String> {
    let mut it = raw.iter().skip(1);
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(p.to_string());
        }
    }
    None
}

fn user_gave(raw: &[String], names: &[String]) -> bool {
    raw.iter().skip(1).any(|a| {
        names
            .iter()
            .any(|n| a == &format!("--{n}") || a.starts_with(&format!("--{n}=")))
    })
}

/// Parses the command line, splicing in config-file entries, and renders the
/// effective configuration with the source of every value.
pub fn parse(raw: Vec<String>) -> Result<(Cli, String), CliError> {
    let root = Cli::command().mut_subcommands(|s| s.args_override_self(true));
    let sub_names: Vec<String> = root.get_subcommands().map(|s| s.get_name().to_string()).collect();
    let sub_at = raw.iter().skip(1).position(|a| sub_names.contains(a)).map(|i| i + 1);

    let entries = match config_path(&raw) {
        Some(p) => {
            let text = std::fs::read_to_string(&p).map_err(|e| CliError::usage(format!("config file {p}: {e}")))?;
            parse_config_file(&text)?
        }
        None => Vec::new(),
    };

    let mut args = raw.clone();
    if let (Some(at), false) = (sub_at, entries.is_empty()) {
        let sub = root.find_subcommand(&raw[at]).expect("known subcommand");
        let names_of = |args: Vec<&clap::Arg>| -> Vec<String> {
            args.into_iter()
                .filter(|a| a.get_id() != "config")
                .flat_map(|a| {
                    let mut names: Vec<String> = a.get_long().map(str::to_string).into_iter().collect();
                    names.extend(a.get_all_aliases().unwrap_or_default().into_iter().map(str::to_string));
                    names
                })
                .collect()
        };
        let global = names_of(root.get_arguments().collect());
        let local = names_of(sub.get_arguments().filter(|a| !a.is_global_set()).collect());
        // globals go first so that flags anywhere on the line still win
        let (mut before, mut after) = (Vec::new(), Vec::new());
        for (k, v) in &entries {
            if global.contains(k) {
                before.push(format!("--{k}={v}"));
            } else if local.contains(k) {
                after.push(format!("--{k}={v}"));
            } else {
                return Err(CliError::usage(format!("config key `{k}` is not an option of `{}`", raw[at])));
            }
        }
        args.splice(at + 1..at + 1, after);
        args.splice(1..1, before);
    }

    let matches = match root.clone().try_get_matches_from(&args) {
        Ok(m) => m,
        Err(e) => {
            let code = e.exit_code() as u8;
            let _ = e.print();
            return Err(CliError {
                code: if code == 0 { 0 } else { EXIT_USAGE },
                message: String::new(),
            });
        }
    };
    let cli = Cli::from_arg_matches(&matches).map_err(|e| CliError::usage(e.to_string()))?;

    let mut report = String::new();
    if let Some((name, sub_m)) = matches.subcommand() {
        let _ = writeln!(report, "rwtn {name}: effective configuration");
        let sub = root.find_subcommand(name).expect("matched subcommand");
        for a in root.get_arguments().chain(sub.get_arguments()) {
            let id = a.get_id().as_str();
            if id == "help" || id == "version" {
                continue;
            }
            let Some(long) = a.get_long() else { continue };
            let value = match sub_m.get_raw(id) {
                Some(mut v) => v.next().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
                None => continue,
            };
            let mut names = vec![long.to_string()];
            names.extend(a.get_all_aliases().unwrap_or_default().into_iter().map(str::to_string));
            let source = if user_gave(&raw, &names) {
                "flag"
            } else if entries.iter().any(|(k, _)| names.contains(k)) {
                "config"
            } else {
                "default"
            };
            let _ = writeln!(report, "  {long} = {value} [{source}]");
        }
    }
    Ok((cli, report))
}
