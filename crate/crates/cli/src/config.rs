//! `key = value` run configuration files. Entries are spliced into the
//! argument list right after the subcommand, ahead of the user's own
//! flags, so anything given on the command line wins.

use std::ffi::OsString;
use std::fs;

use clap::CommandFactory;

use crate::args::Cli;
use crate::CliError;

const SUBCOMMANDS: [&str; 4] = ["fit", "simulate", "benchmark", "stability"];

/// Removes `--config FILE` from `argv` and expands the file's entries.
pub fn expand(argv: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let mut rest = Vec::with_capacity(argv.len());
    let mut path = None;
    let mut it = argv.into_iter();
    while let Some(arg) = it.next() {
        let s = arg.to_string_lossy().into_owned();
        if s == "--config" {
            let value = it
                .next()
                .ok_or_else(|| CliError::parse("--config needs a file argument"))?;
            path = Some(value.to_string_lossy().into_owned());
        } else if let Some(v) = s.strip_prefix("--config=") {
            path = Some(v.to_string());
        } else {
            rest.push(arg);
        }
    }
    let Some(path) = path else {
        return Ok(rest);
    };
    let text = fs::read_to_string(&path)
        .map_err(|e| CliError::validation(format!("cannot read config file {path}: {e}")))?;
    let Some(pos) = rest
        .iter()
        .position(|a| SUBCOMMANDS.contains(&a.to_string_lossy().as_ref()))
    else {
        return Ok(rest);
    };
    let sub = rest[pos].to_string_lossy().into_owned();
    let injected = config_args(&text, &sub, &path)?;
    rest.splice(pos + 1..pos + 1, injected);
    Ok(rest)
}

fn config_args(text: &str, sub: &str, path: &str) -> Result<Vec<OsString>, CliError> {
    let root = Cli::command();
    let cmd = root
        .find_subcommand(sub)
        .ok_or_else(|| CliError::parse(format!("unknown subcommand {sub}")))?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::parse(format!("{path}:{}: expected key = value", lineno + 1))
        })?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        let arg = cmd
            .get_arguments()
            .chain(root.get_arguments())
            .find(|a| a.get_long() == Some(key.as_str()))
            .ok_or_else(|| {
                CliError::parse(format!("{path}:{}: unknown key '{key}' for {sub}", lineno + 1))
            })?;
        if arg.get_action().takes_values() {
            out.push(OsString::from(format!("--{key}")));
            let multi = arg.get_num_args().is_some_and(|r| r.max_values() > 1);
            if multi {
                out.extend(value.split_whitespace().map(OsString::from));
            } else {
                out.push(OsString::from(value));
            }
        } else {
            match value {
                "true" | "1" | "yes" => out.push(OsString::from(format!("--{key}"))),
                "false" | "0" | "no" => {}
                other => {
                    return Err(CliError::parse(format!(
                        "{path}:{}: '{key}' expects true or false, got '{other}'",
                        lineno + 1
                    )))
                }
            }
        }
    }
    Ok(out)
}
