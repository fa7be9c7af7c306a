//! `--config FILE`: TOML keys are turned into command-line flags and placed
//! before the user's own flags, so anything given explicitly wins.
//!
//! Top-level keys apply to every subcommand that has a flag of that name;
//! a `[subcommand]` table applies to that subcommand only.
//!
//! ```toml
//! dim = 100
//! subsample_t = 1e-4
//!
//! [train-anchored]
//! mode = "full"
//! restarts = 3
//! ```

use anyhow::{bail, Context, Result};
use clap::{Arg, Command, CommandFactory};
use toml::{Table, Value};

use crate::Cli;

const THREADS_ENV: &str = "ANCHORVEC_THREADS";

pub(crate) fn expand(mut argv: Vec<String>) -> Result<Vec<String>> {
    let Some(path) = config_path(&argv)? else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading config {path}"))?;
    let table: Table = text.parse().with_context(|| format!("parsing config {path}"))?;

    let root = Cli::command();
    let sub_pos = argv
        .iter()
        .enumerate()
        .skip(1)
        .take_while(|(_, a)| *a != "--")
        .find(|(_, a)| root.find_subcommand(a.as_str()).is_some())
        .map(|(i, _)| i);
    let sub = sub_pos.and_then(|i| root.find_subcommand(&argv[i]));

    let mut global = Vec::new();
    let mut local = Vec::new();
    let mut sections = Vec::new();
    for (key, value) in &table {
        if let Value::Table(section) = value {
            let Some(cmd) = root.find_subcommand(key) else {
                bail!("config: unknown section [{key}]");
            };
            for k in section.keys() {
                if find(&root, k).is_none() && find(cmd, k).is_none() {
                    bail!("config: [{key}] has no option {k:?}");
                }
            }
            if sub.is_some_and(|s| s.get_name() == key) {
                sections.push(section);
            }
            continue;
        }
        place(&root, sub, key, value, &mut global, &mut local)?;
    }
    for section in sections {
        for (k, v) in section {
            place(&root, sub, k, v, &mut global, &mut local)?;
        }
    }

    let at = sub_pos.map_or(argv.len(), |i| i + 1);
    argv.splice(at..at, local);
    argv.splice(1..1, global);
    Ok(argv)
}

fn place(
    root: &Command,
    sub: Option<&Command>,
    key: &str,
    value: &Value,
    global: &mut Vec<String>,
    local: &mut Vec<String>,
) -> Result<()> {
    if key == "config" {
        bail!("config: a config file cannot name another one");
    }
    if key == "threads" && std::env::var_os(THREADS_ENV).is_some() {
        return Ok(());
    }
    if let Some(arg) = find(root, key) {
        global.extend(flags(arg, key, value)?);
    } else if let Some(arg) = sub.and_then(|s| find(s, key)) {
        local.extend(flags(arg, key, value)?);
    } else if !root.get_subcommands().any(|s| find(s, key).is_some()) {
        bail!("config: unknown option {key:?}");
    }
    Ok(())
}

fn find<'c>(cmd: &'c Command, key: &str) -> Option<&'c Arg> {
    let long = key.replace('_', "-");
    cmd.get_arguments().find(|a| a.get_long() == Some(long.as_str()))
}

fn flags(arg: &Arg, key: &str, value: &Value) -> Result<Vec<String>> {
    let long = format!("--{}", arg.get_long().expect("looked up by long name"));
    if !arg.get_action().takes_values() {
        return match value {
            Value::Boolean(true) => Ok(vec![long]),
            Value::Boolean(false) => Ok(Vec::new()),
            _ => bail!("config: {key} is a switch and takes true or false"),
        };
    }
    let scalar = |v: &Value| -> Result<String> {
        Ok(match v {
            Value::String(s) => s.clone(),
            Value::Integer(i) => i.to_string(),
            Value::Float(f) => f.to_string(),
            Value::Boolean(b) => b.to_string(),
            _ => bail!("config: unsupported value for {key}"),
        })
    };
    match value {
        Value::Array(items) => items.iter().map(|v| Ok([long.clone(), scalar(v)?])).collect::<Result<Vec<_>>>().map(|v| v.concat()),
        v => Ok(vec![long, scalar(v)?]),
    }
}

fn config_path(argv: &[String]) -> Result<Option<String>> {
    let mut found = None;
    let mut args = argv.iter().skip(1).take_while(|a| *a != "--");
    while let Some(a) = args.next() {
        if a == "--config" {
            match args.next() {
                Some(v) => found = Some(v.clone()),
                None => bail!("--config needs a file"),
            }
        } else if let Some(v) = a.strip_prefix("--config=") {
            found = Some(v.to_owned());
        }
    }
    Ok(found)
}
