//! `key=value` configuration files. Each key names a long flag of the chosen subcommand;
//! values are spliced in ahead of the command-line arguments so that flags win.

use std::collections::HashSet;
use std::ffi::OsString;
use std::path::Path;

use anyhow::{bail, Context, Result};

/// Parsed entries in file order. `#` starts a comment; blank lines are skipped.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut entries = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("config line {}: expected key=value, found {raw:?}", n + 1);
        };
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        if key.is_empty() {
            bail!("config line {}: empty key", n + 1);
        }
        entries.push((key, value.trim().to_owned()));
    }
    Ok(entries)
}

/// Finds `--config PATH` or `--config=PATH` and returns it with the remaining arguments.
pub fn take_config_flag(args: Vec<OsString>) -> Result<(Option<OsString>, Vec<OsString>)> {
    let mut rest = Vec::with_capacity(args.len());
    let mut path = None;
    let mut iter = args.into_iter();
    while let Some(arg) = iter.next() {
        match arg.to_str() {
            Some("--config") => match iter.next() {
                Some(p) => path = Some(p),
                None => bail!("--config requires a path"),
            },
            Some(s) if s.starts_with("--config=") => path = Some(OsString::from(&s["--config=".len()..])),
            _ => rest.push(arg),
        }
    }
    Ok((path, rest))
}

/// Rewrites `[bin, sub, args...]` as `[bin, sub, config args..., args...]`. Keys the
/// subcommand does not accept are rejected unless `known_elsewhere` lists them, in which
/// case they are ignored so one file can serve several subcommands.
pub fn splice(
    args: Vec<OsString>,
    entries: &[(String, String)],
    accepted: &HashSet<String>,
    flags: &HashSet<String>,
    known_elsewhere: &HashSet<String>,
) -> Result<Vec<OsString>> {
    let mut injected = Vec::new();
    for (key, value) in entries {
        if !accepted.contains(key) {
            if known_elsewhere.contains(key) {
                log::debug!("config key {key:?} does not apply to this subcommand");
                continue;
            }
            bail!("unknown config key {key:?}");
        }
        if flags.contains(key) {
            match value.to_ascii_lowercase().as_str() {
                "true" | "yes" | "1" => injected.push(OsString::from(format!("--{key}"))),
                "false" | "no" | "0" => {}
                other => bail!("config key {key:?} is a switch; expected true or false, found {other:?}"),
            }
        } else {
            injected.push(OsString::from(format!("--{key}={value}")));
        }
    }
    let mut out = Vec::with_capacity(args.len() + injected.len());
    let mut iter = args.into_iter();
    out.extend(iter.by_ref().take(2));
    out.extend(injected);
    out.extend(iter);
    Ok(out)
}

pub fn read_config(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    parse_config(&text).with_context(|| format!("in config {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn parses_entries_and_comments() {
        let e = parse_config("# c\nloss = logistic\n\n--seed=3 # trailing\nhold_out=0.7\n").unwrap();
        assert_eq!(e, vec![("loss".into(), "logistic".into()), ("seed".into(), "3".into()), ("hold-out".into(), "0.7".into())]);
        assert!(parse_config("novalue\n").unwrap_err().to_string().contains("line 1"));
    }

    #[test]
    fn extracts_config_flag() {
        let (p, rest) = take_config_flag(os(&["sgm", "train", "--config", "a.cfg", "--seed", "1"])).unwrap();
        assert_eq!(p, Some("a.cfg".into()));
        assert_eq!(rest, os(&["sgm", "train", "--seed", "1"]));
        let (p, _) = take_config_flag(os(&["sgm", "--config=b", "parse"])).unwrap();
        assert_eq!(p, Some("b".into()));
    }

    #[test]
    fn splices_before_command_line() {
        let accepted: HashSet<String> = ["seed", "scale", "loss"].map(String::from).into();
        let flags: HashSet<String> = ["scale"].map(String::from).into();
        let elsewhere: HashSet<String> = ["grid"].map(String::from).into();
        let entries = vec![("seed".into(), "4".into()), ("scale".into(), "true".into()), ("grid".into(), "x".into())];
        let out = splice(os(&["sgm", "train", "--seed", "9"]), &entries, &accepted, &flags, &elsewhere).unwrap();
        assert_eq!(out, os(&["sgm", "train", "--seed=4", "--scale", "--seed", "9"]));
        let bad = vec![("bogus".into(), "1".into())];
        assert!(splice(os(&["sgm", "train"]), &bad, &accepted, &flags, &elsewhere).is_err());
    }
}
