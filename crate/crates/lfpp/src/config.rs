//! Flat `key=value` campaign files.
//!
//! Each key becomes the flag `--key` (underscores turn into dashes), with two
//! renames: `eps_grid` is `--eps` and `observable` names the command. Blank
//! lines and lines starting with `#` are ignored. Flags on the command line
//! override values from the file.

use std::ffi::OsString;
use std::path::Path;

use anyhow::{bail, Context, Result};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConfigFile {
    pub entries: Vec<(String, String)>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: Vec<(String, String)> = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("line {}: expected key=value, got {line:?}", k + 1);
            };
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                bail!("line {}: bad key {key:?}", k + 1);
            }
            if entries.iter().any(|(e, _)| e == key) {
                bail!("line {}: duplicate key {key:?}", k + 1);
            }
            entries.push((key.to_string(), value.to_string()));
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config file {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config file {}", path.display()))
    }

    pub fn observable(&self) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == "observable").map(|(_, v)| v.as_str())
    }

    /// Flag tokens for every key except `observable`.
    pub fn flags(&self) -> Vec<OsString> {
        let mut out = Vec::new();
        for (k, v) in &self.entries {
            let flag = match k.as_str() {
                "observable" => continue,
                "eps_grid" => "eps".to_string(),
                "L" => "L".to_string(),
                other => other.replace('_', "-"),
            };
            out.push(OsString::from(format!("--{flag}")));
            out.push(OsString::from(v));
        }
        out
    }
}

/// Splices a config file into `argv`: `--config PATH` is removed and the
/// file's flags are inserted right after the command name, ahead of the
/// user's own flags so those win. With no command on the line, the file's
/// `observable` supplies it. `commands` lists the valid command names.
pub fn expand_argv(argv: Vec<OsString>, commands: &[&str]) -> Result<Vec<OsString>> {
    let mut rest = Vec::with_capacity(argv.len());
    let mut path = None;
    let mut it = argv.into_iter();
    let prog = it.next().unwrap_or_else(|| OsString::from("lfpp"));
    while let Some(tok) = it.next() {
        let s = tok.to_string_lossy();
        if s == "--config" {
            path = Some(it.next().context("--config needs a path")?);
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(OsString::from(p));
        } else {
            rest.push(tok);
        }
    }
    let Some(path) = path else {
        let mut out = vec![prog];
        out.extend(rest);
        return Ok(out);
    };
    let file = ConfigFile::load(Path::new(&path))?;

    // The command is the first bare token naming one; only global options
    // may precede it, and those are also accepted after it.
    let (head, command, tail) = match rest.iter().position(|t| commands.contains(&t.to_string_lossy().as_ref())) {
        Some(i) => {
            let command = rest[i].to_string_lossy().into_owned();
            if let Some(obs) = file.observable() {
                if obs != command {
                    bail!("config file names observable {obs:?} but the command is {command:?}");
                }
            }
            (&rest[..i], command, &rest[i + 1..])
        }
        None => {
            let obs = file.observable().context("no command given and the config file has no observable key")?;
            (&rest[..0], obs.to_string(), &rest[..])
        }
    };
    let mut out = vec![prog];
    out.extend(head.iter().cloned());
    out.push(OsString::from(command));
    out.extend(file.flags());
    out.extend(tail.iter().cloned());
    Ok(out)
}
