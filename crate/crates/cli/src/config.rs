//! Flat `key = value` config files merged into the argument list.

use std::collections::BTreeSet;
use std::path::Path;

use anyhow::{bail, Context, Result};

/// Reads `key = value` pairs. Blank lines and lines starting with `#` are
/// skipped; keys may be written with or without the leading `--`.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("config line {}: expected `key = value`, got `{line}`", n + 1);
        };
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        if key.is_empty() {
            bail!("config line {}: empty key", n + 1);
        }
        pairs.push((key, value.trim().to_string()));
    }
    Ok(pairs)
}

fn config_path(args: &[String]) -> Option<String> {
    let mut iter = args.iter();
    while let Some(a) = iter.next() {
        if a == "--config" {
            return iter.next().cloned();
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(p.to_string());
        }
    }
    None
}

fn given_flags(args: &[String]) -> BTreeSet<String> {
    args.iter()
        .filter_map(|a| a.strip_prefix("--"))
        .map(|a| a.split('=').next().unwrap_or(a).to_string())
        .collect()
}

/// Expands `--config FILE` into extra flags. Keys already given on the
/// command line are left out, so flags always win. `true` and `false` values
/// toggle switches.
pub fn merge_config(args: Vec<String>) -> Result<Vec<String>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(Path::new(&path))
        .with_context(|| format!("reading config file {path}"))?;
    let given = given_flags(&args);
    let mut injected = Vec::new();
    for (key, value) in parse_config(&text)? {
        if key == "config" || given.contains(&key) {
            continue;
        }
        match value.as_str() {
            "true" => injected.push(format!("--{key}")),
            "false" => {}
            // A key repeated in the file yields a repeated flag.
            _ => injected.push(format!("--{key}={value}")),
        }
    }
    // Keep anything after a `--` separator positional.
    let split = args.iter().position(|a| a == "--").unwrap_or(args.len());
    let mut merged = args[..split].to_vec();
    merged.extend(injected);
    merged.extend_from_slice(&args[split..]);
    Ok(merged)
}
