//! `key = value` config files merged under command-line flags.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use serrin_core::io::parse_key_values;

use crate::CliError;

/// Config entries not yet claimed by a command. Flags win over file values;
/// whatever is left after a command has taken its keys is rejected.
#[derive(Debug, Default)]
pub struct Resolver {
    entries: BTreeMap<String, String>,
}

impl Resolver {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("cannot read config {}: {e}", path.display())))?;
        let kv =
            parse_key_values(&text).map_err(|e| CliError::validation(format!("config {}: {e}", path.display())))?;
        Ok(Self { entries: kv.into_iter().collect() })
    }

    pub fn take<T>(
        &mut self,
        key: &str,
        flag: Option<T>,
        parse: impl Fn(&str) -> Result<T, String>,
    ) -> Result<Option<T>, CliError> {
        let from_file = self.entries.remove(key);
        if flag.is_some() {
            return Ok(flag);
        }
        match from_file {
            Some(v) => parse(&v).map(Some).map_err(|e| CliError::validation(format!("config key `{key}`: {e}"))),
            None => Ok(None),
        }
    }

    pub fn finish(self) -> Result<(), CliError> {
        if self.entries.is_empty() {
            return Ok(());
        }
        let keys: Vec<&str> = self.entries.keys().map(String::as_str).collect();
        Err(CliError::validation(format!("unknown config key(s) for this command: {}", keys.join(", "))))
    }
}

fn atom(s: &str) -> Result<f64, String> {
    let s = s.trim();
    match s {
        "pi" => Ok(PI),
        _ => {
            if let Some(coef) = s.strip_suffix("pi") {
                let c: f64 = coef.trim().trim_end_matches('*').parse().map_err(|_| format!("not a number: `{s}`"))?;
                return Ok(c * PI);
            }
            s.parse().map_err(|_| format!("not a number: `{s}`"))
        }
    }
}

/// A float, `pi`-multiple, or quotient of two such (`1/64`, `pi/2`).
pub fn number(s: &str) -> Result<f64, String> {
    let v = match s.split_once('/') {
        Some((a, b)) => atom(a)? / atom(b)?,
        None => atom(s)?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("not a finite number: `{s}`"))
    }
}

pub fn number_list(s: &str) -> Result<Vec<f64>, String> {
    let list: Vec<f64> = s.split(',').map(number).collect::<Result<_, _>>()?;
    if list.is_empty() {
        return Err("empty list".into());
    }
    Ok(list)
}

pub fn pair(s: &str) -> Result<[f64; 2], String> {
    match number_list(s)?.as_slice() {
        [a, b] => Ok([*a, *b]),
        other => Err(format!("expected two comma-separated numbers, got {}", other.len())),
    }
}

pub fn integer<T: std::str::FromStr>(s: &str) -> Result<T, String> {
    s.trim().parse().map_err(|_| format!("not an integer: `{s}`"))
}

pub fn string(s: &str) -> Result<String, String> {
    Ok(s.trim().to_string())
}
