//! Flat key=value configuration files.
//!
//! Keys mirror the long flag names exactly (`samples-det=20000`), `#`
//! starts a comment, and blank lines are skipped. One file may carry keys
//! for several subcommands — each command reads only the keys it
//! understands — but keys outside the shared vocabulary are rejected
//! outright, so a typo fails loudly instead of silently falling back to a
//! default.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

/// Union of the keys any subcommand understands.
const KNOWN_KEYS: &[&str] = &[
    "seed",
    "out",
    "data",
    "n",
    "d",
    "kernel",
    "lengthscale",
    "signal-variance",
    "noise-variance",
    "support-radius",
    "spacing",
    "T",
    "t0-policy",
    "clamp-policy",
    "samples-det",
    "samples-fit",
    "with-oracle",
    "probes",
    "taylor-degree",
    "chebyshev-degree",
    "timing",
    "evaluator",
    "grid-lengthscale",
    "grid-signal-variance",
    "grid-noise-variance",
    "max-steps",
    "sizes",
    "repetitions",
    "delta-fraction",
];

/// Parsed configuration file. Values stay as strings until a command asks
/// for them under a concrete type, so the same key vocabulary serves every
/// subcommand.
#[derive(Debug, Default)]
pub struct ConfigFile {
    entries: HashMap<String, String>,
}

/// Failure to obtain a configuration: unreadable files are data problems,
/// malformed content is a usage problem, and the caller maps them to
/// different exit codes.
#[derive(Debug)]
pub enum LoadError {
    Io(std::io::Error),
    Malformed(String),
}

impl ConfigFile {
    /// The no-file configuration: every lookup misses.
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn load(path: &Path) -> Result<Self, LoadError> {
        let text = fs::read_to_string(path).map_err(LoadError::Io)?;
        Self::parse(&text).map_err(LoadError::Malformed)
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut entries = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(format!(
                    "config line {}: expected key=value, got {raw:?}",
                    idx + 1
                ));
            };
            let key = key.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(format!("config line {}: unknown key '{key}'", idx + 1));
            }
            if entries
                .insert(key.to_string(), value.trim().to_string())
                .is_some()
            {
                return Err(format!("config line {}: duplicate key '{key}'", idx + 1));
            }
        }
        Ok(Self { entries })
    }

    /// Looks up `key` and parses it as `T`; absent keys are `Ok(None)`.
    pub fn get_parsed<T>(&self, key: &str) -> Result<Option<T>, String>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|e| format!("config key '{key}': {e} (value {raw:?})")),
        }
    }

    /// Boolean keys accept true/false/1/0; absence means false, matching a
    /// command-line flag that was not given.
    pub fn get_flag(&self, key: &str) -> Result<bool, String> {
        match self.entries.get(key).map(String::as_str) {
            None => Ok(false),
            Some("true") | Some("1") => Ok(true),
            Some("false") | Some("0") => Ok(false),
            Some(other) => Err(format!(
                "config key '{key}': expected true or false, got {other:?}"
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_values_comments_and_blanks() {
        let file = ConfigFile::parse(
            "# experiment defaults\n\
             seed = 42\n\
             \n\
             samples-det=20000\n\
             kernel=rbf\n",
        )
        .unwrap();
        assert_eq!(file.get_parsed::<u64>("seed").unwrap(), Some(42));
        assert_eq!(file.get_parsed::<u64>("samples-det").unwrap(), Some(20000));
        assert_eq!(
            file.get_parsed::<String>("kernel").unwrap().as_deref(),
            Some("rbf")
        );
        assert_eq!(file.get_parsed::<u64>("samples-fit").unwrap(), None);
    }

    #[test]
    fn rejects_unknown_and_duplicate_keys() {
        let err = ConfigFile::parse("sead=42\n").unwrap_err();
        assert!(err.contains("unknown key 'sead'"), "{err}");
        let err = ConfigFile::parse("seed=1\nseed=2\n").unwrap_err();
        assert!(err.contains("duplicate key 'seed'"), "{err}");
    }

    #[test]
    fn rejects_lines_without_separator() {
        let err = ConfigFile::parse("seed\n").unwrap_err();
        assert!(err.contains("expected key=value"), "{err}");
    }

    #[test]
    fn bad_typed_value_names_the_key() {
        let file = ConfigFile::parse("seed=abc\n").unwrap();
        let err = file.get_parsed::<u64>("seed").unwrap_err();
        assert!(err.contains("config key 'seed'"), "{err}");
    }

    #[test]
    fn flags_accept_the_four_spellings() {
        let file = ConfigFile::parse("with-oracle=true\ntiming=0\n").unwrap();
        assert!(file.get_flag("with-oracle").unwrap());
        assert!(!file.get_flag("timing").unwrap());
        // An absent flag key reads as false, like a flag that was not given.
        assert!(!ConfigFile::empty().get_flag("timing").unwrap());
        let bad = ConfigFile::parse("timing=maybe\n").unwrap();
        assert!(bad.get_flag("timing").is_err());
    }
}
