//! Experiment settings shared by the config file, the command-line flags
//! and the config echo written at the top of every CSV.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Prefix of the first line of every CSV written by the runner.
pub const ECHO_PREFIX: &str = "# config: ";

/// Every knob a command can read. Absent fields fall back to the next
/// source in precedence order: flags, then the config file, then defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(rename = "S", skip_serializing_if = "Option::is_none")]
    pub alphabet: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dist: Option<String>,
    /// The realized mass vector of a randomly generated data law.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dist_mass: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<bool>,
    /// `h,delta,K`
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimator: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nodes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_mode: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regime: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(rename = "C", skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa_sq: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constant_factor: Option<f64>,
    #[serde(rename = "T", skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hs: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub span: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gammas: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deltas: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizons: Option<Vec<f64>>,
    /// Output file; never echoed so the echo is independent of where the
    /// output lands.
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing)]
    pub out_dir: Option<PathBuf>,
    /// Worker threads; never echoed because it cannot change results.
    #[serde(skip_serializing)]
    pub jobs: Option<usize>,
}

macro_rules! overlay {
    ($hi:ident, $lo:ident, $($f:ident),* $(,)?) => {
        Settings { $($f: $hi.$f.or($lo.$f)),* }
    };
}

impl Settings {
    /// Fields set here win; the rest come from `lower`.
    pub fn over(self, lower: Settings) -> Settings {
        let hi = self;
        let lo = lower;
        overlay!(
            hi, lo, command, alphabet, d, dist, dist_mass, times, t, state, bounds, grid,
            estimator, nodes, seed, trials, lambda_mode, regime, eps, delta, c, kappa_sq,
            eps_score, constant_factor, horizon, h, hs, span, gammas, deltas, horizons, out,
            out_dir, jobs,
        )
    }

    pub fn from_json(text: &str, context: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|source| Error::Json {
            context: context.to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading config {}", path.display()), e))?;
        Self::from_json(&text, &format!("parsing config {}", path.display()))
    }

    /// The single-line JSON written after [`ECHO_PREFIX`].
    pub fn echo(&self) -> String {
        serde_json::to_string(self).expect("settings always serialize")
    }
}

/// Recovers the settings echoed in the first line of a CSV.
pub fn settings_from_csv(text: &str) -> Result<Settings> {
    let first = text.lines().next().unwrap_or_default();
    let json = first
        .strip_prefix(ECHO_PREFIX)
        .ok_or_else(|| Error::config("echo", "first line is not a config echo"))?;
    Settings::from_json(json, "parsing config echo")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file = Settings {
            alphabet: Some(3),
            d: Some(2),
            nodes: Some(4),
            ..Default::default()
        };
        let flags = Settings {
            nodes: Some(16),
            ..Default::default()
        };
        let merged = flags.over(file);
        assert_eq!(merged.alphabet, Some(3));
        assert_eq!(merged.nodes, Some(16));
    }

    #[test]
    fn echo_roundtrip_skips_outputs_and_jobs() {
        let s = Settings {
            command: Some("forward".into()),
            alphabet: Some(2),
            times: Some(vec![0.1, 1.0 / 3.0]),
            c: Some(2.5),
            out: Some("x.csv".into()),
            jobs: Some(4),
            ..Default::default()
        };
        let line = format!("{ECHO_PREFIX}{}\nt,kl\n", s.echo());
        assert!(!line.contains("x.csv"));
        assert!(!line.contains("jobs"));
        let back = settings_from_csv(&line).unwrap();
        assert_eq!(back, Settings { out: None, jobs: None, ..s });
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(Settings::from_json(r#"{"S": 2, "bogus": 1}"#, "test").is_err());
        assert!(settings_from_csv("t,kl\n").is_err());
    }
}
