//! Report file layout: every `SolveReport` field at the top level plus a
//! `config` echo of the command line.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::Result;
use serde::{Deserialize, Serialize};

use ccvar::driver::{Method, SolveReport};

/// A number, or `auto` to use the library default rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AutoOr {
    Value(f64),
    Auto(AutoTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoTag {
    Auto,
}

impl AutoOr {
    pub const AUTO: AutoOr = AutoOr::Auto(AutoTag::Auto);

    pub fn value(self) -> Option<f64> {
        match self {
            AutoOr::Value(v) => Some(v),
            AutoOr::Auto(_) => None,
        }
    }
}

impl FromStr for AutoOr {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(AutoOr::AUTO);
        }
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(AutoOr::Value(v)),
            _ => Err(format!("expected a number or \"auto\", got {s:?}")),
        }
    }
}

impl fmt::Display for AutoOr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AutoOr::Value(v) => write!(f, "{v}"),
            AutoOr::Auto(_) => f.write_str("auto"),
        }
    }
}

/// Method names accepted on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CliMethod {
    Bcp,
    /// bilevel cutting plane inside a single branch-and-bound tree
    Bcpc,
    Cp,
    Bigm,
    Oracle,
}

impl From<CliMethod> for Method {
    fn from(m: CliMethod) -> Method {
        match m {
            CliMethod::Bcp => Method::Bcp,
            CliMethod::Bcpc => Method::BcpSingleTree,
            CliMethod::Cp => Method::Cp,
            CliMethod::Bigm => Method::Bigm,
            CliMethod::Oracle => Method::Oracle,
        }
    }
}

impl fmt::Display for CliMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CliMethod::Bcp => "bcp",
            CliMethod::Bcpc => "bcpc",
            CliMethod::Cp => "cp",
            CliMethod::Bigm => "bigm",
            CliMethod::Oracle => "oracle",
        };
        f.write_str(s)
    }
}

/// Settings of one `solve` invocation, as given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub method: CliMethod,
    pub k: usize,
    pub gamma: AutoOr,
    pub beta: f64,
    pub eps: f64,
    pub delta: f64,
    pub time_limit_sec: f64,
    pub mu_bar: AutoOr,
    pub scenarios: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    #[serde(flatten)]
    pub report: SolveReport,
    pub config: RunConfig,
}

impl ReportFile {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    #[cfg(test)]
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// `method obj gap% time cuts nodes`.
    pub fn summary_line(&self) -> String {
        let r = &self.report;
        let num = |v: Option<f64>, prec: usize| v.map_or_else(|| "-".to_string(), |v| format!("{v:.prec$}"));
        format!(
            "{} {} {}% {:.3} {} {}",
            self.config.method,
            num(r.obj, 6),
            // round-off can leave the bounds crossed by ~1e-10; show that as 0
            num(r.gap_pct.map(|g| g.max(0.0)), 4),
            r.time_sec,
            r.cuts,
            r.nodes
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auto_or_parses_and_serializes() {
        assert_eq!("auto".parse::<AutoOr>().unwrap(), AutoOr::AUTO);
        assert_eq!("2.5".parse::<AutoOr>().unwrap(), AutoOr::Value(2.5));
        assert!("x".parse::<AutoOr>().is_err());
        assert!("inf".parse::<AutoOr>().is_err());
        assert_eq!(serde_json::to_string(&AutoOr::AUTO).unwrap(), "\"auto\"");
        assert_eq!(serde_json::from_str::<AutoOr>("0.1").unwrap(), AutoOr::Value(0.1));
        assert_eq!(serde_json::from_str::<AutoOr>("\"auto\"").unwrap(), AutoOr::AUTO);
    }

    #[test]
    fn cli_names_map_to_methods() {
        assert_eq!(Method::from(CliMethod::Bcpc), Method::BcpSingleTree);
        assert_eq!(CliMethod::Bigm.to_string(), "bigm");
    }

    #[test]
    fn report_file_round_trips_exactly() {
        use ccvar::driver::{prepare_instance, solve, SolverConfig};
        let inst = prepare_instance(vec![vec![0.1, 0.2], vec![-0.3, 0.05]], vec![0.5, 0.5], 1, 0.9, None, None).unwrap();
        for method in [CliMethod::Bcp, CliMethod::Bigm] {
            let report = solve(&inst, &SolverConfig::default(), method.into()).unwrap();
            let file = ReportFile {
                report,
                config: RunConfig {
                    method,
                    k: 1,
                    gamma: AutoOr::AUTO,
                    beta: 0.9,
                    eps: 1e-5,
                    delta: 1e-5,
                    time_limit_sec: 3600.0,
                    mu_bar: AutoOr::Value(-0.1),
                    scenarios: PathBuf::from("s.txt"),
                },
            };
            assert_eq!(ReportFile::from_json(&file.to_json().unwrap()).unwrap(), file);
        }
    }
}
