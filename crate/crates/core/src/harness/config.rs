//! Experiment configuration files.
//!
//! A config is TOML with four sections. Keys not listed here are rejected.
//!
//! ```toml
//! [topology]
//! kind = "ring"          # ring | complete | grid | erdos_renyi
//! n = 25
//!
//! [problem]
//! kind = "quadratic"     # quadratic | logistic | dataset
//! d = 20
//! mu = 0.1
//! big_l = 10.0
//! target_delta = 1.0
//!
//! [algorithm]
//! kind = "spdo"          # gradient_tracking | pdo | spdo | acc_spdo
//! lambda = "auto"
//! M = "auto"
//!
//! [run]
//! rounds = 200
//! ```
//!
//! An optional `[sweep]` section (`axis`, `values`) gives the default axis
//! for the `sweep` command.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A parameter that is either given or derived from problem constants.
#[derive(Clone, Copy, Debug, PartialEq, Default, Deserialize, Serialize)]
#[serde(try_from = "AutoRepr<T>", into = "AutoRepr<T>")]
#[serde(bound(deserialize = "T: Deserialize<'de>", serialize = "T: Serialize + Clone"))]
pub enum Auto<T> {
    #[default]
    Auto,
    Value(T),
}

impl<T: Copy> Auto<T> {
    pub fn or_else(self, f: impl FnOnce() -> Result<T>) -> Result<T> {
        match self {
            Auto::Auto => f(),
            Auto::Value(v) => Ok(v),
        }
    }
}

#[derive(Deserialize, Serialize)]
#[serde(untagged)]
enum AutoRepr<T> {
    Value(T),
    Word(String),
}

impl<T> TryFrom<AutoRepr<T>> for Auto<T> {
    type Error = String;

    fn try_from(r: AutoRepr<T>) -> Result<Self, String> {
        match r {
            AutoRepr::Value(v) => Ok(Auto::Value(v)),
            AutoRepr::Word(w) if w == "auto" => Ok(Auto::Auto),
            AutoRepr::Word(w) => Err(format!("expected a number or \"auto\", found \"{w}\"")),
        }
    }
}

impl<T> From<Auto<T>> for AutoRepr<T> {
    fn from(a: Auto<T>) -> Self {
        match a {
            Auto::Auto => AutoRepr::Word("auto".into()),
            Auto::Value(v) => AutoRepr::Value(v),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySection {
    pub kind: String,
    pub n: usize,
    /// Edge probability for `erdos_renyi`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    /// Defaults to `run.seed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    /// Synthetic quadratic ensemble with prescribed `δ`.
    Quadratic,
    /// Logistic regression on synthetic blobs, Dirichlet-partitioned.
    Logistic,
    /// Logistic regression on a dataset file, Dirichlet-partitioned.
    Dataset,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumKind {
    #[default]
    Uniform,
    LogSpaced,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub kind: ProblemKind,
    #[serde(default = "defaults::d")]
    pub d: usize,
    #[serde(default = "defaults::mu")]
    pub mu: f64,
    #[serde(default = "defaults::big_l")]
    pub big_l: f64,
    #[serde(default = "defaults::target_delta")]
    pub target_delta: f64,
    #[serde(default)]
    pub spectrum: SpectrumKind,
    #[serde(default = "defaults::min_ratio")]
    pub min_ratio: f64,
    #[serde(default = "defaults::one")]
    pub offset_scale: f64,
    /// Defaults to `run.seed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,

    #[serde(default = "defaults::samples")]
    pub samples: usize,
    #[serde(default = "defaults::classes")]
    pub classes: usize,
    #[serde(default = "defaults::separation")]
    pub separation: f64,
    #[serde(default = "defaults::one")]
    pub alpha: f64,
    #[serde(default = "defaults::reg")]
    pub reg: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    /// Known `δ` for logistic problems; estimated when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default = "defaults::delta_samples")]
    pub delta_samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_scale: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GossipChoice {
    Plain,
    Fast,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerChoice {
    #[default]
    Agd,
    Gd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopChoice {
    #[default]
    Theory,
    Experiment,
    Exact,
    MaxIters,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSection {
    #[serde(default = "defaults::kind")]
    pub kind: String,
    #[serde(default)]
    pub lambda: Auto<f64>,
    /// Gossip steps per exchange.
    #[serde(default, rename = "M")]
    pub gossip_steps: Auto<usize>,
    /// Defaults to `fast` for `acc_spdo` and `plain` otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gossip: Option<GossipChoice>,
    #[serde(default)]
    pub gamma: Auto<f64>,
    #[serde(default)]
    pub inner: InnerChoice,
    #[serde(default)]
    pub inner_eta: Auto<f64>,
    #[serde(default)]
    pub stop: StopChoice,
    /// Tolerance for `stop = "exact"`.
    #[serde(default = "defaults::stop_tol")]
    pub stop_tol: f64,
    /// Budget for `stop = "max_iters"`.
    #[serde(default = "defaults::stop_iters")]
    pub stop_iters: usize,
    #[serde(default = "defaults::max_inner")]
    pub max_inner: usize,
    /// Gradient-tracking step size.
    #[serde(default)]
    pub eta: Auto<f64>,
}

impl Default for AlgorithmSection {
    fn default() -> Self {
        toml::from_str("").expect("all algorithm keys have defaults")
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "defaults::rounds")]
    pub rounds: usize,
    /// Stop before a round that would exceed this many communications.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comm_budget: Option<u64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "defaults::eps")]
    pub eps: f64,
    #[serde(default)]
    pub early_stop: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

impl Default for RunSection {
    fn default() -> Self {
        toml::from_str("").expect("all run keys have defaults")
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis: String,
    pub values: Vec<toml::Value>,
}

impl SweepSection {
    pub fn value_strings(&self) -> Vec<String> {
        self.values
            .iter()
            .map(|v| match v {
                toml::Value::String(s) => s.clone(),
                other => other.to_string(),
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub topology: TopologySection,
    pub problem: ProblemSection,
    #[serde(default)]
    pub algorithm: AlgorithmSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

mod defaults {
    pub fn d() -> usize {
        20
    }
    pub fn mu() -> f64 {
        0.1
    }
    pub fn big_l() -> f64 {
        10.0
    }
    pub fn target_delta() -> f64 {
        1.0
    }
    pub fn min_ratio() -> f64 {
        1e-6
    }
    pub fn one() -> f64 {
        1.0
    }
    pub fn samples() -> usize {
        1000
    }
    pub fn classes() -> usize {
        10
    }
    pub fn separation() -> f64 {
        2.0
    }
    pub fn reg() -> f64 {
        0.01
    }
    pub fn delta_samples() -> usize {
        100
    }
    pub fn kind() -> String {
        "spdo".into()
    }
    pub fn stop_tol() -> f64 {
        1e-10
    }
    pub fn stop_iters() -> usize {
        10
    }
    pub fn max_inner() -> usize {
        10_000
    }
    pub fn rounds() -> usize {
        100
    }
    pub fn eps() -> f64 {
        1e-8
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn topology_seed(&self) -> u64 {
        self.topology.seed.unwrap_or(self.run.seed)
    }

    pub fn problem_seed(&self) -> u64 {
        self.problem.seed.unwrap_or(self.run.seed)
    }

    /// Structural checks that do not need the problem to be built.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.topology.n == 0 {
            return bad("topology.n must be at least 1".into());
        }
        crate::topology::TopologyKind::parse(&self.topology.kind, self.topology.p)
            .map_err(|e| Error::Config(format!("topology.kind: {e}")))?;
        self.algorithm
            .kind
            .parse::<crate::algorithms::AlgorithmKind>()
            .map_err(|e| Error::Config(format!("algorithm.kind: {e}")))?;
        let p = &self.problem;
        if p.d == 0 {
            return bad("problem.d must be at least 1".into());
        }
        if p.kind == ProblemKind::Dataset && p.path.is_none() {
            return bad("problem.path is required for kind = \"dataset\"".into());
        }
        if p.kind == ProblemKind::Quadratic && !(p.mu >= 0.0 && p.mu <= p.big_l && p.big_l > 0.0) {
            return bad(format!("need 0 <= mu <= big_l and big_l > 0, got mu = {}, big_l = {}", p.mu, p.big_l));
        }
        if !(self.run.eps > 0.0) {
            return bad(format!("run.eps must be positive, got {}", self.run.eps));
        }
        if let Auto::Value(0) = self.algorithm.gossip_steps {
            return bad("algorithm.M must be at least 1".into());
        }
        Ok(())
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_toml_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[topology]\nkind = \"ring\"\nn = 5\n[problem]\nkind = \"quadratic\"\n";

    #[test]
    fn defaults_fill_in() {
        let cfg = RunConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(cfg.algorithm.kind, "spdo");
        assert_eq!(cfg.algorithm.lambda, Auto::Auto);
        assert_eq!(cfg.run.rounds, 100);
        assert!(!cfg.run.early_stop);
        assert_eq!(cfg.problem.d, 20);
    }

    #[test]
    fn auto_or_number() {
        let text = format!("{MINIMAL}[algorithm]\nlambda = 10\nM = \"auto\"\ngamma = 0.25\n");
        let cfg = RunConfig::from_toml_str(&text).unwrap();
        assert_eq!(cfg.algorithm.lambda, Auto::Value(10.0));
        assert_eq!(cfg.algorithm.gossip_steps, Auto::Auto);
        assert_eq!(cfg.algorithm.gamma, Auto::Value(0.25));
        let bad = format!("{MINIMAL}[algorithm]\nlambda = \"big\"\n");
        assert!(matches!(RunConfig::from_toml_str(&bad), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_keys_are_errors() {
        for extra in ["[run]\nrondus = 3\n", "[algorithm]\nlamda = 1.0\n", "[extra]\nx = 1\n"] {
            let text = format!("{MINIMAL}{extra}");
            assert!(matches!(RunConfig::from_toml_str(&text), Err(Error::Config(_))), "{extra}");
        }
    }

    #[test]
    fn semantic_errors() {
        let bad_kind = MINIMAL.replace("ring", "torus");
        assert!(matches!(RunConfig::from_toml_str(&bad_kind), Err(Error::Config(_))));
        let zero_m = format!("{MINIMAL}[algorithm]\nM = 0\n");
        assert!(RunConfig::from_toml_str(&zero_m).is_err());
        let no_path = MINIMAL.replace("quadratic", "dataset");
        assert!(RunConfig::from_toml_str(&no_path).is_err());
    }

    #[test]
    fn toml_round_trip() {
        let text = format!("{MINIMAL}[algorithm]\nlambda = 3.0\n[sweep]\naxis = \"M\"\nvalues = [1, 2]\n");
        let cfg = RunConfig::from_toml_str(&text).unwrap();
        let back = RunConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(cfg.sweep.unwrap().value_strings(), vec!["1", "2"]);
    }
}
