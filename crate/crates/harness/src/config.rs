use clap::ValueEnum;
use occam_core::boolean::{PromptMode, TriplePolicy};
use occam_probe::ProbeConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::{HarnessError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    MarkovPosterior,
    MarkovCtxSweep,
    RegressionPosterior,
    RegressionCtxSweep,
    WishartGap,
    Pcfg,
    AttentionVerify,
    BooleanOracle,
    LlmProbe,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::MarkovPosterior,
        Experiment::MarkovCtxSweep,
        Experiment::RegressionPosterior,
        Experiment::RegressionCtxSweep,
        Experiment::WishartGap,
        Experiment::Pcfg,
        Experiment::AttentionVerify,
        Experiment::BooleanOracle,
        Experiment::LlmProbe,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::MarkovPosterior => "markov-posterior",
            Experiment::MarkovCtxSweep => "markov-ctx-sweep",
            Experiment::RegressionPosterior => "regression-posterior",
            Experiment::RegressionCtxSweep => "regression-ctx-sweep",
            Experiment::WishartGap => "wishart-gap",
            Experiment::Pcfg => "pcfg",
            Experiment::AttentionVerify => "attention-verify",
            Experiment::BooleanOracle => "boolean-oracle",
            Experiment::LlmProbe => "llm-probe",
        }
    }

    pub fn default_trials(self) -> usize {
        match self {
            Experiment::MarkovPosterior => 200,
            Experiment::MarkovCtxSweep => 100,
            Experiment::RegressionPosterior => 500,
            Experiment::RegressionCtxSweep => 200,
            Experiment::WishartGap => 200,
            Experiment::Pcfg => 20,
            Experiment::AttentionVerify => 50,
            Experiment::BooleanOracle => 500,
            Experiment::LlmProbe => 50,
        }
    }
}

/// Context length used when `lens` is empty: 200 for the {1, 2} order set, 300 otherwise.
pub fn default_markov_len(orders: &[usize]) -> usize {
    if orders.iter().max() == Some(&2) {
        200
    } else {
        300
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarkovPosteriorParams {
    pub vocab_size: usize,
    /// Candidate orders, uniform prior.
    pub orders: Vec<usize>,
    /// Orders used to generate data; each must be a candidate.
    pub true_orders: Vec<usize>,
    /// One length for all true orders, or one per true order. Empty picks the default.
    pub lens: Vec<usize>,
    pub alpha: f64,
    /// KL at the final position is recorded only when its context was seen this often.
    pub kl_min_visits: u64,
}

impl Default for MarkovPosteriorParams {
    fn default() -> Self {
        Self {
            vocab_size: 3,
            orders: vec![1, 3],
            true_orders: vec![1, 3],
            lens: Vec::new(),
            alpha: 1.0,
            kl_min_visits: 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarkovSweepParams {
    pub vocab_size: usize,
    pub orders: Vec<usize>,
    pub true_orders: Vec<usize>,
    /// Prefix lengths of one long sequence per trial.
    pub lens: Vec<usize>,
    pub alpha: f64,
    pub evidence: occam_core::markov::EvidenceMethod,
    pub kl_min_visits: u64,
}

impl Default for MarkovSweepParams {
    fn default() -> Self {
        Self {
            vocab_size: 3,
            orders: vec![1, 3],
            true_orders: vec![1, 3],
            lens: vec![50, 100, 200, 400, 800],
            alpha: 1.0,
            evidence: occam_core::markov::EvidenceMethod::Exact,
            kl_min_visits: 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressionPosteriorParams {
    pub dim: usize,
    pub len: usize,
    /// Complex-task trials; simple-task trials use the run's `trials`.
    pub complex_trials: usize,
}

impl Default for RegressionPosteriorParams {
    fn default() -> Self {
        Self {
            dim: 20,
            len: 15,
            complex_trials: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressionSweepParams {
    pub dims: Vec<usize>,
    /// Empty means `1..=max_len`.
    pub lens: Vec<usize>,
    pub max_len: usize,
}

impl Default for RegressionSweepParams {
    fn default() -> Self {
        Self {
            dims: vec![10, 20],
            lens: Vec::new(),
            max_len: 39,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WishartParams {
    /// `(d, T)` pairs for the expectation check.
    pub identity_pairs: Vec<(usize, usize)>,
    pub identity_samples: usize,
    /// Dimensions for the gap; trials per dimension use the run's `trials`.
    pub dims: Vec<usize>,
    pub c: f64,
}

impl Default for WishartParams {
    fn default() -> Self {
        Self {
            identity_pairs: vec![(10, 8), (20, 15), (40, 30)],
            identity_samples: 2000,
            dims: vec![16, 32, 64, 128],
            c: 0.75,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PcfgParams {
    /// Blocks per opening letter in the Monte Carlo check.
    pub blocks: u64,
    /// Give up on a rare opening letter after this many blocks in total.
    pub max_total_blocks: u64,
    pub batch_blocks: usize,
    /// Largest `n1 + n2` in the exhaustive simple-preference check.
    pub count_limit: u64,
    /// Stream length for the per-grammar posterior.
    pub posterior_len: usize,
}

impl Default for PcfgParams {
    fn default() -> Self {
        Self {
            blocks: 100_000,
            max_total_blocks: 10_000_000,
            batch_blocks: 20_000,
            count_limit: 12,
            posterior_len: 300,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttentionParams {
    pub vocab_size: usize,
    pub len: usize,
    pub c_values: Vec<f64>,
}

impl Default for AttentionParams {
    fn default() -> Self {
        Self {
            vocab_size: 3,
            len: 200,
            c_values: vec![10.0, 20.0, 40.0, 80.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BooleanParams {
    pub dims: Vec<usize>,
    pub n_examples: Vec<usize>,
    pub modes: Vec<PromptMode>,
    pub triple_policy: TriplePolicy,
}

impl Default for BooleanParams {
    fn default() -> Self {
        Self {
            dims: vec![5],
            n_examples: vec![10],
            modes: vec![PromptMode::Ambiguous, PromptMode::Complex],
            triple_policy: TriplePolicy::IncludeZero,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeBackend {
    Http,
    /// Answers every prompt with the exact Bayes label; no network.
    BayesOracle,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeParams {
    pub backend: ProbeBackend,
    pub client: ProbeConfig,
    /// Overrides the built-in prompt wording; needs `{examples}` and `{query}`.
    pub template: Option<String>,
    pub dims: Vec<usize>,
    pub n_examples: Vec<usize>,
    pub modes: Vec<PromptMode>,
    pub triple_policy: TriplePolicy,
}

impl Default for ProbeParams {
    fn default() -> Self {
        Self {
            backend: ProbeBackend::Http,
            client: ProbeConfig::default(),
            template: None,
            dims: vec![5, 6, 7],
            n_examples: vec![5, 10, 15, 20],
            modes: vec![PromptMode::Ambiguous, PromptMode::Complex],
            triple_policy: TriplePolicy::IncludeZero,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(untagged)]
pub enum Params {
    MarkovPosterior(MarkovPosteriorParams),
    MarkovCtxSweep(MarkovSweepParams),
    RegressionPosterior(RegressionPosteriorParams),
    RegressionCtxSweep(RegressionSweepParams),
    WishartGap(WishartParams),
    Pcfg(PcfgParams),
    AttentionVerify(AttentionParams),
    BooleanOracle(BooleanParams),
    LlmProbe(ProbeParams),
}

fn parse_params<T: DeserializeOwned>(v: Value) -> Result<T> {
    serde_json::from_value(v).map_err(|e| HarnessError::Config(format!("params: {e}")))
}

impl Params {
    pub fn defaults(e: Experiment) -> Self {
        Self::from_value(e, Value::Object(Map::new())).expect("defaults parse")
    }

    pub fn from_value(e: Experiment, v: Value) -> Result<Self> {
        Ok(match e {
            Experiment::MarkovPosterior => Params::MarkovPosterior(parse_params(v)?),
            Experiment::MarkovCtxSweep => Params::MarkovCtxSweep(parse_params(v)?),
            Experiment::RegressionPosterior => Params::RegressionPosterior(parse_params(v)?),
            Experiment::RegressionCtxSweep => Params::RegressionCtxSweep(parse_params(v)?),
            Experiment::WishartGap => Params::WishartGap(parse_params(v)?),
            Experiment::Pcfg => Params::Pcfg(parse_params(v)?),
            Experiment::AttentionVerify => Params::AttentionVerify(parse_params(v)?),
            Experiment::BooleanOracle => Params::BooleanOracle(parse_params(v)?),
            Experiment::LlmProbe => Params::LlmProbe(parse_params(v)?),
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub trials: usize,
    pub params: Params,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: Option<Experiment>,
    seed: Option<u64>,
    trials: Option<usize>,
    #[serde(default)]
    params: Map<String, Value>,
}

/// Sets `path` (dot-separated) in a JSON object. The value is parsed as JSON,
/// falling back to a plain string.
pub fn set_path(root: &mut Map<String, Value>, path: &str, raw: &str) -> Result<()> {
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut keys: Vec<&str> = path.split('.').collect();
    let last = keys.pop().filter(|k| !k.is_empty()).ok_or_else(|| HarnessError::Config(format!("empty key in {path:?}")))?;
    let mut node = root;
    for k in keys {
        node = node
            .entry(k.to_string())
            .or_insert_with(|| Value::Object(Map::new()))
            .as_object_mut()
            .ok_or_else(|| HarnessError::Config(format!("params.{k} is not an object")))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            seed: 0,
            trials: experiment.default_trials(),
            params: Params::defaults(experiment),
        }
    }

    /// Builds a config from an optional JSON document plus command-line overrides.
    /// `overrides` are `key=value` pairs addressing fields of `params`.
    pub fn resolve(
        experiment: Experiment,
        document: Option<&str>,
        seed: Option<u64>,
        trials: Option<usize>,
        overrides: &[String],
    ) -> Result<Self> {
        let raw: RawConfig = match document {
            Some(text) => serde_json::from_str(text).map_err(|e| HarnessError::Config(format!("config file: {e}")))?,
            None => RawConfig {
                experiment: None,
                seed: None,
                trials: None,
                params: Map::new(),
            },
        };
        if let Some(file_exp) = raw.experiment {
            if file_exp != experiment {
                return Err(HarnessError::Config(format!(
                    "experiment: config file says {}, command line says {}",
                    file_exp.name(),
                    experiment.name()
                )));
            }
        }
        let mut params = raw.params;
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| HarnessError::Config(format!("override {o:?} is not key=value")))?;
            set_path(&mut params, k.trim(), v.trim())?;
        }
        let cfg = Self {
            experiment,
            seed: seed.or(raw.seed).unwrap_or(0),
            trials: trials.or(raw.trials).unwrap_or(experiment.default_trials()),
            params: Params::from_value(experiment, Value::Object(params))?,
        };
        if cfg.trials == 0 {
            return Err(HarnessError::Config("trials: must be at least 1".into()));
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }
}
