//! Analysis configuration: a TOML file plus command-line overrides.
//!
//! Flags always win over the file. The seed is mandatory once resolved,
//! since every report must be reproducible from (config, seed) alone.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use concordia::data::CsvSchema;
use concordia::ensemble::EnsembleSpec;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    /// Free-form label of the aggregation level the inputs live at
    /// (e.g. "segment" or "teacher-year"); echoed into every report.
    #[serde(default)]
    pub level_label: Option<String>,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub align: AlignConfig,
    #[serde(default)]
    pub dcor: DcorConfig,
    #[serde(default)]
    pub robust: RobustConfig,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
    #[serde(default)]
    pub decompose: DecomposeConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub ratings: Option<PathBuf>,
    pub outcomes: Option<PathBuf>,
    /// Column mapping for the ratings file; defaults to the canonical names.
    pub schema: Option<SchemaConfig>,
    /// Declared per-task scale bounds: task id -> [min, max].
    #[serde(default)]
    pub bounds: BTreeMap<String, (f64, f64)>,
    /// Per-unit metadata for baseline sources: unit id -> value.
    #[serde(default)]
    pub experience: BTreeMap<String, f64>,
    #[serde(default)]
    pub prior_outcome: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaConfig {
    pub rater: Option<String>,
    pub family: Option<String>,
    pub task: Option<String>,
    pub unit: Option<String>,
    pub prompt: Option<String>,
    pub score: Option<String>,
    pub delimiter: Option<String>,
}

impl SchemaConfig {
    pub fn to_schema(&self) -> anyhow::Result<CsvSchema> {
        let mut schema = CsvSchema::default();
        if let Some(v) = &self.rater {
            schema.rater = v.clone();
        }
        if let Some(v) = &self.family {
            schema.family = v.clone();
        }
        if let Some(v) = &self.task {
            schema.task = v.clone();
        }
        if let Some(v) = &self.unit {
            schema.unit = v.clone();
        }
        if let Some(v) = &self.prompt {
            schema.prompt = Some(v.clone());
        }
        if let Some(v) = &self.score {
            schema.score = v.clone();
        }
        if let Some(v) = &self.delimiter {
            let bytes = v.as_bytes();
            if bytes.len() != 1 {
                bail!("delimiter must be a single byte, got '{v}'");
            }
            schema.delimiter = bytes[0];
        }
        Ok(schema)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlignConfig {
    /// Rating source treated as the expert axis.
    pub expert_rater: Option<String>,
    /// Outcome id for the impact axis.
    pub outcome: Option<String>,
    /// Restrict to these tasks; empty means every task present.
    #[serde(default)]
    pub tasks: Vec<String>,
    /// Restrict to these rater ids; empty means every non-expert source.
    #[serde(default)]
    pub raters: Vec<String>,
    /// Two-sided confidence level for the intervals.
    pub level: Option<f64>,
    /// Restrict outcomes to one year.
    pub year: Option<i32>,
    /// Disattenuate the outcome axis with this pair of outcome variants.
    pub reliability_variants: Option<(String, String)>,
    #[serde(default)]
    pub greiner: bool,
    /// Attach a one-sided permutation p-value per outcome-axis tau.
    pub permutations: Option<usize>,
    /// Dump each source's pairwise-order sign matrix as CSV.
    #[serde(default)]
    pub dump_sign_matrices: bool,
}

impl Default for AlignConfig {
    fn default() -> Self {
        Self {
            expert_rater: None,
            outcome: None,
            tasks: Vec::new(),
            raters: Vec::new(),
            level: Some(0.95),
            year: None,
            reliability_variants: None,
            greiner: false,
            permutations: None,
            dump_sign_matrices: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DcorConfig {
    pub permutations: Option<usize>,
    /// Family-wise alpha for the Bonferroni mask; absent disables masking.
    pub alpha: Option<f64>,
    pub min_n: Option<usize>,
}

impl Default for DcorConfig {
    fn default() -> Self {
        Self {
            permutations: Some(10_000),
            alpha: None,
            min_n: Some(4),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobustConfig {
    /// Panels to test: rater ids; empty means every human source.
    #[serde(default)]
    pub raters: Vec<String>,
    #[serde(default)]
    pub tasks: Vec<String>,
    pub outcome: Option<String>,
    /// Baseline source for the comparison column.
    pub baseline_rater: Option<String>,
    pub permutations: Option<usize>,
    pub bootstrap: Option<usize>,
    pub null_quantile: Option<f64>,
    pub year: Option<i32>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    #[serde(default)]
    pub specs: Vec<EnsembleSpec>,
    pub outcome: Option<String>,
    #[serde(default)]
    pub tasks: Vec<String>,
    pub bootstrap: Option<usize>,
    pub year: Option<i32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecomposeConfig {
    pub outcome: Option<String>,
    /// "per_item" (default) or "per_series".
    pub fit_scope: Option<String>,
    pub chains: Option<usize>,
    pub iterations: Option<usize>,
    pub warmup: Option<usize>,
    #[serde(default)]
    pub allow_nonconverged: bool,
    /// Skip the sampler and report the closed-form path only.
    #[serde(default)]
    pub skip_bayes: bool,
    /// Dump pooled posterior draws as a TSV.
    #[serde(default)]
    pub dump_draws: bool,
    #[serde(default = "default_levers")]
    pub lever_factors: Vec<String>,
    pub ratio_numerator: Option<String>,
    #[serde(default)]
    pub ratio_denominator: Vec<String>,
    pub year: Option<i32>,
}

fn default_levers() -> Vec<String> {
    vec!["model".into(), "prompt".into()]
}

impl Default for DecomposeConfig {
    fn default() -> Self {
        Self {
            outcome: None,
            fit_scope: None,
            chains: None,
            iterations: None,
            warmup: None,
            allow_nonconverged: false,
            skip_bayes: false,
            dump_draws: false,
            lever_factors: default_levers(),
            ratio_numerator: None,
            ratio_denominator: Vec::new(),
            year: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    /// shared-bias | crossed | tau-pair.
    pub preset: Option<String>,
    // shared-bias parameters
    pub k_raters: Option<usize>,
    pub shared_bias_weight: Option<f64>,
    pub signal_weight: Option<f64>,
    pub idiosyncratic_sd: Option<f64>,
    pub n_units: Option<usize>,
    pub bins: Option<usize>,
    pub task: Option<String>,
    // crossed parameters
    pub units: Option<usize>,
    pub items: Option<usize>,
    pub models: Option<usize>,
    pub prompts: Option<usize>,
    #[serde(default)]
    pub variances: BTreeMap<String, f64>,
    pub residual: Option<f64>,
    // tau-pair parameters
    pub target_tau: Option<f64>,
    pub n: Option<usize>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            preset: None,
            k_raters: Some(3),
            shared_bias_weight: Some(1.5),
            signal_weight: Some(-0.6),
            idiosyncratic_sd: Some(1.5),
            n_units: Some(400),
            bins: None,
            task: Some("SYNTH".into()),
            units: Some(50),
            items: Some(4),
            models: Some(3),
            prompts: Some(8),
            variances: BTreeMap::new(),
            residual: Some(1.0),
            target_tau: Some(0.3),
            n: Some(500),
        }
    }
}

/// Command-line overrides; flags win over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub permutations: Option<usize>,
    pub bootstrap: Option<usize>,
    pub chains: Option<usize>,
    pub iters: Option<usize>,
    pub level: Option<f64>,
    pub alpha: Option<f64>,
    pub preset: Option<String>,
}

impl AnalysisConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                let cfg: AnalysisConfig = toml::from_str(&text)
                    .with_context(|| format!("parsing config {}", p.display()))?;
                Ok(cfg)
            }
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = Some(seed);
        }
        if let Some(out) = &o.out {
            self.out_dir = Some(out.clone());
        }
        if let Some(m) = o.permutations {
            self.dcor.permutations = Some(m);
            self.robust.permutations = Some(m);
            self.align.permutations = Some(m);
        }
        if let Some(b) = o.bootstrap {
            self.robust.bootstrap = Some(b);
            self.ensemble.bootstrap = Some(b);
        }
        if let Some(c) = o.chains {
            self.decompose.chains = Some(c);
        }
        if let Some(i) = o.iters {
            self.decompose.iterations = Some(i);
        }
        if let Some(l) = o.level {
            self.align.level = Some(l);
        }
        if let Some(a) = o.alpha {
            self.dcor.alpha = Some(a);
        }
        if let Some(p) = &o.preset {
            self.simulate.preset = Some(p.clone());
        }
    }

    pub fn seed(&self) -> anyhow::Result<u64> {
        self.seed
            .ok_or_else(|| anyhow::anyhow!("a seed is required: set `seed` in the config or pass --seed"))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    /// Stable fingerprint of the resolved configuration. The output
    /// directory is excluded: where a report lands does not change what it
    /// says, and identical analyses must produce identical bytes.
    pub fn fingerprint(&self) -> String {
        let mut canonical = self.clone();
        canonical.out_dir = None;
        let text = serde_json::to_string(&canonical).unwrap_or_default();
        format!("{:016x}", concordia::seeding::fingerprint(text.as_bytes()))
    }
}
