//! Subcommand implementations sharing one loaded context.

pub mod align;
pub mod dcor;
pub mod decompose;
pub mod ensemble;
pub mod robust;
pub mod simulate;

use std::path::PathBuf;

use anyhow::{bail, Context};

use concordia::data::{
    baseline_ratings, load_outcomes_path, load_ratings_path, BaselineKind, OutcomeTable,
    RatingsTable, TaskId, UnitId, YearScope,
};

use crate::config::AnalysisConfig;
use crate::report::Meta;

pub struct Ctx {
    pub cfg: AnalysisConfig,
    pub seed: u64,
    pub out: PathBuf,
    pub meta: Meta,
}

impl Ctx {
    pub fn new(cfg: AnalysisConfig) -> anyhow::Result<Self> {
        let seed = cfg.seed()?;
        let out = cfg.out_dir();
        std::fs::create_dir_all(&out)
            .with_context(|| format!("creating output directory {}", out.display()))?;
        let meta = Meta::new(seed, cfg.fingerprint(), cfg.level_label.clone());
        Ok(Self {
            cfg,
            seed,
            out,
            meta,
        })
    }

    pub fn load_ratings(&self) -> anyhow::Result<RatingsTable> {
        let path = self
            .cfg
            .data
            .ratings
            .as_ref()
            .ok_or_else(|| anyhow::anyhow!("no ratings file configured (data.ratings)"))?;
        let schema = match &self.cfg.data.schema {
            Some(s) => s.to_schema()?,
            None => Default::default(),
        };
        let bounds = self
            .cfg
            .data
            .bounds
            .iter()
            .map(|(task, b)| (TaskId::new(task.clone()), *b))
            .collect();
        let table = match load_ratings_path(path, &schema, bounds) {
            Ok(t) => t,
            Err(concordia::Error::Validation(report)) => {
                // Surface the structured report next to the other artifacts
                // before failing, so the offending rows are machine-readable.
                let _ = crate::report::write_json(
                    &self.out,
                    "validation_report.json",
                    &self.meta,
                    &*report,
                );
                return Err(concordia::Error::Validation(report))
                    .with_context(|| format!("loading ratings {}", path.display()));
            }
            Err(e) => {
                return Err(e).with_context(|| format!("loading ratings {}", path.display()))
            }
        };
        Ok(table)
    }

    /// Analyses must declare the aggregation level their unit ids live at;
    /// reports echo it, and refusing to guess is the point.
    pub fn require_level(&self) -> anyhow::Result<&str> {
        self.cfg
            .level_label
            .as_deref()
            .ok_or_else(|| anyhow::anyhow!(
                "set `level_label` in the config: analyses must declare the aggregation \
                 level (e.g. \"segment\" or \"teacher-year\") their unit ids live at"
            ))
    }

    /// Ratings plus any baseline sources synthesized from config metadata.
    pub fn load_ratings_with_baselines(&self) -> anyhow::Result<RatingsTable> {
        let base = self.load_ratings()?;
        let tasks = base.tasks();
        let mut tables: Vec<RatingsTable> = vec![];
        for (kind, meta) in [
            (BaselineKind::Experience, &self.cfg.data.experience),
            (BaselineKind::PriorOutcome, &self.cfg.data.prior_outcome),
        ] {
            if meta.is_empty() {
                continue;
            }
            let map = meta
                .iter()
                .map(|(unit, v)| (UnitId::new(unit.clone()), *v))
                .collect();
            tables.push(baseline_ratings(kind, &map, &tasks, None)?);
        }
        let mut refs: Vec<&RatingsTable> = vec![&base];
        refs.extend(tables.iter());
        Ok(RatingsTable::merged(&refs)?)
    }

    pub fn load_outcomes(&self) -> anyhow::Result<OutcomeTable> {
        let path = self
            .cfg
            .data
            .outcomes
            .as_ref()
            .ok_or_else(|| anyhow::anyhow!("no outcomes file configured (data.outcomes)"))?;
        let table = load_outcomes_path(path)
            .with_context(|| format!("loading outcomes {}", path.display()))?;
        Ok(table)
    }
}

pub fn scope_for(year: Option<i32>) -> YearScope {
    match year {
        Some(y) => YearScope::Year(y),
        None => YearScope::Pooled,
    }
}

pub fn require<'a, T>(value: &'a Option<T>, what: &str) -> anyhow::Result<&'a T> {
    match value {
        Some(v) => Ok(v),
        None => bail!("missing required config value: {what}"),
    }
}
