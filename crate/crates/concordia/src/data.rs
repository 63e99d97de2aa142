//! Rating and outcome tables.
//!
//! Ratings are long-format ordinal scores keyed by (rater, task, unit,
//! prompt); outcomes are continuous per-unit criteria. Tables validate on
//! construction and are immutable afterwards, so analyses can share them
//! freely across threads. Scores are stored unscaled; concordance statistics
//! are rank-based and scale-free, and scaling is an explicit transform for the
//! modules that need it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

macro_rules! id_type {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }
    };
}

id_type!(
    /// A rating source: a human panel, a model, an ensemble, or a baseline.
    RaterId
);
id_type!(
    /// An instrument item, e.g. one rubric dimension.
    TaskId
);
id_type!(
    /// The rated unit: a transcript segment, lesson, or teacher-year.
    UnitId
);
id_type!(
    /// A prompting strategy; only model raters carry one.
    PromptId
);
id_type!(
    /// An outcome criterion, e.g. one value-added variant.
    OutcomeId
);

/// Which kind of source produced a rating series.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RaterFamily {
    Human,
    Model,
    Ensemble,
    Baseline,
}

impl RaterFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            RaterFamily::Human => "human",
            RaterFamily::Model => "model",
            RaterFamily::Ensemble => "ensemble",
            RaterFamily::Baseline => "baseline",
        }
    }
}

impl FromStr for RaterFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "human" => Ok(RaterFamily::Human),
            "model" => Ok(RaterFamily::Model),
            "ensemble" => Ok(RaterFamily::Ensemble),
            "baseline" => Ok(RaterFamily::Baseline),
            other => Err(Error::InvalidParameter(format!(
                "unknown rater family '{other}'"
            ))),
        }
    }
}

impl fmt::Display for RaterFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One ordinal rating of one unit on one task by one source.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub rater_id: RaterId,
    pub rater_family: RaterFamily,
    pub task_id: TaskId,
    pub unit_id: UnitId,
    pub prompt_id: Option<PromptId>,
    pub score: f64,
}

impl RatingRecord {
    fn key(&self) -> (RaterId, TaskId, UnitId, Option<PromptId>) {
        (
            self.rater_id.clone(),
            self.task_id.clone(),
            self.unit_id.clone(),
            self.prompt_id.clone(),
        )
    }
}

/// A structured account of everything wrong with a candidate table.
///
/// Violations are collected exhaustively rather than failing at the first bad
/// row, so a single pass over the report locates every problem.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub n_records: usize,
    pub bounds_violations: Vec<BoundsViolation>,
    pub duplicate_keys: Vec<DuplicateKey>,
    pub missing_prompts: Vec<MissingPrompt>,
    pub non_finite_rows: Vec<usize>,
    /// Tasks whose bounds were not declared and were inferred from the data.
    pub inferred_bounds: BTreeMap<TaskId, (f64, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundsViolation {
    pub row: usize,
    pub task_id: TaskId,
    pub score: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DuplicateKey {
    pub row: usize,
    pub rater_id: RaterId,
    pub task_id: TaskId,
    pub unit_id: UnitId,
    pub prompt_id: Option<PromptId>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MissingPrompt {
    pub row: usize,
    pub rater_id: RaterId,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.bounds_violations.is_empty()
            && self.duplicate_keys.is_empty()
            && self.missing_prompts.is_empty()
            && self.non_finite_rows.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.bounds_violations {
            writeln!(
                f,
                "row {}: score {} outside bounds [{}, {}] for task {}",
                v.row, v.score, v.min, v.max, v.task_id
            )?;
        }
        for d in &self.duplicate_keys {
            writeln!(
                f,
                "row {}: duplicate key ({}, {}, {}, {})",
                d.row,
                d.rater_id,
                d.task_id,
                d.unit_id,
                d.prompt_id.as_ref().map_or("-", |p| p.as_str())
            )?;
        }
        for m in &self.missing_prompts {
            writeln!(f, "row {}: model rater {} has no prompt id", m.row, m.rater_id)?;
        }
        for r in &self.non_finite_rows {
            writeln!(f, "row {r}: non-finite score")?;
        }
        Ok(())
    }
}

/// One rating series: everything a single (rater, prompt) pair said about one
/// task.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct SourceKey {
    pub rater_id: RaterId,
    pub rater_family: RaterFamily,
    pub task_id: TaskId,
    pub prompt_id: Option<PromptId>,
}

/// Validated long-format table of ratings with per-task scale bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct RatingsTable {
    records: Vec<RatingRecord>,
    bounds: BTreeMap<TaskId, (f64, f64)>,
}

impl RatingsTable {
    /// Validate and construct. Tasks absent from `declared_bounds` get bounds
    /// inferred from their observed scores; every violation found is reported
    /// together in the error, none silently dropped.
    pub fn new(
        records: Vec<RatingRecord>,
        declared_bounds: BTreeMap<TaskId, (f64, f64)>,
    ) -> Result<Self> {
        for (task, &(min, max)) in &declared_bounds {
            if !(min < max) {
                return Err(Error::InvalidParameter(format!(
                    "bounds for task {task}: min {min} must be below max {max}"
                )));
            }
        }

        let mut report = ValidationReport {
            n_records: records.len(),
            ..Default::default()
        };

        let mut bounds = declared_bounds;
        let mut observed: BTreeMap<TaskId, (f64, f64)> = BTreeMap::new();
        for rec in &records {
            if !rec.score.is_finite() {
                continue;
            }
            let e = observed
                .entry(rec.task_id.clone())
                .or_insert((rec.score, rec.score));
            e.0 = e.0.min(rec.score);
            e.1 = e.1.max(rec.score);
        }
        for (task, (lo, hi)) in observed {
            if !bounds.contains_key(&task) {
                let inferred = if lo < hi { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
                report.inferred_bounds.insert(task.clone(), inferred);
                bounds.insert(task, inferred);
            }
        }

        let mut seen: BTreeSet<(RaterId, TaskId, UnitId, Option<PromptId>)> = BTreeSet::new();
        for (i, rec) in records.iter().enumerate() {
            let row = i + 1;
            if !rec.score.is_finite() {
                report.non_finite_rows.push(row);
            } else if let Some(&(min, max)) = bounds.get(&rec.task_id) {
                if rec.score < min || rec.score > max {
                    report.bounds_violations.push(BoundsViolation {
                        row,
                        task_id: rec.task_id.clone(),
                        score: rec.score,
                        min,
                        max,
                    });
                }
            }
            if !seen.insert(rec.key()) {
                report.duplicate_keys.push(DuplicateKey {
                    row,
                    rater_id: rec.rater_id.clone(),
                    task_id: rec.task_id.clone(),
                    unit_id: rec.unit_id.clone(),
                    prompt_id: rec.prompt_id.clone(),
                });
            }
            if rec.rater_family == RaterFamily::Model && rec.prompt_id.is_none() {
                report.missing_prompts.push(MissingPrompt {
                    row,
                    rater_id: rec.rater_id.clone(),
                });
            }
        }

        if !report.is_clean() {
            return Err(Error::Validation(Box::new(report)));
        }
        Ok(Self { records, bounds })
    }

    pub fn records(&self) -> &[RatingRecord] {
        &self.records
    }

    pub fn bounds(&self) -> &BTreeMap<TaskId, (f64, f64)> {
        &self.bounds
    }

    pub fn bounds_for(&self, task: &TaskId) -> Option<(f64, f64)> {
        self.bounds.get(task).copied()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    /// All distinct (rater, task, prompt) series, sorted.
    pub fn sources(&self) -> Vec<SourceKey> {
        let set: BTreeSet<SourceKey> = self
            .records
            .iter()
            .map(|r| SourceKey {
                rater_id: r.rater_id.clone(),
                rater_family: r.rater_family,
                task_id: r.task_id.clone(),
                prompt_id: r.prompt_id.clone(),
            })
            .collect();
        set.into_iter().collect()
    }

    pub fn tasks(&self) -> Vec<TaskId> {
        let set: BTreeSet<TaskId> = self.records.iter().map(|r| r.task_id.clone()).collect();
        set.into_iter().collect()
    }

    pub fn raters(&self) -> Vec<RaterId> {
        let set: BTreeSet<RaterId> = self.records.iter().map(|r| r.rater_id.clone()).collect();
        set.into_iter().collect()
    }

    /// Unit -> score map for one source series.
    pub fn series(&self, key: &SourceKey) -> BTreeMap<UnitId, f64> {
        self.records
            .iter()
            .filter(|r| {
                r.rater_id == key.rater_id
                    && r.task_id == key.task_id
                    && r.prompt_id == key.prompt_id
            })
            .map(|r| (r.unit_id.clone(), r.score))
            .collect()
    }

    /// Unit -> score map for a (rater, task) pair. With `prompt = None` the
    /// rater must have exactly one prompt series for the task.
    pub fn series_for(
        &self,
        rater: &RaterId,
        task: &TaskId,
        prompt: Option<&PromptId>,
    ) -> Result<BTreeMap<UnitId, f64>> {
        let matching: Vec<&RatingRecord> = self
            .records
            .iter()
            .filter(|r| &r.rater_id == rater && &r.task_id == task)
            .collect();
        if matching.is_empty() {
            return Err(Error::UnknownId {
                kind: "rater/task series",
                id: format!("{rater}/{task}"),
            });
        }
        let selected: Vec<&RatingRecord> = match prompt {
            Some(p) => matching
                .into_iter()
                .filter(|r| r.prompt_id.as_ref() == Some(p))
                .collect(),
            None => {
                let prompts: BTreeSet<&Option<PromptId>> =
                    matching.iter().map(|r| &r.prompt_id).collect();
                if prompts.len() > 1 {
                    return Err(Error::AmbiguousPrompt {
                        rater: rater.to_string(),
                        task: task.to_string(),
                    });
                }
                matching
            }
        };
        if selected.is_empty() {
            return Err(Error::UnknownId {
                kind: "prompt series",
                id: format!("{rater}/{task}/{}", prompt.map_or("-", |p| p.as_str())),
            });
        }
        Ok(selected
            .into_iter()
            .map(|r| (r.unit_id.clone(), r.score))
            .collect())
    }

    /// Concatenate tables into one, revalidating. Declared bounds must agree
    /// where both sides declare a task.
    pub fn merged(tables: &[&RatingsTable]) -> Result<Self> {
        let mut records = Vec::new();
        let mut bounds: BTreeMap<TaskId, (f64, f64)> = BTreeMap::new();
        for t in tables {
            records.extend(t.records.iter().cloned());
            for (task, b) in &t.bounds {
                match bounds.get(task) {
                    None => {
                        bounds.insert(task.clone(), *b);
                    }
                    Some(existing) if existing == b => {}
                    Some(existing) => {
                        // Differing inferred bounds just widen to the union.
                        bounds.insert(
                            task.clone(),
                            (existing.0.min(b.0), existing.1.max(b.1)),
                        );
                    }
                }
            }
        }
        Self::new(records, bounds)
    }

    /// Write the canonical long-format CSV.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["rater_id", "rater_family", "task_id", "unit_id", "prompt_id", "score"])?;
        for r in &self.records {
            w.write_record([
                r.rater_id.as_str(),
                r.rater_family.as_str(),
                r.task_id.as_str(),
                r.unit_id.as_str(),
                r.prompt_id.as_ref().map_or("", |p| p.as_str()),
                &format!("{}", r.score),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_path(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Column mapping for delimiter-separated rating files. Sources use
/// heterogeneous column names, so each logical field names its column.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CsvSchema {
    pub rater: String,
    pub family: String,
    pub task: String,
    pub unit: String,
    /// Optional column; empty cells mean no prompt.
    pub prompt: Option<String>,
    pub score: String,
    pub delimiter: u8,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            rater: "rater_id".into(),
            family: "rater_family".into(),
            task: "task_id".into(),
            unit: "unit_id".into(),
            prompt: Some("prompt_id".into()),
            score: "score".into(),
            delimiter: b',',
        }
    }
}

/// Load a rating table from delimited text with a header row.
///
/// Parse problems (missing columns, unparseable scores) fail immediately;
/// semantic problems (bounds, duplicates, prompts) are collected into a
/// validation report and returned as one error.
pub fn load_ratings<R: std::io::Read>(
    reader: R,
    schema: &CsvSchema,
    declared_bounds: BTreeMap<TaskId, (f64, f64)>,
) -> Result<RatingsTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_owned()))
    };
    let rater_col = col(&schema.rater)?;
    let family_col = col(&schema.family)?;
    let task_col = col(&schema.task)?;
    let unit_col = col(&schema.unit)?;
    let prompt_col = match &schema.prompt {
        Some(name) => Some(col(name)?),
        None => None,
    };
    let score_col = col(&schema.score)?;

    let mut records = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let row_no = i + 1;
        let get = |c: usize| row.get(c).unwrap_or("").trim();
        let score_text = get(score_col);
        let score: f64 = score_text.parse().map_err(|_| Error::UnparseableScore {
            row: row_no,
            value: score_text.to_owned(),
        })?;
        let prompt = prompt_col.and_then(|c| {
            let p = get(c);
            (!p.is_empty()).then(|| PromptId::new(p))
        });
        records.push(RatingRecord {
            rater_id: RaterId::new(get(rater_col)),
            rater_family: get(family_col).parse()?,
            task_id: TaskId::new(get(task_col)),
            unit_id: UnitId::new(get(unit_col)),
            prompt_id: prompt,
            score,
        });
    }
    RatingsTable::new(records, declared_bounds)
}

pub fn load_ratings_path(
    path: impl AsRef<Path>,
    schema: &CsvSchema,
    declared_bounds: BTreeMap<TaskId, (f64, f64)>,
) -> Result<RatingsTable> {
    load_ratings(std::fs::File::open(path)?, schema, declared_bounds)
}

/// One outcome observation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRow {
    pub unit_id: UnitId,
    pub outcome_id: OutcomeId,
    pub value: f64,
    pub year: Option<i32>,
}

/// Which outcome years an analysis draws on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum YearScope {
    /// Use every row regardless of year.
    Pooled,
    /// Restrict to one year.
    Year(i32),
}

/// Per-unit continuous outcomes, e.g. stacked value-added variants.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct OutcomeTable {
    rows: Vec<OutcomeRow>,
}

impl OutcomeTable {
    pub fn new(rows: Vec<OutcomeRow>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for (i, row) in rows.iter().enumerate() {
            if !row.value.is_finite() {
                return Err(Error::NonFinite { what: "outcome value" });
            }
            if !seen.insert((row.unit_id.clone(), row.outcome_id.clone(), row.year)) {
                return Err(Error::InvalidParameter(format!(
                    "row {}: duplicate outcome key ({}, {})",
                    i + 1,
                    row.unit_id,
                    row.outcome_id
                )));
            }
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[OutcomeRow] {
        &self.rows
    }

    pub fn outcome_ids(&self) -> Vec<OutcomeId> {
        let set: BTreeSet<OutcomeId> = self.rows.iter().map(|r| r.outcome_id.clone()).collect();
        set.into_iter().collect()
    }

    /// Unit -> value map for one outcome under a year scope. Pooled scope
    /// requires a unique value per unit.
    pub fn values(&self, outcome: &OutcomeId, scope: YearScope) -> Result<BTreeMap<UnitId, f64>> {
        let mut out = BTreeMap::new();
        for row in self.rows.iter().filter(|r| &r.outcome_id == outcome) {
            match scope {
                YearScope::Pooled => {}
                YearScope::Year(y) => {
                    if row.year != Some(y) {
                        continue;
                    }
                }
            }
            if out.insert(row.unit_id.clone(), row.value).is_some() {
                return Err(Error::InvalidParameter(format!(
                    "unit {} has multiple values for outcome {} in the requested scope",
                    row.unit_id, outcome
                )));
            }
        }
        if out.is_empty() {
            return Err(Error::UnknownId {
                kind: "outcome",
                id: outcome.to_string(),
            });
        }
        Ok(out)
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["unit_id", "outcome_id", "value", "year"])?;
        for r in &self.rows {
            w.write_record([
                r.unit_id.as_str(),
                r.outcome_id.as_str(),
                &format!("{}", r.value),
                &r.year.map_or(String::new(), |y| y.to_string()),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_path(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Load outcomes from CSV with columns unit_id, outcome_id, value, year
/// (year optional / blank).
pub fn load_outcomes<R: std::io::Read>(reader: R) -> Result<OutcomeTable> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_owned()))
    };
    let unit_col = col("unit_id")?;
    let outcome_col = col("outcome_id")?;
    let value_col = col("value")?;
    let year_col = headers.iter().position(|h| h == "year");

    let mut rows = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let get = |c: usize| row.get(c).unwrap_or("").trim();
        let value: f64 = get(value_col).parse().map_err(|_| Error::UnparseableScore {
            row: i + 1,
            value: get(value_col).to_owned(),
        })?;
        let year = year_col.and_then(|c| get(c).parse::<i32>().ok());
        rows.push(OutcomeRow {
            unit_id: UnitId::new(get(unit_col)),
            outcome_id: OutcomeId::new(get(outcome_col)),
            value,
            year,
        });
    }
    OutcomeTable::new(rows)
}

pub fn load_outcomes_path(path: impl AsRef<Path>) -> Result<OutcomeTable> {
    load_outcomes(std::fs::File::open(path)?)
}

/// Aligned (score, outcome) vectors for one (rater, task, outcome) triple,
/// inner-joined on unit and sorted by unit id.
#[derive(Clone, Debug, PartialEq)]
pub struct JoinedPanel {
    pub unit_ids: Vec<UnitId>,
    pub scores: Vec<f64>,
    pub outcomes: Vec<f64>,
}

impl JoinedPanel {
    pub fn n(&self) -> usize {
        self.unit_ids.len()
    }
}

/// Inner-join one rating series with one outcome series on unit id.
///
/// Unit order is sorted, so the panel is invariant to input row order.
pub fn join_panel(
    ratings: &RatingsTable,
    outcomes: &OutcomeTable,
    rater: &RaterId,
    task: &TaskId,
    prompt: Option<&PromptId>,
    outcome: &OutcomeId,
    scope: YearScope,
) -> Result<JoinedPanel> {
    let scores = ratings.series_for(rater, task, prompt)?;
    let values = outcomes.values(outcome, scope)?;
    join_series(&scores, &values)
}

/// Inner-join two unit-keyed maps; shares the sorted-unit contract of
/// [`join_panel`].
pub fn join_series(
    scores: &BTreeMap<UnitId, f64>,
    values: &BTreeMap<UnitId, f64>,
) -> Result<JoinedPanel> {
    let mut unit_ids = Vec::new();
    let mut s = Vec::new();
    let mut o = Vec::new();
    for (unit, score) in scores {
        if let Some(v) = values.get(unit) {
            unit_ids.push(unit.clone());
            s.push(*score);
            o.push(*v);
        }
    }
    if unit_ids.is_empty() {
        return Err(Error::DisjointUnits);
    }
    if unit_ids.len() < 2 {
        return Err(Error::InsufficientData {
            what: "joined panel",
            needed: 2,
            got: unit_ids.len(),
        });
    }
    Ok(JoinedPanel {
        unit_ids,
        scores: s,
        outcomes: o,
    })
}

/// Affine map onto [0, 1]: `(v - min) / (max - min)`.
///
/// Every value must already lie inside the bounds; out-of-range inputs are a
/// data error, not something to clamp quietly.
pub fn minmax_scale(values: &[f64], bounds: (f64, f64)) -> Result<Vec<f64>> {
    let (min, max) = bounds;
    if !(min < max) {
        return Err(Error::DegenerateBounds { min, max });
    }
    for (i, v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite { what: "values" });
        }
        if *v < min || *v > max {
            return Err(Error::InvalidParameter(format!(
                "value {v} at index {i} outside bounds [{min}, {max}]"
            )));
        }
    }
    Ok(values.iter().map(|v| (v - min) / (max - min)).collect())
}

/// What a baseline rating source ranks by.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    /// Per-unit experience; more experienced units rank higher.
    Experience,
    /// A prior-period outcome used as an oracle-style baseline.
    PriorOutcome,
}

impl BaselineKind {
    pub fn rater_id(self) -> RaterId {
        match self {
            BaselineKind::Experience => RaterId::new("baseline_experience"),
            BaselineKind::PriorOutcome => RaterId::new("baseline_prior_outcome"),
        }
    }
}

/// Synthesize a baseline rating source whose score is the metadata value
/// itself, so its pairwise comparisons always favor the higher-metadata unit.
///
/// Records are replicated over `tasks` so the baseline joins against any
/// task's panels. When `units` is given, each one must be covered.
pub fn baseline_ratings(
    kind: BaselineKind,
    metadata: &BTreeMap<UnitId, f64>,
    tasks: &[TaskId],
    units: Option<&[UnitId]>,
) -> Result<RatingsTable> {
    if metadata.is_empty() {
        return Err(Error::Empty("baseline metadata"));
    }
    if tasks.is_empty() {
        return Err(Error::Empty("baseline task list"));
    }
    if let Some(required) = units {
        let missing: Vec<&UnitId> = required
            .iter()
            .filter(|u| !metadata.contains_key(*u))
            .collect();
        if let Some(first) = missing.first() {
            return Err(Error::UnknownId {
                kind: "baseline metadata for unit",
                id: first.to_string(),
            });
        }
    }
    let rater = kind.rater_id();
    let mut records = Vec::new();
    for task in tasks {
        for (unit, value) in metadata {
            records.push(RatingRecord {
                rater_id: rater.clone(),
                rater_family: RaterFamily::Baseline,
                task_id: task.clone(),
                unit_id: unit.clone(),
                prompt_id: None,
                score: *value,
            });
        }
    }
    RatingsTable::new(records, BTreeMap::new())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concordance::tau_stat;

    fn record(rater: &str, family: RaterFamily, task: &str, unit: &str, prompt: Option<&str>, score: f64) -> RatingRecord {
        RatingRecord {
            rater_id: rater.into(),
            rater_family: family,
            task_id: task.into(),
            unit_id: unit.into(),
            prompt_id: prompt.map(PromptId::from),
            score,
        }
    }

    fn small_csv() -> &'static str {
        "rater_id,rater_family,task_id,unit_id,prompt_id,score\n\
         gpt,model,REMED,u1,base,2\n\
         gpt,model,REMED,u2,base,3\n\
         gpt,model,REMED,u3,base,1\n"
    }

    #[test]
    fn loads_well_formed_csv() {
        let t = load_ratings(small_csv().as_bytes(), &CsvSchema::default(), BTreeMap::new()).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.records()[1].score, 3.0);
        assert_eq!(t.bounds_for(&"REMED".into()), Some((1.0, 3.0)));
    }

    #[test]
    fn bounds_violation_lists_row() {
        let csv = "rater_id,rater_family,task_id,unit_id,prompt_id,score\n\
                   h1,human,CLBM,u1,,3\n\
                   h1,human,CLBM,u2,,9\n";
        let mut bounds = BTreeMap::new();
        bounds.insert(TaskId::from("CLBM"), (1.0, 7.0));
        let err = load_ratings(csv.as_bytes(), &CsvSchema::default(), bounds).unwrap_err();
        match err {
            Error::Validation(report) => {
                assert_eq!(report.bounds_violations.len(), 1);
                assert_eq!(report.bounds_violations[0].row, 2);
                assert_eq!(report.bounds_violations[0].score, 9.0);
            }
            other => panic!("expected validation error, got {other}"),
        }
    }

    #[test]
    fn duplicate_key_is_an_error() {
        let csv = "rater_id,rater_family,task_id,unit_id,prompt_id,score\n\
                   h1,human,CLBM,u1,,3\n\
                   h1,human,CLBM,u1,,4\n";
        let err = load_ratings(csv.as_bytes(), &CsvSchema::default(), BTreeMap::new()).unwrap_err();
        match err {
            Error::Validation(report) => {
                assert_eq!(report.duplicate_keys.len(), 1);
                assert_eq!(report.duplicate_keys[0].row, 2);
            }
            other => panic!("expected validation error, got {other}"),
        }
    }

    #[test]
    fn unparseable_score_names_the_row() {
        let csv = "rater_id,rater_family,task_id,unit_id,prompt_id,score\n\
                   h1,human,CLBM,u1,,3\n\
                   h1,human,CLBM,u2,,high\n";
        let err = load_ratings(csv.as_bytes(), &CsvSchema::default(), BTreeMap::new()).unwrap_err();
        assert!(matches!(err, Error::UnparseableScore { row: 2, .. }));
    }

    #[test]
    fn missing_column_is_reported() {
        let csv = "rater,family\nx,human\n";
        let err = load_ratings(csv.as_bytes(), &CsvSchema::default(), BTreeMap::new()).unwrap_err();
        assert!(matches!(err, Error::MissingColumn(_)));
    }

    #[test]
    fn model_rater_requires_prompt() {
        let recs = vec![record("gpt", RaterFamily::Model, "REMED", "u1", None, 2.0)];
        let err = RatingsTable::new(recs, BTreeMap::new()).unwrap_err();
        match err {
            Error::Validation(report) => assert_eq!(report.missing_prompts.len(), 1),
            other => panic!("expected validation error, got {other}"),
        }
    }

    #[test]
    fn human_and_baseline_may_skip_prompt() {
        let recs = vec![
            record("h1", RaterFamily::Human, "REMED", "u1", None, 2.0),
            record("b1", RaterFamily::Baseline, "REMED", "u1", None, 4.0),
        ];
        assert!(RatingsTable::new(recs, BTreeMap::new()).is_ok());
    }

    #[test]
    fn csv_round_trip_preserves_records() {
        let t = load_ratings(small_csv().as_bytes(), &CsvSchema::default(), BTreeMap::new()).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let again = load_ratings(buf.as_slice(), &CsvSchema::default(), t.bounds().clone()).unwrap();
        assert_eq!(t.records(), again.records());
    }

    #[test]
    fn join_is_an_inner_join_on_units() {
        let recs = vec![
            record("h1", RaterFamily::Human, "REMED", "A", None, 1.0),
            record("h1", RaterFamily::Human, "REMED", "B", None, 2.0),
            record("h1", RaterFamily::Human, "REMED", "C", None, 3.0),
        ];
        let ratings = RatingsTable::new(recs, BTreeMap::new()).unwrap();
        let outcomes = OutcomeTable::new(vec![
            OutcomeRow { unit_id: "B".into(), outcome_id: "STA".into(), value: 0.1, year: None },
            OutcomeRow { unit_id: "C".into(), outcome_id: "STA".into(), value: 0.2, year: None },
            OutcomeRow { unit_id: "D".into(), outcome_id: "STA".into(), value: 0.3, year: None },
        ])
        .unwrap();
        let panel = join_panel(
            &ratings,
            &outcomes,
            &"h1".into(),
            &"REMED".into(),
            None,
            &"STA".into(),
            YearScope::Pooled,
        )
        .unwrap();
        assert_eq!(panel.n(), 2);
        assert_eq!(panel.unit_ids, vec![UnitId::from("B"), UnitId::from("C")]);
        assert_eq!(panel.scores, vec![2.0, 3.0]);
    }

    #[test]
    fn disjoint_units_error() {
        let recs = vec![
            record("h1", RaterFamily::Human, "REMED", "A", None, 1.0),
            record("h1", RaterFamily::Human, "REMED", "B", None, 2.0),
        ];
        let ratings = RatingsTable::new(recs, BTreeMap::new()).unwrap();
        let outcomes = OutcomeTable::new(vec![OutcomeRow {
            unit_id: "Z".into(),
            outcome_id: "STA".into(),
            value: 0.1,
            year: None,
        }])
        .unwrap();
        let err = join_panel(
            &ratings,
            &outcomes,
            &"h1".into(),
            &"REMED".into(),
            None,
            &"STA".into(),
            YearScope::Pooled,
        )
        .unwrap_err();
        assert!(matches!(err, Error::DisjointUnits));
    }

    #[test]
    fn join_is_invariant_to_row_order() {
        let mut recs = vec![
            record("h1", RaterFamily::Human, "T", "u3", None, 3.0),
            record("h1", RaterFamily::Human, "T", "u1", None, 1.0),
            record("h1", RaterFamily::Human, "T", "u2", None, 2.0),
        ];
        let outcomes = OutcomeTable::new(
            (1..=3)
                .map(|i| OutcomeRow {
                    unit_id: format!("u{i}").into(),
                    outcome_id: "Y".into(),
                    value: i as f64,
                    year: None,
                })
                .collect(),
        )
        .unwrap();
        let forward = RatingsTable::new(recs.clone(), BTreeMap::new()).unwrap();
        recs.reverse();
        let reversed = RatingsTable::new(recs, BTreeMap::new()).unwrap();
        let p1 = join_panel(&forward, &outcomes, &"h1".into(), &"T".into(), None, &"Y".into(), YearScope::Pooled).unwrap();
        let p2 = join_panel(&reversed, &outcomes, &"h1".into(), &"T".into(), None, &"Y".into(), YearScope::Pooled).unwrap();
        assert_eq!(p1, p2);
    }

    #[test]
    fn identity_join_of_ten_units() {
        let recs: Vec<RatingRecord> = (0..10)
            .map(|i| record("h1", RaterFamily::Human, "T", &format!("u{i}"), None, i as f64))
            .collect();
        let ratings = RatingsTable::new(recs, BTreeMap::new()).unwrap();
        let outcomes = OutcomeTable::new(
            (0..10)
                .map(|i| OutcomeRow {
                    unit_id: format!("u{i}").into(),
                    outcome_id: "Y".into(),
                    value: i as f64,
                    year: None,
                })
                .collect(),
        )
        .unwrap();
        let p = join_panel(&ratings, &outcomes, &"h1".into(), &"T".into(), None, &"Y".into(), YearScope::Pooled).unwrap();
        assert_eq!(p.n(), 10);
        let sorted: Vec<UnitId> = {
            let mut u = p.unit_ids.clone();
            u.sort();
            u
        };
        assert_eq!(p.unit_ids, sorted);
    }

    #[test]
    fn ambiguous_prompt_is_rejected() {
        let recs = vec![
            record("gpt", RaterFamily::Model, "T", "u1", Some("base"), 1.0),
            record("gpt", RaterFamily::Model, "T", "u1", Some("cot"), 2.0),
            record("gpt", RaterFamily::Model, "T", "u2", Some("base"), 2.0),
            record("gpt", RaterFamily::Model, "T", "u2", Some("cot"), 1.0),
        ];
        let t = RatingsTable::new(recs, BTreeMap::new()).unwrap();
        assert!(matches!(
            t.series_for(&"gpt".into(), &"T".into(), None),
            Err(Error::AmbiguousPrompt { .. })
        ));
        let base = t
            .series_for(&"gpt".into(), &"T".into(), Some(&"base".into()))
            .unwrap();
        assert_eq!(base.len(), 2);
    }

    #[test]
    fn minmax_endpoints_and_constants() {
        assert_eq!(minmax_scale(&[1.0, 4.0, 7.0], (1.0, 7.0)).unwrap(), vec![0.0, 0.5, 1.0]);
        let c = minmax_scale(&[3.0, 3.0], (1.0, 7.0)).unwrap();
        assert_eq!(c, vec![1.0 / 3.0, 1.0 / 3.0]);
        assert!(matches!(
            minmax_scale(&[1.0], (2.0, 2.0)),
            Err(Error::DegenerateBounds { .. })
        ));
    }

    #[test]
    fn minmax_preserves_order() {
        let v = [2.0, 5.0, 3.0, 7.0, 2.5];
        let scaled = minmax_scale(&v, (1.0, 7.0)).unwrap();
        assert_eq!(tau_stat(&v, &scaled).unwrap(), 1.0);
    }

    #[test]
    fn experience_baseline_ranks_by_metadata() {
        let mut meta = BTreeMap::new();
        meta.insert(UnitId::from("A"), 3.0);
        meta.insert(UnitId::from("B"), 10.0);
        let t = baseline_ratings(BaselineKind::Experience, &meta, &["REMED".into()], None).unwrap();
        let series = t
            .series_for(&BaselineKind::Experience.rater_id(), &"REMED".into(), None)
            .unwrap();
        assert!(series[&"B".into()] > series[&"A".into()]);
    }

    #[test]
    fn constant_baseline_gives_all_zero_signs() {
        use crate::concordance::SignMatrix;
        let mut meta = BTreeMap::new();
        meta.insert(UnitId::from("A"), 1.0);
        meta.insert(UnitId::from("B"), 1.0);
        let t = baseline_ratings(BaselineKind::PriorOutcome, &meta, &["T".into()], None).unwrap();
        let series = t
            .series_for(&BaselineKind::PriorOutcome.rater_id(), &"T".into(), None)
            .unwrap();
        let values: Vec<f64> = series.values().copied().collect();
        assert_eq!(SignMatrix::from_values(&values).unwrap().norm_sq(), 0);
    }

    #[test]
    fn empty_baseline_metadata_errors() {
        let meta = BTreeMap::new();
        assert!(baseline_ratings(BaselineKind::Experience, &meta, &["T".into()], None).is_err());
    }

    #[test]
    fn baseline_requires_cover_of_requested_units() {
        let mut meta = BTreeMap::new();
        meta.insert(UnitId::from("A"), 1.0);
        let err = baseline_ratings(
            BaselineKind::Experience,
            &meta,
            &["T".into()],
            Some(&["A".into(), "B".into()]),
        )
        .unwrap_err();
        assert!(matches!(err, Error::UnknownId { .. }));
    }

    #[test]
    fn outcome_values_respect_year_scope() {
        let t = OutcomeTable::new(vec![
            OutcomeRow { unit_id: "t1".into(), outcome_id: "STA".into(), value: 0.5, year: Some(2010) },
            OutcomeRow { unit_id: "t1".into(), outcome_id: "STA".into(), value: 0.7, year: Some(2011) },
        ])
        .unwrap();
        let y2010 = t.values(&"STA".into(), YearScope::Year(2010)).unwrap();
        assert_eq!(y2010[&"t1".into()], 0.5);
        assert!(t.values(&"STA".into(), YearScope::Pooled).is_err(), "pooled scope is ambiguous here");
    }
}
