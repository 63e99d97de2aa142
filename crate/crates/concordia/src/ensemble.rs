//! Ensemble rating sources.
//!
//! Two opposite aggregation rules: a weighted ensemble averages member scores
//! per unit, `S = sum(w_k s_k) / sum(w_k)`, while a unanimous-vote ensemble
//! keeps only the units where every member assigned the identical score and
//! uses that shared value. Both produce a derived rating source that joins
//! any downstream analysis like an ordinary rater, plus a bootstrap
//! comparison of ensemble alignment against the members' own.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::concordance::tau_stat;
use crate::data::{
    OutcomeId, OutcomeTable, PromptId, RaterFamily, RaterId, RatingRecord, RatingsTable, TaskId,
    UnitId, YearScope,
};
use crate::error::{Error, Result};
use crate::seeding::stream_rng;
use crate::util::{mean, median, quantile};

/// One ensemble member: a rater plus the prompt series to read, when the
/// rater has several.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemberKey {
    pub rater_id: RaterId,
    pub prompt_id: Option<PromptId>,
}

impl MemberKey {
    pub fn new(rater: impl Into<RaterId>) -> Self {
        Self {
            rater_id: rater.into(),
            prompt_id: None,
        }
    }

    pub fn with_prompt(rater: impl Into<RaterId>, prompt: impl Into<PromptId>) -> Self {
        Self {
            rater_id: rater.into(),
            prompt_id: Some(prompt.into()),
        }
    }
}

/// Aggregation rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleRule {
    Weighted,
    Unanimous,
}

/// Declarative ensemble definition, as it appears in analysis configs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleSpec {
    /// Rater id of the derived source.
    pub name: RaterId,
    pub rule: EnsembleRule,
    pub members: Vec<MemberKey>,
    /// Per-member nonnegative weights; required for the weighted rule.
    pub weights: Option<Vec<f64>>,
}

/// A derived rating source plus its coverage bookkeeping.
#[derive(Debug, Clone)]
pub struct EnsembleResult {
    pub table: RatingsTable,
    /// Retained units over units covered by every member, across tasks.
    pub coverage: f64,
    /// Units lost because some member did not cover them.
    pub n_dropped_units: usize,
    /// Tasks where the unanimous subset came out empty.
    pub empty_tasks: Vec<TaskId>,
}

struct MemberSeries {
    /// Per task shared by all members: member -> unit -> score.
    per_task: BTreeMap<TaskId, Vec<BTreeMap<UnitId, f64>>>,
    n_dropped_units: usize,
}

fn collect_members(table: &RatingsTable, members: &[MemberKey]) -> Result<MemberSeries> {
    if members.len() < 2 {
        return Err(Error::TooFewMembers(members.len()));
    }
    let mut distinct = members.to_vec();
    distinct.dedup();
    let unique: BTreeSet<String> = members
        .iter()
        .map(|m| format!("{}|{:?}", m.rater_id, m.prompt_id))
        .collect();
    if unique.len() != members.len() {
        return Err(Error::InvalidParameter("duplicate ensemble member".into()));
    }

    // Tasks each member covers; the ensemble is defined on their intersection.
    let mut shared_tasks: Option<BTreeSet<TaskId>> = None;
    for m in members {
        let tasks: BTreeSet<TaskId> = table
            .records()
            .iter()
            .filter(|r| r.rater_id == m.rater_id)
            .map(|r| r.task_id.clone())
            .collect();
        if tasks.is_empty() {
            return Err(Error::UnknownId {
                kind: "ensemble member rater",
                id: m.rater_id.to_string(),
            });
        }
        shared_tasks = Some(match shared_tasks {
            None => tasks,
            Some(prev) => prev.intersection(&tasks).cloned().collect(),
        });
    }
    let shared_tasks = shared_tasks.expect("at least two members");
    if shared_tasks.is_empty() {
        return Err(Error::Empty("tasks shared by all ensemble members"));
    }

    let mut per_task = BTreeMap::new();
    let mut dropped = 0usize;
    for task in shared_tasks {
        let series: Vec<BTreeMap<UnitId, f64>> = members
            .iter()
            .map(|m| table.series_for(&m.rater_id, &task, m.prompt_id.as_ref()))
            .collect::<Result<_>>()?;
        let mut union: BTreeSet<&UnitId> = BTreeSet::new();
        let mut intersection: Option<BTreeSet<&UnitId>> = None;
        for s in &series {
            let units: BTreeSet<&UnitId> = s.keys().collect();
            union.extend(units.iter().copied());
            intersection = Some(match intersection {
                None => units,
                Some(prev) => prev.intersection(&units).copied().collect(),
            });
        }
        dropped += union.len() - intersection.map_or(0, |i| i.len());
        per_task.insert(task, series);
    }
    Ok(MemberSeries {
        per_task,
        n_dropped_units: dropped,
    })
}

fn ensemble_record(name: &RaterId, task: &TaskId, unit: &UnitId, score: f64) -> RatingRecord {
    RatingRecord {
        rater_id: name.clone(),
        rater_family: RaterFamily::Ensemble,
        task_id: task.clone(),
        unit_id: unit.clone(),
        prompt_id: None,
        score,
    }
}

/// Expertise-weighted ensemble: per unit, the weighted mean of member scores
/// over the units every member covers.
pub fn weighted_scores(
    table: &RatingsTable,
    members: &[MemberKey],
    weights: &[f64],
    name: &RaterId,
) -> Result<EnsembleResult> {
    if weights.len() != members.len() {
        return Err(Error::LengthMismatch {
            left: members.len(),
            right: weights.len(),
        });
    }
    if weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
        return Err(Error::InvalidParameter("negative or non-finite weight".into()));
    }
    let total_weight: f64 = weights.iter().sum();
    if total_weight <= 0.0 {
        return Err(Error::ZeroTotalWeight);
    }
    let collected = collect_members(table, members)?;

    let mut records = Vec::new();
    let mut kept = 0usize;
    let mut eligible = 0usize;
    for (task, series) in &collected.per_task {
        let first = &series[0];
        for (unit, _) in first.iter() {
            let scores: Option<Vec<f64>> = series.iter().map(|s| s.get(unit).copied()).collect();
            let Some(scores) = scores else { continue };
            eligible += 1;
            kept += 1;
            let value = scores
                .iter()
                .zip(weights)
                .map(|(s, w)| s * w)
                .sum::<f64>()
                / total_weight;
            records.push(ensemble_record(name, task, unit, value));
        }
    }
    let table = RatingsTable::new(records, BTreeMap::new())?;
    Ok(EnsembleResult {
        table,
        coverage: if eligible == 0 {
            0.0
        } else {
            kept as f64 / eligible as f64
        },
        n_dropped_units: collected.n_dropped_units,
        empty_tasks: Vec::new(),
    })
}

/// Unanimous-vote ensemble: the subset of units where every member assigned
/// the identical score, carrying that shared value.
pub fn unanimous_subset(
    table: &RatingsTable,
    members: &[MemberKey],
    name: &RaterId,
) -> Result<EnsembleResult> {
    let collected = collect_members(table, members)?;
    let mut records = Vec::new();
    let mut kept = 0usize;
    let mut eligible = 0usize;
    let mut empty_tasks = Vec::new();
    for (task, series) in &collected.per_task {
        let mut task_kept = 0usize;
        let first = &series[0];
        for (unit, &score) in first.iter() {
            let scores: Option<Vec<f64>> = series.iter().map(|s| s.get(unit).copied()).collect();
            let Some(scores) = scores else { continue };
            eligible += 1;
            if scores.iter().all(|&s| s == score) {
                kept += 1;
                task_kept += 1;
                records.push(ensemble_record(name, task, unit, score));
            }
        }
        if task_kept == 0 {
            empty_tasks.push(task.clone());
        }
    }
    let table = RatingsTable::new(records, BTreeMap::new())?;
    Ok(EnsembleResult {
        table,
        coverage: if eligible == 0 {
            0.0
        } else {
            kept as f64 / eligible as f64
        },
        n_dropped_units: collected.n_dropped_units,
        empty_tasks,
    })
}

/// Build from a declarative spec.
pub fn build_ensemble(table: &RatingsTable, spec: &EnsembleSpec) -> Result<EnsembleResult> {
    match spec.rule {
        EnsembleRule::Weighted => {
            let weights = spec.weights.as_ref().ok_or_else(|| {
                Error::InvalidParameter("weighted ensemble needs weights".into())
            })?;
            weighted_scores(table, &spec.members, weights, &spec.name)
        }
        EnsembleRule::Unanimous => unanimous_subset(table, &spec.members, &spec.name),
    }
}

/// Alignment comparison between an ensemble and its members.
#[derive(Debug, Clone, Serialize)]
pub struct EnsembleComparison {
    pub tau_ensemble: f64,
    pub tau_member_median: f64,
    pub tau_member_mean: f64,
    /// `tau_ensemble - tau_member_median`.
    pub delta: f64,
    /// Two-sided bootstrap p for the delta; absent when unpowered.
    pub p_two_sided: Option<f64>,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Units shared by the ensemble, every member, and the outcome.
    pub n_units: usize,
    /// False when fewer than 8 shared units made the bootstrap meaningless.
    pub powered: bool,
    pub m_effective: usize,
}

impl EnsembleComparison {
    /// "member median tau -0.15 -> ensemble tau -0.28 (delta -0.13, p < 0.01, bootstrap test)"
    pub fn narrative(&self) -> String {
        let p = match self.p_two_sided {
            Some(p) if p < 0.01 => "p < 0.01".to_string(),
            Some(p) => format!("p = {p:.3}"),
            None => "unpowered".to_string(),
        };
        format!(
            "member median tau {:.2} -> ensemble tau {:.2} (delta {:.2}, {}, bootstrap test)",
            self.tau_member_median, self.tau_ensemble, self.delta, p
        )
    }
}

/// Compare ensemble alignment with an outcome against the member-median
/// alignment, by a unit-level bootstrap of the difference.
///
/// Member taus run over every unit the members and outcome share; the
/// ensemble tau runs over the ensemble's own units within that universe. A
/// unanimous ensemble equals its members on the retained subset by
/// construction, so comparing both on the subset would be vacuous - the
/// interesting question is the restriction itself. Fewer than 8 ensemble
/// units returns point estimates flagged unpowered instead of erroring.
#[allow(clippy::too_many_arguments)]
pub fn ensemble_alignment_compare(
    members_table: &RatingsTable,
    ensemble: &EnsembleResult,
    ensemble_name: &RaterId,
    members: &[MemberKey],
    task: &TaskId,
    outcomes: &OutcomeTable,
    outcome: &OutcomeId,
    scope: YearScope,
    m: usize,
    seed: u64,
) -> Result<EnsembleComparison> {
    let ens_series = ensemble.table.series_for(ensemble_name, task, None)?;
    let member_series: Vec<BTreeMap<UnitId, f64>> = members
        .iter()
        .map(|mk| members_table.series_for(&mk.rater_id, task, mk.prompt_id.as_ref()))
        .collect::<Result<_>>()?;
    let outcome_values = outcomes.values(outcome, scope)?;

    // Universe: units every member and the outcome cover.
    let mut units: Vec<&UnitId> = member_series[0]
        .keys()
        .filter(|u| {
            outcome_values.contains_key(*u) && member_series.iter().all(|s| s.contains_key(*u))
        })
        .collect();
    units.sort();
    let n = units.len();
    if n < 2 {
        return Err(Error::InsufficientData {
            what: "ensemble comparison panel",
            needed: 2,
            got: n,
        });
    }
    let y: Vec<f64> = units.iter().map(|u| outcome_values[*u]).collect();
    let member_scores: Vec<Vec<f64>> = member_series
        .iter()
        .map(|s| units.iter().map(|u| s[*u]).collect())
        .collect();
    // Ensemble values on its own subset of the universe.
    let ens_values: Vec<Option<f64>> = units.iter().map(|u| ens_series.get(*u).copied()).collect();
    let restricted_tau = |idx: &[usize]| -> Option<f64> {
        let mut es = Vec::new();
        let mut ys = Vec::new();
        for &k in idx {
            if let Some(v) = ens_values[k] {
                es.push(v);
                ys.push(y[k]);
            }
        }
        if es.len() < 2 {
            return None;
        }
        tau_stat(&es, &ys).ok()
    };

    let all_idx: Vec<usize> = (0..n).collect();
    let n_ensemble_units = ens_values.iter().flatten().count();
    let tau_ensemble = restricted_tau(&all_idx).ok_or(Error::InsufficientData {
        what: "ensemble panel",
        needed: 2,
        got: n_ensemble_units,
    })?;
    let member_taus: Vec<f64> = member_scores
        .iter()
        .map(|s| tau_stat(s, &y))
        .collect::<Result<_>>()?;
    let tau_member_median = median(&member_taus).expect("at least two members");
    let tau_member_mean = mean(&member_taus);
    let delta = tau_ensemble - tau_member_median;

    let powered = n_ensemble_units >= 8;
    if !powered || m == 0 {
        return Ok(EnsembleComparison {
            tau_ensemble,
            tau_member_median,
            tau_member_mean,
            delta,
            p_two_sided: None,
            ci_low: f64::NAN,
            ci_high: f64::NAN,
            n_units: n_ensemble_units,
            powered,
            m_effective: 0,
        });
    }

    let deltas: Vec<Option<f64>> = (0..m as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, "ensemble-boot", i);
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let yb: Vec<f64> = idx.iter().map(|&k| y[k]).collect();
            let tau_e = restricted_tau(&idx)?;
            let mut taus = Vec::with_capacity(member_scores.len());
            for s in &member_scores {
                let sb: Vec<f64> = idx.iter().map(|&k| s[k]).collect();
                taus.push(tau_stat(&sb, &yb).ok()?);
            }
            Some(tau_e - median(&taus).expect("member taus"))
        })
        .collect();
    let mut valid: Vec<f64> = deltas.into_iter().flatten().collect();
    valid.sort_by(|a, b| a.total_cmp(b));
    let m_effective = valid.len();
    let (p, ci_low, ci_high) = if valid.is_empty() {
        (None, f64::NAN, f64::NAN)
    } else {
        let at_or_below = valid.iter().filter(|&&d| d <= 0.0).count();
        let at_or_above = valid.iter().filter(|&&d| d >= 0.0).count();
        let one_sided = (1 + at_or_below.min(at_or_above)) as f64 / (m_effective + 1) as f64;
        (
            Some((2.0 * one_sided).min(1.0)),
            quantile(&valid, 0.025),
            quantile(&valid, 0.975),
        )
    };
    Ok(EnsembleComparison {
        tau_ensemble,
        tau_member_median,
        tau_member_mean,
        delta,
        p_two_sided: p,
        ci_low,
        ci_high,
        n_units: n_ensemble_units,
        powered,
        m_effective,
    })
}
