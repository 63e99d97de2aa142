//! Crossed factor designs and observation layouts.

use serde::Serialize;

use crate::error::{Error, Result};

/// One crossed factor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Factor {
    pub name: String,
    pub levels: usize,
}

/// A fully crossed design over up to 16 factors.
///
/// Terms (main effects and interactions) are identified by bitmasks over the
/// factor list; factor order is the declaration order and fixes every
/// canonical ordering downstream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FactorDesign {
    factors: Vec<Factor>,
}

impl FactorDesign {
    pub fn new(factors: Vec<(impl Into<String>, usize)>) -> Result<Self> {
        let factors: Vec<Factor> = factors
            .into_iter()
            .map(|(name, levels)| Factor {
                name: name.into(),
                levels,
            })
            .collect();
        if factors.is_empty() {
            return Err(Error::Empty("factor list"));
        }
        if factors.len() > 16 {
            return Err(Error::InvalidParameter("more than 16 factors".into()));
        }
        for f in &factors {
            if f.levels < 2 {
                return Err(Error::InvalidParameter(format!(
                    "factor {} needs at least 2 levels",
                    f.name
                )));
            }
        }
        let mut names: Vec<&str> = factors.iter().map(|f| f.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != factors.len() {
            return Err(Error::InvalidParameter("duplicate factor name".into()));
        }
        Ok(Self { factors })
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn n_factors(&self) -> usize {
        self.factors.len()
    }

    /// Total cells in the full cross.
    pub fn cells(&self) -> usize {
        self.factors.iter().map(|f| f.levels).product()
    }

    /// Bitmask covering every factor.
    pub fn full_mask(&self) -> u32 {
        (1u32 << self.factors.len()) - 1
    }

    /// All nonempty factor subsets in canonical order: main effects first,
    /// then higher interactions, each block in factor-position order.
    pub fn term_masks(&self) -> Vec<u32> {
        let mut masks: Vec<u32> = (1..=self.full_mask()).collect();
        masks.sort_by_key(|m| (m.count_ones(), *m));
        masks
    }

    /// Human-readable term name: factor names joined with ':'.
    pub fn term_name(&self, mask: u32) -> String {
        let names: Vec<&str> = self
            .factors
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, f)| f.name.as_str())
            .collect();
        names.join(":")
    }

    /// Parse a ':'-joined term name back to its mask.
    pub fn term_mask(&self, name: &str) -> Result<u32> {
        let mut mask = 0u32;
        for part in name.split(':') {
            let idx = self
                .factors
                .iter()
                .position(|f| f.name == part)
                .ok_or_else(|| Error::UnknownId {
                    kind: "factor",
                    id: part.to_owned(),
                })?;
            mask |= 1 << idx;
        }
        Ok(mask)
    }

    /// Level counts of the factors in a term, in factor order.
    pub fn mask_factor_levels(&self, mask: u32) -> Vec<usize> {
        self.factors
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, f)| f.levels)
            .collect()
    }

    /// Names of the factors in a term, in factor order.
    pub fn factor_names_of(&self, mask: u32) -> Vec<String> {
        self.factors
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, f)| f.name.clone())
            .collect()
    }

    /// Number of effect levels for a term: the product over its factors.
    pub fn term_size(&self, mask: u32) -> usize {
        self.factors
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, f)| f.levels)
            .product()
    }

    /// Product of the levels of factors NOT in the term.
    pub fn complement_size(&self, mask: u32) -> usize {
        self.factors
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) == 0)
            .map(|(_, f)| f.levels)
            .product()
    }

    /// Row-major cell index of a level combination.
    pub fn cell_index(&self, levels: &[usize]) -> usize {
        debug_assert_eq!(levels.len(), self.factors.len());
        let mut idx = 0usize;
        for (l, f) in levels.iter().zip(&self.factors) {
            debug_assert!(*l < f.levels);
            idx = idx * f.levels + l;
        }
        idx
    }

    /// Decode a cell index back into per-factor levels.
    pub fn cell_levels(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0usize; self.factors.len()];
        for (pos, f) in self.factors.iter().enumerate().rev() {
            out[pos] = idx % f.levels;
            idx /= f.levels;
        }
        out
    }

    /// Group index of a cell under a term: mixed-radix over the term's
    /// factors only.
    pub fn group_index(&self, mask: u32, cell_levels: &[usize]) -> usize {
        let mut idx = 0usize;
        for (pos, f) in self.factors.iter().enumerate() {
            if mask & (1 << pos) != 0 {
                idx = idx * f.levels + cell_levels[pos];
            }
        }
        idx
    }
}

/// Observations on a crossed design, balanced or not.
///
/// Per-term group indices are precomputed per observation, which is what both
/// the closed-form and sampling estimators consume. Balance (`r` observations
/// in every cell) is detected at construction; the EMS path requires it, the
/// Gibbs path does not.
#[derive(Debug, Clone)]
pub struct CrossedData {
    design: FactorDesign,
    values: Vec<f64>,
    /// `obs_groups[term_pos][obs]`: the effect level observation `obs` loads.
    obs_groups: Vec<Vec<u32>>,
    term_masks: Vec<u32>,
    /// `Some(r)` when every cell holds exactly `r` observations.
    balance: Option<usize>,
}

impl CrossedData {
    /// Build from (levels, value) rows in any order and coverage.
    pub fn from_rows(design: FactorDesign, rows: &[(Vec<usize>, f64)]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Empty("design rows"));
        }
        for (levels, value) in rows {
            if levels.len() != design.n_factors() {
                return Err(Error::InvalidParameter(
                    "row level arity differs from design".into(),
                ));
            }
            for (l, f) in levels.iter().zip(design.factors()) {
                if *l >= f.levels {
                    return Err(Error::InvalidParameter(format!(
                        "level {l} out of range for factor {}",
                        f.name
                    )));
                }
            }
            if !value.is_finite() {
                return Err(Error::NonFinite { what: "design values" });
            }
        }
        // Sort observations by cell so layout is independent of row order.
        let mut indexed: Vec<(usize, f64)> = rows
            .iter()
            .map(|(levels, v)| (design.cell_index(levels), *v))
            .collect();
        indexed.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));

        let mut counts = vec![0usize; design.cells()];
        for (cell, _) in &indexed {
            counts[*cell] += 1;
        }
        let r0 = counts[0];
        let balance = (r0 > 0 && counts.iter().all(|&c| c == r0)).then_some(r0);

        let term_masks = design.term_masks();
        let mut obs_groups: Vec<Vec<u32>> = Vec::with_capacity(term_masks.len());
        let cell_group: Vec<Vec<u32>> = term_masks
            .iter()
            .map(|&mask| {
                (0..design.cells())
                    .map(|cell| design.group_index(mask, &design.cell_levels(cell)) as u32)
                    .collect()
            })
            .collect();
        for groups in &cell_group {
            obs_groups.push(indexed.iter().map(|(cell, _)| groups[*cell]).collect());
        }
        let values: Vec<f64> = indexed.into_iter().map(|(_, v)| v).collect();
        Ok(Self {
            design,
            values,
            obs_groups,
            term_masks,
            balance,
        })
    }

    /// Wrap cell-ordered balanced values: layout `[cell][replicate]`.
    pub fn from_cell_values(
        design: FactorDesign,
        values: Vec<f64>,
        replicates: usize,
    ) -> Result<Self> {
        if replicates == 0 {
            return Err(Error::InvalidParameter("zero replicates".into()));
        }
        let expect = design.cells() * replicates;
        if values.len() != expect {
            return Err(Error::UnbalancedDesign(format!(
                "expected {expect} values ({} cells x {replicates}), got {}",
                design.cells(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "design values" });
        }
        let term_masks = design.term_masks();
        let mut obs_groups = Vec::with_capacity(term_masks.len());
        for &mask in &term_masks {
            let mut per_obs = Vec::with_capacity(values.len());
            for cell in 0..design.cells() {
                let g = design.group_index(mask, &design.cell_levels(cell)) as u32;
                per_obs.extend(std::iter::repeat_n(g, replicates));
            }
            obs_groups.push(per_obs);
        }
        Ok(Self {
            design,
            values,
            obs_groups,
            term_masks,
            balance: Some(replicates),
        })
    }

    pub fn design(&self) -> &FactorDesign {
        &self.design
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n_obs(&self) -> usize {
        self.values.len()
    }

    /// `Some(r)` when every cell holds exactly `r` observations.
    pub fn balance(&self) -> Option<usize> {
        self.balance
    }

    pub fn term_masks(&self) -> &[u32] {
        &self.term_masks
    }

    /// Per-observation group indices for the term at `term_pos` in
    /// [`Self::term_masks`] order.
    pub fn obs_groups(&self, term_pos: usize) -> &[u32] {
        &self.obs_groups[term_pos]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn design_2x3() -> FactorDesign {
        FactorDesign::new(vec![("a", 2), ("b", 3)]).unwrap()
    }

    #[test]
    fn term_enumeration_and_names() {
        let d = design_2x3();
        let masks = d.term_masks();
        assert_eq!(masks, vec![0b01, 0b10, 0b11]);
        assert_eq!(d.term_name(0b01), "a");
        assert_eq!(d.term_name(0b10), "b");
        assert_eq!(d.term_name(0b11), "a:b");
        assert_eq!(d.term_mask("a:b").unwrap(), 0b11);
        assert!(d.term_mask("z").is_err());
    }

    #[test]
    fn cell_round_trip() {
        let d = design_2x3();
        for cell in 0..d.cells() {
            let levels = d.cell_levels(cell);
            assert_eq!(d.cell_index(&levels), cell);
        }
        assert_eq!(d.cells(), 6);
        assert_eq!(d.complement_size(0b01), 3);
        assert_eq!(d.term_size(0b11), 6);
    }

    #[test]
    fn balance_detection() {
        let d = design_2x3();
        let mut rows = Vec::new();
        for a in 0..2 {
            for b in 0..3 {
                rows.push((vec![a, b], (a + b) as f64));
            }
        }
        let full = CrossedData::from_rows(d.clone(), &rows).unwrap();
        assert_eq!(full.balance(), Some(1));
        rows.pop();
        let partial = CrossedData::from_rows(d, &rows).unwrap();
        assert_eq!(partial.balance(), None);
    }

    #[test]
    fn layout_is_invariant_to_row_order() {
        let d = design_2x3();
        let mut rows = Vec::new();
        for a in 0..2 {
            for b in 0..3 {
                rows.push((vec![a, b], (10 * a + b) as f64));
            }
        }
        let forward = CrossedData::from_rows(d.clone(), &rows).unwrap();
        rows.reverse();
        let reversed = CrossedData::from_rows(d, &rows).unwrap();
        assert_eq!(forward.values(), reversed.values());
    }

    #[test]
    fn replicated_rows_group_per_cell() {
        let d = FactorDesign::new(vec![("g", 2)]).unwrap();
        let rows = vec![
            (vec![0], 1.0),
            (vec![1], 10.0),
            (vec![0], 2.0),
            (vec![1], 20.0),
        ];
        let data = CrossedData::from_rows(d, &rows).unwrap();
        assert_eq!(data.balance(), Some(2));
        assert_eq!(data.values(), &[1.0, 2.0, 10.0, 20.0]);
    }

    #[test]
    fn degenerate_designs_are_rejected() {
        assert!(FactorDesign::new(Vec::<(String, usize)>::new()).is_err());
        assert!(FactorDesign::new(vec![("a", 1)]).is_err());
        assert!(FactorDesign::new(vec![("a", 2), ("a", 3)]).is_err());
    }
}
