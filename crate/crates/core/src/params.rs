//! Parameter layout and the Poisson likelihood kernel.
//!
//! Expected counts factor as
//! `mu(x, S) = m_x` for the all-observed pattern, `m_x phi_p(x)` when only
//! `p` is missing, `m_x phi_r(x) phi_s(x) theta_rs` when exactly `r` and `s`
//! are missing, and `m_x theta_S` when three or more variables are missing.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::MechanismSpec;
use crate::table::IncompleteTable;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// One entry per full cell.
    pub baseline: Vec<f64>,
    /// Per missing position, indexed by the level of its dependency
    /// variable (length 1 for MCAR).
    pub odds: Vec<Vec<f64>>,
    /// Per pattern mask. Entries for masks with fewer than two missing
    /// variables are fixed at 1.
    pub assoc: Vec<f64>,
}

/// A table paired with a mechanism spec, with the index maps needed to
/// evaluate expected counts quickly.
#[derive(Clone, Debug)]
pub struct ModelFrame<'a> {
    pub table: &'a IncompleteTable,
    pub spec: MechanismSpec,
    /// Per missing position, per full cell: index into that position's odds.
    dep_level: Vec<Vec<usize>>,
    popcount: Vec<u32>,
}

impl<'a> ModelFrame<'a> {
    pub fn new(table: &'a IncompleteTable, spec: &MechanismSpec) -> Result<Self> {
        spec.check(table)?;
        let grid = table.full_grid();
        let dep_level = (0..spec.k())
            .map(|t| match spec.dependency(t) {
                Some(d) => (0..grid.len()).map(|x| grid.coord(x, d)).collect(),
                None => vec![0; grid.len()],
            })
            .collect();
        let popcount = (0..table.n_patterns() as u32).map(u32::count_ones).collect();
        Ok(ModelFrame { table, spec: spec.clone(), dep_level, popcount })
    }

    pub fn k(&self) -> usize {
        self.spec.k()
    }

    pub fn cells(&self) -> usize {
        self.table.full_grid().len()
    }

    pub fn n_patterns(&self) -> usize {
        self.table.n_patterns()
    }

    pub fn popcount(&self, mask: u32) -> u32 {
        self.popcount[mask as usize]
    }

    pub fn odds_len(&self, t: usize) -> usize {
        self.spec.odds_len(t, &self.table.dims())
    }

    #[inline]
    pub fn dep_level(&self, t: usize, x: usize) -> usize {
        self.dep_level[t][x]
    }

    #[inline]
    pub fn phi(&self, p: &ModelParams, t: usize, x: usize) -> f64 {
        p.odds[t][self.dep_level[t][x]]
    }

    /// `mu(x, S) / m_x`.
    #[inline]
    pub fn factor(&self, p: &ModelParams, x: usize, mask: u32) -> f64 {
        let k = self.k();
        match self.popcount(mask) {
            0 => 1.0,
            1 => self.phi(p, k - 1 - mask.trailing_zeros() as usize, x),
            2 => {
                let lo = k - 1 - mask.trailing_zeros() as usize;
                let hi = k - 1 - (31 - mask.leading_zeros()) as usize;
                self.phi(p, lo, x) * self.phi(p, hi, x) * p.assoc[mask as usize]
            }
            _ => p.assoc[mask as usize],
        }
    }

    #[inline]
    pub fn mu(&self, p: &ModelParams, x: usize, mask: u32) -> f64 {
        p.baseline[x] * self.factor(p, x, mask)
    }

    /// Full-resolution expected counts, per pattern then per full cell.
    pub fn expected(&self, p: &ModelParams) -> Vec<Vec<f64>> {
        (0..self.n_patterns() as u32)
            .map(|mask| (0..self.cells()).map(|x| self.mu(p, x, mask)).collect())
            .collect()
    }

    /// Expected counts aggregated to the observed resolution of each block.
    pub fn margins(&self, expected: &[Vec<f64>]) -> Vec<Vec<f64>> {
        (0..self.n_patterns() as u32)
            .map(|mask| fold_to_block(self.table, mask, &expected[mask as usize]))
            .collect()
    }

    pub fn loglik(&self, p: &ModelParams) -> f64 {
        loglik_from_expected(self.table, &self.expected(p))
    }

    /// Neutral starting point: observed counts (zeros bumped to 0.5),
    /// odds at the supplementary-to-observed mass ratio, associations at 1.
    pub fn default_start(&self) -> ModelParams {
        let y0 = self.table.counts(0);
        let y0s: f64 = y0.iter().sum();
        let ratio = if y0s > 0.0 { (self.table.total() - y0s) / y0s } else { 1.0 };
        ModelParams {
            baseline: y0.iter().map(|&v| if v > 0.0 { v } else { 0.5 }).collect(),
            odds: (0..self.k()).map(|t| vec![ratio.max(1e-3); self.odds_len(t)]).collect(),
            assoc: vec![1.0; self.n_patterns()],
        }
    }
}

/// Sums a full-cell array into the cells of block `mask`.
pub fn fold_to_block(table: &IncompleteTable, mask: u32, full: &[f64]) -> Vec<f64> {
    let layout = table.layout(mask);
    let mut out = vec![0.0; layout.grid.len()];
    for (x, &v) in full.iter().enumerate() {
        out[layout.cell_map[x]] += v;
    }
    out
}

/// Sums a full-cell array by the level of `var`.
pub fn sum_by_var(table: &IncompleteTable, full: &[f64], var: usize) -> Vec<f64> {
    let grid = table.full_grid();
    let mut out = vec![0.0; grid.dims()[var]];
    for (x, &v) in full.iter().enumerate() {
        out[grid.coord(x, var)] += v;
    }
    out
}

/// Sums block `mask` by the level of `var`, which must be observed there.
pub fn block_sum_by_var(table: &IncompleteTable, mask: u32, var: usize) -> Vec<f64> {
    let layout = table.layout(mask);
    let axis = layout
        .observed
        .iter()
        .position(|&v| v == var)
        .expect("variable is observed in this block");
    let mut out = vec![0.0; table.variables()[var].levels];
    for (c, &v) in table.counts(mask).iter().enumerate() {
        out[layout.grid.coord(c, axis)] += v;
    }
    out
}

/// Poisson kernel: sum over blocks of `y ln(expected margin)` minus the total
/// expected mass. Zero counts add nothing to the first sum; a zero margin
/// under a positive count gives negative infinity.
pub fn loglik_from_expected(table: &IncompleteTable, expected: &[Vec<f64>]) -> f64 {
    let mut ll = 0.0;
    for mask in 0..table.n_patterns() as u32 {
        let e = &expected[mask as usize];
        let margins = fold_to_block(table, mask, e);
        for (&y, &m) in table.counts(mask).iter().zip(&margins) {
            if y > 0.0 {
                if m <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                ll += y * m.ln();
            }
        }
        ll -= e.iter().sum::<f64>();
    }
    ll
}

/// Kernel value of the perfect fit, where every expected margin equals its
/// observed count.
pub fn saturated_loglik(table: &IncompleteTable) -> f64 {
    table
        .blocks()
        .iter()
        .flat_map(|b| b.counts.iter())
        .filter(|&&y| y > 0.0)
        .map(|&y| y * y.ln())
        .sum::<f64>()
        - table.total()
}
