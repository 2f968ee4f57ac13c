//! Joint probabilities, conditional missingness, marginal odds ratios and
//! their delta-method variances.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::{fit_with, FitOptions, FitResult};
use crate::table::{IncompleteTable, ObservedBlock};

/// Estimated cell probabilities over the full cross-classification,
/// normalized by the total expected mass.
pub fn joint_probabilities(fit: &FitResult) -> Vec<f64> {
    let cells = fit.params.baseline.len();
    let mut pi = vec![0.0; cells];
    for e in &fit.expected {
        for (p, &v) in pi.iter_mut().zip(e) {
            *p += v;
        }
    }
    let total: f64 = pi.iter().sum();
    if total > 0.0 {
        pi.iter_mut().for_each(|p| *p /= total);
    }
    pi
}

/// Probability that variable `var` is missing given the other missing
/// indicators are observed, `odds / (1 + odds)`. `levels[v]` holds the
/// 0-based level of variable `v` where known; only the dependency variable's
/// level is consulted.
pub fn conditional_missing_prob(table: &IncompleteTable, fit: &FitResult, var: usize, levels: &[Option<usize>]) -> Result<f64> {
    let t = table
        .missing_position(var)
        .ok_or_else(|| Error::InvalidArgument(format!("variable {var} is not missing-capable")))?;
    let idx = match fit.spec.dependency(t) {
        None => 0,
        Some(d) => levels.get(d).copied().flatten().ok_or_else(|| {
            Error::InvalidArgument(format!("level of {} is needed for this mechanism", table.variables()[d].name))
        })?,
    };
    let odds = *fit
        .odds(t)
        .get(idx)
        .ok_or_else(|| Error::InvalidArgument(format!("level {} out of range", idx + 1)))?;
    Ok(odds / (1.0 + odds))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarianceMethod {
    /// MCAR first variable, second depends on any variable.
    GroupMcarFirst,
    /// MCAR second variable, first depends on any variable.
    GroupMcarSecond,
    /// Both odds depend on the same variable: `OR^2 sum 1/y`.
    GroupSameDependency,
    /// Numerical delta method over every observed count.
    Delta,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VarianceEstimate {
    pub value: f64,
    pub method: VarianceMethod,
    pub warning: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OddsRatioEstimate {
    pub value: f64,
    pub variance: Option<VarianceEstimate>,
    /// 0-based (i, i', j, j', k).
    pub indices: [usize; 5],
    /// The estimate equals the fully observed cross ratio by construction.
    pub invariant_equal_to_observed: bool,
}

fn check_three_way(table: &IncompleteTable, idx: [usize; 5]) -> Result<()> {
    if table.n() != 3 {
        return Err(Error::InvalidArgument("odds ratios are defined for three-variable tables".into()));
    }
    let d = table.dims();
    let [i, i2, j, j2, k] = idx;
    if i >= i2 || j >= j2 || i2 >= d[0] || j2 >= d[1] || k >= d[2] {
        return Err(Error::InvalidArgument("need i < i', j < j' and indices within range".into()));
    }
    Ok(())
}

/// Cross ratio of Y1 by Y2 at Y3 = k over a full-cell array.
fn cross_ratio(table: &IncompleteTable, v: &[f64], idx: [usize; 5]) -> Result<f64> {
    let g = table.full_grid();
    let [i, i2, j, j2, k] = idx;
    let at = |a, b| v[g.flat(&[a, b, k])];
    let den = at(i, j2) * at(i2, j);
    if den <= 0.0 || at(i, j) <= 0.0 || at(i2, j2) <= 0.0 {
        return Err(Error::DegenerateOddsRatio(format!("zero cell among levels ({},{},{},{}) at Y3 = {}", i + 1, i2 + 1, j + 1, j2 + 1, k + 1)));
    }
    Ok(at(i, j) * at(i2, j2) / den)
}

fn or_value(table: &IncompleteTable, fit: &FitResult, idx: [usize; 5]) -> Result<f64> {
    cross_ratio(table, &joint_probabilities(fit), idx)
}

fn two_missing_number(table: &IncompleteTable, fit: &FitResult) -> Option<usize> {
    if table.missing_vars() == [0, 1] {
        fit.spec.model_number(3)
    } else {
        None
    }
}

/// Marginal odds ratio between the first two variables at level `k` of the
/// third, from the fitted joint probabilities.
pub fn marginal_odds_ratio(table: &IncompleteTable, fit: &FitResult, idx: [usize; 5]) -> Result<OddsRatioEstimate> {
    check_three_way(table, idx)?;
    let value = or_value(table, fit, idx)?;
    let invariant = match two_missing_number(table, fit) {
        Some(2 | 4 | 9 | 13 | 16) => true,
        Some(3 | 5 | 6 | 11) => !fit.is_boundary(),
        _ => false,
    };
    let variance = odds_ratio_variance(table, fit, idx, &FitOptions::default()).ok();
    Ok(OddsRatioEstimate { value, variance, indices: idx, invariant_equal_to_observed: invariant })
}

/// Variance of the marginal odds ratio. Models whose odds ratio reduces to
/// observed counts use their analytic form; all others use a central-difference
/// delta method that refits the model for every perturbed count.
pub fn odds_ratio_variance(table: &IncompleteTable, fit: &FitResult, idx: [usize; 5], opts: &FitOptions) -> Result<VarianceEstimate> {
    check_three_way(table, idx)?;
    let warning = fit
        .is_boundary()
        .then(|| "boundary fit: the delta-method variance is conditional on the pinned odds".to_string());
    let group = match two_missing_number(table, fit) {
        Some(2..=4) => Some(VarianceMethod::GroupMcarFirst),
        Some(5 | 9 | 13) => Some(VarianceMethod::GroupMcarSecond),
        Some(6 | 11 | 16) => Some(VarianceMethod::GroupSameDependency),
        _ => None,
    };
    if let (Some(method), false) = (group, fit.is_boundary()) {
        let or = or_value(table, fit, idx)?;
        let value = group_variance(table, or, idx, method)?;
        return Ok(VarianceEstimate { value, method, warning });
    }
    let value = delta_variance(table, fit, idx, opts)?;
    Ok(VarianceEstimate { value, method: VarianceMethod::Delta, warning })
}

fn group_variance(table: &IncompleteTable, or: f64, idx: [usize; 5], method: VarianceMethod) -> Result<f64> {
    let [i, i2, j, j2, k] = idx;
    let g = table.full_grid();
    let y0 = table.counts(0);
    let y = |a: usize, b: usize| y0[g.flat(&[a, b, k])];
    // Y2 missing block over (Y1, Y3); Y1 missing block over (Y2, Y3).
    let y12 = |a: usize| table.counts(1)[table.layout(1).grid.flat(&[a, k])];
    let y21 = |b: usize| table.counts(2)[table.layout(2).grid.flat(&[b, k])];
    let (d1, d2) = (table.dims()[0], table.dims()[1]);
    let layer: f64 = (0..d1).flat_map(|a| (0..d2).map(move |b| (a, b))).map(|(a, b)| y(a, b)).sum();
    let inv = |v: f64| -> Result<f64> {
        if v > 0.0 {
            Ok(1.0 / v)
        } else {
            Err(Error::DegenerateOddsRatio("zero fully observed count".into()))
        }
    };
    let or2 = or * or;
    Ok(match method {
        VarianceMethod::GroupMcarFirst => {
            let col = |b: usize| (0..d1).map(|a| y(a, b)).sum::<f64>();
            let supp: f64 = (0..d2).map(y21).sum();
            let w = |b: usize| (col(b) + y21(b)) / col(b);
            or2 * layer / (layer + supp) * (w(j) * (inv(y(i, j))? + inv(y(i2, j))?) + w(j2) * (inv(y(i, j2))? + inv(y(i2, j2))?))
        }
        VarianceMethod::GroupMcarSecond => {
            let row = |a: usize| (0..d2).map(|b| y(a, b)).sum::<f64>();
            let supp: f64 = (0..d1).map(y12).sum();
            let w = |a: usize| (row(a) + y12(a)) / row(a);
            or2 * layer / (layer + supp) * (w(i) * (inv(y(i, j))? + inv(y(i, j2))?) + w(i2) * (inv(y(i2, j))? + inv(y(i2, j2))?))
        }
        VarianceMethod::GroupSameDependency | VarianceMethod::Delta => {
            or2 * (inv(y(i, j))? + inv(y(i, j2))? + inv(y(i2, j))? + inv(y(i2, j2))?)
        }
    })
}

fn delta_variance(table: &IncompleteTable, fit: &FitResult, idx: [usize; 5], opts: &FitOptions) -> Result<f64> {
    let mut var = 0.0;
    for mask in 0..table.n_patterns() as u32 {
        let mu = fit.expected_margins(table, mask);
        for c in 0..table.counts(mask).len() {
            let y = table.counts(mask)[c];
            let h = 1e-5 * y.max(1.0);
            let eval = |delta: f64| -> Result<f64> {
                let shifted = perturbed(table, mask, c, (y + delta).max(0.0))?;
                let refit = fit_with(&shifted, &fit.spec, opts)?;
                or_value(&shifted, &refit, idx)
            };
            let (up, down) = if y - h >= 0.0 { (eval(h)?, eval(-h)?) } else { (eval(h)?, or_value(table, fit, idx)?) };
            let span = if y - h >= 0.0 { 2.0 * h } else { h };
            let d = (up - down) / span;
            var += d * d * mu[c];
        }
    }
    Ok(var)
}

fn perturbed(table: &IncompleteTable, mask: u32, cell: usize, value: f64) -> Result<IncompleteTable> {
    let blocks: Vec<ObservedBlock> = table
        .blocks()
        .iter()
        .enumerate()
        .map(|(m, b)| {
            let mut b = b.clone();
            if m as u32 == mask {
                b.counts[cell] = value;
            }
            b
        })
        .collect();
    IncompleteTable::new(table.variables().to_vec(), blocks)
}
