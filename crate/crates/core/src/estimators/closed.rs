//! Closed-form estimates.
//!
//! One missing variable: NMAR keeps `m = y` and solves the odds equations;
//! MAR and MCAR have explicit ratio-of-margins forms. Several missing
//! variables: the baseline is `y` when no variable is MCAR and otherwise the
//! all-MCAR fit of the subtable that keeps only the MCAR variables; odds
//! follow from that baseline; pairwise associations use the cross-product of
//! pattern totals when either member is MCAR and the stationarity equation
//! otherwise; higher-order associations are stationary given the baseline.

use crate::em::{em_fit, EmOptions};
use crate::error::{Error, Result};
use crate::linsolve::{solve_odds_system, OddsSystem};
use crate::model::{Mechanism, MechanismSpec};
use crate::params::{block_sum_by_var, fold_to_block, sum_by_var, ModelFrame, ModelParams};
use crate::table::{bit, positions, IncompleteTable};

pub(crate) fn ratio(num: f64, den: f64, what: &str) -> Result<f64> {
    if den == 0.0 || !den.is_finite() {
        Err(Error::DegenerateMargin(format!("{what} has a zero denominator")))
    } else {
        Ok(num / den)
    }
}

/// Closed-form estimate with the given NMAR odds components pinned at zero.
pub fn closed_form(frame: &ModelFrame, pins: &[Vec<bool>], em: &EmOptions) -> Result<ModelParams> {
    match frame.k() {
        0 => Err(Error::InvalidModel("no missing-capable variables".into())),
        1 => one_missing(frame, pins),
        _ => several_missing(frame, pins, em),
    }
}

fn one_missing(frame: &ModelFrame, pins: &[Vec<bool>]) -> Result<ModelParams> {
    match frame.spec.mechanism(0) {
        Mechanism::Nmar => {
            let m = frame.table.counts(0).to_vec();
            let odds = solve_nmar(frame, &m, 0, &pins[0])?;
            Ok(ModelParams { baseline: m, odds: vec![odds], assoc: vec![1.0; 2] })
        }
        _ => ignorable_one_missing(frame),
    }
}

/// MAR or MCAR with one missing variable.
fn ignorable_one_missing(frame: &ModelFrame) -> Result<ModelParams> {
    let table = frame.table;
    let y0 = table.counts(0);
    let y1 = table.counts(1);
    // y0 collapsed to the supplementary block's cells
    let y0c = fold_to_block(table, 1, y0);
    let (obs_by, miss_by) = match frame.spec.dependency(0) {
        Some(d) => (sum_by_var(table, y0, d), block_sum_by_var(table, 1, d)),
        None => (vec![table.block_total(0)], vec![table.block_total(1)]),
    };
    let map = &table.layout(1).cell_map;
    let baseline = (0..frame.cells())
        .map(|x| {
            let c = map[x];
            let l = frame.dep_level(0, x);
            let layer = ratio(y0c[c] + y1[c], y0c[c], "observed layer")?;
            let share = ratio(obs_by[l], obs_by[l] + miss_by[l], "dependency margin")?;
            Ok(y0[x] * layer * share)
        })
        .collect::<Result<Vec<_>>>()?;
    let odds = obs_by
        .iter()
        .zip(&miss_by)
        .map(|(&o, &s)| ratio(s, o, "observed dependency margin"))
        .collect::<Result<Vec<_>>>()?;
    Ok(ModelParams { baseline, odds: vec![odds], assoc: vec![1.0; 2] })
}

fn several_missing(frame: &ModelFrame, pins: &[Vec<bool>], em: &EmOptions) -> Result<ModelParams> {
    let table = frame.table;
    let k = frame.k();
    let mcar: Vec<usize> = (0..k).filter(|&t| frame.spec.mechanism(t) == Mechanism::Mcar).collect();
    if mcar.len() == k {
        return if k == 2 { model1(frame, em).map(|(p, _, _)| p) } else { Ok(em_fit(frame, None, em)?.params) };
    }
    let m = if mcar.is_empty() { table.counts(0).to_vec() } else { mcar_baseline(table, &mcar, em)? };
    let y0s = table.block_total(0);

    let mut odds = Vec::with_capacity(k);
    for t in 0..k {
        let b = bit(k, t);
        odds.push(match frame.spec.mechanism(t) {
            Mechanism::Mcar => vec![ratio(table.block_total(b), y0s, "observed total")?],
            Mechanism::Mar(d) => {
                let num = block_sum_by_var(table, b, d);
                let den = sum_by_var(table, &m, d);
                num.iter().zip(&den).map(|(&a, &b)| ratio(a, b, "baseline margin")).collect::<Result<_>>()?
            }
            Mechanism::Nmar => solve_nmar(frame, &m, t, &pins[t])?,
        });
    }

    let mut p = ModelParams { baseline: m, odds, assoc: vec![1.0; frame.n_patterns()] };
    for mask in (0..frame.n_patterns() as u32).filter(|&s| s.count_ones() >= 2) {
        let ys = table.block_total(mask);
        let members = positions(mask, k);
        let theta = if members.len() == 2 {
            let (r, s) = (members[0], members[1]);
            if mcar.contains(&r) || mcar.contains(&s) {
                let den = table.block_total(bit(k, r)) * table.block_total(bit(k, s));
                ratio(y0s * ys, den, "single-missing totals")?
            } else {
                let den: f64 = (0..frame.cells()).map(|x| p.baseline[x] * frame.phi(&p, r, x) * frame.phi(&p, s, x)).sum();
                ratio(ys, den, "pairwise association")?
            }
        } else {
            ratio(ys, p.baseline.iter().sum(), "baseline total")?
        };
        p.assoc[mask as usize] = theta;
    }
    Ok(p)
}

/// Baseline from the all-MCAR fit of the subtable keeping the MCAR positions.
fn mcar_baseline(table: &IncompleteTable, mcar: &[usize], em: &EmOptions) -> Result<Vec<f64>> {
    let vars: Vec<usize> = mcar.iter().map(|&t| table.missing_vars()[t]).collect();
    let sub = table.extract_subtable(&vars)?;
    let spec = MechanismSpec::uniform(&sub, Mechanism::Mcar)?;
    let frame = ModelFrame::new(&sub, &spec)?;
    match vars.len() {
        1 => Ok(ignorable_one_missing(&frame)?.baseline),
        2 => Ok(model1(&frame, em)?.0.baseline),
        _ => Ok(em_fit(&frame, None, em)?.params.baseline),
    }
}

/// Baseline iteration for two MCAR variables, starting from `m = y`:
/// each step redistributes the single-missing margins over the current
/// baseline and rescales by the share of observed mass. Odds and association
/// take their closed forms throughout. Returns (params, iterations, converged).
pub fn model1_baseline(frame: &ModelFrame, em: &EmOptions) -> Result<(ModelParams, usize, bool)> {
    model1(frame, em)
}

fn model1(frame: &ModelFrame, em: &EmOptions) -> Result<(ModelParams, usize, bool)> {
    let table = frame.table;
    let k = frame.k();
    debug_assert_eq!(k, 2);
    let y0 = table.counts(0);
    let y0s = table.block_total(0);
    let singles = [bit(k, 0), bit(k, 1)];
    let single_total: f64 = singles.iter().map(|&b| table.block_total(b)).sum();
    let theta = ratio(
        y0s * table.block_total(3),
        table.block_total(singles[0]) * table.block_total(singles[1]),
        "single-missing totals",
    )?;
    let mut assoc = vec![1.0; 4];
    assoc[3] = theta;
    let odds = vec![
        vec![ratio(table.block_total(singles[0]), y0s, "observed total")?],
        vec![ratio(table.block_total(singles[1]), y0s, "observed total")?],
    ];
    let mut p = ModelParams { baseline: y0.to_vec(), odds, assoc };
    let mut prev = frame.loglik(&p);
    for it in 1..=em.max_iter {
        let mut next: Vec<f64> = y0.to_vec();
        for &b in &singles {
            let cur = fold_to_block(table, b, &p.baseline);
            let y = table.counts(b);
            let map = &table.layout(b).cell_map;
            for x in 0..frame.cells() {
                let c = map[x];
                if cur[c] > 0.0 {
                    next[x] += y[c] * p.baseline[x] / cur[c];
                }
            }
        }
        for v in next.iter_mut() {
            *v *= y0s / (y0s + single_total);
        }
        p.baseline = next;
        let ll = frame.loglik(&p);
        let change = (ll - prev).abs() / prev.abs().max(1e-300);
        prev = ll;
        if change < em.tol {
            return Ok((p, it, true));
        }
    }
    Ok((p, em.max_iter, false))
}

/// Solves the odds equations for NMAR position `t` against baseline `m`,
/// with pinned levels fixed at zero and removed from the system.
pub(crate) fn solve_nmar(frame: &ModelFrame, m: &[f64], t: usize, pins: &[bool]) -> Result<Vec<f64>> {
    let table = frame.table;
    let var = frame.spec.vars()[t];
    let levels = table.variables()[var].levels;
    let free: Vec<usize> = (0..levels).filter(|&l| !pins[l]).collect();
    if free.is_empty() {
        return Err(Error::InfeasibleBoundary(table.variables()[var].name.clone()));
    }
    let b = bit(frame.k(), t);
    let layout = table.layout(b);
    let rows = layout.grid.len();
    let mut a = vec![0.0; rows * free.len()];
    let grid = table.full_grid();
    for (x, &mx) in m.iter().enumerate() {
        if let Some(j) = free.iter().position(|&l| l == grid.coord(x, var)) {
            a[layout.cell_map[x] * free.len() + j] += mx;
        }
    }
    let sys = OddsSystem::new(rows, free.len(), a, table.counts(b).to_vec())?;
    let (sol, _) = solve_odds_system(&sys)?;
    let mut out = vec![0.0; levels];
    for (j, &l) in free.iter().enumerate() {
        out[l] = sol[j];
    }
    Ok(out)
}
