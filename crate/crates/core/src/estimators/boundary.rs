//! Boundary solutions for NMAR odds that come out negative.
//!
//! A two-level variable is refit twice, once with each level's odds pinned at
//! zero, and the candidate with the smaller G² wins. The refits use explicit
//! formulas where they exist (one missing variable, and two missing variables
//! where the other one is MCAR, MAR on the pinned variable, or NMAR) and a
//! constrained EM otherwise. Variables with more levels are handled by
//! pinning the most negative component and re-solving, repeatedly.

use super::closed::{closed_form, ratio, solve_nmar};
use super::{clamp_small_negatives, has_negative, no_pins, BoundaryCandidate, BoundaryReport, FitMethod, FitOptions, FitResult, NEGATIVE_TOL};
use crate::em::em_fit;
use crate::error::{Error, Result};
use crate::model::Mechanism;
use crate::params::{block_sum_by_var, saturated_loglik, sum_by_var, ModelFrame, ModelParams};
use crate::table::bit;

/// Most negative NMAR odds component as (position, level, value).
fn most_negative(frame: &ModelFrame, p: &ModelParams) -> Option<(usize, usize, f64)> {
    let mut best: Option<(usize, usize, f64)> = None;
    for t in 0..frame.k() {
        if frame.spec.mechanism(t) != Mechanism::Nmar {
            continue;
        }
        for (l, &v) in p.odds[t].iter().enumerate() {
            if v < NEGATIVE_TOL && best.is_none_or(|b| v < b.2) {
                best = Some((t, l, v));
            }
        }
    }
    best
}

pub fn resolve_boundary(frame: &ModelFrame, unconstrained: &ModelParams, opts: &FitOptions) -> Result<FitResult> {
    let Some((t, _, _)) = most_negative(frame, unconstrained) else {
        let mut p = unconstrained.clone();
        clamp_small_negatives(&mut p);
        return Ok(FitResult::assemble(frame, p, FitMethod::ClosedForm));
    };
    let var = frame.spec.vars()[t];
    if frame.table.variables()[var].levels == 2 {
        two_level(frame, t, opts)
    } else {
        greedy(frame, unconstrained, opts)
    }
}

fn two_level(frame: &ModelFrame, t: usize, opts: &FitOptions) -> Result<FitResult> {
    let sat = saturated_loglik(frame.table);
    let mut fits: Vec<(FitResult, BoundaryCandidate)> = Vec::new();
    let mut last_err = None;
    for z in 0..2 {
        let attempt = (|| -> Result<FitResult> {
            match catalogued(frame, t, z)? {
                Some(p) if !has_negative(frame, &p) => {
                    let mut p = p;
                    clamp_small_negatives(&mut p);
                    Ok(FitResult::assemble(frame, p, FitMethod::ClosedForm))
                }
                Some(p) => constrained_em(frame, p, opts),
                None => {
                    let mut pins = no_pins(frame);
                    pins[t][z] = true;
                    let p = closed_form(frame, &pins, &opts.em)?;
                    constrained_em(frame, p, opts)
                }
            }
        })();
        match attempt {
            Ok(r) => {
                let cand = BoundaryCandidate { zero_levels: vec![z], g2: -2.0 * (r.loglik - sat), loglik: r.loglik, method: r.method };
                fits.push((r, cand));
            }
            Err(e) => last_err = Some(e),
        }
    }
    if fits.is_empty() {
        return Err(last_err.unwrap_or_else(|| Error::InfeasibleBoundary(frame.table.variables()[frame.spec.vars()[t]].name.clone())));
    }
    let chosen = (0..fits.len())
        .max_by(|&a, &b| fits[a].1.loglik.total_cmp(&fits[b].1.loglik).then(b.cmp(&a)))
        .expect("at least one candidate");
    let candidates: Vec<BoundaryCandidate> = fits.iter().map(|(_, c)| c.clone()).collect();
    let (mut result, cand) = fits.swap_remove(chosen);
    result.method = FitMethod::Boundary;
    result.boundary = Some(BoundaryReport { variable: frame.spec.vars()[t], zero_levels: cand.zero_levels, candidates, chosen });
    Ok(result)
}

/// Refines a start whose pinned components are zero. Other negative NMAR
/// components are restarted at the observed odds ratio so EM can move them.
fn constrained_em(frame: &ModelFrame, mut start: ModelParams, opts: &FitOptions) -> Result<FitResult> {
    let table = frame.table;
    let y0s = table.block_total(0);
    for t in 0..frame.k() {
        let fallback = table.block_total(bit(frame.k(), t)) / y0s;
        for v in start.odds[t].iter_mut() {
            if *v < 0.0 {
                *v = fallback;
            }
        }
    }
    for v in start.assoc.iter_mut() {
        if !(*v > 0.0 && v.is_finite()) {
            *v = 1.0;
        }
    }
    let out = em_fit(frame, Some(&start), &opts.em)?;
    let mut r = FitResult::assemble(frame, out.params, FitMethod::Em);
    r.em = Some(super::EmSummary { iterations: out.iterations, converged: out.converged });
    Ok(r)
}

fn greedy(frame: &ModelFrame, unconstrained: &ModelParams, opts: &FitOptions) -> Result<FitResult> {
    let mut pins = no_pins(frame);
    let mut p = unconstrained.clone();
    let mut first: Option<usize> = None;
    while let Some((t, l, _)) = most_negative(frame, &p) {
        pins[t][l] = true;
        first.get_or_insert(t);
        if pins[t].iter().all(|&b| b) {
            return Err(Error::InfeasibleBoundary(frame.table.variables()[frame.spec.vars()[t]].name.clone()));
        }
        p = closed_form(frame, &pins, &opts.em)?;
    }
    clamp_small_negatives(&mut p);
    let t = first.expect("called with a negative component");
    let mut r = FitResult::assemble(frame, p, FitMethod::Boundary);
    let zero_levels: Vec<usize> = (0..pins[t].len()).filter(|&l| pins[t][l]).collect();
    let g2 = -2.0 * (r.loglik - saturated_loglik(frame.table));
    for (u, row) in pins.iter().enumerate() {
        if u != t && row.iter().any(|&b| b) {
            let levels: Vec<usize> = (0..row.len()).filter(|&l| row[l]).map(|l| l + 1).collect();
            r.warnings.push(format!(
                "odds of {} also pinned to zero at level(s) {levels:?}",
                frame.table.variables()[frame.spec.vars()[u]].name
            ));
        }
    }
    r.boundary = Some(BoundaryReport {
        variable: frame.spec.vars()[t],
        zero_levels: zero_levels.clone(),
        candidates: vec![BoundaryCandidate { zero_levels, g2, loglik: r.loglik, method: FitMethod::ClosedForm }],
        chosen: 0,
    });
    Ok(r)
}

/// Explicit boundary estimates with level `z` of NMAR position `t` pinned.
/// `None` when no formula covers the spec.
pub(crate) fn catalogued(frame: &ModelFrame, t: usize, z: usize) -> Result<Option<ModelParams>> {
    match frame.k() {
        1 => one_missing(frame, z).map(Some),
        2 => two_missing(frame, t, z),
        _ => Ok(None),
    }
}

fn one_missing(frame: &ModelFrame, z: usize) -> Result<ModelParams> {
    let table = frame.table;
    let var = frame.spec.vars()[0];
    let f = 1 - z;
    let y0 = table.counts(0);
    let y1 = table.counts(1);
    let y1s = table.block_total(1);
    let y0f = sum_by_var(table, y0, var)[f];
    let grid = table.full_grid();
    let map = &table.layout(1).cell_map;
    let share = ratio(y0f, y0f + y1s, "observed layer")?;
    let baseline = (0..frame.cells())
        .map(|x| if grid.coord(x, var) == z { y0[x] } else { (y0[x] + y1[map[x]]) * share })
        .collect();
    let mut odds = vec![0.0; 2];
    odds[f] = ratio(y1s, y0f, "observed layer")?;
    Ok(ModelParams { baseline, odds: vec![odds], assoc: vec![1.0; 2] })
}

fn two_missing(frame: &ModelFrame, tn: usize, z: usize) -> Result<Option<ModelParams>> {
    let table = frame.table;
    let k = 2;
    let to = 1 - tn;
    let vn = frame.spec.vars()[tn];
    let f = 1 - z;
    let (bn, bo) = (bit(k, tn), bit(k, to));
    let y0 = table.counts(0);
    let yn = table.counts(bn);
    let (y0s, yns, yos, ynos) = (table.block_total(0), table.block_total(bn), table.block_total(bo), table.block_total(3));
    let y0_n = sum_by_var(table, y0, vn);
    let yo_n = block_sum_by_var(table, bo, vn);
    let grid = table.full_grid();
    let map_n = &table.layout(bn).cell_map;

    let mut odds = vec![Vec::new(), Vec::new()];
    let mut assoc = vec![1.0; 4];
    let mut phi_n = vec![0.0; 2];

    let other = frame.spec.mechanism(to);
    let baseline: Vec<f64> = match other {
        Mechanism::Mcar => {
            let obs_n = y0s + yos;
            phi_n[f] = ratio(yns * obs_n, y0s * (y0_n[f] + yo_n[f]), "observed layer")?;
            odds[to] = vec![ratio(yos, y0s, "observed total")?];
            assoc[3] = ratio(y0s * ynos, yos * yns, "single-missing totals")?;
            let scale_z = ratio((y0_n[z] + yo_n[z]) * y0s, y0_n[z] * obs_n, "observed layer")?;
            let scale_f = ratio(y0s * (y0_n[f] + yo_n[f]), obs_n * (y0_n[f] + yns), "observed layer")?;
            (0..frame.cells())
                .map(|x| if grid.coord(x, vn) == z { y0[x] * scale_z } else { (y0[x] + yn[map_n[x]]) * scale_f })
                .collect()
        }
        Mechanism::Mar(d) if d == vn => {
            odds[to] = (0..2).map(|l| ratio(yo_n[l], y0_n[l], "observed layer")).collect::<Result<_>>()?;
            same_layer(frame, vn, z, &y0_n, &yo_n, &mut phi_n, &mut assoc)?
        }
        Mechanism::Nmar => same_layer(frame, vn, z, &y0_n, &yo_n, &mut phi_n, &mut assoc)?,
        Mechanism::Mar(_) => return Ok(None),
    };
    if other == Mechanism::Nmar {
        odds[to] = solve_nmar(frame, &baseline, to, &vec![false; frame.odds_len(to)])?;
    }
    odds[tn] = phi_n;
    Ok(Some(ModelParams { baseline, odds, assoc }))
}

/// Shared part of the boundary forms where the other variable's odds are
/// indexed by the pinned variable or by its own level: `m = y` on the pinned
/// layer, and the free layer absorbs the supplementary margin.
fn same_layer(
    frame: &ModelFrame,
    vn: usize,
    z: usize,
    y0_n: &[f64],
    yo_n: &[f64],
    phi_n: &mut [f64],
    assoc: &mut [f64],
) -> Result<Vec<f64>> {
    let table = frame.table;
    let tn = frame.spec.vars().iter().position(|&v| v == vn).expect("pinned variable is missing-capable");
    let bn = bit(2, tn);
    let f = 1 - z;
    let yn = table.counts(bn);
    let yns = table.block_total(bn);
    let ynos = table.block_total(3);
    phi_n[f] = ratio(yns, y0_n[f], "observed layer")?;
    assoc[3] = ratio(y0_n[f] * ynos, yo_n[f] * yns, "supplementary layer")?;
    let share = ratio(y0_n[f], y0_n[f] + yns, "observed layer")?;
    let grid = table.full_grid();
    let map_n = &table.layout(bn).cell_map;
    let y0 = table.counts(0);
    Ok((0..frame.cells())
        .map(|x| if grid.coord(x, vn) == z { y0[x] } else { (y0[x] + yn[map_n[x]]) * share })
        .collect())
}
