//! EM (more precisely ECM) maximization of the Poisson kernel for any spec.
//!
//! The E-step spreads each supplementary count over the full cells that
//! collapse onto it, proportionally to the current expected counts. The
//! conditional M-steps then update the baseline, each odds vector and each
//! association parameter in turn; every update is the exact maximizer of the
//! completed-data kernel with the other blocks held fixed, so the observed
//! kernel never decreases.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::{fold_to_block, ModelFrame, ModelParams};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EmOptions {
    /// Stop when the relative change in the kernel drops below this.
    pub tol: f64,
    pub max_iter: usize,
    pub record_trace: bool,
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions { tol: 1e-10, max_iter: 10_000, record_trace: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EmOutcome {
    #[serde(skip)]
    pub params: ModelParams,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<f64>,
}

/// Completed counts, per pattern then per full cell.
pub fn e_step(frame: &ModelFrame, p: &ModelParams) -> Vec<Vec<f64>> {
    let table = frame.table;
    (0..frame.n_patterns() as u32)
        .map(|mask| {
            let mu: Vec<f64> = (0..frame.cells()).map(|x| frame.mu(p, x, mask)).collect();
            let margins = fold_to_block(table, mask, &mu);
            let y = table.counts(mask);
            let map = &table.layout(mask).cell_map;
            mu.iter()
                .enumerate()
                .map(|(x, &m)| {
                    let c = map[x];
                    if margins[c] > 0.0 {
                        y[c] * m / margins[c]
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

/// One round of conditional M-steps given completed counts `z`: odds,
/// associations, then the baseline.
pub fn m_step(frame: &ModelFrame, p: &mut ModelParams, z: &[Vec<f64>]) {
    let cells = frame.cells();
    let k = frame.k();
    let np = frame.n_patterns() as u32;

    for t in 0..k {
        let b = crate::table::bit(k, t);
        let len = p.odds[t].len();
        let mut num = vec![0.0; len];
        let mut den = vec![0.0; len];
        for mask in (0..np).filter(|m| m & b != 0 && frame.popcount(*m) <= 2) {
            for x in 0..cells {
                let l = frame.dep_level(t, x);
                num[l] += z[mask as usize][x];
                let rest = if frame.popcount(mask) == 1 {
                    1.0
                } else {
                    let other = mask & !b;
                    let u = k - 1 - other.trailing_zeros() as usize;
                    frame.phi(p, u, x) * p.assoc[mask as usize]
                };
                den[l] += p.baseline[x] * rest;
            }
        }
        for l in 0..len {
            if den[l] > 0.0 && p.odds[t][l] != 0.0 {
                p.odds[t][l] = num[l] / den[l];
            }
        }
    }

    for mask in (0..np).filter(|m| frame.popcount(*m) >= 2) {
        let theta = p.assoc[mask as usize];
        let num: f64 = z[mask as usize].iter().sum();
        let den: f64 = (0..cells).map(|x| frame.mu(p, x, mask)).sum::<f64>() / theta;
        if den > 0.0 && num > 0.0 {
            p.assoc[mask as usize] = num / den;
        }
    }

    // Baseline last, so every iteration ends with total expected mass N.
    for x in 0..cells {
        let mut num = 0.0;
        let mut den = 0.0;
        for mask in 0..np {
            num += z[mask as usize][x];
            den += frame.factor(p, x, mask);
        }
        p.baseline[x] = if den > 0.0 { num / den } else { 0.0 };
    }
}

/// Runs EM from `start` (or the neutral default). Odds components that start
/// at exactly zero stay there, which is how pinned boundary fits are refined.
pub fn em_fit(frame: &ModelFrame, start: Option<&ModelParams>, opts: &EmOptions) -> Result<EmOutcome> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument("EM tolerance must be positive".into()));
    }
    let mut p = start.cloned().unwrap_or_else(|| frame.default_start());
    let mut prev = frame.loglik(&p);
    if !prev.is_finite() {
        return Err(Error::Em("starting point has non-finite log-likelihood".into()));
    }
    let mut trace = Vec::new();
    if opts.record_trace {
        trace.push(prev);
    }
    let slack = |l: f64| 1e-9 * (1.0 + l.abs());
    for it in 1..=opts.max_iter {
        let z = e_step(frame, &p);
        m_step(frame, &mut p, &z);
        let ll = frame.loglik(&p);
        if !ll.is_finite() {
            return Err(Error::Em(format!("log-likelihood became non-finite at iteration {it}")));
        }
        if ll < prev - slack(prev) {
            return Err(Error::Em(format!("log-likelihood decreased at iteration {it}: {prev} -> {ll}")));
        }
        if opts.record_trace {
            trace.push(ll);
        }
        let change = (ll - prev).abs() / prev.abs().max(1e-300);
        prev = ll;
        if change < opts.tol {
            return Ok(EmOutcome { params: p, loglik: ll, iterations: it, converged: true, trace });
        }
    }
    Ok(EmOutcome { params: p, loglik: prev, iterations: opts.max_iter, converged: false, trace })
}
