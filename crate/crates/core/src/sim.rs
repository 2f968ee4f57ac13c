//! Synthetic tables drawn from a model's factorization with independent
//! Poisson counts.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::MechanismSpec;
use crate::params::{fold_to_block, ModelFrame, ModelParams};
use crate::table::{bit, positions, IncompleteTable, ObservedBlock, ResponsePattern, VariableMeta};

/// Generating parameters. `baseline` holds relative weights over full cells
/// (uniform when absent); `odds` maps a missing variable's name to its odds
/// vector; `assoc` maps comma-joined variable names to a θ (default 1).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub variables: Vec<VariableMeta>,
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub baseline: Option<Vec<f64>>,
    #[serde(default)]
    pub odds: BTreeMap<String, Vec<f64>>,
    #[serde(default)]
    pub assoc: BTreeMap<String, f64>,
}

/// A table with the right shape and unit counts, used to evaluate the
/// factorization before any data exist.
pub fn skeleton(variables: &[VariableMeta]) -> Result<IncompleteTable> {
    let k = variables.iter().filter(|v| v.missing_capable).count();
    let missing: Vec<usize> = (0..variables.len()).filter(|&i| variables[i].missing_capable).collect();
    let blocks = (0..1u32 << k)
        .map(|mask| {
            let len: usize = variables
                .iter()
                .enumerate()
                .filter(|(v, _)| missing.iter().position(|m| m == v).is_none_or(|t| mask & bit(k, t) == 0))
                .map(|(_, m)| m.levels)
                .product();
            ObservedBlock { pattern: ResponsePattern::from_mask(mask, k), counts: vec![1.0; len] }
        })
        .collect();
    IncompleteTable::new(variables.to_vec(), blocks)
}

/// Model parameters scaled so that the expected total is `n`.
pub fn model_params(frame: &ModelFrame, sp: &SimParams, n: f64) -> Result<ModelParams> {
    let table = frame.table;
    let k = frame.k();
    let cells = frame.cells();
    let weights = match &sp.baseline {
        Some(w) if w.len() == cells => w.clone(),
        Some(w) => return Err(Error::InvalidArgument(format!("baseline has {} entries, expected {cells}", w.len()))),
        None => vec![1.0; cells],
    };
    if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) || weights.iter().all(|&w| w == 0.0) {
        return Err(Error::InvalidArgument("baseline weights must be nonnegative and not all zero".into()));
    }
    let mut odds = Vec::with_capacity(k);
    for t in 0..k {
        let name = &table.variables()[frame.spec.vars()[t]].name;
        let v = sp.odds.get(name).ok_or_else(|| Error::InvalidArgument(format!("no odds given for {name}")))?;
        if v.len() != frame.odds_len(t) {
            return Err(Error::InvalidArgument(format!("odds for {name} need {} values, got {}", frame.odds_len(t), v.len())));
        }
        if v.iter().any(|&o| !(o >= 0.0) || !o.is_finite()) {
            return Err(Error::InvalidArgument(format!("odds for {name} must be finite and nonnegative")));
        }
        odds.push(v.clone());
    }
    let mut assoc = vec![1.0; frame.n_patterns()];
    for (key, &value) in &sp.assoc {
        let mut mask = 0u32;
        for name in key.split(',').map(str::trim) {
            let v = table.var_index(name).ok_or_else(|| Error::InvalidArgument(format!("unknown variable {name:?} in assoc")))?;
            let t = table.missing_position(v).ok_or_else(|| Error::InvalidArgument(format!("{name} is not missing-capable")))?;
            mask |= bit(k, t);
        }
        if positions(mask, k).len() < 2 || !(value > 0.0) || !value.is_finite() {
            return Err(Error::InvalidArgument(format!("bad association entry {key:?}")));
        }
        assoc[mask as usize] = value;
    }
    let mut p = ModelParams { baseline: weights, odds, assoc };
    let total: f64 = frame.expected(&p).iter().flatten().sum();
    let scale = n / total;
    p.baseline.iter_mut().for_each(|m| *m *= scale);
    Ok(p)
}

/// Draws a table with Poisson counts whose means follow `spec` and `sp`,
/// scaled to total `n`. The same seed always yields the same table.
pub fn simulate(spec_text: &str, sp: &SimParams, n: f64, seed: u64) -> Result<IncompleteTable> {
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::InvalidArgument("N must be positive".into()));
    }
    let sk = skeleton(&sp.variables)?;
    let spec = MechanismSpec::parse(spec_text, &sk)?;
    let frame = ModelFrame::new(&sk, &spec)?;
    let p = model_params(&frame, sp, n)?;
    let expected = frame.expected(&p);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let blocks = (0..sk.n_patterns() as u32)
        .map(|mask| {
            let counts = fold_to_block(&sk, mask, &expected[mask as usize])
                .into_iter()
                .map(|lambda| {
                    if lambda <= 0.0 {
                        Ok(0.0)
                    } else {
                        Poisson::new(lambda).map(|d| d.sample(&mut rng)).map_err(|e| Error::InvalidArgument(e.to_string()))
                    }
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(ObservedBlock { pattern: ResponsePattern::from_mask(mask, sk.k()), counts })
        })
        .collect::<Result<Vec<_>>>()?;
    IncompleteTable::new(sp.variables.clone(), blocks)
}
