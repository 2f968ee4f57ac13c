//! Model fitting: closed forms for three-variable tables with up to three
//! missing variables, boundary resolution for negative NMAR odds, and EM for
//! everything else.

mod boundary;
mod closed;

use serde::Serialize;

use crate::em::{em_fit, EmOptions};
use crate::error::{Error, Result};
use crate::model::{Mechanism, MechanismSpec};
use crate::params::{fold_to_block, loglik_from_expected, ModelFrame, ModelParams};
use crate::table::IncompleteTable;

pub use boundary::resolve_boundary;
pub use closed::{closed_form, model1_baseline};

/// Odds components below this are treated as negative and trigger boundary
/// handling; values between it and zero are clamped.
pub const NEGATIVE_TOL: f64 = -1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitMethod {
    ClosedForm,
    Em,
    Boundary,
}

/// What to do when EM started at a three-missing closed form climbs higher.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum GuardMode {
    Off,
    /// Keep the closed form and record the gap as a warning.
    #[default]
    Warn,
    /// Return the EM result instead.
    Replace,
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct FitOptions {
    pub em: EmOptions,
    pub guard: GuardMode,
    /// Skip closed forms and maximize by EM from the default start.
    pub force_em: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundaryCandidate {
    /// 0-based levels pinned to zero.
    pub zero_levels: Vec<usize>,
    pub g2: f64,
    pub loglik: f64,
    pub method: FitMethod,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundaryReport {
    /// Variable index of the pinned NMAR variable.
    pub variable: usize,
    /// 0-based levels pinned to zero in the chosen fit.
    pub zero_levels: Vec<usize>,
    pub candidates: Vec<BoundaryCandidate>,
    /// Index into `candidates` of the returned fit.
    pub chosen: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EmSummary {
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitResult {
    pub spec: MechanismSpec,
    pub params: ModelParams,
    /// Expected counts per pattern, each over all full cells.
    pub expected: Vec<Vec<f64>>,
    pub loglik: f64,
    pub method: FitMethod,
    pub boundary: Option<BoundaryReport>,
    pub em: Option<EmSummary>,
    pub warnings: Vec<String>,
}

impl FitResult {
    pub(crate) fn assemble(frame: &ModelFrame, params: ModelParams, method: FitMethod) -> Self {
        let expected = frame.expected(&params);
        let loglik = loglik_from_expected(frame.table, &expected);
        FitResult { spec: frame.spec.clone(), params, expected, loglik, method, boundary: None, em: None, warnings: Vec::new() }
    }

    pub fn baseline(&self) -> &[f64] {
        &self.params.baseline
    }

    pub fn odds(&self, t: usize) -> &[f64] {
        &self.params.odds[t]
    }

    pub fn theta(&self, mask: u32) -> f64 {
        self.params.assoc[mask as usize]
    }

    pub fn expected_total(&self) -> f64 {
        self.expected.iter().flatten().sum()
    }

    /// Expected counts at the resolution of block `mask`.
    pub fn expected_margins(&self, table: &IncompleteTable, mask: u32) -> Vec<f64> {
        fold_to_block(table, mask, &self.expected[mask as usize])
    }

    pub fn is_boundary(&self) -> bool {
        self.boundary.is_some()
    }
}

pub fn fit(table: &IncompleteTable, spec: &MechanismSpec) -> Result<FitResult> {
    fit_with(table, spec, &FitOptions::default())
}

pub fn fit_with(table: &IncompleteTable, spec: &MechanismSpec, opts: &FitOptions) -> Result<FitResult> {
    if table.k() == 0 {
        return Err(Error::InvalidModel("table has no missing-capable variables".into()));
    }
    let frame = ModelFrame::new(table, spec)?;
    let k = spec.k();
    let all_mcar = spec.mechanisms().iter().all(|m| *m == Mechanism::Mcar);

    if opts.force_em || table.n() != 3 || (all_mcar && k == 3) {
        return fit_em(&frame, None, opts);
    }

    let mut params = closed_form(&frame, &no_pins(&frame), &opts.em)?;
    let method = if all_mcar { FitMethod::Em } else { FitMethod::ClosedForm };
    let mut result = if has_negative(&frame, &params) {
        resolve_boundary(&frame, &params, opts)?
    } else {
        clamp_small_negatives(&mut params);
        FitResult::assemble(&frame, params, method)
    };

    if k == 3 && opts.guard != GuardMode::Off {
        let polished = em_fit(&frame, Some(&result.params), &opts.em)?;
        let gain = polished.loglik - result.loglik;
        if gain > 1e-6 {
            match opts.guard {
                GuardMode::Replace => {
                    let mut r = FitResult::assemble(&frame, polished.params, FitMethod::Em);
                    r.em = Some(EmSummary { iterations: polished.iterations, converged: polished.converged });
                    r.warnings.push(format!("closed form replaced by EM, which raised the log-likelihood by {gain:.6}"));
                    return Ok(r);
                }
                _ => result.warnings.push(format!("EM started at the closed form raises the log-likelihood by {gain:.6}")),
            }
        }
    }
    Ok(result)
}

pub(crate) fn fit_em(frame: &ModelFrame, start: Option<&ModelParams>, opts: &FitOptions) -> Result<FitResult> {
    let out = em_fit(frame, start, &opts.em)?;
    let mut r = FitResult::assemble(frame, out.params, FitMethod::Em);
    if !out.converged {
        r.warnings.push(format!("EM stopped after {} iterations without converging", out.iterations));
    }
    r.em = Some(EmSummary { iterations: out.iterations, converged: out.converged });
    Ok(r)
}

pub(crate) fn no_pins(frame: &ModelFrame) -> Vec<Vec<bool>> {
    (0..frame.k()).map(|t| vec![false; frame.odds_len(t)]).collect()
}

pub(crate) fn has_negative(frame: &ModelFrame, p: &ModelParams) -> bool {
    (0..frame.k()).any(|t| frame.spec.mechanism(t) == Mechanism::Nmar && p.odds[t].iter().any(|&v| v < NEGATIVE_TOL))
}

pub(crate) fn clamp_small_negatives(p: &mut ModelParams) {
    for v in p.odds.iter_mut().flatten() {
        if *v < 0.0 && *v >= NEGATIVE_TOL {
            *v = 0.0;
        }
    }
}
