use serde::Serialize;
use statrs::function::gamma::checked_gamma_ur;

use crate::error::{Error, Result};
use crate::estimators::FitResult;
use crate::model::degrees_of_freedom;
use crate::table::IncompleteTable;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GoodnessOfFit {
    pub g2: f64,
    pub df: i64,
    /// `None` when the model has no positive degrees of freedom.
    pub p_value: Option<f64>,
    /// Set when some observed count has zero expected mass.
    pub infinite: bool,
}

/// Likelihood-ratio statistic against the perfect fit.
pub fn g_squared(table: &IncompleteTable, fit: &FitResult) -> Result<GoodnessOfFit> {
    let mut log_terms = 0.0;
    let mut infinite = false;
    for mask in 0..table.n_patterns() as u32 {
        let margins = fit.expected_margins(table, mask);
        for (&y, &m) in table.counts(mask).iter().zip(&margins) {
            if y > 0.0 {
                if m <= 0.0 {
                    infinite = true;
                } else {
                    log_terms += y * (m / y).ln();
                }
            }
        }
    }
    let g2 = if infinite { f64::INFINITY } else { -2.0 * (log_terms - fit.expected_total() + table.total()) };
    let df = match degrees_of_freedom(&fit.spec, &table.dims()) {
        Ok(d) => d,
        Err(Error::NotTestable(d)) => d,
        Err(e) => return Err(e),
    };
    let p_value = if df >= 1 { Some(if infinite { 0.0 } else { chi2_survival(g2.max(0.0), df)? }) } else { None };
    Ok(GoodnessOfFit { g2, df, p_value, infinite })
}

/// Upper tail of the chi-square distribution, `Q(df/2, x/2)`.
pub fn chi2_survival(x: f64, df: i64) -> Result<f64> {
    if df <= 0 {
        return Err(Error::InvalidArgument(format!("chi-square needs positive degrees of freedom, got {df}")));
    }
    if !x.is_finite() {
        return if x == f64::INFINITY { Ok(0.0) } else { Err(Error::InvalidArgument(format!("statistic {x} is not finite"))) };
    }
    if x <= 0.0 {
        return Ok(1.0);
    }
    checked_gamma_ur(df as f64 / 2.0, x / 2.0).map_err(|e| Error::InvalidArgument(e.to_string()))
}
