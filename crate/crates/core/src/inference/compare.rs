use rayon::prelude::*;
use serde::Serialize;

use super::gof::g_squared;
use crate::error::{Error, Result};
use crate::estimators::{fit_with, FitMethod, FitOptions};
use crate::model::{enumerate_models, free_parameter_count, ModelCategory};
use crate::table::IncompleteTable;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub model: String,
    pub notation: String,
    pub number: Option<usize>,
    pub category: ModelCategory,
    pub params: usize,
    pub boundary: bool,
    pub method: Option<FitMethod>,
    pub loglik: Option<f64>,
    pub g2: Option<f64>,
    pub df: Option<i64>,
    pub p: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    pub best: Option<String>,
}

impl ComparisonReport {
    pub fn row(&self, model: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.model == model)
    }
}

/// Fits every mechanism assignment for the table's missing variables.
/// Failures are recorded per row. Rows are sorted by model label.
pub fn compare_models(table: &IncompleteTable, opts: &FitOptions) -> Result<ComparisonReport> {
    if table.k() == 0 {
        return Err(Error::InvalidModel("table has no missing-capable variables; nothing to compare".into()));
    }
    let specs = enumerate_models(table.n(), table.missing_vars())?;
    let dims = table.dims();
    let mut rows: Vec<ComparisonRow> = specs
        .par_iter()
        .map(|spec| {
            let mut row = ComparisonRow {
                model: spec.label(table.variables()),
                notation: spec.notation(table.n()),
                number: spec.model_number(table.n()),
                category: spec.category(),
                params: free_parameter_count(spec, &dims),
                boundary: false,
                method: None,
                loglik: None,
                g2: None,
                df: None,
                p: None,
                error: None,
            };
            match fit_with(table, spec, opts).and_then(|f| g_squared(table, &f).map(|g| (f, g))) {
                Ok((f, g)) => {
                    row.boundary = f.is_boundary();
                    row.method = Some(f.method);
                    row.loglik = Some(f.loglik);
                    row.g2 = Some(g.g2);
                    row.df = Some(g.df);
                    row.p = g.p_value;
                }
                Err(e) => row.error = Some(e.to_string()),
            }
            row
        })
        .collect();
    rows.sort_by(|a, b| a.model.cmp(&b.model));

    let best = rows
        .iter()
        .filter(|r| r.g2.is_some_and(f64::is_finite))
        .min_by(|a, b| {
            let (ga, gb) = (a.g2.unwrap(), b.g2.unwrap());
            let tie = (ga - gb).abs() <= 1e-9 * (1.0 + ga.abs().max(gb.abs()));
            let by_g2 = if tie { std::cmp::Ordering::Equal } else { ga.total_cmp(&gb) };
            by_g2.then(a.params.cmp(&b.params)).then(a.model.cmp(&b.model))
        })
        .map(|r| r.model.clone());
    Ok(ComparisonReport { rows, best })
}
