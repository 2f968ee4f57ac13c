//! JSON documents and plain-text tables for fits and comparisons.

use std::fmt::Write as _;

use serde_json::{json, Value};

use crate::error::Result;
use crate::estimators::FitResult;
use crate::inference::{g_squared, ComparisonReport};
use crate::model::{free_parameter_count, Mechanism};
use crate::table::{json, Grid, IncompleteTable, ResponsePattern};

fn dependency_token(table: &IncompleteTable, m: Mechanism) -> String {
    match m {
        Mechanism::Nmar => "self".into(),
        Mechanism::Mcar => "const".into(),
        Mechanism::Mar(d) => table.variables()[d].name.clone(),
    }
}

/// Expected counts in the table schema (one block per pattern at observed
/// resolution) plus a `full` section with every pattern over all variables.
pub fn expected_document(table: &IncompleteTable, fit: &FitResult) -> Value {
    let mut doc = json::blocks_value(table, |mask| fit.expected_margins(table, mask));
    let full = table.full_grid();
    let full_blocks: Vec<Value> = (0..table.n_patterns() as u32)
        .map(|mask| {
            let pattern: Vec<&str> = ResponsePattern::from_mask(mask, table.k())
                .entries
                .iter()
                .map(|r| if *r == crate::table::Response::Missing { "miss" } else { "obs" })
                .collect();
            json!({ "pattern": pattern, "counts": json::nested(&fit.expected[mask as usize], full) })
        })
        .collect();
    doc["full"] = Value::Array(full_blocks);
    doc
}

pub fn fit_json(table: &IncompleteTable, fit: &FitResult) -> Result<Value> {
    let gof = g_squared(table, fit)?;
    let spec = &fit.spec;
    let names = |vs: &[usize]| -> Vec<String> { vs.iter().map(|&v| table.variables()[v].name.clone()).collect() };
    let odds: Vec<Value> = (0..spec.k())
        .map(|t| {
            json!({
                "variable": table.variables()[spec.vars()[t]].name,
                "dependency": dependency_token(table, spec.mechanism(t)),
                "values": fit.odds(t),
            })
        })
        .collect();
    let assoc: Vec<Value> = (0..table.n_patterns() as u32)
        .filter(|m| m.count_ones() >= 2)
        .map(|m| json!({ "variables": names(&table.missing_in(m)), "value": fit.theta(m) }))
        .collect();
    let boundary = fit.boundary.as_ref().map(|b| {
        json!({
            "variable": table.variables()[b.variable].name,
            "zero_levels": b.zero_levels.iter().map(|l| l + 1).collect::<Vec<_>>(),
            "candidates": b.candidates.iter().map(|c| json!({
                "zero_levels": c.zero_levels.iter().map(|l| l + 1).collect::<Vec<_>>(),
                "g2": c.g2,
                "loglik": c.loglik,
                "method": c.method,
            })).collect::<Vec<_>>(),
        })
    });
    Ok(json!({
        "model": spec.label(table.variables()),
        "notation": spec.notation(table.n()),
        "number": spec.model_number(table.n()),
        "category": spec.category(),
        "method": fit.method,
        "boundary": boundary,
        "loglik": fit.loglik,
        "free_parameters": free_parameter_count(spec, &table.dims()),
        "g2": gof.g2,
        "df": gof.df,
        "p": gof.p_value,
        "baseline": json::nested(fit.baseline(), table.full_grid()),
        "odds": odds,
        "assoc": assoc,
        "expected": expected_document(table, fit),
        "em": fit.em,
        "warnings": fit.warnings,
    }))
}

fn fmt_opt(v: Option<f64>, prec: usize) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.prec$}"))
}

/// Aligned text: estimates, fit statistics, then the full expected table with
/// one row per cell and one column per response pattern.
pub fn fit_text(table: &IncompleteTable, fit: &FitResult) -> Result<String> {
    let gof = g_squared(table, fit)?;
    let spec = &fit.spec;
    let mut s = String::new();
    writeln!(s, "model     {}  {}", spec.label(table.variables()), spec.notation(table.n())).ok();
    writeln!(s, "category  {}", spec.category()).ok();
    let method = serde_json::to_value(fit.method).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
    writeln!(s, "method    {method}").ok();
    writeln!(s, "G2        {:.4}   df {}   p {}", gof.g2, gof.df, fmt_opt(gof.p_value, 4)).ok();
    writeln!(s, "loglik    {:.4}", fit.loglik).ok();
    for t in 0..spec.k() {
        let vals: Vec<String> = fit.odds(t).iter().map(|v| format!("{v:.6}")).collect();
        writeln!(
            s,
            "odds      {} | {}: {}",
            table.variables()[spec.vars()[t]].name,
            dependency_token(table, spec.mechanism(t)),
            vals.join(" ")
        )
        .ok();
    }
    for m in (0..table.n_patterns() as u32).filter(|m| m.count_ones() >= 2) {
        let names: Vec<String> = table.missing_in(m).iter().map(|&v| table.variables()[v].name.clone()).collect();
        writeln!(s, "theta     {}: {:.6}", names.join(","), fit.theta(m)).ok();
    }
    if let Some(b) = &fit.boundary {
        let lv: Vec<usize> = b.zero_levels.iter().map(|l| l + 1).collect();
        writeln!(s, "boundary  {} odds pinned to 0 at level(s) {lv:?}", table.variables()[b.variable].name).ok();
        for c in &b.candidates {
            let lv: Vec<usize> = c.zero_levels.iter().map(|l| l + 1).collect();
            writeln!(s, "          candidate {lv:?}: G2 {:.4}", c.g2).ok();
        }
    }
    for w in &fit.warnings {
        writeln!(s, "warning   {w}").ok();
    }
    s.push('\n');
    s.push_str(&expected_text(table, fit));
    Ok(s)
}

pub fn expected_text(table: &IncompleteTable, fit: &FitResult) -> String {
    let grid: &Grid = table.full_grid();
    let mut s = String::new();
    let mut header: Vec<String> = table.variables().iter().map(|v| v.name.clone()).collect();
    for mask in 0..table.n_patterns() as u32 {
        let r: String = ResponsePattern::from_mask(mask, table.k())
            .entries
            .iter()
            .map(|e| if *e == crate::table::Response::Missing { '2' } else { '1' })
            .collect();
        header.push(format!("R={r}"));
    }
    let widths: Vec<usize> = header.iter().map(|h| h.len().max(10)).collect();
    let line = |cells: &[String]| -> String {
        cells.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect::<Vec<_>>().join(" ")
    };
    writeln!(s, "{}", line(&header)).ok();
    for x in 0..grid.len() {
        let mut row: Vec<String> = grid.coords(x).iter().map(|c| (c + 1).to_string()).collect();
        for mask in 0..table.n_patterns() {
            row.push(format!("{:.2}", fit.expected[mask][x]));
        }
        writeln!(s, "{}", line(&row)).ok();
    }
    s
}

pub fn comparison_text(rep: &ComparisonReport) -> String {
    let mut s = String::new();
    writeln!(s, "{:<28} {:<16} {:>4} {:<14} {:>8} {:>12} {:>10} {:>4} {:>8}", "model", "notation", "no.", "category", "boundary", "loglik", "G2", "df", "p").ok();
    for r in &rep.rows {
        writeln!(
            s,
            "{:<28} {:<16} {:>4} {:<14} {:>8} {:>12} {:>10} {:>4} {:>8}",
            r.model,
            r.notation,
            r.number.map_or("-".into(), |n| n.to_string()),
            r.category.label(),
            if r.boundary { "yes" } else { "no" },
            fmt_opt(r.loglik, 2),
            fmt_opt(r.g2, 4),
            r.df.map_or("-".into(), |d| d.to_string()),
            fmt_opt(r.p, 4),
        )
        .ok();
        if let Some(e) = &r.error {
            writeln!(s, "    error: {e}").ok();
        }
    }
    writeln!(s, "best: {}", rep.best.as_deref().unwrap_or("-")).ok();
    s
}
