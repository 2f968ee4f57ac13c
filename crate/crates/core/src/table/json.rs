use serde_json::{json, Value};

use super::{Grid, IncompleteTable, ObservedBlock, Response, ResponsePattern, VariableMeta};
use crate::error::{Error, Result};

pub(super) fn parse(s: &str) -> Result<IncompleteTable> {
    let doc: Value = serde_json::from_str(s)?;
    from_value(&doc)
}

pub(crate) fn from_value(doc: &Value) -> Result<IncompleteTable> {
    let vars = doc.get("variables").ok_or_else(|| Error::Parse("missing \"variables\"".into()))?;
    let variables: Vec<VariableMeta> = serde_json::from_value(vars.clone())?;
    let missing: Vec<usize> = (0..variables.len()).filter(|&i| variables[i].missing_capable).collect();
    let k = missing.len();

    let blocks_v = doc
        .get("blocks")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Parse("missing \"blocks\" array".into()))?;
    let mut blocks = Vec::with_capacity(blocks_v.len());
    for b in blocks_v {
        let pattern = parse_pattern(b.get("pattern").unwrap_or(&Value::Array(vec![])))?;
        if pattern.entries.len() != k {
            return Err(Error::Shape(format!("pattern has {} entries, expected {k}", pattern.entries.len())));
        }
        let dims: Vec<usize> = (0..variables.len())
            .filter(|v| match missing.iter().position(|m| m == v) {
                Some(t) => pattern.entries[t] == Response::Observed,
                None => true,
            })
            .map(|v| variables[v].levels)
            .collect();
        let counts_v = b.get("counts").ok_or_else(|| Error::Parse("block without \"counts\"".into()))?;
        let mut counts = Vec::with_capacity(dims.iter().product());
        flatten(counts_v, &dims, &mut counts)?;
        blocks.push(ObservedBlock { pattern, counts });
    }
    IncompleteTable::new(variables, blocks)
}

fn parse_pattern(v: &Value) -> Result<ResponsePattern> {
    let arr = v.as_array().ok_or_else(|| Error::Parse("\"pattern\" must be an array".into()))?;
    let entries = arr
        .iter()
        .map(|e| match e.as_str().map(str::to_ascii_lowercase).as_deref() {
            Some("obs") | Some("observed") => Ok(Response::Observed),
            Some("miss") | Some("missing") | Some("na") => Ok(Response::Missing),
            _ => Err(Error::Parse(format!("bad pattern entry {e}"))),
        })
        .collect::<Result<_>>()?;
    Ok(ResponsePattern { entries })
}

fn flatten(v: &Value, dims: &[usize], out: &mut Vec<f64>) -> Result<()> {
    match dims.split_first() {
        None => {
            let x = v.as_f64().ok_or_else(|| Error::Parse(format!("expected a number, found {v}")))?;
            out.push(x);
            Ok(())
        }
        Some((&d, rest)) => {
            let arr = v.as_array().ok_or_else(|| Error::Shape(format!("expected an array of length {d}, found {v}")))?;
            if arr.len() != d {
                return Err(Error::Shape(format!("expected an array of length {d}, found length {}", arr.len())));
            }
            arr.iter().try_for_each(|e| flatten(e, rest, out))
        }
    }
}

fn nest(values: &[f64], grid: &Grid, axis: usize, offset: usize) -> Value {
    if axis == grid.rank() {
        return json!(values[offset]);
    }
    Value::Array(
        (0..grid.dims()[axis])
            .map(|l| nest(values, grid, axis + 1, offset + l * grid.stride(axis)))
            .collect(),
    )
}

/// Nested JSON array for a flat row-major buffer.
pub(crate) fn nested(values: &[f64], grid: &Grid) -> Value {
    nest(values, grid, 0, 0)
}

pub(super) fn to_value(t: &IncompleteTable) -> Value {
    blocks_value(t, |mask| t.counts(mask).to_vec())
}

/// Table-schema document whose counts come from `counts_for(mask)`.
pub(crate) fn blocks_value(t: &IncompleteTable, counts_for: impl Fn(u32) -> Vec<f64>) -> Value {
    let blocks: Vec<Value> = (0..t.n_patterns() as u32)
        .map(|mask| {
            let pattern: Vec<&str> = ResponsePattern::from_mask(mask, t.k())
                .entries
                .iter()
                .map(|r| if *r == Response::Missing { "miss" } else { "obs" })
                .collect();
            json!({ "pattern": pattern, "counts": nested(&counts_for(mask), &t.layout(mask).grid) })
        })
        .collect();
    json!({ "variables": t.variables(), "blocks": blocks })
}
