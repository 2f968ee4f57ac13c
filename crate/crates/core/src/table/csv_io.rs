//! Long format: one column per variable holding a 1-based level or `NA`,
//! then a final count column. Duplicate keys are summed.

use std::collections::BTreeMap;

use super::{IncompleteTable, ObservedBlock, ResponsePattern, VariableMeta};
use crate::error::{Error, Result};

pub(super) fn parse(s: &str) -> Result<IncompleteTable> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(s.as_bytes());
    let header = rdr.headers()?.clone();
    if header.len() < 2 {
        return Err(Error::Parse("need at least one variable column and a count column".into()));
    }
    let n = header.len() - 1;
    let names: Vec<String> = header.iter().take(n).map(str::to_string).collect();

    let mut rows: BTreeMap<Vec<Option<usize>>, f64> = BTreeMap::new();
    let mut max_level = vec![0usize; n];
    let mut has_na = vec![false; n];
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != n + 1 {
            return Err(Error::Parse(format!("row {} has {} fields, expected {}", line + 2, rec.len(), n + 1)));
        }
        let mut key = Vec::with_capacity(n);
        for (v, field) in rec.iter().take(n).enumerate() {
            if field.eq_ignore_ascii_case("na") {
                has_na[v] = true;
                key.push(None);
            } else {
                let level: usize = field
                    .parse()
                    .map_err(|_| Error::Parse(format!("row {}: bad level {field:?} for {}", line + 2, names[v])))?;
                if level == 0 {
                    return Err(Error::Parse(format!("row {}: levels are 1-based", line + 2)));
                }
                max_level[v] = max_level[v].max(level);
                key.push(Some(level - 1));
            }
        }
        let count: f64 = rec[n]
            .parse()
            .map_err(|_| Error::Parse(format!("row {}: bad count {:?}", line + 2, &rec[n])))?;
        if !count.is_finite() || count < 0.0 {
            return Err(Error::NegativeCount { block: format!("csv row {}", line + 2), value: count });
        }
        *rows.entry(key).or_insert(0.0) += count;
    }

    let variables: Vec<VariableMeta> = (0..n).map(|v| VariableMeta::new(names[v].clone(), max_level[v], has_na[v])).collect();
    let missing: Vec<usize> = (0..n).filter(|&v| has_na[v]).collect();
    let k = missing.len();
    let mut blocks: Vec<ObservedBlock> = (0..1u32 << k)
        .map(|mask| {
            let observed: Vec<usize> = (0..n)
                .filter(|v| match missing.iter().position(|m| m == v) {
                    Some(t) => mask & super::bit(k, t) == 0,
                    None => true,
                })
                .collect();
            let len = observed.iter().map(|&v| max_level[v].max(1)).product();
            ObservedBlock { pattern: ResponsePattern::from_mask(mask, k), counts: vec![0.0; len] }
        })
        .collect();
    for (key, count) in rows {
        let mut mask = 0u32;
        for (t, &v) in missing.iter().enumerate() {
            if key[v].is_none() {
                mask |= super::bit(k, t);
            }
        }
        let mut idx = 0usize;
        for v in 0..n {
            if let Some(l) = key[v] {
                idx = idx * max_level[v] + l;
            }
        }
        blocks[mask as usize].counts[idx] += count;
    }
    IncompleteTable::new(variables, blocks)
}

pub(super) fn write(t: &IncompleteTable) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = t.variables().iter().map(|v| v.name.clone()).collect();
    header.push("count".into());
    w.write_record(&header)?;
    for mask in 0..t.n_patterns() as u32 {
        let layout = t.layout(mask);
        for (c, &count) in t.counts(mask).iter().enumerate() {
            let mut rec: Vec<String> = vec!["NA".into(); t.n()];
            for (a, &v) in layout.observed.iter().enumerate() {
                rec[v] = (layout.grid.coord(c, a) + 1).to_string();
            }
            rec.push(count.to_string());
            w.write_record(&rec)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
