//! Incomplete contingency tables: variables, response patterns and the
//! per-pattern blocks of counts.
//!
//! Patterns are addressed by a bitmask over the missing-capable variables in
//! declaration order. The first missing-capable variable owns the most
//! significant bit, so the natural integer order of masks is the binary
//! enumeration with OBSERVED=0, MISSING=1 and the last variable varying
//! fastest.

mod csv_io;
mod grid;
pub(crate) mod json;

pub use grid::Grid;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableMeta {
    pub name: String,
    pub levels: usize,
    #[serde(rename = "missing", default)]
    pub missing_capable: bool,
}

impl VariableMeta {
    pub fn new(name: impl Into<String>, levels: usize, missing_capable: bool) -> Self {
        VariableMeta { name: name.into(), levels, missing_capable }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Response {
    Observed,
    Missing,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ResponsePattern {
    pub entries: Vec<Response>,
}

impl ResponsePattern {
    pub fn from_mask(mask: u32, k: usize) -> Self {
        let entries = (0..k)
            .map(|t| if mask & bit(k, t) != 0 { Response::Missing } else { Response::Observed })
            .collect();
        ResponsePattern { entries }
    }

    pub fn mask(&self) -> u32 {
        let k = self.entries.len();
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, r)| **r == Response::Missing)
            .fold(0, |acc, (t, _)| acc | bit(k, t))
    }

    pub fn all_observed(k: usize) -> Self {
        ResponsePattern { entries: vec![Response::Observed; k] }
    }

    pub fn n_missing(&self) -> usize {
        self.entries.iter().filter(|r| **r == Response::Missing).count()
    }
}

/// Bit owned by missing position `t` among `k` missing-capable variables.
#[inline]
pub fn bit(k: usize, t: usize) -> u32 {
    1u32 << (k - 1 - t)
}

/// Missing positions set in `mask`, ascending.
pub fn positions(mask: u32, k: usize) -> Vec<usize> {
    (0..k).filter(|&t| mask & bit(k, t) != 0).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObservedBlock {
    pub pattern: ResponsePattern,
    /// Row-major over the pattern's observed variables in declaration order.
    pub counts: Vec<f64>,
}

/// Index bookkeeping for one response pattern.
#[derive(Clone, Debug)]
pub struct BlockLayout {
    pub observed: Vec<usize>,
    pub grid: Grid,
    /// Full cell index to block cell index.
    pub cell_map: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct IncompleteTable {
    variables: Vec<VariableMeta>,
    missing: Vec<usize>,
    blocks: Vec<ObservedBlock>,
    total: f64,
    full: Grid,
    layouts: Vec<BlockLayout>,
}

impl PartialEq for IncompleteTable {
    fn eq(&self, other: &Self) -> bool {
        self.variables == other.variables && self.blocks == other.blocks
    }
}

impl IncompleteTable {
    /// Validates and assembles a table. Blocks may come in any order but every
    /// pattern must appear exactly once.
    pub fn new(variables: Vec<VariableMeta>, blocks: Vec<ObservedBlock>) -> Result<Self> {
        if variables.is_empty() {
            return Err(Error::InvalidTable("no variables".into()));
        }
        for (i, v) in variables.iter().enumerate() {
            if v.levels < 2 {
                return Err(Error::InvalidTable(format!("variable {} has {} levels (need at least 2)", v.name, v.levels)));
            }
            if v.name.is_empty() {
                return Err(Error::InvalidTable("empty variable name".into()));
            }
            if variables[..i].iter().any(|w| w.name == v.name) {
                return Err(Error::InvalidTable(format!("duplicate variable name {}", v.name)));
            }
        }
        let missing: Vec<usize> = (0..variables.len()).filter(|&i| variables[i].missing_capable).collect();
        let k = missing.len();
        if k > 16 {
            return Err(Error::InvalidTable(format!("{k} missing-capable variables is more than supported")));
        }
        let n_patterns = 1usize << k;
        let full = Grid::new(variables.iter().map(|v| v.levels).collect());

        let mut slots: Vec<Option<ObservedBlock>> = vec![None; n_patterns];
        for b in blocks {
            if b.pattern.entries.len() != k {
                return Err(Error::Shape(format!(
                    "pattern has {} entries but the table has {k} missing-capable variables",
                    b.pattern.entries.len()
                )));
            }
            let mask = b.pattern.mask() as usize;
            if slots[mask].is_some() {
                return Err(Error::InvalidTable(format!("pattern {} given twice", pattern_label(&b.pattern))));
            }
            slots[mask] = Some(b);
        }

        let mut layouts = Vec::with_capacity(n_patterns);
        let mut ordered = Vec::with_capacity(n_patterns);
        let mut total = 0.0;
        for (mask, slot) in slots.into_iter().enumerate() {
            let pattern = ResponsePattern::from_mask(mask as u32, k);
            let block = slot.ok_or_else(|| Error::InvalidTable(format!("missing block for pattern {}", pattern_label(&pattern))))?;
            let layout = layout_for(&variables, &missing, mask as u32, &full);
            if block.counts.len() != layout.grid.len() {
                return Err(Error::Shape(format!(
                    "block {} has {} counts, expected {}",
                    pattern_label(&pattern),
                    block.counts.len(),
                    layout.grid.len()
                )));
            }
            let mut block_total = 0.0;
            for &c in &block.counts {
                if !c.is_finite() || c < 0.0 {
                    return Err(Error::NegativeCount { block: pattern_label(&pattern), value: c });
                }
                block_total += c;
            }
            if mask != 0 && block_total <= 0.0 {
                return Err(Error::EmptySupplementary(pattern_label(&pattern)));
            }
            total += block_total;
            layouts.push(layout);
            ordered.push(block);
        }

        Ok(IncompleteTable { variables, missing, blocks: ordered, total, full, layouts })
    }

    pub fn variables(&self) -> &[VariableMeta] {
        &self.variables
    }

    /// Number of variables.
    pub fn n(&self) -> usize {
        self.variables.len()
    }

    /// Number of missing-capable variables.
    pub fn k(&self) -> usize {
        self.missing.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.variables.iter().map(|v| v.levels).collect()
    }

    /// Variable indices of the missing-capable variables.
    pub fn missing_vars(&self) -> &[usize] {
        &self.missing
    }

    pub fn n_patterns(&self) -> usize {
        self.blocks.len()
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn blocks(&self) -> &[ObservedBlock] {
        &self.blocks
    }

    pub fn block(&self, mask: u32) -> &ObservedBlock {
        &self.blocks[mask as usize]
    }

    pub fn counts(&self, mask: u32) -> &[f64] {
        &self.blocks[mask as usize].counts
    }

    pub fn layout(&self, mask: u32) -> &BlockLayout {
        &self.layouts[mask as usize]
    }

    pub fn full_grid(&self) -> &Grid {
        &self.full
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    /// Position of variable `var` among the missing-capable variables.
    pub fn missing_position(&self, var: usize) -> Option<usize> {
        self.missing.iter().position(|&v| v == var)
    }

    /// Variable indices missing under `mask`.
    pub fn missing_in(&self, mask: u32) -> Vec<usize> {
        positions(mask, self.k()).into_iter().map(|t| self.missing[t]).collect()
    }

    pub fn block_total(&self, mask: u32) -> f64 {
        self.counts(mask).iter().sum()
    }

    /// Non-fatal findings, currently zero cells in the fully observed block.
    pub fn warnings(&self) -> Vec<String> {
        let zeros = self.counts(0).iter().filter(|&&c| c == 0.0).count();
        if zeros > 0 {
            vec![format!("{zeros} fully observed cell(s) are zero; they drop out of the likelihood")]
        } else {
            Vec::new()
        }
    }

    /// Sum of the block for `pattern` with some observed variables fixed.
    /// `fixed` holds (variable index, 0-based level) pairs.
    pub fn margin_sum(&self, pattern: &ResponsePattern, fixed: &[(usize, usize)]) -> Result<f64> {
        if pattern.entries.len() != self.k() {
            return Err(Error::InvalidArgument("pattern length does not match the table".into()));
        }
        let mask = pattern.mask();
        let layout = self.layout(mask);
        let mut axes = Vec::with_capacity(fixed.len());
        for &(var, level) in fixed {
            let axis = layout.observed.iter().position(|&v| v == var).ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "variable {} is summed out under pattern {}",
                    self.variables.get(var).map(|v| v.name.as_str()).unwrap_or("?"),
                    pattern_label(pattern)
                ))
            })?;
            if level >= self.variables[var].levels {
                return Err(Error::InvalidArgument(format!("level {} out of range for {}", level + 1, self.variables[var].name)));
            }
            axes.push((axis, level));
        }
        let counts = self.counts(mask);
        Ok((0..counts.len())
            .filter(|&c| axes.iter().all(|&(a, l)| layout.grid.coord(c, a) == l))
            .map(|c| counts[c])
            .sum())
    }

    /// Restricts missingness to the variables in `keep`. Blocks where any
    /// dropped variable is missing are discarded and the dropped variables
    /// become always observed.
    pub fn extract_subtable(&self, keep: &[usize]) -> Result<IncompleteTable> {
        if keep.is_empty() {
            return Err(Error::InvalidArgument("keep must name at least one variable".into()));
        }
        for &v in keep {
            if !self.missing.contains(&v) {
                return Err(Error::InvalidArgument(format!(
                    "{} is not a missing-capable variable",
                    self.variables.get(v).map(|v| v.name.as_str()).unwrap_or("?")
                )));
            }
        }
        let k = self.k();
        let kept_positions: Vec<usize> = (0..k).filter(|&t| keep.contains(&self.missing[t])).collect();
        let mut variables = self.variables.clone();
        for (i, v) in variables.iter_mut().enumerate() {
            v.missing_capable = v.missing_capable && keep.contains(&i);
        }
        let blocks = self
            .blocks
            .iter()
            .enumerate()
            .filter(|(mask, _)| {
                let mask = *mask as u32;
                (0..k).all(|t| kept_positions.contains(&t) || mask & bit(k, t) == 0)
            })
            .map(|(_, b)| ObservedBlock {
                pattern: ResponsePattern { entries: kept_positions.iter().map(|&t| b.pattern.entries[t]).collect() },
                counts: b.counts.clone(),
            })
            .collect();
        IncompleteTable::new(variables, blocks)
    }

    /// Short human label for a pattern, e.g. "Y1 missing, Y2 observed".
    pub fn pattern_name(&self, mask: u32) -> String {
        let k = self.k();
        if k == 0 {
            return "complete".into();
        }
        (0..k)
            .map(|t| {
                let state = if mask & bit(k, t) != 0 { "missing" } else { "observed" };
                format!("{} {state}", self.variables[self.missing[t]].name)
            })
            .collect::<Vec<_>>()
            .join(", ")
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        json::parse(s)
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        json::to_value(self)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json_value()).expect("table serialization cannot fail")
    }

    pub fn from_csv_str(s: &str) -> Result<Self> {
        csv_io::parse(s)
    }

    pub fn to_csv_string(&self) -> Result<String> {
        csv_io::write(self)
    }

    /// Parses JSON when the text starts with `{`, CSV otherwise.
    pub fn parse(s: &str) -> Result<Self> {
        if s.trim_start().starts_with('{') {
            Self::from_json_str(s)
        } else {
            Self::from_csv_str(s)
        }
    }
}

fn layout_for(variables: &[VariableMeta], missing: &[usize], mask: u32, full: &Grid) -> BlockLayout {
    let k = missing.len();
    let missing_now: Vec<usize> = positions(mask, k).into_iter().map(|t| missing[t]).collect();
    let observed: Vec<usize> = (0..variables.len()).filter(|v| !missing_now.contains(v)).collect();
    let grid = Grid::new(observed.iter().map(|&v| variables[v].levels).collect());
    let cell_map = (0..full.len())
        .map(|x| {
            observed
                .iter()
                .enumerate()
                .map(|(a, &v)| full.coord(x, v) * grid.stride(a))
                .sum()
        })
        .collect();
    BlockLayout { observed, grid, cell_map }
}

fn pattern_label(p: &ResponsePattern) -> String {
    let body: Vec<&str> = p
        .entries
        .iter()
        .map(|r| match r {
            Response::Observed => "obs",
            Response::Missing => "miss",
        })
        .collect();
    format!("[{}]", body.join(","))
}
