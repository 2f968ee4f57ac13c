//! Saturated log-linear decomposition of a fitted table over the variables
//! and the missing indicators, with sum-to-zero constraints.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::FitResult;
use crate::table::{Grid, IncompleteTable};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LambdaTerm {
    /// Axis indices: variables first, then one indicator per missing variable.
    pub axes: Vec<usize>,
    pub dims: Vec<usize>,
    /// Row-major over `dims`.
    pub values: Vec<f64>,
}

impl LambdaTerm {
    pub fn at(&self, levels: &[usize]) -> f64 {
        self.values[Grid::new(self.dims.clone()).flat(levels)]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LogLinearDecomposition {
    /// `Y1, ..., Yn, R1, ..., Rk` (indicator names follow the variables).
    pub axis_names: Vec<String>,
    pub axis_dims: Vec<usize>,
    /// One term per subset of axes, indexed by the subset's bitmask
    /// (axis `a` owns bit `a`).
    pub terms: Vec<LambdaTerm>,
}

impl LogLinearDecomposition {
    pub fn term(&self, axes: &[usize]) -> Option<&LambdaTerm> {
        let mask: usize = axes.iter().map(|&a| 1usize << a).sum();
        self.terms.get(mask).filter(|t| t.axes.len() == axes.len())
    }

    /// Overall mean term.
    pub fn constant(&self) -> f64 {
        self.terms[0].values[0]
    }

    /// Sum of all terms at every cell; equals the fitted log expected counts.
    pub fn reconstruct(&self) -> Vec<f64> {
        let grid = Grid::new(self.axis_dims.clone());
        (0..grid.len())
            .map(|c| {
                self.terms
                    .iter()
                    .map(|t| {
                        let coords: Vec<usize> = t.axes.iter().map(|&a| grid.coord(c, a)).collect();
                        t.at(&coords)
                    })
                    .sum()
            })
            .collect()
    }
}

/// Decomposes `log mu` over the axes (variables, then indicators; an
/// indicator is at level 0 when observed and 1 when missing).
pub fn decompose_loglinear(table: &IncompleteTable, fit: &FitResult) -> Result<LogLinearDecomposition> {
    let k = table.k();
    let cells = table.full_grid().len();
    let mut axis_dims = table.dims();
    axis_dims.extend(std::iter::repeat_n(2, k));
    let mut axis_names: Vec<String> = table.variables().iter().map(|v| v.name.clone()).collect();
    axis_names.extend(table.missing_vars().iter().map(|&v| format!("R[{}]", table.variables()[v].name)));
    let n_axes = axis_dims.len();
    if n_axes > 20 {
        return Err(Error::Decomposition("too many axes".into()));
    }
    let grid = Grid::new(axis_dims.clone());

    // With indicators as the fastest axes, the flat index is x * 2^k + mask.
    let mut logmu = vec![0.0; grid.len()];
    for x in 0..cells {
        for mask in 0..table.n_patterns() {
            let v = fit.expected[mask][x];
            if !(v > 0.0) {
                return Err(Error::Decomposition(format!("expected count is zero in pattern {}", table.pattern_name(mask as u32))));
            }
            logmu[(x << k) | mask] = v.ln();
        }
    }

    // Marginal means over the complement of each subset.
    let n_sub = 1usize << n_axes;
    let means: Vec<(Grid, Vec<f64>)> = (0..n_sub)
        .map(|s| {
            let axes: Vec<usize> = (0..n_axes).filter(|a| s & (1 << a) != 0).collect();
            let g = Grid::new(axes.iter().map(|&a| axis_dims[a]).collect());
            let mut acc = vec![0.0; g.len()];
            for (c, &v) in logmu.iter().enumerate() {
                let idx: usize = axes.iter().enumerate().map(|(i, &a)| grid.coord(c, a) * g.stride(i)).sum();
                acc[idx] += v;
            }
            let per = (grid.len() / g.len()) as f64;
            acc.iter_mut().for_each(|v| *v /= per);
            (g, acc)
        })
        .collect();

    let terms = (0..n_sub)
        .map(|s| {
            let axes: Vec<usize> = (0..n_axes).filter(|a| s & (1 << a) != 0).collect();
            let dims: Vec<usize> = axes.iter().map(|&a| axis_dims[a]).collect();
            let g = Grid::new(dims.clone());
            let values = (0..g.len())
                .map(|c| {
                    let mut total = 0.0;
                    // Inclusion-exclusion over subsets of `s`.
                    let mut b = s;
                    loop {
                        let sign = if (s.count_ones() - b.count_ones()) % 2 == 0 { 1.0 } else { -1.0 };
                        let (bg, bv) = &means[b];
                        let mut idx = 0;
                        let mut j = 0;
                        for (i, &a) in axes.iter().enumerate() {
                            if b & (1 << a) != 0 {
                                idx += g.coord(c, i) * bg.stride(j);
                                j += 1;
                            }
                        }
                        total += sign * bv[idx];
                        if b == 0 {
                            break;
                        }
                        b = (b - 1) & s;
                    }
                    total
                })
                .collect();
            LambdaTerm { axes, dims, values }
        })
        .collect();

    Ok(LogLinearDecomposition { axis_names, axis_dims, terms })
}
