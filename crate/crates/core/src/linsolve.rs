//! Small dense solves for the NMAR odds equations `A x = b`, where each row
//! is a supplementary-margin cell and each column a level of the variable.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

/// Above this condition estimate the orthogonal-factorization path is used.
const COND_SWITCH: f64 = 1e8;
const RANK_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Regime {
    Square,
    /// More rows than unknowns: ordinary least squares.
    Overdetermined,
    /// Fewer rows than unknowns: minimum-norm exact solution.
    Underdetermined,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OddsSystem {
    pub rows: usize,
    pub cols: usize,
    /// Row-major `rows x cols`.
    pub matrix: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl OddsSystem {
    pub fn new(rows: usize, cols: usize, matrix: Vec<f64>, rhs: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || matrix.len() != rows * cols || rhs.len() != rows {
            return Err(Error::InvalidArgument(format!(
                "odds system shape {rows}x{cols} does not match {} entries and {} right-hand sides",
                matrix.len(),
                rhs.len()
            )));
        }
        Ok(OddsSystem { rows, cols, matrix, rhs })
    }

    pub fn regime(&self) -> Regime {
        match self.rows.cmp(&self.cols) {
            std::cmp::Ordering::Equal => Regime::Square,
            std::cmp::Ordering::Greater => Regime::Overdetermined,
            std::cmp::Ordering::Less => Regime::Underdetermined,
        }
    }

    fn a(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.matrix)
    }
}

pub fn solve_odds_system(sys: &OddsSystem) -> Result<(Vec<f64>, Regime)> {
    let a = sys.a();
    let b = DVector::from_column_slice(&sys.rhs);
    let regime = sys.regime();
    let need = sys.rows.min(sys.cols);

    let sv = a.clone().singular_values();
    let smax = sv.max();
    let rank = sv.iter().filter(|&&s| s > RANK_TOL * smax.max(f64::MIN_POSITIVE)).count();
    if smax == 0.0 || rank < need {
        return Err(Error::Singular(format!(
            "{}x{} matrix has rank {rank}, need {need} ({} deficient)",
            sys.rows,
            sys.cols,
            if sys.rows >= sys.cols { "column space" } else { "row space" }
        )));
    }
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    let well_conditioned = smax / smin <= COND_SWITCH;

    let x = match regime {
        Regime::Square => {
            let lu = if well_conditioned { a.clone().lu().solve(&b) } else { None };
            match lu {
                Some(x) => x,
                None => qr_least_squares(&a, &b)?,
            }
        }
        Regime::Overdetermined => {
            let normal = if well_conditioned {
                let at = a.transpose();
                (&at * &a).cholesky().map(|c| c.solve(&(&at * &b)))
            } else {
                None
            };
            match normal {
                Some(x) => x,
                None => qr_least_squares(&a, &b)?,
            }
        }
        Regime::Underdetermined => {
            let normal = if well_conditioned {
                (&a * a.transpose()).cholesky().map(|c| a.transpose() * c.solve(&b))
            } else {
                None
            };
            match normal {
                Some(x) => x,
                None => qr_min_norm(&a, &b)?,
            }
        }
    };
    Ok((x.iter().copied().collect(), regime))
}

fn qr_least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let qr = a.clone().qr();
    let qtb = qr.q().transpose() * b;
    let r = qr.r();
    r.solve_upper_triangular(&qtb)
        .ok_or_else(|| Error::Singular("triangular factor is singular".into()))
}

fn qr_min_norm(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    // A^T = Q R  =>  x = Q R^{-T} b
    let qr = a.transpose().qr();
    let r = qr.r();
    let z = r
        .transpose()
        .solve_lower_triangular(b)
        .ok_or_else(|| Error::Singular("triangular factor is singular".into()))?;
    Ok(qr.q() * z)
}
