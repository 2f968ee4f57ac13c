//! Missing-data mechanisms, their enumeration and parameter accounting.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::{IncompleteTable, VariableMeta};

/// How the odds of a variable being missing depend on the data.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mechanism {
    /// Depends on the variable's own (possibly unobserved) level.
    Nmar,
    /// Depends on the level of another variable.
    Mar(usize),
    /// Constant.
    Mcar,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelCategory {
    #[serde(rename = "MCAR")]
    Mcar,
    #[serde(rename = "NMAR")]
    Nmar,
    #[serde(rename = "MAR")]
    Mar,
    #[serde(rename = "MCAR+NMAR")]
    McarNmar,
    #[serde(rename = "MCAR+MAR")]
    McarMar,
    #[serde(rename = "NMAR+MAR")]
    NmarMar,
    #[serde(rename = "NMAR+MAR+MCAR")]
    Mixed,
}

impl ModelCategory {
    pub const ALL: [ModelCategory; 7] = [
        ModelCategory::Mcar,
        ModelCategory::Nmar,
        ModelCategory::Mar,
        ModelCategory::McarNmar,
        ModelCategory::McarMar,
        ModelCategory::NmarMar,
        ModelCategory::Mixed,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ModelCategory::Mcar => "MCAR",
            ModelCategory::Nmar => "NMAR",
            ModelCategory::Mar => "MAR",
            ModelCategory::McarNmar => "MCAR+NMAR",
            ModelCategory::McarMar => "MCAR+MAR",
            ModelCategory::NmarMar => "NMAR+MAR",
            ModelCategory::Mixed => "NMAR+MAR+MCAR",
        }
    }

    /// Number of models in this category for `n` variables with `k` missing.
    pub fn expected_count(self, n: usize, k: usize) -> i64 {
        let (n, k) = (n as i64, k as u32);
        match self {
            ModelCategory::Mcar | ModelCategory::Nmar => 1,
            ModelCategory::Mar => (n - 1).pow(k),
            ModelCategory::McarNmar => 2i64.pow(k) - 2,
            ModelCategory::McarMar | ModelCategory::NmarMar => n.pow(k) - (n - 1).pow(k) - 1,
            ModelCategory::Mixed => (n + 1).pow(k) + (n - 1).pow(k) - 2 * (n.pow(k) - 1) - 2i64.pow(k),
        }
    }
}

impl fmt::Display for ModelCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One mechanism per missing-capable variable.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MechanismSpec {
    vars: Vec<usize>,
    mechanisms: Vec<Mechanism>,
}

impl MechanismSpec {
    /// `vars` are the missing-capable variable indices in declaration order.
    pub fn new(vars: Vec<usize>, mechanisms: Vec<Mechanism>) -> Result<Self> {
        if vars.len() != mechanisms.len() {
            return Err(Error::InvalidModel("one mechanism per missing variable is required".into()));
        }
        if vars.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidModel("missing variables must be distinct and ascending".into()));
        }
        for (&v, m) in vars.iter().zip(&mechanisms) {
            if *m == Mechanism::Mar(v) {
                return Err(Error::InvalidModel("a MAR target must differ from the variable itself".into()));
            }
        }
        Ok(MechanismSpec { vars, mechanisms })
    }

    /// Builds a spec from dependency variables: `Some(v)` with `v` the
    /// variable itself is NMAR, another index is MAR, `None` is MCAR.
    pub fn from_dependencies(vars: Vec<usize>, deps: &[Option<usize>]) -> Result<Self> {
        let mechanisms = vars
            .iter()
            .zip(deps)
            .map(|(&v, d)| match d {
                None => Mechanism::Mcar,
                Some(d) if *d == v => Mechanism::Nmar,
                Some(d) => Mechanism::Mar(*d),
            })
            .collect();
        Self::new(vars, mechanisms)
    }

    /// All missing-capable variables of `table` share one mechanism kind.
    pub fn uniform(table: &IncompleteTable, m: Mechanism) -> Result<Self> {
        Self::new(table.missing_vars().to_vec(), vec![m; table.k()])
    }

    pub fn vars(&self) -> &[usize] {
        &self.vars
    }

    pub fn mechanisms(&self) -> &[Mechanism] {
        &self.mechanisms
    }

    pub fn k(&self) -> usize {
        self.vars.len()
    }

    pub fn mechanism(&self, t: usize) -> Mechanism {
        self.mechanisms[t]
    }

    /// Variable whose level indexes the odds of missing position `t`.
    pub fn dependency(&self, t: usize) -> Option<usize> {
        match self.mechanisms[t] {
            Mechanism::Nmar => Some(self.vars[t]),
            Mechanism::Mar(d) => Some(d),
            Mechanism::Mcar => None,
        }
    }

    pub fn category(&self) -> ModelCategory {
        let nmar = self.mechanisms.iter().any(|m| *m == Mechanism::Nmar);
        let mar = self.mechanisms.iter().any(|m| matches!(m, Mechanism::Mar(_)));
        let mcar = self.mechanisms.iter().any(|m| *m == Mechanism::Mcar);
        match (nmar, mar, mcar) {
            (false, false, _) => ModelCategory::Mcar,
            (true, false, false) => ModelCategory::Nmar,
            (false, true, false) => ModelCategory::Mar,
            (true, false, true) => ModelCategory::McarNmar,
            (false, true, true) => ModelCategory::McarMar,
            (true, true, false) => ModelCategory::NmarMar,
            (true, true, true) => ModelCategory::Mixed,
        }
    }

    /// Checks the spec against a table's variables.
    pub fn check(&self, table: &IncompleteTable) -> Result<()> {
        if self.vars != table.missing_vars() {
            return Err(Error::InvalidModel("model does not cover exactly the table's missing-capable variables".into()));
        }
        for m in &self.mechanisms {
            if let Mechanism::Mar(d) = m {
                if *d >= table.n() {
                    return Err(Error::InvalidModel(format!("MAR target index {d} out of range")));
                }
            }
        }
        Ok(())
    }

    /// Parses `"Y1:Y3,Y2:self"`. Tokens: `self` (NMAR), `const` (MCAR) or a
    /// variable name (MAR on that variable).
    pub fn parse(text: &str, table: &IncompleteTable) -> Result<Self> {
        let vars = table.variables();
        let mut deps: Vec<Option<Option<usize>>> = vec![None; table.k()];
        for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (name, token) = item
                .split_once(':')
                .ok_or_else(|| Error::InvalidModel(format!("expected VAR:TOKEN, found {item:?}")))?;
            let (name, token) = (name.trim(), token.trim());
            let v = table.var_index(name).ok_or_else(|| Error::InvalidModel(format!("unknown variable {name:?}")))?;
            let t = table
                .missing_position(v)
                .ok_or_else(|| Error::InvalidModel(format!("{name} is not a missing-capable variable")))?;
            if deps[t].is_some() {
                return Err(Error::InvalidModel(format!("{name} given more than once")));
            }
            let dep = match token.to_ascii_lowercase().as_str() {
                "self" | "nmar" => Some(v),
                "const" | "mcar" => None,
                _ => Some(table.var_index(token).ok_or_else(|| Error::InvalidModel(format!("unknown variable {token:?}")))?),
            };
            deps[t] = Some(dep);
        }
        let deps: Vec<Option<usize>> = deps
            .into_iter()
            .enumerate()
            .map(|(t, d)| d.ok_or_else(|| Error::InvalidModel(format!("no mechanism given for {}", vars[table.missing_vars()[t]].name))))
            .collect::<Result<_>>()?;
        Self::from_dependencies(table.missing_vars().to_vec(), &deps)
    }

    /// CLI syntax, e.g. `Y1:Y2,Y2:self`.
    pub fn label(&self, variables: &[VariableMeta]) -> String {
        self.vars
            .iter()
            .zip(&self.mechanisms)
            .map(|(&v, m)| {
                let token = match m {
                    Mechanism::Nmar => "self".to_string(),
                    Mechanism::Mcar => "const".to_string(),
                    Mechanism::Mar(d) => variables[*d].name.clone(),
                };
                format!("{}:{token}", variables[v].name)
            })
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Subscript notation: one letter per missing variable and one slot per
    /// variable, e.g. `(a.j.,b.j.)` for n = 3.
    pub fn notation(&self, n: usize) -> String {
        let body: Vec<String> = (0..self.k())
            .map(|t| {
                let letter = (b'a' + (t as u8 % 26)) as char;
                let dep = self.dependency(t);
                let sub: String = (0..n)
                    .map(|v| if dep == Some(v) { (b'i' + (v as u8 % 18)) as char } else { '.' })
                    .collect();
                format!("{letter}{sub}")
            })
            .collect();
        if body.len() == 1 {
            body[0].clone()
        } else {
            format!("({})", body.join(","))
        }
    }

    /// Conventional model number for three-variable tables with missingness
    /// on Y1 (1..=4) or on Y1 and Y2 (1..=16).
    pub fn model_number(&self, n: usize) -> Option<usize> {
        if n != 3 {
            return None;
        }
        let idx = |t: usize| self.dependency(t).map_or(0, |d| d + 1);
        match self.vars.as_slice() {
            [0] => Some(match self.mechanisms[0] {
                Mechanism::Nmar => 1,
                Mechanism::Mar(1) => 2,
                Mechanism::Mar(_) => 3,
                Mechanism::Mcar => 4,
            }),
            [0, 1] => Some(4 * idx(0) + idx(1) + 1),
            _ => None,
        }
    }

    /// Length of the odds vector for missing position `t`.
    pub fn odds_len(&self, t: usize, dims: &[usize]) -> usize {
        self.dependency(t).map_or(1, |d| dims[d])
    }
}

/// Every mechanism assignment for the variables in `missing`, `(n+1)^k` in
/// total. Per variable the order is MCAR, then dependence on variable 0, 1, ...
pub fn enumerate_models(n: usize, missing: &[usize]) -> Result<Vec<MechanismSpec>> {
    let k = missing.len();
    if k == 0 {
        return Err(Error::InvalidModel("no missing-capable variables to model".into()));
    }
    if k > n || missing.iter().any(|&v| v >= n) {
        return Err(Error::InvalidModel("missing variables must be among the table's variables".into()));
    }
    let choices = n + 1;
    let total = choices.pow(k as u32);
    let mut out = Vec::with_capacity(total);
    for code in 0..total {
        let mut rem = code;
        let mut digits = vec![0; k];
        for t in (0..k).rev() {
            digits[t] = rem % choices;
            rem /= choices;
        }
        let deps: Vec<Option<usize>> = digits.iter().map(|&d| if d == 0 { None } else { Some(d - 1) }).collect();
        out.push(MechanismSpec::from_dependencies(missing.to_vec(), &deps)?);
    }
    Ok(out)
}

pub fn free_parameter_count(spec: &MechanismSpec, dims: &[usize]) -> usize {
    let k = spec.k();
    let baseline: usize = dims.iter().product();
    let odds: usize = (0..k).map(|t| spec.odds_len(t, dims)).sum();
    baseline + odds + (1usize << k) - k - 1
}

/// Observed cells minus free parameters. Negative values are untestable.
pub fn degrees_of_freedom(spec: &MechanismSpec, dims: &[usize]) -> Result<i64> {
    let observed: usize = dims
        .iter()
        .enumerate()
        .map(|(v, &d)| if spec.vars().contains(&v) { d + 1 } else { d })
        .product();
    let df = observed as i64 - free_parameter_count(spec, dims) as i64;
    if df < 0 {
        Err(Error::NotTestable(df))
    } else {
        Ok(df)
    }
}
