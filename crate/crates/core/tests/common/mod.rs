//! Shared checks for the integration and acceptance suites. Each check
//! returns `Err(description)` on the first violated invariant.
#![allow(dead_code)]

use inctab::em::{e_step, em_fit, EmOptions};
use inctab::inference::{decompose_loglinear, marginal_odds_ratio};
use inctab::linsolve::{solve_odds_system, OddsSystem, Regime};
use inctab::model::enumerate_models;
use inctab::params::{saturated_loglik, ModelFrame};
use inctab::sim::{simulate, skeleton, SimParams};
use inctab::{fit, IncompleteTable, Mechanism, MechanismSpec, ObservedBlock, VariableMeta};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn vars(dims: &[usize], missing: &[bool]) -> Vec<VariableMeta> {
    dims.iter()
        .zip(missing)
        .enumerate()
        .map(|(i, (&d, &m))| VariableMeta::new(format!("Y{}", i + 1), d, m))
        .collect()
}

/// Random table with every count drawn uniformly from `lo..=hi`.
pub fn random_table(seed: u64, dims: &[usize], missing: &[bool], lo: u32, hi: u32) -> IncompleteTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sk = skeleton(&vars(dims, missing)).unwrap();
    let blocks = sk
        .blocks()
        .iter()
        .map(|b| ObservedBlock {
            pattern: b.pattern.clone(),
            counts: {
                let mut c: Vec<f64> = b.counts.iter().map(|_| rng.random_range(lo..=hi) as f64).collect();
                if c.iter().all(|&v| v == 0.0) {
                    c[0] = 1.0;
                }
                c
            },
        })
        .collect();
    IncompleteTable::new(sk.variables().to_vec(), blocks).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

/// EM from the default start never lowers the log-likelihood, the E-step
/// hands out exactly N units and the fit ends with expected mass N.
pub fn check_em(table: &IncompleteTable, spec: &MechanismSpec) -> Result<(), String> {
    let frame = ModelFrame::new(table, spec).map_err(|e| e.to_string())?;
    let opts = EmOptions { record_trace: true, ..Default::default() };
    let out = em_fit(&frame, None, &opts).map_err(|e| e.to_string())?;
    for w in out.trace.windows(2) {
        if w[1] < w[0] - 1e-9 * (1.0 + w[0].abs()) {
            return Err(format!("loglik decreased {} -> {}", w[0], w[1]));
        }
    }
    let completed: f64 = e_step(&frame, &out.params).iter().flatten().sum();
    if rel(completed, table.total()) > 1e-10 {
        return Err(format!("E-step mass {completed} vs N {}", table.total()));
    }
    let total: f64 = frame.expected(&out.params).iter().flatten().sum();
    if rel(total, table.total()) > 1e-10 {
        return Err(format!("expected mass {total} vs N {}", table.total()));
    }
    Ok(())
}

/// Interior fits of NMAR-only, NMAR+MAR, and MAR-only models with two or
/// more missing variables reproduce the fully observed block. Returns whether
/// the spec qualified.
pub fn check_perfect_fit(table: &IncompleteTable, spec: &MechanismSpec) -> Result<bool, String> {
    let ms = spec.mechanisms();
    if ms.contains(&Mechanism::Mcar) || (ms.len() == 1 && ms[0] != Mechanism::Nmar) {
        return Ok(false);
    }
    let r = fit(table, spec).map_err(|e| e.to_string())?;
    if r.is_boundary() {
        return Ok(false);
    }
    for (x, (&m, &y)) in r.expected[0].iter().zip(table.counts(0)).enumerate() {
        if rel(m, y) > 1e-8 {
            return Err(format!("{}: cell {x} expected {m} observed {y}", spec.label(table.variables())));
        }
    }
    Ok(true)
}

/// Marginal Y1Y2 odds ratio equals the fully observed one for models
/// 2, 4, 9, 13, 16 always and 3, 5, 6, 11 at interior fits. Returns how many
/// (model, index) pairs were checked.
pub fn check_or_equality(table: &IncompleteTable) -> Result<usize, String> {
    let d = table.dims();
    let g = table.full_grid();
    let y = table.counts(0);
    let mut checked = 0;
    for spec in enumerate_models(3, table.missing_vars()).unwrap() {
        let number = spec.model_number(3).unwrap();
        let always = [2, 4, 9, 13, 16].contains(&number);
        if !always && ![3, 5, 6, 11].contains(&number) {
            continue;
        }
        let r = fit(table, &spec).map_err(|e| e.to_string())?;
        if !always && r.is_boundary() {
            continue;
        }
        for i in 0..d[0] {
            for i2 in i + 1..d[0] {
                for j in 0..d[1] {
                    for j2 in j + 1..d[1] {
                        for k in 0..d[2] {
                            let at = |a, b| y[g.flat(&[a, b, k])];
                            let obs = at(i, j) * at(i2, j2) / (at(i, j2) * at(i2, j));
                            let est = marginal_odds_ratio(table, &r, [i, i2, j, j2, k]).map_err(|e| e.to_string())?;
                            if rel(est.value, obs) > 1e-9 {
                                return Err(format!("model {number}: OR {} vs observed {obs}", est.value));
                            }
                            if !est.invariant_equal_to_observed {
                                return Err(format!("model {number}: invariance flag not set"));
                            }
                            checked += 1;
                        }
                    }
                }
            }
        }
    }
    Ok(checked)
}

/// Dense Gaussian elimination with partial pivoting; the independent oracle.
pub fn gauss(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&r, &s| a[r][c].abs().total_cmp(&a[s][c].abs()))?;
        if a[p][c].abs() < 1e-300 {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for j in c..n {
                a[r][j] -= f * a[c][j];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|j| a[r][j] * x[j]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Least squares via normal equations (tall), minimum norm via A^T (A A^T)^-1 b
/// (wide), direct solve (square), all by [`gauss`].
pub fn brute_force(rows: usize, cols: usize, a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let at = |r: usize, c: usize| a[r * cols + c];
    if rows >= cols {
        let ata = (0..cols).map(|i| (0..cols).map(|j| (0..rows).map(|r| at(r, i) * at(r, j)).sum()).collect()).collect();
        let atb = (0..cols).map(|i| (0..rows).map(|r| at(r, i) * b[r]).sum()).collect();
        gauss(ata, atb)
    } else {
        let aat = (0..rows).map(|i| (0..rows).map(|j| (0..cols).map(|c| at(i, c) * at(j, c)).sum()).collect()).collect();
        let w = gauss(aat, b.to_vec())?;
        Some((0..cols).map(|c| (0..rows).map(|r| at(r, c) * w[r]).sum()).collect())
    }
}

pub fn check_solve(rows: usize, cols: usize, a: Vec<f64>, b: Vec<f64>) -> Result<(), String> {
    let sys = OddsSystem::new(rows, cols, a.clone(), b.clone()).map_err(|e| e.to_string())?;
    let (x, regime) = solve_odds_system(&sys).map_err(|e| e.to_string())?;
    let want = match rows.cmp(&cols) {
        std::cmp::Ordering::Equal => Regime::Square,
        std::cmp::Ordering::Greater => Regime::Overdetermined,
        std::cmp::Ordering::Less => Regime::Underdetermined,
    };
    if regime != want {
        return Err(format!("regime {regime:?}, expected {want:?}"));
    }
    let oracle = brute_force(rows, cols, &a, &b).ok_or("oracle singular")?;
    for (u, v) in x.iter().zip(&oracle) {
        if (u - v).abs() > 1e-8 * (1.0 + v.abs()) {
            return Err(format!("{x:?} vs oracle {oracle:?}"));
        }
    }
    Ok(())
}

/// Generic boundary checks: pinned odds exactly zero, and the chosen
/// candidate has the smallest G² and the highest loglik. With one binary
/// missing variable the boundary closed form is the constrained MLE, so a
/// constrained EM started there must not climb. The two-missing forms and
/// the pinned least-squares refits for more levels are not stationary.
pub fn check_boundary(table: &IncompleteTable, spec: &MechanismSpec) -> Result<(), String> {
    let r = fit(table, spec).map_err(|e| e.to_string())?;
    let rep = r.boundary.as_ref().ok_or("no boundary")?;
    let t = table.missing_position(rep.variable).unwrap();
    for &l in &rep.zero_levels {
        if r.odds(t)[l] != 0.0 {
            return Err(format!("pinned level {l} has odds {}", r.odds(t)[l]));
        }
    }
    let g2 = -2.0 * (r.loglik - saturated_loglik(table));
    for c in &rep.candidates {
        if c.g2 < g2 - 1e-9 || c.loglik > r.loglik + 1e-9 {
            return Err(format!("candidate {:?} beats the chosen fit ({} < {g2})", c.zero_levels, c.g2));
        }
    }
    if table.k() > 1 || table.variables()[rep.variable].levels > 2 {
        return Ok(());
    }
    let frame = ModelFrame::new(table, spec).unwrap();
    let out = em_fit(&frame, Some(&r.params), &EmOptions::default()).map_err(|e| e.to_string())?;
    if out.loglik > r.loglik + 1e-6 * (1.0 + r.loglik.abs()) {
        return Err(format!("constrained EM climbs from {} to {}", r.loglik, out.loglik));
    }
    Ok(())
}

/// Y1 is missing-capable and binary with negative unconstrained odds at its
/// first level; Y2 is missing-capable too when `two` is set.
pub fn negative_table(two: bool) -> IncompleteTable {
    let doc = if two {
        r#"{"variables":[{"name":"Y1","levels":2,"missing":true},{"name":"Y2","levels":2,"missing":true},{"name":"Y3","levels":2}],
        "blocks":[{"pattern":["obs","obs"],"counts":[[[100,20],[30,10]],[[10,40],[5,60]]]},
                  {"pattern":["obs","miss"],"counts":[[30,10],[20,40]]},
                  {"pattern":["miss","obs"],"counts":[[2,30],[1,50]]},
                  {"pattern":["miss","miss"],"counts":[15,12]}]}"#
    } else {
        r#"{"variables":[{"name":"Y1","levels":2,"missing":true},{"name":"Y2","levels":2},{"name":"Y3","levels":2}],
        "blocks":[{"pattern":["obs"],"counts":[[[100,20],[30,10]],[[10,40],[5,60]]]},
                  {"pattern":["miss"],"counts":[[2,30],[1,50]]}]}"#
    };
    IncompleteTable::from_json_str(doc).unwrap()
}

/// The one-missing boundary closed form with alpha_1 = 0:
/// alpha_2 = y_{+++2} / y_{2++1}, m_{1jk} = y_{1jk1},
/// m_{2jk} = (y_{2jk1} + y_{+jk2}) y_{2++1} / (y_{2++1} + y_{+++2}).
pub fn check_printed_k1(table: &IncompleteTable) -> Result<(), String> {
    let r = fit(table, &MechanismSpec::parse("Y1:self", table).unwrap()).map_err(|e| e.to_string())?;
    let rep = r.boundary.as_ref().ok_or("no boundary")?;
    if rep.zero_levels != [0] {
        return Err(format!("pinned {:?}", rep.zero_levels));
    }
    let g = table.full_grid();
    let sg = &table.layout(1).grid;
    let y0 = table.counts(0);
    let y1 = table.counts(1);
    let y2 = (0..g.len()).filter(|&x| g.coord(x, 0) == 1).map(|x| y0[x]).sum::<f64>();
    let ys = table.block_total(1);
    let mut errs = vec![(r.odds(0)[1], ys / y2)];
    for x in 0..g.len() {
        let c = g.coords(x);
        let m = if c[0] == 0 { y0[x] } else { (y0[x] + y1[sg.flat(&[c[1], c[2]])]) * y2 / (y2 + ys) };
        errs.push((r.baseline()[x], m));
    }
    match errs.iter().find(|(a, b)| rel(*a, *b) > 1e-10) {
        Some((a, b)) => Err(format!("fit {a} vs printed {b}")),
        None => Ok(()),
    }
}

/// Two missing, Y1 NMAR pinned at level 1 and Y2 MAR on Y1 (printed case (b)).
pub fn check_printed_nmar_mar(table: &IncompleteTable) -> Result<(), String> {
    let r = fit(table, &MechanismSpec::parse("Y1:self,Y2:Y1", table).unwrap()).map_err(|e| e.to_string())?;
    let rep = r.boundary.as_ref().ok_or("no boundary")?;
    if rep.zero_levels != [0] {
        return Err(format!("pinned {:?}", rep.zero_levels));
    }
    let g = table.full_grid();
    let y0 = table.counts(0);
    let b12 = table.counts(1); // over (Y1, Y3)
    let b21 = table.counts(2); // over (Y2, Y3)
    let g12 = &table.layout(1).grid;
    let g21 = &table.layout(2).grid;
    let y_i11 = |i: usize| (0..g.len()).filter(|&x| g.coord(x, 0) == i).map(|x| y0[x]).sum::<f64>();
    let y_i12 = |i: usize| (0..g12.len()).filter(|&c| g12.coord(c, 0) == i).map(|c| b12[c]).sum::<f64>();
    let (s21, s22) = (table.block_total(2), table.block_total(3));
    let mut errs = vec![
        (r.odds(0)[1], s21 / y_i11(1)),
        (r.odds(1)[0], y_i12(0) / y_i11(0)),
        (r.odds(1)[1], y_i12(1) / y_i11(1)),
        (r.theta(3), y_i11(1) * s22 / (y_i12(1) * s21)),
    ];
    for x in 0..g.len() {
        let c = g.coords(x);
        let m = if c[0] == 0 { y0[x] } else { y_i11(1) * (y0[x] + b21[g21.flat(&[c[1], c[2]])]) / (y_i11(1) + s21) };
        errs.push((r.baseline()[x], m));
    }
    match errs.iter().find(|(a, b)| rel(*a, *b) > 1e-10) {
        Some((a, b)) => Err(format!("fit {a} vs printed {b}")),
        None => Ok(()),
    }
}

/// Reconstruction of log mu is exact; indicator-by-variable terms vanish for
/// variables the mechanism ignores; for two missing variables exp(4 lambda_R1R2)
/// equals theta. With three or more missing variables the joint pattern
/// carries no odds factors, so only variables no mechanism depends on are
/// guaranteed a vanishing term.
pub fn check_decomposition(table: &IncompleteTable, spec: &MechanismSpec) -> Result<(), String> {
    let r = fit(table, spec).map_err(|e| e.to_string())?;
    if r.expected.iter().flatten().any(|&v| v <= 0.0) {
        return Ok(());
    }
    let d = decompose_loglinear(table, &r).map_err(|e| e.to_string())?;
    let k = table.k();
    let n = table.n();
    let rec = d.reconstruct();
    for x in 0..table.full_grid().len() {
        for m in 0..table.n_patterns() {
            let want = r.expected[m][x].ln();
            if (rec[(x << k) | m] - want).abs() > 1e-8 {
                return Err(format!("reconstruction off at ({x},{m})"));
            }
        }
    }
    let deps: Vec<usize> = (0..k).filter_map(|t| spec.dependency(t)).collect();
    for t in 0..k {
        let keep = spec.dependency(t);
        for v in 0..n {
            if Some(v) == keep || (k >= 3 && deps.contains(&v)) {
                continue;
            }
            let term = d.term(&[v, n + t]).unwrap();
            if term.values.iter().any(|l| l.abs() > 1e-8) {
                return Err(format!("term (Y{}, R{}) should vanish", v + 1, t + 1));
            }
        }
    }
    if k == 2 {
        let l = d.term(&[n, n + 1]).unwrap();
        if ((4.0 * l.at(&[0, 0])).exp() - r.theta(3)).abs() > 1e-8 * r.theta(3).max(1.0) {
            return Err("theta identity".into());
        }
    }
    Ok(())
}

/// One spec per category for three binary variables, all missing-capable.
pub const CATEGORY_SPECS: [&str; 7] = [
    "Y1:const,Y2:const,Y3:const",
    "Y1:self,Y2:self,Y3:self",
    "Y1:Y2,Y2:Y3,Y3:Y1",
    "Y1:self,Y2:const,Y3:const",
    "Y1:Y2,Y2:const,Y3:const",
    "Y1:self,Y2:Y1,Y3:Y1",
    "Y1:self,Y2:Y1,Y3:const",
];

pub fn sim_params(spec_text: &str) -> SimParams {
    let variables = vars(&[2, 2, 2], &[true, true, true]);
    let sk = skeleton(&variables).unwrap();
    let spec = MechanismSpec::parse(spec_text, &sk).unwrap();
    let odds = (0..3)
        .map(|t| {
            let len = spec.odds_len(t, &sk.dims());
            let v: Vec<f64> = (0..len).map(|l| 0.3 + 0.2 * l as f64 + 0.05 * t as f64).collect();
            (format!("Y{}", t + 1), v)
        })
        .collect();
    let assoc = [("Y1,Y2", 1.5), ("Y1,Y3", 0.8), ("Y2,Y3", 1.2), ("Y1,Y2,Y3", 1.3)]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    SimParams {
        variables,
        model: Some(spec_text.into()),
        baseline: Some(vec![1.0, 2.0, 1.5, 1.0, 2.5, 1.0, 1.2, 1.8]),
        odds,
        assoc,
    }
}

/// Simulates N = 10^6 units under the spec and refits it; every baseline
/// cell, odds and association parameter must come back within `tol`.
pub fn check_recovery(spec_text: &str, seed: u64, tol: f64) -> Result<(), String> {
    let sp = sim_params(spec_text);
    let n = 1e6;
    let table = simulate(spec_text, &sp, n, seed).map_err(|e| e.to_string())?;
    let spec = MechanismSpec::parse(spec_text, &table).map_err(|e| e.to_string())?;
    let frame = ModelFrame::new(&table, &spec).unwrap();
    let truth = inctab::sim::model_params(&frame, &sp, n).map_err(|e| e.to_string())?;
    let r = fit(&table, &spec).map_err(|e| e.to_string())?;
    let mut worst = (0.0, String::new());
    let mut track = |name: String, est: f64, want: f64| {
        let e = (est - want).abs() / want.abs();
        if e > worst.0 {
            worst = (e, name);
        }
    };
    for (x, (&a, &b)) in r.baseline().iter().zip(&truth.baseline).enumerate() {
        track(format!("m[{x}]"), a, b);
    }
    for t in 0..3 {
        for (l, (&a, &b)) in r.odds(t).iter().zip(&truth.odds[t]).enumerate() {
            track(format!("odds[{t}][{l}]"), a, b);
        }
    }
    for mask in [3u32, 5, 6, 7] {
        track(format!("theta[{mask}]"), r.theta(mask), truth.assoc[mask as usize]);
    }
    if worst.0 > tol {
        return Err(format!("{}: {} off by {:.2}%", spec_text, worst.1, 100.0 * worst.0));
    }
    Ok(())
}

/// Every (i, i') / (j, j') / k index tuple for a three-variable table.
pub fn or_indices(dims: &[usize]) -> Vec<[usize; 5]> {
    let mut out = Vec::new();
    for i in 0..dims[0] {
        for i2 in i + 1..dims[0] {
            for j in 0..dims[1] {
                for j2 in j + 1..dims[1] {
                    for k in 0..dims[2] {
                        out.push([i, i2, j, j2, k]);
                    }
                }
            }
        }
    }
    out
}
