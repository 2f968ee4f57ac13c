//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! (with the failing checks underneath) and exits non-zero if any failed.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::process::ExitCode;

use inctab::em::EmOptions;
use inctab::estimators::{fit_with, FitOptions};
use inctab::fixtures;
use inctab::inference::{compare_models, conditional_missing_prob, g_squared, marginal_odds_ratio};
use inctab::model::{enumerate_models, ModelCategory};
use inctab::{fit, IncompleteTable, MechanismSpec};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

type Outcome = Vec<String>;

fn near(out: &mut Outcome, what: &str, got: f64, want: f64, tol: f64) {
    if !((got - want).abs() <= tol) {
        out.push(format!("{what}: got {got:.6}, want {want} +/- {tol}"));
    }
}

fn spec(t: &IncompleteTable, s: &str) -> MechanismSpec {
    MechanismSpec::parse(s, t).unwrap()
}

fn parameter_anchors() -> Outcome {
    let mut out = Vec::new();
    let t5 = fixtures::table5();
    let r = fit(&t5, &spec(&t5, "Y1:self")).unwrap();
    near(&mut out, "Table 5 alpha_1", r.odds(0)[0], 0.0721, 5e-4);
    near(&mut out, "Table 5 alpha_2", r.odds(0)[1], 0.0258, 5e-4);

    let t8 = fixtures::table8();
    let r = fit(&t8, &spec(&t8, "Y1:Y2,Y2:self")).unwrap();
    near(&mut out, "beta_1", r.odds(1)[0], 0.073, 1e-3);
    near(&mut out, "beta_2", r.odds(1)[1], 2.375, 1e-3);
    near(&mut out, "theta", r.theta(3), 1.9507, 5e-4);
    for (j, want) in [0.0606, 0.0882].into_iter().enumerate() {
        let p = conditional_missing_prob(&t8, &r, 0, &[None, Some(j), None]).unwrap();
        near(&mut out, &format!("phi_1|2({})", j + 1), p, want, 5e-4);
    }
    for (j, want) in [0.068, 0.7037].into_iter().enumerate() {
        let p = conditional_missing_prob(&t8, &r, 1, &[None, Some(j), None]).unwrap();
        near(&mut out, &format!("phi_2|1({})", j + 1), p, want, 5e-4);
    }
    out
}

/// Rows in printed order; cell (y1, y2, y3) sits at 4 y1 + 2 y2 + y3.
const TABLE7: [[f64; 8]; 2] = [
    [1191.00, 7.87, 8.00, 2.16, 158.00, 66.88, 7.00, 15.09],
    [79.46, 0.34, 0.53, 0.09, 10.54, 2.91, 0.47, 0.66],
];

/// Per pattern (R1, R2) = (1,1), (1,2), (2,1), (2,2).
const TABLE10: [[f64; 8]; 4] = [
    [1191.00, 8.00, 8.00, 2.00, 158.00, 68.00, 7.00, 14.00],
    [86.94, 0.58, 19.00, 4.75, 11.53, 4.96, 16.62, 33.25],
    [76.89, 0.52, 0.77, 0.19, 10.20, 4.39, 0.68, 1.35],
    [10.95, 0.07, 3.59, 0.90, 1.45, 0.62, 3.14, 6.28],
];

fn expected_tables() -> Outcome {
    let mut out = Vec::new();
    let t5 = fixtures::table5();
    let r = fit(&t5, &spec(&t5, "Y1:Y3")).unwrap();
    for (mask, row) in TABLE7.iter().enumerate() {
        for (x, &want) in row.iter().enumerate() {
            near(&mut out, &format!("Table 7 R={} cell {x}", mask + 1), r.expected[mask][x], want, 0.02);
        }
    }
    let t8 = fixtures::table8();
    let r = fit(&t8, &spec(&t8, "Y1:Y2,Y2:self")).unwrap();
    for (mask, row) in TABLE10.iter().enumerate() {
        for (x, &want) in row.iter().enumerate() {
            near(&mut out, &format!("Table 10 pattern {mask} cell {x}"), r.expected[mask][x], want, 0.02);
        }
    }
    out
}

fn odds_ratios() -> Outcome {
    let mut out = Vec::new();
    let t8 = fixtures::table8();
    let r = fit(&t8, &spec(&t8, "Y1:Y2,Y2:self")).unwrap();
    for (k, or, var, vtol) in [(0, 6.5957, 11.9646, 5e-3), (1, 0.8235, 0.4823, 1e-3)] {
        let e = marginal_odds_ratio(&t8, &r, [0, 1, 0, 1, k]).unwrap();
        near(&mut out, &format!("OR..{}", k + 1), e.value, or, 1e-3);
        match e.variance {
            Some(v) => near(&mut out, &format!("Var(OR..{})", k + 1), v.value, var, vtol),
            None => out.push(format!("Var(OR..{}) unavailable", k + 1)),
        }
    }
    out
}

fn model_selection() -> Outcome {
    let mut out = Vec::new();
    let opts = FitOptions::default();
    let t5 = fixtures::table5();
    let rep = compare_models(&t5, &opts).unwrap();
    if rep.best.as_deref() != Some("Y1:Y3") {
        out.push(format!("Table 5 best {:?}, want Y1:Y3", rep.best));
    }
    let worst = rep.rows.iter().max_by(|a, b| a.g2.unwrap().total_cmp(&b.g2.unwrap())).unwrap();
    if worst.model != "Y1:const" {
        out.push(format!("Table 5 worst {}, want Y1:const", worst.model));
    }
    let t8 = fixtures::table8();
    let rep8 = compare_models(&t8, &opts).unwrap();
    if rep8.best.as_deref() != Some("Y1:Y2,Y2:self") {
        let b = rep8.best.as_deref().and_then(|m| rep8.row(m));
        out.push(format!(
            "Table 8 best {:?} {} (G2 {:.4}), want Y1:Y2,Y2:self (a.j.,b.j.) (G2 {:.4})",
            rep8.best,
            b.map_or("", |r| r.notation.as_str()),
            b.and_then(|r| r.g2).unwrap_or(f64::NAN),
            rep8.row("Y1:Y2,Y2:self").and_then(|r| r.g2).unwrap_or(f64::NAN),
        ));
    }
    for r in rep.rows.iter().chain(&rep8.rows) {
        if r.boundary {
            out.push(format!("{} flagged boundary", r.model));
        }
    }
    out
}

fn g2_oracles() -> Outcome {
    let mut out = Vec::new();
    let t5 = fixtures::table5();
    for (s, g2, df) in [("Y1:self", 2.62, 2), ("Y1:Y2", 2.48, 2), ("Y1:Y3", 2.09, 2), ("Y1:const", 5.06, 3)] {
        let r = fit(&t5, &spec(&t5, s)).unwrap();
        let g = g_squared(&t5, &r).unwrap();
        near(&mut out, &format!("Table 5 {s} G2"), g.g2, g2, 0.05);
        if g.df != df {
            out.push(format!("Table 5 {s} df {} want {df}", g.df));
        }
    }
    let em = FitOptions { force_em: true, em: EmOptions { tol: 1e-13, max_iter: 100_000, ..Default::default() }, ..Default::default() };
    for t in [fixtures::table5(), fixtures::table8()] {
        for s in enumerate_models(3, t.missing_vars()).unwrap() {
            let a = fit(&t, &s).unwrap();
            let b = fit_with(&t, &s, &em).unwrap();
            let gap = (a.loglik - b.loglik).abs();
            if gap >= 1e-6 {
                out.push(format!("{} closed form vs EM loglik gap {gap:.3e}", s.label(t.variables())));
            }
        }
    }
    out
}

fn run_prop<S: Strategy>(out: &mut Outcome, name: &str, cases: u32, strat: S, f: impl Fn(S::Value) -> Result<(), String>) {
    let mut runner = TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() });
    if let Err(e) = runner.run(&strat, |v| f(v).map_err(TestCaseError::fail)) {
        out.push(format!("{name}: {e}"));
    }
}

fn table_strategy() -> impl Strategy<Value = IncompleteTable> {
    (prop::collection::vec(2usize..=3, 3), 1u8..8, any::<u64>()).prop_map(|(dims, bits, seed)| {
        let missing: Vec<bool> = (0..3).map(|v| bits & (1 << v) != 0).collect();
        common::random_table(seed, &dims, &missing, 1, 80)
    })
}

fn property_suites() -> Outcome {
    let mut out = Vec::new();

    // (a) EM monotone, mass conserving
    run_prop(&mut out, "(a) EM", 100, (table_strategy(), any::<prop::sample::Index>()), |(t, i)| {
        let specs = enumerate_models(3, t.missing_vars()).unwrap();
        common::check_em(&t, &specs[i.index(specs.len())])
    });

    // (b) perfect fit on every qualifying spec of the fixtures
    for t in [fixtures::table4(), fixtures::table5(), fixtures::table8()] {
        for s in enumerate_models(3, t.missing_vars()).unwrap() {
            if let Err(e) = common::check_perfect_fit(&t, &s) {
                out.push(format!("(b) {e}"));
            }
        }
    }

    // (c) odds-ratio invariance
    if let Err(e) = common::check_or_equality(&fixtures::table8()) {
        out.push(format!("(c) Table 8 {e}"));
    }
    run_prop(&mut out, "(c) OR", 30, (prop::collection::vec(2usize..=3, 3), any::<u64>()), |(dims, seed)| {
        common::check_or_equality(&common::random_table(seed, &dims, &[true, true, false], 1, 80)).map(|_| ())
    });

    // (d) solver against brute force
    run_prop(&mut out, "(d) solve", 200, (1usize..=6, 1usize..=6, any::<u64>()), |(rows, cols, seed)| {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(1.0..100.0)).collect();
        let b: Vec<f64> = (0..rows).map(|_| rng.random_range(0.0..50.0)).collect();
        common::check_solve(rows, cols, a, b)
    });

    // (e) boundary fits
    let k1 = common::negative_table(false);
    let k2 = common::negative_table(true);
    for (name, r) in [
        ("k1 generic", common::check_boundary(&k1, &spec(&k1, "Y1:self"))),
        ("k1 printed", common::check_printed_k1(&k1)),
        ("k2 printed NMAR+MAR", common::check_printed_nmar_mar(&k2)),
    ] {
        if let Err(e) = r {
            out.push(format!("(e) {name}: {e}"));
        }
    }
    for s in ["Y1:self,Y2:const", "Y1:self,Y2:Y1", "Y1:self,Y2:self", "Y1:self,Y2:Y3"] {
        if let Err(e) = common::check_boundary(&k2, &spec(&k2, s)) {
            out.push(format!("(e) {s}: {e}"));
        }
    }

    // (f) decomposition
    for t in [fixtures::table5(), fixtures::table8()] {
        for s in enumerate_models(3, t.missing_vars()).unwrap() {
            if let Err(e) = common::check_decomposition(&t, &s) {
                out.push(format!("(f) {}: {e}", s.label(t.variables())));
            }
        }
    }

    // (g) simulation consistency
    for (i, s) in common::CATEGORY_SPECS.iter().enumerate() {
        if let Err(e) = common::check_recovery(s, 1000 + i as u64, 0.05) {
            out.push(format!("(g) {e}"));
        }
    }
    out
}

fn enumeration() -> Outcome {
    let mut out = Vec::new();
    let specs = enumerate_models(3, &[0, 1, 2]).unwrap();
    let counts: Vec<usize> = ModelCategory::ALL.iter().map(|c| specs.iter().filter(|s| s.category() == *c).count()).collect();
    if counts != [1, 1, 8, 6, 18, 18, 12] {
        out.push(format!("n=3,k=3 category counts {counts:?}"));
    }
    for n in 1..=6usize {
        for k in 1..=n {
            let missing: Vec<usize> = (0..k).collect();
            let len = enumerate_models(n, &missing).unwrap().len();
            if len != (n + 1).pow(k as u32) {
                out.push(format!("n={n},k={k}: {len} models"));
            }
        }
    }
    out
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("1 parameter anchors", parameter_anchors),
        ("2 expected-table anchors", expected_tables),
        ("3 odds-ratio anchors", odds_ratios),
        ("4 model selection", model_selection),
        ("5 G2 oracle values", g2_oracles),
        ("6 property suites", property_suites),
        ("7 enumeration", enumeration),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = std::time::Instant::now();
        let problems = check();
        let verdict = if problems.is_empty() { "PASS" } else { "FAIL" };
        println!("criterion {name}: {verdict} ({:.2}s)", start.elapsed().as_secs_f64());
        for p in &problems {
            println!("    {p}");
        }
        failed += usize::from(!problems.is_empty());
    }
    println!("acceptance: {} of 7 criteria passed", 7 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
