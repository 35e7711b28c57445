//! The twelve acceptance criteria, one line each. Runs without the libtest
//! harness so the lines always print; exits nonzero if any criterion fails.

use qcarleson_core::decompose::{DecomposeParams, Universe};
use qcarleson_core::linefield::MassConfig;
use qcarleson_core::verify::*;
use qcarleson_core::Config;
use std::time::{Duration, Instant};

struct Outcome {
    id: usize,
    name: &'static str,
    passed: bool,
    detail: String,
    elapsed: Duration,
    budget: Duration,
}

fn criterion(id: usize, name: &'static str, budget_s: u64, f: impl FnOnce() -> (bool, String)) -> Outcome {
    let t = Instant::now();
    let (passed, detail) = f();
    let elapsed = t.elapsed();
    let budget = Duration::from_secs(budget_s);
    Outcome { id, name, passed: passed && elapsed <= budget, detail, elapsed, budget }
}

fn all_passed(reports: &[&EstimateReport]) -> (bool, String) {
    let passed = reports.iter().all(|r| r.passed);
    let detail = reports
        .iter()
        .map(|r| {
            let bad: Vec<&str> = r.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
            let slope = r.fit.map(|f| format!(" slope {:.3}", f.slope)).unwrap_or_default();
            if bad.is_empty() {
                format!("{}{slope}", r.id)
            } else {
                format!("{}{slope} failed {bad:?}", r.id)
            }
        })
        .collect::<Vec<_>>()
        .join("; ");
    (passed, detail)
}

fn main() {
    // `cargo test -- --list` and filters: nothing to enumerate.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let cfg = Config::default();
    let seed = cfg.seed;
    let mass = MassConfig { n: cfg.mass_n, tol: cfg.mass_tol };
    let mut out = Vec::new();
    let mut slope_reports: Vec<EstimateReport> = Vec::new();

    out.push(criterion(1, "kernel telescoping", 1, || {
        let r = check_kernel(10, 10_000);
        all_passed(&[&r])
    }));
    out.push(criterion(2, "discretization exactness", 120, || {
        let r = check_discretization(1024, cfg.k_max, cfg.window(), 20, seed);
        let d = r.checks.iter().map(|c| c.detail.clone()).collect::<Vec<_>>().join("; ");
        (r.passed, d)
    }));
    out.push(criterion(3, "support exactness", 30, || {
        let r = check_support(512, cfg.k_max, 1000, seed);
        (r.passed, r.checks[0].detail.clone())
    }));
    out.push(criterion(4, "adjoint consistency", 60, || {
        let r = check_adjoint(512, cfg.k_max, 1000, seed);
        let d = r.checks.iter().map(|c| c.detail.clone()).collect::<Vec<_>>().join("; ");
        (r.passed, d)
    }));
    out.push(criterion(5, "order/mass combinatorics", 60, || {
        let r = check_order(10_000, 10_000, 1000, seed, 2);
        let d = r.checks.iter().map(|c| c.detail.clone()).collect::<Vec<_>>().join("; ");
        (r.passed, d)
    }));
    let big = Config { k_max: 8, window: [-32.0, 32.0], ..cfg.clone() };
    let universe = Universe::new(&[0, 2, 4, 6, 8], big.window());
    out.push(criterion(6, "decomposition validators", 300, || {
        let fields = suite_fields(&big, 50);
        let r = check_decomposition(&universe, &fields, DecomposeParams { mass, k: cfg.k_count });
        (r.passed, format!("{} universes of {} tiles: {}", fields.len(), universe.len(), r.checks[0].detail))
    }));
    out.push(criterion(7, "counting/exceptional bounds", 300, || {
        let fields = suite_fields(&big, 10);
        let r = check_counting(&universe, &fields, mass, &[1.0, cfg.k_count]);
        let d = format!(
            "{}; {}; {}",
            r.checks[0].detail.split("; per").next().unwrap_or(""),
            r.checks[1].detail,
            r.checks[2].detail
        );
        (r.passed, d)
    }));
    out.push(criterion(8, "pair decay", 300, || {
        let rs = check_pair_decay(512, 2, cfg.eps0, 64);
        let res = all_passed(&[&rs[0], &rs[1]]);
        slope_reports.extend(rs.into_iter().take(2));
        res
    }));
    out.push(criterion(9, "tree and antichain slopes", 600, || {
        let exps: Vec<i32> = (1..=8).collect();
        let t = check_tree_bound(512, 2, &exps);
        let a = check_antichain_bound(512, &exps, mass);
        let res = all_passed(&[&t, &a]);
        slope_reports.push(t);
        slope_reports.push(a);
        res
    }));
    out.push(criterion(10, "M_delta inequality", 60, || {
        let r = check_mdelta(1024, 100, &(1..=8).collect::<Vec<_>>(), seed);
        (r.passed, r.checks.iter().map(|c| c.detail.clone()).collect::<Vec<_>>().join("; "))
    }));
    out.push(criterion(11, "weak-(2,2) stress", 900, || {
        let (r, _) = check_weak_l2(512, &cfg.a_grid(), &cfg.b_grid(), cfg.k_max, seed);
        let d = r.checks.iter().filter(|c| c.name != "zero-function").map(|c| c.detail.clone()).collect::<Vec<_>>().join("; ");
        (r.passed, d)
    }));
    out.push(criterion(12, "quadrature gate", 600, || {
        slope_reports.push(check_cutoff(512, 2, &half_step_deltas(8)));
        let gates: Vec<String> = slope_reports
            .iter()
            .map(|r| match &r.gate {
                Some(g) => format!("{} {:.2e}", r.id, g.max_rel_change),
                None => format!("{} missing", r.id),
            })
            .collect();
        let passed = slope_reports.iter().all(|r| r.gate.as_ref().is_some_and(|g| g.passed && g.max_rel_change < 0.05));
        (passed, gates.join(", "))
    }));

    let mut failed = 0;
    for o in &out {
        failed += usize::from(!o.passed);
        println!(
            "[{}] {:>2}. {} ({:.1}s of {}s): {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.id,
            o.name,
            o.elapsed.as_secs_f64(),
            o.budget.as_secs(),
            o.detail
        );
    }
    println!("acceptance: {} of {} criteria passed", out.len() - failed, out.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
