//! End-to-end acceptance checks, one `criterion N: PASS|FAIL` line each.
//! Runs without the libtest harness so the lines always reach the output.

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use defect_tower::certificate::certify;
use defect_tower::frames::{bootstrap_artin_schreier, oracle_sweep, synthetic_type1, synthetic_type2, ExtensionFrame, Tier};
use defect_tower::monocheck::sweep;
use defect_tower::series::vars;
use defect_tower::tower::{build, TowerConfig, TowerState};
use defect_tower::valuation::{independence_test, rat, CutValue};
use defect_tower::{Field, TruncSeries};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Runtime budgets, generous enough for unoptimized builds.
const BOOTSTRAP_BUDGET: Duration = Duration::from_secs(1);
const ORACLE_BUDGET: Duration = Duration::from_secs(120);
const TOWER_BUDGET: Duration = Duration::from_secs(300);
const SWEEP_BUDGET: Duration = Duration::from_secs(120);

const ORACLE_PREC: u64 = 512;
const ORACLE_MIN_CONFIGS: usize = 150;
const DISTANCE_R: u32 = 5;
const CHAIN_SAMPLES: usize = 50;
const CUT_SAMPLES: usize = 20;

fn tower_config() -> TowerConfig {
    TowerConfig { p: 2, n: 1, e: 1, steps: 6, ..Default::default() }
}

fn shared_tower() -> &'static (TowerState, Duration) {
    static TOWER: OnceLock<(TowerState, Duration)> = OnceLock::new();
    TOWER.get_or_init(|| {
        let t = Instant::now();
        let state = build(&tower_config()).expect("p = 2 tower builds");
        (state, t.elapsed())
    })
}

fn criterion_1_bootstrap_exponent() -> (bool, String) {
    let t = Instant::now();
    let mut bad = Vec::new();
    for p in [2u32, 3, 5] {
        for e in [1u64, 2, 3] {
            let f = bootstrap_artin_schreier(p, 1, e, 64).unwrap();
            if f.jac_exp != (p as u64 - 1) * e {
                bad.push((p, e, f.jac_exp));
            }
        }
    }
    let elapsed = t.elapsed();
    let ok = bad.is_empty() && elapsed < BOOTSTRAP_BUDGET;
    (ok, format!("9 bootstraps, mismatches {bad:?}, {elapsed:?}"))
}

fn criterion_2_oracle_equivalence() -> (bool, String) {
    let t = Instant::now();
    let mut records = Vec::new();
    for p in [2u32, 3, 5] {
        records.extend(oracle_sweep(p, 5, 12, ORACLE_PREC).unwrap());
    }
    let elapsed = t.elapsed();
    let disagree: Vec<_> = records.iter().filter(|r| !r.agrees).collect();
    let ok = records.len() >= ORACLE_MIN_CONFIGS && disagree.is_empty() && elapsed < ORACLE_BUDGET;
    (ok, format!("{} configurations, {} disagreements {disagree:?}, {elapsed:?}", records.len(), disagree.len()))
}

fn criterion_3_telescoping_and_decay() -> (bool, String) {
    let (state, elapsed) = shared_tower();
    let cert = certify(state, None).unwrap();
    let ledger_checks: Vec<_> =
        cert.checks.iter().filter(|c| c.name.starts_with("telescoping") || c.name.starts_with("decay")).collect();
    // r = 0, 2, .., 10 for A and the primed analogs for r + 1 = 1, 3, .., 9
    let expected = 2 * 6 + 2 * 5;
    let ledgers_ok = ledger_checks.len() == expected && ledger_checks.iter().all(|c| c.holds);
    let omega = state.omega.distance_verdict(DISTANCE_R);
    let mu = state.mu.distance_verdict(DISTANCE_R);
    let ok = ledgers_ok && omega.is_independent() && mu.is_independent() && *elapsed < TOWER_BUDGET;
    (ok, format!("{} ledger checks hold; omega/nu {omega}; mu/omega {mu}; build {elapsed:?}", ledger_checks.len()))
}

fn criterion_4_monomialization_sweep() -> (bool, String) {
    let (state, _) = shared_tower();
    let t = Instant::now();
    let rep = sweep(state, 0..4).unwrap();
    let elapsed = t.elapsed();
    let obstructions = rep.entries.iter().filter(|e| e.verdict.is_obstruction()).count();
    let ok = rep.passes && obstructions == rep.entries.len() && !rep.control.is_obstruction() && elapsed < SWEEP_BUDGET;
    (ok, format!("{obstructions}/{} rings obstructed, control: {}, {elapsed:?}", rep.entries.len(), rep.control))
}

/// `u = z^k (1 + a z + b w)`, `v = w + c z^j + d z w` over `F_p`.
fn random_upper(rng: &mut ChaCha8Rng, field: &std::sync::Arc<Field>, prec: u64) -> Option<(ExtensionFrame, u32)> {
    let p = field.p() as i64;
    let vs = vars("z", "w");
    let k = rng.gen_range(1..=4u32);
    let j = rng.gen_range(1..=5u32);
    let (a, b, c, d) = (rng.gen_range(0..p), rng.gen_range(0..p), rng.gen_range(0..p), rng.gen_range(0..p));
    let u = TruncSeries::from_ints(field, &vs, &[((k, 0), 1), ((k + 1, 0), a), ((k, 1), b)], prec).ok()?;
    let v = TruncSeries::from_ints(field, &vs, &[((0, 1), 1), ((j, 0), c), ((1, 1), d)], prec).ok()?;
    let f = ExtensionFrame::from_series(0, Tier::Upper, ["x".into(), "y".into()], u, v, Vec::new()).ok()?;
    Some((f, k))
}

fn criterion_5_chain_rule() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let prec = 48;
    let mut checked = 0;
    let mut failures = Vec::new();
    let mut attempts = 0;
    while checked < CHAIN_SAMPLES && attempts < 20 * CHAIN_SAMPLES {
        attempts += 1;
        let p = [2u32, 3, 5][rng.gen_range(0..3)];
        let field = Field::prime(p).unwrap();
        let ratio = rng.gen_range(1..=5u64);
        let c_bar = ratio * (p as u64 - 1);
        let lower = if rng.gen_bool(0.5) {
            synthetic_type1(&field, c_bar, prec)
        } else {
            synthetic_type2(&field, c_bar, prec)
        };
        let Ok(lower) = lower else { continue };
        let Some((upper, k)) = random_upper(&mut rng, &field, prec) else { continue };
        // compose by hand so the exponent comes from the determinant itself
        let (Ok(u), Ok(v)) = (lower.u.substitute(&upper.u, &upper.v), lower.v.substitute(&upper.u, &upper.v)) else {
            continue;
        };
        let Ok(composite) = ExtensionFrame::from_series(0, Tier::Composite, lower.lower_params.clone(), u, v, Vec::new()) else {
            continue;
        };
        let lhs = composite.jac_exp;
        let rhs = upper.jac_exp + k as u64 * lower.jac_exp;
        if lhs != rhs {
            failures.push((p, c_bar, k, lhs, rhs));
        }
        checked += 1;
    }
    let ok = checked == CHAIN_SAMPLES && failures.is_empty();
    (ok, format!("{checked} compositions, failures {failures:?}"))
}

fn criterion_6_cut_test() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let zero_minus = CutValue::minus(rat(0, 1));
    let mut ok = [2u32, 3, 5].iter().all(|&p| independence_test(&zero_minus, p));
    let mut rejected = 0;
    for _ in 0..CUT_SAMPLES {
        let r = rat(-rng.gen_range(1..=1000i64), rng.gen_range(1..=1000i64));
        let p = [2u32, 3, 5][rng.gen_range(0..3)];
        if !independence_test(&CutValue::minus(r), p) {
            rejected += 1;
        }
    }
    ok &= rejected == CUT_SAMPLES;
    (ok, format!("0- passes; {rejected}/{CUT_SAMPLES} negative cuts fail"))
}

fn criterion_7_determinism() -> (bool, String) {
    let cert_of = |state: &TowerState| {
        let rep = sweep(state, 0..4).unwrap();
        certify(state, Some(&rep)).unwrap().to_json()
    };
    let first = cert_of(&shared_tower().0);
    let second = cert_of(&build(&tower_config()).unwrap());
    let ok = first == second;
    (ok, format!("certificates of {} bytes {}", first.len(), if ok { "identical" } else { "differ" }))
}

type Criterion = fn() -> (bool, String);

fn main() {
    let criteria: [(u32, Criterion); 7] = [
        (1, criterion_1_bootstrap_exponent),
        (2, criterion_2_oracle_equivalence),
        (3, criterion_3_telescoping_and_decay),
        (4, criterion_4_monomialization_sweep),
        (5, criterion_5_chain_rule),
        (6, criterion_6_cut_test),
        (7, criterion_7_determinism),
    ];
    let mut failed = 0;
    for (n, run) in criteria {
        let (ok, detail) = std::panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            (false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        println!("criterion {n}: {} — {detail}", if ok { "PASS" } else { "FAIL" });
        failed += usize::from(!ok);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
