//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails. Timing bounds are measured in-process on the
//! optimized test profile.

use std::collections::HashMap;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dimcheck_core::currency::{random_trace, random_world, CurrencyState};
use dimcheck_core::measure::{compare_measurements, convert, CompareOp, MeasureError};
use dimcheck_core::quantlang::{check_source, evaluate, parse_expr, ErrorKind};
use dimcheck_core::selftest::{
    dimension_law_suite, round_trip_check, round_trip_suite, same_dimension_pairs, selftest,
};
use dimcheck_core::{DecValue, PrecisionContext, UnitRegistry};

const NOSEGEAR_INV6: &str = include_str!("../../../corpus/nosegear_inv6.dc");
const NOSEGEAR_RED: &str = include_str!("../../../corpus/nosegear_red.dc");

const GRAM_POUND_BUDGET: Duration = Duration::from_millis(1);
const DIMENSION_LAW_CASES: u64 = 100_000;
const DIMENSION_LAW_BUDGET: Duration = Duration::from_secs(5);
const ROUND_TRIP_VALUES: u64 = 10_000;
const TRACES: u64 = 10_000;
const TRACE_EVENTS: usize = 100;
const TRACE_BUDGET: Duration = Duration::from_secs(30);
const SELFTEST_CASES: u64 = 100_000;
const SELFTEST_MIN_EVALUATIONS: u64 = 1_000_000;
const SELFTEST_BUDGET: Duration = Duration::from_secs(60);

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ctx() -> PrecisionContext {
    PrecisionContext::default()
}

fn dimcheck(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dimcheck"))
        .current_dir(concat!(env!("CARGO_MANIFEST_DIR"), "/../.."))
        .env_remove("DIMCHECK_REGISTRY")
        .args(args)
        .output()
        .expect("spawn dimcheck")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn perturbed_pound() -> UnitRegistry {
    let text = UnitRegistry::builtin_source().replace("0.45359237", "0.45359238");
    assert_ne!(text, UnitRegistry::builtin_source());
    UnitRegistry::parse(&text).expect("perturbed registry parses")
}

fn eval_in(reg: &UnitRegistry, src: &str) -> Result<String, String> {
    let e = parse_expr(src).map_err(|e| e.to_string())?;
    evaluate(&e, &HashMap::new(), reg, &ctx())
        .map(|v| v.to_string())
        .map_err(|e| e.to_string())
}

fn gram_pound(reg: &UnitRegistry) -> Outcome {
    let expected = "1007.18474 gram";
    eval_in(reg, "100 gram + 2 pound")?;
    let mut best = Duration::MAX;
    let mut got = String::new();
    for _ in 0..20 {
        let t = Instant::now();
        got = eval_in(reg, "100 gram + 2 pound")?;
        best = best.min(t.elapsed());
    }
    if got != expected {
        return Err(format!("got `{got}`, want `{expected}`"));
    }
    if best >= GRAM_POUND_BUDGET {
        return Err(format!("{best:?} >= {GRAM_POUND_BUDGET:?}"));
    }
    Ok(format!("`{got}` in {best:?}"))
}

fn c1() -> Outcome {
    gram_pound(&UnitRegistry::builtin())
}

fn c2() -> Outcome {
    let file = "corpus/landing_gear.dc";
    let checked = dimcheck(&["check", file]);
    if !checked.status.success() {
        return Err(format!(
            "static check failed: {}",
            String::from_utf8_lossy(&checked.stderr)
        ));
    }
    for (now, want) in [("101", "true"), ("100", "false")] {
        let o = dimcheck(&[
            "check",
            file,
            "--bind",
            &format!("currentTime={now}"),
            "--bind",
            "T_extend=0",
        ]);
        let out = stdout(&o);
        let verdicts: Vec<&str> = out.lines().filter_map(|l| l.rsplit(" = ").next()).collect();
        if !o.status.success() || verdicts.len() != 2 || verdicts.iter().any(|v| *v != want) {
            return Err(format!("currentTime={now}: want {want}, got {out:?}"));
        }
    }
    Ok("static OK, 101 ds -> true, 100 ds -> false".into())
}

fn c3() -> Outcome {
    let reg = UnitRegistry::builtin();
    let red = check_source(NOSEGEAR_RED, &reg);
    let errors: Vec<_> = red.errors().collect();
    if errors.len() != 1 || errors[0].kind != ErrorKind::DimensionMismatch {
        return Err(format!("red edit: {errors:?}"));
    }
    let inv6 = check_source(NOSEGEAR_INV6, &reg);
    if !inv6.is_ok() {
        return Err(format!("inv6: {:?}", inv6.errors().collect::<Vec<_>>()));
    }
    let o = dimcheck(&["check", "corpus/nosegear_red.dc"]);
    let stderr = String::from_utf8_lossy(&o.stderr);
    if o.status.code() != Some(1) || stderr.matches("DimensionMismatch").count() != 1 {
        return Err(format!("cli: status {:?}, stderr {stderr:?}", o.status.code()));
    }
    Ok(format!("one mismatch at {}, inv6 OK", errors[0].pos))
}

fn c4() -> Outcome {
    let t = Instant::now();
    let r = dimension_law_suite(DIMENSION_LAW_CASES, 0);
    let took = t.elapsed();
    if !r.is_ok() {
        return Err(r.to_string());
    }
    if took >= DIMENSION_LAW_BUDGET {
        return Err(format!("{took:?} >= {DIMENSION_LAW_BUDGET:?}"));
    }
    Ok(format!("{} evaluations in {took:?}", r.evaluations()))
}

fn c5() -> Outcome {
    let reg = UnitRegistry::builtin();
    let units = reg.units().count();
    for name in ["celsius", "fahrenheit"] {
        reg.unit(name).map_err(|e| e.to_string())?;
    }
    if units < 12 {
        return Err(format!("only {units} units"));
    }
    let pairs = same_dimension_pairs(&reg).len();
    let r = round_trip_suite(&reg, &reg, ROUND_TRIP_VALUES, 0, &ctx());
    if !r.is_ok() {
        return Err(format!("{} failures, first: {:?}", r.failed, r.first_failure));
    }
    Ok(format!("{units} units, {pairs} pairs, {} round trips", r.passed))
}

fn c6() -> Outcome {
    let reg = UnitRegistry::builtin();
    for src in ["1000 gram == 1 Kilogram", "5 minute > 200 second"] {
        if eval_in(&reg, src)? != "true" {
            return Err(format!("`{src}` is not true"));
        }
    }
    let one = DecValue::one();
    let mut scanned = 0;
    for a in reg.units() {
        for b in reg.units().filter(|b| b.dimension() != a.dimension()) {
            let (x, y) = (
                reg.make_in(one.clone(), a).unwrap(),
                reg.make_in(one.clone(), b).unwrap(),
            );
            for op in CompareOp::ALL {
                match compare_measurements(op, &x, &y) {
                    Err(MeasureError::DimensionMismatch { .. }) => scanned += 1,
                    other => return Err(format!("{x} {} {y}: {other:?}", op.symbol())),
                }
            }
        }
    }
    Ok(format!("both true, {scanned} cross-dimension comparisons rejected"))
}

fn c7() -> Outcome {
    let reg = UnitRegistry::builtin();
    let c = ctx();
    let kelvin = reg.unit("Kelvin").unwrap();
    for (v, u) in [("32", "fahrenheit"), ("0", "celsius")] {
        let m = reg.make(v.parse().unwrap(), u).unwrap();
        let k = convert(&m, &kelvin, &c).map_err(|e| e.to_string())?;
        if k.value() != &"273.15".parse::<DecValue>().unwrap() || m.canonical_exact() != k.canonical_exact() {
            return Err(format!("{m} -> {k}"));
        }
    }
    // celsius -> fahrenheit always terminates; fahrenheit -> celsius does
    // when the distance from 32 is nine times a terminating decimal
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (fahrenheit, celsius) = (reg.unit("fahrenheit").unwrap(), reg.unit("celsius").unwrap());
    let mut n = 0;
    for _ in 0..10_000 {
        let k: i64 = rng.gen_range(-1_000_000_000..=1_000_000_000);
        let shift = rng.gen_range(0..=12);
        let cel: DecValue = format!("{k}e-{shift}").parse().unwrap();
        let far: DecValue = format!("{}e-{shift}", 9 * k)
            .parse::<DecValue>()
            .unwrap()
            .add(&"32".parse().unwrap(), &c)
            .unwrap();
        for (x, from, to) in [(&cel, &celsius, &fahrenheit), (&far, &fahrenheit, &celsius)] {
            let there = convert(&reg.make_in(x.clone(), from).unwrap(), to, &c).map_err(|e| e.to_string())?;
            let back = convert(&there, from, &c).map_err(|e| e.to_string())?;
            if back.value() != x {
                return Err(format!("{x} {} -> {there} -> {back}", from.name()));
            }
            n += 1;
        }
    }
    round_trip_check(&"98.6".parse().unwrap(), "fahrenheit", "celsius", &reg, &reg, &c)?;
    Ok(format!("273.15 K exact, {n} exact affine round trips"))
}

fn c8() -> Outcome {
    let t = Instant::now();
    for seed in 0..TRACES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (world, rates) = random_world(&mut rng);
        let mut st = CurrencyState::new(world, rates, ctx()).map_err(|e| format!("seed {seed}: {e}"))?;
        random_trace(&mut st, &mut rng, TRACE_EVENTS).map_err(|f| format!("seed {seed}: {f}"))?;
    }
    let took = t.elapsed();
    if took >= TRACE_BUDGET {
        return Err(format!("{took:?} >= {TRACE_BUDGET:?}"));
    }
    Ok(format!("{TRACES} traces x {TRACE_EVENTS} events in {took:?}"))
}

fn c9() -> Outcome {
    let reg = UnitRegistry::builtin();
    let t = Instant::now();
    let r = selftest(&reg, &reg, SELFTEST_CASES, 0, &ctx());
    let took = t.elapsed();
    if !r.is_ok() {
        return Err(r.to_string());
    }
    if r.evaluations() < SELFTEST_MIN_EVALUATIONS || took > SELFTEST_BUDGET {
        return Err(format!("{} evaluations in {took:?}", r.evaluations()));
    }
    Ok(format!("{} evaluations in {took:?}", r.evaluations()))
}

fn c10() -> Outcome {
    let bad = perturbed_pound();
    let reg = UnitRegistry::builtin();
    if gram_pound(&bad).is_ok() {
        return Err("gram/pound still passes with a perturbed pound".into());
    }
    let r = round_trip_suite(&bad, &reg, 100, 0, &ctx());
    if r.is_ok() {
        return Err("round-trip suite still passes with a perturbed pound".into());
    }
    Ok(format!(
        "gram/pound fails, round trip fails {} times (first: {})",
        r.failed,
        r.first_failure.unwrap_or_default()
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("gram/pound exactness", c1),
        ("landing gear", c2),
        ("nose gear detection", c3),
        ("dimension group laws", c4),
        ("conversion round trips", c5),
        ("implicit scaling in comparisons", c6),
        ("affine correctness", c7),
        ("currency trace safety", c8),
        ("selftest throughput", c9),
        ("mutation sensitivity", c10),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
