//! Randomized property suite.
//!
//! Cases are split into fixed-size batches. Batch `i` draws from a ChaCha8
//! generator seeded with the run seed on stream `i`, so batches can run on
//! any number of threads and the merged report (in batch order) is the same
//! for a given seed.
//!
//! The conversion round trip takes two registries: the forward leg uses the
//! `subject` registry and the return leg the `reference`. With the same
//! registry on both sides this is the ordinary there-and-back property; with
//! a trusted reference it also catches a wrong constant in the subject.

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use num_traits::{Signed, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::decvalue::{DecValue, PrecisionContext, Rational};
use crate::dimension::Dimension;
use crate::measure::{
    add_absolute, convert, order_measurements, random_value, scale_measurement, MeasureError, Measurement, Unit,
    UnitRegistry,
};

const BATCH: u64 = 512;

/// Outcome of one property over all its cases.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropertyResult {
    pub name: &'static str,
    pub passed: u64,
    pub failed: u64,
    pub first_failure: Option<String>,
}

impl PropertyResult {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            passed: 0,
            failed: 0,
            first_failure: None,
        }
    }

    fn record(&mut self, outcome: Result<(), String>) {
        match outcome {
            Ok(()) => self.passed += 1,
            Err(msg) => {
                self.failed += 1;
                self.first_failure.get_or_insert(msg);
            }
        }
    }

    fn merge(&mut self, other: PropertyResult) {
        self.passed += other.passed;
        self.failed += other.failed;
        if self.first_failure.is_none() {
            self.first_failure = other.first_failure;
        }
    }

    pub fn is_ok(&self) -> bool {
        self.failed == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelftestReport {
    pub seed: u64,
    pub cases: u64,
    pub properties: Vec<PropertyResult>,
}

impl SelftestReport {
    /// Number of property evaluations performed.
    pub fn evaluations(&self) -> u64 {
        self.properties.iter().map(|p| p.passed + p.failed).sum()
    }

    pub fn failures(&self) -> u64 {
        self.properties.iter().map(|p| p.failed).sum()
    }

    pub fn is_ok(&self) -> bool {
        self.failures() == 0
    }

    pub fn property(&self, name: &str) -> Option<&PropertyResult> {
        self.properties.iter().find(|p| p.name == name)
    }

    fn extend(&mut self, other: SelftestReport) {
        self.properties.extend(other.properties);
    }
}

impl fmt::Display for SelftestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "selftest seed={} cases={}", self.seed, self.cases)?;
        for p in &self.properties {
            writeln!(f, "{:<32} {:>10} passed {:>8} failed", p.name, p.passed, p.failed)?;
            if let Some(msg) = &p.first_failure {
                writeln!(f, "  first failure: {msg}")?;
            }
        }
        write!(
            f,
            "total {} evaluations, {} failures",
            self.evaluations(),
            self.failures()
        )
    }
}

/// Runs `cases` cases of the named properties. `case` receives the batch
/// generator and one result slot per property.
fn run_batches<F>(names: &[&'static str], cases: u64, seed: u64, case: F) -> SelftestReport
where
    F: Fn(&mut ChaCha8Rng, &mut [PropertyResult]) + Sync,
{
    let batches = cases.div_ceil(BATCH);
    let fresh = || names.iter().map(|n| PropertyResult::new(n)).collect::<Vec<_>>();
    let partial: Vec<Vec<PropertyResult>> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b);
            let mut results = fresh();
            let n = BATCH.min(cases - b * BATCH);
            for _ in 0..n {
                case(&mut rng, &mut results);
            }
            results
        })
        .collect();
    let mut properties = fresh();
    for batch in partial {
        for (acc, r) in properties.iter_mut().zip(batch) {
            acc.merge(r);
        }
    }
    SelftestReport {
        seed,
        cases,
        properties,
    }
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_dimension<R: Rng + ?Sized>(rng: &mut R) -> Dimension {
    let mut e = [0i64; 7];
    for x in &mut e {
        *x = rng.gen_range(-6..=6);
    }
    Dimension::from_exponents(e)
}

/// Group laws of dimension multiplication, plus the text syntax round trip.
pub fn dimension_law_suite(cases: u64, seed: u64) -> SelftestReport {
    const NAMES: [&str; 7] = [
        "dimension.associativity",
        "dimension.commutativity",
        "dimension.identity",
        "dimension.inverse",
        "dimension.division",
        "dimension.power",
        "dimension.syntax_round_trip",
    ];
    run_batches(&NAMES, cases, seed, |rng, out| {
        let (a, b, c) = (random_dimension(rng), random_dimension(rng), random_dimension(rng));
        let (m, n) = (rng.gen_range(-4..=4i64), rng.gen_range(-4..=4i64));
        let one = Dimension::one();
        out[0].record(check((a * b) * c == a * (b * c), || format!("({a})({b})({c})")));
        out[1].record(check(a * b == b * a, || format!("{a} * {b}")));
        out[2].record(check(a * one == a && one * a == a, || format!("{a} * 1")));
        let a2 = a;
        out[3].record(check(a * a.reciprocal() == one && a / a2 == one, || {
            format!("{a} inverse")
        }));
        out[4].record(check(a / b == a * b.reciprocal(), || format!("{a} / {b}")));
        out[5].record(check(a.pow(m) * a.pow(n) == a.pow(m + n), || {
            format!("{a}^{m}·{a}^{n}")
        }));
        out[6].record(check(a.to_syntax().parse::<Dimension>() == Ok(a), || a.to_syntax()));
    })
}

/// Ordered pairs of units sharing a dimension, in registry order.
pub fn same_dimension_pairs(reg: &UnitRegistry) -> Vec<(Arc<Unit>, Arc<Unit>)> {
    let units: Vec<_> = reg.units().cloned().collect();
    let mut pairs = Vec::new();
    for a in &units {
        for b in &units {
            if a.dimension() == b.dimension() {
                pairs.push((a.clone(), b.clone()));
            }
        }
    }
    pairs
}

fn max3(a: Rational, b: Rational, c: Rational) -> Rational {
    a.max(b).max(c)
}

/// Converts `x` from `from` to `to` with the subject registry, then back
/// with the reference registry. The result must be within one unit in the
/// last place of the coarsest quantity involved: `x`, the result, or the
/// intermediate's last place expressed in `from` units.
pub fn round_trip_check(
    x: &DecValue,
    from: &str,
    to: &str,
    subject: &UnitRegistry,
    reference: &UnitRegistry,
    ctx: &PrecisionContext,
) -> Result<(), String> {
    let run = || -> Result<(DecValue, DecValue, Rational), MeasureError> {
        let m = Measurement::new(x.clone(), subject.unit(from)?);
        let y = convert(&m, &subject.unit(to)?, ctx)?;
        let (rf, rt) = (reference.unit(from)?, reference.unit(to)?);
        let back = convert(&Measurement::new(y.value().clone(), rt.clone()), &rf, ctx)?;
        Ok((y.value().clone(), back.value().clone(), rt.scale() / rf.scale()))
    };
    let (y, z, ratio) = run().map_err(|e| format!("{x} {from} -> {to}: {e}"))?;
    let err = (z.to_rational() - x.to_rational()).abs();
    let tol = max3(x.ulp(ctx), z.ulp(ctx), y.ulp(ctx) * ratio);
    check(err <= tol, || format!("{x} {from} -> {y} {to} -> {z} {from}"))
}

/// Round trip over every ordered same-dimension pair of `subject`, with
/// `values_per_pair` random values each.
pub fn round_trip_suite(
    subject: &UnitRegistry,
    reference: &UnitRegistry,
    values_per_pair: u64,
    seed: u64,
    ctx: &PrecisionContext,
) -> PropertyResult {
    let pairs = same_dimension_pairs(subject);
    let per_pair: Vec<PropertyResult> = pairs
        .par_iter()
        .enumerate()
        .map(|(i, (a, b))| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut r = PropertyResult::new("measure.round_trip");
            for _ in 0..values_per_pair {
                let x = random_value(&mut rng);
                r.record(round_trip_check(&x, a.name(), b.name(), subject, reference, ctx));
            }
            r
        })
        .collect();
    let mut total = PropertyResult::new("measure.round_trip");
    for r in per_pair {
        total.merge(r);
    }
    total
}

/// Exact canonical value of a measurement, and the bound on its distance
/// from the unrounded result: one unit in the last place, in canonical units.
fn canonical_with_slack(m: &Measurement, ctx: &PrecisionContext) -> (Rational, Rational) {
    (m.canonical_exact(), m.value().ulp(ctx) * m.unit().scale())
}

/// Measurement properties over `subject`, checked against `reference`.
pub fn measure_suite(
    subject: &UnitRegistry,
    reference: &UnitRegistry,
    cases: u64,
    seed: u64,
    ctx: &PrecisionContext,
) -> SelftestReport {
    const NAMES: [&str; 7] = [
        "measure.round_trip",
        "measure.add_commutes",
        "measure.compare_consistent",
        "measure.cross_dimension_rejected",
        "measure.multiply",
        "measure.divide",
        "measure.scale",
    ];
    let pairs = same_dimension_pairs(subject);
    let units: Vec<_> = subject.units().cloned().collect();
    let cross: Vec<_> = units
        .iter()
        .flat_map(|a| units.iter().map(move |b| (a.clone(), b.clone())))
        .filter(|(a, b)| a.dimension() != b.dimension())
        .collect();

    run_batches(&NAMES, cases, seed, |rng, out| {
        let (u1, u2) = pairs.choose(rng).expect("every unit pairs with itself");
        let (a, b) = (
            Measurement::new(random_value(rng), u1.clone()),
            Measurement::new(random_value(rng), u2.clone()),
        );

        out[0].record(round_trip_check(
            a.value(),
            u1.name(),
            u2.name(),
            subject,
            reference,
            ctx,
        ));

        out[1].record((|| {
            let ab = add_absolute(&a, &b, ctx).map_err(|e| e.to_string())?;
            let ba = add_absolute(&b, &a, ctx).map_err(|e| e.to_string())?;
            let ((c1, s1), (c2, s2)) = (canonical_with_slack(&ab, ctx), canonical_with_slack(&ba, ctx));
            check((c1 - c2).abs() <= s1 + s2, || {
                format!("{a} + {b} = {ab}, but {b} + {a} = {ba}")
            })
        })());

        out[2].record((|| {
            let ord = order_measurements(&a, &b).map_err(|e| e.to_string())?;
            let rev = order_measurements(&b, &a).map_err(|e| e.to_string())?;
            let exact = a.canonical_exact().cmp(&b.canonical_exact());
            let self_eq = order_measurements(&a, &a).map_err(|e| e.to_string())? == Ordering::Equal;
            check(ord == exact && rev == ord.reverse() && self_eq, || {
                format!("{a} vs {b}: {ord:?}")
            })
        })());

        if let Some((x, y)) = cross.choose(rng) {
            let (p, q) = (
                Measurement::new(a.value().clone(), x.clone()),
                Measurement::new(b.value().clone(), y.clone()),
            );
            let rejected = |r: Result<_, MeasureError>| matches!(r, Err(MeasureError::DimensionMismatch { .. }));
            out[3].record(check(
                rejected(order_measurements(&p, &q).map(|_| ())) && rejected(add_absolute(&p, &q, ctx).map(|_| ())),
                || format!("{p} and {q} were not rejected"),
            ));
        }

        let (x, y) = (
            Measurement::new(random_value(rng), units.choose(rng).unwrap().clone()),
            Measurement::new(random_value(rng), units.choose(rng).unwrap().clone()),
        );
        out[4].record((|| {
            let p = subject.multiply(&x, &y, ctx).map_err(|e| e.to_string())?;
            let (c, slack) = canonical_with_slack(&p, ctx);
            let exact = x.canonical_exact() * y.canonical_exact();
            check(
                p.dimension() == x.dimension() * y.dimension() && (c - exact).abs() <= slack,
                || format!("{x} * {y} = {p}"),
            )
        })());
        out[5].record((|| {
            let q = subject.divide(&x, &y, ctx);
            if y.canonical_exact().is_zero() {
                return check(matches!(q, Err(MeasureError::DivisionByZero)), || format!("{x} / {y}"));
            }
            let q = q.map_err(|e| e.to_string())?;
            let (c, slack) = canonical_with_slack(&q, ctx);
            let exact = x.canonical_exact() / y.canonical_exact();
            check(
                q.dimension() == x.dimension() / y.dimension() && (c - exact).abs() <= slack,
                || format!("{x} / {y} = {q}"),
            )
        })());

        out[6].record((|| {
            if u1.is_affine() {
                return Ok(());
            }
            let k = random_value(rng);
            let s = scale_measurement(&k, &a, ctx).map_err(|e| e.to_string())?;
            let (c, slack) = canonical_with_slack(&s, ctx);
            let exact = k.to_rational() * a.canonical_exact();
            check(s.unit() == a.unit() && (c - exact).abs() <= slack, || {
                format!("{k} · {a} = {s}")
            })
        })());
    })
}

/// The full suite: dimension laws plus measurement properties, with
/// `reference` as the trusted registry for round trips.
pub fn selftest(
    subject: &UnitRegistry,
    reference: &UnitRegistry,
    cases: u64,
    seed: u64,
    ctx: &PrecisionContext,
) -> SelftestReport {
    let mut report = dimension_law_suite(cases, seed);
    report.extend(measure_suite(subject, reference, cases, seed, ctx));
    report
}
