use std::collections::HashMap;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::decvalue::{DecValue, PrecisionContext};
use crate::dimension::{BaseDimension, Dimension};
use crate::measure::{random_value, Measurement, UnitRegistry};

const LANDING_GEAR: &str = include_str!("../../../../corpus/landing_gear.dc");
const NOSEGEAR_INV6: &str = include_str!("../../../../corpus/nosegear_inv6.dc");
const NOSEGEAR_RED: &str = include_str!("../../../../corpus/nosegear_red.dc");
const REACTOR: &str = include_str!("../../../../corpus/reactor.dc");

fn reg() -> UnitRegistry {
    UnitRegistry::builtin()
}

fn ctx() -> PrecisionContext {
    PrecisionContext::default()
}

fn eval_str(src: &str) -> Result<Value, EvalError> {
    let e = parse_expr(src).unwrap();
    evaluate(&e, &HashMap::new(), &reg(), &ctx())
}

fn velocity() -> Dimension {
    Dimension::base(BaseDimension::Length) / Dimension::base(BaseDimension::Time)
}

#[test]
fn gram_plus_pound() {
    let v = eval_str("100 gram + 2 pound").unwrap();
    assert_eq!(v.to_string(), "1007.18474 gram");
}

#[test]
fn seconds_against_deciseconds() {
    assert_eq!(eval_str("10 second > 99 decisecond").unwrap(), Value::Bool(true));
    assert_eq!(eval_str("10 second > 100 decisecond").unwrap(), Value::Bool(false));
}

#[test]
fn absolute_temperature_addition() {
    // 273.15 K + 273.15 K = 546.3 K, reported back in celsius
    assert_eq!(eval_str("0 celsius + 0 celsius").unwrap().to_string(), "273.15 celsius");
    assert_eq!(
        eval_str("10 celsius - 0 celsius").unwrap().to_string(),
        "-263.15 celsius"
    );
}

#[test]
fn velocity_plus_time_is_rejected() {
    let report = check_source(
        "var velocity_kph : kph\nvar time_s : Second\ncheck velocity_kph + time_s",
        &reg(),
    );
    let errors: Vec<_> = report.errors().collect();
    assert_eq!(errors.len(), 1);
    let d = errors[0];
    assert_eq!(d.kind, ErrorKind::DimensionMismatch);
    assert_eq!(d.expected, Some(velocity()));
    assert_eq!(d.actual, Some(Dimension::base(BaseDimension::Time)));
    assert_eq!(d.pos, Pos { line: 3, col: 20 });
    assert_eq!(d.message, "dimension mismatch: L^1·T^-1 vs T^1");
}

#[test]
fn subtraction_inside_comparison_is_boolean() {
    let report = check_source(
        "var esmt_velocity : kph\nvar actual_velocity : kph\ncheck esmt_velocity > actual_velocity - 3 kph",
        &reg(),
    );
    assert_eq!(report.entries.len(), 1);
    assert_eq!(
        report.entries[0].verdict,
        Verdict::Ok {
            ty: Ty::Bool,
            value: None
        }
    );
}

#[test]
fn bare_numbers_scale_but_do_not_add() {
    let r = reg();
    let report = check_source(
        "var t : Second\ncheck t + 100\ncheck 2 * t\ncheck t / 2\ncheck 2 + 3",
        &r,
    );
    let kinds: Vec<_> = report
        .entries
        .iter()
        .map(|e| e.verdict.error().map(|d| d.kind))
        .collect();
    assert_eq!(kinds, vec![Some(ErrorKind::DimensionMismatch), None, None, None]);
}

#[test]
fn empty_program() {
    assert!(check_source("", &reg()).entries.is_empty());
    assert!(check_source("# only a comment\n", &reg()).entries.is_empty());
}

#[test]
fn landing_gear_corpus() {
    let r = reg();
    let report = check_source(LANDING_GEAR, &r);
    assert_eq!(report.entries.len(), 2);
    assert!(report.is_ok(), "{report:?}");

    let run = |current: i64| {
        let b = HashMap::from([
            ("currentTime".to_string(), DecValue::from(current)),
            ("T_extend".to_string(), DecValue::from(0)),
        ]);
        run_source(LANDING_GEAR, &r, &b, &ctx())
    };
    for (current, expected) in [(101, true), (100, false)] {
        let report = run(current);
        for e in &report.entries {
            assert_eq!(
                e.verdict,
                Verdict::Ok {
                    ty: Ty::Bool,
                    value: Some(Value::Bool(expected))
                }
            );
        }
    }
}

#[test]
fn nosegear_corpus() {
    let r = reg();
    let faithful = check_source(NOSEGEAR_INV6, &r);
    assert_eq!(faithful.entries.len(), 4);
    assert!(faithful.is_ok(), "{faithful:?}");

    let red = check_source(NOSEGEAR_RED, &r);
    assert_eq!(red.entries.len(), 4);
    assert_eq!(red.errors().count(), 1);
    assert_eq!(red.count(ErrorKind::DimensionMismatch), 1);
    let d = red.errors().next().unwrap();
    assert_eq!(d.pos.line, 9);
}

#[test]
fn reactor_corpus() {
    let r = reg();
    let report = check_source(REACTOR, &r);
    assert_eq!(report.entries.len(), 4);
    assert!(report.is_ok(), "{report:?}");
}

#[test]
fn errors_do_not_hide_later_verdicts() {
    let src = "var t : Second\ncheck t + 1 Metre\ncheck t + \ncheck nope\ncheck t > 2 hour\nassert t\nvar t : Metre\ncheck 1 parsec";
    let report = check_source(src, &reg());
    let got: Vec<_> = report
        .entries
        .iter()
        .map(|e| (e.pos.line, e.verdict.error().map(|d| d.kind)))
        .collect();
    assert_eq!(
        got,
        vec![
            (2, Some(ErrorKind::DimensionMismatch)),
            (4, Some(ErrorKind::ParseError)),
            (4, Some(ErrorKind::UnknownName)),
            (5, None),
            (6, Some(ErrorKind::NotAComparison)),
            (7, Some(ErrorKind::DuplicateName)),
            (8, Some(ErrorKind::UnknownUnit)),
        ]
    );
}

#[test]
fn lex_errors_are_a_single_verdict() {
    let report = check_source("check 1e", &reg());
    assert_eq!(report.entries.len(), 1);
    let d = report.errors().next().unwrap();
    assert_eq!(d.kind, ErrorKind::LexError);
    assert_eq!(d.pos, Pos { line: 1, col: 7 });
}

#[test]
fn declarations_extend_the_registry() {
    let src = "unit furlong : Length scale 201.168\n\
               unit fortnight : Time scale 1209600\n\
               derive fpf = furlong / fortnight\n\
               const speed : fpf = 1\n\
               eval speed + 0 mps\n\
               unit bad : Length/Time scale 1 offset 3\n\
               unit neg : Length scale -1\n\
               derive hot = celsius / Second";
    let report = run_source(src, &reg(), &HashMap::new(), &ctx());
    let kinds: Vec<_> = report
        .entries
        .iter()
        .map(|e| e.verdict.error().map(|d| d.kind))
        .collect();
    assert_eq!(
        kinds,
        vec![
            None,
            Some(ErrorKind::AffineCompositeRejected),
            Some(ErrorKind::InvalidScale),
            Some(ErrorKind::AffineCompositeRejected),
        ]
    );
    let Verdict::Ok { value: Some(v), .. } = &report.entries[0].verdict else {
        panic!()
    };
    assert_eq!(v.to_string(), "1 fpf");
}

#[test]
fn assertions() {
    let r = reg();
    let run = |src: &str| run_source(src, &r, &HashMap::new(), &ctx());
    assert!(run("assert 1000 gram == 1 Kilogram").is_ok());
    assert!(run("assert 5 minute > 200 second").is_ok());
    let failed = run("assert 1 hour < 59 minute");
    assert_eq!(failed.count(ErrorKind::AssertionFailed), 1);
    let unbound = run_source(
        "var x : Second\nassert x > 0 Second\neval x",
        &r,
        &HashMap::new(),
        &ctx(),
    );
    assert!(unbound.entries[0].verdict.is_ok());
    assert_eq!(
        unbound.entries[1].verdict.error().unwrap().kind,
        ErrorKind::UnboundVariable
    );
    let div = run("eval 1 Metre / 0 Second");
    assert_eq!(div.count(ErrorKind::DivisionByZero), 1);
}

#[test]
fn machine_lines() {
    let report = check_source(NOSEGEAR_RED, &reg());
    let lines: Vec<_> = report.entries.iter().map(Entry::machine).collect();
    assert_eq!(lines[0], "7\t1\tcheck\tOK\tBool\t-");
    assert_eq!(
        lines[2],
        "9\t39\tcheck\tERROR\tDimensionMismatch\tL^1·T^-1\tT^1\tdimension mismatch: L^1·T^-1 vs T^1"
    );
    assert_eq!(
        report.entries[2].plain("nosegear_red.dc"),
        "nosegear_red.dc:9:39: DimensionMismatch: dimension mismatch: L^1·T^-1 vs T^1"
    );
}

/// `check 1 u1 + 1 u2` is rejected for every pair of units of unequal
/// dimension, and accepted for equal ones.
#[test]
fn incoherence_scan() {
    let r = reg();
    let units: Vec<_> = r.units().cloned().collect();
    assert!(units.len() >= 12);
    for a in &units {
        for b in &units {
            let report = check_source(&format!("check 1 {} + 1 {}", a.name(), b.name()), &r);
            assert_eq!(report.entries.len(), 1);
            let mismatch = report.count(ErrorKind::DimensionMismatch) == 1;
            assert_eq!(mismatch, a.dimension() != b.dimension(), "{} + {}", a.name(), b.name());
        }
    }
}

// ---- generated programs -------------------------------------------------

const VARS: &[(&str, &str)] = &[
    ("t", "Second"),
    ("ds", "decisecond"),
    ("len", "mile"),
    ("m", "pound"),
    ("v", "kph"),
    ("w", "mph"),
    ("temp", "fahrenheit"),
    ("c", "celsius"),
];
const UNITS: &[&str] = &[
    "Second", "hour", "Metre", "inch", "gram", "mps", "kph", "kelvin", "celsius",
];

fn arb_expr() -> impl Strategy<Value = Expr> {
    let p = Pos::default();
    let leaf = prop_oneof![
        (0..VARS.len()).prop_map(move |i| Expr::new(ExprKind::Name(VARS[i].0.into()), p)),
        (1i64..1000, -3i64..3, proptest::option::of(0..UNITS.len())).prop_map(move |(s, e, u)| {
            Expr::new(
                ExprKind::Literal {
                    value: DecValue::make_float(s, e).unwrap(),
                    unit: u.map(|i| Ident {
                        name: UNITS[i].into(),
                        pos: p,
                    }),
                },
                p,
            )
        }),
    ];
    leaf.prop_recursive(4, 24, 2, move |inner| {
        prop_oneof![
            (inner.clone(), inner.clone(), 0..4usize).prop_map(move |(l, r, op)| {
                let op = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div][op];
                Expr::new(
                    ExprKind::Binary {
                        op,
                        lhs: Box::new(l),
                        rhs: Box::new(r),
                    },
                    p,
                )
            }),
            inner
                .clone()
                .prop_map(move |e| Expr::new(ExprKind::Neg(Box::new(e)), p)),
            (inner, -3i32..=3).prop_map(move |(e, n)| Expr::new(
                ExprKind::Pow {
                    base: Box::new(e),
                    exponent: n
                },
                p
            )),
        ]
    })
}

fn arb_stmt() -> impl Strategy<Value = Stmt> {
    let p = Pos::default();
    (arb_expr(), proptest::option::of((arb_expr(), 0..6usize)), 0..3usize).prop_map(move |(l, cmp, k)| {
        let expr = match cmp {
            Some((r, op)) => Expr::new(
                ExprKind::Compare {
                    op: crate::measure::CompareOp::ALL[op],
                    lhs: Box::new(l),
                    rhs: Box::new(r),
                },
                p,
            ),
            None => l,
        };
        let kind = match k {
            0 => StmtKind::Check,
            1 => StmtKind::Eval,
            _ => StmtKind::Assert,
        };
        Stmt { kind, expr, pos: p }
    })
}

fn declarations() -> String {
    VARS.iter().map(|(n, u)| format!("var {n} : {u}\n")).collect()
}

fn random_bindings(seed: u64) -> HashMap<String, Measurement> {
    let r = reg();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    VARS.iter()
        .map(|(n, u)| (n.to_string(), r.make(random_value(&mut rng), u).unwrap()))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn parser_round_trip(stmts in proptest::collection::vec(arb_stmt(), 0..6)) {
        let mut program = parse_source(&declarations()).unwrap();
        program.items.extend(stmts.into_iter().map(Item::Stmt));
        let rendered = program.to_string();
        let reparsed = parse_source(&rendered).unwrap();
        prop_assert_eq!(reparsed.without_positions(), program.without_positions(), "{}", rendered);
    }

    /// A statically accepted expression never fails with a dimension
    /// mismatch at run time, and its inferred dimension is the dimension of
    /// its value.
    #[test]
    fn soundness_and_agreement(e in arb_expr(), seed in any::<u64>()) {
        let r = reg();
        let (_, scope) = check_with_scope(&parse_source(&declarations()).unwrap(), &r);
        let env = random_bindings(seed);
        match infer_dimension(&e, &scope) {
            Ok(Ty::Quantity(d)) => match evaluate(&e, &env, scope.registry(), &ctx()) {
                Ok(Value::Quantity(m)) => prop_assert_eq!(m.dimension(), d),
                Ok(Value::Bool(_)) => prop_assert!(false, "quantity evaluated to a boolean"),
                Err(EvalError::Measure { error, .. }) => prop_assert!(
                    !matches!(error, crate::measure::MeasureError::DimensionMismatch { .. }),
                    "{}: {}", e, error
                ),
                Err(other) => prop_assert!(false, "{}", other),
            },
            Ok(Ty::Bool) => prop_assert!(false, "bare expression typed as boolean"),
            Err(d) => {
                prop_assert!(matches!(d.kind, ErrorKind::DimensionMismatch | ErrorKind::ExponentOverflow), "{}", d);
                // an ill-typed expression really does fail when evaluated
                if d.kind == ErrorKind::DimensionMismatch {
                    let res = evaluate(&e, &env, scope.registry(), &ctx());
                    prop_assert!(res.is_err());
                }
            }
        }
    }
}
