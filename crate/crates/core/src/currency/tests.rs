use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::decvalue::parse_rational;

const SHOP: &str = include_str!("../../../../corpus/shop.scn");

fn code(s: &str) -> CurrencyCode {
    CurrencyCode::new(s).unwrap()
}

fn q(s: &str) -> Rational {
    parse_rational(s).unwrap()
}

fn money(amount: &str, c: &str) -> Money {
    Money::new(DecValue::parse(amount).unwrap(), code(c))
}

fn rates() -> RateTable {
    let mut r = RateTable::new(code("USD"));
    r.register(code("EUR"), q("11/10")).unwrap();
    r.register(code("GBP"), q("5/4")).unwrap();
    r
}

fn world() -> World {
    let mut w = World::default();
    w.customers.insert("alice".into(), code("USD"));
    w.customers.insert("bob".into(), code("GBP"));
    w.providers.insert("acme".into());
    w.services.insert("hosting".into(), "acme".into());
    w.services.insert("backup".into(), "acme".into());
    w.tariff.insert("hosting".into(), money("100", "EUR"));
    w.tariff.insert("backup".into(), money("30", "USD"));
    w
}

fn engine() -> CurrencyState {
    CurrencyState::new(world(), rates(), PrecisionContext::default()).unwrap()
}

fn is_guard(r: Result<impl std::fmt::Debug, CurrencyError>) -> bool {
    matches!(r, Err(CurrencyError::GuardFailed { .. }))
}

#[test]
fn construction() {
    let empty = CurrencyState::new(World::default(), rates(), PrecisionContext::default()).unwrap();
    assert!(check_invariants(&empty).is_empty());
    assert_eq!(empty.clock, 0);

    let mut w = world();
    w.services.insert("orphan".into(), "nobody".into());
    w.tariff.insert("orphan".into(), money("1", "USD"));
    assert!(matches!(
        CurrencyState::new(w, rates(), PrecisionContext::default()),
        Err(CurrencyError::UnknownProvider { .. })
    ));

    let mut w = world();
    w.tariff.remove("backup");
    assert_eq!(
        CurrencyState::new(w, rates(), PrecisionContext::default()).unwrap_err(),
        CurrencyError::IncompleteTariff("backup".into())
    );

    let mut w = world();
    w.customers.insert("carol".into(), code("JPY"));
    assert!(matches!(
        CurrencyState::new(w, rates(), PrecisionContext::default()),
        Err(CurrencyError::UnknownCurrency(_))
    ));
}

#[test]
fn ordering() {
    let mut st = engine();
    st.event_order("alice", "hosting").unwrap();
    assert!(st.order.contains_key(&("hosting".into(), "alice".into())));
    assert!(is_guard(st.event_order("alice", "hosting")));
    assert!(is_guard(st.event_order("mallory", "hosting")));
    assert!(is_guard(st.event_order("alice", "nothing")));
}

#[test]
fn billing() {
    let mut st = engine();
    assert!(is_guard(st.event_bill("hosting", &code("EUR"))));
    st.event_order("bob", "hosting").unwrap();
    st.event_order("alice", "hosting").unwrap();
    let b = st.event_bill("hosting", &code("EUR")).unwrap();
    let bill = st.bill(b).unwrap();
    assert_eq!(bill.val, money("100", "EUR"));
    // earliest order wins
    assert_eq!(bill.cust, "bob");
    assert_eq!(bill.prov, "acme");
    assert_eq!(bill.date, None);
    assert!(is_guard(st.event_bill("hosting", &code("EUR"))));
    assert!(check_invariants(&st).is_empty());

    // billed in another currency: 30 USD = 24 GBP at 5/4
    st.event_order("alice", "backup").unwrap();
    let b2 = st.event_bill("backup", &code("GBP")).unwrap();
    assert_eq!(st.val[&b2], money("24", "GBP"));
}

#[test]
fn paying_takes_a_snapshot() {
    let mut st = engine();
    st.event_order("alice", "hosting").unwrap();
    let b = st.event_bill("hosting", &code("EUR")).unwrap();
    st.event_pay(b).unwrap();
    assert_eq!(st.cpay[&("alice".into(), "hosting".into())], money("110", "USD"));
    assert_eq!(st.npay[&b], st.val[&b]);
    assert_eq!(st.date[&b], 0);
    assert_eq!(st.t[&b].rate, q("11/10"));
    assert!(is_guard(st.event_pay(b)));
    assert!(is_guard(st.event_pay(99)));

    let snapshot = st.t[&b].clone();
    st.set_rate(0, &code("EUR"), q("2")).unwrap();
    st.set_rate(5, &code("EUR"), q("3")).unwrap();
    st.advance_clock(7).unwrap();
    assert_eq!(st.cpay[&("alice".into(), "hosting".into())], money("110", "USD"));
    assert_eq!(st.t[&b], snapshot);
    assert!(check_invariants(&st).is_empty());
}

#[test]
fn later_payments_use_later_rates() {
    let mut st = engine();
    st.event_order("alice", "hosting").unwrap();
    let b = st.event_bill("hosting", &code("EUR")).unwrap();
    st.set_rate(3, &code("EUR"), q("6/5")).unwrap();
    st.advance_clock(2).unwrap();
    assert_eq!(
        st.rates.conversion(st.clock, &code("EUR"), &code("USD")),
        Some(q("11/10"))
    );
    st.advance_clock(3).unwrap();
    st.event_pay(b).unwrap();
    assert_eq!(st.cpay[&("alice".into(), "hosting".into())], money("120", "USD"));
    assert_eq!(
        st.advance_clock(1),
        Err(CurrencyError::ClockRegression { clock: 3, requested: 1 })
    );
    assert!(matches!(
        st.set_rate(4, &code("EUR"), q("0")),
        Err(CurrencyError::InvalidRate(_))
    ));
    assert!(matches!(
        st.set_rate(4, &code("EUR"), q("-1")),
        Err(CurrencyError::InvalidRate(_))
    ));
    assert_eq!(st.set_rate(4, &code("USD"), q("2")), Err(CurrencyError::ReferenceRate));
}

/// cpay equals the exact rational product rounded once.
#[test]
fn cpay_matches_rational_oracle() {
    let mut st = engine();
    st.event_order("bob", "hosting").unwrap();
    let b = st.event_bill("hosting", &code("EUR")).unwrap();
    st.set_rate(0, &code("GBP"), q("7/3")).unwrap();
    st.event_pay(b).unwrap();
    // 100 · (11/10) / (7/3) = 330/7 = 47.142857...
    let exact = q("100") * q("11/10") / q("7/3");
    assert_eq!(exact, q("330/7"));
    let expected = DecValue::from_rational(&exact, &PrecisionContext::default()).unwrap();
    assert_eq!(expected.to_string(), "47.14285714285714285714285714285714");
    assert_eq!(st.cpay[&("bob".into(), "hosting".into())].amount, expected);
}

#[test]
fn serving() {
    let mut st = engine();
    st.event_order("alice", "hosting").unwrap();
    let b = st.event_bill("hosting", &code("EUR")).unwrap();
    assert!(is_guard(st.event_serve("hosting")));
    st.event_pay(b).unwrap();
    st.event_serve("hosting").unwrap();
    assert_eq!(st.deliver["hosting"], "alice");
    assert!(is_guard(st.event_serve("hosting")));
    assert!(check_invariants(&st).is_empty());
}

#[test]
fn money_does_not_mix_currencies() {
    let ctx = PrecisionContext::default();
    assert_eq!(
        money("1.5", "EUR").checked_add(&money("2", "EUR"), &ctx).unwrap(),
        money("3.5", "EUR")
    );
    assert!(matches!(
        money("1", "EUR").checked_add(&money("1", "USD"), &ctx),
        Err(CurrencyError::CurrencyMismatch { .. })
    ));
    assert!(CurrencyCode::new("").is_err());
    assert!(CurrencyCode::new("E-R").is_err());
}

fn paid_state() -> (CurrencyState, BillId) {
    let mut st = engine();
    st.event_order("alice", "hosting").unwrap();
    let b = st.event_bill("hosting", &code("EUR")).unwrap();
    st.event_pay(b).unwrap();
    (st, b)
}

fn names(st: &CurrencyState) -> Vec<&'static str> {
    check_invariants(st).into_iter().map(|v| v.invariant).collect()
}

#[test]
fn hand_built_violations() {
    let (mut st, _) = paid_state();
    st.deliver.insert("backup".into(), "alice".into());
    let v = check_invariants(&st);
    assert_eq!(v.len(), 1);
    assert_eq!(v[0].invariant, "inv5");
    assert!(v[0].witness.contains("backup"));

    let (mut st, _) = paid_state();
    st.cpay.insert(("alice".into(), "hosting".into()), money("111", "USD"));
    assert_eq!(names(&st), vec!["inv22"]);

    let (mut st, b) = paid_state();
    st.cpay.clear();
    assert_eq!(names(&st), vec!["inv22"]);

    let (mut st, _) = paid_state();
    st.t.remove(&b);
    assert_eq!(names(&st), vec!["inv21b", "inv22", "inv23", "inv24"]);

    let (mut st, _) = paid_state();
    st.npay.insert(b, money("1", "EUR"));
    assert_eq!(names(&st), vec!["inv20"]);

    let (mut st, _) = paid_state();
    st.ser.insert(7, "hosting".into());
    st.bills.insert(7);
    st.val.insert(7, money("1", "EUR"));
    st.cust.insert(7, "alice".into());
    st.prov.insert(7, "acme".into());
    assert_eq!(names(&st), vec!["inv5_ser"]);

    let (mut st, _) = paid_state();
    st.val.remove(&b);
    assert!(names(&st).contains(&"inv10"));

    let (mut st, _) = paid_state();
    st.billing.insert("backup".into(), "bob".into());
    assert_eq!(names(&st), vec!["inv3", "inv15"]);

    let (mut st, _) = paid_state();
    st.pay.remove("hosting");
    assert_eq!(names(&st), vec!["inv17"]);

    let (mut st, _) = paid_state();
    st.tariff.remove("backup");
    assert_eq!(names(&st), vec!["inv14"]);
}

fn random_engine(seed: u64) -> (CurrencyState, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, r) = random_world(&mut rng);
    (CurrencyState::new(w, r, PrecisionContext::default()).unwrap(), rng)
}

#[test]
fn random_traces_preserve_invariants() {
    for seed in 0..300 {
        let (mut st, mut rng) = random_engine(seed);
        if let Err(f) = random_trace(&mut st, &mut rng, 100) {
            panic!("seed {seed}: {f}");
        }
    }
}

#[test]
fn replay_is_bit_exact() {
    for seed in 0..20 {
        let (mut a, mut rng) = random_engine(seed);
        let events = random_trace(&mut a, &mut rng, 100).unwrap();
        let (mut b, _) = random_engine(seed);
        for e in &events {
            e.apply(&mut b).unwrap();
        }
        assert_eq!(a, b);
        assert_eq!(a.digest(), b.digest());
        let (mut c, mut rng) = random_engine(seed);
        assert_eq!(random_trace(&mut c, &mut rng, 100).unwrap(), events);
    }
}

/// Projected onto (order, deliver) a trace is a legal trace of the
/// two-event machine; onto (order, billing, pay, deliver) a legal trace of
/// the four-event machine.
#[test]
fn traces_project_onto_abstract_machines() {
    for seed in 0..100 {
        let (mut st, mut rng) = random_engine(seed);
        let events = random_trace(&mut st, &mut rng, 100).unwrap();
        let (mut replay, _) = random_engine(seed);

        let mut order: BTreeSet<(String, String)> = BTreeSet::new();
        let mut billing: BTreeMap<String, String> = BTreeMap::new();
        let mut pay: BTreeMap<String, String> = BTreeMap::new();
        let mut deliver: BTreeMap<String, String> = BTreeMap::new();
        for e in &events {
            let before = replay.clone();
            e.apply(&mut replay).unwrap();
            match e {
                Event::Order { customer, service } => {
                    assert!(order.insert((service.clone(), customer.clone())));
                }
                Event::Bill { service, .. } => {
                    let c = replay.billing[service].clone();
                    assert!(order.contains(&(service.clone(), c.clone())));
                    assert!(billing.insert(service.clone(), c).is_none());
                }
                Event::Pay(b) => {
                    let s = before.ser[b].clone();
                    let c = billing[&s].clone();
                    assert!(pay.insert(s, c).is_none());
                }
                Event::Serve(s) => {
                    let c = pay[s].clone();
                    // two-event guard: served services were ordered
                    assert!(order.contains(&(s.clone(), c.clone())));
                    assert!(deliver.insert(s.clone(), c).is_none());
                }
                Event::Clock(_) | Event::Rate { .. } => {
                    assert_eq!(before.order, replay.order);
                    assert_eq!(before.deliver, replay.deliver);
                }
            }
            let order_now: BTreeSet<_> = replay.order.keys().cloned().collect();
            assert_eq!(order_now, order);
            assert_eq!(replay.billing, billing);
            assert_eq!(replay.pay, pay);
            assert_eq!(replay.deliver, deliver);
        }
    }
}

#[test]
fn scenario_file() {
    let sc = Scenario::parse(SHOP).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let report = run_scenario(&sc, &mut rng, PrecisionContext::default()).unwrap();
    assert!(report.is_ok(), "{report:?}");
    assert_eq!(report.steps.len(), 10);
    let st = &report.final_state;
    // alice paid at clock 0, before the EUR rate rose
    assert_eq!(st.cpay[&("alice".into(), "hosting".into())], money("110", "USD"));
    // bob pays 40 USD in GBP at 4/5
    assert_eq!(st.cpay[&("bob".into(), "support".into())], money("32", "GBP"));
    assert_eq!(st.deliver.len(), 2);
}

#[test]
fn scenario_failures_are_reported_and_skipped() {
    let text = "currency USD reference\ncustomer a USD\nprovider p\nservice s p 5 USD\n\
                serve s\norder a s\norder a s\nclock 3\nclock 1\nbill s USD\npay 1\nserve s\n";
    let sc = Scenario::parse(text).unwrap();
    let report = run_scenario(&sc, &mut ChaCha8Rng::seed_from_u64(0), PrecisionContext::default()).unwrap();
    let failed: Vec<usize> = report
        .steps
        .iter()
        .filter(|s| s.result.is_err())
        .map(|s| s.line)
        .collect();
    assert_eq!(failed, vec![5, 7, 9]);
    assert!(report.steps.iter().all(|s| s.violations.is_empty()));
    assert!(!report.is_ok());
    assert_eq!(report.final_state.deliver.len(), 1);
}

#[test]
fn scenario_random_directive_is_seeded() {
    let text = "currency USD reference\ncurrency EUR 9/10\ncustomer a EUR\ncustomer b USD\nprovider p\n\
                service s p 5 USD\nservice t p 7.25 EUR\nrandom 200\n";
    let sc = Scenario::parse(text).unwrap();
    let run = |seed| run_scenario(&sc, &mut ChaCha8Rng::seed_from_u64(seed), PrecisionContext::default()).unwrap();
    let (a, b, c) = (run(1), run(1), run(2));
    assert!(a.is_ok());
    assert_eq!(a.steps.len(), 200);
    assert_eq!(a, b);
    assert_ne!(a.final_state.digest(), c.final_state.digest());
}

#[test]
fn scenario_syntax_errors() {
    for (text, line) in [
        ("currency USD\n", 1),
        ("currency USD reference\norder a\n", 2),
        ("currency USD reference\norder a s\ncustomer a USD\n", 3),
        ("currency USD reference\nfly away\n", 2),
        ("currency USD reference\ncurrency EUR -1\n", 2),
        ("customer a USD\n", 0),
    ] {
        let e = Scenario::parse(text).unwrap_err();
        assert_eq!(e.line, line, "{text}");
    }
}
