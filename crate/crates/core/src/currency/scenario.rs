//! Scenario files and random legal traces.
//!
//! A scenario is line oriented. Setup lines come first:
//!
//! ```text
//! currency USD reference
//! currency EUR 11/10          # value of 1 EUR in reference units at date 0
//! customer alice USD
//! provider acme
//! service hosting acme 100 EUR
//! ```
//!
//! followed by one event per line:
//!
//! ```text
//! clock 3 | rate 3 EUR 6/5 | order alice hosting | bill hosting EUR | pay 1 | serve hosting
//! ```
//!
//! `random <n>` appends `n` random legal events drawn from the run's seed.

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use super::{
    check_invariants, BillId, CurrencyCode, CurrencyError, CurrencyState, CustomerId, Date, Money, RateTable,
    ServiceId, Violation, World,
};
use crate::decvalue::{parse_rational, render_rational, DecValue, PrecisionContext, Rational};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Event {
    Clock(Date),
    Rate {
        date: Date,
        code: CurrencyCode,
        rate: Rational,
    },
    Order {
        customer: CustomerId,
        service: ServiceId,
    },
    Bill {
        service: ServiceId,
        code: CurrencyCode,
    },
    Pay(BillId),
    Serve(ServiceId),
}

impl Event {
    pub fn apply(&self, st: &mut CurrencyState) -> Result<(), CurrencyError> {
        match self {
            Event::Clock(d) => st.advance_clock(*d),
            Event::Rate { date, code, rate } => st.set_rate(*date, code, rate.clone()),
            Event::Order { customer, service } => st.event_order(customer, service),
            Event::Bill { service, code } => st.event_bill(service, code).map(|_| ()),
            Event::Pay(b) => st.event_pay(*b),
            Event::Serve(s) => st.event_serve(s),
        }
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Event::Clock(d) => write!(f, "clock {d}"),
            Event::Rate { date, code, rate } => write!(f, "rate {date} {code} {}", render_rational(rate)),
            Event::Order { customer, service } => write!(f, "order {customer} {service}"),
            Event::Bill { service, code } => write!(f, "bill {service} {code}"),
            Event::Pay(b) => write!(f, "pay {b}"),
            Event::Serve(s) => write!(f, "serve {s}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ScenarioError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Step {
    Event(Event),
    Random(usize),
}

/// A parsed scenario file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub world: World,
    pub rates: RateTable,
    steps: Vec<(usize, Step)>,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let mut world = World::default();
        let mut reference: Option<CurrencyCode> = None;
        let mut pending: Vec<(usize, CurrencyCode, Rational)> = Vec::new();
        let mut steps = Vec::new();

        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |message: String| ScenarioError { line, message };
            let words: Vec<&str> = raw.split('#').next().unwrap_or("").split_whitespace().collect();
            let Some((&head, args)) = words.split_first() else {
                continue;
            };
            let code = |s: &str| CurrencyCode::new(s).map_err(|e| err(e.to_string()));
            let date = |s: &str| s.parse::<Date>().map_err(|_| err(format!("bad date `{s}`")));
            let rational = |s: &str| parse_rational(s).map_err(|e| err(format!("bad rate `{s}`: {e}")));
            let arity = |n: usize| {
                if args.len() == n {
                    Ok(())
                } else {
                    Err(err(format!("`{head}` takes {n} argument(s), got {}", args.len())))
                }
            };
            let setup = matches!(head, "currency" | "customer" | "provider" | "service");
            if setup && !steps.is_empty() {
                return Err(err(format!("`{head}` must come before the first event")));
            }
            match head {
                "currency" => {
                    arity(2)?;
                    let c = code(args[0])?;
                    if args[1] == "reference" {
                        if reference.is_some() {
                            return Err(err("a second reference currency".into()));
                        }
                        reference = Some(c);
                    } else {
                        pending.push((line, c, rational(args[1])?));
                    }
                }
                "customer" => {
                    arity(2)?;
                    if world.customers.insert(args[0].into(), code(args[1])?).is_some() {
                        return Err(err(format!("customer `{}` declared twice", args[0])));
                    }
                }
                "provider" => {
                    arity(1)?;
                    world.providers.insert(args[0].into());
                }
                "service" => {
                    arity(4)?;
                    let amount = DecValue::parse(args[2]).map_err(|e| err(e.to_string()))?;
                    if world.services.insert(args[0].into(), args[1].into()).is_some() {
                        return Err(err(format!("service `{}` declared twice", args[0])));
                    }
                    world.tariff.insert(args[0].into(), Money::new(amount, code(args[3])?));
                }
                "clock" => {
                    arity(1)?;
                    steps.push((line, Step::Event(Event::Clock(date(args[0])?))));
                }
                "rate" => {
                    arity(3)?;
                    steps.push((
                        line,
                        Step::Event(Event::Rate {
                            date: date(args[0])?,
                            code: code(args[1])?,
                            rate: rational(args[2])?,
                        }),
                    ));
                }
                "order" => {
                    arity(2)?;
                    steps.push((
                        line,
                        Step::Event(Event::Order {
                            customer: args[0].into(),
                            service: args[1].into(),
                        }),
                    ));
                }
                "bill" => {
                    arity(2)?;
                    steps.push((
                        line,
                        Step::Event(Event::Bill {
                            service: args[0].into(),
                            code: code(args[1])?,
                        }),
                    ));
                }
                "pay" => {
                    arity(1)?;
                    let b = args[0].parse().map_err(|_| err(format!("bad bill id `{}`", args[0])))?;
                    steps.push((line, Step::Event(Event::Pay(b))));
                }
                "serve" => {
                    arity(1)?;
                    steps.push((line, Step::Event(Event::Serve(args[0].into()))));
                }
                "random" => {
                    arity(1)?;
                    let n = args[0].parse().map_err(|_| err(format!("bad count `{}`", args[0])))?;
                    steps.push((line, Step::Random(n)));
                }
                other => return Err(err(format!("unknown directive `{other}`"))),
            }
        }

        let reference = reference.ok_or(ScenarioError {
            line: 0,
            message: "no reference currency declared".into(),
        })?;
        let mut rates = RateTable::new(reference);
        for (line, c, r) in pending {
            rates.register(c, r).map_err(|e| ScenarioError {
                line,
                message: e.to_string(),
            })?;
        }
        Ok(Self { world, rates, steps })
    }
}

/// What happened at one step of a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepOutcome {
    /// Scenario line that produced the event.
    pub line: usize,
    pub event: Event,
    pub result: Result<(), CurrencyError>,
    pub violations: Vec<Violation>,
    pub digest: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioReport {
    pub steps: Vec<StepOutcome>,
    pub final_state: CurrencyState,
}

impl ScenarioReport {
    /// No guard failures and no invariant violations.
    pub fn is_ok(&self) -> bool {
        self.steps.iter().all(|s| s.result.is_ok() && s.violations.is_empty())
    }
}

/// Runs a scenario. A failing event leaves the state unchanged and the run
/// continues; invariants are checked after every event.
pub fn run_scenario<R: Rng>(
    scenario: &Scenario,
    rng: &mut R,
    ctx: PrecisionContext,
) -> Result<ScenarioReport, CurrencyError> {
    let mut st = CurrencyState::new(scenario.world.clone(), scenario.rates.clone(), ctx)?;
    let mut steps = Vec::new();
    let mut record = |st: &mut CurrencyState, line: usize, event: Event, result| {
        steps.push(StepOutcome {
            line,
            event,
            result,
            violations: check_invariants(st),
            digest: st.digest(),
        });
    };
    for (line, step) in &scenario.steps {
        match step {
            Step::Event(e) => {
                let result = e.apply(&mut st);
                record(&mut st, *line, e.clone(), result);
            }
            Step::Random(n) => {
                for _ in 0..*n {
                    let e = random_event(&st, rng);
                    let result = e.apply(&mut st);
                    record(&mut st, *line, e, result);
                }
            }
        }
    }
    Ok(ScenarioReport { steps, final_state: st })
}

/// A legal event for `st`: its guard holds, so applying it succeeds.
pub fn random_event<R: Rng + ?Sized>(st: &CurrencyState, rng: &mut R) -> Event {
    let mut orders = Vec::new();
    for c in st.customers.keys() {
        for s in st.provider_of.keys() {
            if !st.order.contains_key(&(s.clone(), c.clone())) {
                orders.push((c, s));
            }
        }
    }
    let billable: Vec<&ServiceId> = st
        .order
        .keys()
        .map(|(s, _)| s)
        .filter(|s| !st.billing.contains_key(*s))
        .collect();
    let payable: Vec<BillId> = st.bills.iter().copied().filter(|b| !st.date.contains_key(b)).collect();
    let servable: Vec<&ServiceId> = st.pay.keys().filter(|s| !st.deliver.contains_key(*s)).collect();
    let codes: Vec<&CurrencyCode> = st.rates.codes().collect();
    let foreign: Vec<&CurrencyCode> = codes.iter().copied().filter(|c| *c != st.rates.reference()).collect();

    let mut kinds: Vec<(u8, u32)> = vec![(0, 1)];
    if !foreign.is_empty() {
        kinds.push((1, 1));
    }
    for (k, nonempty) in [
        (2, !orders.is_empty()),
        (3, !billable.is_empty()),
        (4, !payable.is_empty()),
        (5, !servable.is_empty()),
    ] {
        if nonempty {
            kinds.push((k, 3));
        }
    }
    let kind = kinds.choose_weighted(rng, |k| k.1).expect("clock is always enabled").0;
    match kind {
        0 => Event::Clock(st.clock + rng.gen_range(0..=3)),
        1 => {
            // mostly at the current date, sometimes in the past or future
            let date = match rng.gen_range(0..4) {
                0 => rng.gen_range(0..=st.clock),
                1 => st.clock + rng.gen_range(1..=3),
                _ => st.clock,
            };
            Event::Rate {
                date,
                code: (*foreign.choose(rng).unwrap()).clone(),
                rate: Rational::new(rng.gen_range(1..=400i64).into(), rng.gen_range(1..=200i64).into()),
            }
        }
        2 => {
            let (c, s) = orders.choose(rng).unwrap();
            Event::Order {
                customer: (*c).clone(),
                service: (*s).clone(),
            }
        }
        3 => Event::Bill {
            service: (*billable.choose(rng).unwrap()).clone(),
            code: (*codes.choose(rng).unwrap()).clone(),
        },
        4 => Event::Pay(*payable.choose(rng).unwrap()),
        _ => Event::Serve((*servable.choose(rng).unwrap()).clone()),
    }
}

/// A random world: three currencies, a few customers, providers and
/// services with random tariffs.
pub fn random_world<R: Rng + ?Sized>(rng: &mut R) -> (World, RateTable) {
    let code = |s: &str| CurrencyCode::new(s).expect("static code");
    let codes = [code("USD"), code("EUR"), code("GBP")];
    let mut rates = RateTable::new(codes[0].clone());
    for c in &codes[1..] {
        let r = Rational::new(rng.gen_range(50..=200i64).into(), 100.into());
        rates.register(c.clone(), r).expect("fresh code");
    }
    let mut world = World::default();
    for i in 0..rng.gen_range(1..=4) {
        world
            .customers
            .insert(format!("c{i}"), codes.choose(rng).unwrap().clone());
    }
    let providers = rng.gen_range(1..=3);
    for i in 0..providers {
        world.providers.insert(format!("p{i}"));
    }
    for i in 0..rng.gen_range(1..=6) {
        let s = format!("s{i}");
        world
            .services
            .insert(s.clone(), format!("p{}", rng.gen_range(0..providers)));
        let amount = DecValue::make_float(rng.gen_range(1..100_000i64), rng.gen_range(-2..=3)).expect("small exponent");
        world
            .tariff
            .insert(s, Money::new(amount, codes.choose(rng).unwrap().clone()));
    }
    (world, rates)
}

/// How a random trace went wrong.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceFailure {
    #[error("step {step}: legal event `{event}` was refused: {error}")]
    Refused {
        step: usize,
        event: Event,
        error: CurrencyError,
    },
    #[error("step {step}: after `{event}`: {}", .violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Violated {
        step: usize,
        event: Event,
        violations: Vec<Violation>,
    },
}

/// Applies `n` random legal events to `st`, checking every invariant after
/// each one. Returns the events applied.
pub fn random_trace<R: Rng + ?Sized>(
    st: &mut CurrencyState,
    rng: &mut R,
    n: usize,
) -> Result<Vec<Event>, TraceFailure> {
    let mut events = Vec::with_capacity(n);
    for step in 0..n {
        let event = random_event(st, rng);
        if let Err(error) = event.apply(st) {
            return Err(TraceFailure::Refused { step, event, error });
        }
        let violations = check_invariants(st);
        if !violations.is_empty() {
            return Err(TraceFailure::Violated {
                step,
                event,
                violations,
            });
        }
        events.push(event);
    }
    Ok(events)
}
