//! Customer/provider/service settlement with time-varying exchange rates.
//!
//! Customers order services, each service is billed once by its provider,
//! a bill is paid by the customer in the customer's own currency, and only
//! paid services are served. Exchange rates change over time, so paying a
//! bill records the conversion in force at that moment (`t`) and every
//! later rate change leaves recorded payments untouched.
//!
//! State is kept in the shape of the underlying set-theoretic model: one
//! map per variable (`val`, `cust`, `prov`, `ser`, `npay`, `date`, `t`,
//! `cpay`) rather than one record per bill, so that [`check_invariants`]
//! can state each invariant exactly and hand-built broken states are
//! representable.
//!
//! Rates are stored against a single reference currency; converting from
//! `a` to `b` at date `d` uses `rate(d, a) / rate(d, b)`.

mod scenario;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Signed};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::decvalue::{render_rational, DecError, DecValue, PrecisionContext, Rational};

pub use scenario::{
    random_event, random_trace, random_world, run_scenario, Event, Scenario, ScenarioError, ScenarioReport,
    StepOutcome, TraceFailure,
};

pub type CustomerId = String;
pub type ProviderId = String;
pub type ServiceId = String;
pub type BillId = u64;
/// Abstract clock ticks.
pub type Date = u64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CurrencyError {
    #[error("guard failed in {event}: {reason}")]
    GuardFailed { event: &'static str, reason: String },
    #[error("no tariff for service `{0}`")]
    IncompleteTariff(ServiceId),
    #[error("service `{service}` refers to unknown provider `{provider}`")]
    UnknownProvider { service: ServiceId, provider: ProviderId },
    #[error("tariff given for unknown service `{0}`")]
    UnknownService(ServiceId),
    #[error("unknown currency `{0}`")]
    UnknownCurrency(String),
    #[error("currency `{0}` is already registered")]
    DuplicateCurrency(String),
    #[error("`{0}` is not a valid currency code")]
    InvalidCode(String),
    #[error("exchange rates must be strictly positive, got {0}")]
    InvalidRate(String),
    #[error("the reference currency has a fixed rate of 1")]
    ReferenceRate,
    #[error("clock cannot go back from {clock} to {requested}")]
    ClockRegression { clock: Date, requested: Date },
    #[error("currency mismatch: {left} vs {right}")]
    CurrencyMismatch { left: CurrencyCode, right: CurrencyCode },
    #[error(transparent)]
    Decimal(#[from] DecError),
}

fn guard(event: &'static str, ok: bool, reason: impl FnOnce() -> String) -> Result<(), CurrencyError> {
    if ok {
        Ok(())
    } else {
        Err(CurrencyError::GuardFailed {
            event,
            reason: reason(),
        })
    }
}

/// An ISO-style currency code such as `EUR`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CurrencyCode(String);

impl CurrencyCode {
    pub fn new(code: &str) -> Result<Self, CurrencyError> {
        if code.is_empty() || !code.chars().all(|c| c.is_ascii_alphanumeric()) {
            return Err(CurrencyError::InvalidCode(code.to_string()));
        }
        Ok(Self(code.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CurrencyCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// An amount in a given currency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Money {
    pub amount: DecValue,
    pub code: CurrencyCode,
}

impl Money {
    pub fn new(amount: DecValue, code: CurrencyCode) -> Self {
        Self { amount, code }
    }

    /// Sum of two amounts in the same currency.
    pub fn checked_add(&self, other: &Money, ctx: &PrecisionContext) -> Result<Money, CurrencyError> {
        if self.code != other.code {
            return Err(CurrencyError::CurrencyMismatch {
                left: self.code.clone(),
                right: other.code.clone(),
            });
        }
        Ok(Money::new(self.amount.add(&other.amount, ctx)?, self.code.clone()))
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.amount, self.code)
    }
}

/// Step-function exchange rates against a reference currency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RateTable {
    reference: CurrencyCode,
    /// For each non-reference code, rate changes keyed by effective date.
    schedule: BTreeMap<CurrencyCode, BTreeMap<Date, Rational>>,
}

impl RateTable {
    pub fn new(reference: CurrencyCode) -> Self {
        Self {
            reference,
            schedule: BTreeMap::new(),
        }
    }

    pub fn reference(&self) -> &CurrencyCode {
        &self.reference
    }

    /// Registers `code` with its value in reference units from date 0 on.
    pub fn register(&mut self, code: CurrencyCode, rate: Rational) -> Result<(), CurrencyError> {
        if code == self.reference || self.schedule.contains_key(&code) {
            return Err(CurrencyError::DuplicateCurrency(code.0));
        }
        check_rate(&rate)?;
        self.schedule.insert(code, BTreeMap::from([(0, rate)]));
        Ok(())
    }

    pub fn contains(&self, code: &CurrencyCode) -> bool {
        *code == self.reference || self.schedule.contains_key(code)
    }

    pub fn codes(&self) -> impl Iterator<Item = &CurrencyCode> {
        std::iter::once(&self.reference).chain(self.schedule.keys())
    }

    /// Sets the rate of `code` effective from `date`.
    pub fn set(&mut self, date: Date, code: &CurrencyCode, rate: Rational) -> Result<(), CurrencyError> {
        check_rate(&rate)?;
        if *code == self.reference {
            return Err(CurrencyError::ReferenceRate);
        }
        let entries = self
            .schedule
            .get_mut(code)
            .ok_or_else(|| CurrencyError::UnknownCurrency(code.0.clone()))?;
        entries.insert(date, rate);
        Ok(())
    }

    /// Value of one unit of `code` in reference units at `date`.
    pub fn rate(&self, date: Date, code: &CurrencyCode) -> Option<Rational> {
        if *code == self.reference {
            return Some(Rational::one());
        }
        self.schedule
            .get(code)?
            .range(..=date)
            .next_back()
            .map(|(_, r)| r.clone())
    }

    /// Factor converting amounts in `from` to amounts in `to` at `date`.
    pub fn conversion(&self, date: Date, from: &CurrencyCode, to: &CurrencyCode) -> Option<Rational> {
        Some(self.rate(date, from)? / self.rate(date, to)?)
    }
}

fn check_rate(rate: &Rational) -> Result<(), CurrencyError> {
    if rate.is_positive() {
        Ok(())
    } else {
        Err(CurrencyError::InvalidRate(render_rational(rate)))
    }
}

/// A recorded conversion: multiply `source` amounts by `rate` to get
/// `target` amounts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Snapshot {
    pub rate: Rational,
    pub source: CurrencyCode,
    pub target: CurrencyCode,
}

impl Snapshot {
    pub fn apply(&self, m: &Money, ctx: &PrecisionContext) -> Result<Money, CurrencyError> {
        if m.code != self.source {
            return Err(CurrencyError::CurrencyMismatch {
                left: self.source.clone(),
                right: m.code.clone(),
            });
        }
        Ok(Money::new(m.amount.mul_rational(&self.rate, ctx)?, self.target.clone()))
    }
}

impl fmt::Display for Snapshot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}@{}", self.source, self.target, render_rational(&self.rate))
    }
}

/// Read-only view of one bill.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bill {
    pub id: BillId,
    pub val: Money,
    pub cust: CustomerId,
    pub prov: ProviderId,
    pub ser: ServiceId,
    pub date: Option<Date>,
    pub t: Option<Snapshot>,
    pub npay: Option<Money>,
}

/// The static part of a settlement world.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct World {
    /// Each customer with the currency it pays in.
    pub customers: BTreeMap<CustomerId, CurrencyCode>,
    pub providers: BTreeSet<ProviderId>,
    /// Each service with its single provider.
    pub services: BTreeMap<ServiceId, ProviderId>,
    pub tariff: BTreeMap<ServiceId, Money>,
}

/// Full machine state. Fields are public so broken states can be built
/// by hand; the event methods are the only way to move between legal ones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CurrencyState {
    pub customers: BTreeMap<CustomerId, CurrencyCode>,
    pub providers: BTreeSet<ProviderId>,
    pub provider_of: BTreeMap<ServiceId, ProviderId>,
    pub tariff: BTreeMap<ServiceId, Money>,

    /// Ordered (service, customer) pairs with their order sequence number.
    pub order: BTreeMap<(ServiceId, CustomerId), u64>,
    pub billing: BTreeMap<ServiceId, CustomerId>,
    pub pay: BTreeMap<ServiceId, CustomerId>,
    pub deliver: BTreeMap<ServiceId, CustomerId>,

    pub bills: BTreeSet<BillId>,
    pub val: BTreeMap<BillId, Money>,
    pub cust: BTreeMap<BillId, CustomerId>,
    pub prov: BTreeMap<BillId, ProviderId>,
    pub ser: BTreeMap<BillId, ServiceId>,
    pub npay: BTreeMap<BillId, Money>,
    pub date: BTreeMap<BillId, Date>,
    pub t: BTreeMap<BillId, Snapshot>,
    pub cpay: BTreeMap<(CustomerId, ServiceId), Money>,

    pub clock: Date,
    pub rates: RateTable,
    pub ctx: PrecisionContext,
    next_order: u64,
    next_bill: BillId,
}

impl CurrencyState {
    /// Builds an engine with empty relations at clock 0.
    pub fn new(world: World, rates: RateTable, ctx: PrecisionContext) -> Result<Self, CurrencyError> {
        for (service, provider) in &world.services {
            if !world.providers.contains(provider) {
                return Err(CurrencyError::UnknownProvider {
                    service: service.clone(),
                    provider: provider.clone(),
                });
            }
            if !world.tariff.contains_key(service) {
                return Err(CurrencyError::IncompleteTariff(service.clone()));
            }
        }
        for (service, money) in &world.tariff {
            if !world.services.contains_key(service) {
                return Err(CurrencyError::UnknownService(service.clone()));
            }
            if !rates.contains(&money.code) {
                return Err(CurrencyError::UnknownCurrency(money.code.0.clone()));
            }
        }
        if let Some(code) = world.customers.values().find(|c| !rates.contains(c)) {
            return Err(CurrencyError::UnknownCurrency(code.0.clone()));
        }
        Ok(Self {
            customers: world.customers,
            providers: world.providers,
            provider_of: world.services,
            tariff: world.tariff,
            order: BTreeMap::new(),
            billing: BTreeMap::new(),
            pay: BTreeMap::new(),
            deliver: BTreeMap::new(),
            bills: BTreeSet::new(),
            val: BTreeMap::new(),
            cust: BTreeMap::new(),
            prov: BTreeMap::new(),
            ser: BTreeMap::new(),
            npay: BTreeMap::new(),
            date: BTreeMap::new(),
            t: BTreeMap::new(),
            cpay: BTreeMap::new(),
            clock: 0,
            rates,
            ctx,
            next_order: 0,
            next_bill: 1,
        })
    }

    pub fn bill(&self, id: BillId) -> Option<Bill> {
        Some(Bill {
            id,
            val: self.val.get(&id)?.clone(),
            cust: self.cust.get(&id)?.clone(),
            prov: self.prov.get(&id)?.clone(),
            ser: self.ser.get(&id)?.clone(),
            date: self.date.get(&id).copied(),
            t: self.t.get(&id).cloned(),
            npay: self.npay.get(&id).cloned(),
        })
    }

    fn convert(&self, m: &Money, to: &CurrencyCode) -> Result<Money, CurrencyError> {
        let rate = self
            .rates
            .conversion(self.clock, &m.code, to)
            .ok_or_else(|| CurrencyError::UnknownCurrency(to.0.clone()))?;
        Ok(Money::new(m.amount.mul_rational(&rate, &self.ctx)?, to.clone()))
    }

    /// A customer requests a service.
    pub fn event_order(&mut self, c: &str, s: &str) -> Result<(), CurrencyError> {
        const E: &str = "order";
        guard(E, self.customers.contains_key(c), || format!("unknown customer `{c}`"))?;
        guard(E, self.provider_of.contains_key(s), || format!("unknown service `{s}`"))?;
        let key = (s.to_string(), c.to_string());
        guard(E, !self.order.contains_key(&key), || {
            format!("`{c}` already ordered `{s}`")
        })?;
        self.order.insert(key, self.next_order);
        self.next_order += 1;
        Ok(())
    }

    /// The provider bills an ordered service, with the tariff converted at
    /// the current clock into `code`. The bill goes to the earliest
    /// customer who ordered the service.
    pub fn event_bill(&mut self, s: &str, code: &CurrencyCode) -> Result<BillId, CurrencyError> {
        const E: &str = "bill";
        guard(E, !self.billing.contains_key(s), || {
            format!("service `{s}` is already billed")
        })?;
        guard(E, !self.ser.values().any(|x| x == s), || {
            format!("service `{s}` already has a bill")
        })?;
        let customer = self
            .order
            .iter()
            .filter(|((svc, _), _)| svc == s)
            .min_by_key(|(_, seq)| **seq)
            .map(|((_, c), _)| c.clone());
        let customer = customer.ok_or_else(|| CurrencyError::GuardFailed {
            event: E,
            reason: format!("service `{s}` has not been ordered"),
        })?;
        guard(E, self.rates.contains(code), || format!("unknown currency `{code}`"))?;
        let val = self.convert(&self.tariff[s], code)?;
        let id = self.next_bill;
        self.next_bill += 1;
        self.bills.insert(id);
        self.val.insert(id, val);
        self.cust.insert(id, customer.clone());
        self.prov.insert(id, self.provider_of[s].clone());
        self.ser.insert(id, s.to_string());
        self.billing.insert(s.to_string(), customer);
        Ok(id)
    }

    /// The customer pays a bill in their own currency. The conversion used
    /// is recorded with the payment.
    pub fn event_pay(&mut self, b: BillId) -> Result<(), CurrencyError> {
        const E: &str = "pay";
        guard(E, self.bills.contains(&b), || format!("no bill {b}"))?;
        guard(E, !self.date.contains_key(&b), || format!("bill {b} is already paid"))?;
        let val = self.val[&b].clone();
        let c = self.cust[&b].clone();
        let s = self.ser[&b].clone();
        let target = self.customers[&c].clone();
        let rate = self
            .rates
            .conversion(self.clock, &val.code, &target)
            .ok_or_else(|| CurrencyError::UnknownCurrency(target.0.clone()))?;
        let snapshot = Snapshot {
            rate,
            source: val.code.clone(),
            target,
        };
        let paid = snapshot.apply(&val, &self.ctx)?;
        self.date.insert(b, self.clock);
        self.t.insert(b, snapshot);
        self.npay.insert(b, val);
        self.cpay.insert((c.clone(), s.clone()), paid);
        self.pay.insert(s, c);
        Ok(())
    }

    /// A paid service is delivered.
    pub fn event_serve(&mut self, s: &str) -> Result<(), CurrencyError> {
        const E: &str = "serve";
        let c = self.pay.get(s).cloned().ok_or_else(|| CurrencyError::GuardFailed {
            event: E,
            reason: format!("service `{s}` has not been paid"),
        })?;
        guard(E, !self.deliver.contains_key(s), || {
            format!("service `{s}` was already delivered")
        })?;
        self.deliver.insert(s.to_string(), c);
        Ok(())
    }

    pub fn advance_clock(&mut self, to: Date) -> Result<(), CurrencyError> {
        if to < self.clock {
            return Err(CurrencyError::ClockRegression {
                clock: self.clock,
                requested: to,
            });
        }
        self.clock = to;
        Ok(())
    }

    /// Changes a rate from `date` on. Recorded snapshots never change.
    pub fn set_rate(&mut self, date: Date, code: &CurrencyCode, rate: Rational) -> Result<(), CurrencyError> {
        self.rates.set(date, code, rate)
    }

    /// Canonical text rendering of the dynamic state.
    pub fn render(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        let _ = writeln!(s, "clock {}", self.clock);
        for ((svc, c), seq) in &self.order {
            let _ = writeln!(s, "order {svc} {c} {seq}");
        }
        for (name, rel) in [
            ("billing", &self.billing),
            ("pay", &self.pay),
            ("deliver", &self.deliver),
        ] {
            for (svc, c) in rel {
                let _ = writeln!(s, "{name} {svc} {c}");
            }
        }
        for b in &self.bills {
            let _ = write!(s, "bill {b}");
            for (k, v) in [
                ("val", self.val.get(b).map(Money::to_string)),
                ("cust", self.cust.get(b).cloned()),
                ("prov", self.prov.get(b).cloned()),
                ("ser", self.ser.get(b).cloned()),
                ("npay", self.npay.get(b).map(Money::to_string)),
                ("date", self.date.get(b).map(|d| d.to_string())),
                ("t", self.t.get(b).map(Snapshot::to_string)),
            ] {
                if let Some(v) = v {
                    let _ = write!(s, " {k}={v}");
                }
            }
            s.push('\n');
        }
        for ((c, svc), m) in &self.cpay {
            let _ = writeln!(s, "cpay {c} {svc} {m}");
        }
        for code in self.rates.schedule.keys() {
            for (d, r) in &self.rates.schedule[code] {
                let _ = writeln!(s, "rate {d} {code} {}", render_rational(r));
            }
        }
        s
    }

    /// Short SHA-256 digest of [`CurrencyState::render`].
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.render().as_bytes());
        hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// A broken invariant with a human-readable witness.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub invariant: &'static str,
    pub witness: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.invariant, self.witness)
    }
}

fn dom<V>(m: &BTreeMap<BillId, V>) -> BTreeSet<BillId> {
    m.keys().copied().collect()
}

/// Every violated invariant of `st`, in a fixed order. Empty for any state
/// reached through the event methods.
pub fn check_invariants(st: &CurrencyState) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut fail = |invariant: &'static str, witness: String| out.push(Violation { invariant, witness });

    // service-level chain: deliver ⊆ pay ⊆ billing ⊆ order
    for (s, c) in &st.billing {
        if !st.order.contains_key(&(s.clone(), c.clone())) {
            fail("inv3", format!("billing {s} -> {c} was never ordered"));
        }
    }
    for (s, c) in &st.pay {
        if st.billing.get(s) != Some(c) {
            fail("inv4", format!("pay {s} -> {c} is not billed"));
        }
    }
    for (s, c) in &st.deliver {
        if st.pay.get(s) != Some(c) {
            fail("inv5", format!("deliver {s} -> {c} is not paid"));
        }
    }

    // ser is injective
    let mut seen: BTreeMap<&ServiceId, BillId> = BTreeMap::new();
    for (b, s) in &st.ser {
        if let Some(first) = seen.insert(s, *b) {
            fail("inv5_ser", format!("bills {first} and {b} share service {s}"));
        }
    }

    let domains = [
        ("inv10", "val", dom(&st.val)),
        ("inv11", "cust", dom(&st.cust)),
        ("inv12", "prov", dom(&st.prov)),
        ("inv13", "ser", dom(&st.ser)),
    ];
    for (inv, name, dom) in &domains {
        if *dom != st.bills {
            let diff: Vec<_> = dom.symmetric_difference(&st.bills).collect();
            fail(inv, format!("bills differ from dom({name}) at {diff:?}"));
        }
    }

    if let Some(s) = st.provider_of.keys().find(|s| !st.tariff.contains_key(*s)) {
        fail("inv14", format!("no tariff for service {s}"));
    }

    let billed: BTreeSet<&ServiceId> = st.billing.keys().collect();
    let ran_ser: BTreeSet<&ServiceId> = st.ser.values().collect();
    if billed != ran_ser {
        let diff: Vec<_> = billed.symmetric_difference(&ran_ser).collect();
        fail("inv15", format!("dom(billing) differs from ran(ser) at {diff:?}"));
    }

    let (dom_npay, dom_date, dom_t) = (dom(&st.npay), dom(&st.date), dom(&st.t));
    if let Some(b) = dom_npay.iter().find(|b| !st.ser.contains_key(b)) {
        fail("inv16", format!("npay for bill {b} without a service"));
    }
    let paid_services: BTreeSet<&ServiceId> = dom_npay.iter().filter_map(|b| st.ser.get(b)).collect();
    let dom_pay: BTreeSet<&ServiceId> = st.pay.keys().collect();
    if dom_pay != paid_services {
        let diff: Vec<_> = dom_pay.symmetric_difference(&paid_services).collect();
        fail("inv17", format!("dom(pay) differs from ser[dom(npay)] at {diff:?}"));
    }
    if let Some(b) = dom_npay.iter().find(|b| !st.bills.contains(b)) {
        fail("inv19", format!("npay for unknown bill {b}"));
    }

    for b in &st.bills {
        if let (Some(n), Some(v)) = (st.npay.get(b), st.val.get(b)) {
            if n != v {
                fail("inv20", format!("bill {b}: npay {n} differs from val {v}"));
            }
        }
    }
    if dom_npay != dom_date {
        fail(
            "inv21a",
            format!("dom(npay) {dom_npay:?} differs from dom(date) {dom_date:?}"),
        );
    }
    if dom_t != dom_date || dom_npay != dom_t {
        fail(
            "inv21b",
            format!("dom(t) {dom_t:?}, dom(date) {dom_date:?}, dom(npay) {dom_npay:?}"),
        );
    }

    for b in st.bills.iter().filter(|b| st.date.contains_key(b)) {
        let (Some(c), Some(s), Some(v)) = (st.cust.get(b), st.ser.get(b), st.val.get(b)) else {
            continue;
        };
        let Some(paid) = st.cpay.get(&(c.clone(), s.clone())) else {
            fail("inv22", format!("bill {b}: no cpay for ({c}, {s})"));
            continue;
        };
        match st.t.get(b).map(|t| t.apply(v, &st.ctx)) {
            Some(Ok(expected)) if expected == *paid => {}
            Some(Ok(expected)) => fail("inv22", format!("bill {b}: cpay {paid} but t(val) = {expected}")),
            Some(Err(e)) => fail("inv22", format!("bill {b}: t(val) undefined: {e}")),
            None => fail("inv22", format!("bill {b}: paid without a recorded conversion")),
        }
    }

    if dom_t != dom_date {
        fail("inv23", format!("dom(t) {dom_t:?} differs from dom(date) {dom_date:?}"));
    }
    if dom_npay != dom_t {
        fail("inv24", format!("dom(npay) {dom_npay:?} differs from dom(t) {dom_t:?}"));
    }
    out
}

#[cfg(test)]
mod tests;
