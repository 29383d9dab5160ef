//! Executable state and operation predicates.
//!
//! Each check returns data rather than panicking, so the same code serves as
//! an always-on assertion layer in tests ([`run_with_contracts`]) and as a
//! conformance checker for recorded traces ([`validate_trace`]).

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::domain::{
    validate_config, Gender, InfectionProvenance, InfectionSource, Person, PersonId, PersonState,
    PersonType, SimConfig,
};
use crate::engine::{
    ensure_valid, initial_world, make_partners, rng_from_seed, setup_initial_population,
    step_observed, CouplingEvent, EngineError, Trace, WorldState,
};
use crate::metrics::{compute_counters, CounterSnapshot, COUNTER_FIELDS};

/// The closed set of schemas a violation can cite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Schema {
    Fsw,
    Primary,
    Secondary,
    ExSecondary,
    Partners,
    Link,
    SetupInitialPopulation,
    MakePartners,
    Coupling,
    ApplyCondomUsage,
}

impl Schema {
    pub const ALL: [Schema; 10] = [
        Schema::Fsw,
        Schema::Primary,
        Schema::Secondary,
        Schema::ExSecondary,
        Schema::Partners,
        Schema::Link,
        Schema::SetupInitialPopulation,
        Schema::MakePartners,
        Schema::Coupling,
        Schema::ApplyCondomUsage,
    ];

    fn for_type(ptype: PersonType) -> Schema {
        match ptype {
            PersonType::Fsw => Schema::Fsw,
            PersonType::Primary => Schema::Primary,
            PersonType::Secondary => Schema::Secondary,
            PersonType::ExSecondary => Schema::ExSecondary,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subject {
    Person(PersonId),
    Pair(PersonId, PersonId),
    World,
}

impl fmt::Display for Subject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subject::Person(id) => write!(f, "{id}"),
            Subject::Pair(a, b) => write!(f, "({a}, {b})"),
            Subject::World => f.write_str("world"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub schema: Schema,
    pub subject: Subject,
    pub description: String,
    pub tick: u32,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "tick {}: {:?} violated by {}: {}",
            self.tick, self.schema, self.subject, self.description
        )
    }
}

struct Sink {
    tick: u32,
    out: Vec<Violation>,
}

impl Sink {
    fn new(tick: u32) -> Self {
        Sink {
            tick,
            out: Vec::new(),
        }
    }

    fn push(&mut self, schema: Schema, subject: Subject, description: impl Into<String>) {
        self.out.push(Violation {
            schema,
            subject,
            description: description.into(),
            tick: self.tick,
        });
    }
}

fn valid_sources(ptype: PersonType) -> &'static [InfectionSource] {
    match ptype {
        PersonType::Primary => &[
            InfectionSource::FromFsw,
            InfectionSource::FromSecondary,
            InfectionSource::FromExSecondary,
        ],
        _ => &[InfectionSource::FromPrimary],
    }
}

fn check_person(p: &Person, index: usize, world: &WorldState, sink: &mut Sink) {
    let id = p.id();
    let subject = Subject::Person(id);
    let schema = Schema::for_type(p.ptype());
    if id.index() != index {
        sink.push(
            Schema::SetupInitialPopulation,
            subject,
            format!("id stored at position {index}"),
        );
    }
    if p.gender() != p.ptype().gender() {
        sink.push(
            schema,
            subject,
            format!("{} has gender {:?}", p.ptype(), p.gender()),
        );
    }
    if let Some(partner) = p.partner() {
        match p.ptype().partner_type() {
            None => sink.push(
                schema,
                subject,
                format!("{} holds partner {partner}", p.ptype()),
            ),
            Some(expected) => match world.person(partner) {
                Some(q) if q.ptype() == expected => {}
                Some(q) => sink.push(
                    schema,
                    subject,
                    format!("partner {partner} is a {}, expected {expected}", q.ptype()),
                ),
                None => sink.push(schema, subject, format!("partner {partner} does not exist")),
            },
        }
    }
    match (p.state(), p.provenance()) {
        (PersonState::Infected, None) => sink.push(schema, subject, "infected without provenance"),
        (PersonState::Uninfected, Some(_)) => {
            sink.push(schema, subject, "uninfected but carries provenance")
        }
        (PersonState::Infected, Some(pr)) => {
            if pr.source() == InfectionSource::SeededAtSetup {
                if p.ptype() != PersonType::Fsw {
                    sink.push(
                        Schema::SetupInitialPopulation,
                        subject,
                        format!("seeded infection on a {}", p.ptype()),
                    );
                }
            } else {
                if !valid_sources(p.ptype()).contains(&pr.source()) {
                    sink.push(
                        Schema::ApplyCondomUsage,
                        subject,
                        format!("{} cannot be infected {:?}", p.ptype(), pr.source()),
                    );
                }
                if pr.tick() > world.tick {
                    sink.push(
                        schema,
                        subject,
                        format!(
                            "infected at tick {} after world tick {}",
                            pr.tick(),
                            world.tick
                        ),
                    );
                }
            }
        }
        (PersonState::Uninfected, None) => {}
    }
}

/// Checks a world against every state predicate.
pub fn check_state(world: &WorldState, cfg: &SimConfig) -> Vec<Violation> {
    let mut sink = Sink::new(world.tick);

    for (i, p) in world.persons.iter().enumerate() {
        check_person(p, i, world, &mut sink);
    }

    for ptype in PersonType::ALL {
        let have = world.count_of(ptype);
        let want = cfg.count_of(ptype) as usize;
        if have != want {
            sink.push(
                Schema::SetupInitialPopulation,
                Subject::World,
                format!("{have} persons of type {ptype}, configured {want}"),
            );
        }
    }
    let seeded = world
        .persons
        .iter()
        .filter(|p| p.provenance().map(|pr| pr.source()) == Some(InfectionSource::SeededAtSetup))
        .count();
    if seeded != cfg.max_infected_fsw as usize {
        sink.push(
            Schema::SetupInitialPopulation,
            Subject::World,
            format!(
                "{seeded} seeded infections, configured {}",
                cfg.max_infected_fsw
            ),
        );
    }

    check_partnerships(world, cfg, &mut sink);
    sink.out
}

fn check_partnerships(world: &WorldState, cfg: &SimConfig, sink: &mut Sink) {
    let mut uses: BTreeMap<PersonId, usize> = BTreeMap::new();
    for &(x, y) in &world.partnerships {
        *uses.entry(x).or_default() += 1;
        *uses.entry(y).or_default() += 1;
    }
    let reused: HashSet<PersonId> = uses
        .iter()
        .filter(|(_, &n)| n > 1)
        .map(|(&id, _)| id)
        .collect();
    for (&id, &n) in &uses {
        if n > 1 {
            sink.push(
                Schema::Partners,
                Subject::Person(id),
                format!("appears in {n} partnerships"),
            );
        }
    }

    for &(x, y) in &world.partnerships {
        let subject = Subject::Pair(x, y);
        let (Some(px), Some(py)) = (world.person(x), world.person(y)) else {
            sink.push(
                Schema::Partners,
                subject,
                "pair references an unknown person",
            );
            continue;
        };
        if px.ptype() != PersonType::Primary || py.ptype() != PersonType::Secondary {
            sink.push(
                Schema::Partners,
                subject,
                format!(
                    "pair is ({}, {}), expected (primary, secondary)",
                    px.ptype(),
                    py.ptype()
                ),
            );
            continue;
        }
        if reused.contains(&x) || reused.contains(&y) {
            continue;
        }
        if px.partner() != Some(y) || py.partner() != Some(x) {
            sink.push(
                Schema::Partners,
                subject,
                "partner fields are not reciprocal",
            );
        }
    }

    for p in &world.persons {
        let Some(q) = p.partner() else { continue };
        if reused.contains(&p.id()) {
            continue;
        }
        let listed =
            world.partnerships.contains(&(p.id(), q)) || world.partnerships.contains(&(q, p.id()));
        if !listed {
            sink.push(
                Schema::Partners,
                Subject::Person(p.id()),
                format!("partner field names {q} but no such partnership exists"),
            );
        }
    }

    let bound = cfg.partnership_target() as usize;
    if world.partnerships.len() > bound {
        sink.push(
            Schema::Partners,
            Subject::World,
            format!(
                "{} partnerships exceed min(tobecoupled, max_primary, max_secondary) = {bound}",
                world.partnerships.len()
            ),
        );
    }
}

/// Checks that partnering formed exactly the configured number of couples.
pub fn check_partnering(world: &WorldState, cfg: &SimConfig) -> Vec<Violation> {
    let mut sink = Sink::new(world.tick);
    let want = cfg.partnership_target() as usize;
    if world.partnerships.len() != want {
        sink.push(
            Schema::MakePartners,
            Subject::World,
            format!(
                "{} partnerships formed, expected {want}",
                world.partnerships.len()
            ),
        );
    }
    sink.out
}

/// Checks one coupling event against the world before and after it.
pub fn check_event(
    pre: &WorldState,
    event: &CouplingEvent,
    post: &WorldState,
    cfg: &SimConfig,
) -> Vec<Violation> {
    let mut sink = Sink::new(event.tick);
    check_event_core(&|id| pre.person(id), pre.tick, event, post, cfg, &mut sink);

    // Frame condition: nobody but the newly infected participant changes.
    let changed_ok = event.transmission.map(|t| t.infected);
    if pre.persons.len() != post.persons.len() {
        sink.push(
            Schema::ApplyCondomUsage,
            Subject::World,
            "population size changed",
        );
    }
    for (a, b) in pre.persons.iter().zip(&post.persons) {
        if a != b && Some(a.id()) != changed_ok {
            sink.push(
                Schema::ApplyCondomUsage,
                Subject::Person(a.id()),
                "non-participant state changed",
            );
        }
    }
    if pre.partnerships != post.partnerships {
        sink.push(
            Schema::ApplyCondomUsage,
            Subject::World,
            "partnerships changed during coupling",
        );
    }
    if pre.tick != post.tick {
        sink.push(
            Schema::ApplyCondomUsage,
            Subject::World,
            "tick changed during coupling",
        );
    }
    sink.out
}

/// Participant-level event checks. `pre` must resolve at least the two
/// participants.
fn check_event_core<'a>(
    pre: &dyn Fn(PersonId) -> Option<&'a Person>,
    pre_tick: u32,
    event: &CouplingEvent,
    post: &WorldState,
    cfg: &SimConfig,
    sink: &mut Sink,
) {
    let couple = Subject::Pair(event.male, event.female);
    if event.tick != pre_tick {
        sink.push(
            Schema::Coupling,
            Subject::World,
            format!("event tick {} but world tick {pre_tick}", event.tick),
        );
    }
    let (Some(male), Some(female)) = (pre(event.male), pre(event.female)) else {
        sink.push(Schema::Link, couple, "couple references an unknown person");
        return;
    };

    // Couple typing.
    if male.ptype() != PersonType::Primary {
        sink.push(
            Schema::Link,
            couple,
            format!("male side is a {}", male.ptype()),
        );
        return;
    }
    if female.gender() != Gender::Female {
        sink.push(Schema::Link, couple, "female side is not female");
        return;
    }
    let with_partner = male.partner() == Some(female.id());
    if female.ptype() == PersonType::Secondary && !with_partner {
        sink.push(
            Schema::Link,
            couple,
            "a secondary couples only with her committed primary",
        );
    }

    // Commitment rule, decidable at the slider boundaries.
    match cfg.commitment.value() {
        100 if !with_partner => sink.push(
            Schema::Coupling,
            couple,
            "fully committed primary coupled outside his partnership",
        ),
        0 if with_partner => sink.push(
            Schema::Coupling,
            couple,
            "primary with zero commitment coupled with his partner",
        ),
        _ => {}
    }

    // Condom rule.
    match cfg.condom_usage.value() {
        100 if !event.protected_act => sink.push(
            Schema::ApplyCondomUsage,
            couple,
            "unprotected act at full condom usage",
        ),
        0 if event.protected_act => sink.push(
            Schema::ApplyCondomUsage,
            couple,
            "protected act at zero condom usage",
        ),
        _ => {}
    }

    let post_male = post.person(event.male);
    let post_female = post.person(event.female);
    let discordant = male.is_infected() != female.is_infected();

    match event.transmission {
        Some(t) => {
            if event.protected_act {
                sink.push(
                    Schema::ApplyCondomUsage,
                    couple,
                    "transmission during a protected act",
                );
            }
            if cfg.transmission_probability == 0.0 {
                sink.push(
                    Schema::ApplyCondomUsage,
                    couple,
                    "transmission with zero transmission probability",
                );
            }
            let roles = [(event.male, event.female), (event.female, event.male)];
            if !roles.contains(&(t.infected, t.source)) {
                sink.push(
                    Schema::ApplyCondomUsage,
                    couple,
                    format!(
                        "transmission {} -> {} is not between the couple",
                        t.source, t.infected
                    ),
                );
                return;
            }
            let (victim, source) = if t.infected == event.male {
                (male, female)
            } else {
                (female, male)
            };
            if !source.is_infected() || victim.is_infected() {
                sink.push(
                    Schema::ApplyCondomUsage,
                    couple,
                    format!(
                        "transmission {} -> {} but the couple was not discordant that way",
                        t.source, t.infected
                    ),
                );
            }
            let expected = InfectionProvenance::transmitted(source.ptype(), event.tick).ok();
            let after = post.person(t.infected);
            if after.map(Person::state) != Some(PersonState::Infected)
                || (!victim.is_infected() && after.and_then(Person::provenance) != expected)
            {
                sink.push(
                    Schema::ApplyCondomUsage,
                    Subject::Person(t.infected),
                    "transmitted infection not reflected in the resulting state",
                );
            }
            let other = if t.infected == event.male {
                post_female
            } else {
                post_male
            };
            let other_pre = if t.infected == event.male {
                female
            } else {
                male
            };
            if other != Some(other_pre) {
                sink.push(
                    Schema::ApplyCondomUsage,
                    Subject::Person(other_pre.id()),
                    "transmitting participant changed",
                );
            }
        }
        None => {
            if !event.protected_act && discordant && cfg.transmission_probability == 1.0 {
                sink.push(
                    Schema::ApplyCondomUsage,
                    couple,
                    "unprotected discordant act with certain transmission did not transmit",
                );
            }
            if post_male != Some(male) || post_female != Some(female) {
                sink.push(
                    Schema::ApplyCondomUsage,
                    couple,
                    "participant state changed without a transmission",
                );
            }
        }
    }
}

/// Tracks per-tick Fsw client counts against the capacity cap.
struct CapacityTracker {
    limit: u32,
    counts: HashMap<PersonId, u32>,
}

impl CapacityTracker {
    fn new(limit: u32) -> Self {
        CapacityTracker {
            limit,
            counts: HashMap::new(),
        }
    }

    fn record(&mut self, world: &WorldState, event: &CouplingEvent, sink: &mut Sink) {
        if world.person(event.female).map(Person::ptype) != Some(PersonType::Fsw) {
            return;
        }
        let n = self.counts.entry(event.female).or_default();
        *n += 1;
        if *n == self.limit + 1 {
            sink.push(
                Schema::Coupling,
                Subject::Person(event.female),
                format!("fsw exceeded {} clients in one month", self.limit),
            );
        }
    }
}

/// Runs the engine with every contract checked along the way.
pub fn run_with_contracts(cfg: &SimConfig) -> Result<(Trace, Vec<Violation>), EngineError> {
    ensure_valid(cfg)?;
    let mut violations = Vec::new();
    let mut rng = rng_from_seed(cfg.seed);
    let mut world = setup_initial_population(cfg)?;
    violations.extend(check_state(&world, cfg));
    make_partners(&mut world, cfg, &mut rng)?;
    violations.extend(check_state(&world, cfg));
    violations.extend(check_partnering(&world, cfg));

    let mut events = Vec::new();
    let mut snapshots = Vec::new();
    for _ in 0..cfg.ticks {
        let mut tick_violations = Vec::new();
        let mut observer = |pre: &WorldState, ev: &CouplingEvent, post: &WorldState| {
            tick_violations.extend(check_event(pre, ev, post, cfg));
        };
        let tick_events = step_observed(&mut world, cfg, &mut rng, Some(&mut observer))?;
        let mut sink = Sink::new(world.tick);
        let mut capacity = CapacityTracker::new(cfg.avg_client_month);
        for ev in &tick_events {
            capacity.record(&world, ev, &mut sink);
        }
        violations.extend(tick_violations);
        violations.extend(sink.out);
        violations.extend(check_state(&world, cfg));
        events.extend(tick_events);
        snapshots.push(compute_counters(&world));
    }
    let trace = Trace {
        config: cfg.clone(),
        seed: cfg.seed,
        events,
        snapshots,
        final_state: world,
    };
    Ok((trace, violations))
}

/// Counter deltas of one month that disagree between the trace's snapshots
/// and the replayed events.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccountingMismatch {
    pub tick: u32,
    /// `(counter, delta recorded in the trace, delta implied by the events)`.
    pub differences: Vec<(String, i64, i64)>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceReport {
    /// Problems that prevented a replay (bad ordering, wrong snapshot count).
    pub structural: Vec<String>,
    pub violations: Vec<Violation>,
    pub accounting: Vec<AccountingMismatch>,
    pub final_state_matches: bool,
    pub passed: bool,
}

impl TraceReport {
    pub fn violations_by_tick(&self) -> BTreeMap<u32, Vec<&Violation>> {
        let mut out: BTreeMap<u32, Vec<&Violation>> = BTreeMap::new();
        for v in &self.violations {
            out.entry(v.tick).or_default().push(v);
        }
        out
    }

    fn finish(mut self) -> Self {
        self.passed = self.structural.is_empty()
            && self.violations.is_empty()
            && self.accounting.is_empty()
            && self.final_state_matches;
        self
    }
}

impl fmt::Display for TraceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "result: {}", if self.passed { "PASS" } else { "FAIL" })?;
        for s in &self.structural {
            writeln!(f, "structural: {s}")?;
        }
        for (tick, vs) in self.violations_by_tick() {
            writeln!(f, "tick {tick}: {} violation(s)", vs.len())?;
            for v in vs {
                writeln!(f, "  {:?} {}: {}", v.schema, v.subject, v.description)?;
            }
        }
        for m in &self.accounting {
            let diffs: Vec<String> = m
                .differences
                .iter()
                .map(|(name, trace, replay)| format!("{name} trace {trace:+} replay {replay:+}"))
                .collect();
            writeln!(
                f,
                "accounting mismatch at tick {}: {}",
                m.tick,
                diffs.join(", ")
            )?;
        }
        if !self.final_state_matches {
            writeln!(f, "final state differs from replay")?;
        }
        writeln!(
            f,
            "summary: {} structural, {} violation(s), {} accounting mismatch(es)",
            self.structural.len(),
            self.violations.len(),
            self.accounting.len()
        )
    }
}

fn structural_problems(trace: &Trace) -> Vec<String> {
    let cfg = &trace.config;
    let mut out = Vec::new();
    for v in validate_config(cfg) {
        out.push(format!("invalid config: {v}"));
    }
    if trace.seed != cfg.seed {
        out.push(format!(
            "seed {} differs from config seed {}",
            trace.seed, cfg.seed
        ));
    }
    if trace.snapshots.len() != cfg.ticks as usize {
        out.push(format!(
            "{} snapshots for {} ticks",
            trace.snapshots.len(),
            cfg.ticks
        ));
    }
    for (i, s) in trace.snapshots.iter().enumerate() {
        if s.tick as usize != i + 1 {
            out.push(format!("snapshot {i} carries tick {}", s.tick));
        }
    }
    for (i, w) in trace.events.windows(2).enumerate() {
        if w[1].tick < w[0].tick {
            out.push(format!(
                "event {} tick {} precedes tick {}",
                i + 1,
                w[1].tick,
                w[0].tick
            ));
        }
    }
    if let Some(e) = trace
        .events
        .iter()
        .find(|e| e.tick == 0 || e.tick > cfg.ticks)
    {
        out.push(format!(
            "event at tick {} outside 1..={}",
            e.tick, cfg.ticks
        ));
    }
    out
}

fn apply_recorded_event(world: &mut WorldState, event: &CouplingEvent) {
    let Some(t) = event.transmission else { return };
    let roles = [(event.male, event.female), (event.female, event.male)];
    if !roles.contains(&(t.infected, t.source)) {
        return;
    }
    let Some(source_type) = world.person(t.source).map(Person::ptype) else {
        return;
    };
    let Ok(provenance) = InfectionProvenance::transmitted(source_type, event.tick) else {
        return;
    };
    if let Some(p) = world.persons.get_mut(t.infected.index()) {
        p.infect(provenance);
    }
}

fn counter_deltas(before: &CounterSnapshot, after: &CounterSnapshot) -> [i64; 10] {
    let (a, b) = (before.counters(), after.counters());
    std::array::from_fn(|i| i64::from(b[i]) - i64::from(a[i]))
}

/// Replays a trace against the contracts.
///
/// The population is rebuilt from the configuration and the committed
/// partnerships are taken from the trace's final state (they never change
/// during a run), so traces from other implementations can be checked too.
/// Every recorded event is then applied in order and checked, the state
/// predicates are evaluated after every month, the month-over-month counter
/// changes are compared with the recorded snapshots, and the replayed final
/// state is compared with the recorded one.
pub fn validate_trace(trace: &Trace) -> TraceReport {
    let cfg = &trace.config;
    let mut report = TraceReport {
        structural: structural_problems(trace),
        ..TraceReport::default()
    };
    if !report.structural.is_empty() {
        return report.finish();
    }

    let mut world = match setup_initial_population(cfg) {
        Ok(w) => w,
        Err(e) => {
            report.structural.push(e.to_string());
            return report.finish();
        }
    };
    report.violations.extend(check_state(&world, cfg));

    for &(x, y) in &trace.final_state.partnerships {
        world.partnerships.insert((x, y));
        for (a, b) in [(x, y), (y, x)] {
            if let Some(p) = world.persons.get_mut(a.index()) {
                p.force_partner(Some(b));
            }
        }
    }
    report.violations.extend(check_state(&world, cfg));
    report.violations.extend(check_partnering(&world, cfg));

    let mut prev = compute_counters(&world);
    let mut events = trace.events.iter().peekable();
    for tick in 1..=cfg.ticks {
        world.tick = tick;
        let mut sink = Sink::new(tick);
        let mut capacity = CapacityTracker::new(cfg.avg_client_month);
        while let Some(ev) = events.next_if(|e| e.tick == tick) {
            let pre_male = world.person(ev.male).cloned();
            let pre_female = world.person(ev.female).cloned();
            apply_recorded_event(&mut world, ev);
            let lookup = |id: PersonId| -> Option<&Person> {
                if id == ev.male {
                    pre_male.as_ref()
                } else if id == ev.female {
                    pre_female.as_ref()
                } else {
                    None
                }
            };
            check_event_core(&lookup, tick, ev, &world, cfg, &mut sink);
            capacity.record(&world, ev, &mut sink);
        }
        report.violations.extend(sink.out);
        report.violations.extend(check_state(&world, cfg));

        let now = compute_counters(&world);
        let recorded_prev = if tick == 1 {
            prev
        } else {
            trace.snapshots[tick as usize - 2]
        };
        let recorded = trace.snapshots[tick as usize - 1];
        let replay_delta = counter_deltas(&prev, &now);
        let trace_delta = counter_deltas(&recorded_prev, &recorded);
        let differences: Vec<(String, i64, i64)> = COUNTER_FIELDS
            .iter()
            .zip(trace_delta.iter().zip(replay_delta.iter()))
            .filter(|(_, (t, r))| t != r)
            .map(|(name, (&t, &r))| (name.to_string(), t, r))
            .collect();
        if !differences.is_empty() {
            report
                .accounting
                .push(AccountingMismatch { tick, differences });
        }
        prev = now;
    }

    report.final_state_matches = world == trace.final_state;
    report.finish()
}

/// Convenience for tests: the engine's own initial world must satisfy every
/// state predicate.
pub fn check_initial_world(cfg: &SimConfig, seed: u64) -> Result<Vec<Violation>, EngineError> {
    let mut rng = rng_from_seed(seed);
    let world = initial_world(cfg, &mut rng)?;
    let mut v = check_state(&world, cfg);
    v.extend(check_partnering(&world, cfg));
    Ok(v)
}
