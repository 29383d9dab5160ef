//! Population setup, partnering, coupling and the monthly tick loop.
//!
//! Every random decision is drawn from one [`SimRng`] seeded from
//! `SimConfig::seed`, in a fixed order, so a run is a pure function of its
//! configuration.

use std::collections::BTreeSet;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    validate_config, ConfigViolation, Gender, InfectionProvenance, Person, PersonId, PersonType,
    SimConfig,
};
use crate::metrics::{compute_counters, CounterSnapshot};

pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("invalid configuration: {}", join_violations(.0))]
    InvalidConfig(Vec<ConfigViolation>),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("person {0} is not a primary")]
    NotPrimary(PersonId),
    #[error("person {0} is not female")]
    NotFemale(PersonId),
    #[error("unknown person {0}")]
    UnknownPerson(PersonId),
}

fn join_violations(v: &[ConfigViolation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

pub fn ensure_valid(cfg: &SimConfig) -> Result<(), EngineError> {
    let violations = validate_config(cfg);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(EngineError::InvalidConfig(violations))
    }
}

/// Full population plus the committed-partnership set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldState {
    /// Indexed by `PersonId`.
    pub persons: Vec<Person>,
    /// `(primary, secondary)` pairs.
    pub partnerships: BTreeSet<(PersonId, PersonId)>,
    /// Months completed; during a step, the month in progress.
    pub tick: u32,
}

impl WorldState {
    pub fn person(&self, id: PersonId) -> Option<&Person> {
        self.persons.get(id.index())
    }

    fn person_mut(&mut self, id: PersonId) -> Result<&mut Person, EngineError> {
        self.persons
            .get_mut(id.index())
            .ok_or(EngineError::UnknownPerson(id))
    }

    fn require(&self, id: PersonId) -> Result<&Person, EngineError> {
        self.person(id).ok_or(EngineError::UnknownPerson(id))
    }

    /// Ids of every person of `ptype`, ascending.
    pub fn ids_of(&self, ptype: PersonType) -> Vec<PersonId> {
        self.persons
            .iter()
            .filter(|p| p.ptype() == ptype)
            .map(Person::id)
            .collect()
    }

    pub fn count_of(&self, ptype: PersonType) -> usize {
        self.persons.iter().filter(|p| p.ptype() == ptype).count()
    }

    pub fn infected_count(&self) -> usize {
        self.persons.iter().filter(|p| p.is_infected()).count()
    }
}

/// One sexual contact between a Primary and a female agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CouplingEvent {
    pub tick: u32,
    pub male: PersonId,
    pub female: PersonId,
    #[serde(rename = "protected")]
    pub protected_act: bool,
    pub transmission: Option<Transmission>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transmission {
    pub infected: PersonId,
    pub source: PersonId,
}

/// Complete record of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub config: SimConfig,
    pub seed: u64,
    pub events: Vec<CouplingEvent>,
    /// One snapshot per completed month.
    pub snapshots: Vec<CounterSnapshot>,
    pub final_state: WorldState,
}

/// Creates the initial population.
///
/// Ids are assigned in blocks: Fsws first, then Primaries, Secondaries and
/// ExSecondaries. Sub-populations are exchangeable, so the seeded infections
/// go to the lowest-numbered Fsws and no randomness is consumed.
pub fn setup_initial_population(cfg: &SimConfig) -> Result<WorldState, EngineError> {
    ensure_valid(cfg)?;
    let mut persons = Vec::with_capacity(cfg.population() as usize);
    for ptype in PersonType::ALL {
        for _ in 0..cfg.count_of(ptype) {
            persons.push(Person::new(PersonId(persons.len() as u32), ptype));
        }
    }
    for fsw in persons.iter_mut().take(cfg.max_infected_fsw as usize) {
        fsw.infect(InfectionProvenance::SEEDED);
    }
    Ok(WorldState {
        persons,
        partnerships: BTreeSet::new(),
        tick: 0,
    })
}

/// Forms `cfg.partnership_target()` committed couples, drawing Primaries and
/// Secondaries uniformly without replacement.
pub fn make_partners(
    world: &mut WorldState,
    cfg: &SimConfig,
    rng: &mut SimRng,
) -> Result<(), EngineError> {
    if world.tick != 0 {
        return Err(EngineError::Precondition(format!(
            "partners are formed at tick 0, world is at tick {}",
            world.tick
        )));
    }
    if !world.partnerships.is_empty() || world.persons.iter().any(|p| p.partner().is_some()) {
        return Err(EngineError::Precondition(
            "partnerships already formed".to_string(),
        ));
    }
    let primaries = world.ids_of(PersonType::Primary);
    let secondaries = world.ids_of(PersonType::Secondary);
    let target = (cfg.partnership_target() as usize)
        .min(primaries.len())
        .min(secondaries.len());

    let chosen_primaries = index::sample(rng, primaries.len(), target);
    let chosen_secondaries = index::sample(rng, secondaries.len(), target);
    for (pi, si) in chosen_primaries.iter().zip(chosen_secondaries.iter()) {
        let (p, s) = (primaries[pi], secondaries[si]);
        world
            .person_mut(p)?
            .set_partner(Some(s))
            .map_err(|e| EngineError::Precondition(e.to_string()))?;
        world
            .person_mut(s)?
            .set_partner(Some(p))
            .map_err(|e| EngineError::Precondition(e.to_string()))?;
        world.partnerships.insert((p, s));
    }
    Ok(())
}

/// Per-tick pools of defection targets, including each Fsw's remaining
/// client capacity.
#[derive(Debug, Clone)]
pub struct CouplingPools {
    limit: u32,
    used: Vec<u32>,
    // Fsws with capacity left; `slot[id]` is the position of `id` in `open`.
    open: Vec<PersonId>,
    slot: Vec<usize>,
    exsecondaries: Vec<PersonId>,
}

impl CouplingPools {
    pub fn new(world: &WorldState, cfg: &SimConfig) -> Self {
        let n = world.persons.len();
        let open = if cfg.avg_client_month > 0 {
            world.ids_of(PersonType::Fsw)
        } else {
            Vec::new()
        };
        let mut slot = vec![usize::MAX; n];
        for (i, id) in open.iter().enumerate() {
            slot[id.index()] = i;
        }
        CouplingPools {
            limit: cfg.avg_client_month,
            used: vec![0; n],
            open,
            slot,
            exsecondaries: world.ids_of(PersonType::ExSecondary),
        }
    }

    /// Fsws that can still take a client this tick.
    pub fn open_fsws(&self) -> &[PersonId] {
        &self.open
    }

    pub fn exsecondaries(&self) -> &[PersonId] {
        &self.exsecondaries
    }

    pub fn clients_of(&self, fsw: PersonId) -> u32 {
        self.used.get(fsw.index()).copied().unwrap_or(0)
    }

    /// Records one client for `fsw`, closing it once the cap is reached.
    pub fn consume(&mut self, fsw: PersonId) {
        let i = fsw.index();
        let Some(pos) = self.slot.get(i).copied().filter(|&p| p != usize::MAX) else {
            return;
        };
        self.used[i] += 1;
        if self.used[i] >= self.limit {
            self.open.swap_remove(pos);
            if let Some(moved) = self.open.get(pos) {
                self.slot[moved.index()] = pos;
            }
            self.slot[i] = usize::MAX;
        }
    }

    fn pick_fsw(&self, rng: &mut SimRng) -> Option<PersonId> {
        pick(&self.open, rng)
    }

    fn pick_exsecondary(&self, rng: &mut SimRng) -> Option<PersonId> {
        pick(&self.exsecondaries, rng)
    }
}

fn pick(pool: &[PersonId], rng: &mut SimRng) -> Option<PersonId> {
    if pool.is_empty() {
        None
    } else {
        Some(pool[rng.random_range(0..pool.len())])
    }
}

/// Draws an integer threshold uniformly from `[1, 100]`.
fn draw_threshold(rng: &mut SimRng) -> u32 {
    rng.random_range(1..=100)
}

/// Chooses whom `primary` couples with on one attempt, or `None` to skip.
///
/// A threshold in `[1, 100]` is drawn; when `commitment >= threshold` the
/// primary stays committed: he couples with his partner, or abstains if he
/// has none. Otherwise he defects to an Fsw with spare capacity (probability
/// `fsw_preference`) or to an ExSecondary, falling back to the other pool
/// when the preferred one is empty.
pub fn select_coupling_target(
    primary: &Person,
    pools: &CouplingPools,
    cfg: &SimConfig,
    rng: &mut SimRng,
) -> Result<Option<PersonId>, EngineError> {
    if primary.ptype() != PersonType::Primary {
        return Err(EngineError::NotPrimary(primary.id()));
    }
    let threshold = draw_threshold(rng);
    if cfg.commitment.value() >= threshold {
        return Ok(primary.partner());
    }
    let prefer_fsw = rng.random_bool(cfg.fsw_preference);
    let target = if prefer_fsw {
        pools.pick_fsw(rng).or_else(|| pools.pick_exsecondary(rng))
    } else {
        pools.pick_exsecondary(rng).or_else(|| pools.pick_fsw(rng))
    };
    Ok(target)
}

/// Performs one coupling between `male` and `female` at month `tick`,
/// applying the condom-usage rule and, for an unprotected discordant couple,
/// the transmission.
pub fn apply_condom_usage(
    male: PersonId,
    female: PersonId,
    world: &mut WorldState,
    cfg: &SimConfig,
    rng: &mut SimRng,
    tick: u32,
) -> Result<CouplingEvent, EngineError> {
    let m = world.require(male)?;
    if m.ptype() != PersonType::Primary {
        return Err(EngineError::NotPrimary(male));
    }
    let f = world.require(female)?;
    if f.gender() != Gender::Female {
        return Err(EngineError::NotFemale(female));
    }
    let (male_infected, female_infected) = (m.is_infected(), f.is_infected());

    let threshold = draw_threshold(rng);
    let protected_act = cfg.condom_usage.value() >= threshold;
    let mut transmission = None;
    if !protected_act
        && male_infected != female_infected
        && rng.random_bool(cfg.transmission_probability)
    {
        let (infected, source) = if male_infected {
            (female, male)
        } else {
            (male, female)
        };
        let source_type = world.require(source)?.ptype();
        let provenance = InfectionProvenance::transmitted(source_type, tick)
            .map_err(|e| EngineError::Precondition(e.to_string()))?;
        world.person_mut(infected)?.infect(provenance);
        transmission = Some(Transmission { infected, source });
    }
    Ok(CouplingEvent {
        tick,
        male,
        female,
        protected_act,
        transmission,
    })
}

/// Hook called around every coupling with the world before and after it.
pub type EventObserver<'a> = &'a mut dyn FnMut(&WorldState, &CouplingEvent, &WorldState);

/// Simulates one month.
///
/// Primaries act in ascending id order, each making
/// `cfg.couplings_per_month` attempts. Transmissions take effect
/// immediately.
pub fn step(
    world: &mut WorldState,
    cfg: &SimConfig,
    rng: &mut SimRng,
) -> Result<Vec<CouplingEvent>, EngineError> {
    step_observed(world, cfg, rng, None)
}

/// [`step`] with an optional observer; the world is cloned before each
/// event only when an observer is present.
pub fn step_observed(
    world: &mut WorldState,
    cfg: &SimConfig,
    rng: &mut SimRng,
    mut observer: Option<EventObserver<'_>>,
) -> Result<Vec<CouplingEvent>, EngineError> {
    if world.tick >= cfg.ticks {
        return Err(EngineError::Precondition(format!(
            "cannot step past tick {} (world at {})",
            cfg.ticks, world.tick
        )));
    }
    world.tick += 1;
    let tick = world.tick;
    let mut pools = CouplingPools::new(world, cfg);
    let primaries = world.ids_of(PersonType::Primary);
    let mut events = Vec::with_capacity(primaries.len() * cfg.couplings_per_month as usize);

    for male in primaries {
        for _ in 0..cfg.couplings_per_month {
            let target = select_coupling_target(world.require(male)?, &pools, cfg, rng)?;
            let Some(female) = target else { continue };
            let before = observer.as_ref().map(|_| world.clone());
            let event = apply_condom_usage(male, female, world, cfg, rng, tick)?;
            if world.persons[female.index()].ptype() == PersonType::Fsw {
                pools.consume(female);
            }
            if let (Some(obs), Some(pre)) = (observer.as_mut(), before.as_ref()) {
                obs(pre, &event, world);
            }
            events.push(event);
        }
    }
    Ok(events)
}

/// Setup plus partnering: the world at tick 0.
pub fn initial_world(cfg: &SimConfig, rng: &mut SimRng) -> Result<WorldState, EngineError> {
    let mut world = setup_initial_population(cfg)?;
    make_partners(&mut world, cfg, rng)?;
    Ok(world)
}

/// Runs a full simulation and records every event.
pub fn run(cfg: &SimConfig) -> Result<Trace, EngineError> {
    ensure_valid(cfg)?;
    let mut rng = rng_from_seed(cfg.seed);
    let mut world = initial_world(cfg, &mut rng)?;
    let mut events = Vec::new();
    let mut snapshots = Vec::with_capacity(cfg.ticks as usize);
    for _ in 0..cfg.ticks {
        events.extend(step(&mut world, cfg, &mut rng)?);
        snapshots.push(compute_counters(&world));
    }
    Ok(Trace {
        config: cfg.clone(),
        seed: cfg.seed,
        events,
        snapshots,
        final_state: world,
    })
}

/// Runs a full simulation keeping only the final counters.
pub fn run_final_counters(cfg: &SimConfig) -> Result<CounterSnapshot, EngineError> {
    ensure_valid(cfg)?;
    let mut rng = rng_from_seed(cfg.seed);
    let mut world = initial_world(cfg, &mut rng)?;
    for _ in 0..cfg.ticks {
        step(&mut world, cfg, &mut rng)?;
    }
    Ok(compute_counters(&world))
}
