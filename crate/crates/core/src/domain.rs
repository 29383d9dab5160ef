//! Agent and configuration types.
//!
//! A population is split into four sub-populations: female sex workers
//! (`Fsw`), their male clients (`Primary`), women socially committed to a
//! primary (`Secondary`), and women without a committed partner
//! (`ExSecondary`). The type/gender/partner rules of each sub-population are
//! enforced at construction time by [`Person`].

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Identity of one agent. Ids are dense indices into the world's person list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PersonId(pub u32);

impl PersonId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for PersonId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PersonType {
    Fsw,
    Primary,
    Secondary,
    ExSecondary,
}

impl PersonType {
    pub const ALL: [PersonType; 4] = [
        PersonType::Fsw,
        PersonType::Primary,
        PersonType::Secondary,
        PersonType::ExSecondary,
    ];

    /// The only gender an agent of this type may have.
    pub fn gender(self) -> Gender {
        match self {
            PersonType::Primary => Gender::Male,
            PersonType::Fsw | PersonType::Secondary | PersonType::ExSecondary => Gender::Female,
        }
    }

    /// Whether agents of this type may hold a committed partner at all.
    pub fn may_have_partner(self) -> bool {
        matches!(self, PersonType::Primary | PersonType::Secondary)
    }

    /// The type a committed partner of this type must have.
    pub fn partner_type(self) -> Option<PersonType> {
        match self {
            PersonType::Primary => Some(PersonType::Secondary),
            PersonType::Secondary => Some(PersonType::Primary),
            PersonType::Fsw | PersonType::ExSecondary => None,
        }
    }
}

impl fmt::Display for PersonType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            PersonType::Fsw => "fsw",
            PersonType::Primary => "primary",
            PersonType::Secondary => "secondary",
            PersonType::ExSecondary => "ex_secondary",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PersonState {
    Infected,
    Uninfected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Male,
    Female,
}

/// Where an infection came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfectionSource {
    SeededAtSetup,
    FromFsw,
    FromPrimary,
    FromSecondary,
    FromExSecondary,
}

impl InfectionSource {
    /// Source tag for an infection transmitted by an agent of type `ptype`.
    pub fn from_transmitter(ptype: PersonType) -> Self {
        match ptype {
            PersonType::Fsw => InfectionSource::FromFsw,
            PersonType::Primary => InfectionSource::FromPrimary,
            PersonType::Secondary => InfectionSource::FromSecondary,
            PersonType::ExSecondary => InfectionSource::FromExSecondary,
        }
    }
}

/// How and when a person became infected. Seeded infections carry tick 0,
/// transmitted ones the (1-based) month in which the transmission happened.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawProvenance")]
pub struct InfectionProvenance {
    source: InfectionSource,
    tick: u32,
}

#[derive(Deserialize)]
struct RawProvenance {
    source: InfectionSource,
    tick: u32,
}

impl TryFrom<RawProvenance> for InfectionProvenance {
    type Error = DomainError;

    fn try_from(raw: RawProvenance) -> Result<Self, Self::Error> {
        InfectionProvenance::new(raw.source, raw.tick)
    }
}

impl InfectionProvenance {
    pub const SEEDED: InfectionProvenance = InfectionProvenance {
        source: InfectionSource::SeededAtSetup,
        tick: 0,
    };

    pub fn new(source: InfectionSource, tick: u32) -> Result<Self, DomainError> {
        match (source, tick) {
            (InfectionSource::SeededAtSetup, 0) => Ok(Self::SEEDED),
            (InfectionSource::SeededAtSetup, _) => Err(DomainError::ProvenanceTick {
                origin: source,
                tick,
            }),
            (_, 0) => Err(DomainError::ProvenanceTick {
                origin: source,
                tick,
            }),
            _ => Ok(Self { source, tick }),
        }
    }

    pub fn transmitted(transmitter: PersonType, tick: u32) -> Result<Self, DomainError> {
        Self::new(InfectionSource::from_transmitter(transmitter), tick)
    }

    pub fn source(&self) -> InfectionSource {
        self.source
    }

    pub fn tick(&self) -> u32 {
        self.tick
    }
}

/// An integer percentage in `[0, 100]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Percent(u8);

impl Percent {
    pub const ZERO: Percent = Percent(0);
    pub const HUNDRED: Percent = Percent(100);

    pub fn new(value: u32) -> Result<Self, DomainError> {
        if value <= 100 {
            Ok(Percent(value as u8))
        } else {
            Err(DomainError::PercentOutOfRange(value))
        }
    }

    pub fn value(self) -> u32 {
        u32::from(self.0)
    }
}

impl TryFrom<u32> for Percent {
    type Error = DomainError;

    fn try_from(value: u32) -> Result<Self, Self::Error> {
        Percent::new(value)
    }
}

impl From<Percent> for u32 {
    fn from(p: Percent) -> u32 {
        p.value()
    }
}

impl fmt::Display for Percent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomainError {
    #[error("percent value {0} outside [0, 100]")]
    PercentOutOfRange(u32),
    #[error("{ptype} must be {expected:?}")]
    Gender { ptype: PersonType, expected: Gender },
    #[error("{ptype} cannot hold a committed partner")]
    PartnerNotAllowed { ptype: PersonType },
    #[error("provenance {origin:?} cannot carry tick {tick}")]
    ProvenanceTick { origin: InfectionSource, tick: u32 },
    #[error("infection state and provenance disagree")]
    StateProvenanceMismatch,
}

/// One agent.
///
/// Fields are private so that the type/gender/partner consistency rules hold
/// for every value built through [`Person::new`] or [`Person::try_new`].
/// Deserialization does not check them: traces from elsewhere may be broken,
/// and the contract checker is what reports that. [`Person::new_unchecked`]
/// exists for the same reason and for mutation tests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Person {
    id: PersonId,
    ptype: PersonType,
    gender: Gender,
    state: PersonState,
    partner: Option<PersonId>,
    provenance: Option<InfectionProvenance>,
}

impl Person {
    /// A fresh uninfected, unpartnered agent. Gender is implied by the type.
    pub fn new(id: PersonId, ptype: PersonType) -> Self {
        Person {
            id,
            ptype,
            gender: ptype.gender(),
            state: PersonState::Uninfected,
            partner: None,
            provenance: None,
        }
    }

    /// Builds an agent from explicit fields, enforcing every per-person rule.
    pub fn try_new(
        id: PersonId,
        ptype: PersonType,
        gender: Gender,
        partner: Option<PersonId>,
        provenance: Option<InfectionProvenance>,
    ) -> Result<Self, DomainError> {
        if gender != ptype.gender() {
            return Err(DomainError::Gender {
                ptype,
                expected: ptype.gender(),
            });
        }
        if partner.is_some() && !ptype.may_have_partner() {
            return Err(DomainError::PartnerNotAllowed { ptype });
        }
        let state = if provenance.is_some() {
            PersonState::Infected
        } else {
            PersonState::Uninfected
        };
        Ok(Person {
            id,
            ptype,
            gender,
            state,
            partner,
            provenance,
        })
    }

    /// Builds an agent without any consistency check.
    pub fn new_unchecked(
        id: PersonId,
        ptype: PersonType,
        gender: Gender,
        state: PersonState,
        partner: Option<PersonId>,
        provenance: Option<InfectionProvenance>,
    ) -> Self {
        Person {
            id,
            ptype,
            gender,
            state,
            partner,
            provenance,
        }
    }

    pub fn id(&self) -> PersonId {
        self.id
    }

    pub fn ptype(&self) -> PersonType {
        self.ptype
    }

    pub fn gender(&self) -> Gender {
        self.gender
    }

    pub fn state(&self) -> PersonState {
        self.state
    }

    pub fn partner(&self) -> Option<PersonId> {
        self.partner
    }

    pub fn provenance(&self) -> Option<InfectionProvenance> {
        self.provenance
    }

    pub fn is_infected(&self) -> bool {
        self.state == PersonState::Infected
    }

    /// Marks the person infected. Infection is absorbing, so an already
    /// infected person keeps the original provenance.
    pub fn infect(&mut self, provenance: InfectionProvenance) {
        if self.state == PersonState::Uninfected {
            self.state = PersonState::Infected;
            self.provenance = Some(provenance);
        }
    }

    pub(crate) fn set_partner(&mut self, partner: Option<PersonId>) -> Result<(), DomainError> {
        if partner.is_some() && !self.ptype.may_have_partner() {
            return Err(DomainError::PartnerNotAllowed { ptype: self.ptype });
        }
        self.partner = partner;
        Ok(())
    }

    // Raw mutators for contract mutation tests.
    #[doc(hidden)]
    pub fn force_gender(&mut self, gender: Gender) {
        self.gender = gender;
    }

    #[doc(hidden)]
    pub fn force_partner(&mut self, partner: Option<PersonId>) {
        self.partner = partner;
    }

    #[doc(hidden)]
    pub fn force_state(&mut self, state: PersonState, provenance: Option<InfectionProvenance>) {
        self.state = state;
        self.provenance = provenance;
    }
}

fn default_fsw_preference() -> f64 {
    0.5
}

fn default_transmission_probability() -> f64 {
    1.0
}

/// All inputs of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub max_primary: u32,
    pub max_secondary: u32,
    pub max_fsw: u32,
    pub max_infected_fsw: u32,
    pub max_exsecondary: u32,
    /// Number of committed Primary/Secondary couples formed at setup.
    pub tobecoupled: u32,
    /// Per-coupling probability (in percent) that a Primary stays faithful.
    pub commitment: Percent,
    /// Per-coupling probability (in percent) that the act is protected.
    pub condom_usage: Percent,
    /// Coupling attempts each Primary makes per month.
    pub couplings_per_month: u32,
    /// Clients each Fsw accepts per month at most.
    pub avg_client_month: u32,
    /// Probability that a defecting Primary seeks an Fsw rather than an ExSecondary.
    #[serde(default = "default_fsw_preference")]
    pub fsw_preference: f64,
    /// Per-act transmission probability for an unprotected discordant couple.
    #[serde(default = "default_transmission_probability")]
    pub transmission_probability: f64,
    /// Months to simulate.
    pub ticks: u32,
    pub seed: u64,
}

impl SimConfig {
    /// Number of committed couples formed by `make_partners`.
    pub fn partnership_target(&self) -> u32 {
        self.tobecoupled
            .min(self.max_primary)
            .min(self.max_secondary)
    }

    pub fn population(&self) -> u64 {
        u64::from(self.max_fsw)
            + u64::from(self.max_primary)
            + u64::from(self.max_secondary)
            + u64::from(self.max_exsecondary)
    }

    pub fn count_of(&self, ptype: PersonType) -> u32 {
        match ptype {
            PersonType::Fsw => self.max_fsw,
            PersonType::Primary => self.max_primary,
            PersonType::Secondary => self.max_secondary,
            PersonType::ExSecondary => self.max_exsecondary,
        }
    }

    /// Same configuration with a different seed.
    pub fn with_seed(&self, seed: u64) -> Self {
        SimConfig {
            seed,
            ..self.clone()
        }
    }
}

/// One broken [`SimConfig`] invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfigViolation {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for ConfigViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Returns one violation per broken configuration invariant.
pub fn validate_config(cfg: &SimConfig) -> Vec<ConfigViolation> {
    let mut out = Vec::new();
    let mut push =
        |field: &'static str, message: String| out.push(ConfigViolation { field, message });

    for (field, value) in [
        ("max_primary", cfg.max_primary),
        ("max_secondary", cfg.max_secondary),
        ("max_fsw", cfg.max_fsw),
        ("couplings_per_month", cfg.couplings_per_month),
        ("avg_client_month", cfg.avg_client_month),
    ] {
        if value == 0 {
            push(field, "must be positive".to_string());
        }
    }
    if cfg.max_infected_fsw > cfg.max_fsw {
        push(
            "max_infected_fsw",
            format!("{} exceeds max_fsw {}", cfg.max_infected_fsw, cfg.max_fsw),
        );
    }
    let bound = cfg.max_primary.min(cfg.max_secondary);
    if cfg.tobecoupled > bound {
        push(
            "tobecoupled",
            format!(
                "{} exceeds min(max_primary, max_secondary) = {}",
                cfg.tobecoupled, bound
            ),
        );
    }
    for (field, value) in [
        ("fsw_preference", cfg.fsw_preference),
        ("transmission_probability", cfg.transmission_probability),
    ] {
        if !(0.0..=1.0).contains(&value) {
            push(field, format!("{value} outside [0, 1]"));
        }
    }
    if cfg.population() > u64::from(u32::MAX) {
        push(
            "max_primary",
            "total population exceeds the id space".to_string(),
        );
    }
    out
}
