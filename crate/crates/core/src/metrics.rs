//! Per-tick output counters.

use serde::{Deserialize, Serialize};

use crate::domain::{InfectionSource, PersonType};
use crate::engine::WorldState;

/// Counter values after a given month. All counts are cumulative, since
/// infection is absorbing.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CounterSnapshot {
    pub tick: u32,
    pub infected_fsws: u32,
    pub infected_primaries: u32,
    /// Infected committed-type Secondaries; ExSecondaries are counted apart.
    pub infected_secondaries: u32,
    /// Number of ExSecondaries.
    pub noncommitted_secondaries: u32,
    pub noncommitted_infected_secondaries: u32,
    pub total_infected: u32,
    /// Fsws infected by a Primary.
    pub fsw_back_infected: u32,
    /// Primaries infected by a Secondary or an ExSecondary.
    pub primaries_back_infected: u32,
    pub primaries_back_infected_from_secondary: u32,
    pub primaries_back_infected_from_exsecondary: u32,
}

/// Names of the counter columns, in output order. `tick` is not a counter.
pub const COUNTER_FIELDS: [&str; 10] = [
    "infected_fsws",
    "infected_primaries",
    "infected_secondaries",
    "noncommitted_secondaries",
    "noncommitted_infected_secondaries",
    "total_infected",
    "fsw_back_infected",
    "primaries_back_infected",
    "primaries_back_infected_from_secondary",
    "primaries_back_infected_from_exsecondary",
];

impl CounterSnapshot {
    pub fn counter(&self, name: &str) -> Option<u32> {
        let v = match name {
            "infected_fsws" => self.infected_fsws,
            "infected_primaries" => self.infected_primaries,
            "infected_secondaries" => self.infected_secondaries,
            "noncommitted_secondaries" => self.noncommitted_secondaries,
            "noncommitted_infected_secondaries" => self.noncommitted_infected_secondaries,
            "total_infected" => self.total_infected,
            "fsw_back_infected" => self.fsw_back_infected,
            "primaries_back_infected" => self.primaries_back_infected,
            "primaries_back_infected_from_secondary" => self.primaries_back_infected_from_secondary,
            "primaries_back_infected_from_exsecondary" => {
                self.primaries_back_infected_from_exsecondary
            }
            _ => return None,
        };
        Some(v)
    }

    /// Counter values in [`COUNTER_FIELDS`] order.
    pub fn counters(&self) -> [u32; 10] {
        COUNTER_FIELDS.map(|name| self.counter(name).unwrap_or_default())
    }
}

pub fn is_counter(name: &str) -> bool {
    COUNTER_FIELDS.contains(&name)
}

pub fn compute_counters(world: &WorldState) -> CounterSnapshot {
    let mut c = CounterSnapshot {
        tick: world.tick,
        ..CounterSnapshot::default()
    };
    for p in &world.persons {
        if p.ptype() == PersonType::ExSecondary {
            c.noncommitted_secondaries += 1;
        }
        if !p.is_infected() {
            continue;
        }
        c.total_infected += 1;
        let source = p.provenance().map(|pr| pr.source());
        match p.ptype() {
            PersonType::Fsw => {
                c.infected_fsws += 1;
                if source == Some(InfectionSource::FromPrimary) {
                    c.fsw_back_infected += 1;
                }
            }
            PersonType::Primary => {
                c.infected_primaries += 1;
                match source {
                    Some(InfectionSource::FromSecondary) => {
                        c.primaries_back_infected += 1;
                        c.primaries_back_infected_from_secondary += 1;
                    }
                    Some(InfectionSource::FromExSecondary) => {
                        c.primaries_back_infected += 1;
                        c.primaries_back_infected_from_exsecondary += 1;
                    }
                    _ => {}
                }
            }
            PersonType::Secondary => c.infected_secondaries += 1,
            PersonType::ExSecondary => c.noncommitted_infected_secondaries += 1,
        }
    }
    c
}
