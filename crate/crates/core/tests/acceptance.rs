//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Runs as a plain binary so criteria execute sequentially (several have
//! wall-clock budgets) and every line is printed even if one fails.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hivsim::cli::main_with_args;
use hivsim::contracts::{
    check_event, check_partnering, check_state, run_with_contracts, validate_trace, Schema,
    Violation,
};
use hivsim::domain::{Gender, Percent, Person, PersonId, PersonState, PersonType, SimConfig};
use hivsim::engine::{
    apply_condom_usage, initial_world, rng_from_seed, run, CouplingEvent, Transmission, WorldState,
};
use hivsim::experiments::{
    aggregate, format_significant, percent_range, sweep_aggregates_csv, sweep_replicates_csv,
    sweep_with, Parallelism, SweepParam, SweepResult,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn(&Sweeps) -> Outcome);

fn pct(v: u32) -> Percent {
    Percent::new(v).unwrap()
}

fn desk() -> SimConfig {
    SimConfig {
        max_primary: 500,
        max_secondary: 500,
        max_fsw: 100,
        max_infected_fsw: 5,
        max_exsecondary: 100,
        tobecoupled: 400,
        commitment: pct(50),
        condom_usage: pct(0),
        couplings_per_month: 2,
        avg_client_month: 10,
        fsw_preference: 0.5,
        transmission_probability: 1.0,
        ticks: 120,
        seed: 7,
    }
}

const REPLICATES: u32 = 50;

fn grid() -> Vec<Percent> {
    percent_range(0, 100, 20).unwrap()
}

fn commitment_sweep(par: Parallelism) -> SweepResult {
    let cfg = SimConfig {
        condom_usage: pct(0),
        ..desk()
    };
    sweep_with(
        &cfg,
        SweepParam::Commitment,
        &grid(),
        REPLICATES,
        cfg.seed,
        par,
    )
    .unwrap()
}

fn condom_sweep(par: Parallelism) -> SweepResult {
    let cfg = SimConfig {
        commitment: pct(50),
        ..desk()
    };
    sweep_with(
        &cfg,
        SweepParam::CondomUsage,
        &grid(),
        REPLICATES,
        cfg.seed,
        par,
    )
    .unwrap()
}

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

struct Sweeps {
    commitment: SweepResult,
    condom: SweepResult,
    elapsed: Duration,
}

// 1. Full condom use keeps the epidemic at its seed.
fn c01_condom_full_contains(_: &Sweeps) -> Outcome {
    let cfg = SimConfig {
        commitment: pct(50),
        ..desk()
    };
    let start = Instant::now();
    let r = sweep_with(
        &cfg,
        SweepParam::CondomUsage,
        &[pct(100)],
        REPLICATES,
        cfg.seed,
        Parallelism::Auto,
    )
    .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let totals = r.points[0].values_of("total_infected").unwrap();
    check(totals.iter().all(|&t| t == 5), format!("totals {totals:?}"))?;
    check(
        elapsed < Duration::from_secs(5),
        format!("took {elapsed:?}"),
    )?;
    Ok(format!("50/50 replicates at 5 infected, {elapsed:.2?}"))
}

// 2. Full commitment keeps the epidemic at its seed.
fn c02_commitment_full_contains(s: &Sweeps) -> Outcome {
    let p = s.commitment.point(100).unwrap();
    for r in &p.replicates {
        let c = &r.snapshot;
        check(
            c.total_infected == 5
                && c.infected_primaries == 0
                && c.infected_secondaries == 0
                && c.total_infected == c.infected_fsws,
            format!("replicate {}: {c:?}", r.replicate),
        )?;
    }
    Ok("50/50 replicates: total 5, no primary/secondary/ex-secondary infected".into())
}

// 3. No commitment, no secondary infections.
fn c03_no_commitment_spares_secondaries(s: &Sweeps) -> Outcome {
    let v = s
        .commitment
        .point(0)
        .unwrap()
        .values_of("infected_secondaries")
        .unwrap();
    check(v.iter().all(|&x| x == 0), format!("{v:?}"))?;
    Ok("infected_secondaries = 0 in 50/50 replicates".into())
}

// 4. Back-infection of sex workers.
fn c04_fsw_back_infection(_: &Sweeps) -> Outcome {
    let cfg = SimConfig {
        commitment: pct(0),
        condom_usage: pct(0),
        ..desk()
    };
    let mut positive = 0;
    for i in 0..u64::from(REPLICATES) {
        let trace = run(&cfg.with_seed(cfg.seed + i)).map_err(|e| e.to_string())?;
        for s in &trace.snapshots {
            check(
                s.fsw_back_infected == s.infected_fsws - 5,
                format!("seed {} tick {}: {s:?}", cfg.seed + i, s.tick),
            )?;
        }
        if trace.snapshots.last().unwrap().fsw_back_infected > 0 {
            positive += 1;
        }
    }
    check(
        positive >= 45,
        format!("only {positive}/50 with back-infection"),
    )?;
    Ok(format!(
        "{positive}/50 replicates with back-infection; identity holds at every tick"
    ))
}

fn means(r: &SweepResult, metric: &str) -> Vec<(u32, f64)> {
    r.points
        .iter()
        .map(|p| (p.value.value(), p.aggregate_of(metric).unwrap().mean))
        .collect()
}

fn non_increasing(m: &[(u32, f64)], tol: f64) -> bool {
    m.windows(2).all(|w| w[1].1 <= w[0].1 + tol)
}

// 5. More condom use, fewer infected sex workers.
fn c05_condom_monotone(s: &Sweeps) -> Outcome {
    let m = means(&s.condom, "infected_fsws");
    check(non_increasing(&m, 1.0), format!("{m:?}"))?;
    Ok(format!("mean infected_fsws {m:?}"))
}

// 6. More commitment, fewer infected clients.
fn c06_commitment_monotone(s: &Sweeps) -> Outcome {
    let m = means(&s.commitment, "infected_primaries");
    check(non_increasing(&m, 1.0), format!("{m:?}"))?;
    check(m.last().unwrap().1 == 0.0, format!("{m:?}"))?;
    Ok(format!("mean infected_primaries {m:?}"))
}

// 7. Intermediate commitment is the worst case.
fn c07_intermediate_peak(s: &Sweeps) -> Outcome {
    let m: BTreeMap<u32, f64> = means(&s.commitment, "total_infected").into_iter().collect();
    let (lo, mid, hi) = (m[&0], m[&60], m[&100]);
    check(mid > lo && mid > hi, format!("{m:?}"))?;
    Ok(format!("mean total at 0/60/100: {lo} / {mid} / {hi}"))
}

/// Straight-line model of a month, written without the engine. It only
/// accepts instances where every decision is forced.
fn oracle(cfg: &SimConfig, world: &WorldState) -> Vec<CouplingEvent> {
    let ptype: BTreeMap<u32, PersonType> = world
        .persons
        .iter()
        .map(|p| (p.id().0, p.ptype()))
        .collect();
    let partner: BTreeMap<u32, u32> = world
        .persons
        .iter()
        .filter_map(|p| p.partner().map(|q| (p.id().0, q.0)))
        .collect();
    let of = |t: PersonType| -> Vec<u32> {
        ptype
            .iter()
            .filter(|(_, &pt)| pt == t)
            .map(|(&id, _)| id)
            .collect()
    };
    let fsws = of(PersonType::Fsw);
    let primaries = of(PersonType::Primary);
    let exsec = of(PersonType::ExSecondary);
    let mut infected: BTreeSet<u32> = fsws
        .iter()
        .take(cfg.max_infected_fsw as usize)
        .copied()
        .collect();
    let committed = match cfg.commitment.value() {
        0 => false,
        100 => true,
        c => panic!("commitment {c} is not forced"),
    };
    let protected = match cfg.condom_usage.value() {
        0 => false,
        100 => true,
        c => panic!("condom usage {c} is not forced"),
    };
    let fsw_first = match cfg.fsw_preference {
        1.0 => true,
        0.0 => false,
        p => panic!("preference {p} is not forced"),
    };
    let transmits = match cfg.transmission_probability {
        1.0 => true,
        0.0 => false,
        p => panic!("transmission probability {p} is not forced"),
    };

    let mut events = Vec::new();
    for tick in 1..=cfg.ticks {
        let mut clients: BTreeMap<u32, u32> = BTreeMap::new();
        for &m in &primaries {
            for _ in 0..cfg.couplings_per_month {
                let female = if committed {
                    partner.get(&m).copied()
                } else {
                    let open: Vec<u32> = fsws
                        .iter()
                        .copied()
                        .filter(|f| clients.get(f).copied().unwrap_or(0) < cfg.avg_client_month)
                        .collect();
                    let (first, second) = if fsw_first {
                        (&open, &exsec)
                    } else {
                        (&exsec, &open)
                    };
                    let pool = if first.is_empty() { second } else { first };
                    assert!(pool.len() <= 1, "choice among {pool:?} is not forced");
                    pool.first().copied()
                };
                let Some(f) = female else { continue };
                if ptype[&f] == PersonType::Fsw {
                    *clients.entry(f).or_default() += 1;
                }
                let (mi, fi) = (infected.contains(&m), infected.contains(&f));
                let transmission = if !protected && transmits && mi != fi {
                    let (to, from) = if mi { (f, m) } else { (m, f) };
                    infected.insert(to);
                    Some(Transmission {
                        infected: PersonId(to),
                        source: PersonId(from),
                    })
                } else {
                    None
                };
                events.push(CouplingEvent {
                    tick,
                    male: PersonId(m),
                    female: PersonId(f),
                    protected_act: protected,
                    transmission,
                });
            }
        }
    }
    events
}

fn micro(
    fsw: u32,
    infected_fsw: u32,
    primary: u32,
    secondary: u32,
    exsec: u32,
    tobecoupled: u32,
) -> SimConfig {
    SimConfig {
        max_primary: primary,
        max_secondary: secondary,
        max_fsw: fsw,
        max_infected_fsw: infected_fsw,
        max_exsecondary: exsec,
        tobecoupled,
        commitment: pct(0),
        condom_usage: pct(0),
        couplings_per_month: 1,
        avg_client_month: 2,
        fsw_preference: 1.0,
        transmission_probability: 1.0,
        ticks: 1,
        seed: 11,
    }
}

// 8. Forced micro-instances agree with the oracle event for event.
fn c08_micro_oracle(_: &Sweeps) -> Outcome {
    let cases: Vec<(&str, SimConfig)> = vec![
        (
            "two clients of one infected worker",
            micro(1, 1, 2, 2, 0, 2),
        ),
        (
            "full commitment, partner couplings only",
            SimConfig {
                commitment: pct(100),
                couplings_per_month: 2,
                ticks: 2,
                ..micro(1, 1, 2, 2, 0, 2)
            },
        ),
        (
            "full commitment, partnerless client abstains",
            SimConfig {
                commitment: pct(100),
                ticks: 2,
                ..micro(1, 1, 2, 1, 1, 1)
            },
        ),
        (
            "full condom use, capacity overflow to ex-secondary",
            SimConfig {
                condom_usage: pct(100),
                avg_client_month: 1,
                ticks: 2,
                ..micro(1, 1, 2, 1, 1, 1)
            },
        ),
        (
            "client infected then infecting within one month",
            SimConfig {
                avg_client_month: 1,
                couplings_per_month: 2,
                ticks: 2,
                ..micro(1, 1, 1, 1, 1, 0)
            },
        ),
        (
            "zero transmission probability",
            SimConfig {
                transmission_probability: 0.0,
                ticks: 2,
                ..micro(1, 1, 2, 2, 0, 2)
            },
        ),
        (
            "no target left",
            SimConfig {
                avg_client_month: 1,
                fsw_preference: 0.0,
                ticks: 2,
                ..micro(1, 1, 2, 1, 0, 0)
            },
        ),
    ];
    let mut lines = Vec::new();
    for (name, cfg) in &cases {
        check(
            cfg.population() <= 6 && cfg.ticks <= 2,
            format!("{name}: instance too large"),
        )?;
        let trace = run(cfg).map_err(|e| format!("{name}: {e}"))?;
        let expected = oracle(cfg, &trace.final_state);
        check(
            trace.events == expected,
            format!("{name}: engine {:?} vs oracle {expected:?}", trace.events),
        )?;
        let transmissions = expected.iter().filter(|e| e.transmission.is_some()).count();
        lines.push(format!("{}e/{}t", expected.len(), transmissions));
    }
    check(cases.len() >= 5, "fewer than five instances")?;
    Ok(format!(
        "{} instances agree ({})",
        cases.len(),
        lines.join(", ")
    ))
}

fn random_small_config(rng: &mut ChaCha8Rng) -> SimConfig {
    let percent = |rng: &mut ChaCha8Rng| match rng.random_range(0..4) {
        0 => pct(0),
        1 => pct(100),
        _ => pct(rng.random_range(0..=100)),
    };
    let unit = |rng: &mut ChaCha8Rng| match rng.random_range(0..4) {
        0 => 0.0,
        1 => 1.0,
        _ => rng.random_range(0.0..=1.0),
    };
    let max_primary = rng.random_range(1..=8);
    let max_secondary = rng.random_range(1..=8);
    let max_fsw = rng.random_range(1..=8);
    SimConfig {
        max_primary,
        max_secondary,
        max_fsw,
        max_infected_fsw: rng.random_range(0..=max_fsw),
        max_exsecondary: rng.random_range(0..=6),
        tobecoupled: rng.random_range(0..=max_primary.min(max_secondary)),
        commitment: percent(rng),
        condom_usage: percent(rng),
        couplings_per_month: rng.random_range(1..=3),
        avg_client_month: rng.random_range(1..=5),
        fsw_preference: unit(rng),
        transmission_probability: unit(rng),
        ticks: rng.random_range(0..=12),
        seed: rng.random(),
    }
}

fn first_of(world: &WorldState, ptype: PersonType, partnered: bool) -> PersonId {
    world
        .persons
        .iter()
        .find(|p| p.ptype() == ptype && p.partner().is_some() == partnered)
        .unwrap()
        .id()
}

/// One targeted corruption per schema; returns the schemas that caught theirs.
fn mutation_detections() -> BTreeSet<Schema> {
    let cfg = SimConfig {
        max_primary: 6,
        max_secondary: 6,
        max_fsw: 4,
        max_infected_fsw: 2,
        max_exsecondary: 3,
        tobecoupled: 4,
        commitment: pct(50),
        condom_usage: pct(0),
        couplings_per_month: 2,
        avg_client_month: 2,
        fsw_preference: 0.5,
        transmission_probability: 1.0,
        ticks: 10,
        seed: 3,
    };
    let base = initial_world(&cfg, &mut rng_from_seed(cfg.seed)).unwrap();
    let mut found = BTreeSet::new();
    let mut record = |expected: Schema, v: Vec<Violation>| {
        if v.iter().any(|x| x.schema == expected) {
            found.insert(expected);
        }
    };

    let mut w = base.clone();
    w.persons[3].force_state(PersonState::Infected, None);
    record(Schema::Fsw, check_state(&w, &cfg));

    let mut w = base.clone();
    let p = first_of(&w, PersonType::Primary, false);
    w.persons[p.index()].force_gender(Gender::Female);
    record(Schema::Primary, check_state(&w, &cfg));

    let mut w = base.clone();
    let s = first_of(&w, PersonType::Secondary, true);
    w.persons[s.index()].force_partner(Some(PersonId(0)));
    record(Schema::Secondary, check_state(&w, &cfg));

    let mut w = base.clone();
    let e = first_of(&w, PersonType::ExSecondary, false);
    w.persons[e.index()].force_partner(Some(first_of(&base, PersonType::Primary, false)));
    record(Schema::ExSecondary, check_state(&w, &cfg));

    let mut w = base.clone();
    let &(pp, _) = w.partnerships.iter().next().unwrap();
    w.persons[pp.index()].force_partner(None);
    record(Schema::Partners, check_state(&w, &cfg));

    let mut w = base.clone();
    let extra = w.persons.len() as u32;
    w.persons
        .push(Person::new(PersonId(extra), PersonType::Fsw));
    record(Schema::SetupInitialPopulation, check_state(&w, &cfg));

    let mut w = base.clone();
    let pair = *w.partnerships.iter().next().unwrap();
    w.partnerships.remove(&pair);
    w.persons[pair.0.index()].force_partner(None);
    w.persons[pair.1.index()].force_partner(None);
    record(Schema::MakePartners, check_partnering(&w, &cfg));

    let mut pre = base.clone();
    pre.tick = 1;
    let partnered = first_of(&pre, PersonType::Primary, true);
    let wife = pre.persons[partnered.index()].partner().unwrap();
    let free = first_of(&pre, PersonType::Primary, false);
    let clean = CouplingEvent {
        tick: 1,
        male: free,
        female: PersonId(3),
        protected_act: false,
        transmission: None,
    };

    let ev = CouplingEvent {
        female: wife,
        ..clean
    };
    record(Schema::Link, check_event(&pre, &ev, &pre, &cfg));

    let ev = CouplingEvent { tick: 2, ..clean };
    record(Schema::Coupling, check_event(&pre, &ev, &pre, &cfg));

    let mut post = pre.clone();
    let mut ev =
        apply_condom_usage(free, PersonId(0), &mut post, &cfg, &mut rng_from_seed(1), 1).unwrap();
    ev.transmission = None;
    record(
        Schema::ApplyCondomUsage,
        check_event(&pre, &ev, &post, &cfg),
    );

    // Also exercise the whole-trace path with a fabricated infection.
    let mut trace = run(&cfg).unwrap();
    if let Some(ev) = trace.events.iter_mut().find(|e| e.transmission.is_none()) {
        ev.transmission = Some(Transmission {
            infected: ev.male,
            source: ev.female,
        });
    }
    if validate_trace(&trace).passed {
        found.remove(&Schema::ApplyCondomUsage);
    }
    found
}

// 9. Contracts hold on random small runs and catch corruptions.
fn c09_contracts(_: &Sweeps) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut events = 0usize;
    for k in 0..10_000 {
        let cfg = random_small_config(&mut rng);
        let (trace, violations) = run_with_contracts(&cfg).map_err(|e| format!("#{k}: {e}"))?;
        check(
            violations.is_empty(),
            format!("#{k} {cfg:?}: {violations:?}"),
        )?;
        let report = validate_trace(&trace);
        check(report.passed, format!("#{k} {cfg:?}: {report}"))?;
        events += trace.events.len();
    }
    let found = mutation_detections();
    let missing: Vec<_> = Schema::ALL.iter().filter(|s| !found.contains(s)).collect();
    check(
        missing.is_empty(),
        format!("undetected mutations: {missing:?}"),
    )?;
    Ok(format!(
        "10000 runs ({events} events) clean; {}/{} schemas catch their mutation",
        found.len(),
        Schema::ALL.len()
    ))
}

fn cli(args: &[&str]) -> Result<(), String> {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["hivsim"];
    argv.extend_from_slice(args);
    match main_with_args(argv, &mut out, &mut err) {
        0 => Ok(()),
        code => Err(format!("exit {code}: {}", String::from_utf8_lossy(&err))),
    }
}

fn bytes(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap()
}

// 10. Output is byte-identical across runs and thread counts.
fn c10_determinism(s: &Sweeps) -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = dir.path().join("config.json");
    hivsim::cli::write_config(&desk(), &config).map_err(|e| e.to_string())?;
    let config = config.to_str().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    cli(&["run", "--config", config, "--out", a.to_str().unwrap()])?;
    cli(&["run", "--config", config, "--out", b.to_str().unwrap()])?;
    for name in ["timeseries.csv", "trace.json"] {
        check(
            bytes(&a.join(name)) == bytes(&b.join(name)),
            format!("{name} differs"),
        )?;
    }

    let reference = (
        sweep_replicates_csv(&s.commitment).unwrap(),
        sweep_aggregates_csv(&s.commitment).unwrap(),
    );
    for par in [
        Parallelism::Sequential,
        Parallelism::Threads(4),
        Parallelism::Threads(8),
    ] {
        let r = commitment_sweep(par);
        check(
            (
                sweep_replicates_csv(&r).unwrap(),
                sweep_aggregates_csv(&r).unwrap(),
            ) == reference,
            format!("sweep CSV differs under {par:?}"),
        )?;
    }

    let (sa, sb) = (dir.path().join("sa"), dir.path().join("sb"));
    for out in [&sa, &sb] {
        cli(&[
            "sweep",
            "--config",
            config,
            "--param",
            "condom_usage",
            "--from",
            "0",
            "--to",
            "100",
            "--step",
            "50",
            "--replicates",
            "5",
            "--out",
            out.to_str().unwrap(),
        ])?;
    }
    for name in ["sweep.replicates.csv", "sweep.aggregates.csv"] {
        check(
            bytes(&sa.join(name)) == bytes(&sb.join(name)),
            format!("{name} differs"),
        )?;
    }
    Ok("run and sweep outputs identical (repeat, sequential, 4 and 8 threads)".into())
}

// 11. Aggregate statistics match the reference values.
fn c11_aggregate_oracle(_: &Sweeps) -> Outcome {
    let a = aggregate(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]).map_err(|e| e.to_string())?;
    check(a.mean == 5.0, format!("mean {}", a.mean))?;
    check(
        (a.ci_low - 3.518379265803829).abs() < 1e-12
            && (a.ci_high - 6.481620734196171).abs() < 1e-12,
        format!("{a:?}"),
    )?;
    let (lo, hi) = (
        format_significant(a.ci_low, 6),
        format_significant(a.ci_high, 6),
    );
    check(lo == "3.51838" && hi == "6.48162", format!("{lo} {hi}"))?;
    Ok(format!("mean 5, CI [{lo}, {hi}]"))
}

// 12. Both standard sweeps within budget.
fn c12_sweep_runtime(s: &Sweeps) -> Outcome {
    check(
        s.elapsed < Duration::from_secs(60),
        format!("took {:?}", s.elapsed),
    )?;
    Ok(format!("2 x 6 x 50 runs in {:.2?}", s.elapsed))
}

fn main() {
    let start = Instant::now();
    let commitment = commitment_sweep(Parallelism::Auto);
    let condom = condom_sweep(Parallelism::Auto);
    let sweeps = Sweeps {
        commitment,
        condom,
        elapsed: start.elapsed(),
    };

    let criteria: [Criterion; 12] = [
        (
            "01 full condom use contains the epidemic",
            c01_condom_full_contains,
        ),
        (
            "02 full commitment contains the epidemic",
            c02_commitment_full_contains,
        ),
        (
            "03 no commitment spares secondaries",
            c03_no_commitment_spares_secondaries,
        ),
        ("04 sex workers are back-infected", c04_fsw_back_infection),
        ("05 condom sweep is monotone", c05_condom_monotone),
        ("06 commitment sweep is monotone", c06_commitment_monotone),
        ("07 intermediate commitment peaks", c07_intermediate_peak),
        ("08 micro-instances match the oracle", c08_micro_oracle),
        ("09 contracts hold and catch mutations", c09_contracts),
        ("10 outputs are deterministic", c10_determinism),
        ("11 aggregate statistics", c11_aggregate_oracle),
        ("12 sweep runtime", c12_sweep_runtime),
    ];

    let mut failed = 0;
    for (name, f) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(|| f(&sweeps)))
            .unwrap_or_else(|_| Err("panicked".to_string()));
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
