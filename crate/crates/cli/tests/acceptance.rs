//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits nonzero when any fails.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sky3d::alloc::{units_needed, NrPool, ResourcePool, SatPool, UnitsNeeded};
use sky3d::cac::Phase;
use sky3d::channel::{cost_hata_db, fspl_db};
use sky3d::interference::{interference_mw, sinr_from_powers, AllocationLedger, TickSnapshot};
use sky3d::scenario::{builtin_paper_scenario, Environment};
use sky3d::units::dbm_to_mw;
use sky3d::{run, ApId, Scenario, UeId};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

const SEEDS: std::ops::Range<u64> = 0..10;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn congestion() -> Outcome {
    let mut slowest = Duration::ZERO;
    for seed in SEEDS {
        let s = Scenario {
            seed,
            ..builtin_paper_scenario().without_mobile_aps()
        };
        let start = Instant::now();
        let out = run(&s).map_err(|e| format!("seed {seed}: {e}"))?;
        slowest = slowest.max(start.elapsed());
        let sm = &out.summary;
        ensure(sm.peak_satellite_load == 1.0, || {
            format!("seed {seed}: peak load {}", sm.peak_satellite_load)
        })?;
        ensure(sm.rejections > 0, || format!("seed {seed}: no rejections"))?;
        ensure(sm.drops >= 1, || format!("seed {seed}: no drops"))?;
    }
    ensure(slowest < Duration::from_secs(10), || {
        format!("slowest seed took {slowest:?}")
    })?;
    Ok(format!("10 seeds, slowest {slowest:.2?}"))
}

fn continuity() -> Outcome {
    let mut checked = 0u64;
    for seed in SEEDS {
        let s = Scenario {
            seed,
            ..builtin_paper_scenario()
        };
        let out = run(&s).map_err(|e| format!("seed {seed}: {e}"))?;
        ensure(out.summary.drops == 0, || {
            format!("seed {seed}: {} drops", out.summary.drops)
        })?;
        for f in &out.frames {
            for (i, u) in f.ues.iter().enumerate() {
                ensure(!matches!(u.phase, Phase::Dropped), || {
                    format!("seed {seed}: ue {i} dropped")
                })?;
                if matches!(u.phase, Phase::Connected { .. }) {
                    checked += 1;
                    ensure(u.achieved_bps == 10e6, || {
                        format!(
                            "seed {seed} tick {}: ue {i} at {} bps",
                            f.tick, u.achieved_bps
                        )
                    })?;
                }
            }
        }
    }
    Ok(format!("{checked} connected UE-ticks at 10 Mbps"))
}

fn unit_sizing() -> Outcome {
    let n = units_needed(10e6, 4.793e6).map_err(|e| e.to_string())?;
    ensure(n == UnitsNeeded::Units(3), || {
        format!("10 Mbps / 4.793 Mbps -> {n:?}")
    })?;
    let n = units_needed(4.793e6, 4.793e6).map_err(|e| e.to_string())?;
    ensure(n == UnitsNeeded::Units(1), || format!("R = r -> {n:?}"))?;
    let n = units_needed(10e6, 0.0).map_err(|e| e.to_string())?;
    ensure(n == UnitsNeeded::Unsatisfiable, || {
        format!("r = 0 -> {n:?}")
    })?;
    Ok("3 / 1 / unsatisfiable".into())
}

fn rb_bandwidth() -> Outcome {
    let base = *builtin_paper_scenario().aps[1].nr().unwrap();
    for (mu, khz) in [(0u8, 180e3), (1, 360e3), (2, 720e3), (3, 1440e3)] {
        let cfg = sky3d::scenario::NrConfig {
            numerology: mu,
            ..base
        };
        ensure(cfg.rb_bandwidth_hz() == khz, || {
            format!("mu {mu}: {} Hz", cfg.rb_bandwidth_hz())
        })?;
    }
    Ok("180/360/720/1440 kHz".into())
}

fn tdma_accounting() -> Outcome {
    let cfg = *builtin_paper_scenario().aps[0].sat().unwrap();
    let occ = cfg.occupied_symbols(10);
    ensure(occ == 984, || format!("10 blocks occupy {occ}"))?;
    let mut pool = SatPool::with_budget(&cfg, 344);
    let q = pool
        .allocate(UeId(0), 10e6, 682e3)
        .map_err(|e| e.to_string())?;
    ensure(q.is_rejection(), || format!("344 symbols granted {q:?}"))?;
    ensure(pool.free_symbols() == 344, || "budget changed".into())?;
    Ok("984 symbols, 344 rejected".into())
}

fn path_loss() -> Outcome {
    // Hand-derived: 20·log10(4π·1e9 / 299792458).
    const FSPL_1M_1GHZ: f64 = 32.447_783;
    // 20·log10(2).
    const DOUBLING: f64 = 6.020_600;
    // (44.9 − 6.55·log10(200))·log10(2) = 29.828254 · 0.301030.
    const HATA_DOUBLING_200M: f64 = 8.979_201;

    let f = fspl_db(1.0, 1e9).map_err(|e| e.to_string())?;
    ensure(
        (f - 32.45).abs() <= 0.01 && (f - FSPL_1M_1GHZ).abs() < 1e-5,
        || format!("fspl {f}"),
    )?;
    let d = fspl_db(2000.0, 2e9).unwrap() - fspl_db(1000.0, 2e9).unwrap();
    ensure(
        (d - 6.02).abs() <= 0.001 && (d - DOUBLING).abs() < 1e-5,
        || format!("fspl doubling {d}"),
    )?;
    let h = cost_hata_db(2000.0, 1.8e9, 200.0, 1.5, Environment::Suburban)
        - cost_hata_db(1000.0, 1.8e9, 200.0, 1.5, Environment::Suburban);
    ensure(
        (h - 8.98).abs() <= 0.02 && (h - HATA_DOUBLING_200M).abs() < 1e-5,
        || format!("hata doubling {h}"),
    )?;
    Ok(format!("{f:.4} / {d:.4} / {h:.4} dB"))
}

fn rbur_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..100_000 {
        let window = rng.gen_range(1..12);
        let n_aps = rng.gen_range(1..4);
        let caps: BTreeMap<ApId, u32> = (0..n_aps)
            .map(|j| (ApId(j), rng.gen_range(1..200)))
            .collect();
        let mut ledger = AllocationLedger::new(window, caps.clone());
        for _ in 0..rng.gen_range(0..20) {
            let mut snap = TickSnapshot::new();
            for (&ap, &cap) in &caps {
                let mut left = cap;
                let mut per_ue = BTreeMap::new();
                for ue in 0..rng.gen_range(0..5) {
                    let n = rng.gen_range(0..=left);
                    left -= n;
                    per_ue.insert(UeId(ue), n);
                }
                snap.insert(ap, per_ue);
            }
            ledger.record_tick(snap).map_err(|e| e.to_string())?;
        }
        for &ap in caps.keys() {
            let r = ledger.rbur(ap).map_err(|e| e.to_string())?;
            ensure((0.0..=1.0).contains(&r), || {
                format!("case {case}: rbur {r}")
            })?;
        }
    }

    let aps = [ApId(0), ApId(1), ApId(2)];
    let mut idle = AllocationLedger::new(10, aps.iter().map(|&a| (a, 135)).collect());
    for _ in 0..10 {
        idle.record_tick(aps.iter().map(|&a| (a, BTreeMap::new())).collect())
            .map_err(|e| e.to_string())?;
    }
    let rx: BTreeMap<ApId, f64> = BTreeMap::from([(aps[1], 1e-6), (aps[2], 2e-6)]);
    let i = interference_mw(aps[0], &aps, &rx, &idle).map_err(|e| e.to_string())?;
    ensure(i == 0.0, || format!("idle interference {i}"))?;
    let (signal, noise) = (-80.0, -110.0);
    let snr = dbm_to_mw(signal) / dbm_to_mw(noise);
    let sinr = sinr_from_powers(signal, i, noise).sinr_linear;
    ensure(((sinr - snr) / snr).abs() <= 1e-9, || {
        format!("{sinr} vs {snr}")
    })?;

    let mut ledger = AllocationLedger::new(1, aps.iter().map(|&a| (a, 4)).collect());
    ledger
        .record_tick(BTreeMap::from([
            (aps[1], BTreeMap::from([(UeId(0), 1)])),
            (aps[2], BTreeMap::from([(UeId(1), 3)])),
        ]))
        .map_err(|e| e.to_string())?;
    let rx: BTreeMap<ApId, f64> = BTreeMap::from([(aps[1], 2e-6), (aps[2], 4e-6)]);
    let i = interference_mw(aps[0], &aps, &rx, &ledger).map_err(|e| e.to_string())?;
    ensure(i == 3.5e-6, || format!("three-term example {i:e}"))?;
    Ok("1e5 ledgers in [0,1], SINR = SNR when idle, 3.5e-6 mW".into())
}

fn fuzz_pool(mut pool: ResourcePool, rng: &mut ChaCha8Rng) -> Result<(), String> {
    let fresh = pool.clone();
    for _ in 0..rng.gen_range(1..24) {
        let ue = UeId(rng.gen_range(0..10));
        let rate = if rng.gen_bool(0.05) {
            0.0
        } else {
            rng.gen_range(1e4..3e6)
        };
        let request = rng.gen_range(1e5..2e7);
        let before = pool.clone();
        let res = match rng.gen_range(0..4) {
            0 | 1 => pool.allocate(ue, request, rate).map(|_| ()),
            2 => pool.reallocate(ue, rate, request).map(|_| ()),
            _ => pool.release(ue),
        };
        if res.is_err() {
            ensure(pool == before, || "failed op changed the pool".into())?;
        }
        ensure(pool.is_conserved(), || format!("not conserved: {pool:?}"))?;
    }
    for ue in pool.unit_map().into_keys().collect::<Vec<_>>() {
        pool.release(ue).map_err(|e| e.to_string())?;
    }
    ensure(pool == fresh, || "drain did not restore the pool".into())
}

fn conservation() -> Outcome {
    let s = builtin_paper_scenario();
    let sat = *s.aps[0].sat().unwrap();
    let nr = *s.aps[1].nr().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100_000 {
        fuzz_pool(ResourcePool::Nr(NrPool::new(&nr)), &mut rng)?;
        let budget = rng.gen_range(0..=sat.budget_symbols());
        fuzz_pool(
            ResourcePool::Sat(SatPool::with_budget(&sat, budget)),
            &mut rng,
        )?;
    }
    Ok("1e5 sequences per pool type".into())
}

fn fuzzed_scenario(rng: &mut ChaCha8Rng) -> Scenario {
    let mut s = builtin_paper_scenario();
    if rng.gen_bool(0.3) {
        s = s.without_mobile_aps();
    }
    s.seed = rng.gen();
    s.grid_width_m = rng.gen_range(1000.0..6000.0);
    s.grid_height_m = rng.gen_range(1000.0..6000.0);
    s.tick_s = [0.5, 1.0, 2.0][rng.gen_range(0..3)];
    s.duration_s = s.tick_s * rng.gen_range(30..120) as f64;
    s.arrival_window_s = s.duration_s * rng.gen_range(0.1..1.0);
    s.rbur_window_ticks = rng.gen_range(1..20);
    s.association.strategy =
        ["user_centric", "ran_controlled", "ran_assisted"][rng.gen_range(0..3)].to_string();
    let n = rng.gen_range(1..80);
    s.ues.truncate(1);
    let ue = s.ues[0].clone();
    s.ues = (0..n)
        .map(|_| sky3d::scenario::UeSpec {
            speed_mps: rng.gen_range(0.0..40.0),
            ..ue.clone()
        })
        .collect();
    s
}

fn determinism() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut scenarios = vec![builtin_paper_scenario()];
    scenarios.extend((0..3).map(|_| fuzzed_scenario(&mut rng)));
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    for (k, s) in scenarios.iter().enumerate() {
        let mut bytes = Vec::new();
        for pass in ["a", "b"] {
            let out = dir.path().join(format!("{k}{pass}"));
            sky3d_cli::run_seed(s, s.seed, &out).map_err(|e| format!("scenario {k}: {e}"))?;
            let path = out.join(format!("seed{}/metrics.csv", s.seed));
            bytes.push(std::fs::read(path).map_err(|e| e.to_string())?);
        }
        ensure(bytes[0] == bytes[1], || format!("scenario {k} differs"))?;
    }
    Ok("builtin + 3 fuzzed scenarios".into())
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("congestion without mobile APs", congestion),
        ("continuity with mobile APs", continuity),
        ("unit sizing", unit_sizing),
        ("RB bandwidth", rb_bandwidth),
        ("TDMA accounting", tdma_accounting),
        ("path-loss oracles", path_loss),
        ("RBUR and interference", rbur_properties),
        ("pool conservation fuzz", conservation),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(note) => println!("PASS {}: {name} ({note})", k + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {}: {name}: {why}", k + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
