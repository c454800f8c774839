use std::collections::HashMap;

use chrono::{Duration, NaiveDate};
use ltu_core::dates::{ymd, DateRange};
use ltu_panel::records::*;
use ltu_panel::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pick<T: Copy>(rng: &mut ChaCha8Rng, all: &[T]) -> T {
    all[rng.random_range(0..all.len())]
}

/// Workers with 1..=4 contracts, all starting inside `window`, some
/// overlapping and some ongoing.
fn random_corpus(seed: u64, n_workers: usize, window: DateRange) -> Vec<ContractRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let span = window.len() as i64;
    let mut out = Vec::new();
    for w in 0..n_workers {
        let sex = pick(&mut rng, Sex::ALL);
        let education = pick(&mut rng, Education::ALL);
        let first_job_age = pick(&mut rng, AgeClass::ALL);
        let foreign = rng.random::<f64>() < 0.1;
        let mut start = window.start + Duration::days(rng.random_range(0..span / 2));
        for _ in 0..rng.random_range(1..=4) {
            if start > window.end {
                break;
            }
            let len = rng.random_range(0..400);
            let end = (rng.random::<f64>() > 0.1).then(|| start + Duration::days(len));
            out.push(ContractRecord {
                worker_id: format!("w{w:05}"),
                firm_id: format!("f{}", rng.random_range(0..300)),
                start_date: start,
                end_date: end,
                contract_type: pick(&mut rng, ContractType::ALL),
                region: pick(&mut rng, Region::ALL),
                sector: pick(&mut rng, Sector::ALL),
                sex,
                education,
                first_job_age,
                foreign,
            });
            let Some(e) = end else { break };
            // negative gaps give overlapping contracts
            start = e + Duration::days(rng.random_range(-60..900));
        }
    }
    out
}

fn window() -> DateRange {
    DateRange::new(ymd(2008, 1, 1), ymd(2015, 12, 31)).unwrap()
}

#[test]
fn emit_then_parse_round_trips() {
    let records = random_corpus(1, 8000, window());
    assert!(records.len() >= 10_000, "{}", records.len());
    let records = records[..10_000].to_vec();
    for delimiter in [b',', b';'] {
        let fmt = FormatDescriptor { delimiter };
        let mut buf = Vec::new();
        emit_contracts(&mut buf, &records, &fmt).unwrap();
        let (back, diags) = parse_contracts(buf.as_slice(), &fmt).unwrap();
        assert!(diags.is_empty());
        assert_eq!(back, records);
    }
}

#[test]
fn spell_days_account_for_every_person_day() {
    let w = window();
    let records = random_corpus(2, 500, w);
    let set = build_spells(&records, w, &SpellOptions::default()).unwrap();

    // independent count: per worker, days from the first start to the window
    // end on which no contract is active, after the first contract ended
    let mut by_worker: HashMap<&str, Vec<&ContractRecord>> = HashMap::new();
    for r in &records {
        by_worker.entry(&r.worker_id).or_default().push(r);
    }
    let mut expected = 0i64;
    for contracts in by_worker.values() {
        let first = contracts.iter().map(|r| r.start_date).min().unwrap();
        let mut employed = vec![false; w.len()];
        for r in contracts {
            let a = w.offset(r.start_date).unwrap();
            let b = r.end_date.map_or(w.len() - 1, |e| w.offset(e.min(w.end)).unwrap());
            employed[a..=b].iter_mut().for_each(|e| *e = true);
        }
        let from = w.offset(first).unwrap();
        expected += employed[from..].iter().filter(|&&e| !e).count() as i64;
    }
    let got: i64 = set.spells.iter().map(|s| s.nonemployed_days(&w)).sum();
    assert_eq!(got, expected);
}

#[test]
fn group_sizes_partition_the_workers_in_a_spell() {
    let w = window();
    let records = random_corpus(3, 800, w);
    let set = build_spells(&records, w, &SpellOptions::default()).unwrap();
    let days = DateRange::new(ymd(2010, 1, 1), ymd(2012, 12, 31)).unwrap();
    let spec = AggregateSpec {
        days,
        durations: DurationRange::new(100, 700).unwrap(),
        filters: CellFilters::default(),
        track_covariates: true,
    };
    let panel = aggregate_cells(&set.spells, &spec);
    for (d, day) in days.iter().enumerate() {
        let in_spell = set.spells.iter().filter(|s| s.duration_on(day).is_some()).count() as u64;
        let inside: u64 = spec.durations.iter().map(|i| panel.group_size(i, d) as u64).sum();
        assert_eq!(inside + panel.out_of_range(d), in_spell, "{day}");
    }
    for cell in panel.cells() {
        assert!(cell.hires <= cell.group_size);
        if let Some(shares) = &cell.covariate_shares {
            for fam in CovariateFamily::ALL {
                let s: f64 = shares[fam.span()].iter().sum();
                assert!((s - 1.0).abs() < 1e-9);
            }
        }
    }
}

fn hand_record(worker: &str, start: NaiveDate, end: Option<NaiveDate>, t: ContractType, region: Region) -> ContractRecord {
    ContractRecord {
        worker_id: worker.into(),
        firm_id: "firm".into(),
        start_date: start,
        end_date: end,
        contract_type: t,
        region,
        sector: Sector::Services,
        sex: Sex::Female,
        education: Education::UpperSecondary,
        first_job_age: AgeClass::From20To24,
        foreign: false,
    }
}

#[test]
fn five_workers_by_hand() {
    use ContractType::*;
    let records = vec![
        // a: ends 06-30, hired 07-11 (i = 11)
        hand_record("a", ymd(2010, 1, 1), Some(ymd(2010, 6, 30)), Temporary, Region::Lazio),
        hand_record("a", ymd(2010, 7, 11), None, Permanent, Region::Lazio),
        // b: overlapping contracts merge into one episode ending 07-02, then an open spell
        hand_record("b", ymd(2010, 1, 1), Some(ymd(2010, 6, 30)), Temporary, Region::Sicilia),
        hand_record("b", ymd(2010, 3, 1), Some(ymd(2010, 7, 2)), Temporary, Region::Sicilia),
        // c: ongoing from the start, never in a spell
        hand_record("c", ymd(2009, 5, 1), None, Permanent, Region::Veneto),
        // d: ends 07-01, hired 07-05 on a parasubordinate contract (i = 4)
        hand_record("d", ymd(2010, 2, 1), Some(ymd(2010, 7, 1)), Permanent, Region::Puglia),
        hand_record("d", ymd(2010, 7, 5), Some(ymd(2010, 9, 1)), Parasubordinate, Region::Puglia),
        // e: ends 07-03, hired 07-05 (i = 2)
        hand_record("e", ymd(2010, 1, 1), Some(ymd(2010, 7, 3)), Other, Region::Liguria),
        hand_record("e", ymd(2010, 7, 5), None, Permanent, Region::Liguria),
    ];
    let set = build_spells(&records, window(), &SpellOptions::default()).unwrap();
    let days = DateRange::new(ymd(2010, 7, 1), ymd(2010, 7, 12)).unwrap();
    let spec = AggregateSpec {
        days,
        durations: DurationRange::new(1, 12).unwrap(),
        filters: CellFilters::default(),
        track_covariates: true,
    };
    let panel = aggregate_cells(&set.spells, &spec);
    let off = |d: u32| days.offset(ymd(2010, 7, d)).unwrap();

    // by hand: (i, day) -> (group size, hires)
    let mut expected: HashMap<(u32, u32), (u32, u32)> = HashMap::new();
    let mut add = |end_day: i64, hire_day: Option<u32>| {
        // spell opened by an end on 2010-06-30 + end_day
        for d in 1..=12u32 {
            let i = d as i64 - end_day;
            if i < 1 || hire_day.is_some_and(|h| d > h) {
                continue;
            }
            let e = expected.entry((i as u32, d)).or_default();
            e.0 += 1;
            if hire_day == Some(d) {
                e.1 += 1;
            }
        }
    };
    add(0, Some(11)); // a
    add(2, None); // b ends 07-02
    add(1, Some(5)); // d
    add(3, Some(5)); // e
    for d in 1..=12 {
        for i in 1..=12 {
            let want = expected.get(&(i, d)).copied().unwrap_or((0, 0));
            assert_eq!((panel.group_size(i, off(d)), panel.hires(i, off(d))), want, "i={i} day={d}");
        }
    }
    assert_eq!(panel.hires(11, off(11)), 1);

    // permanent-only hires drop d's parasubordinate hire
    let perm = AggregateSpec {
        filters: CellFilters {
            hire_types: Some(vec![Permanent]),
            ..Default::default()
        },
        ..spec.clone()
    };
    let p2 = aggregate_cells(&set.spells, &perm);
    assert_eq!(p2.hires(4, off(5)), 0);
    assert_eq!(p2.hires(2, off(5)), 1);
    assert_eq!(p2.group_size(4, off(5)), 1);

    // the southern filter keeps b (Sicilia) and d (Puglia)
    let south = AggregateSpec {
        filters: CellFilters {
            regions: RegionFilter::Mezzogiorno,
            ..Default::default()
        },
        ..spec
    };
    let p3 = aggregate_cells(&set.spells, &south);
    let total: u32 = (1..=12).map(|i| p3.group_size(i, off(5))).sum();
    assert_eq!(total, 2);
}

#[test]
fn region_filter_commutes_with_aggregation() {
    let w = window();
    let records = random_corpus(4, 1500, w);
    let set = build_spells(&records, w, &SpellOptions::default()).unwrap();
    let spec = AggregateSpec {
        days: DateRange::new(ymd(2011, 1, 1), ymd(2012, 12, 31)).unwrap(),
        durations: DurationRange::new(1, 800).unwrap(),
        filters: CellFilters {
            regions: RegionFilter::Mezzogiorno,
            ..Default::default()
        },
        track_covariates: true,
    };
    let with_filter = aggregate_cells(&set.spells, &spec);
    let south: Vec<Spell> = set.spells.iter().copied().filter(|s| s.region.is_mezzogiorno()).collect();
    let unfiltered_spec = AggregateSpec {
        filters: CellFilters::default(),
        ..spec.clone()
    };
    let pre_filtered = aggregate_cells(&south, &unfiltered_spec);
    for d in 0..with_filter.n_days() {
        for i in spec.durations.iter() {
            assert_eq!(with_filter.cell(i, d), pre_filtered.cell(i, d));
        }
        assert_eq!(with_filter.out_of_range(d), pre_filtered.out_of_range(d));
    }
}

#[test]
fn panel_is_independent_of_threads_and_order() {
    let w = window();
    let records = random_corpus(5, 3000, w);
    let set = build_spells(&records, w, &SpellOptions::default()).unwrap();
    let spec = AggregateSpec {
        days: DateRange::new(ymd(2011, 1, 1), ymd(2014, 12, 31)).unwrap(),
        durations: DurationRange::new(714, 744).unwrap(),
        filters: CellFilters::default(),
        track_covariates: true,
    };
    let run = |threads: usize, spells: &[Spell]| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| aggregate_cells(spells, &spec))
    };
    let one = run(1, &set.spells);
    let mut reversed = set.spells.clone();
    reversed.reverse();
    assert_eq!(one, run(4, &set.spells));
    assert_eq!(one, run(3, &reversed));

    let mut reordered = records.clone();
    reordered.reverse();
    let set2 = build_spells(&reordered, w, &SpellOptions::default()).unwrap();
    assert_eq!(set, set2);

    let mut a = Vec::new();
    let mut b = Vec::new();
    write_cells_csv(&mut a, &one).unwrap();
    write_cells_csv(&mut b, &run(2, &set2.spells)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn cell_and_day_counts() {
    let spec = AggregateSpec {
        days: DateRange::new(ymd(2011, 1, 1), ymd(2014, 12, 31)).unwrap(),
        durations: DurationRange::new(714, 744).unwrap(),
        filters: CellFilters::default(),
        track_covariates: false,
    };
    let panel = aggregate_cells(&[], &spec);
    assert_eq!(panel.n_cells(), 45_291);
    assert_eq!(panel.n_empty(), 45_291);

    let days = DateRange::new(ymd(2010, 1, 1), ymd(2015, 12, 31)).unwrap();
    assert_eq!(days.len(), 2191);
    let without_december = days.iter().filter(|d| !(*d >= ymd(2015, 12, 1))).count();
    assert_eq!(without_december, 2160);
}

#[test]
fn daily_series_matches_raw_spells() {
    let w = window();
    let records = random_corpus(6, 3000, w);
    let set = build_spells(&records, w, &SpellOptions::default()).unwrap();
    let days = DateRange::new(ymd(2010, 1, 1), ymd(2011, 12, 31)).unwrap();
    let window = DurationRange::new(200, 400).unwrap();
    let spec = AggregateSpec {
        days,
        durations: DurationRange::new(150, 450).unwrap(),
        filters: CellFilters::default(),
        track_covariates: false,
    };
    let panel = aggregate_cells(&set.spells, &spec);
    let series = daily_collapse(&panel, window, days).unwrap();
    let mut k = 0;
    for day in days.iter() {
        let (mut n, mut h) = (0u64, 0u64);
        for s in &set.spells {
            if let Some(i) = s.duration_on(day) {
                if window.contains(i) {
                    n += 1;
                    if s.next_start == Some(day) {
                        h += 1;
                    }
                }
            }
        }
        if n == 0 {
            assert!(series.empty_days.contains(&day));
            continue;
        }
        assert_eq!(series.days[k], day);
        assert_eq!((series.group_size[k], series.hires[k]), (n, h));
        assert_eq!(series.y[k], h as f64 / n as f64);
        k += 1;
    }
    assert_eq!(k, series.len());
}

#[test]
fn cells_csv_round_trips() {
    let w = window();
    let records = random_corpus(7, 600, w);
    let set = build_spells(&records, w, &SpellOptions::default()).unwrap();
    let spec = AggregateSpec {
        days: DateRange::new(ymd(2012, 1, 1), ymd(2012, 6, 30)).unwrap(),
        durations: DurationRange::new(10, 90).unwrap(),
        filters: CellFilters::default(),
        track_covariates: true,
    };
    let panel = aggregate_cells(&set.spells, &spec);
    let mut buf = Vec::new();
    write_cells_csv(&mut buf, &panel).unwrap();
    let back = read_cells_csv(buf.as_slice(), CellFilters::default()).unwrap();
    assert_eq!(back.days(), panel.days());
    assert_eq!(back.durations(), panel.durations());
    assert!(panel.cells().eq(back.cells()));
}
