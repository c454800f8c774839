use ltu_core::dates::{ymd, DateRange};
use ltu_panel::{
    aggregate_cells, build_spells, emit_contracts, parse_contracts, AggregateSpec, CellFilters, CellPanel, Covariate,
    DurationRange, FormatDescriptor, SpellOptions,
};
use ltu_rdd::{balance_test, BalanceConfig};
use ltu_subsidy::{compare_yearly, SubsidyRates};
use ltu_synth::hazard::{BaselineHazard, HazardModel, HazardPiece, MixtureSpec};
use ltu_synth::montecarlo::{monte_carlo, EstimatorStudy, Level, WindowRule};
use ltu_synth::panel_dgp::{simulate_panel, CovariatePlan, PanelDgpConfig};
use ltu_synth::{
    hire_records, record_window, simulate_workers, to_records, to_spells, CovariateMixture, DgpConfig, WindowSampler,
};
use proptest::prelude::*;

fn small_corpus() -> DgpConfig {
    DgpConfig {
        n_workers: 4_000,
        period: DateRange::years(2012, 2014),
        true_itt: 2e-3,
        baseline: BaselineHazard::Piecewise(vec![
            HazardPiece { from: 1, hazard: 4e-3 },
            HazardPiece { from: 400, hazard: 2e-3 },
        ]),
        threshold: 300,
        displacement_intensity: 5e-4,
        seed: 99,
        ..Default::default()
    }
}

fn pool(n: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap()
}

#[test]
fn corpus_round_trips_through_ingest_without_diagnostics() {
    let cfg = small_corpus();
    let records = to_records(&simulate_workers(&cfg).unwrap());
    let mut buf = Vec::new();
    emit_contracts(&mut buf, &records, &FormatDescriptor::default()).unwrap();
    let (parsed, diags) = parse_contracts(buf.as_slice(), &FormatDescriptor::default()).unwrap();
    assert!(diags.is_empty(), "{:?}", &diags[..diags.len().min(3)]);
    assert_eq!(parsed, records);
}

#[test]
fn direct_spells_match_spells_rebuilt_from_records() {
    let cfg = small_corpus();
    let workers = simulate_workers(&cfg).unwrap();
    let rebuilt = build_spells(&to_records(&workers), record_window(&cfg), &SpellOptions::default()).unwrap();
    let direct = to_spells(&workers, &record_window(&cfg));
    let spec = AggregateSpec {
        days: cfg.period,
        durations: DurationRange::new(1, 900).unwrap(),
        filters: CellFilters::default(),
        track_covariates: true,
    };
    let a = aggregate_cells(&rebuilt.spells, &spec);
    let b = aggregate_cells(&direct, &spec);
    assert_eq!(rebuilt.spells.len(), direct.len());
    assert_eq!(a, b);
    assert!(a.cells().map(|c| c.hires as u64).sum::<u64>() > 1_000);
}

#[test]
fn generation_ignores_thread_count() {
    let cfg = small_corpus();
    let a = pool(1).install(|| simulate_workers(&cfg).unwrap());
    let b = pool(3).install(|| simulate_workers(&cfg).unwrap());
    assert_eq!(a, b);
    let s = WindowSampler::new(&cfg, DurationRange::new(290, 310).unwrap()).unwrap();
    assert_eq!(pool(1).install(|| s.sample(5)), pool(4).install(|| s.sample(5)));
    assert_eq!(pool(1).install(|| s.sample_panel(5).unwrap()), pool(4).install(|| s.sample_panel(5).unwrap()));
}

#[test]
fn potential_lengths_follow_the_untreated_hazard() {
    // constant hazard: among spells observable for 200 days, the share ending
    // within 100 days is 1 - (1 - h)^100
    let h = 0.01;
    let cfg = DgpConfig {
        n_workers: 6_000,
        period: DateRange::years(2012, 2014),
        baseline: BaselineHazard::Piecewise(vec![HazardPiece { from: 1, hazard: h }]),
        seasonal_profile: [1.0; 12],
        true_itt: 0.02,
        threshold: 50,
        seed: 4,
        ..Default::default()
    };
    let workers = simulate_workers(&cfg).unwrap();
    let cutoff = ymd(2014, 12, 31) - chrono::Days::new(200);
    let spells: Vec<_> = workers.iter().flat_map(|w| &w.spells).filter(|s| s.last_end <= cutoff).collect();
    let n = spells.len() as f64;
    let pot = spells.iter().filter(|s| s.potential.is_some_and(|d| d <= 100)).count() as f64 / n;
    let obs = spells.iter().filter(|s| s.observed.is_some_and(|d| d <= 100)).count() as f64 / n;
    let want_pot = 1.0 - (1.0 - h).powi(100);
    let want_obs = 1.0 - (1.0 - h).powi(49) * (1.0 - h - 0.02).powi(51);
    let se = (0.25 / n).sqrt();
    assert!((pot - want_pot).abs() < 4.0 * se, "{pot} vs {want_pot}");
    assert!((obs - want_obs).abs() < 4.0 * se, "{obs} vs {want_obs}");
}

#[test]
fn cohort_cells_match_spell_cells_in_distribution() {
    let cfg = DgpConfig {
        entries_per_day: 60.0,
        period: DateRange::years(2013, 2014),
        true_itt: 3e-3,
        ..Default::default()
    };
    let w = DurationRange::new(714, 744).unwrap();
    let s = WindowSampler::new(&cfg, w).unwrap();
    let spec = AggregateSpec {
        days: cfg.period,
        durations: w,
        filters: CellFilters::default(),
        track_covariates: false,
    };
    let totals = |p: &CellPanel, treated: bool| {
        p.cells()
            .filter(|c| (c.duration >= 729) == treated)
            .fold((0u64, 0u64), |(g, h), c| (g + c.group_size as u64, h + c.hires as u64))
    };
    let (mut a, mut b) = ([0u64; 4], [0u64; 4]);
    for seed in 0..6 {
        let pa = aggregate_cells(&s.sample(seed), &spec);
        let pb = s.sample_panel(100 + seed).unwrap();
        for (acc, p) in [(&mut a, &pa), (&mut b, &pb)] {
            let (g0, h0) = totals(p, false);
            let (g1, h1) = totals(p, true);
            acc[0] += g0;
            acc[1] += h0;
            acc[2] += g1;
            acc[3] += h1;
        }
    }
    for k in [0, 2] {
        let rel = a[k] as f64 / b[k] as f64 - 1.0;
        assert!(rel.abs() < 0.01, "group sizes {k}: {rel}");
    }
    for k in [1, 3] {
        // hires are Poisson-like: compare within four combined standard errors
        let diff = a[k] as f64 - b[k] as f64;
        assert!(diff.abs() < 4.0 * ((a[k] + b[k]) as f64).sqrt(), "hires {k}: {} vs {}", a[k], b[k]);
    }
}

#[test]
fn independent_covariates_give_balance_tests_of_nominal_size() {
    let window = DurationRange::new(719, 738).unwrap();
    let cfg = BalanceConfig {
        covariates: vec![Covariate::Female],
        ..Default::default()
    };
    let reps = 300;
    let rejections = (0..reps)
        .filter(|&seed| {
            let p = simulate_panel(&PanelDgpConfig {
                days: DateRange::years(2012, 2012),
                durations: window,
                mean_group_size: 30.0,
                covariates: CovariatePlan::Independent(CovariateMixture::default()),
                seed,
                ..Default::default()
            })
            .unwrap();
            !balance_test(&p, window, &cfg).unwrap().balanced
        })
        .count();
    let rate = rejections as f64 / reps as f64;
    // alpha = 0.15; binomial sd at 300 draws is about 0.021
    assert!((rate - 0.15).abs() < 0.065, "{rate}");
}

#[test]
fn planted_covariate_tilt_shows_up_along_durations() {
    let cfg = DgpConfig {
        entries_per_day: 40.0,
        period: DateRange::years(2014, 2014),
        covariates: CovariateMixture {
            tilt: Some(ltu_synth::CovariateTilt {
                min_potential: 800,
                female: 0.9,
                foreign: 0.12,
            }),
            ..Default::default()
        },
        ..Default::default()
    };
    // censored at the window edge, every survivor reads as long and is tilted
    let w = DurationRange::new(714, 744).unwrap();
    let spells = WindowSampler::new(&cfg, w).unwrap().sample(1);
    let female = spells.iter().filter(|s| s.profile.sex == ltu_panel::Sex::Female).count() as f64;
    assert!(female / spells.len() as f64 > 0.85);
}

#[test]
fn simulated_hires_feed_the_subsidy_comparison() {
    let cfg = small_corpus();
    let hires = hire_records(&simulate_workers(&cfg).unwrap(), &cfg.period);
    let rows = compare_yearly(&hires, &[2012, 2013, 2014], &SubsidyRates::default()).unwrap();
    for r in rows {
        assert!(r.rel_diff > -0.452 && r.rel_diff < 0.098);
        assert!(r.n_hires.unwrap() > 50);
    }
}

fn quick_study(reps: usize, level: Level) -> EstimatorStudy {
    EstimatorStudy {
        replications: reps,
        seed: 17,
        level,
        window: WindowRule::Fixed(DurationRange::new(714, 744).unwrap()),
        ..Default::default()
    }
}

#[test]
fn monte_carlo_reports_are_reproducible_across_pools() {
    let dgp = DgpConfig {
        entries_per_day: 300.0,
        true_itt: 3e-5,
        ..Default::default()
    };
    let study = quick_study(12, Level::Cohorts);
    let a = pool(1).install(|| monte_carlo(&dgp, &study).unwrap());
    let b = pool(3).install(|| monte_carlo(&dgp, &study).unwrap());
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert!(!serde_json::to_string(&a).unwrap().contains("runtime"));
}

#[test]
fn spells_level_recovers_the_planted_effect() {
    let dgp = DgpConfig {
        entries_per_day: 150.0,
        period: DateRange::years(2011, 2015),
        true_itt: 1e-4,
        ..Default::default()
    };
    let r = monte_carlo(&dgp, &EstimatorStudy { time: None, ..quick_study(20, Level::Spells) }).unwrap();
    let s = &r.summaries[0];
    assert!((s.mean_estimate - 1e-4).abs() < 4.0 * s.mc_se, "{s:?}");
    assert!(s.rejection_rate > 0.5);
}

#[test]
fn hazard_table_matches_mixture_at_every_duration() {
    let m = MixtureSpec::default();
    let t = BaselineHazard::Mixture(m.clone()).table(1_000).unwrap();
    for i in 1..=1_000u32 {
        // independent recomputation of P(T = i) / P(T >= i)
        let low = (i < 699) as u8 as f64;
        let pmf = low * 0.1 / 698.0 + (1.0 - low) * 0.9 / 12_031.0;
        let surv = if i < 699 {
            0.9 + 0.1 * (699 - i) as f64 / 698.0
        } else {
            0.9 * (12_730 - i) as f64 / 12_031.0
        };
        assert!((t[i as usize] - pmf / surv).abs() < 1e-15, "{i}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn hazards_stay_in_unit_interval(
        itt in 0.0f64..0.5,
        disp in 0.0f64..0.5,
        post in 0.0f64..0.5,
        jump in -0.5f64..0.5,
        level in 0.0f64..1.0,
    ) {
        let cfg = DgpConfig {
            true_itt: itt,
            displacement_intensity: disp,
            postponement_intensity: post,
            time_jump: jump,
            baseline: BaselineHazard::Piecewise(vec![HazardPiece { from: 1, hazard: level }]),
            ..Default::default()
        };
        let days = DateRange::new(ymd(2014, 12, 1), ymd(2015, 1, 31)).unwrap();
        let m = HazardModel::new(&cfg, days, 800).unwrap();
        for d in 0..days.len() {
            for i in [1, 713, 714, 728, 729, 743, 744, 800] {
                prop_assert!((0.0..=1.0).contains(&m.observed(i, d)));
                prop_assert!((0.0..=1.0).contains(&m.potential(i, d)));
            }
        }
    }

    #[test]
    fn same_seed_same_corpus(seed in 0u64..1_000) {
        let cfg = DgpConfig { n_workers: 50, period: DateRange::years(2014, 2014), seed, ..Default::default() };
        prop_assert_eq!(simulate_workers(&cfg).unwrap(), simulate_workers(&cfg).unwrap());
    }
}
