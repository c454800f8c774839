//! Worker histories and window-level spell samples.

use chrono::{Datelike, Days, NaiveDate};
use ltu_core::dates::DateRange;
use ltu_panel::{CellFilters, CellPanel, ContractRecord, ContractType, DurationRange, Region, Sector, Spell};
use ltu_subsidy::{FirmClass, HireRecord};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{DgpConfig, WorkerTraits};
use crate::hazard::{neg_log_survival, HazardModel};
use crate::rng::{binomial, exp1, open01, poisson, rng_for, std_normal, uniform_int, SynthRng};
use crate::SynthError;

const N_FIRMS: u32 = 5_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticJob {
    pub start: NaiveDate,
    /// `None` when the job outlasts the simulated period.
    pub end: Option<NaiveDate>,
    pub contract_type: ContractType,
    pub region: Region,
    pub sector: Sector,
    pub firm: u32,
    pub firm_class: FirmClass,
    /// Annual gross wage.
    pub wage: f64,
}

/// A non-employment spell with both forcing variables: the length it would
/// have had without the targeted policy and the length actually observed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticSpell {
    pub last_end: NaiveDate,
    /// `None` when the spell outlasts the period.
    pub potential: Option<u32>,
    pub observed: Option<u32>,
}

/// Jobs and spells alternate: spell `k` follows job `k`, and job `k + 1`
/// starts on the day spell `k` ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticWorker {
    pub id: String,
    pub traits: WorkerTraits,
    pub jobs: Vec<SyntheticJob>,
    pub spells: Vec<SyntheticSpell>,
}

fn add_days(d: NaiveDate, n: u32) -> NaiveDate {
    d + Days::new(n as u64)
}

/// Observed and potential exit durations of a spell opened on day index
/// `entry`, walked from duration `from` with one shared exponential target.
fn walk(
    model: &HazardModel,
    entry: usize,
    from: u32,
    to: u32,
    target: f64,
) -> (Option<u32>, Option<u32>) {
    let last = model.days().len() - 1;
    let (mut h_obs, mut h_pot) = (0.0, 0.0);
    let (mut obs, mut pot) = (None, None);
    let mut i = from;
    while i <= to && entry + (i as usize) <= last && (obs.is_none() || pot.is_none()) {
        let day = entry + i as usize;
        if obs.is_none() {
            h_obs += neg_log_survival(model.observed(i, day));
            if h_obs >= target {
                obs = Some(i);
            }
        }
        if pot.is_none() {
            h_pot += neg_log_survival(model.potential(i, day));
            if h_pot >= target {
                pot = Some(i);
            }
        }
        i += 1;
    }
    (obs, pot)
}

fn draw_job(cfg: &DgpConfig, rng: &mut SynthRng, start: NaiveDate, contract_type: ContractType) -> SyntheticJob {
    let (region, sector) = cfg.covariates.draw_job(rng);
    let len = uniform_int(rng, cfg.job_length.0 as i64, cfg.job_length.1 as i64) as u32;
    let end = add_days(start, len - 1);
    let firm = (open01(rng) * N_FIRMS as f64) as u32 % N_FIRMS;
    let firm_class = if region.is_mezzogiorno() {
        FirmClass::Mezzogiorno
    } else if firm % 7 == 0 {
        FirmClass::Artisan
    } else {
        FirmClass::Regular
    };
    SyntheticJob {
        start,
        end: (end <= cfg.period.end).then_some(end),
        contract_type,
        region,
        sector,
        firm,
        firm_class,
        wage: (9.8 + 0.35 * std_normal(rng)).exp(),
    }
}

/// Day range the worker-level hazards are resolved on.
fn corpus_days(cfg: &DgpConfig) -> DateRange {
    DateRange {
        start: cfg.first_entry(),
        end: cfg.period.end,
    }
}

/// Contract records cover this range: every simulated contract ends inside it.
pub fn record_window(cfg: &DgpConfig) -> DateRange {
    DateRange {
        start: cfg.first_entry() - Days::new(cfg.job_length.1 as u64),
        end: cfg.period.end,
    }
}

fn simulate_worker(cfg: &DgpConfig, model: &HazardModel, k: usize) -> SyntheticWorker {
    let mut rng = rng_for(cfg.seed, k as u64);
    let days = model.days();
    let max_dur = days.len() as u32;
    let mut entry = uniform_int(&mut rng, 0, days.len() as i64 - 2) as usize;
    let first_type = cfg.draw_hire_type(&mut rng);
    let len = uniform_int(&mut rng, cfg.job_length.0 as i64, cfg.job_length.1 as i64) as u32;
    let mut first = draw_job(cfg, &mut rng, days.day(entry) - Days::new(len as u64 - 1), first_type);
    first.end = Some(days.day(entry));
    let mut jobs = vec![first];
    let mut spells = Vec::new();
    loop {
        let (observed, potential) = walk(model, entry, 1, max_dur, exp1(&mut rng));
        spells.push(SyntheticSpell {
            last_end: days.day(entry),
            potential,
            observed,
        });
        let Some(d) = observed else { break };
        let start = days.day(entry + d as usize);
        let t = cfg.draw_hire_type(&mut rng);
        let job = draw_job(cfg, &mut rng, start, t);
        let next = job.end;
        jobs.push(job);
        match next.and_then(|e| days.offset(e)) {
            Some(e) if e < days.len() - 1 => entry = e,
            _ => break,
        }
    }
    let traits = cfg.covariates.draw_worker(&mut rng, spells[0].potential);
    SyntheticWorker {
        id: format!("w{k:08}"),
        traits,
        jobs,
        spells,
    }
}

/// Simulates `cfg.n_workers` histories. Worker `k` draws from its own stream,
/// so the output does not depend on the thread count.
pub fn simulate_workers(cfg: &DgpConfig) -> Result<Vec<SyntheticWorker>, SynthError> {
    let days = corpus_days(cfg);
    let model = HazardModel::new(cfg, days, days.len() as u32 + 1)?;
    Ok((0..cfg.n_workers)
        .into_par_iter()
        .map(|k| simulate_worker(cfg, &model, k))
        .collect())
}

pub fn to_records(workers: &[SyntheticWorker]) -> Vec<ContractRecord> {
    workers
        .iter()
        .flat_map(|w| {
            w.jobs.iter().map(move |j| ContractRecord {
                worker_id: w.id.clone(),
                firm_id: format!("f{:05}", j.firm),
                start_date: j.start,
                end_date: j.end,
                contract_type: j.contract_type,
                region: j.region,
                sector: j.sector,
                sex: w.traits.sex,
                education: w.traits.education,
                first_job_age: w.traits.first_job_age,
                foreign: w.traits.foreign,
            })
        })
        .collect()
}

/// Spells observed inside `window`, built straight from the histories.
pub fn to_spells(workers: &[SyntheticWorker], window: &DateRange) -> Vec<Spell> {
    let mut out = Vec::new();
    for (k, w) in workers.iter().enumerate() {
        for (n, s) in w.spells.iter().enumerate() {
            if s.last_end >= window.end || s.last_end < window.start {
                continue;
            }
            let job = &w.jobs[n];
            let next = s.observed.map(|d| add_days(s.last_end, d)).filter(|d| *d <= window.end);
            out.push(Spell {
                worker: k as u32,
                last_end: s.last_end,
                next_start: next,
                next_type: next.map(|_| w.jobs[n + 1].contract_type),
                region: job.region,
                profile: w.traits.profile(job.region, job.sector),
            });
        }
    }
    out
}

/// Hires inside `period` with the wage of the job taken up.
pub fn hire_records(workers: &[SyntheticWorker], period: &DateRange) -> Vec<HireRecord> {
    workers
        .iter()
        .flat_map(|w| w.jobs.iter().skip(1))
        .filter(|j| period.contains(j.start))
        .map(|j| HireRecord {
            year: j.start.year(),
            wage: j.wage,
            firm_class: j.firm_class,
        })
        .collect()
}

pub fn simulate_corpus(cfg: &DgpConfig) -> Result<Vec<ContractRecord>, SynthError> {
    Ok(to_records(&simulate_workers(cfg)?))
}

/// Draws only the spells that reach a duration window during the period.
///
/// Spells open at `entries_per_day` on average. The number reaching the
/// window's first duration is Poisson with the cohort's survival probability
/// folded in, and survivors are walked through the window only; spells still
/// open past the window are censored there. Survival before the window uses
/// the observed hazard, so potential lengths are exact when the policy terms
/// only act inside the window.
#[derive(Debug, Clone)]
pub struct WindowSampler {
    cfg: DgpConfig,
    model: HazardModel,
    durations: DurationRange,
    /// Mean survivors per cohort, by entry-day index in the model range.
    cohorts: Vec<(usize, f64)>,
}

impl WindowSampler {
    pub fn new(cfg: &DgpConfig, durations: DurationRange) -> Result<Self, SynthError> {
        let days = DateRange {
            start: cfg.period.start - Days::new(durations.hi as u64),
            end: cfg.period.end,
        };
        let model = HazardModel::new(cfg, days, durations.hi + 1)?;
        let last_entry = days.len() - 1 - durations.lo as usize;
        let cohorts = (0..=last_entry)
            .into_par_iter()
            .map(|e| {
                let h: f64 = (1..durations.lo)
                    .map(|i| neg_log_survival(model.observed(i, e + i as usize)))
                    .sum();
                (e, cfg.entries_per_day * (-h).exp())
            })
            .collect();
        Ok(Self {
            cfg: cfg.clone(),
            model,
            durations,
            cohorts,
        })
    }

    pub fn durations(&self) -> DurationRange {
        self.durations
    }

    pub fn sample(&self, seed: u64) -> Vec<Spell> {
        let cfg = &self.cfg;
        let days = self.model.days();
        let per_cohort: Vec<Vec<Spell>> = self
            .cohorts
            .par_iter()
            .map(|&(e, mean)| {
                let mut rng = rng_for(seed, e as u64);
                let n = poisson(&mut rng, mean);
                let entry = days.day(e);
                (0..n)
                    .map(|_| {
                        let (obs, pot) = walk(&self.model, e, self.durations.lo, self.durations.hi, exp1(&mut rng));
                        let traits = cfg.covariates.draw_worker(&mut rng, pot);
                        let (region, sector) = cfg.covariates.draw_job(&mut rng);
                        let next_type = cfg.draw_hire_type(&mut rng);
                        let next = obs.map(|d| add_days(entry, d));
                        Spell {
                            worker: 0,
                            last_end: entry,
                            next_start: next,
                            next_type: next.map(|_| next_type),
                            region,
                            profile: traits.profile(region, sector),
                        }
                    })
                    .collect()
            })
            .collect();
        let mut out: Vec<Spell> = per_cohort.into_iter().flatten().collect();
        for (k, s) in out.iter_mut().enumerate() {
            s.worker = k as u32;
        }
        out
    }
}

impl WindowSampler {
    /// Cell panel over `period × durations` drawn cohort by cohort.
    ///
    /// Workers of one cohort share the hazard, so the hires of a cohort on
    /// each day are binomial among those still waiting. The cells have the
    /// same distribution as aggregating [`WindowSampler::sample`], without
    /// covariates and at a fraction of the cost.
    pub fn sample_panel(&self, seed: u64) -> Result<CellPanel, SynthError> {
        let days = self.model.days();
        let period = self.cfg.period;
        let first = days.offset(period.start).expect("period inside model range");
        let n_dur = self.durations.len();
        let n = period.len() * n_dur;
        let per_cohort: Vec<Vec<(usize, u32, u32)>> = self
            .cohorts
            .par_iter()
            .map(|&(e, mean)| {
                let mut rng = rng_for(seed, e as u64);
                let mut alive = poisson(&mut rng, mean) as u32;
                let mut cells = Vec::with_capacity(n_dur);
                for i in self.durations.iter() {
                    let d = e + i as usize;
                    if d >= days.len() || alive == 0 {
                        break;
                    }
                    let h = binomial(&mut rng, alive, self.model.observed(i, d));
                    if d >= first {
                        cells.push(((d - first) * n_dur + (i - self.durations.lo) as usize, alive, h));
                    }
                    alive -= h;
                }
                cells
            })
            .collect();
        let mut gs = vec![0u32; n];
        let mut hires = vec![0u32; n];
        for (k, g, h) in per_cohort.into_iter().flatten() {
            gs[k] = g;
            hires[k] = h;
        }
        Ok(CellPanel::from_counts(period, self.durations, gs, hires, None, CellFilters::default())?)
    }
}

pub fn simulate_window_spells(cfg: &DgpConfig, durations: DurationRange) -> Result<Vec<Spell>, SynthError> {
    Ok(WindowSampler::new(cfg, durations)?.sample(cfg.seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ltu_core::dates::ymd;

    fn small() -> DgpConfig {
        DgpConfig {
            n_workers: 300,
            period: DateRange::years(2013, 2014),
            ..Default::default()
        }
    }

    #[test]
    fn histories_alternate_jobs_and_spells() {
        let workers = simulate_workers(&small()).unwrap();
        assert_eq!(workers.len(), 300);
        for w in &workers {
            assert!(w.jobs.len() == w.spells.len() || w.jobs.len() == w.spells.len() + 1);
            for (n, s) in w.spells.iter().enumerate() {
                assert_eq!(Some(s.last_end), w.jobs[n].end);
                if let Some(d) = s.observed {
                    assert_eq!(w.jobs[n + 1].start, add_days(s.last_end, d));
                }
            }
        }
    }

    #[test]
    fn without_policy_terms_potential_equals_observed() {
        let workers = simulate_workers(&small()).unwrap();
        for w in &workers {
            for s in &w.spells {
                assert_eq!(s.potential, s.observed);
            }
        }
    }

    #[test]
    fn lift_shortens_observed_spells_only() {
        let cfg = DgpConfig {
            true_itt: 0.05,
            threshold: 30,
            ..small()
        };
        let workers = simulate_workers(&cfg).unwrap();
        let mut shorter = 0;
        for s in workers.iter().flat_map(|w| &w.spells) {
            match (s.observed, s.potential) {
                (Some(o), Some(p)) => {
                    assert!(o <= p);
                    if o < p {
                        assert!(o >= 30);
                        shorter += 1;
                    }
                }
                (Some(o), None) => assert!(o >= 30),
                (None, Some(_)) => panic!("potential cannot end first under a non-negative lift"),
                (None, None) => {}
            }
        }
        assert!(shorter > 0);
    }

    #[test]
    fn window_sample_stays_in_window() {
        let cfg = DgpConfig {
            entries_per_day: 5.0,
            period: DateRange::years(2014, 2014),
            ..Default::default()
        };
        let w = DurationRange::new(714, 744).unwrap();
        let spells = simulate_window_spells(&cfg, w).unwrap();
        assert!(!spells.is_empty());
        for s in &spells {
            let first = add_days(s.last_end, 714);
            assert!(first <= ymd(2014, 12, 31));
            if let Some(h) = s.next_start {
                let d = (h - s.last_end).num_days();
                assert!((714..=744).contains(&d));
                assert!(h <= ymd(2014, 12, 31));
            }
        }
        assert_eq!(spells, simulate_window_spells(&cfg, w).unwrap());
    }
}
