//! Cell panels drawn directly, without going through workers.

use chrono::Datelike;
use ltu_core::dates::{ymd, DateRange};
use ltu_panel::{CellFilters, CellPanel, DurationRange, N_COVARIATES, THRESHOLD_DAYS};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::CovariateMixture;
use crate::hazard::BaselineHazard;
use crate::rng::{binomial, open01, rng_for, PoissonSampler, SynthRng};
use crate::SynthError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovariatePlan {
    None,
    /// Multinomial counts per cell, independent of duration.
    Independent(CovariateMixture),
    /// Shares identical across `balanced` on every day; the female and
    /// foreign shares are pushed up below it and down above it by
    /// `shift * u` with `u` uniform on [0.5, 1.5] per day.
    PlantedBoundary {
        balanced: DurationRange,
        shift: f64,
        mixture: CovariateMixture,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PanelDgpConfig {
    pub days: DateRange,
    pub durations: DurationRange,
    pub threshold: u32,
    /// Poisson mean of the group size.
    pub mean_group_size: f64,
    /// Draw one group size per day, shared by every duration.
    pub group_size_per_day: bool,
    pub baseline: BaselineHazard,
    pub seasonal_profile: [f64; 12],
    pub true_itt: f64,
    pub policy: DateRange,
    /// Hazard removed from `near` durations while the policy runs.
    pub displacement: f64,
    pub near: DurationRange,
    pub covariates: CovariatePlan,
    pub seed: u64,
}

impl Default for PanelDgpConfig {
    fn default() -> Self {
        Self {
            days: DateRange::years(2011, 2015),
            durations: DurationRange { lo: 545, hi: 760 },
            threshold: THRESHOLD_DAYS,
            mean_group_size: 1_000.0,
            group_size_per_day: false,
            baseline: BaselineHazard::default(),
            seasonal_profile: [1.0; 12],
            true_itt: 0.0,
            policy: DateRange {
                start: ymd(1991, 1, 1),
                end: ymd(2014, 12, 31),
            },
            displacement: 0.0,
            near: DurationRange { lo: 714, hi: 728 },
            covariates: CovariatePlan::None,
            seed: 7,
        }
    }
}

impl PanelDgpConfig {
    /// One year of durations 700..=760 whose covariate shares are balanced
    /// on [714, 743] and tilted outside it.
    pub fn balance_design() -> Self {
        Self {
            days: DateRange::years(2012, 2012),
            durations: DurationRange { lo: 700, hi: 760 },
            mean_group_size: 300.0,
            group_size_per_day: true,
            covariates: CovariatePlan::PlantedBoundary {
                balanced: DurationRange { lo: 714, hi: 743 },
                shift: 0.02,
                mixture: CovariateMixture::default(),
            },
            ..Self::default()
        }
    }

    /// Control durations only, over the last policy year and the year after.
    pub fn displacement_design() -> Self {
        Self {
            days: DateRange::years(2014, 2015),
            durations: DurationRange { lo: 545, hi: 728 },
            ..Self::default()
        }
    }
}

/// Splits `n` by `p` with the largest-remainder rule; ties go to the lower index.
pub fn apportion(n: u32, p: &[f64]) -> Vec<u32> {
    let total: f64 = p.iter().sum();
    let exact: Vec<f64> = p.iter().map(|&x| n as f64 * x / total).collect();
    let mut out: Vec<u32> = exact.iter().map(|x| x.floor() as u32).collect();
    let mut left = n - out.iter().sum::<u32>();
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| {
        let (fa, fb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for k in order {
        if left == 0 {
            break;
        }
        out[k] += 1;
        left -= 1;
    }
    out
}

fn multinomial(rng: &mut SynthRng, n: u32, p: &[f64]) -> Vec<u32> {
    let mut out = Vec::with_capacity(p.len());
    let mut left = n;
    let mut mass = 1.0;
    for (k, &pk) in p.iter().enumerate() {
        let c = if k + 1 == p.len() || mass <= 0.0 {
            left
        } else {
            binomial(rng, left, (pk / mass).min(1.0))
        };
        out.push(c);
        left -= c;
        mass -= pk;
    }
    out
}

/// Category probabilities in covariate order, one vector per family.
fn family_probs(m: &CovariateMixture, female: f64, foreign: f64) -> [Vec<f64>; 6] {
    [
        vec![1.0 - female, female],
        vec![1.0 - foreign, foreign],
        m.education.to_vec(),
        m.first_job_age.to_vec(),
        m.sector.to_vec(),
        m.area.to_vec(),
    ]
}

fn jitter(rng: &mut SynthRng, p: &[f64]) -> Vec<f64> {
    let v: Vec<f64> = p.iter().map(|&x| x * (0.9 + 0.2 * open01(rng))).collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

fn counts_for(n: u32, fams: &[Vec<f64>; 6]) -> Vec<u32> {
    let mut out = Vec::with_capacity(N_COVARIATES);
    for f in fams {
        out.extend(apportion(n, f));
    }
    out
}

struct DayCells {
    gs: Vec<u32>,
    hires: Vec<u32>,
    cov: Vec<u32>,
}

impl PanelDgpConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidConfig(m));
        if !(self.mean_group_size >= 0.0) {
            return bad("mean_group_size must be non-negative".into());
        }
        if self.displacement < 0.0 {
            return bad("displacement must be non-negative".into());
        }
        if self.seasonal_profile.iter().any(|&s| !(s > 0.0)) {
            return bad("seasonal multipliers must be positive".into());
        }
        match &self.covariates {
            CovariatePlan::None => {}
            CovariatePlan::Independent(m) => m.validate()?,
            CovariatePlan::PlantedBoundary { balanced, shift, mixture } => {
                mixture.validate()?;
                if !self.group_size_per_day {
                    return bad("a planted boundary needs one group size per day".into());
                }
                if !self.durations.covers(balanced) || !(0.0..=0.5).contains(shift) {
                    return bad(format!("planted boundary {balanced} with shift {shift}"));
                }
            }
        }
        Ok(())
    }

    fn day_cells(&self, base: &[f64], sizes: &PoissonSampler, d: usize) -> DayCells {
        let mut rng = rng_for(self.seed, d as u64);
        let day = self.days.day(d);
        let season = self.seasonal_profile[day.month0() as usize];
        let active = self.policy.contains(day);
        let n_dur = self.durations.len();
        let shared = self.group_size_per_day.then(|| sizes.sample(&mut rng) as u32);

        let planted = match &self.covariates {
            CovariatePlan::PlantedBoundary { balanced, shift, mixture } => {
                let female = (mixture.female * (0.9 + 0.2 * open01(&mut rng))).min(1.0);
                let foreign = (mixture.foreign * (0.9 + 0.2 * open01(&mut rng))).min(1.0);
                let mut fams = family_probs(mixture, female, foreign);
                for f in fams.iter_mut().skip(2) {
                    *f = jitter(&mut rng, f);
                }
                let up = shift * (0.5 + open01(&mut rng));
                let down = shift * (0.5 + open01(&mut rng));
                let g = shared.expect("validated");
                let inside = counts_for(g, &fams);
                let mut below = fams.clone();
                below[0] = vec![1.0 - (female + up).min(1.0), (female + up).min(1.0)];
                below[1] = vec![1.0 - (foreign + up).min(1.0), (foreign + up).min(1.0)];
                let mut above = fams.clone();
                above[0] = vec![1.0 - (female - down).max(0.0), (female - down).max(0.0)];
                above[1] = vec![1.0 - (foreign - down).max(0.0), (foreign - down).max(0.0)];
                Some((*balanced, inside, counts_for(g, &below), counts_for(g, &above)))
            }
            _ => None,
        };

        let mut out = DayCells {
            gs: Vec::with_capacity(n_dur),
            hires: Vec::with_capacity(n_dur),
            cov: Vec::new(),
        };
        for i in self.durations.iter() {
            let g = shared.unwrap_or_else(|| sizes.sample(&mut rng) as u32);
            let mut h = base[i as usize] * season;
            if active {
                if i >= self.threshold {
                    h += self.true_itt;
                }
                if self.near.contains(i) {
                    h -= self.displacement;
                }
            }
            out.gs.push(g);
            out.hires.push(binomial(&mut rng, g, h.clamp(0.0, 1.0)));
            match (&self.covariates, &planted) {
                (_, Some((bal, inside, below, above))) => out.cov.extend_from_slice(if i < bal.lo {
                    below
                } else if i > bal.hi {
                    above
                } else {
                    inside
                }),
                (CovariatePlan::Independent(m), None) => {
                    for f in family_probs(m, m.female, m.foreign) {
                        out.cov.extend(multinomial(&mut rng, g, &f));
                    }
                }
                _ => {}
            }
        }
        out
    }
}

pub fn simulate_panel(cfg: &PanelDgpConfig) -> Result<CellPanel, SynthError> {
    cfg.validate()?;
    let base = cfg.baseline.table(cfg.durations.hi)?;
    let sizes = PoissonSampler::new(cfg.mean_group_size);
    let chunks: Vec<DayCells> = (0..cfg.days.len())
        .into_par_iter()
        .map(|d| cfg.day_cells(&base, &sizes, d))
        .collect();
    let mut gs = Vec::with_capacity(cfg.days.len() * cfg.durations.len());
    let mut hires = Vec::with_capacity(gs.capacity());
    let mut cov = Vec::new();
    for c in chunks {
        gs.extend(c.gs);
        hires.extend(c.hires);
        cov.extend(c.cov);
    }
    let cov = (!matches!(cfg.covariates, CovariatePlan::None)).then_some(cov);
    Ok(CellPanel::from_counts(cfg.days, cfg.durations, gs, hires, cov, CellFilters::default())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ltu_panel::Covariate;

    #[test]
    fn apportion_sums_and_rounds() {
        assert_eq!(apportion(10, &[0.5, 0.5]), vec![5, 5]);
        assert_eq!(apportion(10, &[1.0, 1.0, 1.0]), vec![4, 3, 3]);
        assert_eq!(apportion(7, &[0.1, 0.2, 0.7]).iter().sum::<u32>(), 7);
        assert_eq!(apportion(0, &[0.3, 0.7]), vec![0, 0]);
    }

    #[test]
    fn planted_panel_has_identical_inside_shares() {
        let cfg = PanelDgpConfig {
            days: DateRange::years(2012, 2012),
            durations: DurationRange::new(700, 760).unwrap(),
            mean_group_size: 200.0,
            group_size_per_day: true,
            covariates: CovariatePlan::PlantedBoundary {
                balanced: DurationRange::new(714, 743).unwrap(),
                shift: 0.1,
                mixture: CovariateMixture::default(),
            },
            ..Default::default()
        };
        let p = simulate_panel(&cfg).unwrap();
        for d in [0, 100, 300] {
            let inside = p.covariate_share(714, d, Covariate::Female).unwrap();
            for i in 715..=743 {
                assert_eq!(p.covariate_share(i, d, Covariate::Female).unwrap(), inside);
            }
            assert!(p.covariate_share(713, d, Covariate::Female).unwrap() > inside);
            assert!(p.covariate_share(744, d, Covariate::Female).unwrap() < inside);
        }
    }

    #[test]
    fn independent_covariates_sum_to_group() {
        let cfg = PanelDgpConfig {
            days: DateRange::years(2012, 2012),
            durations: DurationRange::new(720, 740).unwrap(),
            mean_group_size: 40.0,
            covariates: CovariatePlan::Independent(CovariateMixture::default()),
            ..Default::default()
        };
        // from_counts checks the family sums
        let p = simulate_panel(&cfg).unwrap();
        assert!(p.has_covariates());
    }

    #[test]
    fn planted_needs_shared_group_size() {
        let cfg = PanelDgpConfig {
            covariates: CovariatePlan::PlantedBoundary {
                balanced: DurationRange::new(714, 743).unwrap(),
                shift: 0.1,
                mixture: CovariateMixture::default(),
            },
            ..Default::default()
        };
        assert!(simulate_panel(&cfg).is_err());
    }
}
