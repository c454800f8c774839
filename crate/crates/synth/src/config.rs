use chrono::NaiveDate;
use ltu_core::dates::{ymd, DateRange};
use ltu_panel::{AgeClass, Area, ContractType, CovariateProfile, Education, Region, Sector, Sex, THRESHOLD_DAYS};
use serde::{Deserialize, Serialize};

use crate::hazard::BaselineHazard;
use crate::rng::{categorical, open01, SynthRng};
use crate::SynthError;

/// Shifted worker characteristics for spells whose potential length reaches
/// `min_potential`; used to plant covariate imbalance along the duration axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateTilt {
    pub min_potential: u32,
    pub female: f64,
    pub foreign: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CovariateMixture {
    pub female: f64,
    pub foreign: f64,
    pub education: [f64; 6],
    pub first_job_age: [f64; 5],
    pub sector: [f64; 4],
    pub area: [f64; 4],
    pub tilt: Option<CovariateTilt>,
}

impl Default for CovariateMixture {
    fn default() -> Self {
        Self {
            female: 0.45,
            foreign: 0.12,
            education: [0.08, 0.32, 0.38, 0.04, 0.16, 0.02],
            first_job_age: [0.12, 0.38, 0.28, 0.17, 0.05],
            sector: [0.06, 0.24, 0.10, 0.60],
            area: [0.27, 0.20, 0.21, 0.32],
            tilt: None,
        }
    }
}

fn check_probs(name: &str, p: &[f64]) -> Result<(), SynthError> {
    if p.iter().any(|x| !(0.0..=1.0).contains(x)) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(SynthError::InvalidConfig(format!("{name} probabilities must lie in [0, 1] and sum to one")));
    }
    Ok(())
}

impl CovariateMixture {
    pub fn validate(&self) -> Result<(), SynthError> {
        check_probs("education", &self.education)?;
        check_probs("first_job_age", &self.first_job_age)?;
        check_probs("sector", &self.sector)?;
        check_probs("area", &self.area)?;
        let mut singles = vec![("female", self.female), ("foreign", self.foreign)];
        if let Some(t) = &self.tilt {
            singles.push(("tilt.female", t.female));
            singles.push(("tilt.foreign", t.foreign));
        }
        for (name, p) in singles {
            if !(0.0..=1.0).contains(&p) {
                return Err(SynthError::InvalidConfig(format!("{name} must lie in [0, 1]")));
            }
        }
        Ok(())
    }

    /// Worker-level traits; the tilt applies when `potential` (absent when
    /// censored, read as long) reaches its cutoff.
    pub(crate) fn draw_worker(&self, rng: &mut SynthRng, potential: Option<u32>) -> WorkerTraits {
        let (female, foreign) = match &self.tilt {
            Some(t) if potential.is_none_or(|p| p >= t.min_potential) => (t.female, t.foreign),
            _ => (self.female, self.foreign),
        };
        WorkerTraits {
            sex: if open01(rng) < female { Sex::Female } else { Sex::Male },
            foreign: open01(rng) < foreign,
            education: Education::ALL[categorical(rng, &self.education)],
            first_job_age: AgeClass::ALL[categorical(rng, &self.first_job_age)],
        }
    }

    pub(crate) fn draw_job(&self, rng: &mut SynthRng) -> (Region, Sector) {
        let area = Area::ALL[categorical(rng, &self.area)];
        let in_area = || Region::ALL.iter().copied().filter(move |r| r.area() == area);
        let n = in_area().count();
        let region = in_area()
            .nth((open01(rng) * n as f64) as usize % n)
            .expect("every area has regions");
        (region, Sector::ALL[categorical(rng, &self.sector)])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkerTraits {
    pub sex: Sex,
    pub foreign: bool,
    pub education: Education,
    pub first_job_age: AgeClass,
}

impl WorkerTraits {
    pub fn profile(&self, region: Region, sector: Sector) -> CovariateProfile {
        CovariateProfile {
            sex: self.sex,
            foreign: self.foreign,
            education: self.education,
            first_job_age: self.first_job_age,
            sector,
            area: region.area(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DgpConfig {
    /// Workers in a simulated corpus.
    pub n_workers: usize,
    /// Mean number of spells opening per day, for window-level simulation.
    pub entries_per_day: f64,
    /// Days covered by the simulated data.
    pub period: DateRange,
    /// Spells start up to this many days before `period` so that long
    /// durations are populated from its first day.
    pub pre_span_days: u32,
    pub threshold: u32,
    /// Additive lift of the daily hire hazard at eligible durations while the
    /// policy runs.
    pub true_itt: f64,
    /// Per-year replacements of `true_itt`.
    pub itt_by_year: Vec<(i32, f64)>,
    /// Days the targeted policy is active.
    pub policy: DateRange,
    pub baseline: BaselineHazard,
    /// Multipliers of the baseline by calendar month, January first.
    pub seasonal_profile: [f64; 12],
    pub covariates: CovariateMixture,
    /// Hazard removed from the durations just below the threshold while the
    /// policy runs.
    pub displacement_intensity: f64,
    /// Hazard moved from just below to just above the threshold while the
    /// policy runs.
    pub postponement_intensity: f64,
    /// Durations on each side affected by the two distortions.
    pub distortion_width: u32,
    /// Additive level shift of the hazard of every duration from `time_jump_date`.
    pub time_jump: f64,
    pub time_jump_date: NaiveDate,
    /// Probabilities of the contract type of a hire, in [`ContractType::ALL`] order.
    pub hire_types: [f64; 4],
    /// Job lengths are uniform on this inclusive range of days.
    pub job_length: (u32, u32),
    pub seed: u64,
}

impl Default for DgpConfig {
    fn default() -> Self {
        Self {
            n_workers: 100_000,
            entries_per_day: 100.0,
            period: DateRange {
                start: ymd(2010, 1, 1),
                end: ymd(2015, 12, 31),
            },
            pre_span_days: 800,
            threshold: THRESHOLD_DAYS,
            true_itt: 0.0,
            itt_by_year: Vec::new(),
            policy: DateRange {
                start: ymd(1991, 1, 1),
                end: ymd(2014, 12, 31),
            },
            baseline: BaselineHazard::default(),
            seasonal_profile: [1.10, 1.00, 1.05, 1.00, 0.95, 0.95, 0.90, 0.75, 1.15, 1.10, 1.05, 1.00],
            covariates: CovariateMixture::default(),
            displacement_intensity: 0.0,
            postponement_intensity: 0.0,
            distortion_width: 15,
            time_jump: 0.0,
            time_jump_date: ymd(2015, 1, 1),
            hire_types: [0.25, 0.65, 0.02, 0.08],
            job_length: (90, 720),
            seed: 20_150_101,
        }
    }
}

impl DgpConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidConfig(m.into()));
        if self.seasonal_profile.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return bad("seasonal multipliers must be positive");
        }
        if self.displacement_intensity < 0.0 || self.postponement_intensity < 0.0 {
            return bad("distortion intensities must be non-negative");
        }
        if !(self.entries_per_day >= 0.0) {
            return bad("entries_per_day must be non-negative");
        }
        if self.job_length.0 == 0 || self.job_length.0 > self.job_length.1 {
            return bad("job_length must be a non-empty range of positive lengths");
        }
        if self.threshold < 2 {
            return bad("threshold must exceed one day");
        }
        check_probs("hire_types", &self.hire_types)?;
        self.covariates.validate()
    }

    pub fn itt_in_year(&self, year: i32) -> f64 {
        self.itt_by_year
            .iter()
            .find(|(y, _)| *y == year)
            .map_or(self.true_itt, |&(_, v)| v)
    }

    /// Mean ITT over the policy days of `days`; the truth the duration RDD targets.
    pub fn mean_itt(&self, days: &DateRange) -> f64 {
        let (mut s, mut n) = (0.0, 0usize);
        for d in days.iter() {
            n += 1;
            if self.policy.contains(d) {
                s += self.itt_in_year(chrono::Datelike::year(&d));
            }
        }
        if n == 0 {
            0.0
        } else {
            s / n as f64
        }
    }

    pub(crate) fn draw_hire_type(&self, rng: &mut SynthRng) -> ContractType {
        ContractType::ALL[categorical(rng, &self.hire_types)]
    }

    /// First day a spell may open.
    pub fn first_entry(&self) -> NaiveDate {
        self.period.start - chrono::Days::new(self.pre_span_days as u64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_validates() {
        DgpConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        let mut c = DgpConfig::default();
        c.seasonal_profile[3] = 0.0;
        assert!(c.validate().is_err());
        let c = DgpConfig {
            displacement_intensity: -1e-6,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let mut c = DgpConfig::default();
        c.covariates.sector = [0.5, 0.5, 0.5, 0.0];
        assert!(c.validate().is_err());
    }

    #[test]
    fn yearly_itt() {
        let c = DgpConfig {
            true_itt: 3e-5,
            itt_by_year: vec![(2012, 1e-5)],
            ..Default::default()
        };
        assert_eq!(c.itt_in_year(2011), 3e-5);
        assert_eq!(c.itt_in_year(2012), 1e-5);
        let m = c.mean_itt(&DateRange::years(2014, 2015));
        assert!((m - 3e-5 * 365.0 / 730.0).abs() < 1e-15);
    }
}
