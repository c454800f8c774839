//! Daily hire hazards: a duration-dependent baseline scaled by a monthly
//! profile, plus the policy terms.

use chrono::{Datelike, NaiveDate};
use ltu_core::dates::DateRange;
use serde::{Deserialize, Serialize};

use crate::config::DgpConfig;
use crate::SynthError;

/// Distribution of potential spell lengths: a small mass spread over short
/// spells and the rest spread over `[cutoff - epsilon, f_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixtureSpec {
    pub cutoff: u32,
    pub epsilon: u32,
    pub f_max: u32,
    pub low_mass: f64,
}

impl Default for MixtureSpec {
    fn default() -> Self {
        Self {
            cutoff: 729,
            epsilon: 30,
            f_max: 12_729,
            low_mass: 0.1,
        }
    }
}

impl MixtureSpec {
    fn bounds(&self) -> Result<(f64, f64), SynthError> {
        if self.epsilon >= self.cutoff || self.cutoff - self.epsilon < 2 || self.f_max < self.cutoff {
            return Err(SynthError::InvalidConfig(format!("mixture bounds {self:?}")));
        }
        if !(0.0..1.0).contains(&self.low_mass) {
            return Err(SynthError::InvalidConfig("mixture low_mass must be in [0, 1)".into()));
        }
        let low_len = (self.cutoff - self.epsilon - 1) as f64;
        let high_len = (self.f_max - (self.cutoff - self.epsilon) + 1) as f64;
        Ok((low_len, high_len))
    }

    /// `P(T = i)` for the discrete spell length `T` on `1..=f_max`.
    pub fn pmf(&self, i: u32) -> f64 {
        let (low_len, high_len) = self.bounds().expect("validated mixture");
        if i == 0 || i > self.f_max {
            0.0
        } else if i < self.cutoff - self.epsilon {
            self.low_mass / low_len
        } else {
            (1.0 - self.low_mass) / high_len
        }
    }

    /// `P(T >= i)`.
    pub fn survival(&self, i: u32) -> f64 {
        let (low_len, high_len) = self.bounds().expect("validated mixture");
        let split = self.cutoff - self.epsilon;
        if i <= 1 {
            1.0
        } else if i > self.f_max {
            0.0
        } else if i < split {
            self.low_mass * (split - i) as f64 / low_len + (1.0 - self.low_mass)
        } else {
            (1.0 - self.low_mass) * (self.f_max - i + 1) as f64 / high_len
        }
    }

    pub fn hazard(&self, i: u32) -> f64 {
        let s = self.survival(i);
        if s <= 0.0 {
            1.0
        } else {
            (self.pmf(i) / s).min(1.0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HazardPiece {
    /// First duration the value applies to.
    pub from: u32,
    pub hazard: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineHazard {
    /// Hazard implied by a potential-spell-length mixture, one value per day.
    Mixture(MixtureSpec),
    /// Constant on `[from_k, from_{k+1})`; the last piece extends forever.
    Piecewise(Vec<HazardPiece>),
}

impl Default for BaselineHazard {
    fn default() -> Self {
        BaselineHazard::Mixture(MixtureSpec::default())
    }
}

impl BaselineHazard {
    /// Values for durations `0..=max_duration`; entry 0 is unused.
    pub fn table(&self, max_duration: u32) -> Result<Vec<f64>, SynthError> {
        let mut out = vec![0.0; max_duration as usize + 1];
        match self {
            BaselineHazard::Mixture(m) => {
                m.bounds()?;
                for i in 1..=max_duration {
                    out[i as usize] = m.hazard(i);
                }
            }
            BaselineHazard::Piecewise(pieces) => {
                if pieces.first().is_none_or(|p| p.from != 1) || pieces.windows(2).any(|w| w[0].from >= w[1].from) {
                    return Err(SynthError::InvalidConfig(
                        "hazard pieces must start at duration 1 and increase".into(),
                    ));
                }
                let mut k = 0;
                for i in 1..=max_duration {
                    while k + 1 < pieces.len() && pieces[k + 1].from <= i {
                        k += 1;
                    }
                    out[i as usize] = pieces[k].hazard;
                }
            }
        }
        if out.iter().any(|h| !(0.0..=1.0).contains(h)) {
            return Err(SynthError::InvalidConfig("baseline hazard outside [0, 1]".into()));
        }
        Ok(out)
    }
}

/// Hazards resolved on a fixed day range, ready for the walk.
#[derive(Debug, Clone)]
pub struct HazardModel {
    days: DateRange,
    base: Vec<f64>,
    season: Vec<f64>,
    itt: Vec<f64>,
    policy: Vec<bool>,
    jump: Vec<f64>,
    threshold: u32,
    near_lo: u32,
    post_hi: u32,
    displacement: f64,
    postponement: f64,
}

impl HazardModel {
    pub fn new(cfg: &DgpConfig, days: DateRange, max_duration: u32) -> Result<Self, SynthError> {
        cfg.validate()?;
        let base = cfg.baseline.table(max_duration)?;
        let mut season = Vec::with_capacity(days.len());
        let mut itt = Vec::with_capacity(days.len());
        let mut policy = Vec::with_capacity(days.len());
        let mut jump = Vec::with_capacity(days.len());
        for d in days.iter() {
            let active = cfg.policy.contains(d);
            season.push(cfg.seasonal_profile[d.month0() as usize]);
            itt.push(if active { cfg.itt_in_year(d.year()) } else { 0.0 });
            policy.push(active);
            jump.push(if d >= cfg.time_jump_date { cfg.time_jump } else { 0.0 });
        }
        Ok(Self {
            days,
            base,
            season,
            itt,
            policy,
            jump,
            threshold: cfg.threshold,
            near_lo: cfg.threshold.saturating_sub(cfg.distortion_width),
            post_hi: cfg.threshold + cfg.distortion_width.saturating_sub(1),
            displacement: cfg.displacement_intensity,
            postponement: cfg.postponement_intensity,
        })
    }

    pub fn days(&self) -> DateRange {
        self.days
    }

    pub fn day_index(&self, d: NaiveDate) -> Option<usize> {
        self.days.offset(d)
    }

    fn baseline(&self, i: u32) -> f64 {
        *self.base.get(i as usize).unwrap_or_else(|| self.base.last().expect("non-empty table"))
    }

    /// Hazard without the targeted policy: the potential spell.
    pub fn potential(&self, i: u32, day: usize) -> f64 {
        (self.baseline(i) * self.season[day] + self.jump[day]).clamp(0.0, 1.0)
    }

    /// Hazard with the targeted policy and its distortions.
    pub fn observed(&self, i: u32, day: usize) -> f64 {
        let mut h = self.baseline(i) * self.season[day] + self.jump[day];
        if i >= self.threshold {
            h += self.itt[day];
        }
        if self.policy[day] {
            if (self.near_lo..self.threshold).contains(&i) {
                h -= self.displacement + self.postponement;
            } else if (self.threshold..=self.post_hi).contains(&i) {
                h += self.postponement;
            }
        }
        h.clamp(0.0, 1.0)
    }
}

/// Cumulative-hazard increment of one day.
pub(crate) fn neg_log_survival(h: f64) -> f64 {
    if h >= 1.0 {
        f64::INFINITY
    } else {
        -(-h).ln_1p()
    }
}
