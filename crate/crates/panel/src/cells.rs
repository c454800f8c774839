use chrono::{Datelike, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::records::{Area, ContractType, Covariate, CovariateFamily, Region, N_COVARIATES};
use super::spells::Spell;
use super::PanelError;
use ltu_core::dates::DateRange;

/// Inclusive range of spell durations in days, starting at 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DurationRange {
    pub lo: u32,
    pub hi: u32,
}

impl DurationRange {
    pub fn new(lo: u32, hi: u32) -> Option<Self> {
        (lo >= 1 && lo <= hi).then_some(Self { lo, hi })
    }

    pub fn len(&self) -> usize {
        (self.hi - self.lo) as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, i: u32) -> bool {
        self.lo <= i && i <= self.hi
    }

    pub fn covers(&self, other: &DurationRange) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn iter(&self) -> std::ops::RangeInclusive<u32> {
        self.lo..=self.hi
    }
}

impl std::fmt::Display for DurationRange {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// Which spells enter the panel, by region of the last job.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionFilter {
    #[default]
    All,
    Mezzogiorno,
    CenterNorth,
    Areas(Vec<Area>),
    Regions(Vec<Region>),
}

impl RegionFilter {
    pub fn admits(&self, region: Region) -> bool {
        match self {
            RegionFilter::All => true,
            RegionFilter::Mezzogiorno => region.is_mezzogiorno(),
            RegionFilter::CenterNorth => !region.is_mezzogiorno(),
            RegionFilter::Areas(areas) => areas.contains(&region.area()),
            RegionFilter::Regions(regions) => regions.contains(&region),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellFilters {
    pub regions: RegionFilter,
    /// Contract types that count as a hire; `None` counts every type. A
    /// worker whose next contract is of another type still leaves the group.
    pub hire_types: Option<Vec<ContractType>>,
}

impl CellFilters {
    pub fn counts_hire(&self, t: ContractType) -> bool {
        self.hire_types.as_ref().is_none_or(|v| v.contains(&t))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregateSpec {
    pub days: DateRange,
    pub durations: DurationRange,
    pub filters: CellFilters,
    pub track_covariates: bool,
}

/// One `(i, j)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitCell {
    pub duration: u32,
    pub day: NaiveDate,
    pub group_size: u32,
    pub hires: u32,
    /// Shares in [`Covariate::ALL`] order; absent for empty cells or when
    /// covariates were not tracked.
    pub covariate_shares: Option<Vec<f64>>,
}

impl UnitCell {
    pub fn share(&self) -> Option<f64> {
        (self.group_size > 0).then(|| self.hires as f64 / self.group_size as f64)
    }
}

/// Dense (duration × day) panel. Storage is day-major: the cells of one day
/// are contiguous, ordered by duration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellPanel {
    days: DateRange,
    durations: DurationRange,
    group_size: Vec<u32>,
    hires: Vec<u32>,
    covariates: Option<Vec<u32>>,
    out_of_range: Vec<u64>,
    filters: CellFilters,
}

impl CellPanel {
    /// Assembles a panel from raw counts, checking every cell invariant.
    pub fn from_counts(
        days: DateRange,
        durations: DurationRange,
        group_size: Vec<u32>,
        hires: Vec<u32>,
        covariates: Option<Vec<u32>>,
        filters: CellFilters,
    ) -> Result<Self, PanelError> {
        let n = days.len() * durations.len();
        let bad = |reason: String| PanelError::MalformedCells { line: 0, reason };
        if group_size.len() != n || hires.len() != n {
            return Err(bad(format!("expected {n} cells")));
        }
        if let Some(k) = (0..n).find(|&k| hires[k] > group_size[k]) {
            return Err(bad(format!("cell {k}: hires exceed group size")));
        }
        if let Some(cov) = &covariates {
            if cov.len() != n * N_COVARIATES {
                return Err(bad("covariate block has the wrong length".into()));
            }
            for k in 0..n {
                let counts = &cov[k * N_COVARIATES..(k + 1) * N_COVARIATES];
                for fam in CovariateFamily::ALL {
                    let s: u32 = counts[fam.span()].iter().sum();
                    if s != group_size[k] {
                        return Err(bad(format!("cell {k}: {fam:?} counts do not sum to the group size")));
                    }
                }
            }
        }
        Ok(Self {
            out_of_range: vec![0; days.len()],
            days,
            durations,
            group_size,
            hires,
            covariates,
            filters,
        })
    }

    pub fn days(&self) -> DateRange {
        self.days
    }

    pub fn durations(&self) -> DurationRange {
        self.durations
    }

    pub fn filters(&self) -> &CellFilters {
        &self.filters
    }

    pub fn n_days(&self) -> usize {
        self.days.len()
    }

    pub fn n_cells(&self) -> usize {
        self.group_size.len()
    }

    pub fn has_covariates(&self) -> bool {
        self.covariates.is_some()
    }

    /// Day offset of `day`, if inside the panel.
    pub fn day_offset(&self, day: NaiveDate) -> Option<usize> {
        self.days.offset(day)
    }

    #[inline]
    pub fn index(&self, i: u32, day: usize) -> usize {
        debug_assert!(self.durations.contains(i) && day < self.n_days());
        day * self.durations.len() + (i - self.durations.lo) as usize
    }

    #[inline]
    pub fn group_size(&self, i: u32, day: usize) -> u32 {
        self.group_size[self.index(i, day)]
    }

    #[inline]
    pub fn hires(&self, i: u32, day: usize) -> u32 {
        self.hires[self.index(i, day)]
    }

    pub fn share(&self, i: u32, day: usize) -> Option<f64> {
        let k = self.index(i, day);
        (self.group_size[k] > 0).then(|| self.hires[k] as f64 / self.group_size[k] as f64)
    }

    pub fn covariate_count(&self, i: u32, day: usize, c: Covariate) -> Option<u32> {
        let k = self.index(i, day);
        self.covariates.as_ref().map(|v| v[k * N_COVARIATES + c.index()])
    }

    pub fn covariate_share(&self, i: u32, day: usize, c: Covariate) -> Option<f64> {
        let n = self.group_size(i, day);
        if n == 0 {
            return None;
        }
        self.covariate_count(i, day, c).map(|m| m as f64 / n as f64)
    }

    /// Workers in a spell on `day` whose duration is outside the panel range.
    pub fn out_of_range(&self, day: usize) -> u64 {
        self.out_of_range[day]
    }

    pub fn out_of_range_total(&self) -> u64 {
        self.out_of_range.iter().sum()
    }

    pub fn n_empty(&self) -> usize {
        self.group_size.iter().filter(|&&n| n == 0).count()
    }

    pub fn cell(&self, i: u32, day: usize) -> UnitCell {
        let k = self.index(i, day);
        let n = self.group_size[k];
        let covariate_shares = match &self.covariates {
            Some(v) if n > 0 => Some(
                v[k * N_COVARIATES..(k + 1) * N_COVARIATES]
                    .iter()
                    .map(|&m| m as f64 / n as f64)
                    .collect(),
            ),
            _ => None,
        };
        UnitCell {
            duration: i,
            day: self.days.day(day),
            group_size: n,
            hires: self.hires[k],
            covariate_shares,
        }
    }

    /// Every cell, day-major.
    pub fn cells(&self) -> impl Iterator<Item = UnitCell> + '_ {
        (0..self.n_days()).flat_map(move |d| self.durations.iter().map(move |i| self.cell(i, d)))
    }

    /// Sub-panel over narrower ranges. Dropped durations are folded into the
    /// out-of-range remainder.
    pub fn restrict(&self, durations: DurationRange, days: DateRange) -> Result<CellPanel, PanelError> {
        if !self.durations.covers(&durations) {
            return Err(PanelError::EmptyRange(format!(
                "durations {durations} outside panel {}",
                self.durations
            )));
        }
        let (Some(d0), Some(_)) = (self.days.offset(days.start), self.days.offset(days.end)) else {
            return Err(PanelError::EmptyRange(format!("days {days} outside panel {}", self.days)));
        };
        let nd = days.len();
        let nk = durations.len();
        let mut group_size = Vec::with_capacity(nd * nk);
        let mut hires = Vec::with_capacity(nd * nk);
        let mut covariates = self.covariates.as_ref().map(|_| Vec::with_capacity(nd * nk * N_COVARIATES));
        let mut out_of_range = Vec::with_capacity(nd);
        for d in d0..d0 + nd {
            let mut outside = self.out_of_range[d];
            for i in self.durations.iter() {
                let k = self.index(i, d);
                if durations.contains(i) {
                    group_size.push(self.group_size[k]);
                    hires.push(self.hires[k]);
                    if let (Some(dst), Some(src)) = (covariates.as_mut(), self.covariates.as_ref()) {
                        dst.extend_from_slice(&src[k * N_COVARIATES..(k + 1) * N_COVARIATES]);
                    }
                } else {
                    outside += self.group_size[k] as u64;
                }
            }
            out_of_range.push(outside);
        }
        Ok(CellPanel {
            days,
            durations,
            group_size,
            hires,
            covariates,
            out_of_range,
            filters: self.filters.clone(),
        })
    }
}

struct Accum {
    group_size: Vec<u32>,
    hires: Vec<u32>,
    covariates: Option<Vec<u32>>,
    /// Difference array of all in-spell workers per day.
    in_spell: Vec<i64>,
}

impl Accum {
    fn new(n_days: usize, n_dur: usize, covariates: bool) -> Self {
        let n = n_days * n_dur;
        Self {
            group_size: vec![0; n],
            hires: vec![0; n],
            covariates: covariates.then(|| vec![0; n * N_COVARIATES]),
            in_spell: vec![0; n_days + 1],
        }
    }

    fn merge(mut self, other: Accum) -> Accum {
        add_into(&mut self.group_size, &other.group_size);
        add_into(&mut self.hires, &other.hires);
        if let (Some(a), Some(b)) = (self.covariates.as_mut(), other.covariates.as_ref()) {
            add_into(a, b);
        }
        for (a, b) in self.in_spell.iter_mut().zip(&other.in_spell) {
            *a += b;
        }
        self
    }
}

fn add_into(a: &mut [u32], b: &[u32]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
}

fn day_number(d: NaiveDate) -> i64 {
    d.num_days_from_ce() as i64
}

/// Aggregates spells into one cell per `(i, j)` of the requested ranges.
///
/// Spells are summed in parallel; every merge is an integer sum, so the panel
/// does not depend on the schedule or on the order of `spells`.
pub fn aggregate_cells(spells: &[Spell], spec: &AggregateSpec) -> CellPanel {
    let n_days = spec.days.len();
    let dur = spec.durations;
    let n_dur = dur.len();
    let d0 = day_number(spec.days.start);
    let d1 = day_number(spec.days.end);
    let filters = &spec.filters;

    let acc = spells
        .par_iter()
        .filter(|s| filters.regions.admits(s.region))
        .fold(
            || Accum::new(n_days, n_dur, spec.track_covariates),
            |mut acc, s| {
                let e = day_number(s.last_end);
                let stop = s.next_start.map_or(d1, |h| day_number(h).min(d1));
                let first = (e + 1).max(d0);
                if first > stop {
                    return acc;
                }
                acc.in_spell[(first - d0) as usize] += 1;
                acc.in_spell[(stop - d0 + 1) as usize] -= 1;

                let i_lo = (first - e).max(dur.lo as i64);
                let i_hi = (stop - e).min(dur.hi as i64);
                let cats = s.profile.categories();
                for i in i_lo..=i_hi {
                    let k = (e + i - d0) as usize * n_dur + (i - dur.lo as i64) as usize;
                    acc.group_size[k] += 1;
                    if let Some(cov) = acc.covariates.as_mut() {
                        for c in cats {
                            cov[k * N_COVARIATES + c.index()] += 1;
                        }
                    }
                }
                if let (Some(h), Some(t)) = (s.next_start, s.next_type) {
                    let h = day_number(h);
                    let i = h - e;
                    if h <= d1 && h >= d0 && dur.contains(i as u32) && filters.counts_hire(t) {
                        let k = (h - d0) as usize * n_dur + (i - dur.lo as i64) as usize;
                        acc.hires[k] += 1;
                    }
                }
                acc
            },
        )
        .reduce(|| Accum::new(n_days, n_dur, spec.track_covariates), Accum::merge);

    let mut out_of_range = Vec::with_capacity(n_days);
    let mut running = 0i64;
    for d in 0..n_days {
        running += acc.in_spell[d];
        let inside: u64 = acc.group_size[d * n_dur..(d + 1) * n_dur].iter().map(|&n| n as u64).sum();
        out_of_range.push(running as u64 - inside);
    }
    CellPanel {
        days: spec.days,
        durations: dur,
        group_size: acc.group_size,
        hires: acc.hires,
        covariates: acc.covariates,
        out_of_range,
        filters: spec.filters.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ltu_core::dates::ymd;
    use crate::records::*;

    fn profile() -> CovariateProfile {
        CovariateProfile {
            sex: Sex::Female,
            foreign: false,
            education: Education::Elementary,
            first_job_age: AgeClass::From25To29,
            sector: Sector::Industry,
            area: Area::Center,
        }
    }

    fn spell(end: NaiveDate, next: Option<NaiveDate>) -> Spell {
        Spell {
            worker: 0,
            last_end: end,
            next_start: next,
            next_type: next.map(|_| ContractType::Permanent),
            region: Region::Lazio,
            profile: profile(),
        }
    }

    #[test]
    fn cell_counts_match_the_convention() {
        let spells = vec![spell(ymd(2010, 6, 30), Some(ymd(2010, 7, 11)))];
        let spec = AggregateSpec {
            days: DateRange::new(ymd(2010, 7, 1), ymd(2010, 7, 31)).unwrap(),
            durations: DurationRange::new(5, 12).unwrap(),
            filters: CellFilters::default(),
            track_covariates: true,
        };
        let p = aggregate_cells(&spells, &spec);
        assert_eq!(p.n_cells(), 31 * 8);
        let d = |day| p.day_offset(ymd(2010, 7, day)).unwrap();
        assert_eq!(p.group_size(5, d(5)), 1);
        assert_eq!(p.group_size(11, d(11)), 1);
        assert_eq!(p.hires(11, d(11)), 1);
        assert_eq!(p.share(11, d(11)), Some(1.0));
        assert_eq!(p.group_size(6, d(5)), 0);
        assert_eq!(p.out_of_range(d(4)), 1);
        assert_eq!(p.out_of_range(d(12)), 0);
        assert_eq!(p.covariate_share(7, d(7), Covariate::Female), Some(1.0));
        assert_eq!(p.covariate_share(7, d(7), Covariate::Male), Some(0.0));
    }

    #[test]
    fn hire_type_filter_keeps_group_but_drops_hire() {
        let spells = vec![spell(ymd(2010, 6, 30), Some(ymd(2010, 7, 11)))];
        let spec = AggregateSpec {
            days: DateRange::new(ymd(2010, 7, 1), ymd(2010, 7, 31)).unwrap(),
            durations: DurationRange::new(1, 20).unwrap(),
            filters: CellFilters {
                hire_types: Some(vec![ContractType::Temporary]),
                ..Default::default()
            },
            track_covariates: false,
        };
        let p = aggregate_cells(&spells, &spec);
        let d = p.day_offset(ymd(2010, 7, 11)).unwrap();
        assert_eq!(p.group_size(11, d), 1);
        assert_eq!(p.hires(11, d), 0);
        assert_eq!(p.group_size(12, d + 1), 0);
    }

    #[test]
    fn table_two_cell_count() {
        let spec = AggregateSpec {
            days: DateRange::years(2011, 2014),
            durations: DurationRange::new(714, 744).unwrap(),
            filters: CellFilters::default(),
            track_covariates: false,
        };
        assert_eq!(aggregate_cells(&[], &spec).n_cells(), 45_291);
    }

    #[test]
    fn restrict_moves_dropped_durations_out_of_range() {
        let spells = vec![
            spell(ymd(2010, 6, 30), None),
            spell(ymd(2010, 6, 25), Some(ymd(2010, 7, 20))),
        ];
        let spec = AggregateSpec {
            days: DateRange::new(ymd(2010, 7, 1), ymd(2010, 7, 31)).unwrap(),
            durations: DurationRange::new(1, 40).unwrap(),
            filters: CellFilters::default(),
            track_covariates: true,
        };
        let p = aggregate_cells(&spells, &spec);
        let narrow = p
            .restrict(
                DurationRange::new(10, 20).unwrap(),
                DateRange::new(ymd(2010, 7, 5), ymd(2010, 7, 25)).unwrap(),
            )
            .unwrap();
        for d in 0..narrow.n_days() {
            let day = narrow.days().day(d);
            let total = spells.iter().filter(|s| s.duration_on(day).is_some()).count() as u64;
            let inside: u64 = narrow.durations().iter().map(|i| narrow.group_size(i, d) as u64).sum();
            assert_eq!(inside + narrow.out_of_range(d), total);
        }
    }
}
