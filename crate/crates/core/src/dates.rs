use std::fmt;

use chrono::{Datelike, Days, NaiveDate};
use serde::{Deserialize, Serialize};

/// Inclusive range of calendar days.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DateRange {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateRange {
    /// Returns `None` when `end < start`.
    pub fn new(start: NaiveDate, end: NaiveDate) -> Option<Self> {
        (start <= end).then_some(Self { start, end })
    }

    pub fn years(first: i32, last: i32) -> Self {
        Self {
            start: ymd(first, 1, 1),
            end: ymd(last, 12, 31),
        }
    }

    pub fn len(&self) -> usize {
        (self.end - self.start).num_days() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, d: NaiveDate) -> bool {
        self.start <= d && d <= self.end
    }

    /// Position of `d` counted from `start`, if inside.
    pub fn offset(&self, d: NaiveDate) -> Option<usize> {
        self.contains(d)
            .then(|| (d - self.start).num_days() as usize)
    }

    pub fn day(&self, offset: usize) -> NaiveDate {
        self.start + Days::new(offset as u64)
    }

    pub fn intersect(&self, other: &DateRange) -> Option<DateRange> {
        DateRange::new(self.start.max(other.start), self.end.min(other.end))
    }

    pub fn iter(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.start.iter_days().take(self.len())
    }
}

impl fmt::Display for DateRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

pub fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid calendar date")
}

/// `(year, month)` of a day.
pub fn year_month(d: NaiveDate) -> (i32, u32) {
    (d.year(), d.month())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lengths() {
        assert_eq!(DateRange::years(2011, 2014).len(), 1461);
        assert_eq!(DateRange::years(2010, 2015).len(), 2191);
        let r = DateRange::new(ymd(2010, 6, 30), ymd(2010, 7, 11)).unwrap();
        assert_eq!(r.len(), 12);
        assert_eq!(r.offset(ymd(2010, 7, 11)), Some(11));
        assert_eq!(r.day(11), ymd(2010, 7, 11));
        assert!(DateRange::new(ymd(2010, 1, 2), ymd(2010, 1, 1)).is_none());
    }
}
