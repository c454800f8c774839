use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::cells::{CellPanel, DurationRange};
use super::PanelError;
use ltu_core::dates::DateRange;

/// Daily hire rate pooled over a duration window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailySeries {
    pub window: DurationRange,
    pub days: Vec<NaiveDate>,
    /// Total hires over total group size, per day.
    pub y: Vec<f64>,
    pub group_size: Vec<u64>,
    pub hires: Vec<u64>,
    /// Days left out because the window held nobody.
    pub empty_days: Vec<NaiveDate>,
}

impl DailySeries {
    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }

    /// Keeps the observations whose day satisfies `keep`.
    pub fn filter(&self, keep: impl Fn(NaiveDate) -> bool) -> DailySeries {
        let mut out = DailySeries {
            window: self.window,
            days: Vec::new(),
            y: Vec::new(),
            group_size: Vec::new(),
            hires: Vec::new(),
            empty_days: self.empty_days.iter().copied().filter(|&d| keep(d)).collect(),
        };
        for k in 0..self.len() {
            if keep(self.days[k]) {
                out.days.push(self.days[k]);
                out.y.push(self.y[k]);
                out.group_size.push(self.group_size[k]);
                out.hires.push(self.hires[k]);
            }
        }
        out
    }
}

/// Collapses the cells of `window` to one observation per day of `days`.
pub fn daily_collapse(panel: &CellPanel, window: DurationRange, days: DateRange) -> Result<DailySeries, PanelError> {
    if !panel.durations().covers(&window) {
        return Err(PanelError::EmptyRange(format!(
            "window {window} outside panel durations {}",
            panel.durations()
        )));
    }
    let Some(span) = panel.days().intersect(&days) else {
        return Err(PanelError::EmptyRange(format!("days {days} outside panel {}", panel.days())));
    };
    let first = panel.day_offset(span.start).expect("inside panel");
    let mut out = DailySeries {
        window,
        days: Vec::with_capacity(span.len()),
        y: Vec::with_capacity(span.len()),
        group_size: Vec::with_capacity(span.len()),
        hires: Vec::with_capacity(span.len()),
        empty_days: Vec::new(),
    };
    for d in first..first + span.len() {
        let (mut n, mut h) = (0u64, 0u64);
        for i in window.iter() {
            n += panel.group_size(i, d) as u64;
            h += panel.hires(i, d) as u64;
        }
        let day = panel.days().day(d);
        if n == 0 {
            out.empty_days.push(day);
            continue;
        }
        out.days.push(day);
        out.y.push(h as f64 / n as f64);
        out.group_size.push(n);
        out.hires.push(h);
    }
    if out.days.is_empty() {
        return Err(PanelError::EmptyWindow {
            lo: window.lo,
            hi: window.hi,
        });
    }
    Ok(out)
}
