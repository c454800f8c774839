use std::cmp::Ordering;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::records::{ContractRecord, ContractType, CovariateProfile, Region};
use super::PanelError;
use ltu_core::dates::DateRange;

/// A non-employment spell between two employment episodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Spell {
    /// Index into [`SpellSet::worker_ids`].
    pub worker: u32,
    /// Last day of the episode that opened the spell.
    pub last_end: NaiveDate,
    /// First day of the next contract; `None` when no further contract
    /// starts inside the observation window.
    pub next_start: Option<NaiveDate>,
    pub next_type: Option<ContractType>,
    /// Region of the last job.
    pub region: Region,
    pub profile: CovariateProfile,
}

impl Spell {
    /// Duration `i` on day `day`, if the worker belongs to a group that day.
    /// The hire day itself is included.
    pub fn duration_on(&self, day: NaiveDate) -> Option<u32> {
        if day <= self.last_end || self.next_start.is_some_and(|s| day > s) {
            return None;
        }
        Some((day - self.last_end).num_days() as u32)
    }

    /// Days without any contract that fall inside `window`.
    pub fn nonemployed_days(&self, window: &DateRange) -> i64 {
        let first = self.last_end.succ_opt().expect("date in range").max(window.start);
        let last = match self.next_start {
            Some(s) => s.pred_opt().expect("date in range").min(window.end),
            None => window.end,
        };
        ((last - first).num_days() + 1).max(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpellSet {
    pub window: DateRange,
    pub worker_ids: Vec<String>,
    pub spells: Vec<Spell>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpellOptions {
    /// Whether a parasubordinate contract counts as employment. When false
    /// such contracts are ignored altogether.
    pub parasubordinate_ends_spell: bool,
    /// Trust the input order (grouped by worker, ascending start date) and
    /// fail on violations instead of sorting.
    pub require_sorted: bool,
}

impl Default for SpellOptions {
    fn default() -> Self {
        Self {
            parasubordinate_ends_spell: true,
            require_sorted: false,
        }
    }
}

fn end_key(end: Option<NaiveDate>) -> NaiveDate {
    end.unwrap_or(NaiveDate::MAX)
}

/// Builds the non-employment spells observed inside `window`.
///
/// Overlapping contracts of one worker are merged into a single episode
/// before the gaps are extracted. Contracts ending before the window or
/// starting after it are not observed.
pub fn build_spells(
    records: &[ContractRecord],
    window: DateRange,
    opts: &SpellOptions,
) -> Result<SpellSet, PanelError> {
    let mut idx: Vec<usize> = (0..records.len())
        .filter(|&k| {
            let r = &records[k];
            (opts.parasubordinate_ends_spell || r.contract_type != ContractType::Parasubordinate)
                && r.start_date <= window.end
                && end_key(r.end_date) >= window.start
        })
        .collect();

    if opts.require_sorted {
        for w in idx.windows(2) {
            let (a, b) = (&records[w[0]], &records[w[1]]);
            if a.worker_id == b.worker_id && b.start_date < a.start_date {
                return Err(PanelError::UnsortedInput {
                    worker: b.worker_id.clone(),
                });
            }
        }
    } else {
        idx.sort_by(|&a, &b| {
            let (ra, rb) = (&records[a], &records[b]);
            ra.worker_id
                .cmp(&rb.worker_id)
                .then(ra.start_date.cmp(&rb.start_date))
                .then(end_key(ra.end_date).cmp(&end_key(rb.end_date)))
                .then(a.cmp(&b))
        });
    }

    let mut worker_ids = Vec::new();
    let mut spells = Vec::new();
    let mut start = 0;
    while start < idx.len() {
        let id = &records[idx[start]].worker_id;
        let mut stop = start + 1;
        while stop < idx.len() && &records[idx[stop]].worker_id == id {
            stop += 1;
        }
        if opts.require_sorted && worker_ids.iter().any(|w: &String| w == id) {
            return Err(PanelError::UnsortedInput { worker: id.clone() });
        }
        let worker = worker_ids.len() as u32;
        worker_ids.push(id.clone());
        worker_spells(records, &idx[start..stop], worker, window, &mut spells);
        start = stop;
    }
    Ok(SpellSet {
        window,
        worker_ids,
        spells,
    })
}

struct Episode {
    /// Contract that opened the episode.
    first: usize,
    /// Contract with the latest end date; it describes the last job.
    last: usize,
    end: Option<NaiveDate>,
}

fn worker_spells(
    records: &[ContractRecord],
    contracts: &[usize],
    worker: u32,
    window: DateRange,
    out: &mut Vec<Spell>,
) {
    let mut episodes: Vec<Episode> = Vec::new();
    for &k in contracts {
        let r = &records[k];
        match episodes.last_mut() {
            Some(ep) if ep.end.is_none_or(|e| r.start_date <= e) => {
                if end_key(r.end_date).cmp(&end_key(ep.end)) != Ordering::Less {
                    ep.end = r.end_date;
                    ep.last = k;
                }
            }
            _ => episodes.push(Episode {
                first: k,
                last: k,
                end: r.end_date,
            }),
        }
    }

    for (n, ep) in episodes.iter().enumerate() {
        let Some(end) = ep.end else { break };
        if end >= window.end {
            break;
        }
        let next = episodes.get(n + 1).map(|e| &records[e.first]);
        let last = &records[ep.last];
        out.push(Spell {
            worker,
            last_end: end,
            next_start: next.map(|r| r.start_date),
            next_type: next.map(|r| r.contract_type),
            region: last.region,
            profile: last.profile(),
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ltu_core::dates::ymd;
    use crate::records::*;

    fn contract(worker: &str, start: NaiveDate, end: Option<NaiveDate>) -> ContractRecord {
        ContractRecord {
            worker_id: worker.into(),
            firm_id: "f".into(),
            start_date: start,
            end_date: end,
            contract_type: ContractType::Temporary,
            region: Region::Lazio,
            sector: Sector::Services,
            sex: Sex::Female,
            education: Education::UpperSecondary,
            first_job_age: AgeClass::From20To24,
            foreign: false,
        }
    }

    #[test]
    fn single_gap_convention() {
        let recs = vec![
            contract("a", ymd(2009, 1, 1), Some(ymd(2010, 6, 30))),
            contract("a", ymd(2010, 7, 11), None),
        ];
        let set = build_spells(&recs, DateRange::years(2008, 2015), &SpellOptions::default()).unwrap();
        assert_eq!(set.spells.len(), 1);
        let s = set.spells[0];
        assert_eq!(s.duration_on(ymd(2010, 6, 30)), None);
        assert_eq!(s.duration_on(ymd(2010, 7, 1)), Some(1));
        assert_eq!(s.duration_on(ymd(2010, 7, 10)), Some(10));
        assert_eq!(s.duration_on(ymd(2010, 7, 11)), Some(11));
        assert_eq!(s.duration_on(ymd(2010, 7, 12)), None);
        assert_eq!(s.nonemployed_days(&set.window), 10);
    }

    #[test]
    fn overlapping_contracts_merge() {
        let recs = vec![
            contract("a", ymd(2010, 3, 1), Some(ymd(2010, 9, 30))),
            contract("a", ymd(2010, 1, 1), Some(ymd(2010, 6, 30))),
        ];
        let set = build_spells(&recs, DateRange::years(2008, 2015), &SpellOptions::default()).unwrap();
        assert_eq!(set.spells.len(), 1);
        assert_eq!(set.spells[0].last_end, ymd(2010, 9, 30));
        assert_eq!(set.spells[0].next_start, None);
    }

    #[test]
    fn unsorted_input_is_rejected_on_request() {
        let recs = vec![
            contract("a", ymd(2010, 3, 1), Some(ymd(2010, 9, 30))),
            contract("a", ymd(2010, 1, 1), Some(ymd(2010, 2, 1))),
        ];
        let opts = SpellOptions {
            require_sorted: true,
            ..Default::default()
        };
        assert!(matches!(
            build_spells(&recs, DateRange::years(2008, 2015), &opts),
            Err(PanelError::UnsortedInput { .. })
        ));
    }

    #[test]
    fn ongoing_contract_opens_no_spell_and_window_clips() {
        let recs = vec![
            contract("a", ymd(2007, 1, 1), Some(ymd(2007, 6, 30))),
            contract("a", ymd(2009, 1, 1), None),
            contract("b", ymd(2010, 1, 1), Some(ymd(2016, 2, 1))),
        ];
        let set = build_spells(&recs, DateRange::years(2008, 2015), &SpellOptions::default()).unwrap();
        assert!(set.spells.is_empty());
    }

    #[test]
    fn parasubordinate_switch() {
        let mut recs = vec![
            contract("a", ymd(2009, 1, 1), Some(ymd(2009, 12, 31))),
            contract("a", ymd(2010, 3, 1), Some(ymd(2010, 4, 30))),
            contract("a", ymd(2011, 1, 1), None),
        ];
        recs[1].contract_type = ContractType::Parasubordinate;
        let w = DateRange::years(2008, 2015);
        let with = build_spells(&recs, w, &SpellOptions::default()).unwrap();
        assert_eq!(with.spells.len(), 2);
        assert_eq!(with.spells[0].next_type, Some(ContractType::Parasubordinate));
        let opts = SpellOptions {
            parasubordinate_ends_spell: false,
            ..Default::default()
        };
        let without = build_spells(&recs, w, &opts).unwrap();
        assert_eq!(without.spells.len(), 1);
        assert_eq!(without.spells[0].next_start, Some(ymd(2011, 1, 1)));
    }
}
