use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::rates::{credit_190, credit_407, FirmClass, SubsidyRates};
use crate::SubsidyError;

/// One hire with its annual gross wage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HireRecord {
    pub year: i32,
    pub wage: f64,
    pub firm_class: FirmClass,
}

/// Yearly averages already computed elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AverageRow {
    pub year: i32,
    pub avg_407: f64,
    pub avg_190: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub year: i32,
    /// Number of hires behind the averages, when computed from records.
    pub n_hires: Option<usize>,
    pub avg_407: f64,
    pub avg_190: f64,
    /// `(avg_407 - avg_190) / avg_190`.
    pub rel_diff: f64,
}

fn row(year: i32, n_hires: Option<usize>, avg_407: f64, avg_190: f64) -> Result<ComparisonRow, SubsidyError> {
    if avg_190 == 0.0 {
        return Err(SubsidyError::ZeroAverage(year));
    }
    Ok(ComparisonRow {
        year,
        n_hires,
        avg_407,
        avg_190,
        rel_diff: (avg_407 - avg_190) / avg_190,
    })
}

/// Averages both credits over the same hires per year. An empty `years`
/// means every year present in `records`.
pub fn compare_yearly(
    records: &[HireRecord],
    years: &[i32],
    rates: &SubsidyRates,
) -> Result<Vec<ComparisonRow>, SubsidyError> {
    rates.validate()?;
    let mut sums: BTreeMap<i32, (usize, f64, f64)> = BTreeMap::new();
    for r in records {
        let a = credit_407(r.wage, r.firm_class, rates)?;
        let b = credit_190(r.wage, rates)?;
        let e = sums.entry(r.year).or_insert((0, 0.0, 0.0));
        e.0 += 1;
        e.1 += a;
        e.2 += b;
    }
    let wanted: Vec<i32> = if years.is_empty() {
        sums.keys().copied().collect()
    } else {
        years.to_vec()
    };
    wanted
        .into_iter()
        .map(|y| {
            let &(n, a, b) = sums.get(&y).ok_or(SubsidyError::EmptyYear(y))?;
            row(y, Some(n), a / n as f64, b / n as f64)
        })
        .collect()
}

/// Relative difference for averages supplied directly.
pub fn compare_averages(rows: &[AverageRow]) -> Result<Vec<ComparisonRow>, SubsidyError> {
    rows.iter().map(|r| row(r.year, None, r.avg_407, r.avg_190)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_regular_hire() {
        let recs = [HireRecord { year: 2012, wage: 20_000.0, firm_class: FirmClass::Regular }];
        let out = compare_yearly(&recs, &[], &SubsidyRates::default()).unwrap();
        assert_eq!(out.len(), 1);
        assert!((out[0].rel_diff - (0.5 * 0.327 / 0.298 - 1.0)).abs() < 1e-12);
        assert!((out[0].rel_diff + 0.451).abs() < 1e-3);
    }

    #[test]
    fn missing_year_is_an_error() {
        let recs = [HireRecord { year: 2012, wage: 1.0, firm_class: FirmClass::Artisan }];
        let err = compare_yearly(&recs, &[2012, 2013], &SubsidyRates::default()).unwrap_err();
        assert!(matches!(err, SubsidyError::EmptyYear(2013)));
    }

    #[test]
    fn averages_mode() {
        let out = compare_averages(&[AverageRow { year: 2011, avg_407: 5816.0, avg_190: 5479.0 }]).unwrap();
        assert!((out[0].rel_diff - 337.0 / 5479.0).abs() < 1e-15);
        assert!(compare_averages(&[AverageRow { year: 1, avg_407: 1.0, avg_190: 0.0 }]).is_err());
    }
}
