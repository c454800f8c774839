use std::io::{Read, Write};

use crate::compare::{AverageRow, ComparisonRow, HireRecord};
use crate::SubsidyError;

/// Input accepted by the comparison: per-hire wages or precomputed averages,
/// told apart by the CSV header.
#[derive(Debug, Clone, PartialEq)]
pub enum SubsidyInput {
    Hires(Vec<HireRecord>),
    Averages(Vec<AverageRow>),
}

pub fn read_input<R: Read>(reader: R) -> Result<SubsidyInput, SubsidyError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let has = |name: &str| headers.iter().any(|h| h == name);
    if has("wage") && has("firm_class") && has("year") {
        let recs = rdr.deserialize().collect::<Result<Vec<HireRecord>, _>>()?;
        Ok(SubsidyInput::Hires(recs))
    } else if has("avg_407") && has("avg_190") && has("year") {
        let rows = rdr.deserialize().collect::<Result<Vec<AverageRow>, _>>()?;
        Ok(SubsidyInput::Averages(rows))
    } else {
        Err(SubsidyError::UnknownFormat(headers.iter().collect::<Vec<_>>().join(",")))
    }
}

/// Writes `year,n_hires,avg_407,avg_190,rel_diff` with the ratio at three decimals
/// in a separate rounded column.
pub fn write_comparison_csv<W: Write>(rows: &[ComparisonRow], writer: W) -> Result<(), SubsidyError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["year", "n_hires", "avg_407", "avg_190", "rel_diff", "rel_diff_3dp"])?;
    for r in rows {
        w.write_record([
            r.year.to_string(),
            r.n_hires.map(|n| n.to_string()).unwrap_or_default(),
            format!("{:.2}", r.avg_407),
            format!("{:.2}", r.avg_190),
            format!("{}", r.rel_diff),
            format!("{:.3}", r.rel_diff),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::FirmClass;

    #[test]
    fn detects_hires() {
        let src = "year,wage,firm_class\n2012,18000,regular\n2012, 21000 ,mezzogiorno\n";
        match read_input(src.as_bytes()).unwrap() {
            SubsidyInput::Hires(h) => {
                assert_eq!(h.len(), 2);
                assert_eq!(h[1].firm_class, FirmClass::Mezzogiorno);
                assert_eq!(h[1].wage, 21000.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn detects_averages() {
        let src = "year,avg_407,avg_190\n2013,5722,5378\n";
        assert!(matches!(read_input(src.as_bytes()).unwrap(), SubsidyInput::Averages(v) if v.len() == 1));
    }

    #[test]
    fn rejects_unknown_header() {
        assert!(matches!(read_input("a,b\n1,2\n".as_bytes()), Err(SubsidyError::UnknownFormat(_))));
        assert!(read_input("year,wage,firm_class\n2012,1,coop\n".as_bytes()).is_err());
    }

    #[test]
    fn writes_rounded_ratio() {
        let rows = crate::compare_averages(&[AverageRow { year: 2010, avg_407: 7023.0, avg_190: 5726.0 }]).unwrap();
        let mut buf = Vec::new();
        write_comparison_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().nth(1).unwrap().ends_with(",0.227"));
    }
}
