//! Reading and writing statistic vectors as CSV.
//!
//! The file format is `index,statistic,margin` with 1-based indices. When
//! reading, the margin column may be omitted if a common margin is supplied.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::hypothesis::{HypothesisShape, StatisticVector};

pub fn write_statistics<W: Write>(sv: &StatisticVector, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", "statistic", "margin"])?;
    for (j, (t, d)) in sv.stats().iter().zip(sv.margins()).enumerate() {
        w.write_record([(j + 1).to_string(), format!("{t:?}"), format!("{d:?}")])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads statistics from a CSV with a `statistic` column and, unless
/// `common_margin` is given, a `margin` column. An `index` column is
/// optional; rows are taken in file order.
pub fn read_statistics<R: Read>(
    input: R,
    shape: HypothesisShape,
    common_margin: Option<f64>,
) -> Result<StatisticVector> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let stat_col = find("statistic")
        .ok_or_else(|| Error::Data("missing column 'statistic' in header".into()))?;
    let margin_col = match common_margin {
        Some(_) => None,
        None => Some(find("margin").ok_or_else(|| {
            Error::Data("missing column 'margin' in header (or pass a common margin)".into())
        })?),
    };

    let mut stats = Vec::new();
    let mut margins = Vec::new();
    for (k, record) in rdr.records().enumerate() {
        let record = record?;
        let line = k + 2;
        let field = |col: usize, name: &str| -> Result<f64> {
            let raw = record.get(col).unwrap_or("");
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::Data(format!(
                    "line {line}, column '{name}': cannot parse {raw:?} as a finite number"
                ))),
            }
        };
        stats.push(field(stat_col, "statistic")?);
        margins.push(match (margin_col, common_margin) {
            (Some(c), _) => field(c, "margin")?,
            (None, Some(d)) => d,
            (None, None) => unreachable!(),
        });
    }
    StatisticVector::new(stats, margins, shape)
}
