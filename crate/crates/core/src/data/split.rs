use std::ops::Range;

use chrono::Datelike;
use serde::{Deserialize, Serialize};

use crate::data::SeriesTable;
use crate::error::{Error, Result};

/// How a table is cut into train / validation / test rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitSpec {
    /// Train 2010–2012, validate 2013, test 2014.
    Beijing,
    /// Inclusive calendar-year spans.
    Years {
        train: (i32, i32),
        val: (i32, i32),
        test: (i32, i32),
    },
    Fractions { train: f64, val: f64, test: f64 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRanges {
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
}

impl SplitRanges {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.val.len(), self.test.len())
    }
}

fn year_range(table: &SeriesTable, (from, to): (i32, i32), part: &str) -> Result<Range<usize>> {
    let first = table.timestamps.first().map(|t| t.year());
    let last = table.timestamps.last().map(|t| t.year());
    let (Some(first), Some(last)) = (first, last) else {
        return Err(Error::Split("table is empty".into()));
    };
    if from > to || from < first || to > last {
        return Err(Error::Split(format!(
            "{part} years {from}–{to} outside the data span {first}–{last}"
        )));
    }
    let start = table.timestamps.partition_point(|t| t.year() < from);
    let end = table.timestamps.partition_point(|t| t.year() <= to);
    Ok(start..end)
}

/// Contiguous, disjoint, chronologically ordered row ranges.
pub fn split_chronological(table: &SeriesTable, spec: &SplitSpec) -> Result<SplitRanges> {
    let ranges = match spec {
        SplitSpec::Beijing => {
            return split_chronological(
                table,
                &SplitSpec::Years {
                    train: (2010, 2012),
                    val: (2013, 2013),
                    test: (2014, 2014),
                },
            )
        }
        SplitSpec::Years { train, val, test } => SplitRanges {
            train: year_range(table, *train, "train")?,
            val: year_range(table, *val, "validation")?,
            test: year_range(table, *test, "test")?,
        },
        &SplitSpec::Fractions { train, val, test } => {
            if [train, val, test].iter().any(|f| !(0.0..=1.0).contains(f)) || train + val + test > 1.0 + 1e-9 {
                return Err(Error::Split(format!("fractions ({train}, {val}, {test}) must be in [0, 1] and sum to at most 1")));
            }
            let t = table.len() as f64;
            let a = (t * train).round() as usize;
            let b = (t * (train + val)).round() as usize;
            let c = ((t * (train + val + test)).round() as usize).min(table.len());
            SplitRanges {
                train: 0..a,
                val: a..b,
                test: b..c,
            }
        }
    };
    for (name, r) in [("train", &ranges.train), ("validation", &ranges.val), ("test", &ranges.test)] {
        if r.is_empty() {
            return Err(Error::Split(format!("{name} partition is empty")));
        }
    }
    if ranges.train.end > ranges.val.start || ranges.val.end > ranges.test.start {
        return Err(Error::Split("partitions overlap or are out of order".into()));
    }
    Ok(ranges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_table, SynthKind};

    #[test]
    fn fractions_on_eight_rows() {
        let t = synth_table(SynthKind::Constant, 8, 1, 0).unwrap();
        let r = split_chronological(&t, &SplitSpec::Fractions { train: 0.5, val: 0.25, test: 0.25 }).unwrap();
        assert_eq!(r.sizes(), (4, 2, 2));
        assert!(split_chronological(&t, &SplitSpec::Fractions { train: 0.9, val: 0.1, test: 0.0 }).is_err());
    }

    #[test]
    fn year_boundaries() {
        // 2010-01-01 .. 2011-12-31 23h
        let t = synth_table(SynthKind::Constant, 24 * 730, 1, 0).unwrap();
        let r = split_chronological(
            &t,
            &SplitSpec::Years {
                train: (2010, 2010),
                val: (2011, 2011),
                test: (2012, 2012),
            },
        );
        assert!(r.unwrap_err().to_string().contains("test years"));
        let r = split_chronological(&t, &SplitSpec::Fractions { train: 0.5, val: 0.3, test: 0.2 }).unwrap();
        assert_eq!(r.train.end, r.val.start);
        assert_eq!(r.val.end, r.test.start);
    }
}
