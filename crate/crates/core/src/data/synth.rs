use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use chrono::{NaiveDate, TimeDelta};
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{Column, CsvSchema, SeriesTable};
use crate::error::{Error, Result};
use crate::nn::SeededRng;

/// Deterministic synthetic fixtures. `Sine`, `Linear` and `Constant` share
/// the Beijing column layout; `Multistation` uses [`CsvSchema::multistation`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthKind {
    Sine,
    Linear,
    Constant,
    Multistation,
}

impl SynthKind {
    pub fn schema(self, stations: usize) -> CsvSchema {
        match self {
            SynthKind::Multistation => CsvSchema::multistation(stations),
            _ => CsvSchema::beijing(),
        }
    }
}

impl fmt::Display for SynthKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SynthKind::Sine => "sine",
            SynthKind::Linear => "linear",
            SynthKind::Constant => "constant",
            SynthKind::Multistation => "multistation",
        })
    }
}

impl FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sine" => Ok(SynthKind::Sine),
            "linear" => Ok(SynthKind::Linear),
            "constant" => Ok(SynthKind::Constant),
            "multistation" => Ok(SynthKind::Multistation),
            _ => Err(Error::config("kind", format!("unknown synthetic kind `{s}`"))),
        }
    }
}

fn wave(t: f64, period: f64, phase: f64) -> f64 {
    (TAU * t / period + phase).sin()
}

/// Hourly table starting 2010-01-01 00:00.
pub fn synth_table(kind: SynthKind, rows: usize, stations: usize, seed: u64) -> Result<SeriesTable> {
    if rows == 0 {
        return Err(Error::config("rows", "must be >= 1"));
    }
    let mut rng = SeededRng::seed_from_u64(seed);
    let mut noise = |sd: f64| Normal::new(0.0, sd).map(|n| n.sample(&mut rng)).unwrap_or(0.0);
    let t0 = NaiveDate::from_ymd_opt(2010, 1, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .ok_or_else(|| Error::Empty("start timestamp".into()))?;
    let timestamps = (0..rows).map(|i| t0 + TimeDelta::hours(i as i64)).collect();
    let ts: Vec<f64> = (0..rows).map(|i| i as f64).collect();
    let schema = kind.schema(stations);

    let columns = match kind {
        SynthKind::Multistation => {
            if stations == 0 {
                return Err(Error::config("stations", "must be >= 1"));
            }
            // station k runs 3k hours ahead of station 0
            let mut cols = Vec::with_capacity(3 * stations);
            for k in 0..stations {
                let lead = 3.0 * k as f64;
                let mut pm = Vec::with_capacity(rows);
                let mut temp = Vec::with_capacity(rows);
                let mut wind = Vec::with_capacity(rows);
                for &t in &ts {
                    pm.push(80.0 + 40.0 * wave(t + lead, 24.0, 0.0) + 20.0 * wave(t + lead, 96.0, 0.5) + noise(3.0));
                    temp.push(10.0 + 6.0 * wave(t, 24.0, -1.0) + noise(1.0));
                    wind.push(3.0 + 2.0 * wave(t + lead, 48.0, 1.5) + noise(0.5));
                }
                cols.push(Column::numeric(format!("s{k}_pm25"), pm));
                cols.push(Column::numeric(format!("s{k}_temp"), temp));
                cols.push(Column::numeric(format!("s{k}_wind"), wind));
            }
            cols
        }
        SynthKind::Sine => {
            let mut pm = Vec::with_capacity(rows);
            let mut dewp = Vec::with_capacity(rows);
            let mut temp = Vec::with_capacity(rows);
            let mut iws = Vec::with_capacity(rows);
            for &t in &ts {
                pm.push(100.0 + 60.0 * wave(t, 24.0, 0.0) + 25.0 * wave(t, 168.0, 1.0) + noise(5.0));
                dewp.push(-5.0 + 10.0 * wave(t, 24.0, -1.0) + noise(1.0));
                temp.push(12.0 + 8.0 * wave(t, 24.0, -2.0) + noise(1.0));
                iws.push(5.0 + 4.0 * wave(t, 36.0, 0.3) + noise(0.5));
            }
            let cbwd = (0..rows).map(|i| ["NE", "NW", "SE", "cv"][(i / 6) % 4].to_string()).collect();
            beijing_columns(pm, dewp, temp, ts.iter().map(|&t| 1015.0 + 5.0 * wave(t, 168.0, 0.0)).collect(), cbwd, iws)
        }
        SynthKind::Linear => beijing_columns(
            ts.iter().map(|t| 20.0 + 0.05 * t).collect(),
            ts.iter().map(|t| -10.0 + 0.01 * t).collect(),
            ts.iter().map(|t| 0.02 * t).collect(),
            vec![1010.0; rows],
            vec!["NW".into(); rows],
            ts.iter().map(|t| 1.0 + 0.001 * t).collect(),
        ),
        SynthKind::Constant => beijing_columns(
            vec![42.0; rows],
            vec![-3.0; rows],
            vec![10.0; rows],
            vec![1015.0; rows],
            vec!["cv".into(); rows],
            vec![2.0; rows],
        ),
    };
    Ok(SeriesTable {
        timestamps,
        columns,
        target: schema.target,
        stations: schema.stations,
        scale: None,
    })
}

fn beijing_columns(pm: Vec<f64>, dewp: Vec<f64>, temp: Vec<f64>, pres: Vec<f64>, cbwd: Vec<String>, iws: Vec<f64>) -> Vec<Column> {
    let n = pm.len();
    vec![
        Column::numeric("pm2.5", pm),
        Column::numeric("DEWP", dewp),
        Column::numeric("TEMP", temp),
        Column::numeric("PRES", pres),
        Column::categorical("cbwd", cbwd),
        Column::numeric("Iws", iws),
        Column::numeric("Is", vec![0.0; n]),
        Column::numeric("Ir", vec![0.0; n]),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{parse_series_csv, write_series_csv};

    #[test]
    fn same_seed_same_table() {
        let a = synth_table(SynthKind::Multistation, 50, 3, 7).unwrap();
        let b = synth_table(SynthKind::Multistation, 50, 3, 7).unwrap();
        let c = synth_table(SynthKind::Multistation, 50, 3, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.columns.len(), 9);
        assert_eq!(a.branch_layout().len(), 3);
    }

    #[test]
    fn fixtures_round_trip_through_csv() {
        for kind in [SynthKind::Sine, SynthKind::Linear, SynthKind::Constant, SynthKind::Multistation] {
            let t = synth_table(kind, 30, 2, 1).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("s.csv");
            write_series_csv(&t, &p, &kind.schema(2)).unwrap();
            let back = parse_series_csv(std::fs::File::open(&p).unwrap(), &kind.schema(2)).unwrap();
            assert_eq!(back, t, "{kind}");
        }
    }

    #[test]
    fn parse_kind() {
        assert_eq!("sine".parse::<SynthKind>().unwrap(), SynthKind::Sine);
        assert!("square".parse::<SynthKind>().is_err());
    }
}
