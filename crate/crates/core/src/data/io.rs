use std::io::Read;
use std::path::Path;

use chrono::{Datelike, NaiveDate, NaiveDateTime, TimeDelta, Timelike};

use crate::data::{Column, CsvSchema, SeriesTable};
use crate::error::{Error, Result};

pub fn load_series_csv(path: &Path, schema: &CsvSchema) -> Result<SeriesTable> {
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    parse_series_csv(std::fs::File::open(path)?, schema)
}

fn parse_int(row: usize, column: &str, raw: &str) -> Result<u32> {
    raw.trim().parse().map_err(|_| Error::BadCell {
        row,
        column: column.into(),
        value: raw.into(),
    })
}

fn timestamp(row: usize, ymdh: [u32; 4]) -> Result<NaiveDateTime> {
    let [y, m, d, h] = ymdh;
    NaiveDate::from_ymd_opt(y as i32, m, d)
        .and_then(|date| date.and_hms_opt(h, 0, 0))
        .ok_or_else(|| Error::Timestamp {
            row,
            reason: format!("invalid date {y}-{m}-{d} {h}h"),
        })
}

/// Parses CSV text under `schema`. Rows are numbered from 1 (first data line).
pub fn parse_series_csv<R: Read>(reader: R, schema: &CsvSchema) -> Result<SeriesTable> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::HeaderMismatch(name.into()))
    };
    if let Some(ix) = &schema.index_column {
        find(ix)?;
    }
    let time_ix = schema
        .time_columns
        .iter()
        .map(|n| find(n))
        .collect::<Result<Vec<_>>>()?;
    let feat_ix = schema.features.iter().map(|n| find(n)).collect::<Result<Vec<_>>>()?;

    let mut timestamps = Vec::new();
    let mut columns: Vec<Column> = schema
        .features
        .iter()
        .map(|name| Column {
            name: name.clone(),
            values: Vec::new(),
            missing: Vec::new(),
            labels: schema.categoricals.contains_key(name).then(Vec::new),
        })
        .collect();

    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record?;
        if record.len() != header.len() {
            return Err(Error::BadRow {
                row,
                reason: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        let mut ymdh = [0u32; 4];
        for (k, &ix) in time_ix.iter().enumerate() {
            ymdh[k] = parse_int(row, &schema.time_columns[k], &record[ix])?;
        }
        timestamps.push(timestamp(row, ymdh)?);
        for (col, &ix) in columns.iter_mut().zip(&feat_ix) {
            let raw = record[ix].trim();
            let missing = raw == schema.na_token || raw.is_empty();
            col.missing.push(missing);
            match &mut col.labels {
                Some(labels) => {
                    labels.push(if missing { String::new() } else { raw.to_string() });
                    col.values.push(0.0);
                }
                None if missing => col.values.push(f64::NAN),
                None => col.values.push(raw.parse().map_err(|_| Error::BadCell {
                    row,
                    column: col.name.clone(),
                    value: raw.into(),
                })?),
            }
        }
    }

    let mut table = SeriesTable {
        timestamps,
        columns,
        target: schema.target.clone(),
        stations: schema.stations.clone(),
        scale: None,
    };
    repair_gaps(&mut table, schema.max_gap_fill)?;
    Ok(table)
}

/// Enforces strictly hourly timestamps, forward-filling gaps of at most
/// `max_fill` absent hours.
fn repair_gaps(table: &mut SeriesTable, max_fill: usize) -> Result<()> {
    let hour = TimeDelta::hours(1);
    let mut i = 1;
    while i < table.timestamps.len() {
        let (prev, cur) = (table.timestamps[i - 1], table.timestamps[i]);
        if cur - prev == hour {
            i += 1;
            continue;
        }
        if cur <= prev {
            return Err(Error::Timestamp {
                row: i + 1,
                reason: format!("{cur} does not follow {prev}"),
            });
        }
        let absent = ((cur - prev).num_hours() - 1) as usize;
        if (cur - prev).num_minutes() % 60 != 0 || absent > max_fill {
            return Err(Error::Timestamp {
                row: i + 1,
                reason: format!("gap from {prev} to {cur}"),
            });
        }
        for k in 1..=absent {
            table.timestamps.insert(i - 1 + k, prev + hour * k as i32);
            for col in &mut table.columns {
                let (v, m) = (col.values[i - 1], col.missing[i - 1]);
                col.values.insert(i - 1 + k, v);
                col.missing.insert(i - 1 + k, m);
                if let Some(labels) = &mut col.labels {
                    let l = labels[i - 1].clone();
                    labels.insert(i - 1 + k, l);
                }
            }
        }
        i += absent + 1;
    }
    Ok(())
}

/// Writes the table in the same layout it is read from: optional index
/// column, year/month/day/hour, then feature columns; missing cells as `NA`.
pub fn write_series_csv(table: &SeriesTable, path: &Path, schema: &CsvSchema) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<&str> = Vec::new();
    if let Some(ix) = &schema.index_column {
        header.push(ix);
    }
    header.extend(schema.time_columns.iter().map(String::as_str));
    header.extend(table.column_names());
    w.write_record(&header)?;
    for (r, ts) in table.timestamps.iter().enumerate() {
        let mut rec: Vec<String> = Vec::with_capacity(header.len());
        if schema.index_column.is_some() {
            rec.push((r + 1).to_string());
        }
        rec.extend([ts.year() as u32, ts.month(), ts.day(), ts.hour()].map(|v| v.to_string()));
        for c in &table.columns {
            rec.push(if c.missing[r] {
                schema.na_token.clone()
            } else if let Some(labels) = &c.labels {
                labels[r].clone()
            } else {
                c.values[r].to_string()
            });
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
