use std::collections::{BTreeMap, HashMap};
use std::ops::Range;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::data::{Column, SeriesTable};
use crate::error::{Error, Result};

/// Fills missing numeric cells with the column mean of the present cells.
///
/// An all-missing column becomes zeros (with a warning). Missing labels of a
/// not-yet-encoded categorical column take the most frequent label.
pub fn impute_column_mean(table: &SeriesTable) -> SeriesTable {
    let mut out = table.clone();
    for col in &mut out.columns {
        let present = col.missing.iter().filter(|&&m| !m).count();
        if present == col.missing.len() {
            continue;
        }
        if present == 0 {
            warn!("column `{}` has no observed values; filling with 0", col.name);
        }
        match &mut col.labels {
            Some(labels) => {
                let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
                for (l, &m) in labels.iter().zip(&col.missing) {
                    if !m {
                        *counts.entry(l).or_default() += 1;
                    }
                }
                // BTreeMap order makes ties resolve to the smallest label
                let mode = counts
                    .iter()
                    .fold(None, |best: Option<(&str, usize)>, (&l, &c)| match best {
                        Some((_, bc)) if bc >= c => best,
                        _ => Some((l, c)),
                    })
                    .map(|(l, _)| l.to_string());
                match mode {
                    Some(mode) => {
                        for (l, m) in labels.iter_mut().zip(&mut col.missing) {
                            if *m {
                                *l = mode.clone();
                                *m = false;
                            }
                        }
                    }
                    None => {
                        // nothing to take a mode of: encode as zero directly
                        col.labels = None;
                        col.values.iter_mut().for_each(|v| *v = 0.0);
                        col.missing.iter_mut().for_each(|m| *m = false);
                    }
                }
            }
            None => {
                let mean = if present == 0 {
                    0.0
                } else {
                    col.values
                        .iter()
                        .zip(&col.missing)
                        .filter(|(_, &m)| !m)
                        .map(|(v, _)| v)
                        .sum::<f64>()
                        / present as f64
                };
                for (v, m) in col.values.iter_mut().zip(&mut col.missing) {
                    if *m {
                        *v = mean;
                        *m = false;
                    }
                }
            }
        }
    }
    out
}

/// Replaces each categorical column by the index of its label in a fixed
/// ordering, or by one indicator column per category when `one_hot`.
pub fn encode_categoricals(
    table: &SeriesTable,
    orderings: &BTreeMap<String, Vec<String>>,
    one_hot: bool,
) -> Result<SeriesTable> {
    let mut columns = Vec::with_capacity(table.columns.len());
    let mut renamed: HashMap<String, Vec<String>> = HashMap::new();
    for col in &table.columns {
        let Some(labels) = &col.labels else {
            columns.push(col.clone());
            continue;
        };
        let order = orderings
            .get(&col.name)
            .ok_or_else(|| Error::config("categoricals", format!("no ordering for `{}`", col.name)))?;
        let index: HashMap<&str, usize> = order.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
        let codes = labels
            .iter()
            .map(|l| {
                index.get(l.as_str()).copied().ok_or_else(|| Error::UnseenCategory {
                    column: col.name.clone(),
                    category: l.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if one_hot {
            let names: Vec<String> = order.iter().map(|c| format!("{}={c}", col.name)).collect();
            for (k, name) in names.iter().enumerate() {
                let mut c = Column::numeric(name.clone(), codes.iter().map(|&i| f64::from(u8::from(i == k))).collect());
                c.missing = col.missing.clone();
                columns.push(c);
            }
            renamed.insert(col.name.clone(), names);
        } else {
            let mut c = Column::numeric(col.name.clone(), codes.iter().map(|&i| i as f64).collect());
            c.missing = col.missing.clone();
            columns.push(c);
        }
    }
    let stations = table.stations.as_ref().map(|groups| {
        groups
            .iter()
            .map(|g| {
                g.iter()
                    .flat_map(|n| renamed.get(n).cloned().unwrap_or_else(|| vec![n.clone()]))
                    .collect()
            })
            .collect()
    });
    Ok(SeriesTable {
        timestamps: table.timestamps.clone(),
        columns,
        target: table.target.clone(),
        stations,
        scale: table.scale.clone(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnScale {
    pub name: String,
    pub min: f64,
    pub max: f64,
}

impl ColumnScale {
    pub fn apply(&self, x: f64) -> f64 {
        let span = self.max - self.min;
        if span == 0.0 {
            0.0
        } else {
            (x - self.min) / span
        }
    }

    pub fn invert(&self, x: f64) -> f64 {
        x * (self.max - self.min) + self.min
    }
}

/// Per-column min-max parameters, in table column order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleParams {
    pub columns: Vec<ColumnScale>,
}

impl ScaleParams {
    pub fn get(&self, column: &str) -> Result<&ColumnScale> {
        self.columns
            .iter()
            .find(|c| c.name == column)
            .ok_or_else(|| Error::UnknownColumn(column.into()))
    }
}

/// Column extremes over `rows` only, so held-out rows never inform scaling.
pub fn minmax_fit(table: &SeriesTable, rows: Range<usize>) -> Result<ScaleParams> {
    if rows.is_empty() {
        return Err(Error::Empty("min-max fit range".into()));
    }
    if rows.end > table.len() {
        return Err(Error::Split(format!("fit rows {rows:?} exceed table length {}", table.len())));
    }
    let mut columns = Vec::with_capacity(table.columns.len());
    for col in &table.columns {
        if col.labels.is_some() || col.missing[rows.clone()].contains(&true) {
            return Err(Error::NonFinite(format!("column `{}` is not imputed and encoded", col.name)));
        }
        let slice = &col.values[rows.clone()];
        let min = slice.iter().copied().fold(f64::INFINITY, f64::min);
        let max = slice.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !min.is_finite() || !max.is_finite() {
            return Err(Error::NonFinite(format!("column `{}`", col.name)));
        }
        columns.push(ColumnScale {
            name: col.name.clone(),
            min,
            max,
        });
    }
    Ok(ScaleParams { columns })
}

/// `x' = (x − min)/(max − min)`, unclipped; constant columns map to 0.
pub fn minmax_apply(table: &SeriesTable, scale: &ScaleParams) -> Result<SeriesTable> {
    let names: Vec<&str> = scale.columns.iter().map(|c| c.name.as_str()).collect();
    if names != table.column_names() {
        return Err(Error::shape("minmax_apply columns", format!("{names:?}"), format!("{:?}", table.column_names())));
    }
    let mut out = table.clone();
    for (col, s) in out.columns.iter_mut().zip(&scale.columns) {
        col.values.iter_mut().for_each(|v| *v = s.apply(*v));
    }
    out.scale = Some(scale.clone());
    Ok(out)
}

/// Maps scaled values of `column` back to original units.
pub fn minmax_invert(values: &[f64], scale: &ScaleParams, column: &str) -> Result<Vec<f64>> {
    let s = scale.get(column)?;
    Ok(values.iter().map(|&v| s.invert(v)).collect())
}
