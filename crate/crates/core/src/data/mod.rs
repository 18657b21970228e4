//! Hourly series ingestion and the preprocessing chain that turns a CSV file
//! into supervised windows.
//!
//! `load → impute → encode → split → fit scale (train rows) → apply → window`

mod io;
mod prep;
mod split;
mod synth;
mod window;

use std::collections::BTreeMap;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{load_series_csv, parse_series_csv, write_series_csv};
pub use prep::{encode_categoricals, impute_column_mean, minmax_apply, minmax_fit, minmax_invert, ColumnScale, ScaleParams};
pub use split::{split_chronological, SplitRanges, SplitSpec};
pub use synth::{synth_table, SynthKind};
pub use window::{latest_window, make_windows, make_windows_in, SupervisedWindows};

/// Column layout of an hourly CSV file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    /// Row counter column ignored on load (e.g. `No`).
    #[serde(default)]
    pub index_column: Option<String>,
    /// Year, month, day and hour column names.
    pub time_columns: [String; 4],
    /// Feature columns in channel order; must include the target.
    pub features: Vec<String>,
    pub target: String,
    /// Category orderings for label-encoded columns.
    #[serde(default)]
    pub categoricals: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub one_hot: bool,
    /// Per-station feature groups; one model branch per group.
    #[serde(default)]
    pub stations: Option<Vec<Vec<String>>>,
    #[serde(default = "default_na")]
    pub na_token: String,
    /// Longest run of absent hours repaired by forward filling; 0 rejects gaps.
    #[serde(default)]
    pub max_gap_fill: usize,
}

fn default_na() -> String {
    "NA".into()
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

impl CsvSchema {
    /// Header of the public Beijing PM2.5 file with its eight variables.
    pub fn beijing() -> Self {
        let mut categoricals = BTreeMap::new();
        categoricals.insert("cbwd".into(), strings(&["NE", "NW", "SE", "cv"]));
        Self {
            index_column: Some("No".into()),
            time_columns: ["year", "month", "day", "hour"].map(String::from),
            features: strings(&["pm2.5", "DEWP", "TEMP", "PRES", "cbwd", "Iws", "Is", "Ir"]),
            target: "pm2.5".into(),
            categoricals,
            one_hot: false,
            stations: None,
            na_token: default_na(),
            max_gap_fill: 0,
        }
    }

    /// `s{k}_pm25, s{k}_temp, s{k}_wind` for `k < stations`, grouped per station.
    pub fn multistation(stations: usize) -> Self {
        let groups: Vec<Vec<String>> = (0..stations)
            .map(|k| vec![format!("s{k}_pm25"), format!("s{k}_temp"), format!("s{k}_wind")])
            .collect();
        Self {
            index_column: None,
            time_columns: ["year", "month", "day", "hour"].map(String::from),
            features: groups.concat(),
            target: "s0_pm25".into(),
            categoricals: BTreeMap::new(),
            one_hot: false,
            stations: Some(groups),
            na_token: default_na(),
            max_gap_fill: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.features.is_empty() {
            return Err(Error::config("schema.features", "must not be empty"));
        }
        if !self.features.contains(&self.target) {
            return Err(Error::config("schema.target", format!("`{}` is not a feature", self.target)));
        }
        for name in self.categoricals.keys() {
            if !self.features.contains(name) {
                return Err(Error::config("schema.categoricals", format!("`{name}` is not a feature")));
            }
        }
        if let Some(groups) = &self.stations {
            let width = groups.first().map_or(0, Vec::len);
            if width == 0 || groups.iter().any(|g| g.len() != width) {
                return Err(Error::config("schema.stations", "groups must be non-empty and equally wide"));
            }
            for name in groups.iter().flatten() {
                if !self.features.contains(name) {
                    return Err(Error::config("schema.stations", format!("`{name}` is not a feature")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Column {
    pub name: String,
    pub values: Vec<f64>,
    pub missing: Vec<bool>,
    /// Raw tokens of a categorical column that is not encoded yet.
    pub labels: Option<Vec<String>>,
}

impl Column {
    pub fn numeric(name: impl Into<String>, values: Vec<f64>) -> Self {
        let missing = vec![false; values.len()];
        Self {
            name: name.into(),
            values,
            missing,
            labels: None,
        }
    }

    pub fn categorical(name: impl Into<String>, labels: Vec<String>) -> Self {
        Self {
            name: name.into(),
            values: vec![0.0; labels.len()],
            missing: vec![false; labels.len()],
            labels: Some(labels),
        }
    }
}

/// Hourly multivariate series with a per-cell missing mask.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesTable {
    pub timestamps: Vec<NaiveDateTime>,
    pub columns: Vec<Column>,
    pub target: String,
    pub stations: Option<Vec<Vec<String>>>,
    /// Set once the table has been min-max scaled.
    pub scale: Option<ScaleParams>,
}

impl SeriesTable {
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.columns
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::UnknownColumn(name.into()))
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn has_missing(&self) -> bool {
        self.columns.iter().any(|c| c.missing.iter().any(|&m| m))
    }

    /// Every cell is a finite, present, encoded number.
    pub fn is_model_ready(&self) -> bool {
        self.columns
            .iter()
            .all(|c| c.labels.is_none() && !c.missing.contains(&true) && c.values.iter().all(|v| v.is_finite()))
    }

    /// Column groups forming model branches; one group of all columns when
    /// no station grouping exists.
    pub fn branch_layout(&self) -> Vec<Vec<String>> {
        match &self.stations {
            Some(g) => g.clone(),
            None => vec![self.columns.iter().map(|c| c.name.clone()).collect()],
        }
    }

    /// `(branch, channel)` of the target column.
    pub fn target_position(&self) -> Result<(usize, usize)> {
        self.branch_layout()
            .iter()
            .enumerate()
            .find_map(|(b, g)| g.iter().position(|c| *c == self.target).map(|ch| (b, ch)))
            .ok_or_else(|| Error::UnknownColumn(self.target.clone()))
    }
}
