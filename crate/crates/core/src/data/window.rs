use std::ops::Range;

use crate::data::{ScaleParams, SeriesTable};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Model-ready supervision pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct SupervisedWindows {
    /// N×n×L×D.
    pub inputs: Tensor,
    /// N×H of the target column.
    pub targets: Tensor,
    /// Table row of each window's first target step.
    pub target_rows: Vec<usize>,
    pub scale: Option<ScaleParams>,
    pub lookup: usize,
    pub horizon: usize,
    /// `(branch, channel)` of the target inside `inputs`.
    pub target_position: (usize, usize),
}

impl SupervisedWindows {
    pub fn len(&self) -> usize {
        self.target_rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target_rows.is_empty()
    }
}

/// All `T − L − H + 1` windows of the table.
pub fn make_windows(table: &SeriesTable, lookup: usize, horizon: usize) -> Result<SupervisedWindows> {
    make_windows_in(table, lookup, horizon, 0..table.len())
}

/// Windows whose targets lie inside `targets`. Inputs may reach back before
/// `targets.start` for context, never before row 0.
pub fn make_windows_in(
    table: &SeriesTable,
    lookup: usize,
    horizon: usize,
    targets: Range<usize>,
) -> Result<SupervisedWindows> {
    if lookup == 0 || horizon == 0 {
        return Err(Error::config("lookup/horizon", "must be >= 1"));
    }
    if targets.end > table.len() {
        return Err(Error::Split(format!("target rows {targets:?} exceed table length {}", table.len())));
    }
    let first = targets.start.max(lookup) - lookup;
    let count = (targets.end + 1).saturating_sub(first + lookup + horizon);
    if count == 0 {
        return Err(Error::TooShort {
            required: lookup + horizon,
            available: targets.end - first,
        });
    }
    if !table.is_model_ready() {
        return Err(Error::NonFinite("table has missing or unencoded cells".into()));
    }

    let layout = table.branch_layout();
    let width = layout[0].len();
    if layout.iter().any(|g| g.len() != width) {
        return Err(Error::config("stations", "groups must be equally wide"));
    }
    let cols = layout
        .iter()
        .map(|g| g.iter().map(|name| table.column(name).map(|c| &c.values[..])).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let target = &table.column(&table.target)?.values;

    let n = layout.len();
    let mut inputs = Vec::with_capacity(count * n * lookup * width);
    let mut outputs = Vec::with_capacity(count * horizon);
    let mut target_rows = Vec::with_capacity(count);
    for t in first..first + count {
        for group in &cols {
            for step in t..t + lookup {
                inputs.extend(group.iter().map(|c| c[step]));
            }
        }
        outputs.extend_from_slice(&target[t + lookup..t + lookup + horizon]);
        target_rows.push(t + lookup);
    }
    Ok(SupervisedWindows {
        inputs: Tensor::from_vec(&[count, n, lookup, width], inputs)?,
        targets: Tensor::from_vec(&[count, horizon], outputs)?,
        target_rows,
        scale: table.scale.clone(),
        lookup,
        horizon,
        target_position: table.target_position()?,
    })
}

/// The most recent `lookup` rows as a single 1×n×L×D input.
pub fn latest_window(table: &SeriesTable, lookup: usize) -> Result<Tensor> {
    if lookup == 0 {
        return Err(Error::config("lookup", "must be >= 1"));
    }
    if table.len() < lookup {
        return Err(Error::TooShort {
            required: lookup,
            available: table.len(),
        });
    }
    if !table.is_model_ready() {
        return Err(Error::NonFinite("table has missing or unencoded cells".into()));
    }
    let layout = table.branch_layout();
    let width = layout[0].len();
    let start = table.len() - lookup;
    let mut data = Vec::with_capacity(layout.len() * lookup * width);
    for group in &layout {
        let cols = group.iter().map(|n| table.column(n)).collect::<Result<Vec<_>>>()?;
        for step in start..table.len() {
            data.extend(cols.iter().map(|c| c.values[step]));
        }
    }
    Tensor::from_vec(&[1, layout.len(), lookup, width], data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Column;

    fn ramp(n: usize) -> SeriesTable {
        let t0 = chrono::NaiveDate::from_ymd_opt(2010, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
        SeriesTable {
            timestamps: (0..n).map(|i| t0 + chrono::TimeDelta::hours(i as i64)).collect(),
            columns: vec![
                Column::numeric("y", (0..n).map(|i| i as f64).collect()),
                Column::numeric("z", (0..n).map(|i| -(i as f64)).collect()),
            ],
            target: "y".into(),
            stations: None,
            scale: None,
        }
    }

    #[test]
    fn latest_window_is_last_rows() {
        let x = latest_window(&ramp(6), 2).unwrap();
        assert_eq!(x.data(), &[4.0, -4.0, 5.0, -5.0]);
        assert!(latest_window(&ramp(1), 2).is_err());
    }

    #[test]
    fn counts() {
        assert_eq!(make_windows(&ramp(5), 2, 1).unwrap().len(), 3);
        assert_eq!(make_windows(&ramp(5), 2, 2).unwrap().len(), 2);
        let err = make_windows(&ramp(5), 4, 2).unwrap_err();
        assert!(err.to_string().contains("at least 6"), "{err}");
    }

    #[test]
    fn contents_follow_time() {
        let w = make_windows(&ramp(6), 2, 2).unwrap();
        assert_eq!(w.inputs.shape(), &[3, 1, 2, 2]);
        assert_eq!(&w.inputs.data()[..4], &[0.0, -0.0, 1.0, -1.0]);
        assert_eq!(&w.targets.data()[..2], &[2.0, 3.0]);
        assert_eq!(w.target_rows, vec![2, 3, 4]);
    }

    #[test]
    fn evaluation_windows_reach_back() {
        let w = make_windows_in(&ramp(20), 3, 2, 10..20).unwrap();
        assert_eq!(w.target_rows.first(), Some(&10));
        assert_eq!(w.len(), 9);
        assert_eq!(w.inputs.data()[0], 7.0);
    }

    #[test]
    fn stations_become_branches() {
        let mut t = ramp(6);
        t.stations = Some(vec![vec!["y".into()], vec!["z".into()]]);
        let w = make_windows(&t, 2, 1).unwrap();
        assert_eq!(w.inputs.shape(), &[4, 2, 2, 1]);
        assert_eq!(&w.inputs.data()[..4], &[0.0, 1.0, -0.0, -1.0]);
        assert_eq!(w.target_position, (0, 0));
    }
}
