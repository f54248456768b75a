//! Rectangular (supply voltage × frequency) characterization grids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::OperatingPoint;

/// Grid axes. Iteration order is row-major: vsup outer, freq inner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    vsup: Vec<f64>,
    freq: Vec<f64>,
}

impl Grid {
    pub fn new(vsup: Vec<f64>, freq: Vec<f64>) -> Result<Self> {
        check_axis("supply voltage", &vsup)?;
        check_axis("frequency", &freq)?;
        Ok(Grid { vsup, freq })
    }

    pub fn vsup(&self) -> &[f64] {
        &self.vsup
    }

    pub fn freq(&self) -> &[f64] {
        &self.freq
    }

    pub fn len(&self) -> usize {
        self.vsup.len() * self.freq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn op(&self, index: usize) -> OperatingPoint {
        let nf = self.freq.len();
        OperatingPoint {
            vsup: self.vsup[index / nf],
            freq: self.freq[index % nf],
        }
    }

    pub fn ops(&self) -> impl Iterator<Item = OperatingPoint> + '_ {
        (0..self.len()).map(move |i| self.op(i))
    }

    /// Row-major index of `op`, matching axis values to 1e-9 relative.
    pub fn index_of(&self, op: OperatingPoint) -> Option<usize> {
        let i = self.vsup.iter().position(|&v| close(v, op.vsup))?;
        let j = self.freq.iter().position(|&f| close(f, op.freq))?;
        Some(i * self.freq.len() + j)
    }

    /// Index of the frequency axis value closest to `freq`.
    pub fn nearest_freq_index(&self, freq: f64) -> usize {
        self.freq
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - freq).abs().total_cmp(&(b.1 - freq).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }

    /// Median axis frequency (lower median for even counts).
    pub fn median_freq(&self) -> f64 {
        let mut f = self.freq.clone();
        f.sort_by(f64::total_cmp);
        f[(f.len() - 1) / 2]
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

fn check_axis(name: &str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::DegenerateGrid(format!("{name} axis is empty")));
    }
    if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::DegenerateGrid(format!(
            "{name} axis value {v} is not positive"
        )));
    }
    for (i, a) in values.iter().enumerate() {
        if values[i + 1..].iter().any(|b| close(*a, *b)) {
            return Err(Error::DegenerateGrid(format!(
                "{name} axis repeats value {a}"
            )));
        }
    }
    Ok(())
}

/// Parses `start:step:stop` or a comma-separated list of values.
///
/// Range endpoints are inclusive; generated values are rounded to 1e-9 so
/// `2.4:0.2:5.0` yields exactly 2.4, 2.6, ..., 5.0.
pub fn parse_axis(spec: &str) -> Result<Vec<f64>> {
    let spec = spec.trim();
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|e| Error::parse(format!("axis spec {spec:?}"), e))
    };
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [start, step, stop] => {
            let (start, step, stop) = (num(start)?, num(step)?, num(stop)?);
            if !(step > 0.0) || stop < start {
                return Err(Error::parse(
                    format!("axis spec {spec:?}"),
                    "need step > 0 and stop >= start",
                ));
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
            Ok((0..n)
                .map(|k| ((start + k as f64 * step) * 1e9).round() / 1e9)
                .collect())
        }
        [list] if !list.is_empty() => list.split(',').map(num).collect(),
        _ => Err(Error::parse(
            format!("axis spec {spec:?}"),
            "expected start:step:stop or a comma-separated list",
        )),
    }
}

/// One value per grid cell, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMap<T> {
    grid: Grid,
    values: Vec<T>,
}

impl<T> GridMap<T> {
    pub fn new(grid: Grid, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                left: grid.len(),
                right: values.len(),
            });
        }
        Ok(GridMap { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl FnMut(OperatingPoint) -> T) -> Self {
        let values = grid.ops().map(f).collect();
        GridMap { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn get(&self, op: OperatingPoint) -> Option<&T> {
        self.grid.index_of(op).map(|i| &self.values[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (OperatingPoint, &T)> + '_ {
        self.grid.ops().zip(&self.values)
    }

    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> GridMap<U> {
        GridMap {
            grid: self.grid.clone(),
            values: self.values.iter().map(&mut f).collect(),
        }
    }
}

impl GridMap<f64> {
    pub fn samples(&self) -> Vec<(OperatingPoint, f64)> {
        self.iter().map(|(op, v)| (op, *v)).collect()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// Builds a full grid map from scattered `(op, value)` rows, as read from CSV.
///
/// Axes are the sorted distinct vsup and freq values present; every cell of
/// their cross product must appear exactly once.
pub fn map_from_rows(rows: &[(OperatingPoint, f64)]) -> Result<GridMap<f64>> {
    let mut vsup: Vec<f64> = Vec::new();
    let mut freq: Vec<f64> = Vec::new();
    for (op, _) in rows {
        if !vsup.iter().any(|v| close(*v, op.vsup)) {
            vsup.push(op.vsup);
        }
        if !freq.iter().any(|f| close(*f, op.freq)) {
            freq.push(op.freq);
        }
    }
    vsup.sort_by(f64::total_cmp);
    freq.sort_by(f64::total_cmp);
    let grid = Grid::new(vsup, freq)?;
    let mut values: Vec<Option<f64>> = vec![None; grid.len()];
    for (op, value) in rows {
        let i = grid.index_of(*op).expect("axis built from rows");
        if values[i].replace(*value).is_some() {
            return Err(Error::parse("parameter map", format!("duplicate cell {op}")));
        }
    }
    let values = values
        .into_iter()
        .enumerate()
        .map(|(i, v)| v.ok_or_else(|| Error::MissingGridCell(grid.op(i))))
        .collect::<Result<Vec<_>>>()?;
    GridMap::new(grid, values)
}
