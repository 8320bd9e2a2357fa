//! Plot-ready containers for simulated data and their CSV/JSON renderings.
//!
//! CSV output is long-format: one header row of `name [unit]` columns, then
//! one row per sample in row-major order, LF line endings. JSON output follows
//! the `{axes, units, data, metadata}` layout.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};

pub type Metadata = BTreeMap<String, Value>;

/// A named, unit-carrying coordinate axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub unit: String,
    pub values: Vec<f64>,
}

impl Axis {
    pub fn new(name: impl Into<String>, unit: impl Into<String>, values: Vec<f64>) -> Self {
        Self { name: name.into(), unit: unit.into(), values }
    }

    /// `n` evenly spaced points from `lo` to `hi` inclusive.
    pub fn linspace(name: impl Into<String>, unit: impl Into<String>, lo: f64, hi: f64, n: usize) -> Self {
        Self::new(name, unit, linspace(lo, hi, n))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn header(&self) -> String {
        header(&self.name, &self.unit)
    }
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}

fn header(name: &str, unit: &str) -> String {
    format!("{name} [{unit}]")
}

/// Singlet probability (or any scalar) sampled on a 2D grid.
///
/// `data[iy * x.len() + ix]` is the value at `(x.values[ix], y.values[iy])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanGrid {
    pub x: Axis,
    pub y: Axis,
    pub quantity: String,
    pub unit: String,
    pub data: Vec<f64>,
    pub metadata: Metadata,
}

impl ScanGrid {
    pub fn new(x: Axis, y: Axis, quantity: impl Into<String>, unit: impl Into<String>, data: Vec<f64>) -> Result<Self> {
        if data.len() != x.len() * y.len() {
            return Err(Error::DimensionMismatch { expected: x.len() * y.len(), got: data.len() });
        }
        Ok(Self { x, y, quantity: quantity.into(), unit: unit.into(), data, metadata: Metadata::new() })
    }

    pub fn nx(&self) -> usize {
        self.x.len()
    }

    pub fn ny(&self) -> usize {
        self.y.len()
    }

    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.data[iy * self.nx() + ix]
    }

    pub fn row(&self, iy: usize) -> &[f64] {
        let nx = self.nx();
        &self.data[iy * nx..(iy + 1) * nx]
    }

    pub fn meta_f64(&self, key: &str) -> Option<f64> {
        self.metadata.get(key).and_then(Value::as_f64)
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("{},{},{}\n", self.y.header(), self.x.header(), header(&self.quantity, &self.unit));
        for (iy, &y) in self.y.values.iter().enumerate() {
            for (ix, &x) in self.x.values.iter().enumerate() {
                let _ = writeln!(s, "{y},{x},{}", self.at(ix, iy));
            }
        }
        s
    }

    pub fn to_json(&self) -> Value {
        let rows: Vec<&[f64]> = (0..self.ny()).map(|iy| self.row(iy)).collect();
        json!({
            "axes": { "x": axis_json(&self.x), "y": axis_json(&self.y) },
            "units": { &self.x.name: self.x.unit, &self.y.name: self.y.unit, &self.quantity: self.unit },
            "data": { &self.quantity: rows },
            "metadata": self.metadata,
        })
    }
}

fn axis_json(a: &Axis) -> Value {
    json!({ "name": a.name, "unit": a.unit, "values": a.values })
}

/// Singlet probability versus evolution time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeTrace {
    /// ns, uniform and strictly increasing.
    pub times: Vec<f64>,
    pub p_singlet: Vec<f64>,
    pub metadata: Metadata,
}

impl TimeTrace {
    pub fn new(times: Vec<f64>, p_singlet: Vec<f64>) -> Result<Self> {
        if times.len() != p_singlet.len() {
            return Err(Error::DimensionMismatch { expected: times.len(), got: p_singlet.len() });
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("trace times must be strictly increasing"));
        }
        Ok(Self { times, p_singlet, metadata: Metadata::new() })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Sample spacing if the grid is uniform to within 1e-6 relative.
    pub fn uniform_step(&self) -> Result<f64> {
        if self.len() < 2 {
            return Err(Error::invalid("trace needs at least two samples"));
        }
        let dt = (self.times[self.len() - 1] - self.times[0]) / (self.len() - 1) as f64;
        let tol = 1e-6 * dt;
        if self.times.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > tol) {
            return Err(Error::invalid("time grid is not uniform"));
        }
        Ok(dt)
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new();
        t.push("time", "ns", self.times.clone());
        t.push("p_singlet", "", self.p_singlet.clone());
        t.metadata = self.metadata.clone();
        t
    }

    pub fn to_csv(&self) -> String {
        self.to_table().to_csv()
    }

    pub fn to_json(&self) -> Value {
        self.to_table().to_json()
    }
}

/// Uniform time grid `[0, t_max]` with `n` samples.
pub fn time_grid(t_max: f64, n: usize) -> Vec<f64> {
    linspace(0.0, t_max, n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub unit: String,
    pub values: Vec<f64>,
}

/// Column-oriented table; all columns share one length.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<Column>,
    pub metadata: Metadata,
}

impl Table {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a column. Panics if its length differs from existing columns.
    pub fn push(&mut self, name: impl Into<String>, unit: impl Into<String>, values: Vec<f64>) {
        if let Some(c) = self.columns.first() {
            assert_eq!(c.values.len(), values.len(), "table columns must have equal length");
        }
        self.columns.push(Column { name: name.into(), unit: unit.into(), values });
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, |c| c.values.len())
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().find(|c| c.name == name).map(|c| c.values.as_slice())
    }

    pub fn to_csv(&self) -> String {
        let head: Vec<String> = self.columns.iter().map(|c| header(&c.name, &c.unit)).collect();
        let mut s = head.join(",");
        s.push('\n');
        for r in 0..self.rows() {
            let row: Vec<String> = self.columns.iter().map(|c| c.values[r].to_string()).collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }

    pub fn to_json(&self) -> Value {
        let mut data = serde_json::Map::new();
        let mut units = serde_json::Map::new();
        for c in &self.columns {
            data.insert(c.name.clone(), json!(c.values.iter().map(|&v| finite_or_null(v)).collect::<Vec<_>>()));
            units.insert(c.name.clone(), json!(c.unit));
        }
        let axes = self.columns.first().map(|c| vec![c.name.clone()]).unwrap_or_default();
        json!({ "axes": axes, "units": units, "data": data, "metadata": self.metadata })
    }
}

/// JSON has no representation for NaN or infinity.
fn finite_or_null(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linspace_endpoints() {
        assert_eq!(linspace(0.0, 1.0, 5), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(linspace(2.0, 3.0, 1), vec![2.0]);
        assert!(linspace(0.0, 1.0, 0).is_empty());
    }

    #[test]
    fn scan_grid_csv_is_row_major() {
        let g = ScanGrid::new(
            Axis::new("x", "mV", vec![0.0, 1.0]),
            Axis::new("y", "GHz", vec![5.0, 6.0]),
            "p_singlet",
            "",
            vec![0.1, 0.2, 0.3, 0.4],
        )
        .unwrap();
        assert_eq!(g.at(1, 0), 0.2);
        assert_eq!(g.to_csv(), "y [GHz],x [mV],p_singlet []\n5,0,0.1\n5,1,0.2\n6,0,0.3\n6,1,0.4\n");
        let j = g.to_json();
        assert_eq!(j["data"]["p_singlet"][1][0], json!(0.3));
        assert_eq!(j["units"]["x"], json!("mV"));
    }

    #[test]
    fn scan_grid_checks_dimensions() {
        let r = ScanGrid::new(Axis::new("x", "", vec![0.0]), Axis::new("y", "", vec![0.0, 1.0]), "p", "", vec![1.0]);
        assert!(matches!(r, Err(Error::DimensionMismatch { expected: 2, got: 1 })));
    }

    #[test]
    fn trace_validation() {
        assert!(TimeTrace::new(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(TimeTrace::new(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        let t = TimeTrace::new(vec![0.0, 1.0, 3.0], vec![1.0; 3]).unwrap();
        assert!(t.uniform_step().is_err());
        let t = TimeTrace::new(time_grid(10.0, 11), vec![1.0; 11]).unwrap();
        assert!((t.uniform_step().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn table_output() {
        let mut t = Table::new();
        t.push("delta", "GHz", vec![0.0, 1.5]);
        t.push("I", "mV", vec![30.0, f64::INFINITY]);
        assert_eq!(t.to_csv(), "delta [GHz],I [mV]\n0,30\n1.5,inf\n");
        assert_eq!(t.to_json()["data"]["I"][1], Value::Null);
        assert_eq!(t.column("I").unwrap()[0], 30.0);
    }
}
