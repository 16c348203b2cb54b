//! Uniform grids on `[0, T]` and piecewise-linear grid functions.

use std::fmt::Write as _;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{CbfError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    #[serde(rename = "T")]
    pub t_end: f64,
    pub n: usize,
}

impl Grid {
    pub fn new(t_end: f64, n: usize) -> Result<Self> {
        let g = Grid { t_end, n };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(CbfError::Validation(format!("grid end T must be positive, got {}", self.t_end)));
        }
        if self.n < 2 {
            return Err(CbfError::Validation(format!("grid needs n >= 2 cells, got {}", self.n)));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        self.t_end / self.n as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i == self.n {
            self.t_end
        } else {
            i as f64 * self.step()
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n).map(|i| self.node(i))
    }

    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Node values with piecewise-linear semantics between nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
    boundary_layer: usize,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(CbfError::Validation(format!(
                "grid function needs {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(CbfError::numerical_with(
                "grid function has a non-finite value",
                vec![("node".into(), i as f64)],
            ));
        }
        Ok(GridFunction {
            grid,
            values,
            boundary_layer: 0,
        })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        GridFunction::new(grid, grid.nodes().map(f).collect())
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        GridFunction {
            grid,
            values: vec![c; grid.len()],
            boundary_layer: 0,
        }
    }

    pub fn zeros(grid: Grid) -> Self {
        GridFunction::constant(grid, 0.0)
    }

    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        GridFunction {
            grid,
            values,
            boundary_layer: 0,
        }
    }

    pub(crate) fn with_boundary_layer(mut self, nodes: usize) -> Self {
        self.boundary_layer = nodes;
        self
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Number of leading nodes (from `x_0`) whose values carry no accuracy claim.
    pub fn boundary_layer(&self) -> usize {
        self.boundary_layer
    }

    pub fn is_boundary_node(&self, i: usize) -> bool {
        i < self.boundary_layer
    }

    /// Piecewise-linear interpolant; clamps outside `[0, T]`.
    pub fn eval(&self, x: f64) -> f64 {
        let h = self.grid.step();
        let s = (x / h).clamp(0.0, self.grid.n as f64);
        let i = (s.floor() as usize).min(self.grid.n - 1);
        let w = s - i as f64;
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Sup norm over nodes outside the boundary layer.
    pub fn interior_sup_norm(&self) -> f64 {
        self.values[self.boundary_layer.min(self.values.len())..]
            .iter()
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64, f64) -> f64) -> GridFunction {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| f(self.grid.node(i), *v))
            .collect();
        GridFunction {
            grid: self.grid,
            values,
            boundary_layer: self.boundary_layer,
        }
    }

    fn zip(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> GridFunction {
        assert_eq!(self.grid, other.grid, "grid functions live on different grids");
        GridFunction {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| f(*a, *b)).collect(),
            boundary_layer: self.boundary_layer.max(other.boundary_layer),
        }
    }

    pub fn to_csv(&self, column: &str) -> String {
        let mut out = format!("x,{column}\n");
        for (i, v) in self.values.iter().enumerate() {
            let _ = writeln!(out, "{},{}", self.grid.node(i), v);
        }
        out
    }

    pub fn from_csv(grid: Grid, text: &str) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len());
        for (ln, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let v = line
                .split(',')
                .nth(1)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| CbfError::Validation(format!("bad CSV value on line {}", ln + 1)))?;
            values.push(v);
        }
        GridFunction::new(grid, values)
    }
}

impl Add for &GridFunction {
    type Output = GridFunction;
    fn add(self, rhs: &GridFunction) -> GridFunction {
        self.zip(rhs, |a, b| a + b)
    }
}

impl Sub for &GridFunction {
    type Output = GridFunction;
    fn sub(self, rhs: &GridFunction) -> GridFunction {
        self.zip(rhs, |a, b| a - b)
    }
}

impl Mul<f64> for &GridFunction {
    type Output = GridFunction;
    fn mul(self, c: f64) -> GridFunction {
        self.map(|_, v| c * v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_are_uniform_and_hit_endpoints() {
        let g = Grid::new(2.0, 8).unwrap();
        assert_eq!(g.node(0), 0.0);
        assert_eq!(g.node(8), 2.0);
        assert!((g.node(3) - 0.75).abs() < 1e-15);
        assert!(Grid::new(1.0, 1).is_err());
        assert!(Grid::new(-1.0, 4).is_err());
    }

    #[test]
    fn interpolation_is_piecewise_linear() {
        let g = Grid::new(1.0, 4).unwrap();
        let f = GridFunction::from_fn(g, |x| 3.0 * x + 1.0).unwrap();
        assert!((f.eval(0.3) - 1.9).abs() < 1e-14);
        assert_eq!(f.eval(2.0), 4.0);
    }

    #[test]
    fn rejects_wrong_length_and_nan() {
        let g = Grid::new(1.0, 4).unwrap();
        assert!(GridFunction::new(g, vec![0.0; 4]).is_err());
        assert!(GridFunction::new(g, vec![0.0, 1.0, f64::NAN, 0.0, 0.0]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let g = Grid::new(1.0, 5).unwrap();
        let f = GridFunction::from_fn(g, |x| x.cos()).unwrap();
        let back = GridFunction::from_csv(g, &f.to_csv("phi")).unwrap();
        assert_eq!(f, back);
    }
}
