//! Discretized operators on uniform grids: the Riemann–Liouville type
//! integral and derivative built from a Sonine pair, the censored derivative,
//! the censoring operator `K` and its iterated kernels.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CbfError, Result};
use crate::grid::{Grid, GridFunction};
use crate::kernels::KernelPair;
use crate::product::{lagrange, stencil, CellMoments, Factor};

/// Leading nodes of derivative outputs that carry no accuracy claim.
pub const BOUNDARY_LAYER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    RlIntegral,
    RlDerivative,
    CensoredDerivative,
    KOperator,
}

impl OperatorKind {
    fn is_derivative(self) -> bool {
        matches!(self, OperatorKind::RlDerivative | OperatorKind::CensoredDerivative)
    }
}

/// Weights `(Aφ)(x_i) = Σ_j w_{i,j} v_j`, lower triangular except that rows
/// 0 and 1 may read up to `x_2`: grid functions are reconstructed as local
/// quadratics in the potential `P`, and the first cell needs three nodes.
/// Derivative kinds have no value at `x_0`; their row 0 repeats row 1.
#[derive(Debug, Clone)]
pub struct OperatorTable {
    kind: OperatorKind,
    grid: Grid,
    rows: Vec<Vec<f64>>,
}

impl OperatorTable {
    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.rows[i].get(j).copied().unwrap_or(0.0)
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.rows[i].iter().sum()
    }

    pub fn apply(&self, phi: &GridFunction) -> GridFunction {
        assert_eq!(phi.grid(), self.grid, "operator and function live on different grids");
        let v = phi.values();
        let dot = |row: &Vec<f64>| row.iter().zip(v).map(|(w, x)| w * x).sum::<f64>();
        let out = if self.rows.len() > 256 {
            self.rows.par_iter().map(dot).collect()
        } else {
            self.rows.iter().map(dot).collect()
        };
        let f = GridFunction::from_raw(self.grid, out);
        if self.kind.is_derivative() {
            f.with_boundary_layer(BOUNDARY_LAYER)
        } else {
            f
        }
    }

    /// CSV with columns `i, j, w`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,j,w\n");
        for (i, row) in self.rows.iter().enumerate() {
            for (j, w) in row.iter().enumerate() {
                let _ = writeln!(out, "{i},{j},{w}");
            }
        }
        out
    }
}

fn node_potential(pair: &KernelPair, grid: Grid) -> Vec<f64> {
    grid.nodes().map(|x| pair.potential(x)).collect()
}

fn tail_factor(pair: &KernelPair) -> Factor<'_> {
    Factor {
        f: Box::new(move |x| pair.tail(x)),
        exponent: pair.exponents().tail,
    }
}

fn density_factor(pair: &KernelPair) -> Factor<'_> {
    Factor {
        f: Box::new(move |x| pair.density(x)),
        exponent: pair.exponents().density,
    }
}

/// How grid functions are continued between nodes inside the operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reconstruction {
    /// Linear in `σ = P(x)` on each cell. All weights of `K` and `I_f` are
    /// nonnegative, but modes beyond `1, P` are first order near the origin.
    Linear,
    /// Quadratic in `P` through three neighbouring nodes; exact for
    /// `1, P, P²`. The first cell borrows `x_2`, so row 1 reads one node
    /// ahead with a negative weight.
    #[default]
    Quadratic,
}

/// `(node, coefficient of σ⁰, σ¹, σ²)` of the basis functions on cell `c`.
fn basis(c: usize, potential: &[f64], recon: Reconstruction) -> Vec<(usize, [f64; 3])> {
    match recon {
        Reconstruction::Linear => vec![(c, [1.0, -1.0, 0.0]), (c + 1, [0.0, 1.0, 0.0])],
        Reconstruction::Quadratic => stencil(c)
            .into_iter()
            .zip(lagrange(c, potential))
            .map(|(j, (s, p, d))| (j, [p / d, -s / d, 1.0 / d]))
            .collect(),
    }
}

fn row_len(i: usize, recon: Reconstruction) -> usize {
    match recon {
        Reconstruction::Linear => i + 1,
        Reconstruction::Quadratic => i.max(2) + 1,
    }
}

/// Row weights for `∫₀^{x_i} L(r) R(x_i - r) φ(r) dr`.
fn value_rows(
    moments: &CellMoments,
    potential: &[f64],
    n: usize,
    first: Vec<f64>,
    recon: Reconstruction,
) -> Vec<Vec<f64>> {
    let mut rows = Vec::with_capacity(n + 1);
    rows.push(first);
    for i in 1..=n {
        let mut w = vec![0.0; row_len(i, recon)];
        for (c, m) in moments.row(i).iter().enumerate() {
            for (j, b) in basis(c, potential, recon) {
                w[j] += b[0] * m[0] + b[1] * m[1] + b[2] * m[2];
            }
        }
        rows.push(w);
    }
    rows
}

/// Table of `I_f φ(x) = ∫₀ˣ φ(s) k(x - s) ds`.
pub fn integral_table(pair: &KernelPair, grid: Grid, recon: Reconstruction) -> OperatorTable {
    let one = Factor {
        f: Box::new(|_| 1.0),
        exponent: 0.0,
    };
    let moments = CellMoments::new(pair, grid, &one, &density_factor(pair));
    OperatorTable {
        kind: OperatorKind::RlIntegral,
        grid,
        rows: value_rows(&moments, &node_potential(pair, grid), grid.n, vec![0.0], recon),
    }
}

fn sonine_moments(pair: &KernelPair, grid: Grid) -> CellMoments {
    CellMoments::new(pair, grid, &tail_factor(pair), &density_factor(pair))
}

/// Table of `Kφ(x) = ∫₀ˣ μ̄(r) k(x - r) φ(r) dr`, with `Kφ(0) = φ(0)`.
pub fn k_table(pair: &KernelPair, grid: Grid, recon: Reconstruction) -> OperatorTable {
    OperatorTable {
        kind: OperatorKind::KOperator,
        grid,
        rows: value_rows(&sonine_moments(pair, grid), &node_potential(pair, grid), grid.n, vec![1.0], recon),
    }
}

/// `d/dx (μ̄ ∗ φ)(x_i) = φ(0) μ̄(x_i) + ∫₀^{x_i} φ'(u) μ̄(x_i - u) du`, exact for
/// the reconstruction, whose derivative on a cell is `L'(σ) k(u) / ΔP`.
fn derivative_rows(pair: &KernelPair, grid: Grid, censored: bool, recon: Reconstruction) -> Vec<Vec<f64>> {
    let n = grid.n;
    let potential = node_potential(pair, grid);
    let moments = CellMoments::new(pair, grid, &density_factor(pair), &tail_factor(pair));
    let mut rows = Vec::with_capacity(n + 1);
    rows.push(Vec::new());
    for i in 1..=n {
        let tail = pair.tail(grid.node(i));
        let mut w = vec![0.0; row_len(i, recon)];
        w[0] += tail;
        for (c, m) in moments.row(i).iter().enumerate() {
            let span = potential[c + 1] - potential[c];
            for (j, b) in basis(c, &potential, recon) {
                w[j] += (b[1] * m[0] + 2.0 * b[2] * m[1]) / span;
            }
        }
        if censored {
            w[i] -= tail;
        }
        rows.push(w);
    }
    rows[0] = rows[1].clone();
    rows
}

/// All four operator tables of a pair on one grid, sharing the product rule.
#[derive(Debug, Clone)]
pub struct Operators {
    pub integral: OperatorTable,
    pub derivative: OperatorTable,
    pub censored: OperatorTable,
    pub k: OperatorTable,
}

impl Operators {
    pub fn new(pair: &KernelPair, grid: Grid) -> Result<Self> {
        Operators::with_reconstruction(pair, grid, Reconstruction::default())
    }

    pub fn with_reconstruction(pair: &KernelPair, grid: Grid, recon: Reconstruction) -> Result<Self> {
        grid.validate()?;
        let k = k_table(pair, grid, recon);
        let table = |kind, censored| OperatorTable {
            kind,
            grid,
            rows: derivative_rows(pair, grid, censored, recon),
        };
        let ops = Operators {
            integral: integral_table(pair, grid, recon),
            derivative: table(OperatorKind::RlDerivative, false),
            censored: table(OperatorKind::CensoredDerivative, true),
            k,
        };
        for t in [&ops.integral, &ops.derivative, &ops.censored, &ops.k] {
            if t.rows.iter().flatten().any(|w| !w.is_finite()) {
                return Err(CbfError::numerical_with(
                    "operator table has non-finite weights",
                    vec![("n".into(), grid.n as f64), ("T".into(), grid.t_end)],
                ));
            }
        }
        Ok(ops)
    }

    pub fn grid(&self) -> Grid {
        self.k.grid
    }
}

pub fn rl_integral(pair: &KernelPair, g: &GridFunction) -> GridFunction {
    integral_table(pair, g.grid(), Reconstruction::default()).apply(g)
}

pub fn rl_derivative(pair: &KernelPair, phi: &GridFunction) -> Result<GridFunction> {
    Ok(Operators::new(pair, phi.grid())?.derivative.apply(phi))
}

pub fn censored_derivative(pair: &KernelPair, phi: &GridFunction) -> Result<GridFunction> {
    Ok(Operators::new(pair, phi.grid())?.censored.apply(phi))
}

pub fn apply_k(pair: &KernelPair, phi: &GridFunction) -> GridFunction {
    k_table(pair, phi.grid(), Reconstruction::default()).apply(phi)
}

/// Max over `x_i > 0` of `|(μ̄ ∗ k)(x_i) - 1|` on the grid `T/n`.
pub fn verify_sonine(pair: &KernelPair, t_end: f64, n: usize) -> Result<f64> {
    let grid = Grid::new(t_end, n)?;
    let moments = sonine_moments(pair, grid);
    let dev = (1..=n)
        .map(|i| (moments.row(i).iter().map(|m| m[0]).sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    if dev.is_finite() {
        Ok(dev)
    } else {
        Err(CbfError::numerical("Sonine convolution overflowed"))
    }
}

/// Samples of `r ↦ k_j(x, r)` at the interior nodes of a uniform grid on `[0, x]`.
#[derive(Debug, Clone)]
pub struct KernelDensity {
    pub r: Vec<f64>,
    pub density: Vec<f64>,
    /// Total mass `∫₀ˣ k_j(x, r) dr` of the discrete kernel.
    pub mass: f64,
    /// Discrete cumulative mass at every node `x_0..x_n` of the grid.
    pub cumulative: Vec<f64>,
}

/// Row `x` of `K^j`, obtained by propagating the last row of `K` backwards
/// through `j - 1` further applications. `m` interior nodes are returned.
/// Uses the linear reconstruction so every sample is nonnegative.
pub fn kernel_j_density(pair: &KernelPair, j: usize, x: f64, m: usize) -> Result<KernelDensity> {
    if j == 0 {
        return Err(CbfError::Validation("kernel order j must be >= 1".into()));
    }
    if m < 1 {
        return Err(CbfError::Validation("need at least one sample node".into()));
    }
    let grid = Grid::new(x, m + 1)?;
    let k = k_table(pair, grid, Reconstruction::Linear);
    let n = grid.n;
    let mut w = k.row(n).to_vec();
    for _ in 1..j {
        let mut next = vec![0.0; n + 1];
        for (i, wi) in w.iter().enumerate() {
            if *wi == 0.0 {
                continue;
            }
            for (l, kl) in k.row(i).iter().enumerate() {
                next[l] += wi * kl;
            }
        }
        w = next;
    }
    w.resize(n + 1, 0.0);
    let h = grid.step();
    let mut cumulative = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    for v in &w {
        acc += v;
        cumulative.push(acc);
    }
    Ok(KernelDensity {
        r: (1..n).map(|i| grid.node(i)).collect(),
        density: (1..n).map(|i| w[i] / h).collect(),
        mass: acc,
        cumulative,
    })
}

/// Cumulative law of `k_1(y, ·)` from the last row of the linear `K` table on
/// a uniform grid over `[0, y]`, as `(points, cdf)` at `0`, the cell midpoints
/// and `y`. The final entry is the total mass, 1 up to quadrature error.
pub fn first_kernel_cdf(pair: &KernelPair, y: f64, cells: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let grid = Grid::new(y, cells)?;
    let n = grid.n;
    let moments = sonine_moments(pair, grid);
    let potential = node_potential(pair, grid);
    let mut w = vec![0.0; n + 1];
    for (c, m) in moments.row(n).iter().enumerate() {
        for (j, b) in basis(c, &potential, Reconstruction::Linear) {
            w[j] += b[0] * m[0] + b[1] * m[1] + b[2] * m[2];
        }
    }
    // node weights are hat-function masses; cumulate them at the cell midpoints
    let h = grid.step();
    let mut points = vec![0.0];
    points.extend((0..n).map(|j| (j as f64 + 0.5) * h));
    points.push(y);
    let mut acc = 0.0;
    let mut cumulative = vec![0.0];
    cumulative.extend(w.iter().map(|v| {
        acc += v.max(0.0);
        acc
    }));
    if !acc.is_finite() || acc <= 0.0 {
        return Err(CbfError::numerical_with("degenerate first-kernel table", vec![("y".into(), y)]));
    }
    Ok((points, cumulative))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(n: usize) -> Grid {
        Grid::new(1.0, n).unwrap()
    }

    #[test]
    fn integral_of_one_is_potential() {
        let p = KernelPair::stable(0.5).unwrap();
        let out = rl_integral(&p, &GridFunction::constant(grid(64), 1.0));
        assert_eq!(out.values()[0], 0.0);
        assert!((out.values()[64] - 2.0 / PI.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn integral_of_identity_is_beta_value() {
        let p = KernelPair::stable(0.5).unwrap();
        let g = grid(64);
        let out = rl_integral(&p, &GridFunction::from_fn(g, |s| s).unwrap());
        assert!((out.values()[64] - 0.7522527781).abs() < 1e-10);
    }

    #[test]
    fn sonine_rows_are_one() {
        for &alpha in &[0.25, 0.5, 0.75] {
            let p = KernelPair::stable(alpha).unwrap();
            let d = verify_sonine(&p, 1.0, 256).unwrap();
            assert!(d < 1e-9, "{alpha}: {d}");
        }
    }

    #[test]
    fn k_rows_positive() {
        let p = KernelPair::stable(0.3).unwrap();
        let k = k_table(&p, grid(40), Reconstruction::Linear);
        for i in 0..=40 {
            assert!(k.row(i).iter().all(|w| *w >= 0.0));
        }
    }

    #[test]
    fn derivative_of_constant() {
        let p = KernelPair::stable(0.5).unwrap();
        let g = grid(128);
        let ops = Operators::new(&p, g).unwrap();
        let c = GridFunction::constant(g, 2.5);
        let d = ops.derivative.apply(&c);
        for i in 1..=128 {
            let want = 2.5 * p.tail(g.node(i));
            assert!((d.values()[i] - want).abs() < 1e-10 * want);
        }
        assert!(ops.censored.apply(&c).sup_norm() < 1e-10);
        assert_eq!(d.boundary_layer(), BOUNDARY_LAYER);
    }

    #[test]
    fn derivative_of_potential_is_one() {
        let p = KernelPair::stable(0.5).unwrap();
        let g = grid(128);
        let ops = Operators::new(&p, g).unwrap();
        let phi = GridFunction::from_fn(g, |x| p.potential(x)).unwrap();
        let d = ops.derivative.apply(&phi);
        assert!((&d - &GridFunction::constant(g, 1.0)).sup_norm() < 1e-9);
        let c = ops.censored.apply(&phi);
        assert!((c.values()[128] - (1.0 - 2.0 / PI)).abs() < 1e-9);
    }

    #[test]
    fn first_kernel_is_arcsine() {
        let p = KernelPair::stable(0.5).unwrap();
        let kd = kernel_j_density(&p, 1, 1.0, 1023).unwrap();
        assert!((kd.mass - 1.0).abs() < 1e-10);
        let i = kd.r.iter().position(|r| (r - 0.5).abs() < 1e-12).unwrap();
        assert!((kd.density[i] - 2.0 / PI).abs() < 1e-5, "{}", kd.density[i]);
    }
}
