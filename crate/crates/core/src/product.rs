//! Cell moments `∫_{cell c} L(r) R(x_i - r) σ_c(r)^m dr`, `m = 0, 1, 2`, for
//! kernels `L`, `R` with power singularities at their origin, where
//! `σ_c = (P(r) - P(x_c)) / (P(x_{c+1}) - P(x_c))` is the potential rescaled to
//! the cell. Grid functions are reconstructed as quadratics in `σ`, which
//! reproduces `1, P, P²` exactly.
//!
//! Cells next to a singular end use Gauss–Jacobi rules; on the first cell
//! the power `σ^m ~ r^{m(1-b)}` is folded into the Jacobi weight.

use rayon::prelude::*;

use crate::grid::Grid;
use crate::kernels::KernelPair;
use crate::quadrature::{gauss_legendre_unit, jacobi_unit, UnitRule};

const JACOBI_NODES: usize = 16;
const LEGENDRE_NODES: [usize; 3] = [4, 8, 16];

fn legendre_index(distance: usize) -> usize {
    match distance {
        0 | 1 => 2,
        2..=8 => 1,
        _ => 0,
    }
}

/// A kernel factor `x ↦ f(x)` with `f(x) ~ x^{-exponent}` at 0.
pub(crate) struct Factor<'a> {
    pub f: Box<dyn Fn(f64) -> f64 + Sync + 'a>,
    pub exponent: f64,
}

pub(crate) type Moments = [f64; 3];

fn sample(n: usize, nodes: &[f64], f: impl Fn(usize, f64) -> f64 + Sync) -> Vec<f64> {
    (0..n * nodes.len())
        .into_par_iter()
        .map(|idx| f(idx / nodes.len(), nodes[idx % nodes.len()]))
        .collect()
}

fn accumulate(m: &mut Moments, weight: f64, sigma: f64) {
    m[0] += weight;
    m[1] += weight * sigma;
    m[2] += weight * sigma * sigma;
}

pub(crate) struct CellMoments {
    grid: Grid,
    step: f64,
    legendre: Vec<UnitRule>,
    left_at: Vec<Vec<f64>>,
    right_at: Vec<Vec<f64>>,
    sigma_at: Vec<Vec<f64>>,
    /// First cell, one rule per power of `σ`.
    head_rules: Vec<UnitRule>,
    head_left: Vec<Vec<f64>>,
    head_right: Vec<Vec<f64>>,
    /// Last cell `[x_{i-1}, x_i]`, in `u = (x_i - r)/Δ`.
    foot_rule: UnitRule,
    foot_right: Vec<f64>,
    foot_left: Vec<f64>,
    foot_sigma: Vec<f64>,
    first_row: Moments,
}

impl CellMoments {
    pub(crate) fn new(pair: &KernelPair, grid: Grid, left: &Factor<'_>, right: &Factor<'_>) -> Self {
        let n = grid.n;
        let h = grid.step();
        let p: Vec<f64> = grid.nodes().map(|x| pair.potential(x)).collect();
        let sigma = |c: usize, r: f64| (pair.potential(r) - p[c]) / (p[c + 1] - p[c]);
        let growth = 1.0 - pair.exponents().density;
        // σ_0(Δt) / t^{1-b}, identically 1 for power kernels
        let ratio = |t: f64| pair.potential(h * t) / (p[1] * t.powf(growth));

        let legendre: Vec<UnitRule> = LEGENDRE_NODES.iter().map(|&q| gauss_legendre_unit(q)).collect();
        let left_at = legendre
            .iter()
            .map(|r| sample(n, &r.nodes, |m, t| (left.f)(h * (m as f64 + t))))
            .collect();
        let right_at = legendre
            .iter()
            .map(|r| sample(n, &r.nodes, |m, t| (right.f)(h * (m as f64 + 1.0 - t))))
            .collect();
        let sigma_at = legendre
            .iter()
            .map(|r| sample(n, &r.nodes, |c, t| sigma(c, h * (c as f64 + t))))
            .collect();

        let head_rules: Vec<UnitRule> = (0..3)
            .map(|m| jacobi_unit(JACOBI_NODES, left.exponent - m as f64 * growth))
            .collect();
        let head_left = head_rules
            .iter()
            .enumerate()
            .map(|(m, rule)| {
                rule.nodes
                    .iter()
                    .map(|&t| (left.f)(h * t) * t.powf(left.exponent) * ratio(t).powi(m as i32))
                    .collect()
            })
            .collect();
        let head_right = head_rules
            .iter()
            .map(|rule| sample(n, &rule.nodes, |m, t| (right.f)(h * (m as f64 + 1.0 - t))))
            .collect();

        let foot_rule = jacobi_unit(JACOBI_NODES, right.exponent);
        let foot_right = foot_rule
            .nodes
            .iter()
            .map(|&u| (right.f)(h * u) * u.powf(right.exponent))
            .collect();
        let foot_left = sample(n, &foot_rule.nodes, |c, u| (left.f)(h * (c as f64 + 1.0 - u)));
        let foot_sigma = sample(n, &foot_rule.nodes, |c, u| sigma(c, h * (c as f64 + 1.0 - u)));

        // row 1: both singular ends share one cell, split at its midpoint
        let mut first_row = [0.0; 3];
        for (m, rule) in head_rules.iter().enumerate() {
            first_row[m] += 0.5
                * h
                * rule.integrate(|t| {
                    let s = 0.5 * t;
                    (left.f)(h * s) * (right.f)(h * (1.0 - s)) * t.powf(left.exponent - m as f64 * growth)
                        * sigma(0, h * s).powi(m as i32)
                });
        }
        for (q, &u) in foot_rule.nodes.iter().enumerate() {
            let s = 1.0 - 0.5 * u;
            let w = 0.5 * h * foot_rule.weights[q] * (left.f)(h * s) * (right.f)(h * 0.5 * u) * u.powf(right.exponent);
            accumulate(&mut first_row, w, sigma(0, h * s));
        }

        CellMoments {
            grid,
            step: h,
            legendre,
            left_at,
            right_at,
            sigma_at,
            head_rules,
            head_left,
            head_right,
            foot_rule,
            foot_right,
            foot_left,
            foot_sigma,
            first_row,
        }
    }

    /// Moments of every cell `c < i` for row `i ≥ 1`.
    pub(crate) fn row(&self, i: usize) -> Vec<Moments> {
        assert!(i >= 1 && i <= self.grid.n);
        if i == 1 {
            return vec![self.first_row];
        }
        let h = self.step;
        let mut out = vec![[0.0; 3]; i];
        for (m, rule) in self.head_rules.iter().enumerate() {
            let nq = rule.len();
            let right = &self.head_right[m][(i - 1) * nq..i * nq];
            out[0][m] = h * (0..nq)
                .map(|q| rule.weights[q] * self.head_left[m][q] * right[q])
                .sum::<f64>();
        }
        for (c, cell) in out.iter_mut().enumerate().take(i - 1).skip(1) {
            let mirror = i - c - 1;
            let r = legendre_index(c.min(mirror));
            let rule = &self.legendre[r];
            let nq = rule.len();
            let left = &self.left_at[r][c * nq..(c + 1) * nq];
            let sig = &self.sigma_at[r][c * nq..(c + 1) * nq];
            let right = &self.right_at[r][mirror * nq..(mirror + 1) * nq];
            for q in 0..nq {
                accumulate(cell, h * rule.weights[q] * left[q] * right[q], sig[q]);
            }
        }
        let nq = self.foot_rule.len();
        let c = i - 1;
        for q in 0..nq {
            let w = h * self.foot_rule.weights[q] * self.foot_right[q] * self.foot_left[c * nq + q];
            accumulate(&mut out[c], w, self.foot_sigma[c * nq + q]);
        }
        out
    }
}

/// The three reconstruction nodes of cell `c`: `(0, 1, 2)` for the first
/// cell, `(c-1, c, c+1)` otherwise.
pub(crate) fn stencil(c: usize) -> [usize; 3] {
    if c == 0 {
        [0, 1, 2]
    } else {
        [c - 1, c, c + 1]
    }
}

/// Lagrange data of cell `c` in the variable `σ_c`: for each stencil node,
/// the quadratic `L(σ) = (σ² - s σ + p) / d`, returned as `(s, p, d)`.
pub(crate) fn lagrange(c: usize, potential: &[f64]) -> [(f64, f64, f64); 3] {
    let nodes = stencil(c);
    let span = potential[c + 1] - potential[c];
    let sig: Vec<f64> = nodes.iter().map(|&j| (potential[j] - potential[c]) / span).collect();
    let mut out = [(0.0, 0.0, 0.0); 3];
    for k in 0..3 {
        let (a, b) = match k {
            0 => (sig[1], sig[2]),
            1 => (sig[0], sig[2]),
            _ => (sig[0], sig[1]),
        };
        out[k] = (a + b, a * b, (sig[k] - a) * (sig[k] - b));
    }
    out
}
