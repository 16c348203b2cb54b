//! Geometric-series solvers for the censored initial value problem and the
//! homogeneous and inhomogeneous resolvent equations.

use serde::Serialize;

use crate::error::{CbfError, Result};
use crate::grid::{Grid, GridFunction};
use crate::kernels::KernelPair;
use crate::ops::{Operators, Reconstruction};

pub const DEFAULT_MAX_TERMS: usize = 10_000;

/// Inner censored-integral solves run this much tighter than the outer series.
const INNER_TOL_FACTOR: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct SeriesSolution {
    pub phi: GridFunction,
    pub terms_used: usize,
    /// Bound on the sup norm of the dropped tail.
    pub tail_bound: f64,
    /// Sup norm of the equation residual over nodes outside the boundary layer.
    pub residual: f64,
    pub q_used: f64,
    pub lambda: f64,
    pub phi0: f64,
    /// Largest amount by which a retained term exceeded its a-priori bound,
    /// relative to that bound's sup norm; nonpositive when every term obeys it.
    pub bound_excess: f64,
}

/// JSON diagnostics block of a solution.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Diagnostics {
    pub terms_used: usize,
    pub tail_bound: f64,
    pub residual: f64,
    pub q: f64,
    pub lambda: f64,
    pub phi0: f64,
    pub bound_excess: f64,
}

impl SeriesSolution {
    pub fn diagnostics(&self) -> Diagnostics {
        Diagnostics {
            terms_used: self.terms_used,
            tail_bound: self.tail_bound,
            residual: self.residual,
            q: self.q_used,
            lambda: self.lambda,
            phi0: self.phi0,
            bound_excess: self.bound_excess,
        }
    }
}

/// Output of a truncated censored integral.
#[derive(Debug, Clone)]
pub struct CensoredIntegral {
    pub value: GridFunction,
    pub terms_used: usize,
    pub tail_bound: f64,
}

/// Operators of one pair on one grid plus the series machinery.
#[derive(Debug, Clone)]
pub struct Solver {
    pair: KernelPair,
    ops: Operators,
    max_terms: usize,
}

impl Solver {
    pub fn new(pair: &KernelPair, grid: Grid) -> Result<Self> {
        Solver::with_reconstruction(pair, grid, Reconstruction::default())
    }

    pub fn with_reconstruction(pair: &KernelPair, grid: Grid, recon: Reconstruction) -> Result<Self> {
        Ok(Solver {
            pair: pair.clone(),
            ops: Operators::with_reconstruction(pair, grid, recon)?,
            max_terms: DEFAULT_MAX_TERMS,
        })
    }

    pub fn with_max_terms(mut self, max_terms: usize) -> Self {
        self.max_terms = max_terms;
        self
    }

    pub fn grid(&self) -> Grid {
        self.ops.grid()
    }

    pub fn operators(&self) -> &Operators {
        &self.ops
    }

    pub fn pair(&self) -> &KernelPair {
        &self.pair
    }

    fn check_grid(&self, g: &GridFunction) -> Result<()> {
        if g.grid() != self.grid() {
            return Err(CbfError::Validation("right-hand side lives on a different grid".into()));
        }
        Ok(())
    }

    fn check_tol(tol: f64) -> Result<()> {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(CbfError::Validation(format!("tolerance must be positive, got {tol}")));
        }
        Ok(())
    }

    /// `Σ_{j≥0} K^j h`, stopped once the geometric bound
    /// `scale · q^{J+1}/(1-q) · P(T)` and the measured tail are below `tol`.
    fn neumann(&self, h: &GridFunction, scale: f64, tol: f64) -> Result<CensoredIntegral> {
        self.pair.require_contraction()?;
        let q = self.pair.q();
        let pt = self.pair.potential(self.grid().t_end);
        let mut sum = h.clone();
        let mut term = h.clone();
        let mut prev_norm = term.sup_norm();
        if scale == 0.0 || prev_norm == 0.0 {
            return Ok(CensoredIntegral {
                value: sum,
                terms_used: 1,
                tail_bound: 0.0,
            });
        }
        for j in 1..=self.max_terms {
            term = self.ops.k.apply(&term);
            sum = &sum + &term;
            let norm = term.sup_norm();
            let a_priori = scale * q.powi(j as i32 + 1) / (1.0 - q) * pt;
            let ratio = if prev_norm > 0.0 { norm / prev_norm } else { 0.0 };
            prev_norm = norm;
            let measured = if ratio < 1.0 { norm * ratio / (1.0 - ratio) } else { f64::INFINITY };
            if a_priori < tol && measured < tol {
                return Ok(CensoredIntegral {
                    value: sum,
                    terms_used: j + 1,
                    tail_bound: a_priori.max(measured),
                });
            }
        }
        Err(CbfError::NonConvergence {
            terms: self.max_terms,
            last_term: prev_norm,
            advice: "q is too close to 1 for this tolerance; loosen tol or raise the term cap".into(),
        })
    }

    /// `I_c g = Σ_j K^j I_f g`.
    pub fn censored_integral(&self, g: &GridFunction, tol: f64) -> Result<CensoredIntegral> {
        self.check_grid(g)?;
        Self::check_tol(tol)?;
        let ig = self.ops.integral.apply(g);
        self.neumann(&ig, g.sup_norm(), tol)
    }

    /// `φ - φ₀ = I_f[μ̄ Σ_j K^j (g/μ̄)]`, with `g/μ̄` set to its limit 0 at `x = 0`.
    pub fn censored_integral_alt(&self, g: &GridFunction, tol: f64) -> Result<CensoredIntegral> {
        self.check_grid(g)?;
        Self::check_tol(tol)?;
        let grid = self.grid();
        let h = g.map(|x, v| if x > 0.0 { v / self.pair.tail(x) } else { 0.0 });
        // |h| ≤ m·P with m = sup |h|/P feeds the same geometric bound
        let m = (1..=grid.n)
            .map(|i| h.values()[i].abs() / self.pair.potential(grid.node(i)))
            .fold(0.0, f64::max);
        let s = self.neumann(&h, m, tol)?;
        let mut weighted = s.value.map(|x, v| if x > 0.0 { v * self.pair.tail(x) } else { 0.0 });
        let first = weighted.values()[1];
        weighted = weighted.map(|x, v| if x > 0.0 { v } else { first });
        Ok(CensoredIntegral {
            value: self.ops.integral.apply(&weighted),
            terms_used: s.terms_used,
            tail_bound: s.tail_bound,
        })
    }

    fn residual(&self, phi: &GridFunction, lambda: f64, g: Option<&GridFunction>) -> f64 {
        let d = self.ops.censored.apply(phi);
        let mut r = &d - &(phi * lambda);
        if let Some(g) = g {
            r = &r - g;
        }
        r.interior_sup_norm()
    }

    /// `φ = φ₀ + I_c g`.
    pub fn solve_censored_ivp(&self, g: &GridFunction, phi0: f64, tol: f64) -> Result<SeriesSolution> {
        let ic = self.censored_integral(g, tol)?;
        let phi = ic.value.map(|x, v| if x == 0.0 { phi0 } else { phi0 + v });
        let residual = self.residual(&phi, 0.0, Some(g));
        Ok(SeriesSolution {
            phi,
            terms_used: ic.terms_used,
            tail_bound: ic.tail_bound,
            residual,
            q_used: self.pair.q(),
            lambda: 0.0,
            phi0,
            bound_excess: 0.0,
        })
    }

    /// Sums `Σ_j t_j`, `t_j = λ I_c t_{j-1}`, against the bounds
    /// `coef · (|λ|/(1-q))^j · I_f^j seed`.
    fn power_series(
        &self,
        first: GridFunction,
        seed: GridFunction,
        coef: f64,
        lambda: f64,
        tol: f64,
    ) -> Result<(GridFunction, usize, f64, f64)> {
        self.pair.require_contraction()?;
        let rho = lambda.abs() / (1.0 - self.pair.q());
        let mut sum = first.clone();
        let mut term = first;
        let mut shape = seed;
        let mut scale = coef;
        let mut excess = excess_over(&term, &shape, scale);
        let mut prev_bound = scale * shape.sup_norm();
        if lambda == 0.0 || term.sup_norm() == 0.0 {
            return Ok((sum, 1, 0.0, excess));
        }
        for j in 1..=self.max_terms {
            let inner = (tol * INNER_TOL_FACTOR / term.sup_norm().max(1.0)).max(1e-15);
            term = &self.censored_integral(&term, inner)?.value * lambda;
            shape = self.ops.integral.apply(&shape);
            scale *= rho;
            sum = &sum + &term;
            excess = excess.max(excess_over(&term, &shape, scale));
            let norm = term.sup_norm();
            let bound = scale * shape.sup_norm();
            if !norm.is_finite() || !bound.is_finite() || norm > 1e200 {
                return Err(CbfError::NonConvergence {
                    terms: j + 1,
                    last_term: norm,
                    advice: "series terms overflowed; reduce |lambda| or T".into(),
                });
            }
            let ratio = if prev_bound > 0.0 { bound / prev_bound } else { 0.0 };
            prev_bound = bound;
            let tail = if ratio < 1.0 { bound * ratio / (1.0 - ratio) } else { f64::INFINITY };
            if norm < tol && bound < tol && tail < tol {
                return Ok((sum, j + 1, tail, excess));
            }
        }
        Err(CbfError::NonConvergence {
            terms: self.max_terms,
            last_term: term.sup_norm(),
            advice: "term cap reached; reduce |lambda| or T".into(),
        })
    }

    /// `φ = φ₀ Σ_j (λ I_c)^j 1`.
    pub fn solve_resolvent(&self, lambda: f64, phi0: f64, tol: f64) -> Result<SeriesSolution> {
        Self::check_tol(tol)?;
        let grid = self.grid();
        let one = GridFunction::constant(grid, 1.0);
        let (sum, terms, tail, excess) =
            self.power_series(&one * phi0, one.clone(), phi0.abs(), lambda, tol)?;
        let residual = self.residual(&sum, lambda, None);
        Ok(SeriesSolution {
            phi: sum,
            terms_used: terms,
            tail_bound: tail,
            residual,
            q_used: self.pair.q(),
            lambda,
            phi0,
            bound_excess: excess,
        })
    }

    /// `φ = φ₀ Σ_j (λ I_c)^j 1 + Σ_j λ^j I_c^{j+1} g`.
    pub fn solve_resolvent_inhom(
        &self,
        lambda: f64,
        phi0: f64,
        g: &GridFunction,
        tol: f64,
    ) -> Result<SeriesSolution> {
        self.check_grid(g)?;
        Self::check_tol(tol)?;
        let grid = self.grid();
        let hom = self.solve_resolvent(lambda, phi0, 0.5 * tol)?;
        let first = self.censored_integral(g, 0.5 * tol * INNER_TOL_FACTOR)?.value;
        let potential = GridFunction::from_fn(grid, |x| self.pair.potential(x))?;
        let coef = g.sup_norm() / (1.0 - self.pair.q());
        let (part, terms, tail, excess) = self.power_series(first, potential, coef, lambda, 0.5 * tol)?;
        let phi = &hom.phi + &part;
        let residual = self.residual(&phi, lambda, Some(g));
        Ok(SeriesSolution {
            phi,
            terms_used: hom.terms_used.max(terms),
            tail_bound: hom.tail_bound + tail,
            residual,
            q_used: self.pair.q(),
            lambda,
            phi0,
            bound_excess: hom.bound_excess.max(excess),
        })
    }

    /// `Σ_j λ^j (I_c)^j 1` at `x ∈ [0, T]`. For `λ ≤ 0` the value is a Laplace
    /// transform of a positive lifetime and must lie in `[0, 1]`.
    pub fn lifetime_laplace(&self, lambda: f64, x: f64, tol: f64) -> Result<f64> {
        let grid = self.grid();
        if !(0.0..=grid.t_end).contains(&x) {
            return Err(CbfError::Domain(format!("x = {x} outside [0, {}]", grid.t_end)));
        }
        let sol = self.solve_resolvent(lambda, 1.0, tol)?;
        let v = sol.phi.eval(x);
        if lambda <= 0.0 && !(-tol..=1.0 + tol).contains(&v) {
            return Err(CbfError::numerical_with(
                "lifetime Laplace transform left [0, 1]",
                vec![("value".into(), v), ("x".into(), x), ("lambda".into(), lambda)],
            ));
        }
        Ok(v)
    }
}

/// Largest excess of `|term|` over `scale · shape`, relative to the bound's sup norm.
fn excess_over(term: &GridFunction, shape: &GridFunction, scale: f64) -> f64 {
    let norm = scale * shape.sup_norm();
    if norm == 0.0 {
        return if term.sup_norm() == 0.0 { 0.0 } else { f64::INFINITY };
    }
    term.values()
        .iter()
        .zip(shape.values())
        .map(|(t, s)| (t.abs() - scale * s) / norm)
        .fold(f64::NEG_INFINITY, f64::max)
}
