//! Exact sampling of the undershoot chain `y_0 = x0 > y_1 > …`, whose steps
//! have density `k_1(y, r) = μ̄(r) k(y - r)` on `(0, y)`.

use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::error::{CbfError, Result};
use crate::kernels::KernelPair;
use crate::ops::first_kernel_cdf;

/// Default number of cells in the tabulated inverse CDF for non-stable pairs.
pub const DEFAULT_TABLE_CELLS: usize = 128;

/// Space marginals of the censored process at the censoring times.
#[derive(Debug, Clone)]
pub struct CensoringChain {
    pub levels: Vec<f64>,
    /// Mean duration `U(y_j) = P(y_j)` of the cycle started at each level.
    pub expected_cycle_times: Vec<f64>,
    pub terminated: bool,
}

impl CensoringChain {
    /// `Σ_j U(y_j)`, the conditional mean of the lifetime given the chain.
    pub fn lifetime_mean(&self) -> f64 {
        self.expected_cycle_times.iter().sum()
    }
}

/// Draws `y' ~ k_1(y, ·)`.
pub struct StepSampler<'a> {
    pair: &'a KernelPair,
    beta: Option<Beta<f64>>,
    cells: usize,
}

impl<'a> StepSampler<'a> {
    pub fn new(pair: &'a KernelPair) -> Result<Self> {
        let beta = match pair.stable_alpha() {
            Some(alpha) => Some(
                Beta::new(1.0 - alpha, alpha).map_err(|e| CbfError::numerical(format!("beta law: {e}")))?,
            ),
            None => None,
        };
        Ok(StepSampler {
            pair,
            beta,
            cells: DEFAULT_TABLE_CELLS,
        })
    }

    pub fn with_table_cells(mut self, cells: usize) -> Self {
        self.cells = cells.max(4);
        self
    }

    pub fn next<R: Rng + ?Sized>(&self, y: f64, rng: &mut R) -> Result<f64> {
        match &self.beta {
            // r/y ~ Beta(1-α, α) for the stable pair
            Some(b) => Ok(y * b.sample(rng)),
            None => {
                let (nodes, cdf) = first_kernel_cdf(self.pair, y, self.cells)?;
                let total = *cdf.last().expect("nonempty table");
                let u = rng.random::<f64>() * total;
                let k = cdf.partition_point(|c| *c < u).clamp(1, cdf.len() - 1);
                let (c0, c1) = (cdf[k - 1], cdf[k]);
                let t = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
                Ok(nodes[k - 1] + t * (nodes[k] - nodes[k - 1]))
            }
        }
    }
}

/// Samples levels until one drops below `level_floor` or `max_steps` is hit.
pub fn sample_chain<R: Rng + ?Sized>(
    sampler: &StepSampler<'_>,
    x0: f64,
    rng: &mut R,
    level_floor: f64,
    max_steps: usize,
) -> Result<CensoringChain> {
    if !(x0 > 0.0) {
        return Err(CbfError::Validation(format!("start level must be positive, got {x0}")));
    }
    let mut levels = vec![x0];
    let mut y = x0;
    let mut terminated = false;
    for _ in 0..max_steps {
        let mut next = sampler.next(y, rng)?;
        // a draw equal to y carries zero probability; redraw on rounding ties
        while !(next < y && next > 0.0) {
            if next <= 0.0 {
                next = f64::MIN_POSITIVE;
                break;
            }
            next = sampler.next(y, rng)?;
        }
        y = next;
        levels.push(y);
        if y < level_floor {
            terminated = true;
            break;
        }
    }
    let expected_cycle_times = levels.iter().map(|&y| sampler.pair.potential(y)).collect();
    Ok(CensoringChain {
        levels,
        expected_cycle_times,
        terminated,
    })
}
