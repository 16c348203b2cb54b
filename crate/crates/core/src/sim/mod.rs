//! Monte Carlo for the censored subordinator: path simulation for the stable
//! family, exact sampling of the undershoot chain for any pair, and the
//! estimators built on them.

mod chain;
mod path;
mod stable;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bernstein::BernsteinSpec;
use crate::error::{CbfError, Result};
use crate::kernels::KernelPair;

pub use chain::{sample_chain, CensoringChain, StepSampler, DEFAULT_TABLE_CELLS};
pub use path::{CensoredPath, Functional, CYCLE_RESOLUTION};
pub use stable::{sample_stable_subordinator_value, sample_unit, StableSampler};

pub const DEFAULT_MAX_CYCLES: usize = 1_000_000;
pub const DEFAULT_FLOOR_RATIO: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMode {
    #[default]
    PathDiscretized,
    ExactChain,
}

fn default_max_cycles() -> usize {
    DEFAULT_MAX_CYCLES
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub spec: BernsteinSpec,
    pub x0: f64,
    /// Largest micro-step in path mode.
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    #[serde(default = "default_max_cycles")]
    pub max_cycles: usize,
    #[serde(default)]
    pub mode: SimMode,
    /// Defaults to `1e-9 · x0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level_floor: Option<f64>,
}

impl SimConfig {
    pub fn stable(alpha: f64, x0: f64, dt: f64, n_paths: usize, seed: u64) -> Self {
        SimConfig {
            spec: BernsteinSpec::stable(alpha),
            x0,
            dt,
            n_paths,
            seed,
            max_cycles: DEFAULT_MAX_CYCLES,
            mode: SimMode::PathDiscretized,
            level_floor: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if !(self.x0 > 0.0 && self.x0.is_finite()) {
            return Err(CbfError::Validation(format!("x0 must be positive, got {}", self.x0)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(CbfError::Validation(format!("dt must be positive, got {}", self.dt)));
        }
        if self.n_paths == 0 {
            return Err(CbfError::Validation("n_paths must be at least 1".into()));
        }
        if self.max_cycles == 0 {
            return Err(CbfError::Validation("max_cycles must be at least 1".into()));
        }
        if let Some(f) = self.level_floor {
            if !(f > 0.0 && f < self.x0) {
                return Err(CbfError::Validation(format!("level_floor must lie in (0, x0), got {f}")));
            }
        }
        Ok(())
    }

    pub fn floor(&self) -> f64 {
        self.level_floor.unwrap_or(DEFAULT_FLOOR_RATIO * self.x0)
    }

    fn path_alpha(&self) -> Result<f64> {
        self.validate()?;
        self.spec.stable_alpha().ok_or_else(|| {
            CbfError::Validation("path mode needs the stable family; use the exact chain for other pairs".into())
        })
    }

    fn params(&self, alpha: f64) -> path::PathParams {
        path::PathParams {
            alpha,
            x0: self.x0,
            dt: self.dt,
            max_cycles: self.max_cycles,
            level_floor: self.floor(),
        }
    }
}

/// Independent stream for path `index` under `seed`.
pub fn rng_stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// A Monte Carlo estimate. `bias_allowance` bounds the discretization and
/// truncation error and is zero for the exact chain.
#[derive(Debug, Clone, Serialize)]
pub struct Estimate {
    pub estimate: f64,
    pub stderr: f64,
    pub n: usize,
    pub excluded: usize,
    pub mode: SimMode,
    pub dt: Option<f64>,
    pub seed: u64,
    pub bias_allowance: f64,
}

impl Estimate {
    /// `|estimate - target| / stderr` after removing the bias allowance.
    pub fn z_score(&self, target: f64) -> f64 {
        let gap = ((self.estimate - target).abs() - self.bias_allowance).max(0.0);
        if self.stderr > 0.0 {
            gap / self.stderr
        } else if gap == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }

    pub fn agrees(&self, target: f64, sigmas: f64) -> bool {
        self.z_score(target) <= sigmas
    }
}

struct Sample {
    value: f64,
    allowance: f64,
    keep: bool,
}

fn summarize(samples: &[Sample], mode: SimMode, dt: Option<f64>, seed: u64) -> Estimate {
    let kept: Vec<&Sample> = samples.iter().filter(|s| s.keep).collect();
    let n = kept.len();
    let nf = n as f64;
    let mean = kept.iter().map(|s| s.value).sum::<f64>() / nf;
    let var = if n > 1 {
        kept.iter().map(|s| (s.value - mean).powi(2)).sum::<f64>() / (nf - 1.0)
    } else {
        0.0
    };
    Estimate {
        estimate: mean,
        stderr: (var / nf).sqrt(),
        n,
        excluded: samples.len() - n,
        mode,
        dt,
        seed,
        bias_allowance: kept.iter().map(|s| s.allowance).sum::<f64>() / nf,
    }
}

/// Mean lifetime left after a path stops at `level`; `U(y)/(1-q)` bounds it.
fn residual_lifetime(alpha: f64, level: f64) -> f64 {
    let q = (std::f64::consts::PI * alpha).sin() / (std::f64::consts::PI * alpha);
    level.powf(alpha) / statrs::function::gamma::gamma(1.0 + alpha) / (1.0 - q)
}

/// One path of the censored process, drawn from stream `index`.
pub fn simulate_censored_path(
    config: &SimConfig,
    functional: Option<Functional<'_>>,
    index: u64,
) -> Result<CensoredPath> {
    let alpha = config.path_alpha()?;
    let mut rng = rng_stream(config.seed, index);
    Ok(path::run(&config.params(alpha), functional, &mut rng))
}

/// All `n_paths` paths, in index order.
pub fn simulate_paths(config: &SimConfig) -> Result<Vec<CensoredPath>> {
    let alpha = config.path_alpha()?;
    let params = config.params(alpha);
    Ok((0..config.n_paths as u64)
        .into_par_iter()
        .map(|i| path::run(&params, None, &mut rng_stream(config.seed, i)))
        .collect())
}

pub fn terminated_fraction(paths: &[CensoredPath]) -> f64 {
    paths.iter().filter(|p| p.terminated).count() as f64 / paths.len().max(1) as f64
}

/// `E^x[τ_∞]` from already simulated paths; paths that hit the cycle cap
/// are excluded and counted.
pub fn lifetime_from_paths(config: &SimConfig, paths: &[CensoredPath]) -> Result<Estimate> {
    let alpha = config.path_alpha()?;
    let samples: Vec<Sample> = paths
        .iter()
        .map(|p| Sample {
            value: p.tau_inf,
            allowance: p.time_allowance + residual_lifetime(alpha, p.final_level),
            keep: p.terminated,
        })
        .collect();
    Ok(summarize(&samples, SimMode::PathDiscretized, Some(config.dt), config.seed))
}

/// Path dump with columns `path_id,cycle,sigma,undershoot`.
pub fn path_dump_csv(paths: &[CensoredPath]) -> String {
    let mut out = String::from("path_id,cycle,sigma,undershoot\n");
    for (id, p) in paths.iter().enumerate() {
        for (j, (s, y)) in p.sigma.iter().zip(&p.undershoots).enumerate() {
            out.push_str(&format!("{id},{},{s:e},{y:e}\n", j + 1));
        }
    }
    out
}

fn path_estimate(
    config: &SimConfig,
    first_cycle_only: bool,
    functional: Option<Functional<'_>>,
    value: impl Fn(&CensoredPath, f64) -> Sample + Sync,
) -> Result<Estimate> {
    let alpha = config.path_alpha()?;
    let mut params = config.params(alpha);
    if first_cycle_only {
        params.max_cycles = 1;
    }
    let samples: Vec<Sample> = (0..config.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let p = path::run(&params, functional, &mut rng_stream(config.seed, i));
            let tail = if p.terminated { residual_lifetime(alpha, p.final_level) } else { 0.0 };
            let mut s = value(&p, tail);
            s.keep = first_cycle_only || p.terminated;
            s
        })
        .collect();
    Ok(summarize(&samples, SimMode::PathDiscretized, Some(config.dt), config.seed))
}

/// `E^x[∫₀^{τ_1} g(x - S_s) ds]` over the first cycle.
pub fn estimate_potential(config: &SimConfig, g: &(dyn Fn(f64) -> f64 + Sync)) -> Result<Estimate> {
    path_estimate(config, true, Some(Functional { lambda: 0.0, g }), |p, _| Sample {
        value: p.functional_acc.unwrap_or(0.0),
        allowance: p.functional_allowance,
        keep: true,
    })
}

/// `E^x[∫₀^{τ_∞} e^{λt} g(S^c_t) dt]`, `λ ≤ 0`. Paths that hit the cycle cap
/// are excluded and counted.
pub fn estimate_censored_functional(
    config: &SimConfig,
    g: &(dyn Fn(f64) -> f64 + Sync),
    lambda: f64,
) -> Result<Estimate> {
    if lambda > 0.0 {
        return Err(CbfError::Validation(format!("discount must be <= 0, got {lambda}")));
    }
    path_estimate(config, false, Some(Functional { lambda, g }), |p, tail| Sample {
        value: p.functional_acc.unwrap_or(0.0),
        allowance: p.functional_allowance + tail * (g)(p.final_level).abs(),
        keep: true,
    })
}

/// `E^x[e^{λ τ_∞}]`, `λ ≤ 0`.
pub fn estimate_lifetime_laplace(config: &SimConfig, lambda: f64) -> Result<Estimate> {
    if lambda > 0.0 {
        return Err(CbfError::Validation(format!("discount must be <= 0, got {lambda}")));
    }
    path_estimate(config, false, None, |p, tail| Sample {
        value: (lambda * p.tau_inf).exp(),
        allowance: lambda.abs() * (p.time_allowance + tail),
        keep: true,
    })
}

/// `E^x[σ_1]`, the mean first cycle duration, in path mode.
pub fn estimate_first_cycle(config: &SimConfig) -> Result<Estimate> {
    path_estimate(config, true, None, |p, _| Sample {
        value: p.sigma.first().copied().unwrap_or(0.0),
        allowance: p.time_allowance,
        keep: true,
    })
}

/// Exact cycle duration from level `y`: `(y / S_1)^α` for the stable family.
pub fn sample_cycle_duration<R: rand::Rng + ?Sized>(alpha: f64, y: f64, rng: &mut R) -> f64 {
    (y / sample_unit(alpha, rng)).powf(alpha)
}

/// `n` exact chains from `x0`, one stream per chain.
pub fn sample_chains(pair: &KernelPair, x0: f64, n: usize, seed: u64, level_floor: f64) -> Result<Vec<CensoringChain>> {
    let sampler = StepSampler::new(pair)?;
    (0..n as u64)
        .into_par_iter()
        .map(|i| sample_chain(&sampler, x0, &mut rng_stream(seed, i), level_floor, DEFAULT_MAX_CYCLES))
        .collect()
}

/// `E^x[τ_∞]` as the chain average of `Σ_j U(y_j)`. No time discretization
/// is involved; chains are cut at `1e-9 · x0`.
pub fn estimate_lifetime_mean(pair: &KernelPair, x0: f64, n_chains: usize, seed: u64) -> Result<Estimate> {
    if n_chains == 0 {
        return Err(CbfError::Validation("need at least one chain".into()));
    }
    let chains = sample_chains(pair, x0, n_chains, seed, DEFAULT_FLOOR_RATIO * x0)?;
    Ok(chain_lifetime_estimate(&chains, seed))
}

/// Chain average of `Σ_j U(y_j)` over chains that reached the floor.
pub fn chain_lifetime_estimate(chains: &[CensoringChain], seed: u64) -> Estimate {
    let samples: Vec<Sample> = chains
        .iter()
        .map(|c| Sample {
            value: c.lifetime_mean(),
            allowance: 0.0,
            keep: c.terminated,
        })
        .collect();
    summarize(&samples, SimMode::ExactChain, None, seed)
}

/// One-sample Kolmogorov–Smirnov distance.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_by(f64::total_cmp);
    xb.sort_by(f64::total_cmp);
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < xa.len() && j < xb.len() {
        let x = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= x {
            i += 1;
        }
        while j < xb.len() && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic 1% critical value of the KS distance for sample sizes `n`, `m`
/// (`m = None` for the one-sample test).
pub fn ks_critical_1pct(n: usize, m: Option<usize>) -> f64 {
    const C: f64 = 1.627_624;
    let eff = match m {
        None => n as f64,
        Some(m) => (n * m) as f64 / (n + m) as f64,
    };
    C / eff.sqrt()
}
