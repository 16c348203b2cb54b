//! Path-mode simulation of the censored stable subordinator.
//!
//! Each cycle runs `level - S_t` on micro-steps until the increment would
//! cross 0, records the pre-step level as the undershoot and restarts from
//! it. The step is `min(dt, U(level)/CYCLE_RESOLUTION)`, refreshed whenever
//! the level halves, so the crossing stays resolved near 0; each cycle ramps
//! up from `2^-RAMP` of that step.

use rand::Rng;

use super::stable::StableSampler;

pub const CYCLE_RESOLUTION: f64 = 64.0;
const RAMP: i32 = 12;
const MAX_REDRAWS: usize = 1_000;

/// A discounted functional `∫ e^{λt} g(S^c_t) dt` accumulated along a path.
#[derive(Clone, Copy)]
pub struct Functional<'a> {
    pub lambda: f64,
    pub g: &'a (dyn Fn(f64) -> f64 + Sync),
}

/// One simulated path of the censored process.
#[derive(Debug, Clone, Default)]
pub struct CensoredPath {
    pub cycle_count: usize,
    pub sigma: Vec<f64>,
    pub undershoots: Vec<f64>,
    pub tau_inf: f64,
    pub functional_acc: Option<f64>,
    pub terminated: bool,
    /// Pathwise bound on the time-discretization error of `tau_inf`
    /// (half of each crossing step).
    pub time_allowance: f64,
    /// Pathwise estimate of the discretization error of `functional_acc`.
    pub functional_allowance: f64,
    pub final_level: f64,
}

pub(crate) struct PathParams {
    pub alpha: f64,
    pub x0: f64,
    pub dt: f64,
    pub max_cycles: usize,
    pub level_floor: f64,
}

fn expected_cycle_time(alpha: f64, y: f64) -> f64 {
    y.powf(alpha) / statrs::function::gamma::gamma(1.0 + alpha)
}

pub(crate) fn run<R: Rng + ?Sized>(p: &PathParams, functional: Option<Functional<'_>>, rng: &mut R) -> CensoredPath {
    let sampler = StableSampler::new(p.alpha);
    let step_gain = sampler.scale(2.0);
    let mut path = CensoredPath {
        functional_acc: functional.map(|_| 0.0),
        ..Default::default()
    };
    let mut level = p.x0;
    let mut t = 0.0;
    let mut acc = 0.0;
    let mut fallow = 0.0;
    while path.cycle_count < p.max_cycles {
        if level < p.level_floor {
            path.terminated = true;
            break;
        }
        let mut h_max = p.dt.min(expected_cycle_time(p.alpha, level) / CYCLE_RESOLUTION);
        let mut reference = level;
        let mut h = h_max * 2f64.powi(-RAMP);
        let mut scale = sampler.scale(h);
        let mut s = 0.0;
        let mut cur = level;
        let mut redraws = 0;
        loop {
            let inc = scale * sampler.unit(rng);
            let next = cur - inc;
            if next <= 0.0 {
                if cur >= level && redraws < MAX_REDRAWS {
                    // no progress yet: the undershoot would equal the start level
                    redraws += 1;
                    continue;
                }
                let half = 0.5 * h;
                if let Some(fun) = functional {
                    let v = (fun.lambda * (t + s)).exp() * (fun.g)(cur);
                    acc += v * half;
                    fallow += v.abs() * half;
                }
                s += half;
                path.time_allowance += half;
                break;
            }
            if let Some(fun) = functional {
                let e = (fun.lambda * (t + s)).exp();
                let (g0, g1) = ((fun.g)(cur), (fun.g)(next));
                acc += e * g0 * h;
                fallow += e * h * ((g1 - g0).abs() + fun.lambda.abs() * h * g0.abs());
            }
            cur = next;
            s += h;
            if cur < 0.5 * reference {
                reference = cur;
                h_max = h_max.min(expected_cycle_time(p.alpha, cur) / CYCLE_RESOLUTION);
                if h > h_max {
                    h = h_max;
                    scale = sampler.scale(h);
                }
            }
            if h < h_max {
                h = 2.0 * h;
                scale *= step_gain;
                if h > h_max {
                    h = h_max;
                    scale = sampler.scale(h);
                }
            }
        }
        path.cycle_count += 1;
        path.sigma.push(s);
        path.undershoots.push(cur);
        t += s;
        level = cur;
    }
    path.tau_inf = t;
    path.final_level = level;
    if functional.is_some() {
        path.functional_acc = Some(acc);
        path.functional_allowance = fallow;
    }
    path
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn undershoots_strictly_decrease() {
        let p = PathParams {
            alpha: 0.5,
            x0: 1.0,
            dt: 1e-3,
            max_cycles: 1_000_000,
            level_floor: 1e-9,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let path = run(&p, None, &mut rng);
            assert!(path.terminated);
            let mut prev = 1.0;
            for &y in &path.undershoots {
                assert!(y < prev && y > 0.0);
                prev = y;
            }
            assert!((path.sigma.iter().sum::<f64>() - path.tau_inf).abs() < 1e-12);
        }
    }
}
