//! Quadrature building blocks: Gauss–Jacobi rules on the unit interval and an
//! adaptive Gauss–Kronrod integrator for finite and semi-infinite ranges.

use nalgebra::{DMatrix, SymmetricEigen};
use statrs::function::gamma::ln_gamma;

use crate::error::{CbfError, Result};

/// A fixed rule for `∫_0^1 s^{-a} f(s) ds ≈ Σ w_q f(s_q)`.
#[derive(Debug, Clone)]
pub struct UnitRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub exponent: f64,
}

impl UnitRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&s, &w)| w * f(s))
            .sum()
    }
}

/// Gauss–Legendre rule with `q` nodes on [0, 1], nodes in increasing order.
pub fn gauss_legendre_unit(q: usize) -> UnitRule {
    jacobi_unit(q, 0.0)
}

/// Gauss–Jacobi rule with weight `s^{-a}` on [0, 1], `a < 1`.
///
/// Built by Golub–Welsch from the three-term recurrence of the Jacobi
/// polynomials with parameters (0, -a) on [-1, 1].
pub fn jacobi_unit(q: usize, a: f64) -> UnitRule {
    assert!(q >= 1, "rule needs at least one node");
    assert!(a < 1.0, "weight s^-a must be integrable");
    let (alpha, beta) = (0.0_f64, -a);
    let ab = alpha + beta;
    let mut jm = DMatrix::<f64>::zeros(q, q);
    for k in 0..q {
        let kf = k as f64;
        let diag = if k == 0 {
            (beta - alpha) / (ab + 2.0)
        } else {
            (beta * beta - alpha * alpha) / ((2.0 * kf + ab) * (2.0 * kf + ab + 2.0))
        };
        jm[(k, k)] = diag;
        if k + 1 < q {
            let j = kf + 1.0;
            let s = 2.0 * j + ab;
            let num = 4.0 * j * (j + alpha) * (j + beta) * (j + ab);
            let den = s * s * (s + 1.0) * (s - 1.0);
            let off = (num / den).sqrt();
            jm[(k, k + 1)] = off;
            jm[(k + 1, k)] = off;
        }
    }
    let mu0 = ((ab + 1.0) * std::f64::consts::LN_2 + ln_gamma(alpha + 1.0) + ln_gamma(beta + 1.0)
        - ln_gamma(ab + 2.0))
    .exp();
    let eig = SymmetricEigen::new(jm);
    let mut pairs: Vec<(f64, f64)> = (0..q)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    // map x in [-1,1] to s = (1+x)/2; (1+x)^{-a} = 2^{-a} s^{-a}, dx = 2 ds
    let scale = 2.0_f64.powf(a - 1.0);
    UnitRule {
        nodes: pairs.iter().map(|p| 0.5 * (1.0 + p.0)).collect(),
        weights: pairs.iter().map(|p| p.1 * scale).collect(),
        exponent: a,
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn kronrod15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = fc * WGK[7];
    let mut rg = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        rk += WGK[j] * s;
        if j % 2 == 1 {
            rg += WG[j / 2] * s;
        }
    }
    (rk * h, ((rk - rg) * h).abs())
}

/// Globally adaptive G7–K15 integration on a finite interval.
///
/// The integrand is never evaluated at the endpoints, so integrable endpoint
/// singularities are allowed.
pub fn integrate(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_evals: usize,
) -> Result<Integral> {
    if a == b {
        return Ok(Integral {
            value: 0.0,
            error: 0.0,
            evals: 0,
        });
    }
    let (v, e) = kronrod15(&f, a, b);
    let mut segs = vec![(a, b, v, e)];
    let mut evals = 15;
    loop {
        let total: f64 = segs.iter().map(|s| s.2).sum();
        let err: f64 = segs.iter().map(|s| s.3).sum();
        if !total.is_finite() {
            return Err(CbfError::numerical_with(
                "non-finite integrand",
                vec![("a".into(), a), ("b".into(), b)],
            ));
        }
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok(Integral {
                value: total,
                error: err,
                evals,
            });
        }
        if evals + 30 > max_evals {
            return Err(CbfError::numerical_with(
                "quadrature budget exhausted",
                vec![
                    ("value".into(), total),
                    ("error_estimate".into(), err),
                    ("evals".into(), evals as f64),
                ],
            ));
        }
        let (idx, _) = segs
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (sa, sb, _, _) = segs.swap_remove(idx);
        let m = 0.5 * (sa + sb);
        let (v1, e1) = kronrod15(&f, sa, m);
        let (v2, e2) = kronrod15(&f, m, sb);
        evals += 30;
        segs.push((sa, m, v1, e1));
        segs.push((m, sb, v2, e2));
    }
}

/// Adaptive integration over `[a, ∞)`.
///
/// For `a > 0` the substitution `t = a·e^v` turns algebraic tails into
/// exponential ones before `v = u/(1-u)` compactifies the range; otherwise
/// `t = a + u/(1-u)` is used directly.
pub fn integrate_to_infinity(
    f: impl Fn(f64) -> f64,
    a: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_evals: usize,
) -> Result<Integral> {
    let g = |u: f64| {
        let om = 1.0 - u;
        let s = u / om;
        let v = if a > 0.0 {
            let t = a * s.exp();
            f(t) * t * (1.0 / (om * om))
        } else {
            f(a + s) / (om * om)
        };
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    integrate(g, 0.0, 1.0, abs_tol, rel_tol, max_evals)
}
