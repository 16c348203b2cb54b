//! Sonine pairs `(μ̄, k)`: the Lévy tail and the potential density of a
//! complete Bernstein function, with their first two primitives.

use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;
use statrs::function::gamma::gamma;

use crate::bernstein::BernsteinSpec;
use crate::error::{CbfError, Result};
use crate::laplace;

/// How the kernels of a pair are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    ClosedForm,
    NumericInversion { nodes: usize },
    /// Tail and density taken from different functions; not a Sonine pair.
    Mismatched,
}

#[derive(Debug, Clone, Copy)]
pub struct PairOptions {
    pub contour_nodes: usize,
}

impl Default for PairOptions {
    fn default() -> Self {
        PairOptions {
            contour_nodes: laplace::DEFAULT_NODES,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Side {
    Tail,
    Density,
}

#[derive(Debug, Clone)]
enum Source {
    /// `scale[d] · x^{d - exponent}` for the `d`-th primitive.
    Power { exponent: f64, scale: [f64; 3] },
    Inverted {
        spec: Arc<BernsteinSpec>,
        side: Side,
        nodes: usize,
    },
}

impl Source {
    fn eval(&self, x: f64, order: i32) -> f64 {
        if x <= 0.0 {
            return if order == 0 { f64::INFINITY } else { 0.0 };
        }
        match self {
            Source::Power { exponent, scale } => scale[order as usize] * x.powf(order as f64 - exponent),
            Source::Inverted { spec, side, nodes } => {
                let transform = |s: Complex64| -> Result<Complex64> {
                    let f = spec.eval_f_complex(s)?;
                    let base = match side {
                        Side::Tail => f / s,
                        Side::Density => 1.0 / f,
                    };
                    Ok(base / s.powi(order))
                };
                laplace::invert_value(&transform, x, *nodes).unwrap_or(f64::NAN)
            }
        }
    }

    fn power(&self) -> Option<(f64, f64, f64)> {
        match self {
            Source::Power { exponent, scale } => Some((*exponent, scale[0], scale[1])),
            Source::Inverted { .. } => None,
        }
    }
}

/// Local power behaviour `μ̄(x) ~ x^{-a}`, `k(x) ~ x^{-b}` as `x → 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocalExponents {
    pub tail: f64,
    pub density: f64,
}

/// The Sonine pair of a complete Bernstein function together with `q`.
#[derive(Debug, Clone)]
pub struct KernelPair {
    tail: Source,
    density: Source,
    exponents: LocalExponents,
    q: f64,
    provenance: Provenance,
    alpha: Option<f64>,
}

fn stable_sources(alpha: f64) -> (Source, Source) {
    let tail = Source::Power {
        exponent: alpha,
        scale: [1.0 / gamma(1.0 - alpha), 1.0 / gamma(2.0 - alpha), 1.0 / gamma(3.0 - alpha)],
    };
    let density = Source::Power {
        exponent: 1.0 - alpha,
        scale: [1.0 / gamma(alpha), 1.0 / gamma(1.0 + alpha), 1.0 / gamma(2.0 + alpha)],
    };
    (tail, density)
}

fn fitted_exponent(src: &Source) -> Result<f64> {
    let (x1, x2) = (1e-10, 1e-9);
    let (v1, v2) = (src.eval(x1, 0), src.eval(x2, 0));
    let e = -(v2 / v1).ln() / (x2 / x1).ln();
    if !e.is_finite() || !(e > -0.5 && e < 1.0) {
        return Err(CbfError::numerical_with(
            "kernel local exponent out of range",
            vec![("exponent".into(), e), ("value_1e-10".into(), v1), ("value_1e-9".into(), v2)],
        ));
    }
    Ok(e.max(0.0))
}

/// Builds the Sonine pair of `spec`. The stable family is closed form; any
/// other spec is inverted numerically along a Talbot contour.
pub fn make_pair(spec: &BernsteinSpec, options: &PairOptions) -> Result<KernelPair> {
    spec.validate()?;
    let (a, b) = spec.killing_drift();
    if a != 0.0 || b != 0.0 {
        return Err(CbfError::Validation(format!(
            "kernels need zero killing and drift, got a = {a}, b = {b}"
        )));
    }
    let (tail, density, provenance, alpha) = match spec {
        BernsteinSpec::Stable { alpha } => {
            let (t, d) = stable_sources(*alpha);
            (t, d, Provenance::ClosedForm, Some(*alpha))
        }
        _ => {
            spec.eval_f_complex(Complex64::new(1.0, 1.0))?;
            let spec = Arc::new(spec.clone());
            let nodes = options.contour_nodes;
            let tail = Source::Inverted {
                spec: spec.clone(),
                side: Side::Tail,
                nodes,
            };
            let density = Source::Inverted {
                spec,
                side: Side::Density,
                nodes,
            };
            let mut diag = Vec::new();
            for &x in &[1e-6, 1e-3, 1.0, 10.0] {
                for (name, src) in [("tail", &tail), ("density", &density)] {
                    let v = src.eval(x, 0);
                    if !(v.is_finite() && v > 0.0) {
                        diag.push((format!("{name}({x})"), v));
                    }
                }
            }
            if !diag.is_empty() {
                return Err(CbfError::numerical_with("contour inversion failed", diag));
            }
            (tail, density, Provenance::NumericInversion { nodes }, None)
        }
    };
    KernelPair::assemble(tail, density, provenance, alpha)
}

impl KernelPair {
    fn assemble(tail: Source, density: Source, provenance: Provenance, alpha: Option<f64>) -> Result<Self> {
        let exponents = LocalExponents {
            tail: match tail.power() {
                Some((e, _, _)) => e,
                None => fitted_exponent(&tail)?,
            },
            density: match density.power() {
                Some((e, _, _)) => e,
                None => fitted_exponent(&density)?,
            },
        };
        let mut pair = KernelPair {
            tail,
            density,
            exponents,
            q: f64::NAN,
            provenance,
            alpha,
        };
        pair.q = compute_q(&pair)?;
        Ok(pair)
    }

    /// Stable pair `α ∈ (0,1)` in closed form.
    pub fn stable(alpha: f64) -> Result<Self> {
        make_pair(&BernsteinSpec::stable(alpha), &PairOptions::default())
    }

    /// Tail of `tail_from` paired with the density of `density_from`. Used as a
    /// negative control; the result is generally not a Sonine pair.
    pub fn mismatched(tail_from: &KernelPair, density_from: &KernelPair) -> Result<Self> {
        KernelPair::assemble(
            tail_from.tail.clone(),
            density_from.density.clone(),
            Provenance::Mismatched,
            None,
        )
    }

    /// Lévy tail `μ̄(x) = μ(x, ∞)`.
    pub fn tail(&self, x: f64) -> f64 {
        self.tail.eval(x, 0)
    }

    /// `M(x) = ∫₀ˣ μ̄`.
    pub fn tail_primitive(&self, x: f64) -> f64 {
        self.tail.eval(x, 1)
    }

    /// `∫₀ˣ M`.
    pub fn tail_primitive2(&self, x: f64) -> f64 {
        self.tail.eval(x, 2)
    }

    /// Potential density `k`.
    pub fn density(&self, x: f64) -> f64 {
        self.density.eval(x, 0)
    }

    /// Potential `P(x) = U(x) = ∫₀ˣ k`.
    pub fn potential(&self, x: f64) -> f64 {
        self.density.eval(x, 1)
    }

    /// `∫₀ˣ P`.
    pub fn potential_primitive(&self, x: f64) -> f64 {
        self.density.eval(x, 2)
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn exponents(&self) -> LocalExponents {
        self.exponents
    }

    /// Stable index when the pair is the closed-form stable pair.
    pub fn stable_alpha(&self) -> Option<f64> {
        self.alpha
    }

    /// Errors unless `q < 1`, the hypothesis every series solver relies on.
    pub fn require_contraction(&self) -> Result<()> {
        if self.q < 1.0 {
            Ok(())
        } else {
            Err(CbfError::HypothesisViolation { q: self.q })
        }
    }

    /// CSV with columns `x, mu_bar, k, M, P`.
    pub fn table_csv(&self, xs: &[f64]) -> String {
        let mut out = String::from("x,mu_bar,k,M,P\n");
        for &x in xs {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                x,
                self.tail(x),
                self.density(x),
                self.tail_primitive(x),
                self.potential(x)
            );
        }
        out
    }
}

/// Sequence index range `x = 2^{-j}` for the limit defining `q`.
const Q_LEVELS: std::ops::RangeInclusive<i32> = 10..=30;
const Q_AGREEMENT: f64 = 1e-9;
/// Largest spread accepted when no triple meets [`Q_AGREEMENT`].
const Q_FALLBACK: f64 = 1e-7;

fn aitken(s: &[f64]) -> Vec<f64> {
    s.windows(3)
        .map(|w| {
            let d1 = w[1] - w[0];
            let d2 = w[2] - w[1];
            let den = d2 - d1;
            if den.abs() <= 1e-14 * w[2].abs().max(1e-300) {
                w[2]
            } else {
                w[2] - d2 * d2 / den
            }
        })
        .collect()
}

fn spread(w: &[f64]) -> f64 {
    (w[1] - w[0]).abs().max((w[2] - w[1]).abs())
}

fn settled(s: &[f64]) -> Option<f64> {
    s.windows(3).find(|w| spread(w) <= Q_AGREEMENT).map(|w| w[2])
}

/// `q = lim_{x→0} μ̄(x) P(x)`: closed form for power kernels, otherwise
/// Aitken-accelerated along `x = 2^{-j}` until three consecutive values agree.
/// Slow corrections such as `x^{0.3}` leave sampling noise near `1e-9`; then
/// the tightest triple over all acceleration levels is used.
pub fn compute_q(pair: &KernelPair) -> Result<f64> {
    if let (Some((ea, ca, _)), Some((eb, _, cb))) = (pair.tail.power(), pair.density.power()) {
        // μ̄P = ca·cb·x^{1 - ea - eb}
        let p = 1.0 - ea - eb;
        return Ok(if p.abs() < 1e-15 {
            ca * cb
        } else if p > 0.0 {
            0.0
        } else {
            f64::INFINITY
        });
    }
    let seq: Vec<f64> = Q_LEVELS
        .map(|j| {
            let x = (-j as f64).exp2();
            pair.tail(x) * pair.potential(x)
        })
        .collect();
    let mut level = seq.clone();
    let mut best: Option<(f64, f64)> = None;
    for _ in 0..4 {
        if let Some(q) = settled(&level) {
            return Ok(q);
        }
        for w in level.windows(3) {
            if best.is_none_or(|(b, _)| spread(w) < b) {
                best = Some((spread(w), w[2]));
            }
        }
        if level.len() < 5 {
            break;
        }
        level = aitken(&level);
    }
    if let Some((s, q)) = best {
        if s <= Q_FALLBACK {
            return Ok(q);
        }
    }
    Err(CbfError::numerical_with(
        "limit defining q did not settle",
        Q_LEVELS.zip(seq).map(|(j, v)| (format!("x=2^-{j}"), v)).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn stable_half_is_symmetric() {
        let p = KernelPair::stable(0.5).unwrap();
        for &x in &[0.01, 0.5, 3.0] {
            let want = 1.0 / (PI * x).sqrt();
            assert!((p.tail(x) - want).abs() < 1e-14 * want);
            assert!((p.density(x) - want).abs() < 1e-14 * want);
        }
        assert!((p.potential(1.0) - 1.1283791671).abs() < 1e-10);
        assert!((p.q() - 2.0 / PI).abs() < 1e-14);
    }

    #[test]
    fn stable_q_matches_reflection_identity() {
        for i in 1..10 {
            let alpha = i as f64 / 10.0;
            let q = KernelPair::stable(alpha).unwrap().q();
            let want = (PI * alpha).sin() / (PI * alpha);
            assert!((q - want).abs() < 1e-12, "{alpha}");
        }
    }

    #[test]
    fn numeric_q_agrees_with_closed_form() {
        // tempered stable shares the stable small-x behaviour
        let spec = BernsteinSpec::tempered_stable(0.5, 1.0);
        let p = make_pair(&spec, &PairOptions::default()).unwrap();
        assert!((p.q() - 2.0 / PI).abs() < 1e-8, "{}", p.q());
        assert!((p.exponents().tail - 0.5).abs() < 1e-3);
    }

    #[test]
    fn tempered_kernels_match_closed_forms() {
        // θ = 1, α = 1/2: k(x) = 1 + e^{-x}/sqrt(πx) + erf(sqrt(x))
        let spec = BernsteinSpec::tempered_stable(0.5, 1.0);
        let p = make_pair(&spec, &PairOptions::default()).unwrap();
        for &x in &[0.01f64, 0.3, 1.0, 4.0] {
            let want = 1.0 + (-x).exp() / (PI * x).sqrt() + statrs::function::erf::erf(x.sqrt());
            let got = p.density(x);
            assert!((got - want).abs() < 1e-9 * want, "{x}: {got} vs {want}");
        }
    }

    #[test]
    fn custom_density_cannot_be_inverted() {
        let spec = BernsteinSpec::from_density(Arc::new(|t: f64| t.powf(-1.5)));
        assert!(make_pair(&spec, &PairOptions::default()).is_err());
    }

    #[test]
    fn mismatched_pair_has_degenerate_q() {
        let a = KernelPair::stable(0.5).unwrap();
        let b = KernelPair::stable(0.75).unwrap();
        let m = KernelPair::mismatched(&a, &b).unwrap();
        assert_eq!(m.provenance(), Provenance::Mismatched);
        assert_eq!(m.q(), 0.0);
    }

    #[test]
    fn hypothesis_guard() {
        let p = KernelPair::stable(0.5).unwrap();
        assert!(p.require_contraction().is_ok());
        let a = KernelPair::stable(0.75).unwrap();
        let b = KernelPair::stable(0.5).unwrap();
        let m = KernelPair::mismatched(&a, &b).unwrap();
        assert!(matches!(m.require_contraction(), Err(CbfError::HypothesisViolation { .. })));
    }
}
