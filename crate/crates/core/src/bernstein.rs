//! Complete Bernstein functions: evaluation, conjugation and the
//! classification of Lévy triplets by the behaviour of `λ/f(λ)` at 0 and ∞.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize, Serializer};
use statrs::function::gamma::gamma;

use crate::error::{CbfError, Result};
use crate::quadrature;

/// Positive Lévy density handle `t ↦ m(t)`, `t > 0`.
pub type DensityFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// One term `weight · t^{-1-index} · e^{-rate·t}` of a parametric Lévy density.
///
/// Each term is completely monotone for `index ≥ -1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerExpTerm {
    pub weight: f64,
    pub index: f64,
    #[serde(default)]
    pub rate: f64,
}

impl PowerExpTerm {
    fn density(&self, t: f64) -> f64 {
        self.weight * t.powf(-1.0 - self.index) * (-self.rate * t).exp()
    }

    /// `∫ (1 - e^{-st}) m(t) dt`, continued analytically off the real axis.
    fn levy_integral(&self, s: Complex64) -> Complex64 {
        let (c, p, r) = (self.weight, self.index, self.rate);
        if p == 0.0 {
            return c * (Complex64::new(1.0, 0.0) + s / r).ln();
        }
        // Γ(-p) = Γ(1-p)/(-p)
        let g = gamma(1.0 - p) / (-p);
        let rp = if r == 0.0 { 0.0 } else { r.powf(p) };
        c * g * (Complex64::new(rp, 0.0) - (s + r).powf(p))
    }
}

/// Lévy density of an explicit triplet.
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LevyDensity {
    /// Finite sum of [`PowerExpTerm`]s; has a closed-form complex Laplace exponent.
    PowerExp { terms: Vec<PowerExpTerm> },
    /// Arbitrary density; only real-axis evaluation is available.
    #[serde(skip)]
    Custom(DensityFn),
}

impl fmt::Debug for LevyDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LevyDensity::PowerExp { terms } => f.debug_struct("PowerExp").field("terms", terms).finish(),
            LevyDensity::Custom(_) => f.write_str("Custom(<fn>)"),
        }
    }
}

impl LevyDensity {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            LevyDensity::PowerExp { terms } => terms.iter().map(|term| term.density(t)).sum(),
            LevyDensity::Custom(m) => m(t),
        }
    }
}

/// A complete Bernstein function `f(λ) = a + bλ + ∫(1 - e^{-λt}) m(t) dt`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum BernsteinSpec {
    /// `f(λ) = λ^α`.
    Stable { alpha: f64 },
    /// `f(λ) = (λ + θ)^α - θ^α`.
    TemperedStable { alpha: f64, theta: f64 },
    ExplicitTriplet {
        #[serde(default)]
        a: f64,
        #[serde(default)]
        b: f64,
        levy_density: LevyDensity,
    },
}

/// Tolerances for the Lévy integral of explicit triplets.
const QUAD_REL: f64 = 1e-12;
const QUAD_ABS: f64 = 1e-14;
const QUAD_BUDGET: usize = 400_000;

impl BernsteinSpec {
    pub fn stable(alpha: f64) -> Self {
        BernsteinSpec::Stable { alpha }
    }

    pub fn tempered_stable(alpha: f64, theta: f64) -> Self {
        BernsteinSpec::TemperedStable { alpha, theta }
    }

    /// Explicit triplet with `a = b = 0` and the given density handle.
    pub fn from_density(m: DensityFn) -> Self {
        BernsteinSpec::ExplicitTriplet {
            a: 0.0,
            b: 0.0,
            levy_density: LevyDensity::Custom(m),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CbfError::Validation(msg));
        match self {
            BernsteinSpec::Stable { alpha } => {
                if !(*alpha > 0.0 && *alpha < 1.0) {
                    return bad(format!("stable index alpha must lie in (0,1), got {alpha}"));
                }
            }
            BernsteinSpec::TemperedStable { alpha, theta } => {
                if !(*alpha > 0.0 && *alpha < 1.0) {
                    return bad(format!("tempered index alpha must lie in (0,1), got {alpha}"));
                }
                if !(*theta > 0.0 && theta.is_finite()) {
                    return bad(format!("tempering theta must be positive, got {theta}"));
                }
            }
            BernsteinSpec::ExplicitTriplet { a, b, levy_density } => {
                if !(*a >= 0.0 && a.is_finite() && *b >= 0.0 && b.is_finite()) {
                    return bad(format!("killing a and drift b must be finite and >= 0, got ({a}, {b})"));
                }
                if let LevyDensity::PowerExp { terms } = levy_density {
                    for t in terms {
                        if !(t.weight > 0.0 && t.weight.is_finite()) {
                            return bad(format!("term weight must be positive, got {}", t.weight));
                        }
                        if !(t.index >= -1.0 && t.index < 1.0) {
                            return bad(format!("term index must lie in [-1,1), got {}", t.index));
                        }
                        if !(t.rate >= 0.0 && t.rate.is_finite()) {
                            return bad(format!("term rate must be >= 0, got {}", t.rate));
                        }
                        if t.index <= 0.0 && t.rate == 0.0 {
                            return bad("terms with index <= 0 need a positive rate".into());
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Killing and drift `(a, b)`.
    pub fn killing_drift(&self) -> (f64, f64) {
        match self {
            BernsteinSpec::ExplicitTriplet { a, b, .. } => (*a, *b),
            _ => (0.0, 0.0),
        }
    }

    /// Stable index if this is the plain stable family.
    pub fn stable_alpha(&self) -> Option<f64> {
        match self {
            BernsteinSpec::Stable { alpha } => Some(*alpha),
            _ => None,
        }
    }

    /// Lévy density `m(t)`.
    pub fn levy_density(&self, t: f64) -> f64 {
        match self {
            BernsteinSpec::Stable { alpha } => alpha * t.powf(-1.0 - alpha) / gamma(1.0 - alpha),
            BernsteinSpec::TemperedStable { alpha, theta } => {
                alpha * t.powf(-1.0 - alpha) * (-theta * t).exp() / gamma(1.0 - alpha)
            }
            BernsteinSpec::ExplicitTriplet { levy_density, .. } => levy_density.eval(t),
        }
    }

    /// `f(λ)`; explicit triplets go through adaptive quadrature split at `t = 1`.
    pub fn eval_f(&self, lambda: f64) -> Result<f64> {
        if !(lambda > 0.0) {
            return Err(CbfError::Domain(format!("f is evaluated at lambda > 0, got {lambda}")));
        }
        match self {
            BernsteinSpec::Stable { alpha } => Ok(lambda.powf(*alpha)),
            // θ^α ((1 + λ/θ)^α - 1), without cancellation for small λ
            BernsteinSpec::TemperedStable { alpha, theta } => {
                Ok(theta.powf(*alpha) * (alpha * (lambda / theta).ln_1p()).exp_m1())
            }
            BernsteinSpec::ExplicitTriplet { a, b, levy_density } => {
                let integrand = |t: f64| -(-lambda * t).exp_m1() * levy_density.eval(t);
                let head = quadrature::integrate(integrand, 0.0, 1.0, QUAD_ABS, QUAD_REL, QUAD_BUDGET)?;
                let tail = quadrature::integrate_to_infinity(integrand, 1.0, QUAD_ABS, QUAD_REL, QUAD_BUDGET)?;
                Ok(a + b * lambda + head.value + tail.value)
            }
        }
    }

    /// Analytic continuation of `f` to `ℂ \ (-∞, 0]`.
    pub fn eval_f_complex(&self, s: Complex64) -> Result<Complex64> {
        match self {
            BernsteinSpec::Stable { alpha } => Ok(s.powf(*alpha)),
            BernsteinSpec::TemperedStable { alpha, theta } => {
                Ok((s + theta).powf(*alpha) - theta.powf(*alpha))
            }
            BernsteinSpec::ExplicitTriplet { a, b, levy_density } => match levy_density {
                LevyDensity::PowerExp { terms } => {
                    Ok(terms.iter().map(|t| t.levy_integral(s)).sum::<Complex64>() + a + b * s)
                }
                LevyDensity::Custom(_) => Err(CbfError::numerical(
                    "custom Lévy density has no complex continuation; use power_exp terms",
                )),
            },
        }
    }

    /// Whether the closed-form fast path covers kernels and primitives.
    pub fn has_closed_form_kernels(&self) -> bool {
        matches!(self, BernsteinSpec::Stable { .. })
    }

    /// Samples `1/f` and `λ/f` at `λ = 10^{∓60}`, the four limits required of
    /// the main pipeline.
    pub fn limit_report(&self) -> Result<LimitReport> {
        let (lo, hi) = (1e-60, 1e60);
        let (flo, fhi) = (self.eval_f(lo)?, self.eval_f(hi)?);
        Ok(LimitReport {
            inv_f_at_zero: 1.0 / flo,
            inv_f_at_infinity: 1.0 / fhi,
            conj_at_zero: lo / flo,
            conj_at_infinity: hi / fhi,
        })
    }
}

/// Sampled values of `1/f` and `f* = λ/f` near 0 and ∞.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LimitReport {
    pub inv_f_at_zero: f64,
    pub inv_f_at_infinity: f64,
    pub conj_at_zero: f64,
    pub conj_at_infinity: f64,
}

impl LimitReport {
    /// `1/f: ∞ → 0` and `λ/f: 0 → ∞` across the sampled range.
    pub fn satisfied(&self) -> bool {
        self.inv_f_at_zero > 1e3
            && self.inv_f_at_infinity < 1e-3
            && self.conj_at_zero < 1e-3
            && self.conj_at_infinity > 1e3
    }
}

/// The conjugate `f*(λ) = λ / f(λ)`.
#[derive(Debug, Clone)]
pub struct Conjugate {
    spec: BernsteinSpec,
}

impl Conjugate {
    pub fn eval(&self, lambda: f64) -> Result<f64> {
        Ok(lambda / self.spec.eval_f(lambda)?)
    }

    pub fn base(&self) -> &BernsteinSpec {
        &self.spec
    }
}

pub fn conjugate(spec: &BernsteinSpec) -> Conjugate {
    Conjugate { spec: spec.clone() }
}

/// A Lévy moment, possibly infinite. Serializes infinity as `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Moment {
    Finite(f64),
    #[serde(deserialize_with = "de_inf")]
    Infinite,
}

fn de_inf<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<(), D::Error> {
    let s = String::deserialize(d)?;
    if s == "inf" {
        Ok(())
    } else {
        Err(serde::de::Error::custom("expected a number or \"inf\""))
    }
}

impl Serialize for Moment {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Moment::Finite(v) => s.serialize_f64(*v),
            Moment::Infinite => s.serialize_str("inf"),
        }
    }
}

impl Moment {
    pub fn is_finite(&self) -> bool {
        matches!(self, Moment::Finite(_))
    }

    /// `1/(c + moment)` with the convention `1/∞ = 0`.
    fn reciprocal_plus(&self, c: f64) -> f64 {
        match self {
            Moment::Finite(v) => 1.0 / (c + v),
            Moment::Infinite => 0.0,
        }
    }
}

/// Row of the triplet table with the conjugate's killing `a*` and drift `b*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TripletClassification {
    pub row: u8,
    pub a_star: f64,
    pub b_star: f64,
    pub m0: Moment,
    pub m1: Moment,
}

/// Knobs for [`classify_triplet`].
#[derive(Debug, Clone, Copy)]
pub struct ClassifyOptions {
    pub quad_budget: usize,
    pub m0_override: Option<Moment>,
    pub m1_override: Option<Moment>,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            quad_budget: QUAD_BUDGET,
            m0_override: None,
            m1_override: None,
        }
    }
}

/// Window for the log-log slope near the origin.
const ORIGIN_WINDOW: (f64, f64) = (1e-10, 1e-8);
/// Window for the log-log slope in the tail.
const TAIL_WINDOW: (f64, f64) = (1e6, 1e8);
/// A slope this far on the convergent side of the critical power decides "finite".
const SLOPE_MARGIN: f64 = 0.02;
/// A slope within this distance of (or beyond) the critical power decides "infinite";
/// covers slowly varying corrections such as `1/t` with a logarithm.
const SLOPE_SLACK: f64 = 1e-3;

fn log_slope(m: &dyn Fn(f64) -> f64, (t1, t2): (f64, f64)) -> f64 {
    let (m1, m2) = (m(t1), m(t2));
    if m2 <= 0.0 {
        return f64::NEG_INFINITY;
    }
    (m2 / m1).ln() / (t2 / t1).ln()
}

enum Verdict {
    Finite,
    Infinite,
    Unknown(f64),
}

/// `∫ t^power m(t) dt` converges at 0 iff slope > -1 - power.
fn origin_verdict(slope: f64, power: f64) -> Verdict {
    let critical = -1.0 - power;
    if slope >= critical + SLOPE_MARGIN {
        Verdict::Finite
    } else if slope <= critical + SLOPE_SLACK {
        Verdict::Infinite
    } else {
        Verdict::Unknown(slope)
    }
}

/// `∫ t^power m(t) dt` converges at ∞ iff slope < -1 - power.
fn tail_verdict(slope: f64, power: f64) -> Verdict {
    let critical = -1.0 - power;
    if slope <= critical - SLOPE_MARGIN {
        Verdict::Finite
    } else if slope >= critical - SLOPE_SLACK {
        Verdict::Infinite
    } else {
        Verdict::Unknown(slope)
    }
}

fn numeric_moment(m: &dyn Fn(f64) -> f64, power: i32, budget: usize) -> Result<Moment> {
    let name = if power == 0 { "m0" } else { "m1" };
    let head = origin_verdict(log_slope(m, ORIGIN_WINDOW), power as f64);
    let tail = tail_verdict(log_slope(m, TAIL_WINDOW), power as f64);
    match (head, tail) {
        (Verdict::Infinite, _) | (_, Verdict::Infinite) => Ok(Moment::Infinite),
        (Verdict::Unknown(s), _) | (_, Verdict::Unknown(s)) => Err(CbfError::Indeterminate(format!(
            "{name}: log-log slope {s:.4} is too close to the critical power to decide divergence"
        ))),
        (Verdict::Finite, Verdict::Finite) => {
            let g = |t: f64| t.powi(power) * m(t);
            let head = quadrature::integrate(g, 0.0, 1.0, QUAD_ABS, QUAD_REL, budget)
                .map_err(|e| CbfError::Indeterminate(format!("{name} head integral: {e}")))?;
            let tail = quadrature::integrate_to_infinity(g, 1.0, QUAD_ABS, QUAD_REL, budget)
                .map_err(|e| CbfError::Indeterminate(format!("{name} tail integral: {e}")))?;
            Ok(Moment::Finite(head.value + tail.value))
        }
    }
}

/// Places a triplet in the eight-row table and computes `(a*, b*)` from
/// `a* = 0 (a>0), 1/(b+m1) (a=0)` and `b* = 0 (b>0), 1/(a+m0) (b=0)`.
///
/// Built-in families use exact moments; explicit triplets decide divergence
/// from log-log slopes of `m` on fixed windows near 0 and in the tail, then
/// integrate. Overrides in `opts` replace either decision.
pub fn classify_triplet(spec: &BernsteinSpec, opts: &ClassifyOptions) -> Result<TripletClassification> {
    spec.validate()?;
    let (a, b) = spec.killing_drift();
    let computed = |power: i32| -> Result<Moment> {
        match spec {
            BernsteinSpec::Stable { .. } => Ok(Moment::Infinite),
            BernsteinSpec::TemperedStable { alpha, theta } => Ok(if power == 0 {
                Moment::Infinite
            } else {
                Moment::Finite(alpha * theta.powf(alpha - 1.0))
            }),
            BernsteinSpec::ExplicitTriplet { levy_density, .. } => {
                numeric_moment(&|t| levy_density.eval(t), power, opts.quad_budget)
            }
        }
    };
    let m0 = match opts.m0_override {
        Some(m) => m,
        None => computed(0)?,
    };
    let m1 = match opts.m1_override {
        Some(m) => m,
        None => computed(1)?,
    };
    let row = match (a > 0.0, b > 0.0) {
        (false, false) => {
            if !m1.is_finite() {
                1
            } else if !m0.is_finite() {
                2
            } else {
                3
            }
        }
        (true, false) => {
            if m0.is_finite() {
                5
            } else {
                4
            }
        }
        (false, true) => {
            if m1.is_finite() {
                7
            } else {
                6
            }
        }
        (true, true) => 8,
    };
    let a_star = if a > 0.0 { 0.0 } else { m1.reciprocal_plus(b) };
    let b_star = if b > 0.0 { 0.0 } else { m0.reciprocal_plus(a) };
    Ok(TripletClassification {
        row,
        a_star,
        b_star,
        m0,
        m1,
    })
}
