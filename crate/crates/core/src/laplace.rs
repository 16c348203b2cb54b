//! Fixed Talbot inversion of Laplace transforms.

use num_complex::Complex64;

use crate::error::{CbfError, Result};

/// Default number of contour nodes.
pub const DEFAULT_NODES: usize = 24;

/// Result of one inversion with a coarse-vs-fine accuracy estimate.
#[derive(Debug, Clone, Copy)]
pub struct Inversion {
    pub value: f64,
    pub estimate: f64,
}

fn talbot_sum(transform: &dyn Fn(Complex64) -> Result<Complex64>, t: f64, nodes: usize) -> Result<f64> {
    let m = nodes as f64;
    let r = 2.0 * m / (5.0 * t);
    let mut acc = 0.5 * (transform(Complex64::new(r, 0.0))?.re * (r * t).exp());
    for k in 1..nodes {
        let theta = k as f64 * std::f64::consts::PI / m;
        let cot = theta.cos() / theta.sin();
        let s = Complex64::new(r * theta * cot, r * theta);
        let sigma = theta + (theta * cot - 1.0) * cot;
        let term = (s * t).exp() * transform(s)? * Complex64::new(1.0, sigma);
        acc += term.re;
    }
    Ok(acc * r / m)
}

/// Inverts `transform` at `t > 0` along the Talbot contour with `nodes` points.
///
/// The estimate compares against a run with three quarters of the nodes.
pub fn invert(transform: &dyn Fn(Complex64) -> Result<Complex64>, t: f64, nodes: usize) -> Result<Inversion> {
    if !(t > 0.0) || nodes < 8 {
        return Err(CbfError::Domain(format!(
            "inversion needs t > 0 and at least 8 nodes (t = {t}, nodes = {nodes})"
        )));
    }
    let value = talbot_sum(transform, t, nodes)?;
    let coarse = talbot_sum(transform, t, nodes * 3 / 4)?;
    if !value.is_finite() {
        return Err(CbfError::numerical_with(
            "contour inversion produced a non-finite value",
            vec![("t".into(), t), ("nodes".into(), nodes as f64)],
        ));
    }
    Ok(Inversion {
        value,
        estimate: (value - coarse).abs(),
    })
}

/// Inversion without the accuracy estimate.
pub fn invert_value(transform: &dyn Fn(Complex64) -> Result<Complex64>, t: f64, nodes: usize) -> Result<f64> {
    let v = talbot_sum(transform, t, nodes)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(CbfError::numerical_with(
            "contour inversion produced a non-finite value",
            vec![("t".into(), t), ("nodes".into(), nodes as f64)],
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverts_exponential() {
        let f = |s: Complex64| Ok(1.0 / (s + 1.0));
        for &t in &[0.01, 0.5, 1.0, 5.0] {
            let v = invert(&f, t, DEFAULT_NODES).unwrap();
            assert!((v.value - (-t).exp()).abs() < 1e-10, "{t}");
        }
    }

    #[test]
    fn inverts_power() {
        // L(t^{-1/2}) = sqrt(pi/s)
        let f = |s: Complex64| Ok((std::f64::consts::PI / s).sqrt());
        for &t in &[1e-9, 1e-3, 1.0, 100.0] {
            let v = invert_value(&f, t, DEFAULT_NODES).unwrap();
            let exact = t.powf(-0.5);
            assert!((v - exact).abs() < 5e-10 * exact, "{t}: {v} vs {exact}");
        }
    }

    #[test]
    fn rejects_bad_input() {
        let f = |s: Complex64| Ok(1.0 / s);
        assert!(invert(&f, 0.0, 32).is_err());
        assert!(invert(&f, 1.0, 4).is_err());
    }
}
