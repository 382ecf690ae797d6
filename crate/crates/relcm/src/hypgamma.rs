//! The hyperbolic gamma function `G(a+, a-; z)`.
//!
//! Inside a horizontal strip of half-width `min(a+, a-)/2` the logarithm is
//! computed from its integral representation; the integrand is made
//! exponentially decaying by adding `c(1/y² - s²/sinh²(sy))`, whose integral
//! is known, and then summed with the midpoint rule on an equispaced grid
//! (spectrally accurate for analytic integrands). Other points are reached
//! with the first-order difference equations, and far from the imaginary
//! axis the leading asymptotics are exact to double precision.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::I;

/// A pair of positive scale parameters together with a choice of `ρ`.
///
/// `ρκ = π a-/a+`; only this product enters the dimensionless kernels, so
/// `ρ` is a free choice that defaults to `a-` (making `x = r`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleParams {
    pub a_plus: f64,
    pub a_minus: f64,
    pub rho: f64,
}

impl ScaleParams {
    pub fn new(a_plus: f64, a_minus: f64) -> Result<Self> {
        Self::with_rho(a_plus, a_minus, a_minus)
    }

    pub fn with_rho(a_plus: f64, a_minus: f64, rho: f64) -> Result<Self> {
        for (name, v) in [("a_plus", a_plus), ("a_minus", a_minus), ("rho", rho)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} = {v}")));
            }
        }
        Ok(Self { a_plus, a_minus, rho })
    }

    /// Parameters with `a- = ρ` and `a+ = π/κ`.
    pub fn from_rho_kappa(rho: f64, kappa: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::InvalidParameter(format!("kappa = {kappa}")));
        }
        Self::with_rho(PI / kappa, rho, rho)
    }

    pub fn a(&self) -> f64 {
        0.5 * (self.a_plus + self.a_minus)
    }

    pub fn kappa(&self) -> f64 {
        PI * self.a_minus / (self.a_plus * self.rho)
    }

    pub fn rho_kappa(&self) -> f64 {
        PI * self.a_minus / self.a_plus
    }

    pub fn tau_of_b(&self, b: f64) -> f64 {
        PI * b / self.a_plus
    }

    pub fn swapped(&self) -> Self {
        Self { a_plus: self.a_minus, a_minus: self.a_plus, rho: self.rho }
    }

    /// Position variable `x` for dimensionless `r`.
    pub fn x_of_r(&self, r: C64) -> C64 {
        r * (self.a_minus / self.rho)
    }

    /// Spectral variable `y` for dimensionless `k`.
    pub fn y_of_k(&self, k: C64) -> C64 {
        k * (self.a_minus / self.kappa())
    }

    pub fn r_of_x(&self, x: C64) -> C64 {
        x * (self.rho / self.a_minus)
    }

    pub fn k_of_y(&self, y: C64) -> C64 {
        y * (self.kappa() / self.a_minus)
    }

    /// `sinh(πz/a+)`, `cosh(πz/a+)` and the `a-` analogues.
    pub fn s_plus(&self, z: C64) -> C64 {
        (z * (PI / self.a_plus)).sinh()
    }
    pub fn c_plus(&self, z: C64) -> C64 {
        (z * (PI / self.a_plus)).cosh()
    }
    pub fn e_plus(&self, z: C64) -> C64 {
        (z * (PI / self.a_plus)).exp()
    }
    pub fn s_minus(&self, z: C64) -> C64 {
        (z * (PI / self.a_minus)).sinh()
    }
    pub fn c_minus(&self, z: C64) -> C64 {
        (z * (PI / self.a_minus)).cosh()
    }
    pub fn e_minus(&self, z: C64) -> C64 {
        (z * (PI / self.a_minus)).exp()
    }

    /// `exp(iπxy/(a+ a-))`.
    pub fn plane_wave(&self, x: C64, y: C64) -> C64 {
        (I * PI * x * y / (self.a_plus * self.a_minus)).exp()
    }
}

/// Beyond this multiple of `max(a+, a-)` in `|Re z|` the asymptotic form is
/// used; the neglected terms are below `e^{-44}`.
const ASYMPTOTIC_REACH: f64 = 7.0;
const BUCKETS: usize = 15;

struct NodeTable {
    h: f64,
    weights: Vec<f64>,
    subtraction: f64,
}

/// Configured evaluator of `G`. Immutable after construction apart from
/// lazily built node tables, so it can be shared between threads.
pub struct HypGammaEvaluator {
    pub params: ScaleParams,
    pub strip_margin: f64,
    pub ladder_limit: usize,
    small: f64,
    large: f64,
    tables: Vec<OnceLock<NodeTable>>,
}

impl Clone for HypGammaEvaluator {
    fn clone(&self) -> Self {
        Self::with_limits(self.params, self.strip_margin, self.ladder_limit)
    }
}

impl std::fmt::Debug for HypGammaEvaluator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HypGammaEvaluator")
            .field("params", &self.params)
            .field("strip_margin", &self.strip_margin)
            .field("ladder_limit", &self.ladder_limit)
            .finish()
    }
}

impl HypGammaEvaluator {
    pub fn new(params: ScaleParams) -> Self {
        Self::with_limits(params, 1e-9, 4096)
    }

    pub fn with_limits(params: ScaleParams, strip_margin: f64, ladder_limit: usize) -> Self {
        let small = params.a_plus.min(params.a_minus);
        let large = params.a_plus.max(params.a_minus);
        Self {
            params,
            strip_margin,
            ladder_limit,
            small,
            large,
            tables: (0..BUCKETS).map(|_| OnceLock::new()).collect(),
        }
    }

    /// `χ = (π/24)(a+/a- + a-/a+)`.
    pub fn chi(&self) -> f64 {
        let p = self.params;
        PI / 24.0 * (p.a_plus / p.a_minus + p.a_minus / p.a_plus)
    }

    /// `exp(∓i(χ + πz²/(2 a+ a-)))`, the behavior for `Re z → ±∞`.
    pub fn asymptotic(&self, z: C64, sign: f64) -> C64 {
        self.log_asymptotic(z, sign).exp()
    }

    fn log_asymptotic(&self, z: C64, sign: f64) -> C64 {
        let p = self.params;
        -I * sign * (self.chi() + PI * z * z / (2.0 * p.a_plus * p.a_minus))
    }

    fn table(&self, bucket: usize) -> &NodeTable {
        self.tables[bucket].get_or_init(|| {
            let p = self.params;
            let m = self.large;
            let re_max = (bucket + 1) as f64 * 0.5 * m;
            let d = 0.6 * PI / m;
            let h = 2.0 * PI * d / (40.0 + 2.0 * d * re_max);
            let y_max = 44.0 / m;
            let n = (y_max / h).ceil() as usize;
            let s = m;
            let mut weights = Vec::with_capacity(n);
            let mut sub = 0.0;
            for j in 0..n {
                let y = (j as f64 + 0.5) * h;
                weights.push(h / (2.0 * y * (p.a_plus * y).sinh() * (p.a_minus * y).sinh()));
                let sh = (s * y).sinh();
                sub += h * s * s / (sh * sh);
            }
            NodeTable { h, weights, subtraction: sub + s }
        })
    }

    /// `log G(z)` from the integral, valid for `|Im z| ≤ min(a+,a-)/2`.
    fn log_strip(&self, z: C64) -> C64 {
        let p = self.params;
        let bucket = ((z.re.abs() / (0.5 * self.large)) as usize).min(BUCKETS - 1);
        let t = self.table(bucket);
        let cz = z / (p.a_plus * p.a_minus);
        let mut e = (I * t.h * z).exp();
        let mut einv = 1.0 / e;
        let q = e * e;
        let qinv = einv * einv;
        let mut acc = C64::new(0.0, 0.0);
        for w in &t.weights {
            acc += (e - einv) * *w;
            e *= q;
            einv *= qinv;
        }
        // sin(2yz) = (e - 1/e)/(2i)
        let integral = acc / (2.0 * I) - cz * t.subtraction;
        I * integral
    }

    fn check_lattice(&self, z: C64) -> Result<()> {
        let tol = self.strip_margin;
        if z.re.abs() > tol {
            return Ok(());
        }
        let p = self.params;
        let t = z.im.abs() - self.params.a();
        if t < -tol {
            return Ok(());
        }
        let kmax = (t / p.a_plus).floor().max(0.0) as usize + 1;
        for k in 0..=kmax {
            let rest = t - k as f64 * p.a_plus;
            if rest < -tol {
                break;
            }
            let l = (rest / p.a_minus).round().max(0.0);
            let d = C64::new(z.re, rest - l * p.a_minus).norm();
            if d <= tol {
                let (k, l) = (k, l as usize);
                return Err(if z.im < 0.0 {
                    Error::AtPole { z, k, l }
                } else {
                    Error::AtZero { z, k, l }
                });
            }
        }
        Ok(())
    }

    /// `log G(z)` (any branch); combine with `exp` for the value.
    pub fn log_eval(&self, z: C64) -> Result<C64> {
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NonFinite(format!("argument {z}")));
        }
        self.check_lattice(z)?;
        let m = self.small;
        let big = self.large;
        let n = (z.im / m).round();
        if n.abs() > self.ladder_limit as f64 {
            return Err(Error::LadderOverflow(n.abs() as usize));
        }
        let n = n as i64;
        let w = z - I * (n as f64 * m);
        let mut log = if w.re.abs() > ASYMPTOTIC_REACH * big {
            self.log_asymptotic(w, w.re.signum())
        } else {
            self.log_strip(w)
        };
        // G(u) = 2cosh(π(u - im/2)/M) G(u - im)
        for j in 0..n.unsigned_abs() {
            let u = if n > 0 {
                z - I * m * (0.5 + j as f64)
            } else {
                z + I * m * (0.5 + j as f64)
            };
            let f = log_two_cosh(u * (PI / big));
            if n > 0 {
                log += f;
            } else {
                log -= f;
            }
        }
        Ok(log)
    }

    /// `G(z)`; errors at (or within `strip_margin` of) poles and zeros.
    pub fn eval(&self, z: C64) -> Result<C64> {
        let v = self.log_eval(z)?.exp();
        crate::error::finite(v, "hyperbolic gamma")
    }

    /// `G(z)` by the integral alone, with the node spacing divided by
    /// `refine`; intended as an accuracy check inside the strip.
    pub fn eval_refined(&self, z: C64, refine: usize) -> Result<C64> {
        let p = self.params;
        if z.im.abs() > 0.5 * self.small {
            return Err(Error::InvalidParameter("outside reduced strip".into()));
        }
        let m = self.large;
        let d = 0.6 * PI / m;
        let h = 2.0 * PI * d / (40.0 + 2.0 * d * z.re.abs()) / refine as f64;
        let n = (50.0 / m / h).ceil() as usize;
        let s = m;
        let cz = z / (p.a_plus * p.a_minus);
        let mut acc = C64::new(0.0, 0.0);
        let mut sub = s;
        for j in 0..n {
            let y = (j as f64 + 0.5) * h;
            let sh = (s * y).sinh();
            acc += (2.0 * y * z).sin() * (h / (2.0 * y * (p.a_plus * y).sinh() * (p.a_minus * y).sinh()));
            sub += h * s * s / (sh * sh);
        }
        Ok((I * (acc - cz * sub)).exp())
    }
}

/// `log(2 cosh u)` without overflow.
fn log_two_cosh(u: C64) -> C64 {
    if u.re >= 0.0 {
        u + (1.0 + (-2.0 * u).exp()).ln()
    } else {
        -u + (1.0 + (2.0 * u).exp()).ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{c, rel_diff};

    fn ev(ap: f64, am: f64) -> HypGammaEvaluator {
        HypGammaEvaluator::new(ScaleParams::new(ap, am).unwrap())
    }

    /// Independent oracle: Gauss-Legendre quadrature of the raw integral
    /// representation on [0, Y] plus the closed-form tail `-z/(a+ a- Y)`;
    /// near `y = 0` the integrand is replaced by its mean over a circle.
    fn oracle(ap: f64, am: f64, z: C64) -> C64 {
        let raw = |y: C64| {
            (2.0 * y * z).sin() / (2.0 * y * (ap * y).sinh() * (am * y).sinh())
                - z / (ap * am * y * y)
        };
        let f = |y: f64| {
            if y < 0.1 {
                let n = 64;
                (0..n)
                    .map(|j| raw(c(y, 0.0) + C64::from_polar(0.3, 2.0 * PI * j as f64 / n as f64)))
                    .sum::<C64>()
                    / n as f64
            } else {
                raw(c(y, 0.0))
            }
        };
        let y_end = 45.0 / (ap + am - 2.0 * z.im.abs()) * 2.0;
        let v = crate::numerics::gl_interval(f, 0.0, y_end, 4000) - z / (ap * am * y_end);
        (I * v).exp()
    }

    #[test]
    fn normalization_and_half_period() {
        let g = ev(1.0, 1.0);
        assert!((g.eval(c(0.0, 0.0)).unwrap() - 1.0).norm() < 1e-14);
        let g = ev(1.3, 0.7);
        let v = g.eval(c(0.0, 0.65)).unwrap();
        assert!((v - 2f64.sqrt()).norm() < 1e-12, "{v}");
    }

    #[test]
    fn matches_independent_quadrature() {
        for &(ap, am, z) in &[
            (1.0, 1.0, c(0.0, 0.3)),
            (1.0, 1.0, c(0.8, -0.2)),
            (2.0, 0.7, c(-1.5, 0.3)),
            (0.6, 1.9, c(3.0, 0.1)),
        ] {
            let a = ev(ap, am).eval(z).unwrap();
            let b = oracle(ap, am, z);
            assert!(rel_diff(a, b, 0.0) < 1e-12, "{ap} {am} {z}: {a} vs {b}");
            let r = ev(ap, am).eval_refined(z, 4).unwrap();
            assert!(rel_diff(a, r, 0.0) < 1e-12);
        }
    }

    #[test]
    fn chi_value() {
        assert!((ev(1.0, 1.0).chi() - PI / 12.0).abs() < 1e-15);
    }

    #[test]
    fn asymptotic_agreement() {
        let g = ev(1.0, 1.0);
        let z = c(8.0, 0.2);
        let r = g.eval_refined(z, 2).unwrap() / g.asymptotic(z, 1.0);
        assert!((r - 1.0).norm() < 1e-6);
        let z = c(6.9, -0.3);
        let r = g.eval(z).unwrap() / g.asymptotic(z, 1.0);
        assert!((r - 1.0).norm() < 1e-15 * 1e3);
        let p = g.asymptotic(z, 1.0) * g.asymptotic(z, -1.0);
        assert!((p - 1.0).norm() < 1e-14);
    }

    #[test]
    fn difference_equations_far_out() {
        let g = ev(1.4, 0.55);
        let p = g.params;
        for z in [c(0.3, 2.5), c(-4.0, -3.1), c(9.0, 0.4), c(-0.2, 7.3)] {
            for (ad, other) in [(p.a_plus, p.a_minus), (p.a_minus, p.a_plus)] {
                let lhs = g.eval(z + I * ad / 2.0).unwrap() / g.eval(z - I * ad / 2.0).unwrap();
                let rhs = 2.0 * (z * PI / other).cosh();
                assert!(rel_diff(lhs, rhs, 0.0) < 1e-11, "{z}: {lhs} {rhs}");
            }
        }
    }

    #[test]
    fn pole_and_zero_refusal() {
        let g = ev(1.0, 2.0);
        let a = g.params.a();
        assert!(matches!(g.eval(c(0.0, -a)), Err(Error::AtPole { k: 0, l: 0, .. })));
        assert!(matches!(g.eval(c(0.0, a + 2.0)), Err(Error::AtZero { k: 0, l: 1, .. })));
        assert!(matches!(g.eval(c(0.0, -a - 3.0)), Err(Error::AtPole { .. })));
        let near_zero = g.eval(c(1e-8, a)).unwrap();
        assert!(near_zero.norm() < 1e-6);
    }
}
