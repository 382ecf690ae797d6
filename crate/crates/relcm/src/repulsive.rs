//! Repulsive sector: the renormalized relativistic conical function, the
//! Harish-Chandra type `c`-function with its weight and scattering function,
//! the E/F/Z variants, and the analytic difference operators.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypgamma::{HypGammaEvaluator, ScaleParams};
use crate::numerics::{integrate_path, QuadResult, I};

/// `sinh(π(z - ib)/a+) / sinh(πz/a+)`.
pub fn coeff_v(p: &ScaleParams, b: f64, z: C64) -> C64 {
    (PI * (z - I * b) / p.a_plus).sinh() / (PI * z / p.a_plus).sinh()
}

/// `cosh(π(z - ib)/a+) / cosh(πz/a+)`.
pub fn coeff_v_tilde(p: &ScaleParams, b: f64, z: C64) -> C64 {
    (PI * (z - I * b) / p.a_plus).cosh() / (PI * z / p.a_plus).cosh()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AdoKind {
    /// `V(z)e^{-ia-∂} + V(-z)e^{ia-∂}`
    A,
    /// `V(-z)^{1/2}e^{ia-∂}V(z)^{1/2} + (z → -z)`
    H,
    /// `Ṽ(z)e^{-ia-∂} + Ṽ(-z)e^{ia-∂}`
    ATilde,
    /// `Ṽ(-z)^{1/2}e^{ia-∂}Ṽ(z)^{1/2} + (z → -z)`
    HTilde,
    /// `e^{-ia-∂} + V(-z)e^{ia-∂}V(z)`
    ACal,
    /// `V(z)e^{-ia-∂}V(-z) - e^{ia-∂}`
    SCal,
    /// `e^{-ia-∂} + e^{ia-∂}`
    HNFree,
    /// `e^{-ia-∂} - e^{ia-∂}`
    SNFree,
    /// `e^{-ia+∂} + e^{ia+∂}`
    FreePair,
    /// `e^{iρ∂} + e^{-iρ∂}` in the dimensionless position variable
    HCm,
    /// `e^{-iκ∂} - e^{iκ∂}` in the dimensionless spectral variable
    HHatCm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdoSpec {
    pub kind: AdoKind,
    pub params: ScaleParams,
    pub b: f64,
}

/// Applies the operator described by `op` to `f` at `z`. Square roots of
/// coefficient products use the principal branch.
pub fn apply_ado<F>(op: &AdoSpec, f: F, z: C64) -> Result<C64>
where
    F: Fn(C64) -> Result<C64>,
{
    let p = &op.params;
    let b = op.b;
    let am = I * p.a_minus;
    let v = |w: C64| coeff_v(p, b, w);
    let vt = |w: C64| coeff_v_tilde(p, b, w);
    Ok(match op.kind {
        AdoKind::A => v(z) * f(z - am)? + v(-z) * f(z + am)?,
        AdoKind::H => {
            (v(-z) * v(z + am)).sqrt() * f(z + am)? + (v(z) * v(-z + am)).sqrt() * f(z - am)?
        }
        AdoKind::ATilde => vt(z) * f(z - am)? + vt(-z) * f(z + am)?,
        AdoKind::HTilde => {
            (vt(-z) * vt(z + am)).sqrt() * f(z + am)? + (vt(z) * vt(-z + am)).sqrt() * f(z - am)?
        }
        AdoKind::ACal => f(z - am)? + v(-z) * v(z + am) * f(z + am)?,
        AdoKind::SCal => v(z) * v(am - z) * f(z - am)? - f(z + am)?,
        AdoKind::HNFree => f(z - am)? + f(z + am)?,
        AdoKind::SNFree => f(z - am)? - f(z + am)?,
        AdoKind::FreePair => f(z - I * p.a_plus)? + f(z + I * p.a_plus)?,
        AdoKind::HCm => f(z + I * p.rho)? + f(z - I * p.rho)?,
        AdoKind::HHatCm => f(z - I * p.kappa())? - f(z + I * p.kappa())?,
    })
}

/// Evaluator for the repulsive functions at a fixed coupling `b`.
#[derive(Debug, Clone)]
pub struct RepulsiveEvaluator {
    pub gamma: HypGammaEvaluator,
    pub b: f64,
}

/// A vertical half-line of integrand poles: `x + i s` for `s ≤ y` when
/// `down`, `s ≥ y` otherwise.
#[derive(Debug, Clone, Copy)]
struct Ray {
    end: C64,
    down: bool,
}

impl Ray {
    fn distance(&self, z: C64) -> f64 {
        let above = z.im > self.end.im;
        if above != self.down {
            (z.re - self.end.re).abs()
        } else {
            (z - self.end).norm()
        }
    }
}

impl RepulsiveEvaluator {
    pub fn new(params: ScaleParams, b: f64) -> Result<Self> {
        if !b.is_finite() {
            return Err(Error::InvalidParameter(format!("b = {b}")));
        }
        Ok(Self { gamma: HypGammaEvaluator::new(params), b })
    }

    pub fn params(&self) -> &ScaleParams {
        &self.gamma.params
    }

    fn g(&self, z: C64) -> Result<C64> {
        self.gamma.eval(z)
    }

    /// `c(b;z) = G(z + ia - ib)/G(z + ia)`.
    pub fn harish_c(&self, z: C64) -> Result<C64> {
        let a = self.params().a();
        let lg = self.gamma.log_eval(z + I * (a - self.b))? - self.gamma.log_eval(z + I * a)?;
        crate::error::finite(lg.exp(), "c-function")
    }

    /// `w(b;z) = 1/(c(z)c(-z))`.
    pub fn weight_w(&self, z: C64) -> Result<C64> {
        Ok(1.0 / (self.harish_c(z)? * self.harish_c(-z)?))
    }

    /// `u(b;z) = -c(z)/c(-z)`. The two `G`-factors in the denominator that
    /// vanish and blow up at `z = 0` are combined with their difference
    /// equations, leaving a product that is regular at the origin.
    pub fn scattering_u(&self, z: C64) -> Result<C64> {
        let p = self.params();
        let d = p.a() - self.b;
        let e = 0.5 * (p.a_minus - p.a_plus);
        let lg = self.gamma.log_eval(z + I * d)? + self.gamma.log_eval(z - I * d)?
            - self.gamma.log_eval(z + I * e)?
            - self.gamma.log_eval(z - I * e)?;
        crate::error::finite(lg.exp(), "scattering function")
    }

    /// `φ(b) = exp(iπb(b - 2a)/(2a+a-))`.
    pub fn phase_phi(&self) -> C64 {
        let p = self.params();
        (I * PI * self.b * (self.b - 2.0 * p.a()) / (2.0 * p.a_plus * p.a_minus)).exp()
    }

    fn integrand_shifts(&self, x: C64, y: C64) -> ([C64; 2], [C64; 2]) {
        let hb = I * (0.5 * self.b);
        (
            [(x - y) * 0.5 - hb, -(x - y) * 0.5 - hb],
            [(x + y) * 0.5 + hb, -(x + y) * 0.5 + hb],
        )
    }

    /// Polygonal contour separating the downward pole rays of the numerator
    /// from the upward zero rays of the denominator.
    fn contour(&self, rays: &[Ray; 4], reach: f64) -> Result<Vec<C64>> {
        let p = self.params();
        let margin = 0.5 * p.a_plus.min(p.a_minus);
        let mut xs: Vec<f64> = rays.iter().map(|r| r.end.re).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        xs.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        let mut verts = vec![C64::new(-reach, 0.0)];
        for &x0 in &xs {
            let mut lo = f64::NEG_INFINITY;
            let mut hi = f64::INFINITY;
            for r in rays.iter().filter(|r| (r.end.re - x0).abs() < 1e-12) {
                if r.down {
                    lo = lo.max(r.end.im);
                } else {
                    hi = hi.min(r.end.im);
                }
            }
            let gap = hi - lo;
            if gap <= 1e-9 {
                return Err(Error::NearPole(C64::new(x0, lo)));
            }
            let mu = margin.min(0.5 * gap);
            let level = 0.0f64.max(lo + mu).min(hi - mu);
            verts.push(C64::new(x0, level));
        }
        verts.push(C64::new(reach, 0.0));
        Ok(verts)
    }

    /// The integral in the definition of `ℛ_ren`, with its quadrature data.
    pub fn r_ren_integral(&self, x: C64, y: C64) -> Result<QuadResult> {
        let p = *self.params();
        let b = self.b;
        if !(b > 0.0 && b < 2.0 * p.a()) {
            return Err(Error::IntegralDivergence(format!("b = {b} outside (0, 2a)")));
        }
        let a = p.a();
        let (alpha, beta) = self.integrand_shifts(x, y);
        let rays = [
            Ray { end: -alpha[0] - I * a, down: true },
            Ray { end: -alpha[1] - I * a, down: true },
            Ray { end: -beta[0] + I * a, down: false },
            Ray { end: -beta[1] + I * a, down: false },
        ];
        let shift_re = alpha.iter().chain(beta.iter()).map(|s| s.re.abs()).fold(0.0, f64::max);
        let reach = 7.5 * p.a_plus.max(p.a_minus) + shift_re + 1.0;
        let verts = self.contour(&rays, reach)?;
        let f = |z: C64| -> Result<C64> {
            let lg = self.gamma.log_eval(z + alpha[0])? + self.gamma.log_eval(z + alpha[1])?
                - self.gamma.log_eval(z + beta[0])?
                - self.gamma.log_eval(z + beta[1])?;
            Ok(lg.exp())
        };
        let dist = |z: C64| rays.iter().map(|r| r.distance(z)).fold(f64::INFINITY, f64::min);
        for v in &verts {
            if dist(*v) < 1e-9 {
                return Err(Error::NearPole(*v));
            }
        }
        let scale = verts.iter().map(|v| f(*v).map(|w| w.norm())).collect::<Result<Vec<_>>>()?;
        let scale = scale.into_iter().fold(0.0, f64::max).max(1e-300);
        let mut q = integrate_path(&f, &verts, &dist, 2e-14 * scale * reach)?;
        let lambda = 2.0 * PI * b / (p.a_plus * p.a_minus);
        q.value += (f(verts[0])? + f(*verts.last().unwrap())?) / lambda;
        Ok(q)
    }

    /// `ℛ_ren(b;x,y)`.
    pub fn r_ren(&self, x: C64, y: C64) -> Result<C64> {
        let p = *self.params();
        let pre = self.g(I * (p.a() - self.b))? / (p.a_plus * p.a_minus).sqrt();
        let v = pre * self.r_ren_integral(x, y)?.value;
        crate::error::finite(v, "conical function")
    }

    /// `E(b;x,y) = φ(b) ℛ_ren/(c(x)c(y))`.
    pub fn e_function(&self, x: C64, y: C64) -> Result<C64> {
        Ok(self.phase_phi() * self.r_ren(x, y)? / (self.harish_c(x)? * self.harish_c(y)?))
    }

    /// `F(b;x,y) = w(x)^{1/2}w(y)^{1/2}ℛ_ren`, positive roots on the real line.
    pub fn f_function(&self, x: C64, y: C64) -> Result<C64> {
        let sx = positive_sqrt(self.weight_w(x)?);
        let sy = positive_sqrt(self.weight_w(y)?);
        Ok(sx * sy * self.r_ren(x, y)?)
    }

    /// `Z(b;x,y) = ℛ_ren/c(b;-y)`.
    pub fn z_function(&self, x: C64, y: C64) -> Result<C64> {
        Ok(self.r_ren(x, y)? / self.harish_c(-y)?)
    }
}

/// Square root that is positive for positive reals (principal branch).
pub fn positive_sqrt(z: C64) -> C64 {
    z.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{c, rel_diff};

    fn rep(ap: f64, am: f64, b: f64) -> RepulsiveEvaluator {
        RepulsiveEvaluator::new(ScaleParams::new(ap, am).unwrap(), b).unwrap()
    }

    #[test]
    fn free_case_closed_form() {
        let e = rep(1.0, 1.0, 1.0);
        let p = *e.params();
        let (x, y) = (c(0.7, 0.0), c(0.4, 0.0));
        let expect = (PI * x * y).sin() / (2.0 * p.s_minus(x) * p.s_minus(y));
        let v = e.r_ren(x, y).unwrap();
        assert!(rel_diff(v, expect, 0.0) < 1e-10, "{v} {expect}");
    }

    #[test]
    fn free_case_complex_arguments() {
        let e = rep(1.3, 0.8, 1.3);
        let p = *e.params();
        for (x, y) in [(c(0.6, 0.65), c(0.3, 0.0)), (c(-1.1, 0.8), c(0.9, -0.8)), (c(0.4, 1.7), c(0.7, 0.1))] {
            let expect = (PI * x * y / (p.a_plus * p.a_minus)).sin()
                / (2.0 * p.s_minus(x) * p.s_minus(y));
            let v = e.r_ren(x, y).unwrap();
            assert!(rel_diff(v, expect, 0.0) < 1e-9, "{x} {y}: {v} {expect}");
        }
    }

    #[test]
    fn symmetries() {
        let e = rep(2.0, 1.0, 0.9);
        let s = rep(1.0, 2.0, 0.9);
        let (x, y) = (c(0.35, 0.0), c(0.6, 0.0));
        let v = e.r_ren(x, y).unwrap();
        assert!(v.im.abs() < 1e-12 * v.norm());
        assert!(rel_diff(v, e.r_ren(y, x).unwrap(), 0.0) < 1e-12);
        assert!(rel_diff(v, e.r_ren(-x, y).unwrap(), 0.0) < 1e-11);
        assert!(rel_diff(v, s.r_ren(x, y).unwrap(), 0.0) < 1e-10);
    }

    #[test]
    fn c_and_w_at_free_coupling() {
        let e = rep(1.2, 0.9, 1.2);
        let p = *e.params();
        let z = c(0.37, 0.11);
        assert!(rel_diff(e.harish_c(z).unwrap(), 1.0 / (2.0 * I * p.s_minus(z)), 0.0) < 1e-11);
        let w = 4.0 * p.s_minus(z) * p.s_minus(z);
        assert!(rel_diff(e.weight_w(z).unwrap(), w, 0.0) < 1e-11);
        assert!((e.scattering_u(z).unwrap() - 1.0).norm() < 1e-12);
    }

    #[test]
    fn u_reflection_and_modulus() {
        let e = rep(1.0, 1.7, 0.6);
        for y in [0.0, 1e-10, 0.3, 2.2] {
            let u = e.scattering_u(c(y, 0.0)).unwrap();
            assert!((u.norm() - 1.0).abs() < 1e-12);
            let v = e.scattering_u(c(-y, 0.0)).unwrap();
            assert!((u * v - 1.0).norm() < 1e-12);
        }
        assert!((e.scattering_u(c(0.0, 0.0)).unwrap() - 1.0).norm() < 1e-12);
        let z = c(0.8, 0.0);
        let direct = -e.harish_c(z).unwrap() / e.harish_c(-z).unwrap();
        assert!(rel_diff(direct, e.scattering_u(z).unwrap(), 0.0) < 1e-12);
    }

    #[test]
    fn phase_at_special_coupling() {
        let p = ScaleParams::new(1.0, 1.9).unwrap();
        for n in 0..3 {
            let e = RepulsiveEvaluator::new(p, (n + 1) as f64).unwrap();
            let expect = (-I).powi(n + 1) * p.e_minus(I * ((n + 1) * n) as f64 * p.a_plus / 2.0);
            assert!((e.phase_phi() - expect).norm() < 1e-13);
        }
    }

    #[test]
    fn f_function_sine_kernel() {
        let e = rep(1.0, 1.5, 1.0);
        let p = *e.params();
        let (x, y) = (c(0.8, 0.0), c(1.3, 0.0));
        let f = e.f_function(x, y).unwrap();
        assert!(rel_diff(f, 2.0 * (PI * x * y / (p.a_plus * p.a_minus)).sin(), 0.0) < 1e-10);
    }

    #[test]
    fn difference_equation_generic_coupling() {
        for &(ap, am, b) in &[(1.0, 1.2, 0.6), (1.0, 1.2, 1.7), (0.7, 1.6, 2.0), (1.5, 0.6, 0.3)] {
            let e = rep(ap, am, b);
            let p = *e.params();
            let op = AdoSpec { kind: AdoKind::A, params: p, b };
            for (x, y) in [(c(0.43, 0.0), c(0.71, 0.0)), (c(-1.2, 0.1), c(0.35, -0.05))] {
                let lhs = apply_ado(&op, |z| e.r_ren(z, y), x).unwrap();
                let rhs = 2.0 * p.c_plus(y) * e.r_ren(x, y).unwrap();
                assert!(rel_diff(lhs, rhs, 0.0) < 1e-10, "{ap} {am} {b} {x} {y}: {lhs} {rhs}");
            }
        }
    }
}
