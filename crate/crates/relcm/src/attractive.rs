//! Attractive sector: the eigenfunction `ψ(b;x,y)` built from the two
//! analytically continued conical functions, its transmission and
//! reflection amplitudes, and the Yang-Baxter and time-reversal identities.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::hypgamma::ScaleParams;
use crate::numerics::I;
use crate::repulsive::RepulsiveEvaluator;

#[derive(Debug, Clone)]
pub struct AttractiveEvaluator {
    pub rep: RepulsiveEvaluator,
    pub b: f64,
}

/// Transmission, reflection and repulsive scattering amplitudes at one `y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Amplitudes {
    pub t: C64,
    pub r: C64,
    pub u: C64,
}

impl AttractiveEvaluator {
    /// Accepts `b ∈ (-a+/2, a- + a+/2]`. The weight is positive at the
    /// origin inside the open interval; at the upper end it vanishes there
    /// while `ψ` stays regular.
    pub fn new(params: ScaleParams, b: f64) -> Result<Self> {
        let lo = -0.5 * params.a_plus;
        let hi = params.a_minus + 0.5 * params.a_plus;
        if !(b > lo && b <= hi + 1e-12 * hi.abs()) {
            return Err(Error::OutOfWindow(format!("b = {b} outside ({lo}, {hi}]")));
        }
        Ok(Self { rep: RepulsiveEvaluator::new(params, b)?, b })
    }

    pub fn params(&self) -> &ScaleParams {
        self.rep.params()
    }

    /// `w̃(b;x) = Π_σ G(σx + ia-/2)/G(σx + ia-/2 - ib)`.
    pub fn weight_tilde(&self, x: C64) -> Result<C64> {
        let g = &self.rep.gamma;
        let h = I * (0.5 * self.params().a_minus);
        let mut lg = C64::new(0.0, 0.0);
        for s in [1.0, -1.0] {
            lg += g.log_eval(x * s + h)? - g.log_eval(x * s + h - I * self.b)?;
        }
        crate::error::finite(lg.exp(), "attractive weight")
    }

    /// `c̃(b;x) = G(x + ia-/2 - ib)/G(x + ia-/2)`.
    pub fn c_tilde(&self, x: C64) -> Result<C64> {
        let g = &self.rep.gamma;
        let h = I * (0.5 * self.params().a_minus);
        Ok((g.log_eval(x + h - I * self.b)? - g.log_eval(x + h)?).exp())
    }

    /// `ψ(b;x,y)/w̃(b;x)^{1/2}`: the combination of `ℛ_ren(x ± ia+/2, y)`.
    pub fn psi_reduced(&self, x: C64, y: C64) -> Result<C64> {
        let p = *self.params();
        let ib = I * self.b;
        let den = 2.0 * p.s_minus(ib - y) * self.rep.harish_c(-y)?;
        if den.norm() < 1e-300 {
            return Err(Error::DivisionNearZero(y));
        }
        let h = I * (0.5 * p.a_plus);
        let plus = p.e_minus((ib - y) * 0.5) * self.rep.r_ren(x + h, y)?;
        let minus = p.e_minus((y - ib) * 0.5) * self.rep.r_ren(x - h, y)?;
        crate::error::finite((plus - minus) / den, "attractive eigenfunction")
    }

    /// `ψ(b;x,y)`, with the positive root of `w̃` on the real line.
    pub fn psi_general(&self, x: C64, y: C64) -> Result<C64> {
        Ok(self.weight_tilde(x)?.sqrt() * self.psi_reduced(x, y)?)
    }

    /// `t = s-(y)u/s-(ib - y)`, `r = s-(ib)u/s-(ib - y)`.
    pub fn amplitudes(&self, y: C64) -> Result<Amplitudes> {
        let p = *self.params();
        let ib = I * self.b;
        let den = p.s_minus(ib - y);
        if den.norm() < 1e-12 {
            return Err(Error::DivisionNearZero(y));
        }
        let u = self.rep.scattering_u(y)?;
        Ok(Amplitudes { t: p.s_minus(y) * u / den, r: p.s_minus(ib) * u / den, u })
    }

    /// Left minus right sides of the two Yang-Baxter relations.
    pub fn yang_baxter_residual(&self, y1: C64, y2: C64, y3: C64) -> Result<(C64, C64)> {
        let a12 = self.amplitudes(y1 - y2)?;
        let a13 = self.amplitudes(y1 - y3)?;
        let a23 = self.amplitudes(y2 - y3)?;
        let res1 = a12.r * a13.t * a23.u - (a23.t * a13.u * a12.r + a23.r * a13.r * a12.t);
        let res2 = a12.u * a13.r * a23.u - (a23.t * a13.r * a12.t + a23.r * a13.u * a12.r);
        Ok((res1, res2))
    }

    /// `ψ(x,y) - t(y)ψ(-x,-y) + r(y)ψ(x,-y)`.
    pub fn time_reversal_residual(&self, x: C64, y: C64) -> Result<C64> {
        let a = self.amplitudes(y)?;
        Ok(self.psi_general(x, y)? - a.t * self.psi_general(-x, -y)?
            + a.r * self.psi_general(x, -y)?)
    }

    /// `ψ` minus its dominant plane-wave form: `t e^{iπxy/a+a-}` for
    /// `side > 0`, `e^{iπxy/a+a-} - r e^{-iπxy/a+a-}` otherwise.
    pub fn psi_asymptotic_defect(&self, x: C64, y: C64, side: f64) -> Result<C64> {
        let p = *self.params();
        let a = self.amplitudes(y)?;
        let dominant = if side > 0.0 {
            a.t * p.plane_wave(x, y)
        } else {
            p.plane_wave(x, y) - a.r * p.plane_wave(-x, y)
        };
        Ok(self.psi_general(x, y)? - dominant)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{c, rel_diff};
    use crate::repulsive::{apply_ado, AdoKind, AdoSpec};

    fn att(ap: f64, am: f64, b: f64) -> AttractiveEvaluator {
        AttractiveEvaluator::new(ScaleParams::new(ap, am).unwrap(), b).unwrap()
    }

    #[test]
    fn window_enforced() {
        let p = ScaleParams::new(1.0, 1.0).unwrap();
        assert!(AttractiveEvaluator::new(p, 1.6).is_err());
        assert!(AttractiveEvaluator::new(p, 1.5).is_ok());
        assert!(AttractiveEvaluator::new(p, -0.6).is_err());
        assert!(AttractiveEvaluator::new(p, -0.4).is_ok());
    }

    #[test]
    fn free_coupling_is_plane_wave() {
        let e = att(1.3, 0.9, 0.9);
        let p = *e.params();
        for (x, y) in [(0.4, 0.7), (-1.3, 0.25), (2.0, -1.1)] {
            let (x, y) = (c(x, 0.0), c(y, 0.0));
            let v = e.psi_general(x, y).unwrap();
            assert!(rel_diff(v, p.plane_wave(x, y), 0.0) < 1e-10, "{v}");
        }
    }

    #[test]
    fn b_equal_a_plus_closed_form() {
        let e = att(1.0, 1.7, 1.0);
        let p = *e.params();
        let h = I * (0.5 * p.a_plus);
        for (x, y) in [(0.4, 0.7), (-1.3, 0.25)] {
            let (x, y) = (c(x, 0.0), c(y, 0.0));
            let mut s = C64::new(0.0, 0.0);
            for tau in [1.0, -1.0] {
                s += tau * p.e_minus(tau * (y - I * p.a_plus) * 0.5) / p.s_minus(x - tau * h)
                    * (p.e_minus(tau * y * 0.5) * p.plane_wave(x, y)
                        - p.e_minus(-tau * y * 0.5) * p.plane_wave(-x, y));
            }
            let expect = (p.s_minus(x + h) * p.s_minus(x - h)).sqrt()
                / (2.0 * p.s_minus(I * p.a_plus - y))
                * s;
            let v = e.psi_general(x, y).unwrap();
            assert!(rel_diff(v, expect, 0.0) < 1e-10, "{v} {expect}");
        }
    }

    #[test]
    fn commensurate_scales_give_signed_plane_wave() {
        let e = att(2.0, 1.0, 2.0);
        let p = *e.params();
        let (x, y) = (c(0.6, 0.0), c(0.45, 0.0));
        let v = e.psi_general(x, y).unwrap();
        assert!(rel_diff(v, -p.plane_wave(x, y), 0.0) < 1e-10, "{v}");
    }

    #[test]
    fn eigen_equations() {
        let e = att(1.0, 1.3, 0.7);
        let p = *e.params();
        let (x, y) = (c(0.55, 0.0), c(0.8, 0.0));
        let ado = AdoSpec { kind: AdoKind::ATilde, params: p, b: e.b };
        let lhs = apply_ado(&ado, |z| e.psi_reduced(z, y), x).unwrap();
        let rhs = 2.0 * p.c_plus(y) * e.psi_reduced(x, y).unwrap();
        assert!(rel_diff(lhs, rhs, 0.0) < 1e-9, "{lhs} {rhs}");
        let ado = AdoSpec { kind: AdoKind::SCal, params: p, b: e.b };
        let lhs = apply_ado(&ado, |z| e.psi_general(x, z), y).unwrap();
        let rhs = 2.0 * p.s_plus(x) * e.psi_general(x, y).unwrap();
        assert!(rel_diff(lhs, rhs, 0.0) < 1e-9, "{lhs} {rhs}");
    }

    #[test]
    fn unitarity_of_amplitudes() {
        let e = att(1.0, 1.4, 0.75);
        for y in [0.0, 0.3, 1.7, -2.2] {
            let a = e.amplitudes(c(y, 0.0)).unwrap();
            assert!((a.t.norm_sqr() + a.r.norm_sqr() - 1.0).abs() < 1e-12);
            assert!((a.t.conj() * a.r + a.r.conj() * a.t).norm() < 1e-12);
        }
    }

    #[test]
    fn yang_baxter_and_time_reversal() {
        let e = att(1.0, 1.4, 0.75);
        let (r1, r2) = e.yang_baxter_residual(c(0.3, 0.0), c(-0.4, 0.0), c(1.1, 0.0)).unwrap();
        assert!(r1.norm() < 1e-12 && r2.norm() < 1e-12);
        let (r1, r2) = e.yang_baxter_residual(c(0.3, 0.0), c(0.2, 0.0), c(0.2, 0.0)).unwrap();
        assert!(r1.norm() < 1e-12 && r2.norm() < 1e-12);
        let res = e.time_reversal_residual(c(0.7, 0.0), c(0.5, 0.0)).unwrap();
        assert!(res.norm() < 1e-10, "{res}");
    }

    #[test]
    fn asymptotic_defect_decays() {
        let e = att(1.0, 1.0, 0.8);
        let y = c(0.5, 0.0);
        let d10 = e.psi_asymptotic_defect(c(10.0, 0.0), y, 1.0).unwrap().norm();
        let d14 = e.psi_asymptotic_defect(c(14.0, 0.0), y, 1.0).unwrap().norm();
        assert!(d10 < 1e-3 && d14 < d10, "{d10} {d14}");
        let l10 = e.psi_asymptotic_defect(c(-10.0, 0.0), y, -1.0).unwrap().norm();
        let l14 = e.psi_asymptotic_defect(c(-14.0, 0.0), y, -1.0).unwrap().norm();
        assert!(l10 < 1e-3 && l14 < l10, "{l10} {l14}");
    }
}
