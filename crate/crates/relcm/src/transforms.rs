//! Eigenfunction transforms between the position space `L²(ℝ)` and the
//! two-component momentum space `L²((0,∞))⊗ℂ²`.
//!
//! A kernel is kept in separated form
//! `Ψ(r,k) = Σ_τ e^{iτrk} Σ_p A_p(r) B^τ_p(k)` with bounded factors, so that
//! dense tabulation on quadrature grids is cheap and free of cancellation.
//! Gram defects of smooth bump bases are measured with adaptive truncation
//! and compared against closed-form low-rank predictions.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypgamma::ScaleParams;
use crate::numerics::{gl_nodes, sinh_s, Scaled, I};
use crate::special_n::{sqrt_weight, SpecialNEvaluator};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

fn cr(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// One factor `c·sinh(αz + β)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SinhFactor {
    pub c: C64,
    pub alpha: f64,
    pub beta: C64,
}

/// `1/Π_m c_m sinh(α_m z + β_m)`: the weights `w(r)` and `ŵ(k)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SinhProduct {
    pub factors: Vec<SinhFactor>,
}

impl SinhProduct {
    fn push_pair(&mut self, c: C64, alpha: f64, beta: C64) {
        self.factors.push(SinhFactor { c, alpha, beta });
        self.factors.push(SinhFactor { c, alpha, beta: -beta });
    }

    pub fn eval(&self, z: C64) -> C64 {
        let p: C64 = self.factors.iter().map(|f| f.c * (z * f.alpha + f.beta).sinh()).product();
        1.0 / p
    }

    /// Residue at a simple pole `z0`.
    pub fn residue(&self, z0: C64) -> Result<C64> {
        let args: Vec<C64> = self.factors.iter().map(|f| z0 * f.alpha + f.beta).collect();
        let zeros: Vec<usize> = (0..args.len()).filter(|&i| args[i].sinh().norm() < 1e-9).collect();
        match zeros.as_slice() {
            [] => Err(Error::InvalidParameter(format!("{z0} is not a pole"))),
            [m] => {
                let f = self.factors[*m];
                let mut d = f.c * f.alpha * args[*m].cosh();
                for (i, g) in self.factors.iter().enumerate() {
                    if i != *m {
                        d *= g.c * args[i].sinh();
                    }
                }
                Ok(1.0 / d)
            }
            _ => Err(Error::DoublePole(z0)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelKind {
    /// `Ψ(r,k) = ψ_N(x(r), y(k))`.
    SpecialN { n: usize },
    /// The two-parameter example family with sign `σ` and angle `φ`.
    Example { sign: f64, phi: f64 },
    /// The reflectionless kernel with a single bound state for `ρκ > 2π`.
    Reflectionless,
    /// `sign·e^{irk}`.
    Fourier { sign: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// `⟨ℱf,ℱg⟩ - ⟨f,g⟩` on momentum-side functions.
    Forward,
    /// `⟨ℱ*h,ℱ*h'⟩ - ⟨h,h'⟩` on position-side functions.
    Adjoint,
}

#[derive(Debug, Clone)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub rho: f64,
    pub kappa: f64,
    /// `w(r)`, `iρ`-periodic.
    pub weight: SinhProduct,
    /// `ŵ(k) = v(-k)v(k)`, `iκ`-periodic.
    pub dual_weight: SinhProduct,
    /// `(r_j, w_j)` with `Im r_j ∈ (0,ρ)`.
    pub r_poles: Vec<(C64, C64)>,
    /// `(k_j, ŵ_j)` with `Im k_j ∈ (0,κ)`.
    pub k_poles: Vec<(C64, C64)>,
    /// Why the pole lists are unusable, if they are.
    pub pole_issue: Option<Error>,
    /// Largest violation of `L^{ττ'}(k,r,r') = L^{ττ'}(-k,-r,-r')` found at
    /// the sample points, relative to the size of `L`.
    pub evenness_residual: f64,
    special: Option<SpecialNEvaluator>,
    /// The weight has an odd number of double zeros of its denominator on the
    /// real axis; the analytic root of `w` is then odd and is used instead of
    /// the positive one.
    odd_root: bool,
    /// `mix[τ][p][q]` for the special kernels.
    mix: [Vec<Vec<C64>>; 2],
    r_scale: f64,
    k_scale: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelSummary {
    pub kind: KernelKind,
    pub rho: f64,
    pub kappa: f64,
    pub rho_kappa: f64,
    pub r_poles: Vec<(C64, C64)>,
    pub k_poles: Vec<(C64, C64)>,
    pub pole_issue: Option<String>,
    pub evenness_residual: f64,
}

fn reduce(z: C64, period: f64) -> Result<C64> {
    let t = z.im.rem_euclid(period);
    if t < 1e-10 * period || period - t < 1e-10 * period {
        return Err(Error::RealPole(format!("pole {z} reduces to the real axis")));
    }
    Ok(C64::new(z.re, t))
}

fn pole_distance(reps: &[C64], period: f64) -> f64 {
    reps.iter()
        .map(|z| {
            let t = z.im.rem_euclid(period);
            t.min(period - t)
        })
        .fold(f64::INFINITY, f64::min)
}

fn pole_list(reps: &[C64], period: f64, w: &SinhProduct) -> Result<Vec<(C64, C64)>> {
    let mut out = Vec::new();
    for &z in reps {
        let z = reduce(z, period)?;
        let partner = C64::new(0.0, period) - z;
        if (partner - z).norm() < 1e-9 {
            return Err(Error::DoublePole(z));
        }
        for &(q, _) in &out {
            let q: C64 = q;
            if (q - z).norm() < 1e-9 || (q - partner).norm() < 1e-9 {
                return Err(Error::DoublePole(z));
            }
        }
        out.push((z, w.residue(z)?));
    }
    Ok(out)
}

/// `[w^{1/2}e^{-u}, w^{1/2}e^{u}]` for `w = 1/|2 sinh(u+iθ)|²` (`sgn = 1`) or
/// `w = 1/|2 cosh(u+iθ)|²` (`sgn = -1`), without overflow.
fn exp_weighted(u: f64, theta: f64, sgn: f64) -> [C64; 2] {
    let a = u.abs();
    let s = if u >= 0.0 { 1.0 } else { -1.0 };
    let d = (cr(1.0) - sgn * C64::from_polar((-2.0 * a).exp(), -2.0 * theta * s)).norm();
    [cr((-u - a).exp() / d), cr((u - a).exp() / d)]
}

impl KernelSpec {
    fn assemble(
        kind: KernelKind,
        rho: f64,
        kappa: f64,
        weight: SinhProduct,
        dual_weight: SinhProduct,
        r_reps: Vec<C64>,
        k_reps: Vec<C64>,
        special: Option<SpecialNEvaluator>,
        mix: [Vec<Vec<C64>>; 2],
    ) -> Result<Self> {
        let mut pole_issue = None;
        let r_poles = pole_list(&r_reps, rho, &weight).unwrap_or_else(|e| {
            pole_issue = Some(e);
            Vec::new()
        });
        let k_poles = pole_list(&k_reps, kappa, &dual_weight).unwrap_or_else(|e| {
            pole_issue.get_or_insert(e);
            Vec::new()
        });
        let r_scale = pole_distance(&r_reps, rho).clamp(0.05 * rho, rho / 3.0);
        let k_scale = pole_distance(&k_reps, kappa).clamp(0.05 * kappa, kappa / 3.0);
        let mut ker = Self {
            kind,
            rho,
            kappa,
            weight,
            dual_weight,
            r_poles,
            k_poles,
            pole_issue,
            evenness_residual: 0.0,
            special,
            odd_root: false,
            mix,
            r_scale: r_scale.min(1.0),
            k_scale: k_scale.min(1.0),
        };
        ker.evenness_residual = ker.evenness_check();
        if !(ker.evenness_residual < 1e-8) {
            return Err(Error::InvalidParameter(format!(
                "evenness of the kernel coefficients fails ({:e})",
                ker.evenness_residual
            )));
        }
        Ok(ker)
    }

    /// The kernel built from `ψ_N`, in the variables `r = ρx/a-`, `k = κy/a-`.
    pub fn special_n(params: ScaleParams, n: usize) -> Result<Self> {
        let ev = SpecialNEvaluator::new(params, n)?;
        let (rho, kappa) = (params.rho, params.kappa());
        let rk = rho * kappa;
        let mut weight = SinhProduct::default();
        let mut dual = SinhProduct::default();
        for j in 0..=n {
            weight.push_pair(cr(2.0), PI / rho, I * ((j as f64 + 0.5) * PI * PI / rk));
        }
        for j in 1..=n + 1 {
            dual.push_pair(cr(2.0), PI / kappa, I * (j as f64 * PI * PI / rk));
        }
        let r_reps = (0..=n).map(|j| I * ((j as f64 + 0.5) * PI / kappa)).collect();
        let k_reps = (1..=n + 1).map(|j| I * (j as f64 * PI / rho)).collect();
        let mix = special_mix(&ev);
        // factors sinh(πr/ρ ± i(j+½)π²/ρκ) vanishing on the real line
        let real_zeros = (0..=n)
            .filter(|&j| {
                let t = (j as f64 + 0.5) * PI / rk;
                (t - t.round()).abs() < 1e-12
            })
            .count();
        let mut ker = Self::assemble(KernelKind::SpecialN { n }, rho, kappa, weight, dual, r_reps, k_reps, Some(ev), mix)?;
        ker.odd_root = real_zeros % 2 == 1;
        Ok(ker)
    }

    /// The example kernel with `w = 1/4|sinh(πr/ρ + iφ)|²`, `φ ∈ (0,π]`.
    pub fn example(rho: f64, kappa: f64, sign: f64, phi: f64) -> Result<Self> {
        check_periods(rho, kappa)?;
        if sign.abs() != 1.0 {
            return Err(Error::InvalidParameter(format!("sign = {sign}")));
        }
        if !(phi > 0.0 && phi <= PI) {
            return Err(Error::InvalidParameter(format!("phi = {phi} outside (0, pi]")));
        }
        let mut weight = SinhProduct::default();
        weight.push_pair(cr(2.0), PI / rho, I * phi);
        let mut dual = SinhProduct::default();
        dual.push_pair(cr(2.0), PI / kappa, I * (2.0 * phi));
        let r_reps = vec![I * (rho * phi / PI)];
        let k_reps = vec![I * (2.0 * kappa * phi / PI)];
        let kind = KernelKind::Example { sign, phi };
        Self::assemble(kind, rho, kappa, weight, dual, r_reps, k_reps, None, Default::default())
    }

    /// The example kernel at `φ0 = π²/2ρκ` with `σ = +`.
    pub fn example_phi0(rho: f64, kappa: f64) -> Result<Self> {
        Self::example(rho, kappa, 1.0, PI * PI / (2.0 * rho * kappa))
    }

    /// The example kernel at `φ0 + π/2`.
    pub fn example_phi_e(rho: f64, kappa: f64, sign: f64) -> Result<Self> {
        Self::example(rho, kappa, sign, PI * PI / (2.0 * rho * kappa) + 0.5 * PI)
    }

    pub fn reflectionless(rho: f64, kappa: f64) -> Result<Self> {
        check_periods(rho, kappa)?;
        let th = PI * PI / (rho * kappa);
        let mut weight = SinhProduct::default();
        // 2cosh z = -2i sinh(z + iπ/2)
        weight.factors.push(SinhFactor { c: -2.0 * I, alpha: PI / rho, beta: I * (th + 0.5 * PI) });
        weight.factors.push(SinhFactor { c: -2.0 * I, alpha: PI / rho, beta: I * (0.5 * PI - th) });
        let mut dual = SinhProduct::default();
        dual.push_pair(cr(2.0), PI / kappa, I * th);
        let r_reps = vec![I * (PI / kappa + 0.5 * rho)];
        let k_reps = vec![I * (PI / rho)];
        let kind = KernelKind::Reflectionless;
        Self::assemble(kind, rho, kappa, weight, dual, r_reps, k_reps, None, Default::default())
    }

    pub fn fourier(sign: f64) -> Result<Self> {
        if sign.abs() != 1.0 {
            return Err(Error::InvalidParameter(format!("sign = {sign}")));
        }
        let kind = KernelKind::Fourier { sign };
        let e = SinhProduct::default();
        Self::assemble(kind, 1.0, 1.0, e.clone(), e, vec![], vec![], None, Default::default())
    }

    /// Largest safe grid step in the position variable.
    pub fn r_scale(&self) -> f64 {
        self.r_scale
    }

    /// Largest safe grid step in the momentum variable.
    pub fn k_scale(&self) -> f64 {
        self.k_scale
    }

    pub fn rho_kappa(&self) -> f64 {
        self.rho * self.kappa
    }

    pub fn special(&self) -> Option<&SpecialNEvaluator> {
        self.special.as_ref()
    }

    pub fn summary(&self) -> KernelSummary {
        KernelSummary {
            kind: self.kind,
            rho: self.rho,
            kappa: self.kappa,
            rho_kappa: self.rho_kappa(),
            r_poles: self.r_poles.clone(),
            k_poles: self.k_poles.clone(),
            pole_issue: self.pole_issue.as_ref().map(|e| e.to_string()),
            evenness_residual: self.evenness_residual,
        }
    }

    fn ev(&self) -> &SpecialNEvaluator {
        self.special.as_ref().expect("special kernel")
    }

    fn theta_a(&self) -> f64 {
        PI * PI / self.rho_kappa()
    }

    /// Position-side factors `A_p(r)`.
    pub fn a_factors(&self, r: f64) -> Result<Vec<C64>> {
        let u = PI * r / self.rho;
        match self.kind {
            KernelKind::SpecialN { n } => {
                let ev = self.ev();
                let p = &ev.params;
                let x = p.x_of_r(cr(r));
                let mut sw = sqrt_weight(p, n, x)?;
                if self.odd_root && r < 0.0 {
                    sw = sw.scale(cr(-1.0));
                }
                let top = n as i32 + 1;
                Ok((-top..=top)
                    .map(|xx| sw.mul(Scaled::exp(x * (PI * xx as f64 / p.a_minus))).value())
                    .collect())
            }
            KernelKind::Example { phi, .. } => {
                let a = exp_weighted(u, phi, 1.0);
                // at φ = π the weight has a double zero of its root at r = 0; the
                // analytic (odd) root is used there
                let s = if phi == PI && u < 0.0 { -1.0 } else { 1.0 };
                Ok(vec![a[0] * s, a[1] * s])
            }
            KernelKind::Reflectionless => Ok(exp_weighted(u, self.theta_a(), -1.0).to_vec()),
            KernelKind::Fourier { .. } => Ok(vec![cr(1.0)]),
        }
    }

    /// Momentum-side factors `(B^+_p(k), B^-_p(k))`.
    pub fn b_factors(&self, k: f64) -> Result<[Vec<C64>; 2]> {
        match self.kind {
            KernelKind::SpecialN { n } => {
                let ev = self.ev();
                let p = &ev.params;
                let y = p.y_of_k(cr(k));
                let mut d = Scaled::ONE;
                for j in 1..=n + 1 {
                    let z = (y - I * (j as f64 * p.a_plus)) * (PI / p.a_minus);
                    d = d.mul(sinh_s(z).scale(2.0 * I));
                }
                if d.m.norm() == 0.0 {
                    return Err(Error::NearPole(y));
                }
                let top = n as i32 + 1;
                let bq: Vec<C64> = (-top..=top)
                    .map(|yy| Scaled::exp(y * (PI * yy as f64 / p.a_minus)).div(d).value())
                    .collect();
                let apply = |m: &Vec<Vec<C64>>| -> Vec<C64> {
                    m.iter().map(|row| row.iter().zip(&bq).map(|(a, b)| a * b).sum()).collect()
                };
                Ok([apply(&self.mix[0]), apply(&self.mix[1])])
            }
            KernelKind::Example { .. } | KernelKind::Reflectionless => {
                let t = self.transmission(k)?;
                let r = self.reflection(k)?;
                Ok([vec![cr(1.0), t], vec![-r, cr(0.0)]])
            }
            KernelKind::Fourier { sign } => Ok([vec![cr(sign)], vec![cr(0.0)]]),
        }
    }

    /// `Ψ(r,k)` for real arguments.
    pub fn psi(&self, r: f64, k: f64) -> Result<C64> {
        let a = self.a_factors(r)?;
        let [bp, bm] = self.b_factors(k)?;
        let e = C64::from_polar(1.0, r * k);
        let sp: C64 = a.iter().zip(&bp).map(|(x, y)| x * y).sum();
        let sm: C64 = a.iter().zip(&bm).map(|(x, y)| x * y).sum();
        crate::error::finite(sp * e + sm * e.conj(), "kernel")
    }

    /// `w(r)^{1/2}` on the real line.
    pub fn sqrt_weight_r(&self, r: f64) -> Result<f64> {
        let u = PI * r / self.rho;
        match self.kind {
            KernelKind::SpecialN { n } => {
                let p = &self.ev().params;
                Ok(sqrt_weight(p, n, p.x_of_r(cr(r)))?.value().re)
            }
            KernelKind::Example { phi, .. } => Ok(exp_weighted(u, phi, 1.0)[0].re * (u.abs() + u).exp()),
            KernelKind::Reflectionless => {
                Ok(exp_weighted(u, self.theta_a(), -1.0)[0].re * (u.abs() + u).exp())
            }
            KernelKind::Fourier { .. } => Ok(1.0),
        }
    }

    /// `v(k)`, continued to complex `k`.
    pub fn v(&self, k: C64) -> C64 {
        match self.kind {
            KernelKind::SpecialN { .. } => {
                let ev = self.ev();
                ev.v_scaled(ev.params.y_of_k(k)).map(|s| s.value()).unwrap_or(C64::new(f64::NAN, 0.0))
            }
            KernelKind::Example { phi, .. } => 1.0 / (2.0 * I * (k * (PI / self.kappa) - 2.0 * I * phi).sinh()),
            KernelKind::Reflectionless => {
                1.0 / (2.0 * I * ((k - I * (PI / self.rho)) * (PI / self.kappa)).sinh())
            }
            KernelKind::Fourier { .. } => cr(1.0),
        }
    }

    /// Entire coefficient `ℓ^τ(r,k)`.
    pub fn ell(&self, tau: f64, r: C64, k: C64) -> C64 {
        let u = r * (PI / self.rho);
        let kk = k * (PI / self.kappa);
        match self.kind {
            KernelKind::SpecialN { .. } => {
                let ev = self.ev();
                ev.ell(tau, ev.params.x_of_r(r), ev.params.y_of_k(k))
            }
            KernelKind::Example { sign, phi } => {
                if tau > 0.0 {
                    2.0 * I * ((-u).exp() * (kk - 2.0 * I * phi).sinh() - u.exp() * kk.sinh())
                } else {
                    2.0 * I * sign * (2.0 * I * phi).sinh() * (-u).exp()
                }
            }
            KernelKind::Reflectionless => {
                if tau > 0.0 {
                    let s = I * self.theta_a();
                    2.0 * I * (u.exp() * (kk + s).sinh() + (-u).exp() * (kk - s).sinh())
                } else {
                    cr(0.0)
                }
            }
            KernelKind::Fourier { sign } => {
                if tau > 0.0 {
                    cr(sign)
                } else {
                    cr(0.0)
                }
            }
        }
    }

    /// `m^τ(r,k) = v(k)ℓ^τ(r,k)`.
    pub fn m(&self, tau: f64, r: C64, k: C64) -> C64 {
        self.v(k) * self.ell(tau, r, k)
    }

    /// `μ^τ(r,k) = e^{iτrk}m^τ(r,k)`.
    pub fn mu(&self, tau: f64, r: C64, k: C64) -> C64 {
        (I * tau * r * k).exp() * self.m(tau, r, k)
    }

    /// `λ^τ(r,k) = e^{iτrk}ℓ^τ(r,k)`.
    pub fn lambda(&self, tau: f64, r: C64, k: C64) -> C64 {
        (I * tau * r * k).exp() * self.ell(tau, r, k)
    }

    /// Transmission amplitude `T(k)`.
    pub fn transmission(&self, k: f64) -> Result<C64> {
        let kk = cr(k * PI / self.kappa);
        match self.kind {
            KernelKind::SpecialN { .. } => {
                let ev = self.ev();
                Ok(ev.amplitudes_n(ev.params.y_of_k(cr(k)))?.t)
            }
            KernelKind::Example { phi, .. } => Ok(sinh_s(kk).div(sinh_s(2.0 * I * phi - kk)).value()),
            KernelKind::Reflectionless => {
                let s = I * self.theta_a();
                Ok(sinh_s(kk + s).div(sinh_s(kk - s)).value())
            }
            KernelKind::Fourier { sign } => Ok(cr(sign)),
        }
    }

    /// Reflection amplitude `R(k)`.
    pub fn reflection(&self, k: f64) -> Result<C64> {
        let kk = cr(k * PI / self.kappa);
        match self.kind {
            KernelKind::SpecialN { .. } => {
                let ev = self.ev();
                Ok(ev.amplitudes_n(ev.params.y_of_k(cr(k)))?.r)
            }
            KernelKind::Example { sign, phi } => {
                let num = Scaled::from(sign * (2.0 * I * phi).sinh());
                Ok(num.div(sinh_s(2.0 * I * phi - kk)).value())
            }
            KernelKind::Reflectionless | KernelKind::Fourier { .. } => Ok(cr(0.0)),
        }
    }

    /// `S(k) = [[T, R], [R, T]]`.
    pub fn s_matrix(&self, k: f64) -> Result<[[C64; 2]; 2]> {
        let t = self.transmission(k)?;
        let r = self.reflection(k)?;
        Ok([[t, r], [r, t]])
    }

    /// `U(r)^{1/2} = C(r)w(r)^{1/2}`, the unimodular large-`k` phase.
    pub fn u_half(&self, r: f64) -> Result<C64> {
        let u = cr(PI * r / self.rho);
        let unit = |s: Scaled| s.m / s.m.norm();
        match self.kind {
            KernelKind::SpecialN { .. } => {
                let ev = self.ev();
                let (c, _) = ev.asym_constants(ev.params.x_of_r(cr(r)))?;
                Ok(c * self.sqrt_weight_r(r)?)
            }
            KernelKind::Example { phi, .. } => Ok(-C64::from_polar(1.0, phi) * unit(sinh_s(u + I * phi))),
            KernelKind::Reflectionless => {
                let th = self.theta_a();
                Ok(C64::from_polar(1.0, th) * unit(crate::numerics::cosh_s(u + I * th)))
            }
            KernelKind::Fourier { .. } => Ok(cr(1.0)),
        }
    }

    fn evenness_check(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for &k in &[0.37, 1.61] {
            for &(r, rp) in &[(0.43, -1.27), (-0.81, 0.29), (1.13, 0.66)] {
                for tau in [1.0, -1.0] {
                    for taup in [1.0, -1.0] {
                        let l = |k: f64, r: f64, rp: f64| {
                            let (k, r, rp) = (cr(k), cr(r), cr(rp));
                            self.ell(tau, r, k) * self.ell(taup, rp, -k)
                                + self.ell(-tau, -r, k) * self.ell(-taup, -rp, -k)
                        };
                        let a = l(k, r, rp);
                        let b = l(-k, -r, -rp);
                        let scale = a.norm().max(b.norm()).max(1.0);
                        let d = (a - b).norm() / scale;
                        worst = worst.max(if d.is_finite() { d } else { f64::INFINITY });
                    }
                }
            }
        }
        worst
    }

    fn poles_checked(&self) -> Result<()> {
        match &self.pole_issue {
            Some(e) => Err(e.clone()),
            None => Ok(()),
        }
    }

    /// The residue sum whose vanishing for all `k ≠ k'` is equivalent to
    /// isometry of the forward transform.
    pub fn residue_sum_forward(&self, k: f64, kp: f64, d: f64, dp: f64) -> Result<C64> {
        self.poles_checked()?;
        let (kc, kpc) = (cr(k), cr(kp));
        let mut acc = cr(0.0);
        for &(rj, wj) in &self.r_poles {
            for nu in [1.0, -1.0] {
                for nup in [1.0, -1.0] {
                    let den = 1.0 - (self.rho * (nup * kp - nu * k)).exp();
                    if den.abs() < 1e-10 {
                        return Err(Error::NearPole(cr(k - kp)));
                    }
                    let num = self.mu(-d * nu, d * rj, -kc) * self.mu(-dp * nup, dp * rj, kpc)
                        + self.mu(d * nu, -d * rj, -kc) * self.mu(dp * nup, -dp * rj, kpc);
                    acc += wj * num / den;
                }
            }
        }
        Ok(acc * I * (d * dp))
    }

    /// The residue sum giving the kernel of `ℱℱ* - 1` at `r ≠ r'`.
    pub fn residue_sum_adjoint(&self, r: f64, rp: f64) -> Result<C64> {
        self.poles_checked()?;
        let (rc, rpc) = (cr(r), cr(rp));
        let mut acc = cr(0.0);
        for &(kj, wj) in &self.k_poles {
            for tau in [1.0, -1.0] {
                for taup in [1.0, -1.0] {
                    let den = 1.0 - tau * taup * (self.kappa * (taup * rp - tau * r)).exp();
                    if den.abs() < 1e-10 {
                        return Err(Error::NearPole(cr(r - rp)));
                    }
                    let lam = self.lambda(tau, rc, kj) * self.lambda(taup, rpc, -kj)
                        + self.lambda(-tau, -rc, kj) * self.lambda(-taup, -rpc, -kj);
                    acc += wj * lam / den;
                }
            }
        }
        Ok(acc * I * self.sqrt_weight_r(r)? * self.sqrt_weight_r(rp)?)
    }
}

fn check_periods(rho: f64, kappa: f64) -> Result<()> {
    for (name, v) in [("rho", rho), ("kappa", kappa)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter(format!("{name} = {v}")));
        }
    }
    Ok(())
}

/// Coefficients of `Ψ = Σ_τ e^{iτrk} Σ_{X,Y} M^τ_{XY} A_X(r) B_Y(k)` with
/// `A_X = w^{1/2}e-(Xx)` and `B_Y = v(y)e-(Yy)`, `X, Y ∈ [-N-1, N+1]`.
fn special_mix(ev: &SpecialNEvaluator) -> [Vec<Vec<C64>>; 2] {
    let n = ev.n;
    let p = &ev.params;
    let nf = n as f64;
    let size = 2 * n + 3;
    let es = |z: C64| (z * (PI / p.a_minus)).exp();
    let eta = (nf + 0.5) * p.a_plus;
    let mut out = [vec![vec![cr(0.0); size]; size], vec![vec![cr(0.0); size]; size]];
    for (ti, tau) in [1.0, -1.0].into_iter().enumerate() {
        let pre = (-1.0f64).powi(n as i32) * I.powi(n as i32 + 1) * tau;
        for d in [1.0, -1.0] {
            for eps in [1.0, -1.0] {
                for k in 0..=n {
                    for l in 0..=n {
                        let kf = k as f64;
                        let alpha = pre
                            * (2.0 * d * eps * 0.5)
                            * es(-I * (eps * d * eta))
                            * es(I * (d * (nf + 1.0) * p.a_plus * 0.5))
                            * ev.coeffs.get(k, l)
                            * es(I * (d * p.a_plus * (nf - 2.0 * kf) * 0.5));
                        let xx = eps + nf - 2.0 * kf;
                        let yy = -d * (1.0 + tau) * 0.5 + tau * (nf - 2.0 * l as f64);
                        let pi = (xx + nf + 1.0).round() as usize;
                        let qi = (yy + nf + 1.0).round() as usize;
                        out[ti][pi][qi] += alpha;
                    }
                }
            }
        }
    }
    out
}

/// `a·exp(-1/(1-t²))`, `t = (x - c)/h`, supported on `(c-h, c+h)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: f64,
    pub half_width: f64,
    pub amplitude: C64,
}

impl Bump {
    pub fn eval(&self, x: f64) -> C64 {
        let t = (x - self.center) / self.half_width;
        if t.abs() >= 1.0 {
            cr(0.0)
        } else {
            self.amplitude * (-1.0 / (1.0 - t * t)).exp()
        }
    }

    pub fn support(&self) -> (f64, f64) {
        (self.center - self.half_width, self.center + self.half_width)
    }
}

/// A momentum-side test function `(f_+, f_-)`, each a sum of bumps in `(0,∞)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoComponentFn {
    pub plus: Vec<Bump>,
    pub minus: Vec<Bump>,
}

impl TwoComponentFn {
    pub fn new(plus: Vec<Bump>, minus: Vec<Bump>) -> Result<Self> {
        for b in plus.iter().chain(&minus) {
            if !(b.half_width > 0.0 && b.support().0 > 0.0) {
                return Err(Error::InvalidParameter(format!("bump {b:?} not inside (0, inf)")));
            }
        }
        Ok(Self { plus, minus })
    }

    pub fn eval(&self, k: f64) -> [C64; 2] {
        [self.plus.iter().map(|b| b.eval(k)).sum(), self.minus.iter().map(|b| b.eval(k)).sum()]
    }

    fn bumps(&self) -> impl Iterator<Item = &Bump> {
        self.plus.iter().chain(&self.minus)
    }
}

/// A position-side test function, a sum of bumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionFn {
    pub bumps: Vec<Bump>,
}

impl PositionFn {
    pub fn eval(&self, r: f64) -> C64 {
        self.bumps.iter().map(|b| b.eval(r)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    Momentum(Vec<TwoComponentFn>),
    Position(Vec<PositionFn>),
}

impl Basis {
    pub fn side(&self) -> Side {
        match self {
            Basis::Momentum(_) => Side::Forward,
            Basis::Position(_) => Side::Adjoint,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Basis::Momentum(b) => b.len(),
            Basis::Position(b) => b.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn random_amplitude(rng: &mut ChaCha8Rng) -> C64 {
    C64::from_polar(0.6 + 0.8 * rng.gen::<f64>(), 2.0 * PI * rng.gen::<f64>())
}

/// `count` momentum-side functions with one bump per component, staggered
/// centers in `[1.35, 3.8]` and half widths in `[0.9, 1.2]`.
pub fn momentum_basis(count: usize, seed: u64) -> Vec<TwoComponentFn> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = 2.3 / count.max(1) as f64;
    (0..count)
        .map(|i| {
            let mut bump = |slot: usize| Bump {
                center: 1.35 + step * slot as f64 + 0.1 * rng.gen::<f64>(),
                half_width: 0.9 + 0.3 * rng.gen::<f64>(),
                amplitude: random_amplitude(&mut rng),
            };
            let plus = bump(i);
            let minus = bump((i + count / 2) % count);
            TwoComponentFn { plus: vec![plus], minus: vec![minus] }
        })
        .collect()
}

/// `count` position-side bumps with centers spread over `[-3.5, 3.5]` and
/// half widths in `[1, 1.5]`.
pub fn position_basis(count: usize, seed: u64) -> Vec<PositionFn> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = 7.0 / (count.max(2) - 1) as f64;
    (0..count)
        .map(|i| PositionFn {
            bumps: vec![Bump {
                center: -3.5 + step * i as f64 + 0.4 * (rng.gen::<f64>() - 0.5),
                half_width: 1.0 + 0.5 * rng.gen::<f64>(),
                amplitude: random_amplitude(&mut rng),
            }],
        })
        .collect()
}

/// Composite Gauss-Legendre grid whose panel edges include `breaks`.
fn aligned_grid(breaks: &[f64], hmax: f64) -> (Vec<f64>, Vec<f64>) {
    let mut b = breaks.to_vec();
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.dedup_by(|x, y| (*x - *y).abs() < 1e-14);
    let (mut xs, mut ws) = (Vec::new(), Vec::new());
    for w in b.windows(2) {
        let panels = ((w[1] - w[0]) / hmax).ceil().max(1.0) as usize;
        let (x, wt) = gl_nodes(w[0], w[1], panels);
        xs.extend(x);
        ws.extend(wt);
    }
    (xs, ws)
}

fn bump_integral<F: FnMut(f64) -> C64>(b: &Bump, mut f: F, panels: usize) -> C64 {
    let (lo, hi) = b.support();
    let (xs, ws) = gl_nodes(lo, hi, panels);
    xs.iter().zip(&ws).map(|(&x, &w)| w * f(x)).sum()
}

/// `(ℱf)(r) = (2π)^{-1/2}∫dk [Ψ(r,k)f_+(k) - Ψ(-r,k)f_-(k)]`.
pub fn forward(kernel: &KernelSpec, f: &TwoComponentFn, r: f64) -> Result<C64> {
    let mut acc = cr(0.0);
    for (sgn, bumps) in [(1.0, &f.plus), (-1.0, &f.minus)] {
        for b in bumps {
            let panels = ((2.0 * b.half_width * (r.abs() + 1.0) / 4.0).ceil() as usize).max(16);
            let mut err = None;
            let v = bump_integral(b, |k| match kernel.psi(sgn * r, k) {
                Ok(p) => p * b.eval(k),
                Err(e) => {
                    err = Some(e);
                    cr(0.0)
                }
            }, panels);
            if let Some(e) = err {
                return Err(e);
            }
            acc += sgn * v;
        }
    }
    Ok(acc * INV_SQRT_2PI)
}

/// `(ℱ*h)_δ(k) = δ(2π)^{-1/2}∫dr Ψ(δr,-k)h(r)`, returned as `[δ=+, δ=-]`.
pub fn adjoint(kernel: &KernelSpec, h: &PositionFn, k: f64) -> Result<[C64; 2]> {
    let mut out = [cr(0.0); 2];
    for (i, d) in [1.0, -1.0].into_iter().enumerate() {
        for b in &h.bumps {
            let panels = ((2.0 * b.half_width * (k.abs() + 1.0) / 4.0).ceil() as usize).max(16);
            let mut err = None;
            let v = bump_integral(b, |r| match kernel.psi(d * r, k) {
                Ok(p) => p.conj() * b.eval(r),
                Err(e) => {
                    err = Some(e);
                    cr(0.0)
                }
            }, panels);
            if let Some(e) = err {
                return Err(e);
            }
            out[i] += d * v;
        }
    }
    Ok([out[0] * INV_SQRT_2PI, out[1] * INV_SQRT_2PI])
}

/// Truncation and accuracy settings for Gram matrices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadSettings {
    /// Target absolute accuracy of each Gram entry.
    pub tol: f64,
    /// First truncation radius of the outer integral.
    pub start: f64,
    /// Largest admissible truncation radius.
    pub limit: f64,
}

impl Default for QuadSettings {
    fn default() -> Self {
        Self { tol: 1e-9, start: 16.0, limit: 4096.0 }
    }
}

/// A rank-one term `scale·φ⊗φ` of a defect.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Factor {
    pub function: FactorFn,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FactorFn {
    /// Momentum side: `Π_{l≤N} (2sinh(πk/κ + ilπ²/ρκ))^{-1}·sinh(jρk)` over
    /// `cosh(πk/2κ + iθ)`·(1,-1) (even) or `sinh(πk/2κ + iθ)`·(1,1) (odd),
    /// `θ = (N+1)π²/2ρκ`.
    Chi { n: usize, j: usize, odd: bool, rho: f64, kappa: f64 },
    /// Position side: `h_j(r) w_0(r)^{1/2}` with `h_j = 2cosh(jκr)` for odd
    /// `j` and `2sinh(jκr)` for even `j`.
    Ladder { j: usize, rho: f64, kappa: f64 },
    /// Position side: the bound state `2cosh(κr) w_N(r)^{1/2}`.
    Bound { n: usize, rho: f64, kappa: f64 },
    /// Position side: `1/(2|cosh(πr/ρ + iπ²/2ρκ)|)`.
    EvenWeight { rho: f64, kappa: f64 },
    /// Position side: `1/(2|cosh(πr/ρ + iπ²/ρκ)|)`.
    Reflectionless { rho: f64, kappa: f64 },
    /// Coefficients in the basis used for a measurement.
    BasisVector { coeffs: Vec<C64> },
}

impl FactorFn {
    pub fn eval_momentum(&self, k: f64) -> Result<[C64; 2]> {
        match *self {
            FactorFn::Chi { n, j, odd, rho, kappa } => {
                let rk = rho * kappa;
                let mut pre = Scaled::ONE;
                for l in 1..=n {
                    pre = pre.mul(sinh_s(C64::new(PI * k / kappa, l as f64 * PI * PI / rk)).scale(cr(2.0)));
                }
                let z = C64::new(0.5 * PI * k / kappa, (n as f64 + 1.0) * PI * PI / (2.0 * rk));
                let den = if odd { sinh_s(z) } else { crate::numerics::cosh_s(z) };
                let v = sinh_s(cr(j as f64 * rho * k)).div(den).div(pre).value();
                Ok(if odd { [v, v] } else { [v, -v] })
            }
            _ => Err(Error::InvalidParameter("not a momentum-side factor".into())),
        }
    }

    pub fn eval_position(&self, r: f64) -> Result<f64> {
        match *self {
            FactorFn::Ladder { j, rho, kappa } => {
                let p = ScaleParams::from_rho_kappa(rho, kappa)?;
                let sw = sqrt_weight(&p, 0, p.x_of_r(cr(r)))?;
                let a = j as f64 * kappa * r;
                let h = if j % 2 == 1 { crate::numerics::cosh_s(cr(a)) } else { sinh_s(cr(a)) };
                Ok(sw.mul(h).value().re * 2.0)
            }
            FactorFn::Bound { n, rho, kappa } => {
                let p = ScaleParams::from_rho_kappa(rho, kappa)?;
                let sw = sqrt_weight(&p, n, p.x_of_r(cr(r)))?;
                Ok(sw.mul(crate::numerics::cosh_s(cr(kappa * r))).value().re * 2.0)
            }
            FactorFn::EvenWeight { rho, kappa } => {
                let u = PI * r / rho;
                Ok(exp_weighted(u, PI * PI / (2.0 * rho * kappa), -1.0)[0].re * u.exp())
            }
            FactorFn::Reflectionless { rho, kappa } => {
                let u = PI * r / rho;
                Ok(exp_weighted(u, PI * PI / (rho * kappa), -1.0)[0].re * u.exp())
            }
            _ => Err(Error::InvalidParameter("not a position-side factor".into())),
        }
    }

    /// `⟨φ, f⟩` for a momentum-side test function.
    pub fn inner_momentum(&self, f: &TwoComponentFn) -> Result<C64> {
        let mut acc = cr(0.0);
        for (c, bumps) in [(0usize, &f.plus), (1, &f.minus)] {
            for b in bumps {
                let (xs, ws) = gl_nodes(b.support().0, b.support().1, 64);
                for (x, w) in xs.into_iter().zip(ws) {
                    acc += w * self.eval_momentum(x)?[c].conj() * b.eval(x);
                }
            }
        }
        Ok(acc)
    }

    /// `⟨φ, h⟩` for a position-side test function.
    pub fn inner_position(&self, h: &PositionFn) -> Result<C64> {
        let mut acc = cr(0.0);
        for b in &h.bumps {
            let (xs, ws) = gl_nodes(b.support().0, b.support().1, 64);
            for (x, w) in xs.into_iter().zip(ws) {
                acc += w * self.eval_position(x)? * b.eval(x);
            }
        }
        Ok(acc)
    }

    fn inner(&self, basis: &Basis) -> Result<Vec<C64>> {
        match basis {
            Basis::Momentum(fs) => fs.iter().map(|f| self.inner_momentum(f)).collect(),
            Basis::Position(hs) => hs.iter().map(|h| self.inner_position(h)).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DefectReport {
    pub side: Side,
    pub gram_defect: Vec<Vec<C64>>,
    pub numerical_rank: usize,
    /// Eigenvalues of the (hermitian) defect, largest modulus first.
    pub eigenvalues: Vec<f64>,
    pub factors: Vec<Factor>,
    /// `max |D - D^*|` before symmetrisation.
    pub hermiticity: f64,
    /// Final truncation radius of the outer integral (0 for predictions).
    pub cutoff: f64,
    pub tol: f64,
}

impl DefectReport {
    pub fn max_abs(&self) -> f64 {
        self.gram_defect.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn matrix(&self) -> DMatrix<C64> {
        let n = self.gram_defect.len();
        DMatrix::from_fn(n, n, |i, j| self.gram_defect[i][j])
    }

    /// Largest entrywise difference to another report on the same basis.
    pub fn max_diff(&self, other: &DefectReport) -> f64 {
        (self.matrix() - other.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn from_matrix(side: Side, d: DMatrix<C64>, cutoff: f64, tol: f64, factors: Option<Vec<Factor>>) -> Self {
        let n = d.nrows();
        let hermiticity = (&d - d.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        let h = (&d + d.adjoint()) * cr(0.5);
        let eig = h.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].abs().partial_cmp(&eig.eigenvalues[a].abs()).unwrap());
        let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let top = eigenvalues.first().map(|x| x.abs()).unwrap_or(0.0);
        let cut = (1e-6 * top).max(10.0 * tol);
        let numerical_rank = eigenvalues.iter().filter(|x| x.abs() > cut).count();
        let factors = factors.unwrap_or_else(|| {
            order
                .iter()
                .take(numerical_rank)
                .map(|&i| Factor {
                    function: FactorFn::BasisVector { coeffs: eig.eigenvectors.column(i).iter().copied().collect() },
                    scale: eig.eigenvalues[i],
                })
                .collect()
        });
        let gram_defect = (0..n).map(|i| (0..n).map(|j| h[(i, j)]).collect()).collect();
        Self { side, gram_defect, numerical_rank, eigenvalues, factors, hermiticity, cutoff, tol }
    }
}

fn basis_gram(basis: &Basis) -> DMatrix<C64> {
    let n = basis.len();
    let mut g = DMatrix::zeros(n, n);
    let bumps_of = |i: usize| -> Vec<(usize, Bump)> {
        match basis {
            Basis::Momentum(fs) => {
                fs[i].plus.iter().map(|b| (0, *b)).chain(fs[i].minus.iter().map(|b| (1, *b))).collect()
            }
            Basis::Position(hs) => hs[i].bumps.iter().map(|b| (0, *b)).collect(),
        }
    };
    for i in 0..n {
        for j in 0..n {
            let mut acc = cr(0.0);
            for (ci, bi) in bumps_of(i) {
                for (cj, bj) in bumps_of(j) {
                    if ci == cj {
                        acc += bump_integral(&bi, |x| bi.eval(x).conj() * bj.eval(x), 64);
                    }
                }
            }
            g[(i, j)] = acc;
        }
    }
    g
}

#[inline]
fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Measured Gram defect of the forward (momentum basis) or adjoint
/// (position basis) transform.
pub fn gram_defect(kernel: &KernelSpec, basis: &Basis, q: &QuadSettings) -> Result<DefectReport> {
    if basis.is_empty() {
        return Err(Error::InvalidParameter("empty basis".into()));
    }
    let (g, cutoff) = match basis {
        Basis::Momentum(fs) => forward_gram(kernel, fs, q, false)?,
        Basis::Position(hs) => adjoint_gram(kernel, hs, q)?,
    };
    let d = g - basis_gram(basis);
    Ok(DefectReport::from_matrix(basis.side(), d, cutoff, q.tol, None))
}

/// `max |⟨ℱf_i, 𝒫ℱf_j⟩ - ⟨f_i, P̂f_j⟩|` with `P̂(g+, g-) = (-g-, -g+)`.
/// Vanishes when the transform is isometric and intertwines the two parities.
pub fn parity_defect(kernel: &KernelSpec, fs: &[TwoComponentFn], q: &QuadSettings) -> Result<f64> {
    let (g, _) = forward_gram(kernel, fs, q, true)?;
    let n = fs.len();
    let cross = |a: &[Bump], b: &[Bump]| -> C64 {
        a.iter()
            .flat_map(|x| b.iter().map(move |y| (x, y)))
            .map(|(x, y)| bump_integral(x, |t| x.eval(t).conj() * y.eval(t), 64))
            .sum()
    };
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let expect = -cross(&fs[i].plus, &fs[j].minus) - cross(&fs[i].minus, &fs[j].plus);
            worst = worst.max((g[(i, j)] - expect).norm());
        }
    }
    Ok(worst)
}

fn outer_ladder<F>(q: &QuadSettings, mut annulus: F) -> Result<(DMatrix<C64>, f64)>
where
    F: FnMut(f64, f64) -> Result<DMatrix<C64>>,
{
    let (mut lo, mut hi) = (0.0, q.start);
    let mut total: Option<DMatrix<C64>> = None;
    loop {
        let a = annulus(lo, hi)?;
        let tail = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
        total = Some(match total {
            Some(t) => t + a,
            None => a,
        });
        if lo > 0.0 && tail < 0.1 * q.tol {
            return Ok((total.unwrap(), hi));
        }
        if 2.0 * hi > q.limit {
            return Err(Error::NonConvergence(format!("Gram tail {tail:e} at radius {hi}")));
        }
        lo = hi;
        hi *= 2.0;
    }
}

fn accumulate(rows: Vec<(f64, Vec<C64>, Vec<C64>)>, n: usize) -> DMatrix<C64> {
    let mut m = DMatrix::zeros(n, n);
    for (w, u, v) in rows {
        for i in 0..n {
            let ci = u[i].conj() * w;
            for j in 0..n {
                m[(i, j)] += ci * v[j];
            }
        }
    }
    m
}

/// `⟨ℱf_i, ℱf_j⟩`, or `⟨ℱf_i, 𝒫ℱf_j⟩` with `(𝒫h)(r) = h(-r)` when `parity` is set.
fn forward_gram(kernel: &KernelSpec, fs: &[TwoComponentFn], q: &QuadSettings, parity: bool) -> Result<(DMatrix<C64>, f64)> {
    let nb = fs.len();
    let bumps: Vec<&Bump> = fs.iter().flat_map(|f| f.bumps()).collect();
    let breaks: Vec<f64> = bumps.iter().flat_map(|b| [b.support().0, b.support().1]).collect();
    let kmax = breaks.iter().cloned().fold(0.0, f64::max);
    let hmin = bumps.iter().map(|b| b.half_width).fold(f64::INFINITY, f64::min);
    outer_ladder(q, |lo, hi| {
        let hk = (6.0 / hi).min(kernel.k_scale).min(0.25 * hmin);
        let (ks, wk) = aligned_grid(&breaks, hk);
        let fv: Vec<(Vec<C64>, Vec<C64>)> = ks
            .iter()
            .zip(&wk)
            .map(|(&k, &w)| {
                let s = w * INV_SQRT_2PI;
                let v: Vec<[C64; 2]> = fs.iter().map(|f| f.eval(k)).collect();
                (v.iter().map(|x| x[0] * s).collect(), v.iter().map(|x| x[1] * s).collect())
            })
            .collect();
        let bf = ks.iter().map(|&k| kernel.b_factors(k)).collect::<Result<Vec<_>>>()?;
        let hr = (6.0 / kmax).min(kernel.r_scale);
        let (rs, wr) = gl_nodes(lo, hi, ((hi - lo) / hr).ceil() as usize);
        let rows: Vec<Vec<(f64, Vec<C64>, Vec<C64>)>> = rs
            .par_iter()
            .zip(wr.par_iter())
            .map(|(&r, &w)| -> Result<Vec<(f64, Vec<C64>, Vec<C64>)>> {
                let ap = kernel.a_factors(r)?;
                let am = kernel.a_factors(-r)?;
                let mut fp = vec![cr(0.0); nb];
                let mut fm = vec![cr(0.0); nb];
                for (b, &k) in ks.iter().enumerate() {
                    let [bp, bm] = &bf[b];
                    let e = C64::from_polar(1.0, r * k);
                    let psi_p = dot(&ap, bp) * e + dot(&ap, bm) * e.conj();
                    let psi_m = dot(&am, bp) * e.conj() + dot(&am, bm) * e;
                    let (gp, gm) = &fv[b];
                    for i in 0..nb {
                        fp[i] += psi_p * gp[i] - psi_m * gm[i];
                        fm[i] += psi_m * gp[i] - psi_p * gm[i];
                    }
                }
                Ok(if parity {
                    vec![(w, fp.clone(), fm.clone()), (w, fm, fp)]
                } else {
                    vec![(w, fp.clone(), fp), (w, fm.clone(), fm)]
                })
            })
            .collect::<Result<_>>()?;
        Ok(accumulate(rows.into_iter().flatten().collect(), nb))
    })
}

fn adjoint_gram(kernel: &KernelSpec, hs: &[PositionFn], q: &QuadSettings) -> Result<(DMatrix<C64>, f64)> {
    let nb = hs.len();
    let bumps: Vec<&Bump> = hs.iter().flat_map(|h| &h.bumps).collect();
    let mut breaks: Vec<f64> = bumps.iter().flat_map(|b| [b.support().0.abs(), b.support().1.abs()]).collect();
    breaks.push(0.0);
    let rmax = breaks.iter().cloned().fold(0.0, f64::max);
    let hmin = bumps.iter().map(|b| b.half_width).fold(f64::INFINITY, f64::min);
    outer_ladder(q, |lo, hi| {
        let hr = (6.0 / hi).min(kernel.r_scale).min(0.25 * hmin);
        let (rs, wr) = aligned_grid(&breaks, hr);
        let mut tab = Vec::with_capacity(rs.len());
        for (&r, &w) in rs.iter().zip(&wr) {
            let s = w * INV_SQRT_2PI;
            let hp: Vec<C64> = hs.iter().map(|h| h.eval(r) * s).collect();
            let hm: Vec<C64> = hs.iter().map(|h| h.eval(-r) * s).collect();
            tab.push((r, kernel.a_factors(r)?, kernel.a_factors(-r)?, hp, hm));
        }
        let hk = (6.0 / rmax).min(kernel.k_scale);
        let (ks, wk) = gl_nodes(lo, hi, ((hi - lo) / hk).ceil() as usize);
        let rows: Vec<Vec<(f64, Vec<C64>, Vec<C64>)>> = ks
            .par_iter()
            .zip(wk.par_iter())
            .map(|(&k, &w)| -> Result<Vec<(f64, Vec<C64>, Vec<C64>)>> {
                let [bp, bm] = kernel.b_factors(k)?;
                let mut gp = vec![cr(0.0); nb];
                let mut gm = vec![cr(0.0); nb];
                for (r, ap, am, hp, hm) in &tab {
                    let e = C64::from_polar(1.0, r * k);
                    let psi_p = (dot(ap, &bp) * e + dot(ap, &bm) * e.conj()).conj();
                    let psi_m = (dot(am, &bp) * e.conj() + dot(am, &bm) * e).conj();
                    for i in 0..nb {
                        gp[i] += psi_p * hp[i] + psi_m * hm[i];
                        gm[i] -= psi_m * hp[i] + psi_p * hm[i];
                    }
                }
                Ok(vec![(w, gp.clone(), gp), (w, gm.clone(), gm)])
            })
            .collect::<Result<_>>()?;
        Ok(accumulate(rows.into_iter().flatten().collect(), nb))
    })
}

fn sine_ratio(rk: f64, n: usize) -> f64 {
    let s = |j: usize| (j as f64 * PI * PI / rk).sin();
    let num: f64 = (n + 1..=2 * n + 1).map(s).product();
    let den: f64 = (1..=n).map(s).product();
    (-1.0f64).powi(n as i32) * num / den
}

/// Closed-form low-rank factors of the defect on one side.
pub fn predict_factors(kernel: &KernelSpec, side: Side) -> Result<Vec<Factor>> {
    let (rho, kappa) = (kernel.rho, kernel.kappa);
    let rk = rho * kappa;
    let x = rk / PI;
    let eps = 1e-12;
    let mismatch = || Err(Error::IntervalMismatch(format!("no closed-form defect at rho*kappa = {rk}")));
    let one = |function: FactorFn, scale: f64, want: Side| -> Vec<Factor> {
        if side == want {
            vec![Factor { function, scale }]
        } else {
            Vec::new()
        }
    };
    match kernel.kind {
        KernelKind::Fourier { .. } => Ok(Vec::new()),
        KernelKind::SpecialN { n } => {
            let nf = n as f64;
            if x >= nf + 1.0 - eps {
                return Ok(Vec::new());
            }
            let bound = Factor { function: FactorFn::Bound { n, rho, kappa }, scale: kappa * sine_ratio(rk, n) / PI };
            if x > nf + 0.5 {
                return Ok(if side == Side::Adjoint { vec![bound] } else { Vec::new() });
            }
            if n >= 1 && x > nf {
                return Ok(match side {
                    Side::Adjoint => vec![bound],
                    Side::Forward => {
                        let c = rho * sine_ratio(rk, n) / (2.0 * PI);
                        vec![
                            Factor { function: FactorFn::Chi { n, j: 1, odd: false, rho, kappa }, scale: c },
                            Factor { function: FactorFn::Chi { n, j: 1, odd: true, rho, kappa }, scale: -c },
                        ]
                    }
                });
            }
            if n > 0 {
                return mismatch();
            }
            let inv = PI / rk;
            if (inv - inv.round()).abs() < 1e-9 {
                return Ok(Vec::new());
            }
            let s = (PI * PI / rk).sin();
            Ok(match side {
                Side::Forward => {
                    let c = rho * s / (2.0 * PI);
                    (1..=(0.5 * inv).floor() as usize)
                        .flat_map(|j| {
                            [
                                Factor { function: FactorFn::Chi { n: 0, j, odd: false, rho, kappa }, scale: c },
                                Factor { function: FactorFn::Chi { n: 0, j, odd: true, rho, kappa }, scale: -c },
                            ]
                        })
                        .collect()
                }
                Side::Adjoint => (1..=inv.floor() as usize)
                    .map(|j| Factor {
                        function: FactorFn::Ladder { j, rho, kappa },
                        scale: if j % 2 == 1 { 1.0 } else { -1.0 } * kappa * s / PI,
                    })
                    .collect(),
            })
        }
        KernelKind::Example { sign, phi } => {
            let phi0 = PI * PI / (2.0 * rk);
            if (phi - phi0).abs() < eps && sign > 0.0 {
                if x >= 1.0 - eps {
                    Ok(Vec::new())
                } else if x > 0.5 {
                    let f = FactorFn::Bound { n: 0, rho, kappa };
                    Ok(one(f, kappa * (PI * PI / rk).sin() / PI, Side::Adjoint))
                } else {
                    mismatch()
                }
            } else if (phi - phi0 - 0.5 * PI).abs() < eps && x > 1.0 {
                if sign < 0.0 {
                    Ok(Vec::new())
                } else {
                    let f = FactorFn::EvenWeight { rho, kappa };
                    Ok(one(f, -2.0 * kappa * (PI * PI / rk).sin() / PI, Side::Adjoint))
                }
            } else if (phi - 0.5 * PI).abs() < eps || (phi - PI).abs() < eps {
                Ok(Vec::new())
            } else {
                mismatch()
            }
        }
        KernelKind::Reflectionless => {
            if x > 2.0 {
                let f = FactorFn::Reflectionless { rho, kappa };
                Ok(one(f, -kappa * (2.0 * PI * PI / rk).sin() / PI, Side::Adjoint))
            } else {
                mismatch()
            }
        }
    }
}

/// The predicted Gram defect on `basis`, assembled from the closed-form
/// factors: `D_ij = Σ_f s_f conj⟨φ_f, b_i⟩⟨φ_f, b_j⟩`.
pub fn predict_defect(kernel: &KernelSpec, basis: &Basis) -> Result<DefectReport> {
    let factors = predict_factors(kernel, basis.side())?;
    let n = basis.len();
    let mut d = DMatrix::zeros(n, n);
    for f in &factors {
        let c = f.function.inner(basis)?;
        for i in 0..n {
            for j in 0..n {
                d[(i, j)] += f.scale * c[i].conj() * c[j];
            }
        }
    }
    let mut rep = DefectReport::from_matrix(basis.side(), d, 0.0, 1e-12, Some(factors));
    rep.numerical_rank = rep.factors.len();
    Ok(rep)
}

/// True when both predicted defects vanish.
pub fn is_unitary(kernel: &KernelSpec) -> bool {
    [Side::Forward, Side::Adjoint]
        .iter()
        .all(|&s| predict_factors(kernel, s).map(|f| f.is_empty()).unwrap_or(false))
}

/// True when the forward defect vanishes.
pub fn is_isometric(kernel: &KernelSpec) -> bool {
    predict_factors(kernel, Side::Forward).map(|f| f.is_empty()).unwrap_or(false)
}

/// Least-squares `s` in `D ≈ s·P`, `P_ij = conj⟨φ,b_i⟩⟨φ,b_j⟩`; for a
/// defect `-φ⊗φ/‖φ‖²` the fitted norm is `-1/s`.
pub fn fitted_projector_norm(measured: &DefectReport, phi: &FactorFn, basis: &Basis) -> Result<f64> {
    let c = phi.inner(basis)?;
    let d = measured.matrix();
    let n = c.len();
    let (mut num, mut den) = (cr(0.0), 0.0);
    for i in 0..n {
        for j in 0..n {
            let p = c[i].conj() * c[j];
            num += p.conj() * d[(i, j)];
            den += p.norm_sqr();
        }
    }
    Ok(-1.0 / (num.re / den))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{c, rel_diff, residue_numeric, ContourSpec};

    fn special(ap: f64, am: f64, n: usize) -> KernelSpec {
        KernelSpec::special_n(ScaleParams::new(ap, am).unwrap(), n).unwrap()
    }

    #[test]
    fn separated_form_matches_direct_kernel() {
        for (ap, am, n) in [(1.0, 2.3, 0), (1.0, 1.7, 0), (0.8, 2.9, 1), (1.0, 3.4, 2)] {
            let ker = special(ap, am, n);
            let ev = ker.special().unwrap();
            for (r, k) in [(0.3, 0.7), (-1.9, 2.2), (6.5, 0.4), (-8.0, 5.5), (0.05, 11.0)] {
                let a = ker.psi(r, k).unwrap();
                let b = ev.kernel(r, k).unwrap();
                assert!(rel_diff(a, b, 1e-12) < 1e-10, "N={n} ({r},{k}): {a} {b}");
            }
        }
    }

    #[test]
    fn example_closed_forms() {
        let (rho, kappa) = (1.0, 2.2);
        let ker = KernelSpec::example(rho, kappa, -1.0, 0.7).unwrap();
        for (r, k) in [(0.4, 0.9), (-2.1, 1.3)] {
            let u = PI * r / rho;
            let t = ker.transmission(k).unwrap();
            let rr = ker.reflection(k).unwrap();
            let w = 1.0 / (4.0 * (c(u, 0.7)).sinh().norm_sqr());
            let e = C64::from_polar(1.0, r * k);
            let direct = w.sqrt() * (e * ((-u).exp() + u.exp() * t) - e.conj() * rr * (-u).exp());
            assert!(rel_diff(ker.psi(r, k).unwrap(), direct, 0.0) < 1e-12);
        }
        let n0 = special(PI / 2.2, 1.0, 0);
        let p0 = KernelSpec::example_phi0(1.0, 2.2).unwrap();
        for (r, k) in [(0.4, 0.9), (-2.1, 1.3)] {
            assert!(rel_diff(n0.psi(r, k).unwrap(), p0.psi(r, k).unwrap(), 0.0) < 1e-10);
        }
        let m = KernelSpec::example(1.0, 2.2, 1.0, PI).unwrap();
        let p = KernelSpec::example(1.0, 2.2, -1.0, 0.5 * PI).unwrap();
        for (r, k) in [(0.4, 0.9), (-2.1, 1.3)] {
            let e = C64::from_polar(1.0, r * k);
            assert!(rel_diff(m.psi(r, k).unwrap(), -e, 0.0) < 1e-12);
            assert!(rel_diff(p.psi(r, k).unwrap(), e, 0.0) < 1e-12);
        }
        assert!(m.pole_issue.is_some() && p.pole_issue.is_some());
    }

    #[test]
    fn reflectionless_data() {
        let ker = KernelSpec::reflectionless(1.0, 7.3).unwrap();
        let th = PI * PI / 7.3;
        for (r, k) in [(0.4, 0.9), (-2.1, 1.3)] {
            let u = PI * r;
            let t = ker.transmission(k).unwrap();
            let w = 1.0 / (4.0 * c(u, th).cosh().norm_sqr());
            let direct = w.sqrt() * C64::from_polar(1.0, r * k) * ((-u).exp() + u.exp() * t);
            assert!(rel_diff(ker.psi(r, k).unwrap(), direct, 0.0) < 1e-12);
            assert!((t.norm() - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn conjugation_and_evenness() {
        let kernels = [
            special(1.0, 2.3, 0),
            special(0.8, 2.9, 1),
            KernelSpec::example(1.0, 2.2, 1.0, 0.7).unwrap(),
            KernelSpec::example_phi_e(1.0, 4.0, -1.0).unwrap(),
            KernelSpec::reflectionless(1.0, 7.3).unwrap(),
        ];
        for ker in &kernels {
            assert!(ker.evenness_residual < 1e-10, "{:?}", ker.kind);
            for (r, k) in [(0.4, 0.9), (-2.1, 1.3)] {
                let a = ker.psi(r, -k).unwrap();
                let b = ker.psi(r, k).unwrap().conj();
                assert!(rel_diff(a, b, 1e-12) < 1e-10, "{:?}", ker.kind);
            }
        }
    }

    #[test]
    fn weight_residues() {
        let ker = special(0.8, 2.9, 1);
        let f = |z: C64| ker.weight.eval(z);
        for &(rj, wj) in &ker.r_poles {
            let contour = ContourSpec::new(rj, 0.02, 64).unwrap();
            let num = residue_numeric(f, &contour).unwrap();
            assert!(rel_diff(num, wj, 0.0) < 1e-10, "{num} {wj}");
            let partner = C64::new(0.0, ker.rho) - rj;
            let wp = ker.weight.residue(partner).unwrap();
            assert!(rel_diff(wp, -wj, 0.0) < 1e-12);
        }
        let g = |z: C64| ker.dual_weight.eval(z);
        for &(kj, wj) in &ker.k_poles {
            let contour = ContourSpec::new(kj, 0.02, 64).unwrap();
            assert!(rel_diff(residue_numeric(g, &contour).unwrap(), wj, 0.0) < 1e-10);
        }
        let (rho, phi) = (1.3, 0.3);
        let ex = KernelSpec::example(rho, 2.0, 1.0, phi).unwrap();
        let expect = rho / (4.0 * PI * (I * (2.0 * phi)).sinh());
        assert!(rel_diff(ex.r_poles[0].1, expect, 0.0) < 1e-12);
        let n0 = KernelSpec::special_n(ScaleParams::from_rho_kappa(1.0, 3.0).unwrap(), 0).unwrap();
        let expect = -I * 1.0 / (4.0 * PI * (PI * PI / 3.0).sin());
        assert!(rel_diff(n0.r_poles[0].1, expect, 0.0) < 1e-12);
    }

    #[test]
    fn amplitudes_and_phases() {
        let kernels = [
            special(1.0, 2.3, 0),
            special(0.8, 2.9, 1),
            KernelSpec::example(1.0, 2.2, 1.0, 0.7).unwrap(),
            KernelSpec::reflectionless(1.0, 7.3).unwrap(),
        ];
        for ker in &kernels {
            for k in [0.2, 1.1, 3.7] {
                let s = ker.s_matrix(k).unwrap();
                let (t, r) = (s[0][0], s[0][1]);
                assert!((t.norm_sqr() + r.norm_sqr() - 1.0).abs() < 1e-12);
                assert!((t * r.conj() + r * t.conj()).norm() < 1e-12);
            }
            for r in [-3.0, 0.4, 2.5] {
                assert!((ker.u_half(r).unwrap().norm() - 1.0).abs() < 1e-12, "{:?}", ker.kind);
            }
        }
    }

    #[test]
    fn coefficient_asymptotics() {
        let ker = special(0.8, 2.9, 1);
        let k = 0.9;
        let (t, r) = (ker.transmission(k).unwrap(), ker.reflection(k).unwrap());
        let defect = |x: f64| {
            let sw = ker.sqrt_weight_r(x).unwrap();
            let (mp, mm) = (sw * ker.m(1.0, cr(x), cr(k)), sw * ker.m(-1.0, cr(x), cr(k)));
            if x > 0.0 {
                (mp - t).norm() + mm.norm()
            } else {
                (mp - 1.0).norm() + (mm + r).norm()
            }
        };
        for side in [1.0, -1.0] {
            let (d4, d8) = (defect(4.0 * side), defect(8.0 * side));
            assert!(d8 < 1e-4 && d8 < 1e-2 * d4, "{d4} {d8}");
        }
    }

    #[test]
    fn residue_sums() {
        let ker = special(0.8, 2.9, 1);
        for (k, kp) in [(0.4, 1.3), (2.2, 0.7)] {
            for (d, dp) in [(1.0, 1.0), (1.0, -1.0), (-1.0, -1.0)] {
                assert!(ker.residue_sum_forward(k, kp, d, dp).unwrap().norm() < 1e-10);
            }
        }
        let unit = special(1.0, 2.3, 1);
        for (r, rp) in [(0.4, -1.3), (2.2, 0.7)] {
            assert!(unit.residue_sum_adjoint(r, rp).unwrap().norm() < 1e-10);
        }
        let (rho, kappa) = (1.0, 2.4);
        let n0 = KernelSpec::special_n(ScaleParams::from_rho_kappa(rho, kappa).unwrap(), 0).unwrap();
        let s = kappa * (PI * PI / (rho * kappa)).sin() / PI;
        for (r, rp) in [(0.4, -1.3), (2.2, 0.7)] {
            let got = n0.residue_sum_adjoint(r, rp).unwrap();
            let expect = s * 4.0 * (kappa * r).cosh() * (kappa * rp).cosh()
                * n0.sqrt_weight_r(r).unwrap() * n0.sqrt_weight_r(rp).unwrap();
            assert!(rel_diff(got, cr(expect), 0.0) < 1e-10, "{got} {expect}");
        }
    }

    #[test]
    fn ladder_sum_closed_form() {
        let kappa = 0.8;
        for m in 1..=4usize {
            for (r, rp) in [(0.3, -0.7), (1.1, 0.4)] {
                let h = |j: usize, x: f64| {
                    let a = j as f64 * kappa * x;
                    2.0 * if j % 2 == 1 { a.cosh() } else { a.sinh() }
                };
                let sum: f64 = (1..=m).map(|j| if j % 2 == 1 { 1.0 } else { -1.0 } * h(j, r) * h(j, rp)).sum();
                let mf = m as f64 + 0.5;
                let closed = (mf * kappa * (r - rp)).sinh() / (0.5 * kappa * (r - rp)).sinh()
                    + (-1.0f64).powi(m as i32 + 1) * (mf * kappa * (r + rp)).cosh() / (0.5 * kappa * (r + rp)).cosh();
                assert!((sum - closed).abs() < 1e-10 * closed.abs().max(1.0), "m={m}: {sum} {closed}");
            }
        }
    }

    #[test]
    fn bump_transforms_decay() {
        let ker = special(1.0, 2.3, 0);
        let f = &momentum_basis(6, 3)[2];
        let peak = |r0: f64| {
            (0..8).map(|i| forward(&ker, f, r0 + 0.37 * i as f64).unwrap().norm()).fold(0.0, f64::max)
        };
        assert!(peak(512.0) * 512f64.powi(4) < peak(128.0) * 128f64.powi(4));
    }

    #[test]
    fn isometry_of_the_special_kernel() {
        let ker = special(1.0, 2.3, 0);
        let basis = Basis::Momentum(momentum_basis(6, 11));
        let rep = gram_defect(&ker, &basis, &QuadSettings::default()).unwrap();
        assert!(rep.max_abs() < 1e-8, "{}", rep.max_abs());
        assert_eq!(rep.numerical_rank, 0);
        assert!(rep.hermiticity < 1e-10);
    }

    #[test]
    fn bound_state_defect() {
        let ker = KernelSpec::special_n(ScaleParams::from_rho_kappa(1.0, 2.4).unwrap(), 0).unwrap();
        let basis = Basis::Position(position_basis(6, 5));
        let q = QuadSettings::default();
        let rep = gram_defect(&ker, &basis, &q).unwrap();
        let pred = predict_defect(&ker, &basis).unwrap();
        assert_eq!(rep.numerical_rank, 1, "{:?}", rep.eigenvalues);
        assert!(rep.max_diff(&pred) < 5.0 * q.tol, "{}", rep.max_diff(&pred));
        let norm = ker.special().unwrap().bound_state().unwrap().norm;
        let phi = FactorFn::Bound { n: 0, rho: 1.0, kappa: 2.4 };
        let fit = fitted_projector_norm(&rep, &phi, &basis).unwrap();
        assert!((fit - norm).abs() < 1e-6 * norm, "{fit} {norm}");
    }
}
