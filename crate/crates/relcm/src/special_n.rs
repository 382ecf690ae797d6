//! Couplings `b = (N+1)a+`, where every ingredient of the attractive
//! eigenfunction is elementary: the coefficient matrix of the trigonometric
//! sum `Σ_N`, the entire kernel `K_N`, the weights `w_N` and `v_N`, the
//! amplitudes, and (for `a- ∈ ((N+1/2)a+, (N+1)a+)`) the bound state.
//!
//! Everything that can grow exponentially is carried as [`Scaled`].

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::hypgamma::ScaleParams;
use crate::numerics::{sinh_s, Scaled, I};

pub const MAX_N: usize = 12;

/// Coefficients `c_kl(q)`, `k,l = 0..=N`, of `Σ_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffMatrix {
    pub n: usize,
    pub q: C64,
    pub entries: Vec<Vec<C64>>,
}

impl CoeffMatrix {
    /// Solves for the coefficients from the mode expansion of the kernel's
    /// difference equation, with the first row fixed by the product
    /// `Π_{j=1}^N (Y q^j - Y^{-1} q^{-j})`.
    pub fn from_q(q: C64, n: usize) -> Result<Self> {
        if n > MAX_N {
            return Err(Error::UnsupportedN(n));
        }
        let m = n + 1;
        let modes = n + 2;
        let unknown = |k: usize, l: usize| k * m + l;
        // exponent N - 2k ± 1 maps to mode index k or k + 1
        let row = |ix: usize, iy: usize| ix * modes + iy;
        let anchor = product_modes(q, n);
        let mut a = DMatrix::<C64>::zeros(modes * modes + m, m * m);
        let mut rhs = nalgebra::DVector::<C64>::zeros(modes * modes + m);
        let one = C64::new(1.0, 0.0);
        let qp = |e: i64| q.powi(e as i32);
        let nn = n as i64;
        for k in 0..m {
            for l in 0..m {
                let col = unknown(k, l);
                let kk = k as i64;
                // (X q^N - X^{-1} q^{-N}) Y Σ(x - ia+, y)
                a[(row(k, l), col)] += qp(2 * kk);
                a[(row(k + 1, l), col)] -= qp(2 * kk - 2 * nn);
                // (X q^{-N} - X^{-1} q^N) Y^{-1} Σ(x + ia+, y)
                a[(row(k, l + 1), col)] += qp(-2 * kk);
                a[(row(k + 1, l + 1), col)] -= qp(2 * nn - 2 * kk);
                // -(X - X^{-1})(Y + Y^{-1}) Σ(x, y)
                a[(row(k, l), col)] -= one;
                a[(row(k, l + 1), col)] -= one;
                a[(row(k + 1, l), col)] += one;
                a[(row(k + 1, l + 1), col)] += one;
            }
        }
        for l in 0..m {
            a[(modes * modes + l, unknown(0, l))] = one;
            rhs[modes * modes + l] = anchor[l];
        }
        let svd = a.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if !(smin > 1e-10 * smax) {
            return Err(Error::DegenerateParameters(format!(
                "coefficient system rank deficient for q = {q}, N = {n} (σ_min/σ_max = {:e})",
                smin / smax
            )));
        }
        let sol = svd
            .solve(&rhs, 0.0)
            .map_err(|e| Error::DegenerateParameters(e.to_string()))?;
        let res = (&a * &sol - &rhs).norm();
        if !(res <= 1e-9 * rhs.norm().max(1.0)) {
            return Err(Error::DegenerateParameters(format!("coefficient residual {res:e}")));
        }
        let entries = (0..m).map(|k| (0..m).map(|l| sol[unknown(k, l)]).collect()).collect();
        Ok(Self { n, q, entries })
    }

    pub fn get(&self, k: usize, l: usize) -> C64 {
        self.entries[k][l]
    }
}

/// Coefficients of `Y^{N-2l}` in `Π_{j=1}^N (Y q^j - Y^{-1} q^{-j})`.
fn product_modes(q: C64, n: usize) -> Vec<C64> {
    let mut p = vec![C64::new(1.0, 0.0)];
    for j in 1..=n as i32 {
        let (up, down) = (q.powi(j), -q.powi(-j));
        let mut next = vec![C64::new(0.0, 0.0); p.len() + 1];
        for (l, &c) in p.iter().enumerate() {
            next[l] += c * up;
            next[l + 1] += c * down;
        }
        p = next;
    }
    p
}

pub fn compute_coeffs(params: &ScaleParams, n: usize) -> Result<CoeffMatrix> {
    CoeffMatrix::from_q(params.e_minus(I * params.a_plus), n)
}

/// `j a+ ∉ a- ℕ` for `j = 1..=2N`.
pub fn is_generic(params: &ScaleParams, n: usize) -> bool {
    (1..=2 * n).all(|j| {
        let t = j as f64 * params.a_plus / params.a_minus;
        (t - t.round()).abs() > 1e-9 || t.round() == 0.0
    })
}

/// `w_N(x)^{1/2}`, continued analytically off the real axis along vertical
/// lines (positive for real `x`).
pub fn sqrt_weight(params: &ScaleParams, n: usize, x: C64) -> Result<Scaled> {
    let x = if x.re < 0.0 { -x } else { x };
    let mut acc = C64::new(0.0, 0.0);
    for j in 0..=n {
        let eta = (j as f64 + 0.5) * params.a_plus;
        for s in [1.0, -1.0] {
            let w = (x + I * (s * eta)) * (PI / params.a_minus);
            let t = 1.0 - (-2.0 * w).exp();
            if t.norm() < 1e-14 {
                return Err(Error::NearPole(x));
            }
            // log(2 sinh w), continuous in Im w for Re w ≥ 0
            acc += w + t.ln();
        }
    }
    Ok(Scaled::exp(-0.5 * acc))
}

#[derive(Debug, Clone)]
pub struct SpecialNEvaluator {
    pub params: ScaleParams,
    pub n: usize,
    pub coeffs: CoeffMatrix,
    pub generic: bool,
}

/// `u_N`, `t_N`, `r_N` at one `y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplitudesN {
    pub u: C64,
    pub t: C64,
    pub r: C64,
}

/// The normalisable eigenfunction `ψ_N(x) = 2c+(x) w_N(x)^{1/2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundState {
    pub params: ScaleParams,
    pub n: usize,
    /// `∫ Ψ_N(r)² dr` in the dimensionless variable `r`.
    pub norm: f64,
    pub energy: f64,
}

impl BoundState {
    pub fn eval(&self, x: C64) -> Result<C64> {
        let w = sqrt_weight(&self.params, self.n, x)?;
        Ok(w.mul(Scaled::from(2.0 * self.params.c_plus(x))).value())
    }

    /// `Ψ_N(r) = 2cosh(κr) w_N(a- r/ρ)^{1/2}`.
    pub fn eval_r(&self, r: f64) -> Result<f64> {
        Ok(self.eval(self.params.x_of_r(C64::new(r, 0.0)))?.re)
    }
}

impl SpecialNEvaluator {
    pub fn new(params: ScaleParams, n: usize) -> Result<Self> {
        let coeffs = compute_coeffs(&params, n)?;
        Ok(Self { generic: is_generic(&params, n), params, n, coeffs })
    }

    pub fn b(&self) -> f64 {
        (self.n + 1) as f64 * self.params.a_plus
    }

    fn es(&self, z: C64) -> Scaled {
        Scaled::exp(z * (PI / self.params.a_minus))
    }

    fn ss(&self, z: C64) -> Scaled {
        sinh_s(z * (PI / self.params.a_minus))
    }

    fn pw(&self, x: C64, y: C64) -> Scaled {
        Scaled::exp(I * PI * x * y / (self.params.a_plus * self.params.a_minus))
    }

    fn nf(&self) -> f64 {
        self.n as f64
    }

    pub fn sigma_scaled(&self, x: C64, y: C64) -> Scaled {
        let n = self.n;
        let mut acc = Scaled::ZERO;
        for k in 0..=n {
            for l in 0..=n {
                let e = x * (n as f64 - 2.0 * k as f64) + y * (n as f64 - 2.0 * l as f64);
                acc = acc.add(self.es(e).scale(self.coeffs.get(k, l)));
            }
        }
        acc
    }

    pub fn sigma_n(&self, x: C64, y: C64) -> C64 {
        self.sigma_scaled(x, y).value()
    }

    pub fn k_n(&self, x: C64, y: C64) -> C64 {
        self.pw(x, y).mul(self.sigma_scaled(x, y)).value()
    }

    pub fn w_n(&self, x: C64) -> Result<C64> {
        Ok(sqrt_weight(&self.params, self.n, x)?.powi(2).value())
    }

    /// `v_N(y)` in overflow-safe form.
    pub fn v_scaled(&self, y: C64) -> Result<Scaled> {
        let mut d = Scaled::ONE;
        for j in 1..=self.n + 1 {
            d = d.mul(self.ss(y - I * (j as f64 * self.params.a_plus)).scale(2.0 * I));
        }
        if d.m.norm() == 0.0 || d.log_abs() < -700.0 {
            return Err(Error::NearPole(y));
        }
        Ok(Scaled::ONE.div(d))
    }

    pub fn v_n(&self, y: C64) -> Result<C64> {
        Ok(self.v_scaled(y)?.value())
    }

    fn ell_scaled(&self, tau: f64, x: C64, y: C64) -> Scaled {
        let ap = self.params.a_plus;
        let nf = self.nf();
        let pre = (-1.0f64).powi(self.n as i32) * I.powi(self.n as i32 + 1) * tau;
        let mut acc = Scaled::ZERO;
        for d in [1.0, -1.0] {
            let term = self
                .ss(x - I * (d * (nf + 0.5) * ap))
                .mul(self.es(d * (I * ((nf + 1.0) * ap) - y) * 0.5 - d * tau * y * 0.5))
                .mul(self.sigma_scaled(x + I * (0.5 * d * ap), tau * y))
                .scale(C64::new(2.0 * d, 0.0));
            acc = acc.add(term);
        }
        acc.scale(pre)
    }

    /// Entire coefficient `ℓ_N^τ(x,y)` of `e^{iτπxy/a+a-}`.
    pub fn ell(&self, tau: f64, x: C64, y: C64) -> C64 {
        self.ell_scaled(tau, x, y).value()
    }

    /// `λ_N^τ(x,y) = e^{iτπxy/a+a-} ℓ_N^τ(x,y)`.
    pub fn lambda(&self, tau: f64, x: C64, y: C64) -> C64 {
        self.pw(x, tau * y).mul(self.ell_scaled(tau, x, y)).value()
    }

    /// `ψ_N(x,y) / w_N(x)^{1/2}`.
    pub fn psi_reduced_scaled(&self, x: C64, y: C64) -> Result<Scaled> {
        let v = self.v_scaled(y)?;
        let mut acc = Scaled::ZERO;
        for tau in [1.0, -1.0] {
            acc = acc.add(self.pw(x, tau * y).mul(self.ell_scaled(tau, x, y)));
        }
        Ok(v.mul(acc))
    }

    pub fn psi_scaled(&self, x: C64, y: C64) -> Result<Scaled> {
        Ok(sqrt_weight(&self.params, self.n, x)?.mul(self.psi_reduced_scaled(x, y)?))
    }

    pub fn psi_n(&self, x: C64, y: C64) -> Result<C64> {
        crate::error::finite(self.psi_scaled(x, y)?.value(), "special eigenfunction")
    }

    /// Dimensionless kernel `Ψ(r,k) = ψ_N(x(r), y(k))`.
    pub fn kernel(&self, r: f64, k: f64) -> Result<C64> {
        let p = &self.params;
        self.psi_n(p.x_of_r(C64::new(r, 0.0)), p.y_of_k(C64::new(k, 0.0)))
    }

    pub fn amplitudes_n(&self, y: C64) -> Result<AmplitudesN> {
        let p = &self.params;
        let mut u = C64::new(1.0, 0.0);
        for j in 1..=self.n {
            let ja = I * (j as f64 * p.a_plus);
            let den = p.s_minus(ja - y);
            if den.norm() < 1e-12 {
                return Err(Error::DivisionNearZero(y));
            }
            u *= p.s_minus(ja + y) / den;
        }
        let ib = I * self.b();
        let den = p.s_minus(ib - y);
        if den.norm() < 1e-12 {
            return Err(Error::DivisionNearZero(y));
        }
        Ok(AmplitudesN { u, t: p.s_minus(y) * u / den, r: p.s_minus(ib) * u / den })
    }

    /// `(C_N(x), U_N(x))`, the large-`|Re y|` constants.
    pub fn asym_constants(&self, x: C64) -> Result<(C64, C64)> {
        let p = &self.params;
        let nf = self.nf();
        let mut cn = Scaled::from(
            (-1.0f64).powi(self.n as i32 + 1) * p.e_minus(I * ((nf + 1.0).powi(2) * p.a_plus * 0.5)),
        );
        let mut un = Scaled::from(p.e_minus(I * ((nf + 1.0).powi(2) * p.a_plus)));
        for j in 0..=self.n {
            let eta = I * ((j as f64 + 0.5) * p.a_plus);
            let sp = self.ss(x + eta);
            let sm = self.ss(x - eta);
            if sm.m.norm() == 0.0 || sm.log_abs() < -30.0 {
                return Err(Error::NearPole(x));
            }
            cn = cn.mul(sp.scale(C64::new(2.0, 0.0)));
            un = un.mul(sp.div(sm));
        }
        Ok((cn.value(), un.value()))
    }

    /// `p_N = Π_{j=N+1}^{2N+1} 2 s-(i j a+)`.
    pub fn p_n(&self) -> C64 {
        (self.n + 1..=2 * self.n + 1)
            .map(|j| 2.0 * self.params.s_minus(I * (j as f64 * self.params.a_plus)))
            .product()
    }

    pub fn bound_state(&self) -> Result<BoundState> {
        let p = self.params;
        let nf = self.nf();
        if !(p.a_minus > (nf + 0.5) * p.a_plus && p.a_minus < (nf + 1.0) * p.a_plus) {
            return Err(Error::OutOfWindow(format!(
                "a- = {} outside ({}, {})",
                p.a_minus,
                (nf + 0.5) * p.a_plus,
                (nf + 1.0) * p.a_plus
            )));
        }
        let th = PI * PI / p.rho_kappa();
        let sines = |lo: usize, hi: usize| (lo..=hi).map(|j| (j as f64 * th).sin()).product::<f64>();
        let norm = (-1.0f64).powi(self.n as i32 + 1) * PI * sines(1, self.n)
            / (p.kappa() * sines(self.n + 1, 2 * self.n + 1));
        let energy = 2.0 * (-1.0f64).powi(self.n as i32 + 1) * (PI * p.a_minus / p.a_plus).cos();
        Ok(BoundState { params: p, n: self.n, norm, energy })
    }

    /// Residue factor `ρ_N` with `Res_{y = i(N+1)a+ - ia-} ψ_N(x,y) = ρ_N ψ_N(x)`.
    pub fn bound_state_residue(&self) -> C64 {
        let p = &self.params;
        let s = |j: usize| (PI * j as f64 * p.a_plus / p.a_minus).sin();
        let num: f64 = (self.n + 1..=2 * self.n + 1).map(s).product();
        let den: f64 = (1..=self.n).map(s).product();
        (-1.0f64).powi(self.n as i32 + 1) * I * p.a_minus * num / (PI * den)
    }
}

/// `ψ((N+1)a-; x, y)`: the reflectionless eigenfunctions, whose plane-wave
/// coefficient is `ia+`-periodic in both variables.
pub fn psi_reflectionless(params: &ScaleParams, n: usize, x: C64, y: C64) -> Result<C64> {
    let p = params;
    let coeffs = CoeffMatrix::from_q(p.e_plus(I * p.a_minus), n)?;
    let mut num = C64::new(0.0, 0.0);
    for k in 0..=n {
        for l in 0..=n {
            let sgn = if k % 2 == 0 { 1.0 } else { -1.0 };
            let e = x * (n as f64 - 2.0 * k as f64) + y * (n as f64 - 2.0 * l as f64);
            num += sgn * coeffs.get(k, l) * p.e_plus(e);
        }
    }
    let mut den = C64::new(1.0, 0.0);
    let mut cc = C64::new(1.0, 0.0);
    for j in 1..=n {
        let ja = I * (j as f64 * p.a_minus);
        den *= 2.0 * p.s_plus(y - ja);
        cc *= 4.0 * p.c_plus(x - ja) * p.c_plus(x + ja);
    }
    let den = den * cc.sqrt();
    if den.norm() < 1e-300 {
        return Err(Error::NearPole(y));
    }
    crate::error::finite(p.plane_wave(x, y) * num / den, "reflectionless eigenfunction")
}
