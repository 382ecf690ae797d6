//! Time-dependent scattering for dynamics that a transform diagonalises:
//! multiplier evolutions, wave-operator defects, the S-matrix, parity and
//! time reversal.
//!
//! States are kept on the side where the evolution is diagonal: a
//! momentum-side bump function evolved by `e^{-itμ(k)}`, or a position-side
//! bump function evolved by `e^{-itd(r)}`. Position-side images are produced
//! by the forward transform on demand. On the orthogonal complement of the
//! range of a merely isometric transform the generator is taken to be zero,
//! so the evolution there is the identity and never enters any quantity
//! computed here.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::gl_nodes;
use crate::transforms::{is_isometric, is_unitary, Basis, KernelSpec, PositionFn, QuadSettings, TwoComponentFn};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DynamicsKind {
    /// Multiplication by an even `μ(k)` on the momentum side.
    MultiplierMu,
    /// Multiplication by an odd `d(r)` on the position side.
    MultiplierD,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case")]
pub enum Profile {
    /// `2cosh(s·x)`.
    TwoCosh { scale: f64 },
    /// `2sinh(s·x)`.
    TwoSinh { scale: f64 },
    /// `x²`.
    Square,
    /// `x`.
    Linear,
}

impl Profile {
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            Profile::TwoCosh { scale } => 2.0 * (scale * x).cosh(),
            Profile::TwoSinh { scale } => 2.0 * (scale * x).sinh(),
            Profile::Square => x * x,
            Profile::Linear => x,
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            Profile::TwoCosh { scale } => 2.0 * scale * (scale * x).sinh(),
            Profile::TwoSinh { scale } => 2.0 * scale * (scale * x).cosh(),
            Profile::Square => 2.0 * x,
            Profile::Linear => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsSpec {
    pub kind: DynamicsKind,
    pub profile: Profile,
}

impl DynamicsSpec {
    /// Checks the parity and monotonicity the kind requires on a sample grid.
    pub fn new(kind: DynamicsKind, profile: Profile) -> Result<Self> {
        if let Profile::TwoCosh { scale } | Profile::TwoSinh { scale } = profile {
            if !(scale > 0.0 && scale.is_finite()) {
                return Err(Error::InvalidParameter(format!("scale = {scale}")));
            }
        }
        let ok = (1..=64).all(|i| {
            let x = 0.125 * i as f64;
            let (f, g) = (profile.value(x), profile.value(-x));
            let tol = 1e-12 * f.abs().max(1.0);
            match kind {
                DynamicsKind::MultiplierMu => (f - g).abs() <= tol && profile.derivative(x) > 0.0,
                DynamicsKind::MultiplierD => {
                    (f + g).abs() <= tol && profile.derivative(x) > 0.0 && profile.derivative(-x) > 0.0
                }
            }
        });
        if !ok {
            return Err(Error::InvalidParameter(format!("{profile:?} does not fit {kind:?}")));
        }
        Ok(Self { kind, profile })
    }

    /// `μ(k) = 2cosh(ρk)`.
    pub fn mu_cm(rho: f64) -> Result<Self> {
        Self::new(DynamicsKind::MultiplierMu, Profile::TwoCosh { scale: rho })
    }

    /// `d(r) = 2sinh(κr)`.
    pub fn d_cm(kappa: f64) -> Result<Self> {
        Self::new(DynamicsKind::MultiplierD, Profile::TwoSinh { scale: kappa })
    }
}

/// `e^{-itμ(k)} f(k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentumState {
    pub base: TwoComponentFn,
    pub time: f64,
    pub profile: Profile,
}

impl MomentumState {
    pub fn eval(&self, k: f64) -> [C64; 2] {
        let ph = C64::from_polar(1.0, -self.time * self.profile.value(k));
        let [a, b] = self.base.eval(k);
        [a * ph, b * ph]
    }
}

/// `e^{-itd(r)} h(r)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionState {
    pub base: PositionFn,
    pub time: f64,
    pub profile: Profile,
}

impl PositionState {
    pub fn eval(&self, r: f64) -> C64 {
        self.base.eval(r) * C64::from_polar(1.0, -self.time * self.profile.value(r))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum State {
    Momentum(MomentumState),
    Position(PositionState),
}

impl State {
    /// The state at time zero for the given dynamics.
    pub fn initial(dynamics: &DynamicsSpec, basis_fn: &Basis, index: usize) -> Result<Self> {
        match (dynamics.kind, basis_fn) {
            (DynamicsKind::MultiplierMu, Basis::Momentum(fs)) => Ok(State::Momentum(MomentumState {
                base: fs.get(index).cloned().ok_or_else(|| Error::InvalidParameter("index".into()))?,
                time: 0.0,
                profile: dynamics.profile,
            })),
            (DynamicsKind::MultiplierD, Basis::Position(hs)) => Ok(State::Position(PositionState {
                base: hs.get(index).cloned().ok_or_else(|| Error::InvalidParameter("index".into()))?,
                time: 0.0,
                profile: dynamics.profile,
            })),
            _ => Err(Error::InvalidParameter("state and dynamics live on different sides".into())),
        }
    }

    pub fn time(&self) -> f64 {
        match self {
            State::Momentum(s) => s.time,
            State::Position(s) => s.time,
        }
    }
}

fn require(kernel: &KernelSpec, dynamics: &DynamicsSpec) -> Result<()> {
    let ok = match dynamics.kind {
        DynamicsKind::MultiplierMu => is_isometric(kernel),
        DynamicsKind::MultiplierD => is_unitary(kernel),
    };
    if ok {
        Ok(())
    } else {
        Err(Error::NonUnitaryKernel(format!("{:?} at rho*kappa = {}", kernel.kind, kernel.rho_kappa())))
    }
}

/// Advances a state by `t`: in the diagonal representation this is the
/// multiplier `e^{-itμ}` (resp. `e^{-itd}`), so `evolve(t1 + t2)` and
/// `evolve(t1)∘evolve(t2)` coincide.
pub fn evolve(kernel: &KernelSpec, dynamics: &DynamicsSpec, state: &State, t: f64) -> Result<State> {
    require(kernel, dynamics)?;
    match (dynamics.kind, state) {
        (DynamicsKind::MultiplierMu, State::Momentum(s)) if s.profile == dynamics.profile => {
            Ok(State::Momentum(MomentumState { time: s.time + t, ..s.clone() }))
        }
        (DynamicsKind::MultiplierD, State::Position(s)) if s.profile == dynamics.profile => {
            Ok(State::Position(PositionState { time: s.time + t, ..s.clone() }))
        }
        _ => Err(Error::InvalidParameter("state does not match the dynamics".into())),
    }
}

/// Which combination of transforms is applied to a state.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Channel {
    /// `ℱg` (resp. `ℱ*h`).
    Plain,
    /// `(ℱ0 - ℱ)g` (resp. `(ℱ0* - ℱ*U^{1/2})h`).
    Incoming,
    /// `(ℱ0 - ℱS*)g` (resp. `(ℱ0* - ℱ*U(-·)^{1/2})h`).
    Outgoing,
}

fn free_weight(ch: Channel) -> f64 {
    if ch == Channel::Plain {
        0.0
    } else {
        1.0
    }
}

fn momentum_support(s: &MomentumState) -> (Vec<f64>, f64, f64) {
    let bumps: Vec<_> = s.base.plus.iter().chain(&s.base.minus).collect();
    let breaks: Vec<f64> = bumps.iter().flat_map(|b| [b.support().0, b.support().1]).collect();
    let hmin = bumps.iter().map(|b| b.half_width).fold(f64::INFINITY, f64::min);
    let kmax = breaks.iter().cloned().fold(0.0, f64::max);
    (breaks, hmin, kmax)
}

fn grid(breaks: &[f64], hmax: f64) -> (Vec<f64>, Vec<f64>) {
    let mut b = breaks.to_vec();
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.dedup_by(|x, y| (*x - *y).abs() < 1e-14);
    let (mut xs, mut ws) = (Vec::new(), Vec::new());
    for w in b.windows(2) {
        let (x, wt) = gl_nodes(w[0], w[1], ((w[1] - w[0]) / hmax).ceil().max(1.0) as usize);
        xs.extend(x);
        ws.extend(wt);
    }
    (xs, ws)
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Squared norm of the position-side image of a momentum state, integrated
/// over growing annuli until the last one contributes below `tol/10`.
fn momentum_image_norm_sq(kernel: &KernelSpec, s: &MomentumState, ch: Channel, q: &QuadSettings) -> Result<f64> {
    let (breaks, hmin, kmax) = momentum_support(s);
    let speed = (0..=64)
        .map(|i| s.profile.derivative(kmax * i as f64 / 64.0).abs())
        .fold(0.0, f64::max)
        * s.time.abs();
    let free = free_weight(ch);
    let (mut lo, mut hi) = (0.0, q.start.max(speed + 16.0));
    let mut total = 0.0;
    loop {
        let hk = (6.0 / (hi + speed)).min(kernel.k_scale()).min(0.25 * hmin);
        let (ks, wk) = grid(&breaks, hk);
        let mut per_k = Vec::with_capacity(ks.len());
        for (&k, &w) in ks.iter().zip(&wk) {
            let g = s.eval(k);
            let (a, b) = if ch == Channel::Outgoing {
                (kernel.transmission(k)?.conj(), kernel.reflection(k)?.conj())
            } else {
                (C64::new(1.0, 0.0), C64::new(0.0, 0.0))
            };
            per_k.push((k, w * INV_SQRT_2PI, g, a, b, kernel.b_factors(k)?));
        }
        let hr = (6.0 / kmax).min(kernel.r_scale());
        let (rs, wr) = gl_nodes(lo, hi, ((hi - lo) / hr).ceil() as usize);
        let parts: Vec<f64> = rs
            .par_iter()
            .zip(wr.par_iter())
            .map(|(&r, &w)| -> Result<f64> {
                let ap = kernel.a_factors(r)?;
                let am = kernel.a_factors(-r)?;
                let (mut vp, mut vm) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
                for (k, wk, g, a, b, [bp, bm]) in &per_k {
                    let e = C64::from_polar(1.0, r * k);
                    let psi_p = dot(&ap, bp) * e + dot(&ap, bm) * e.conj();
                    let psi_m = dot(&am, bp) * e.conj() + dot(&am, bm) * e;
                    // kernel of ℱS*: Ψ(r)T̄ - Ψ(-r)R̄
                    let kp = free * e - (psi_p * a - psi_m * b);
                    let km = free * e.conj() - (psi_m * a - psi_p * b);
                    vp += (kp * g[0] - km * g[1]) * *wk;
                    vm += (km * g[0] - kp * g[1]) * *wk;
                }
                Ok(w * (vp.norm_sqr() + vm.norm_sqr()))
            })
            .collect::<Result<_>>()?;
        let ann: f64 = parts.iter().sum();
        total += ann;
        if lo > 0.0 && ann < 0.1 * q.tol {
            return Ok(total);
        }
        if 2.0 * hi > q.limit {
            return Err(Error::NonConvergence(format!("image tail {ann:e} at radius {hi}")));
        }
        lo = hi;
        hi *= 2.0;
    }
}

/// Squared norm of the momentum-side image of a position state.
fn position_image_norm_sq(kernel: &KernelSpec, s: &PositionState, ch: Channel, q: &QuadSettings) -> Result<f64> {
    let bumps = &s.base.bumps;
    let mut breaks: Vec<f64> = bumps.iter().flat_map(|b| [b.support().0.abs(), b.support().1.abs()]).collect();
    breaks.push(0.0);
    let rmax = breaks.iter().cloned().fold(0.0, f64::max);
    let hmin = bumps.iter().map(|b| b.half_width).fold(f64::INFINITY, f64::min);
    let speed = (0..=64)
        .map(|i| s.profile.derivative(rmax * i as f64 / 64.0).abs())
        .fold(0.0, f64::max)
        * s.time.abs();
    let free = free_weight(ch);
    let (mut lo, mut hi) = (0.0, q.start.max(speed + 16.0));
    let mut total = 0.0;
    loop {
        let hr = (6.0 / (hi + speed)).min(kernel.r_scale()).min(0.25 * hmin);
        let (rs, wr) = grid(&breaks, hr);
        let mut tab = Vec::with_capacity(rs.len());
        for (&r, &w) in rs.iter().zip(&wr) {
            let phase = |x: f64| match ch {
                Channel::Plain => Ok(C64::new(1.0, 0.0)),
                Channel::Incoming => kernel.u_half(x),
                Channel::Outgoing => kernel.u_half(-x),
            };
            let sc = w * INV_SQRT_2PI;
            tab.push((
                r,
                kernel.a_factors(r)?,
                kernel.a_factors(-r)?,
                s.eval(r) * sc,
                s.eval(-r) * sc,
                phase(r)?,
                phase(-r)?,
            ));
        }
        let hk = (6.0 / rmax).min(kernel.k_scale());
        let (ks, wk) = gl_nodes(lo, hi, ((hi - lo) / hk).ceil() as usize);
        let parts: Vec<f64> = ks
            .par_iter()
            .zip(wk.par_iter())
            .map(|(&k, &w)| -> Result<f64> {
                let [bp, bm] = kernel.b_factors(k)?;
                let (mut gp, mut gm) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
                for (r, ap, am, hp, hm, up, um) in &tab {
                    let e = C64::from_polar(1.0, r * k);
                    // conj Ψ(±r,k) weighted by the phase at the point where h is taken
                    let cp = (dot(ap, &bp) * e + dot(ap, &bm) * e.conj()).conj();
                    let cm = (dot(am, &bp) * e.conj() + dot(am, &bm) * e).conj();
                    // δ = +: h(r) with conj Ψ(r,k), h(-r) with conj Ψ(-r,k)
                    gp += (free * e.conj() - cp * up) * hp + (free * e - cm * um) * hm;
                    // δ = -: h(r) with conj Ψ(-r,k), h(-r) with conj Ψ(r,k)
                    gm -= (free * e - cm * up) * hp + (free * e.conj() - cp * um) * hm;
                }
                Ok(w * (gp.norm_sqr() + gm.norm_sqr()))
            })
            .collect::<Result<_>>()?;
        let ann: f64 = parts.iter().sum();
        total += ann;
        if lo > 0.0 && ann < 0.1 * q.tol {
            return Ok(total);
        }
        if 2.0 * hi > q.limit {
            return Err(Error::NonConvergence(format!("image tail {ann:e} at radius {hi}")));
        }
        lo = hi;
        hi *= 2.0;
    }
}

/// `‖f‖` of the state on its own side.
pub fn state_norm(state: &State) -> f64 {
    let mut acc = 0.0;
    let mut add = |b: &crate::transforms::Bump, f: &dyn Fn(f64) -> f64| {
        let (xs, ws) = gl_nodes(b.support().0, b.support().1, 64);
        acc += xs.iter().zip(&ws).map(|(&x, &w)| w * f(x)).sum::<f64>();
    };
    match state {
        State::Momentum(s) => {
            let f = |k: f64| s.base.eval(k).iter().map(|z| z.norm_sqr()).sum::<f64>();
            let mut bumps: Vec<_> = s.base.plus.iter().chain(&s.base.minus).copied().collect();
            bumps.sort_by(|a, b| a.center.partial_cmp(&b.center).unwrap());
            // bumps of one component may overlap; integrate over their union once
            let lo = bumps.iter().map(|b| b.support().0).fold(f64::INFINITY, f64::min);
            let hi = bumps.iter().map(|b| b.support().1).fold(0.0, f64::max);
            let hull = crate::transforms::Bump { center: 0.5 * (lo + hi), half_width: 0.5 * (hi - lo), amplitude: C64::new(1.0, 0.0) };
            add(&hull, &f);
        }
        State::Position(s) => {
            let f = |r: f64| s.base.eval(r).norm_sqr();
            let lo = s.base.bumps.iter().map(|b| b.support().0).fold(f64::INFINITY, f64::min);
            let hi = s.base.bumps.iter().map(|b| b.support().1).fold(f64::NEG_INFINITY, f64::max);
            let hull = crate::transforms::Bump { center: 0.5 * (lo + hi), half_width: 0.5 * (hi - lo), amplitude: C64::new(1.0, 0.0) };
            add(&hull, &f);
        }
    }
    acc.sqrt()
}

/// `‖ℱ state‖` (momentum states) or `‖ℱ* state‖` (position states).
pub fn image_norm(kernel: &KernelSpec, state: &State, q: &QuadSettings) -> Result<f64> {
    Ok(match state {
        State::Momentum(s) => momentum_image_norm_sq(kernel, s, Channel::Plain, q)?,
        State::Position(s) => position_image_norm_sq(kernel, s, Channel::Plain, q)?,
    }
    .sqrt())
}

/// Position-side values `(ℱ state)(r)` of a momentum state.
pub fn position_values(kernel: &KernelSpec, state: &MomentumState, rs: &[f64]) -> Result<Vec<C64>> {
    let (breaks, hmin, _) = momentum_support(state);
    rs.par_iter()
        .map(|&r| {
            let speed = state.time.abs()
                * breaks.iter().map(|&k| state.profile.derivative(k).abs()).fold(0.0, f64::max);
            let (ks, wk) = grid(&breaks, (3.0 / (r.abs() + speed + 1.0)).min(kernel.k_scale()).min(0.125 * hmin));
            let mut acc = C64::new(0.0, 0.0);
            for (&k, &w) in ks.iter().zip(&wk) {
                let g = state.eval(k);
                acc += w * (kernel.psi(r, k)? * g[0] - kernel.psi(-r, k)? * g[1]);
            }
            Ok(acc * INV_SQRT_2PI)
        })
        .collect()
}

/// `‖(𝒰(-t)𝒰0(t) - W_±)ψ‖` for the free state `ψ` built from `state`.
///
/// For `MultiplierMu` this is `‖(ℱ0 - ℱ)g‖` (`t < 0`) or `‖(ℱ0 - ℱS*)g‖`
/// (`t > 0`) with `g = e^{-itμ}f`, exact when `ℱ` is unitary and an upper
/// bound when it is only isometric. For `MultiplierD` it is
/// `‖(ℱ0* - ℱ*V)g‖` with `g = e^{-itd}h`, `V(r) = U(r)^{1/2}` for `t < 0` and
/// `V(r) = U(-r)^{1/2}` for `t > 0`; the latter differs from `U(r)^{-1/2}` by
/// a constant phase in general.
pub fn wave_operator_defect(
    kernel: &KernelSpec,
    dynamics: &DynamicsSpec,
    state: &State,
    t: f64,
    q: &QuadSettings,
) -> Result<f64> {
    let moved = evolve(kernel, dynamics, state, t)?;
    let ch = if t < 0.0 { Channel::Incoming } else { Channel::Outgoing };
    Ok(match &moved {
        State::Momentum(s) => momentum_image_norm_sq(kernel, s, ch, q)?,
        State::Position(s) => position_image_norm_sq(kernel, s, ch, q)?,
    }
    .sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LadderPoint {
    pub t: f64,
    pub defect: f64,
}

/// Wave-operator defects over a ladder of times, evaluated in parallel.
pub fn wave_operator_ladder(
    kernel: &KernelSpec,
    dynamics: &DynamicsSpec,
    state: &State,
    times: &[f64],
    q: &QuadSettings,
) -> Result<Vec<LadderPoint>> {
    times
        .par_iter()
        .map(|&t| Ok(LadderPoint { t, defect: wave_operator_defect(kernel, dynamics, state, t, q)? }))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SymmetryReport {
    /// `max |Ψ(r,k) - T(k)Ψ(-r,-k) + R(k)Ψ(r,-k)|`.
    pub time_reversal: f64,
    /// `max |Ψ^in - S Ψ^out|` over sampled `(r,k)`.
    pub in_out: f64,
    /// `max |S S* - 1|` over sampled `k`.
    pub s_unitarity: f64,
    /// `max ||U(r)| - 1|` over sampled `r`.
    pub phase_modulus: f64,
    /// `max |⟨ℱf_i, 𝒫ℱf_j⟩ - ⟨f_i, P̂f_j⟩|` with `P̂(g+, g-) = (-g-, -g+)`,
    /// when a basis is supplied.
    pub parity: Option<f64>,
}

fn sample_points() -> Vec<(f64, f64)> {
    let rs = [-3.7, -1.2, -0.35, 0.21, 0.8, 2.6];
    let ks = [0.15, 0.9, 1.7, 3.3];
    rs.iter().flat_map(|&r| ks.iter().map(move |&k| (r, k))).collect()
}

/// Pointwise identities of the kernel and, optionally, the parity relation
/// on a momentum basis.
pub fn symmetry_checks(kernel: &KernelSpec, parity_basis: Option<&[TwoComponentFn]>, q: &QuadSettings) -> Result<SymmetryReport> {
    let mut tr: f64 = 0.0;
    let mut io: f64 = 0.0;
    for (r, k) in sample_points() {
        let (t, rr) = (kernel.transmission(k)?, kernel.reflection(k)?);
        let psi = |r: f64, k: f64| kernel.psi(r, k);
        let scale = psi(r, k)?.norm().max(1.0);
        tr = tr.max((psi(r, k)? - t * psi(-r, -k)? + rr * psi(r, -k)?).norm() / scale);
        let phi = |r: f64| -> Result<C64> {
            Ok(t.conj() * psi(r, k)? - rr.conj() * psi(-r, k)?)
        };
        let inc = [psi(r, k)?, -psi(-r, k)?];
        let out = [phi(r)?, -phi(-r)?];
        let s = kernel.s_matrix(k)?;
        for i in 0..2 {
            let v = s[i][0] * out[0] + s[i][1] * out[1];
            io = io.max((inc[i] - v).norm() / scale);
        }
    }
    let mut su: f64 = 0.0;
    for k in [0.05, 0.4, 1.3, 2.9, 6.0, 11.0] {
        let s = kernel.s_matrix(k)?;
        for i in 0..2 {
            for j in 0..2 {
                let v: C64 = (0..2).map(|l| s[i][l] * s[j][l].conj()).sum();
                let id = if i == j { 1.0 } else { 0.0 };
                su = su.max((v - id).norm());
            }
        }
    }
    let mut pm: f64 = 0.0;
    for r in [-4.0, -1.1, 0.3, 0.9, 5.0] {
        pm = pm.max((kernel.u_half(r)?.norm_sqr() - 1.0).abs());
    }
    let parity = match parity_basis {
        Some(fs) => Some(crate::transforms::parity_defect(kernel, fs, q)?),
        None => None,
    };
    Ok(SymmetryReport { time_reversal: tr, in_out: io, s_unitarity: su, phase_modulus: pm, parity })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypgamma::ScaleParams;
    use crate::numerics::gl_interval;
    use crate::transforms::{momentum_basis, Bump};

    fn bump(c: f64, h: f64) -> Bump {
        Bump { center: c, half_width: h, amplitude: C64::new(1.0, 0.0) }
    }

    fn unitary_kernel() -> KernelSpec {
        KernelSpec::special_n(ScaleParams::from_rho_kappa(1.0, 4.0).unwrap(), 0).unwrap()
    }

    fn momentum_state(dy: &DynamicsSpec) -> State {
        let f = TwoComponentFn::new(vec![bump(1.0, 0.6)], vec![bump(1.2, 0.5)]).unwrap();
        State::Momentum(MomentumState { base: f, time: 0.0, profile: dy.profile })
    }

    #[test]
    fn certificates() {
        assert!(DynamicsSpec::new(DynamicsKind::MultiplierMu, Profile::Square).is_ok());
        assert!(DynamicsSpec::new(DynamicsKind::MultiplierMu, Profile::Linear).is_err());
        assert!(DynamicsSpec::new(DynamicsKind::MultiplierD, Profile::TwoCosh { scale: 1.0 }).is_err());
        assert!(DynamicsSpec::new(DynamicsKind::MultiplierD, Profile::Linear).is_ok());
        assert!(DynamicsSpec::mu_cm(-1.0).is_err());
    }

    #[test]
    fn evolution_is_a_group_and_conserves_norm() {
        let ker = unitary_kernel();
        let dy = DynamicsSpec::mu_cm(1.0).unwrap();
        let s = momentum_state(&dy);
        assert_eq!(evolve(&ker, &dy, &s, 0.0).unwrap(), s);
        let a = evolve(&ker, &dy, &evolve(&ker, &dy, &s, 1.5).unwrap(), 2.5).unwrap();
        let b = evolve(&ker, &dy, &s, 4.0).unwrap();
        if let (State::Momentum(a), State::Momentum(b)) = (&a, &b) {
            for k in [0.5, 1.0, 1.6] {
                let (x, y) = (a.eval(k), b.eval(k));
                assert!((x[0] - y[0]).norm() + (x[1] - y[1]).norm() < 1e-12);
            }
        }
        let q = QuadSettings::default();
        let n0 = state_norm(&s);
        for t in [1.0, 5.0, 25.0] {
            let e = evolve(&ker, &dy, &s, t).unwrap();
            assert!((image_norm(&ker, &e, &q).unwrap() - n0).abs() < 1e-8, "t = {t}");
        }
    }

    #[test]
    fn non_unitary_kernel_is_refused() {
        let ker = KernelSpec::special_n(ScaleParams::from_rho_kappa(1.0, 0.96).unwrap(), 0).unwrap();
        let dy = DynamicsSpec::mu_cm(1.0).unwrap();
        let s = momentum_state(&dy);
        assert!(matches!(evolve(&ker, &dy, &s, 1.0), Err(Error::NonUnitaryKernel(_))));
        let ker = KernelSpec::special_n(ScaleParams::from_rho_kappa(1.0, 2.5).unwrap(), 0).unwrap();
        let dd = DynamicsSpec::d_cm(2.5).unwrap();
        let h = State::Position(PositionState { base: PositionFn { bumps: vec![bump(0.0, 1.0)] }, time: 0.0, profile: dd.profile });
        assert!(matches!(evolve(&ker, &dd, &h, 1.0), Err(Error::NonUnitaryKernel(_))));
    }

    #[test]
    fn free_evolution_matches_direct_fourier_integral() {
        let ker = KernelSpec::fourier(1.0).unwrap();
        let dy = DynamicsSpec::mu_cm(1.0).unwrap();
        let s = evolve(&ker, &dy, &momentum_state(&dy), 3.0).unwrap();
        let State::Momentum(ms) = &s else { unreachable!() };
        let rs = [-6.0, -1.3, 0.0, 0.7, 4.2];
        let got = position_values(&ker, ms, &rs).unwrap();
        for (r, g) in rs.iter().zip(got) {
            let integrand = |k: f64| {
                let ph = C64::from_polar(1.0, -3.0 * 2.0 * k.cosh());
                let [a, b] = ms.base.eval(k);
                ph * (C64::from_polar(1.0, r * k) * a - C64::from_polar(1.0, -r * k) * b)
            };
            let direct = [(0.4, 0.7), (0.7, 1.6), (1.6, 1.7)]
                .iter()
                .map(|&(a, b)| gl_interval(integrand, a, b, 200))
                .sum::<C64>()
                * INV_SQRT_2PI;
            assert!((g - direct).norm() < 1e-12, "r = {r}: {g} vs {direct}");
        }
        let q = QuadSettings::default();
        assert!(wave_operator_defect(&ker, &dy, &momentum_state(&dy), -5.0, &q).unwrap() < 1e-12);
    }

    #[test]
    fn wave_operator_ladders() {
        let q = QuadSettings::default();
        let ker = unitary_kernel();
        let dy = DynamicsSpec::mu_cm(1.0).unwrap();
        let s = momentum_state(&dy);
        for sign in [-1.0, 1.0] {
            let lad = wave_operator_ladder(&ker, &dy, &s, &[5.0 * sign, 20.0 * sign, 80.0 * sign], &q).unwrap();
            assert!(lad.windows(2).all(|w| w[1].defect < w[0].defect), "{lad:?}");
            assert!(lad[2].defect < 1e-3);
        }
        let ker = KernelSpec::special_n(ScaleParams::from_rho_kappa(4.0, 1.0).unwrap(), 0).unwrap();
        let dd = DynamicsSpec::d_cm(1.0).unwrap();
        let h = State::Position(PositionState { base: PositionFn { bumps: vec![bump(0.3, 1.0)] }, time: 0.0, profile: dd.profile });
        let n = state_norm(&h);
        assert!((image_norm(&ker, &h, &q).unwrap() - n).abs() < 1e-8);
        for sign in [-1.0, 1.0] {
            let lad = wave_operator_ladder(&ker, &dd, &h, &[5.0 * sign, 20.0 * sign, 40.0 * sign], &q).unwrap();
            assert!(lad.windows(2).all(|w| w[1].defect < w[0].defect), "{lad:?}");
            assert!(lad[2].defect < 1e-3);
        }
    }

    #[test]
    fn symmetries() {
        let q = QuadSettings::default();
        let basis = momentum_basis(4, 3);
        let kernels = [
            unitary_kernel(),
            KernelSpec::special_n(ScaleParams::from_rho_kappa(1.0, 7.0).unwrap(), 1).unwrap(),
            KernelSpec::example_phi_e(1.0, 4.0, 1.0).unwrap(),
            KernelSpec::example_phi_e(1.0, 4.0, -1.0).unwrap(),
        ];
        for ker in &kernels {
            let rep = symmetry_checks(ker, None, &q).unwrap();
            assert!(rep.time_reversal < 1e-10, "{rep:?}");
            assert!(rep.in_out < 1e-10, "{rep:?}");
            assert!(rep.s_unitarity < 1e-12, "{rep:?}");
            assert!(rep.phase_modulus < 1e-12, "{rep:?}");
        }
        for ker in [KernelSpec::fourier(1.0).unwrap(), unitary_kernel()] {
            let rep = symmetry_checks(&ker, Some(&basis), &q).unwrap();
            assert!(rep.parity.unwrap() < 1e-9, "{rep:?}");
        }
    }
}
