//! Verification suites: each runs one family of identities or Hilbert-space
//! statements at fixed tolerances and reports the measured residuals.
//!
//! Reports carry no timings, so identical inputs give identical reports.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::attractive::AttractiveEvaluator;
use crate::error::{Error, Result};
use crate::hypgamma::{HypGammaEvaluator, ScaleParams};
use crate::numerics::{c, gl_interval, rel_diff};
use crate::repulsive::{apply_ado, AdoKind, AdoSpec, RepulsiveEvaluator};
use crate::scattering::{
    evolve, image_norm, state_norm, symmetry_checks, wave_operator_ladder, DynamicsSpec, LadderPoint, MomentumState,
    PositionState, State,
};
use crate::special_n::{compute_coeffs, SpecialNEvaluator};
use crate::transforms::{
    fitted_projector_norm, gram_defect, momentum_basis, position_basis, predict_defect, Basis, Bump, FactorFn,
    KernelSpec, PositionFn, QuadSettings, Side, TwoComponentFn,
};

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// How `value` is compared with `tol`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    /// `value < tol`.
    Below,
    /// `value == tol` (counts).
    Equal,
    /// `value` is 1 when the statement holds.
    Holds,
}

/// One measured quantity and its acceptance threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub kind: CheckKind,
    pub value: f64,
    pub tol: f64,
    pub pass: bool,
}

impl Check {
    /// Passes when `value < tol`.
    pub fn below(name: impl Into<String>, value: f64, tol: f64) -> Self {
        Self { name: name.into(), kind: CheckKind::Below, value, tol, pass: value < tol }
    }

    /// Passes when the integer quantities agree.
    pub fn equal(name: impl Into<String>, value: usize, expected: usize) -> Self {
        Self { name: name.into(), kind: CheckKind::Equal, value: value as f64, tol: expected as f64, pass: value == expected }
    }

    /// Passes when `flag` holds; `value` is 1 or 0.
    pub fn holds(name: impl Into<String>, flag: bool) -> Self {
        Self { name: name.into(), kind: CheckKind::Holds, value: if flag { 1.0 } else { 0.0 }, tol: 1.0, pass: flag }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl SuiteReport {
    fn new(suite: &str, checks: Vec<Check>) -> Self {
        let pass = !checks.is_empty() && checks.iter().all(|c| c.pass);
        Self { suite: suite.to_string(), checks, pass }
    }

    /// Concatenates reports under one name.
    pub fn merge(suite: &str, parts: Vec<SuiteReport>) -> Self {
        Self::new(suite, parts.into_iter().flat_map(|r| r.checks).collect())
    }

    /// Largest `value/tol` over the threshold checks.
    pub fn worst_ratio(&self) -> f64 {
        self.checks.iter().filter(|c| c.kind == CheckKind::Below).map(|c| c.value / c.tol).fold(0.0, f64::max)
    }
}

/// Worst value of a residual, with any evaluation error recorded as infinity.
fn worst(values: impl IntoIterator<Item = Result<f64>>) -> f64 {
    values.into_iter().map(|v| v.unwrap_or(f64::INFINITY)).fold(0.0, f64::max)
}

fn max_check(name: &str, values: impl IntoIterator<Item = Result<f64>>, tol: f64) -> Check {
    Check::below(name, worst(values), tol)
}

/// Failure of a whole step, recorded as a failing check.
fn failed(name: &str, e: &Error) -> Check {
    Check { name: format!("{name}: {e}"), kind: CheckKind::Below, value: f64::INFINITY, tol: 0.0, pass: false }
}

/// A random point of the strip `|Im z| < a`, away from its edges.
fn strip_point(rng: &mut ChaCha8Rng, a: f64) -> C64 {
    c(rng.gen_range(-4.0..4.0), rng.gen_range(-0.9..0.9) * a)
}

/// Difference equations, reflection, modular invariance and conjugation of
/// `G` at 200 random strip points with random scales.
pub fn gamma_laws(seed: u64) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut ade, mut refl, mut modular, mut conj) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for _ in 0..200 {
        let (ap, am) = (rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0));
        let Ok(p) = ScaleParams::new(ap, am) else { continue };
        let g = HypGammaEvaluator::new(p);
        let gs = HypGammaEvaluator::new(p.swapped());
        let z = strip_point(&mut rng, p.a());
        ade.push((|| {
            let l1 = g.eval(z + I * (ap / 2.0))? / g.eval(z - I * (ap / 2.0))?;
            let l2 = g.eval(z + I * (am / 2.0))? / g.eval(z - I * (am / 2.0))?;
            Ok(rel_diff(l1, 2.0 * p.c_minus(z), 0.0).max(rel_diff(l2, 2.0 * p.c_plus(z), 0.0)))
        })());
        refl.push((|| Ok((g.eval(-z)? * g.eval(z)? - 1.0).norm()))());
        modular.push((|| Ok(rel_diff(gs.eval(z)?, g.eval(z)?, 0.0)))());
        conj.push((|| Ok(rel_diff(g.eval(z)?.conj(), g.eval(-z.conj())?, 0.0)))());
    }
    SuiteReport::new(
        "gamma-laws",
        vec![
            max_check("difference equations", ade, 1e-10),
            max_check("reflection", refl, 1e-10),
            max_check("modular invariance", modular, 1e-10),
            max_check("conjugation", conj, 1e-10),
        ],
    )
}

/// Conical function: integral against the closed form at `b = a+` (50
/// points) and its difference equation at generic couplings.
pub fn conical(seed: u64) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut closed = Vec::new();
    for _ in 0..50 {
        let (ap, am) = (rng.gen_range(0.6..1.8), rng.gen_range(0.6..1.8));
        let (x, y) = (c(rng.gen_range(-2.0..2.0), 0.0), c(rng.gen_range(-2.0..2.0), 0.0));
        closed.push((|| {
            let p = ScaleParams::new(ap, am)?;
            let e = RepulsiveEvaluator::new(p, ap)?;
            let expect = (PI * x * y / (ap * am)).sin() / (2.0 * p.s_minus(x) * p.s_minus(y));
            Ok(rel_diff(e.r_ren(x, y)?, expect, 0.0))
        })());
    }
    let mut ade = Vec::new();
    for _ in 0..20 {
        let (ap, am) = (rng.gen_range(0.6..1.8), rng.gen_range(0.6..1.8));
        let b = rng.gen_range(0.1..0.95) * (ap + am);
        let (x, y) = (c(rng.gen_range(-1.5..1.5), 0.0), c(rng.gen_range(-1.5..1.5), 0.0));
        ade.push((|| {
            let p = ScaleParams::new(ap, am)?;
            let e = RepulsiveEvaluator::new(p, b)?;
            let ado = AdoSpec { kind: AdoKind::A, params: p, b };
            let lhs = apply_ado(&ado, |z| e.r_ren(z, y), x)?;
            Ok(rel_diff(lhs, 2.0 * p.c_plus(y) * e.r_ren(x, y)?, 0.0))
        })());
    }
    SuiteReport::new(
        "conical",
        vec![max_check("integral vs closed form at b = a+", closed, 1e-8), max_check("difference equation", ade, 1e-9)],
    )
}

/// Coefficients of the kernel polynomial: the low-order closed form, the
/// conical function at `N = 2`, symmetries, row sums and special values.
pub fn coefficients() -> SuiteReport {
    let mut checks = Vec::new();
    match ScaleParams::new(1.0, 1.7).and_then(|p| compute_coeffs(&p, 1).map(|cm| (p, cm))) {
        Ok((p, cm)) => {
            let q = p.e_minus(I * p.a_plus);
            let d = [(0, 0, q), (1, 1, q), (0, 1, -1.0 / q), (1, 0, -1.0 / q)]
                .iter()
                .map(|&(k, l, v)| (cm.get(k, l) - v).norm())
                .fold(0.0, f64::max);
            checks.push(Check::below("N = 1 closed form", d, 1e-13));
        }
        Err(e) => checks.push(failed("N = 1 closed form", &e)),
    }
    // the integral representation converges for b = 3a+ < a+ + a-
    let conical = (|| -> Result<Vec<Result<f64>>> {
        let e = SpecialNEvaluator::new(ScaleParams::new(1.0, 2.0 * 2f64.sqrt())?, 2)?;
        let p = e.params;
        let rep = RepulsiveEvaluator::new(p, 3.0)?;
        Ok([(0.3, 0.7), (-0.8, 0.45), (1.2, -0.35), (0.55, 1.3), (-0.2, -0.9)]
            .iter()
            .map(|&(x, y)| {
                let (x, y) = (c(x, 0.0), c(y, 0.0));
                let den: C64 = (-2..=2)
                    .map(|j| {
                        let ja = I * (j as f64 * p.a_plus);
                        4.0 * p.s_minus(x + ja) * p.s_minus(y + ja)
                    })
                    .product();
                let rn = (-I).powi(3) * (e.k_n(x, y) - e.k_n(x, -y)) / den;
                Ok(rel_diff(rn, rep.r_ren(x, y)?, 0.0))
            })
            .collect())
    })();
    checks.push(match conical {
        Ok(v) => max_check("N = 2 against the conical function", v, 1e-8),
        Err(e) => failed("N = 2 against the conical function", &e),
    });
    let mut sym = Vec::new();
    let mut rows = Vec::new();
    let mut special = Vec::new();
    for n in 1..=4 {
        let Ok(e) = ScaleParams::new(1.0, 2f64.sqrt()).and_then(|p| SpecialNEvaluator::new(p, n)) else {
            sym.push(Err(Error::UnsupportedN(n)));
            continue;
        };
        let (cm, p) = (&e.coeffs, e.params);
        let sgn = if n % 2 == 0 { 1.0 } else { -1.0 };
        for k in 0..=n {
            for l in 0..=n {
                let v = cm.get(k, l);
                let d = (v - cm.get(l, k))
                    .norm()
                    .max((v - cm.get(n - k, n - l)).norm())
                    .max((v - sgn * cm.get(k, n - l).conj()).norm());
                sym.push(Ok(d));
            }
        }
        for y in [c(0.37, 0.2), c(-0.8, 0.05)] {
            let row = |k: usize| -> C64 { (0..=n).map(|l| cm.get(k, l) * p.e_minus(y * (n as f64 - 2.0 * l as f64))).sum() };
            let plus: C64 = (1..=n).map(|j| 2.0 * p.s_minus(y + I * j as f64)).product();
            let minus: C64 = sgn * (1..=n).map(|j| 2.0 * p.s_minus(y - I * j as f64)).product::<C64>();
            rows.push(Ok(rel_diff(row(0), plus, 0.0).max(rel_diff(row(n), minus, 0.0))));
        }
        // rounding in the coefficients is amplified by exp(2πN|Re z|/a-)
        if n > 3 {
            continue;
        }
        let nf = n as f64;
        let expect: C64 = (n + 1..=2 * n).map(|j| 2.0 * p.s_minus(I * j as f64)).product();
        for z in [c(0.3, 0.0), c(-0.6, 0.4)] {
            for v in [e.k_n(z, I * nf), e.k_n(z, -I * nf), e.k_n(I * nf, z), e.k_n(-I * nf, z)] {
                special.push(Ok(rel_diff(v, expect, 0.0)));
            }
        }
    }
    checks.push(max_check("coefficient symmetries", sym, 1e-10));
    checks.push(max_check("first and last row sums", rows, 1e-10));
    checks.push(max_check("special values", special, 1e-10));
    SuiteReport::new("coefficients", checks)
}

/// Both difference equations of the attractive eigenfunction at 50 random
/// `(b, x, y)`, and agreement of the special-coupling form with it.
pub fn eigenfunctions(seed: u64) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut h, mut s) = (Vec::new(), Vec::new());
    for _ in 0..50 {
        let (ap, am) = (rng.gen_range(0.7..1.5), rng.gen_range(0.7..1.5));
        let b = rng.gen_range(0.1 * ap..am + 0.35 * ap);
        let (x, y) = (c(rng.gen_range(-1.5..1.5), 0.0), c(rng.gen_range(-1.5..1.5), 0.0));
        let Ok(e) = ScaleParams::new(ap, am).and_then(|p| AttractiveEvaluator::new(p, b)) else {
            h.push(Err(Error::OutOfWindow(format!("b = {b}"))));
            continue;
        };
        let p = *e.params();
        h.push((|| {
            let ado = AdoSpec { kind: AdoKind::ATilde, params: p, b };
            let lhs = apply_ado(&ado, |z| e.psi_reduced(z, y), x)?;
            Ok(rel_diff(lhs, 2.0 * p.c_plus(y) * e.psi_reduced(x, y)?, 0.0))
        })());
        s.push((|| {
            let ado = AdoSpec { kind: AdoKind::SCal, params: p, b };
            let lhs = apply_ado(&ado, |z| e.psi_general(x, z), y)?;
            Ok(rel_diff(lhs, 2.0 * p.s_plus(x) * e.psi_general(x, y)?, 0.0))
        })());
    }
    let mut agree = Vec::new();
    for (n, ap, am) in [(0usize, 1.0, 1.3), (1, 1.0, 1.7), (2, 0.7, 1.9)] {
        for (x, y) in [(0.35, 0.6), (-0.9, 0.25), (1.4, -0.8)] {
            agree.push((|| {
                let e = SpecialNEvaluator::new(ScaleParams::new(ap, am)?, n)?;
                let att = AttractiveEvaluator::new(e.params, e.b())?;
                let (x, y) = (c(x, 0.0), c(y, 0.0));
                Ok(rel_diff(e.psi_n(x, y)?, att.psi_general(x, y)?, 0.0))
            })());
        }
    }
    SuiteReport::new(
        "eigenfunctions",
        vec![
            max_check("position difference equation", h, 1e-9),
            max_check("spectral difference equation", s, 1e-9),
            max_check("special coupling N = 0, 1, 2", agree, 1e-10),
        ],
    )
}

/// Both Yang-Baxter relations at 100 random draws.
pub fn yang_baxter(seed: u64) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut r1, mut r2) = (Vec::new(), Vec::new());
    for _ in 0..100 {
        let (ap, am) = (rng.gen_range(0.6..1.8), rng.gen_range(0.6..1.8));
        let b = rng.gen_range(0.1 * ap..am + 0.35 * ap);
        let ys: Vec<C64> = (0..3).map(|_| c(rng.gen_range(-2.0..2.0), 0.0)).collect();
        match ScaleParams::new(ap, am)
            .and_then(|p| AttractiveEvaluator::new(p, b))
            .and_then(|e| e.yang_baxter_residual(ys[0], ys[1], ys[2]))
        {
            Ok((a, b)) => {
                r1.push(Ok(a.norm()));
                r2.push(Ok(b.norm()));
            }
            Err(e) => r1.push(Err(e)),
        }
    }
    SuiteReport::new(
        "yang-baxter",
        vec![max_check("first relation", r1, 1e-12), max_check("second relation", r2, 1e-12)],
    )
}

/// One parameter point of the special kernel family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelPoint {
    pub n: usize,
    pub rho_kappa: f64,
}

fn special_kernel(pt: KernelPoint) -> Result<KernelSpec> {
    KernelSpec::special_n(ScaleParams::from_rho_kappa(1.0, pt.rho_kappa)?, pt.n)
}

fn gram_check(name: &str, kernel: Result<KernelSpec>, basis: &Basis, q: &QuadSettings, tol: f64) -> Check {
    match kernel.and_then(|k| gram_defect(&k, basis, q)) {
        Ok(rep) => Check::below(name, rep.max_abs(), tol),
        Err(e) => failed(name, &e),
    }
}

/// Default parameter points for the forward-isometry suite.
pub const ISOMETRY_POINTS: [KernelPoint; 6] = [
    KernelPoint { n: 0, rho_kappa: 2.0 },
    KernelPoint { n: 0, rho_kappa: 3.5 },
    KernelPoint { n: 0, rho_kappa: 6.0 },
    KernelPoint { n: 1, rho_kappa: 5.0 },
    KernelPoint { n: 1, rho_kappa: 6.5 },
    KernelPoint { n: 1, rho_kappa: 8.0 },
];

/// Default parameter points for the unitarity suite.
pub const UNITARY_POINTS: [KernelPoint; 6] = [
    KernelPoint { n: 0, rho_kappa: 3.5 },
    KernelPoint { n: 0, rho_kappa: 4.5 },
    KernelPoint { n: 0, rho_kappa: 6.0 },
    KernelPoint { n: 1, rho_kappa: 6.5 },
    KernelPoint { n: 1, rho_kappa: 7.0 },
    KernelPoint { n: 1, rho_kappa: 9.0 },
];

/// Default parameter points for the bound-state suite.
pub const BOUND_POINTS: [KernelPoint; 2] =
    [KernelPoint { n: 0, rho_kappa: 2.36 }, KernelPoint { n: 1, rho_kappa: 5.5 }];

/// Default parameter points for the breakdown suite.
pub const BREAKDOWN_POINTS: [KernelPoint; 3] = [
    KernelPoint { n: 0, rho_kappa: 0.96 },
    KernelPoint { n: 0, rho_kappa: 1.4 },
    KernelPoint { n: 0, rho_kappa: 0.75 },
];

/// Forward Gram defect of a six-bump momentum basis.
pub fn isometry(points: &[KernelPoint], seed: u64, q: &QuadSettings) -> SuiteReport {
    let basis = Basis::Momentum(momentum_basis(6, seed));
    let checks = points
        .iter()
        .map(|&pt| {
            let name = format!("forward defect N = {} rho*kappa = {}", pt.n, pt.rho_kappa);
            if pt.rho_kappa <= (pt.n as f64 + 0.5) * PI {
                return failed(&name, &Error::OutOfWindow("below the isometry window".into()));
            }
            gram_check(&name, special_kernel(pt), &basis, q, 1e-6)
        })
        .collect();
    SuiteReport::new("isometry", checks)
}

/// Adjoint Gram defect of a six-bump position basis.
pub fn unitarity(points: &[KernelPoint], seed: u64, q: &QuadSettings) -> SuiteReport {
    let basis = Basis::Position(position_basis(6, seed));
    let checks = points
        .iter()
        .map(|&pt| {
            let name = format!("adjoint defect N = {} rho*kappa = {}", pt.n, pt.rho_kappa);
            if pt.rho_kappa < (pt.n as f64 + 1.0) * PI {
                return failed(&name, &Error::OutOfWindow("below the unitarity window".into()));
            }
            gram_check(&name, special_kernel(pt), &basis, q, 1e-6)
        })
        .collect();
    SuiteReport::new("unitarity", checks)
}

/// `(-1)^{N+1} π Π_{1}^{N} sin(jπ²/ρκ) / (κ Π_{N+1}^{2N+1} sin(jπ²/ρκ))`.
pub fn bound_state_norm(n: usize, rho: f64, kappa: f64) -> f64 {
    let s = |j: usize| (j as f64 * PI * PI / (rho * kappa)).sin();
    let num: f64 = (1..=n).map(s).product();
    let den: f64 = (n + 1..=2 * n + 1).map(s).product();
    (-1.0f64).powi(n as i32 + 1) * PI * num / (kappa * den)
}

/// Rank-one adjoint defect, its fitted norm, the quadrature norm of the
/// bound state and its eigenvalue equation.
pub fn bound_state(points: &[KernelPoint], seed: u64, q: &QuadSettings) -> SuiteReport {
    let basis = Basis::Position(position_basis(6, seed));
    let mut checks = Vec::new();
    for &pt in points {
        let tag = format!("N = {} rho*kappa = {}", pt.n, pt.rho_kappa);
        let kappa = pt.rho_kappa;
        let expect = bound_state_norm(pt.n, 1.0, kappa);
        let run = (|| -> Result<Vec<Check>> {
            let ker = special_kernel(pt)?;
            let rep = gram_defect(&ker, &basis, q)?;
            let phi = FactorFn::Bound { n: pt.n, rho: 1.0, kappa };
            let fit = fitted_projector_norm(&rep, &phi, &basis)?;
            let bs = ker.special().ok_or_else(|| Error::InvalidParameter("no evaluator".into()))?.bound_state()?;
            let quad = [(-60.0, -20.0, 200), (-20.0, 20.0, 800), (20.0, 60.0, 200)]
                .iter()
                .map(|&(a, b, m)| gl_interval(|r| c(bs.eval_r(r).unwrap_or(f64::NAN).powi(2), 0.0), a, b, m).re)
                .sum::<f64>();
            let p = bs.params;
            let am = I * p.a_minus;
            let eig = worst([0.45, -1.3, 2.2].iter().map(|&x| -> Result<f64> {
                let x = c(x, 0.0);
                let lhs = bs.eval(x - am)? + bs.eval(x + am)?;
                Ok(rel_diff(lhs, bs.energy * bs.eval(x)?, 0.0))
            }));
            Ok(vec![
                Check::equal(format!("defect rank {tag}"), rep.numerical_rank, 1),
                Check::below(format!("fitted norm {tag}"), (fit - expect).abs() / expect, 1e-6),
                Check::below(format!("quadrature norm {tag}"), (quad - expect).abs() / expect, 1e-8),
                Check::below(format!("energy eigen-residual {tag}"), eig, 1e-10),
                Check::holds(format!("energy in (0, 2) {tag}"), bs.energy > 0.0 && bs.energy < 2.0),
            ])
        })();
        match run {
            Ok(c) => checks.extend(c),
            Err(e) => checks.push(failed(&tag, &e)),
        }
    }
    SuiteReport::new("bound-state", checks)
}

/// Ranks and entries of both defects below the isometry window, and the
/// signed Fourier transform at the endpoints `ρκ = π/2, π/3`.
pub fn breakdown(points: &[KernelPoint], seed: u64, q: &QuadSettings) -> SuiteReport {
    let bases = [Basis::Momentum(momentum_basis(6, seed)), Basis::Position(position_basis(6, seed))];
    let mut checks = Vec::new();
    for &pt in points {
        let tag = format!("N = {} rho*kappa = {}", pt.n, pt.rho_kappa);
        for basis in &bases {
            let side = match basis.side() {
                Side::Forward => "forward",
                Side::Adjoint => "adjoint",
            };
            let run = (|| -> Result<Vec<Check>> {
                let ker = special_kernel(pt)?;
                let rep = gram_defect(&ker, basis, q)?;
                let pred = predict_defect(&ker, basis)?;
                Ok(vec![
                    Check::equal(format!("{side} rank {tag}"), rep.numerical_rank, pred.numerical_rank),
                    Check::below(format!("{side} entries vs closed form {tag}"), rep.max_diff(&pred), 5.0 * q.tol),
                ])
            })();
            match run {
                Ok(c) => checks.extend(c),
                Err(e) => checks.push(failed(&format!("{side} {tag}"), &e)),
            }
        }
    }
    for m in [2usize, 3] {
        let pt = KernelPoint { n: 0, rho_kappa: PI / m as f64 };
        let sign = if m % 2 == 0 { -1.0 } else { 1.0 };
        let tag = format!("endpoint pi/{m}");
        let pointwise = special_kernel(pt).map(|ker| {
            worst([(0.3, 0.8), (-1.7, 2.4), (4.1, 0.15), (-0.6, 5.5)].iter().map(|&(r, k)| -> Result<f64> {
                Ok((ker.psi(r, k)? - sign * C64::from_polar(1.0, r * k)).norm())
            }))
        });
        checks.push(match pointwise {
            Ok(v) => Check::below(format!("signed Fourier kernel {tag}"), v, 1e-8),
            Err(e) => failed(&tag, &e),
        });
        for basis in &bases {
            let side = if basis.side() == Side::Forward { "forward" } else { "adjoint" };
            checks.push(gram_check(&format!("{side} defect {tag}"), special_kernel(pt), basis, q, 1e-8));
        }
    }
    SuiteReport::new("breakdown", checks)
}

/// The appendix example kernels: unitarity, isometry and rank-one defects
/// with their closed-form bound-state norms.
pub fn examples(seed: u64, q: &QuadSettings) -> SuiteReport {
    let fwd = Basis::Momentum(momentum_basis(6, seed));
    let adj = Basis::Position(position_basis(6, seed));
    let mut checks = Vec::new();
    for rk in [3.5, 5.0] {
        let k = KernelSpec::example_phi0(1.0, rk);
        checks.push(gram_check(&format!("phi0 forward rho*kappa = {rk}"), k.clone(), &fwd, q, 1e-6));
        checks.push(gram_check(&format!("phi0 adjoint rho*kappa = {rk}"), k, &adj, q, 1e-6));
    }
    let rk = 4.0;
    for sign in [1.0, -1.0] {
        let k = KernelSpec::example_phi_e(1.0, rk, sign);
        checks.push(gram_check(&format!("phi_e({sign}) forward"), k, &fwd, q, 1e-6));
    }
    checks.push(gram_check("phi_e(-1) adjoint", KernelSpec::example_phi_e(1.0, rk, -1.0), &adj, q, 1e-6));
    let th = PI * PI / rk;
    let rk_a = 7.3;
    let cases = [
        ("phi_e(+1)", KernelSpec::example_phi_e(1.0, rk, 1.0), FactorFn::EvenWeight { rho: 1.0, kappa: rk }, PI / (2.0 * rk * th.sin())),
        ("F_a", KernelSpec::reflectionless(1.0, rk_a), FactorFn::Reflectionless { rho: 1.0, kappa: rk_a }, PI / (rk_a * (2.0 * PI * PI / rk_a).sin())),
    ];
    for (name, ker, phi, expect) in cases {
        let run = (|| -> Result<Vec<Check>> {
            let ker = ker?;
            let fr = gram_defect(&ker, &fwd, q)?;
            let rep = gram_defect(&ker, &adj, q)?;
            let fit = fitted_projector_norm(&rep, &phi, &adj)?;
            Ok(vec![
                Check::below(format!("{name} forward defect"), fr.max_abs(), 1e-6),
                Check::equal(format!("{name} adjoint rank"), rep.numerical_rank, 1),
                Check::below(format!("{name} fitted norm"), (fit - expect).abs() / expect, 1e-6),
            ])
        })();
        match run {
            Ok(c) => checks.extend(c),
            Err(e) => checks.push(failed(name, &e)),
        }
    }
    SuiteReport::new("examples", checks)
}

fn bump(center: f64, half_width: f64) -> Bump {
    Bump { center, half_width, amplitude: c(1.0, 0.0) }
}

/// Defect ladders of the wave operators for both dynamics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaveLadders {
    pub momentum: Vec<LadderPoint>,
    pub position: Vec<LadderPoint>,
}

/// Wave-operator ladders at `t = -5, -20, -80`: momentum dynamics `2cosh(ρk)`
/// on the `N = 0`, `ρκ = 4` kernel, position dynamics `2sinh(κr)` on the
/// `N = 0`, `ρ = 4, κ = 1` kernel.
pub fn wave_ladders(times: &[f64], q: &QuadSettings) -> Result<WaveLadders> {
    let ker = KernelSpec::special_n(ScaleParams::from_rho_kappa(1.0, 4.0)?, 0)?;
    let dy = DynamicsSpec::mu_cm(1.0)?;
    let f = TwoComponentFn::new(vec![bump(1.0, 0.6)], vec![bump(1.2, 0.5)])?;
    let s = State::Momentum(MomentumState { base: f, time: 0.0, profile: dy.profile });
    let momentum = wave_operator_ladder(&ker, &dy, &s, times, q)?;
    let ker = KernelSpec::special_n(ScaleParams::from_rho_kappa(4.0, 1.0)?, 0)?;
    let dd = DynamicsSpec::d_cm(1.0)?;
    let h = State::Position(PositionState { base: PositionFn { bumps: vec![bump(0.3, 1.0)] }, time: 0.0, profile: dd.profile });
    let position = wave_operator_ladder(&ker, &dd, &h, times, q)?;
    Ok(WaveLadders { momentum, position })
}

/// Wave operators, norm conservation, S-matrix unitarity, time reversal,
/// the in/out relation and parity.
pub fn scattering(seed: u64, q: &QuadSettings) -> SuiteReport {
    let mut checks = Vec::new();
    let times = [-5.0, -20.0, -80.0];
    match wave_ladders(&times, q) {
        Ok(l) => {
            for (name, lad) in [("momentum", &l.momentum), ("position", &l.position)] {
                let dec = lad.windows(2).all(|w| w[1].defect < w[0].defect);
                checks.push(Check::holds(format!("{name} wave defect strictly decreasing"), dec));
                checks.push(Check::below(format!("{name} wave defect at t = -80"), lad[2].defect, 1e-3));
            }
        }
        Err(e) => checks.push(failed("wave operators", &e)),
    }
    let norm = (|| -> Result<f64> {
        let ker = KernelSpec::special_n(ScaleParams::from_rho_kappa(1.0, 4.0)?, 0)?;
        let dy = DynamicsSpec::mu_cm(1.0)?;
        let f = TwoComponentFn::new(vec![bump(1.0, 0.6)], vec![bump(1.2, 0.5)])?;
        let s0 = State::Momentum(MomentumState { base: f, time: 0.0, profile: dy.profile });
        let n0 = state_norm(&s0);
        let mut drift: f64 = 0.0;
        for t in [1.0, 5.0, 25.0] {
            let s = evolve(&ker, &dy, &s0, t)?;
            drift = drift.max((image_norm(&ker, &s, q)? - n0).abs());
        }
        Ok(drift)
    })();
    checks.push(match norm {
        Ok(v) => Check::below("norm drift over t = 1, 5, 25", v, 1e-8),
        Err(e) => failed("norm drift", &e),
    });
    let basis = momentum_basis(4, seed);
    let kernels: Vec<(&str, Result<KernelSpec>)> = vec![
        ("N = 0 rho*kappa = 4", ScaleParams::from_rho_kappa(1.0, 4.0).and_then(|p| KernelSpec::special_n(p, 0))),
        ("N = 1 rho*kappa = 7", ScaleParams::from_rho_kappa(1.0, 7.0).and_then(|p| KernelSpec::special_n(p, 1))),
        ("phi_e(+1)", KernelSpec::example_phi_e(1.0, 4.0, 1.0)),
        ("phi_e(-1)", KernelSpec::example_phi_e(1.0, 4.0, -1.0)),
    ];
    for (name, ker) in kernels {
        let parity_basis = if name.starts_with('N') { Some(basis.as_slice()) } else { None };
        match ker.and_then(|k| symmetry_checks(&k, parity_basis, q)) {
            Ok(r) => {
                checks.push(Check::below(format!("S-matrix unitarity {name}"), r.s_unitarity, 1e-12));
                checks.push(Check::below(format!("time reversal {name}"), r.time_reversal, 1e-10));
                checks.push(Check::below(format!("in/out relation {name}"), r.in_out, 1e-10));
                checks.push(Check::below(format!("phase modulus {name}"), r.phase_modulus, 1e-12));
                if let Some(p) = r.parity {
                    checks.push(Check::below(format!("parity {name}"), p, 1e-8));
                }
            }
            Err(e) => checks.push(failed(name, &e)),
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tr = Vec::new();
    for _ in 0..10 {
        let (ap, am) = (rng.gen_range(0.7..1.5), rng.gen_range(0.7..1.5));
        let b = rng.gen_range(0.1 * ap..am + 0.35 * ap);
        let (x, y) = (c(rng.gen_range(-1.5..1.5), 0.0), c(rng.gen_range(0.1..1.5), 0.0));
        tr.push(
            ScaleParams::new(ap, am)
                .and_then(|p| AttractiveEvaluator::new(p, b))
                .and_then(|e| Ok(e.time_reversal_residual(x, y)?.norm())),
        );
    }
    checks.push(max_check("eigenfunction time reversal", tr, 1e-10));
    SuiteReport::new("scattering", checks)
}

/// Suite names accepted by [`run_suite`].
pub const SUITES: [&str; 9] =
    ["gamma-laws", "ade", "yang-baxter", "isometry", "unitarity", "bound-state", "breakdown", "examples", "scattering"];

/// Runs a named suite; `point` replaces the default parameter points where
/// the suite has any.
pub fn run_suite(name: &str, seed: u64, point: Option<KernelPoint>, q: &QuadSettings) -> Result<SuiteReport> {
    let pts = |d: &[KernelPoint]| point.map(|p| vec![p]).unwrap_or_else(|| d.to_vec());
    Ok(match name {
        "gamma-laws" => gamma_laws(seed),
        "ade" => SuiteReport::merge("ade", vec![conical(seed), coefficients(), eigenfunctions(seed)]),
        "yang-baxter" => yang_baxter(seed),
        "isometry" => isometry(&pts(&ISOMETRY_POINTS), seed, q),
        "unitarity" => unitarity(&pts(&UNITARY_POINTS), seed, q),
        "bound-state" => bound_state(&pts(&BOUND_POINTS), seed, q),
        "breakdown" => breakdown(&pts(&BREAKDOWN_POINTS), seed, q),
        "examples" => examples(seed, q),
        "scattering" => scattering(seed, q),
        other => return Err(Error::InvalidParameter(format!("unknown suite {other}"))),
    })
}
