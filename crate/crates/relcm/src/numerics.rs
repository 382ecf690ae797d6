//! Quadrature on lines and paths, residues from circle contours, and
//! overflow-safe complex arithmetic.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadResult {
    pub value: C64,
    pub err_estimate: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourSpec {
    pub center: C64,
    pub radius: f64,
    pub points: usize,
}

impl ContourSpec {
    pub fn new(center: C64, radius: f64, points: usize) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidParameter(format!("contour radius {radius}")));
        }
        if points < 16 || points % 2 != 0 {
            return Err(Error::InvalidParameter(format!("contour points {points}")));
        }
        Ok(Self { center, radius, points })
    }
}

fn is_finite(z: C64) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

/// Integrates `f` over the real line. Each half-line is mapped by
/// `x = ±L exp((π/2) sinh t)` and summed with the trapezoidal rule, halving
/// the step until two successive sums agree to `tol` (relative to
/// `max(1, |I|)`). Splitting at the origin keeps integrands with a kink
/// there doubly-exponentially convergent.
pub fn integrate_real_line<F>(f: F, decay_rate: f64, tol: f64) -> Result<QuadResult>
where
    F: Fn(f64) -> C64,
{
    if !(decay_rate > 0.0) || !decay_rate.is_finite() {
        return Err(Error::InvalidDecay(decay_rate));
    }
    let tol = tol.max(1e-15);
    let scale = 1.0 / decay_rate;
    let x_max = ((10.0 / tol).ln() + 8.0) / decay_rate;
    let t_max = ((x_max / scale).ln() / (0.5 * PI)).asinh();
    let t_min = -4.0;
    let mut evaluations = 0usize;
    let mut eval = |t: f64| -> Result<C64> {
        let u = 0.5 * PI * t.sinh();
        let x = scale * u.exp();
        let jac = x * 0.5 * PI * t.cosh();
        let v = (f(x) + f(-x)) * jac;
        evaluations += 2;
        if is_finite(v) {
            Ok(v)
        } else {
            Err(Error::NonFinite(format!("integrand at x = ±{x}")))
        }
    };
    let mut h = 0.125;
    let mut n = ((t_max - t_min) / h).ceil() as i64;
    let mut sum = C64::new(0.0, 0.0);
    for j in 0..=n {
        sum += eval(t_min + j as f64 * h)?;
    }
    let mut value = sum * h;
    for _ in 0..8 {
        h *= 0.5;
        n *= 2;
        let mut j = 1;
        while j <= n {
            sum += eval(t_min + j as f64 * h)?;
            j += 2;
        }
        let next = sum * h;
        let diff = (next - value).norm();
        value = next;
        if diff <= tol * value.norm().max(1.0) {
            return Ok(QuadResult { value, err_estimate: diff, evaluations });
        }
    }
    Err(Error::NonConvergence(format!("real-line quadrature at step {h}")))
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// The 16-point rule used by all composite Gauss-Legendre integrations.
pub fn gl16() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(16))
}

/// Gauss-Legendre sum of `f` along the straight segment from `a` to `b`.
pub fn gl_segment<F>(f: &F, a: C64, b: C64) -> Result<C64>
where
    F: Fn(C64) -> Result<C64>,
{
    let (x, w) = gl16();
    let mid = (a + b) * 0.5;
    let half = (b - a) * 0.5;
    let mut s = C64::new(0.0, 0.0);
    for (xi, wi) in x.iter().zip(w) {
        s += f(mid + half * *xi)? * *wi;
    }
    Ok(s * half)
}

/// Composite Gauss-Legendre on a real interval with a fixed number of panels.
pub fn gl_interval<F>(f: F, a: f64, b: f64, panels: usize) -> C64
where
    F: Fn(f64) -> C64,
{
    let (x, w) = gl16();
    let h = (b - a) / panels as f64;
    let mut s = C64::new(0.0, 0.0);
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        for (xi, wi) in x.iter().zip(w) {
            s += f(mid + 0.5 * h * xi) * *wi;
        }
    }
    s * (0.5 * h)
}

/// Real nodes and weights of a composite Gauss-Legendre rule.
pub fn gl_nodes(a: f64, b: f64, panels: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gl16();
    let h = (b - a) / panels as f64;
    let mut xs = Vec::with_capacity(panels * 16);
    let mut ws = Vec::with_capacity(panels * 16);
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        for (xi, wi) in x.iter().zip(w) {
            xs.push(mid + 0.5 * h * xi);
            ws.push(0.5 * h * wi);
        }
    }
    (xs, ws)
}

/// Adaptive integration along a polygonal path. Each segment is cut into
/// panels no longer than `dist` at their endpoints (the distance to the
/// nearest singularity), and every panel is accepted only when its
/// Gauss-Legendre value agrees with the sum over its two halves.
pub fn integrate_path<F, D>(f: &F, vertices: &[C64], dist: &D, tol: f64) -> Result<QuadResult>
where
    F: Fn(C64) -> Result<C64>,
    D: Fn(C64) -> f64,
{
    let mut total = C64::new(0.0, 0.0);
    let mut err = 0.0;
    let mut evaluations = 0usize;
    for seg in vertices.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let len = (b - a).norm();
        if len == 0.0 {
            continue;
        }
        let mut stack: Vec<(C64, C64, u32)> = Vec::new();
        let mut t = a;
        while (b - t).norm() > 1e-300 {
            let d = dist(t).max(1e-6);
            let step = d.min((b - t).norm());
            let next = if step >= (b - t).norm() { b } else { t + (b - a) / len * step };
            stack.push((t, next, 0));
            t = next;
        }
        stack.reverse();
        while let Some((p, q, depth)) = stack.pop() {
            let m = (p + q) * 0.5;
            let whole = gl_segment(f, p, q)?;
            let left = gl_segment(f, p, m)?;
            let right = gl_segment(f, m, q)?;
            evaluations += 48;
            let diff = (left + right - whole).norm();
            let share = tol * (q - p).norm() / len;
            if diff <= share.max(1e-13 * (left + right).norm()) {
                total += left + right;
                err += diff;
            } else if depth >= 30 {
                return Err(Error::NonConvergence(format!("path panel near {p}")));
            } else {
                stack.push((m, q, depth + 1));
                stack.push((p, m, depth + 1));
            }
        }
    }
    if !is_finite(total) {
        return Err(Error::NonFinite("path integral".into()));
    }
    Ok(QuadResult { value: total, err_estimate: err, evaluations })
}

/// `(1/2πi)∮ f` over the circle described by `contour`, by the trapezoidal rule.
pub fn residue_numeric<F>(f: F, contour: &ContourSpec) -> Result<C64>
where
    F: Fn(C64) -> C64,
{
    let n = contour.points;
    let mut s = C64::new(0.0, 0.0);
    for j in 0..n {
        let e = C64::from_polar(contour.radius, 2.0 * PI * (j as f64 + 0.5) / n as f64);
        let v = f(contour.center + e);
        if !is_finite(v) {
            return Err(Error::ContourThroughSingularity(contour.center + e));
        }
        s += v * e;
    }
    Ok(s / n as f64)
}

/// A complex number stored as `m·e^s`, so that products of exponentially
/// large and small factors stay representable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaled {
    pub m: C64,
    pub s: f64,
}

impl Scaled {
    pub const ZERO: Scaled = Scaled { m: C64 { re: 0.0, im: 0.0 }, s: 0.0 };
    pub const ONE: Scaled = Scaled { m: C64 { re: 1.0, im: 0.0 }, s: 0.0 };

    pub fn from(z: C64) -> Self {
        Scaled { m: z, s: 0.0 }.norm()
    }

    pub fn exp(z: C64) -> Self {
        Scaled { m: C64::from_polar(1.0, z.im), s: z.re }
    }

    fn norm(self) -> Self {
        let a = self.m.norm();
        if a == 0.0 || !a.is_finite() {
            return self;
        }
        if !(1e-30..=1e30).contains(&a) {
            let l = a.ln();
            Scaled { m: self.m / a, s: self.s + l }
        } else {
            self
        }
    }

    pub fn value(self) -> C64 {
        if self.m == C64::new(0.0, 0.0) {
            return self.m;
        }
        self.m * self.s.exp()
    }

    pub fn log_abs(self) -> f64 {
        self.m.norm().ln() + self.s
    }

    pub fn mul(self, o: Scaled) -> Scaled {
        Scaled { m: self.m * o.m, s: self.s + o.s }.norm()
    }

    pub fn div(self, o: Scaled) -> Scaled {
        Scaled { m: self.m / o.m, s: self.s - o.s }.norm()
    }

    pub fn scale(self, k: C64) -> Scaled {
        Scaled { m: self.m * k, s: self.s }.norm()
    }

    pub fn add(self, o: Scaled) -> Scaled {
        if self.m == C64::new(0.0, 0.0) {
            return o;
        }
        if o.m == C64::new(0.0, 0.0) {
            return self;
        }
        let s = self.s.max(o.s);
        Scaled { m: self.m * (self.s - s).exp() + o.m * (o.s - s).exp(), s }.norm()
    }

    pub fn sub(self, o: Scaled) -> Scaled {
        self.add(o.scale(C64::new(-1.0, 0.0)))
    }

    pub fn sqrt(self) -> Scaled {
        Scaled { m: self.m.sqrt(), s: 0.5 * self.s }
    }

    pub fn powi(self, n: i32) -> Scaled {
        Scaled { m: self.m.powi(n), s: self.s * n as f64 }.norm()
    }
}

/// `sinh z` without overflow.
pub fn sinh_s(z: C64) -> Scaled {
    if z.re.abs() < 30.0 {
        Scaled::from(z.sinh())
    } else {
        Scaled::exp(z).sub(Scaled::exp(-z)).scale(C64::new(0.5, 0.0))
    }
}

/// `cosh z` without overflow.
pub fn cosh_s(z: C64) -> Scaled {
    if z.re.abs() < 30.0 {
        Scaled::from(z.cosh())
    } else {
        Scaled::exp(z).add(Scaled::exp(-z)).scale(C64::new(0.5, 0.0))
    }
}

/// Relative difference `|a-b| / max(|a|,|b|, floor)`.
pub fn rel_diff(a: C64, b: C64, floor: f64) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(floor)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_line_exponential() {
        let r = integrate_real_line(|x| C64::new((-x.abs()).exp(), 0.0), 1.0, 1e-12).unwrap();
        assert!((r.value - 2.0).norm() < 1e-11, "{:?}", r);
        assert!(r.err_estimate >= 0.0 && r.evaluations > 0);
    }

    #[test]
    fn real_line_gaussian_oscillatory() {
        // ∫ e^{-x²} e^{2ix} dx = √π e^{-1}
        let r = integrate_real_line(|x| C64::new(0.0, 2.0 * x).exp() * (-x * x).exp(), 1.0, 1e-13)
            .unwrap();
        assert!((r.value - PI.sqrt() * (-1.0f64).exp()).norm() < 1e-12);
    }

    #[test]
    fn real_line_rejects_bad_decay() {
        assert!(matches!(
            integrate_real_line(|_| C64::new(1.0, 0.0), 0.0, 1e-10),
            Err(Error::InvalidDecay(_))
        ));
    }

    #[test]
    fn gl_rule_exact_for_polynomials() {
        let (x, w) = gauss_legendre(16);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(30)).sum();
        assert!((s - 2.0 / 31.0).abs() < 1e-14);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn path_integral_around_pole() {
        // ∫ over a path passing above the pole of 1/z equals ∫_ℝ-limit with -iπ
        let f = |z: C64| Ok(1.0 / (z * z + 1.0));
        let verts = [c(-40.0, 0.0), c(-1.0, -0.5), c(1.0, 0.5), c(40.0, 0.0)];
        let dist = |z: C64| ((z - I).norm()).min((z + I).norm());
        let r = integrate_path(&f, &verts, &dist, 1e-13).unwrap();
        let exact = 2.0 * (40.0f64).atan();
        assert!((r.value - exact).norm() < 1e-12, "{:?}", r.value);
    }

    #[test]
    fn residue_simple_pole() {
        let contour = ContourSpec::new(C64::new(0.0, 0.0), 0.5, 32).unwrap();
        let r = residue_numeric(|z| 1.0 / z, &contour).unwrap();
        assert!((r - 1.0).norm() < 1e-15);
        let spec2 = ContourSpec::new(C64::new(0.0, 0.0), 0.3, 64).unwrap();
        let g = |z: C64| z.exp() / z.sinh();
        let a = residue_numeric(g, &contour).unwrap();
        let b = residue_numeric(g, &spec2).unwrap();
        assert!((a - b).norm() < 1e-12 && (a - 1.0).norm() < 1e-12);
    }

    #[test]
    fn residue_contour_validation() {
        assert!(ContourSpec::new(C64::new(0.0, 0.0), 0.0, 32).is_err());
        assert!(ContourSpec::new(C64::new(0.0, 0.0), 1.0, 15).is_err());
        let contour = ContourSpec::new(C64::new(0.0, 0.0), 1.0, 16).unwrap();
        let r = residue_numeric(|z| 1.0 / (z - 1.0), &contour);
        assert!(r.is_ok() || matches!(r, Err(Error::ContourThroughSingularity(_))));
    }

    #[test]
    fn scaled_arithmetic() {
        let a = sinh_s(c(800.0, 0.3));
        let b = cosh_s(c(799.0, 0.3));
        let r = a.div(b).value();
        let expect = C64::new(1.0f64, 0.0).exp();
        assert!((r - expect).norm() < 1e-12);
        let z = c(0.7, -0.2);
        assert!((sinh_s(z).value() - z.sinh()).norm() < 1e-15);
        assert!((Scaled::from(c(4.0, 0.0)).sqrt().value() - 2.0).norm() < 1e-15);
    }
}
