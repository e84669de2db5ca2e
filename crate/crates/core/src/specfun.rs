//! Bessel, Hankel and spherical Bessel functions of real argument, and the
//! outgoing fundamental solution of the Helmholtz operator.
//!
//! Integer-order `J_n` is computed with Miller's backward recurrence,
//! normalized by `J_0 + 2 sum J_2k = 1`. `Y_0` and `Y_1` come from Neumann
//! series in the same `J_k` for `x <= 20` and from the Hankel asymptotic
//! expansion beyond; higher `Y_n` by upward recurrence.

use crate::error::{invalid, Error, Result};
use num_complex::Complex64;
use std::f64::consts::{FRAC_2_PI, PI};

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Default highest tabulated order.
pub const DEFAULT_MAX_ORDER: usize = 64;

/// Arguments above this use the Hankel asymptotic expansion for `Y_0`, `Y_1`.
const ASYMPTOTIC_CROSSOVER: f64 = 20.0;

const RESCALE_ABOVE: f64 = 1e250;

/// Start order for the backward recurrence so that `J_start / J_target`
/// is far below double precision.
fn miller_start(nmax: usize, x: f64) -> usize {
    let big = (nmax as f64).max(x);
    let start = big + 20.0 + 13.0 * x.cbrt() + (10.0 * (big + 1.0)).sqrt();
    let s = start.ceil() as usize;
    s + (s & 1)
}

/// `J_0(x) .. J_N(x)` with `N >= nmax` the recurrence start order.
fn miller_j(nmax: usize, x: f64) -> Vec<f64> {
    let start = miller_start(nmax, x);
    let mut j = vec![0.0; start + 2];
    if x == 0.0 {
        j[0] = 1.0;
        return j;
    }
    j[start] = 1e-300;
    let mut norm = 0.0;
    for n in (1..=start).rev() {
        let prev = (2.0 * n as f64 / x) * j[n] - j[n + 1];
        j[n - 1] = prev;
        if (n - 1) % 2 == 0 && n - 1 > 0 {
            norm += 2.0 * prev;
        }
        if prev.abs() > RESCALE_ABOVE {
            let s = 1.0 / RESCALE_ABOVE;
            for v in j[n - 1..].iter_mut() {
                *v *= s;
            }
            norm *= s;
        }
    }
    norm += j[0];
    for v in j.iter_mut() {
        *v /= norm;
    }
    j
}

/// Hankel asymptotic expansion of `(J_nu, Y_nu)` for `nu` in {0, 1}.
fn hankel_asymptotic(nu: u32, x: f64) -> (f64, f64) {
    let mu = 4.0 * (nu * nu) as f64;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..200 {
        let odd = (2 * k - 1) as f64;
        term *= (mu - odd * odd) / (k as f64 * 8.0 * x);
        if term.abs() >= last || term.abs() < 1e-18 {
            break;
        }
        last = term.abs();
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
    }
    let chi = x - (0.5 * nu as f64 + 0.25) * PI;
    let (s, c) = chi.sin_cos();
    let amp = (FRAC_2_PI / x).sqrt();
    (amp * (p * c - q * s), amp * (p * s + q * c))
}

/// `(Y_0(x), Y_1(x))` for `x > 0`, given the Miller sequence when `x` is small.
fn y01(x: f64, j: &[f64]) -> (f64, f64) {
    if x > ASYMPTOTIC_CROSSOVER {
        return (hankel_asymptotic(0, x).1, hankel_asymptotic(1, x).1);
    }
    let lg = (0.5 * x).ln() + EULER_GAMMA;
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let mut k = 1;
    while 2 * k + 1 < j.len() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        s0 += sign * j[2 * k] / k as f64;
        s1 += sign * (j[2 * k - 1] - j[2 * k + 1]) / k as f64;
        k += 1;
    }
    let y0 = FRAC_2_PI * lg * j[0] - 2.0 * FRAC_2_PI * s0;
    let y1 = -FRAC_2_PI * j[0] / x + FRAC_2_PI * lg * j[1] + FRAC_2_PI * s1;
    (y0, y1)
}

fn check_arg(x: f64, allow_zero: bool) -> Result<()> {
    if !x.is_finite() || x < 0.0 || (!allow_zero && x == 0.0) {
        return Err(invalid("x", format!("argument {x} outside the supported range")));
    }
    Ok(())
}

/// `J_0(x) .. J_nmax(x)` for `x >= 0`.
pub fn bessel_j_seq(nmax: usize, x: f64) -> Result<Vec<f64>> {
    check_arg(x, true)?;
    let mut j = miller_j(nmax, x);
    j.truncate(nmax + 1);
    Ok(j)
}

/// `(J_0..J_nmax, Y_0..Y_nmax)` for `x > 0`.
pub fn bessel_jy_seq(nmax: usize, x: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    check_arg(x, false)?;
    let j_full = miller_j(nmax.max(1), x);
    let (y0, y1) = y01(x, &j_full);
    let mut y = Vec::with_capacity(nmax + 2);
    y.push(y0);
    y.push(y1);
    for n in 1..nmax {
        let next = (2.0 * n as f64 / x) * y[n] - y[n - 1];
        if !next.is_finite() {
            return Err(invalid("n", format!("Y_{} overflows at x = {x}", n + 1)));
        }
        y.push(next);
    }
    y.truncate(nmax + 1);
    let mut j = j_full;
    j.truncate(nmax + 1);
    Ok((j, y))
}

/// Bessel function of the first kind `J_n(x)`, `x >= 0`.
pub fn bessel_j(n: usize, x: f64) -> Result<f64> {
    Ok(bessel_j_seq(n, x)?[n])
}

/// Bessel function of the second kind `Y_n(x)`, `x > 0`.
pub fn bessel_y(n: usize, x: f64) -> Result<f64> {
    Ok(bessel_jy_seq(n, x)?.1[n])
}

/// Hankel function of the first kind `H_n^(1)(x) = J_n(x) + i Y_n(x)`.
pub fn hankel1(n: usize, x: f64) -> Result<Complex64> {
    let (j, y) = bessel_jy_seq(n, x)?;
    Ok(Complex64::new(j[n], y[n]))
}

/// Hankel function of the second kind, the complex conjugate of `H^(1)` for real `x`.
pub fn hankel2(n: usize, x: f64) -> Result<Complex64> {
    let (j, y) = bessel_jy_seq(n, x)?;
    Ok(Complex64::new(j[n], -y[n]))
}

/// `(H_0^(1)(x), H_1^(1)(x))`.
pub(crate) fn hankel1_01(x: f64) -> (Complex64, Complex64) {
    let j = miller_j(1, x);
    let (y0, y1) = y01(x, &j);
    (Complex64::new(j[0], y0), Complex64::new(j[1], y1))
}

/// `H_1^(1)(a)/a + 2i/(pi a^2)`, the regular part of `H_1/a` at the origin.
///
/// Equals `int_0^1 s H_0^(1)(a s) ds`; the power series avoids the
/// cancellation of the two singular terms for small `a`.
pub(crate) fn hankel1_over_arg_regular(a: f64) -> Complex64 {
    if a > 0.5 {
        let (_, h1) = hankel1_01(a);
        return h1 / a + Complex64::new(0.0, 2.0 / (PI * a * a));
    }
    let t = 0.5 * a;
    let t2 = t * t;
    let ln_t = t.ln();
    // J1(a)/a = sum (-1)^m t^{2m} / (2 m! (m+1)!)
    // Y1(a)/a + 2/(pi a^2) = (2/pi) ln(t) J1(a)/a
    //   - (1/(2 pi)) sum (-1)^m (psi(m+1)+psi(m+2)) t^{2m} / (m! (m+1)!)
    let mut j_over = 0.0;
    let mut y_series = 0.0;
    let mut fact = 1.0; // t^{2m} / (m! (m+1)!)
    let mut psi_m1 = -EULER_GAMMA; // psi(m+1)
    for m in 0..30 {
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        let psi_m2 = psi_m1 + 1.0 / (m as f64 + 1.0);
        j_over += sign * fact * 0.5;
        y_series += sign * (psi_m1 + psi_m2) * fact;
        let mf = m as f64;
        fact *= t2 / ((mf + 1.0) * (mf + 2.0));
        psi_m1 = psi_m2;
        if fact < 1e-20 {
            break;
        }
    }
    let y_reg = FRAC_2_PI * ln_t * j_over - y_series / (2.0 * PI);
    Complex64::new(j_over, y_reg)
}

fn spherical_start(nmax: usize, x: f64) -> usize {
    miller_start(nmax + 1, x)
}

/// Spherical Bessel functions `j_0..j_nmax` and `y_0..y_nmax` for `x > 0`.
pub fn spherical_jy_seq(nmax: usize, x: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    check_arg(x, false)?;
    let start = spherical_start(nmax, x);
    let mut j = vec![0.0; start + 2];
    j[start] = 1e-300;
    for n in (1..=start).rev() {
        let prev = ((2 * n + 1) as f64 / x) * j[n] - j[n + 1];
        j[n - 1] = prev;
        if prev.abs() > RESCALE_ABOVE {
            for v in j[n - 1..].iter_mut() {
                *v /= RESCALE_ABOVE;
            }
        }
    }
    let (s, c) = x.sin_cos();
    let j0 = s / x;
    let j1 = s / (x * x) - c / x;
    let scale = if x < 1.0 || j0.abs() >= j1.abs() {
        j0 / j[0]
    } else {
        j1 / j[1]
    };
    let mut jv: Vec<f64> = j[..=nmax].iter().map(|v| v * scale).collect();
    if x < 1.0 {
        jv[0] = j0;
    }
    let mut y = Vec::with_capacity(nmax + 2);
    y.push(-c / x);
    y.push(-c / (x * x) - s / x);
    for n in 1..nmax {
        let next = ((2 * n + 1) as f64 / x) * y[n] - y[n - 1];
        y.push(next);
    }
    y.truncate(nmax + 1);
    Ok((jv, y))
}

/// Cached cylinder functions `J_n, Y_n` and their derivatives at a set of points.
#[derive(Debug, Clone)]
pub struct CylinderFunctionTable {
    n_max: usize,
    points: Vec<f64>,
    j: Vec<Vec<f64>>,
    y: Vec<Vec<f64>>,
    jp: Vec<Vec<f64>>,
    yp: Vec<Vec<f64>>,
}

impl CylinderFunctionTable {
    pub fn build(n_max: usize, points: &[f64]) -> Result<Self> {
        let mut table = CylinderFunctionTable {
            n_max,
            points: points.to_vec(),
            j: Vec::with_capacity(points.len()),
            y: Vec::with_capacity(points.len()),
            jp: Vec::with_capacity(points.len()),
            yp: Vec::with_capacity(points.len()),
        };
        for &x in points {
            let (j, y) = bessel_jy_seq(n_max + 1, x)?;
            table.jp.push(derivative_seq(&j, x, n_max));
            table.yp.push(derivative_seq(&y, x, n_max));
            table.j.push(j[..=n_max].to_vec());
            table.y.push(y[..=n_max].to_vec());
        }
        Ok(table)
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn j(&self, point: usize, n: usize) -> f64 {
        self.j[point][n]
    }

    pub fn y(&self, point: usize, n: usize) -> f64 {
        self.y[point][n]
    }

    pub fn j_prime(&self, point: usize, n: usize) -> f64 {
        self.jp[point][n]
    }

    pub fn y_prime(&self, point: usize, n: usize) -> f64 {
        self.yp[point][n]
    }

    /// Relative defect of the Wronskian `J_n Y_n' - J_n' Y_n = 2/(pi x)`.
    pub fn wronskian_defect(&self, point: usize, n: usize) -> f64 {
        let x = self.points[point];
        let w = self.j(point, n) * self.y_prime(point, n) - self.j_prime(point, n) * self.y(point, n);
        let exact = 2.0 / (PI * x);
        (w - exact).abs() / exact
    }
}

/// `Z_n'` from `Z_0..Z_{nmax+1}` via `Z_n' = (Z_{n-1} - Z_{n+1})/2`, `Z_0' = -Z_1`.
fn derivative_seq(z: &[f64], _x: f64, nmax: usize) -> Vec<f64> {
    (0..=nmax)
        .map(|n| if n == 0 { -z[1] } else { 0.5 * (z[n - 1] - z[n + 1]) })
        .collect()
}

/// `J_n'(x)` for `x >= 0`.
pub fn bessel_j_prime(n: usize, x: f64) -> Result<f64> {
    let j = bessel_j_seq(n + 1, x)?;
    Ok(if n == 0 { -j[1] } else { 0.5 * (j[n - 1] - j[n + 1]) })
}

/// `H_n^(1)'(x)` for `x > 0`.
pub fn hankel1_prime(n: usize, x: f64) -> Result<Complex64> {
    let (j, y) = bessel_jy_seq(n + 1, x)?;
    let jp = derivative_seq(&j, x, n);
    let yp = derivative_seq(&y, x, n);
    Ok(Complex64::new(jp[n], yp[n]))
}

/// Outgoing fundamental solution of `Delta + k^2` in two or three dimensions.
///
/// `(i/4) H_0^(1)(k|x-y|)` in 2D and `exp(ik|x-y|)/(4 pi |x-y|)` in 3D.
pub fn green(k: f64, x: &[f64], y: &[f64], dim: usize) -> Result<Complex64> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(invalid("k", "wavenumber must be positive"));
    }
    if x.len() != dim || y.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: x.len().min(y.len()),
        });
    }
    let r = distance(x, y);
    if r == 0.0 {
        return Err(Error::SingularPoint);
    }
    match dim {
        2 => Ok(green_2d(k, r)),
        3 => Ok(green_3d(k, r)),
        _ => Err(invalid("dim", "only 2 and 3 are supported")),
    }
}

#[inline]
pub(crate) fn green_2d(k: f64, r: f64) -> Complex64 {
    let (h0, _) = hankel1_01(k * r);
    Complex64::new(0.0, 0.25) * h0
}

#[inline]
pub(crate) fn green_3d(k: f64, r: f64) -> Complex64 {
    Complex64::from_polar(1.0 / (4.0 * PI * r), k * r)
}

pub(crate) fn distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, v| acc * v as f64)
}
