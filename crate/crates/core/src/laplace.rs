//! Homogeneous harmonic polynomials, their extraction from Helmholtz
//! solutions, and Laplace transforms over sectors and octants.

use crate::cgo::{make_rho, Branch, CgoParameters, RhoKind};
use crate::error::{invalid, Error, Result};
use crate::geometry::{OrthantCone, SectorGeometry, TruncatedSector};
use crate::incident::FourierBesselMode;
use crate::quad::{gauss_legendre_on, integrate_adaptive};
use crate::specfun::{bessel_j_seq, factorial};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

/// Degree cap for the polynomial bases.
pub const MAX_DEGREE: usize = 12;

/// `H` in the basis `{Re (x1 + i x2)^n, Im (x1 + i x2)^n}` (plane) or the
/// real solid harmonics `r^n P_n^|m|(cos t) {cos m p, sin |m| p}`, `m = -n..n`
/// (space, Legendre functions without normalization or Condon-Shortley sign).
/// Coefficients are complex so that complex-valued fields are covered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicHomogeneousPolynomial {
    dim: usize,
    degree: usize,
    coefficients: Vec<Complex64>,
}

impl HarmonicHomogeneousPolynomial {
    pub fn planar(degree: usize, re_part: Complex64, im_part: Complex64) -> Result<Self> {
        check_degree(degree)?;
        let im_part = if degree == 0 { Complex64::new(0.0, 0.0) } else { im_part };
        Ok(HarmonicHomogeneousPolynomial {
            dim: 2,
            degree,
            coefficients: vec![re_part, im_part],
        })
    }

    /// `coefficients[n + m]` multiplies the order-`m` solid harmonic.
    pub fn spatial(degree: usize, coefficients: Vec<Complex64>) -> Result<Self> {
        check_degree(degree)?;
        if coefficients.len() != 2 * degree + 1 {
            return Err(Error::DimensionMismatch {
                expected: 2 * degree + 1,
                got: coefficients.len(),
            });
        }
        Ok(HarmonicHomogeneousPolynomial {
            dim: 3,
            degree,
            coefficients,
        })
    }

    pub fn zero(dim: usize, degree: usize) -> Result<Self> {
        let z = Complex64::new(0.0, 0.0);
        match dim {
            2 => Self::planar(degree, z, z),
            3 => Self::spatial(degree, vec![z; 2 * degree + 1]),
            _ => Err(invalid("dim", "dimension must be 2 or 3")),
        }
    }

    /// Leading Taylor term of a Fourier-Bessel mode about its centre.
    pub fn from_mode(mode: &FourierBesselMode) -> Result<Self> {
        let n = mode.leading_degree();
        let c = mode.amplitude * (0.5 * mode.k).powi(n as i32) / factorial(n);
        let i = Complex64::new(0.0, 1.0);
        if mode.order >= 0 {
            Self::planar(n, c, i * c)
        } else {
            // (-1)^n J_n(kr) e^{-i n phi} ~ (-1)^n (k/2)^n/n! conj(z)^n
            let c = if n % 2 == 1 { -c } else { c };
            Self::planar(n, c, -i * c)
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn is_zero(&self) -> bool {
        self.coefficients.iter().all(|c| c.norm() == 0.0)
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        HarmonicHomogeneousPolynomial {
            coefficients: self.coefficients.iter().map(|c| c * factor).collect(),
            ..self.clone()
        }
    }

    /// The planar polynomial `x -> H(R(-angle) x)`.
    pub fn rotated(&self, angle: f64) -> Result<Self> {
        if self.dim != 2 {
            return Err(invalid("dim", "rotation is implemented for planar polynomials"));
        }
        // a Re w + b Im w with w = e^{-i n angle} z^n
        let n = self.degree as f64;
        let (c, s) = ((n * angle).cos(), (n * angle).sin());
        let (a, b) = (self.coefficients[0], self.coefficients[1]);
        Self::planar(self.degree, a * c - b * s, a * s + b * c)
    }

    pub fn eval(&self, x: &[f64]) -> Complex64 {
        if self.dim == 2 {
            let w = Complex64::new(x[0], x[1]).powu(self.degree as u32);
            self.coefficients[0] * w.re + self.coefficients[1] * w.im
        } else {
            let n = self.degree;
            solid_harmonics(n, x)
                .iter()
                .zip(&self.coefficients)
                .map(|(y, c)| c * y)
                .sum()
        }
    }

    /// Values on the unit sphere, `h(theta) = H(theta)`.
    pub fn on_sphere(&self, theta: &[f64]) -> Complex64 {
        self.eval(theta)
    }
}

fn check_degree(degree: usize) -> Result<()> {
    if degree > MAX_DEGREE {
        return Err(Error::DegreeExceeded { n_max: MAX_DEGREE });
    }
    Ok(())
}

/// `r^n P_n^|m|(z/r) {cos m p, sin |m| p}` for `m = -n..n`, ordered by `m`.
fn solid_harmonics(n: usize, x: &[f64]) -> Vec<f64> {
    let rho = x[0].hypot(x[1]);
    let r = rho.hypot(x[2]);
    let mut out = vec![0.0; 2 * n + 1];
    if r == 0.0 {
        if n == 0 {
            out[0] = 1.0;
        }
        return out;
    }
    let t = x[2] / r;
    for m in 0..=n {
        // d^m P_n / dt^m by upward recurrence in the degree
        let mut prev = 0.0;
        let mut cur = (1..=m).fold(1.0, |acc, j| acc * (2 * j - 1) as f64);
        for l in m..n {
            let next = ((2 * l + 1) as f64 * t * cur - (l + m) as f64 * prev) / (l - m + 1) as f64;
            prev = cur;
            cur = next;
        }
        // r^n sin^m(t) d^mP = r^{n-m} d^mP * rho^m, and rho^m e^{i m p} = (x + iy)^m
        let w = Complex64::new(x[0], x[1]).powu(m as u32);
        let radial = r.powi((n - m) as i32) * cur;
        out[n + m] = radial * w.re;
        if m > 0 {
            out[n - m] = radial * w.im;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicPart {
    pub polynomial: HarmonicHomogeneousPolynomial,
    /// Fitted order-`m` coefficients in `sum alpha_m J_|m|(kr) e^{i m phi}`,
    /// for `m = -n..n`.
    pub mode_coefficients: Vec<Complex64>,
    /// `max |v - H|` on the outer circle.
    pub remainder_scale: f64,
}

/// Relative floor below which a Fourier coefficient counts as zero.
pub const HARMONIC_NOISE_FLOOR: f64 = 1e-9;

/// Lowest-order homogeneous part of a planar Helmholtz solution near the
/// origin from angular Fourier coefficients on the circles `r0, r0/2, r0/4`.
pub fn lowest_harmonic_part<F>(field: F, k: f64, n_max: usize, r0: f64) -> Result<HarmonicPart>
where
    F: Fn(&[f64]) -> Complex64,
{
    if !(k > 0.0) || !(r0 > 0.0) {
        return Err(invalid("r0", "wavenumber and radius must be positive"));
    }
    let n_max = n_max.min(MAX_DEGREE);
    let samples = (8 * (n_max + 1)).next_power_of_two().max(64);
    let radii = [r0, 0.5 * r0, 0.25 * r0];
    let mut coeffs = Vec::new();
    let mut amplitude = 0.0f64;
    for &r in &radii {
        let vals: Vec<Complex64> = (0..samples)
            .map(|j| {
                let a = 2.0 * PI * j as f64 / samples as f64;
                field(&[r * a.cos(), r * a.sin()])
            })
            .collect();
        amplitude = amplitude.max(vals.iter().map(|v| v.norm()).fold(0.0, f64::max));
        // c_m = mean of v e^{-i m a}
        let c: Vec<Complex64> = (-(n_max as i64)..=n_max as i64)
            .map(|m| {
                vals.iter()
                    .enumerate()
                    .map(|(j, v)| v * Complex64::from_polar(1.0, -2.0 * PI * (m * j as i64) as f64 / samples as f64))
                    .sum::<Complex64>()
                    / samples as f64
            })
            .collect();
        coeffs.push(c);
    }
    if amplitude == 0.0 || !amplitude.is_finite() {
        return Err(Error::NumericallyZero);
    }
    let floor = HARMONIC_NOISE_FLOOR * amplitude;
    let nm = n_max as i64;
    let significant = |m: i64| coeffs.iter().any(|c| c[(m + nm) as usize].norm() > floor);
    let n = (0..=n_max)
        .find(|&n| significant(n as i64) || significant(-(n as i64)))
        .ok_or(Error::DegreeExceeded { n_max })?;
    let bessel: Vec<Vec<f64>> = radii
        .iter()
        .map(|&r| bessel_j_seq(n_max, k * r))
        .collect::<Result<_>>()?;
    let fit = |m: i64| {
        let a = m.unsigned_abs() as usize;
        let (mut num, mut den) = (Complex64::new(0.0, 0.0), 0.0);
        for (c, j) in coeffs.iter().zip(&bessel) {
            num += c[(m + nm) as usize] * j[a];
            den += j[a] * j[a];
        }
        num / den
    };
    let mode_coefficients: Vec<Complex64> = (-(n as i64)..=n as i64).map(fit).collect();
    let (ap, am) = (mode_coefficients[2 * n], mode_coefficients[0]);
    let lead = (0.5 * k).powi(n as i32) / factorial(n);
    let i = Complex64::new(0.0, 1.0);
    // alpha_n z^n + alpha_{-n} conj(z)^n in the Re/Im basis
    let polynomial = if n == 0 {
        HarmonicHomogeneousPolynomial::planar(0, ap * lead, Complex64::new(0.0, 0.0))?
    } else {
        HarmonicHomogeneousPolynomial::planar(n, (ap + am) * lead, i * (ap - am) * lead)?
    };
    let remainder_scale = (0..samples)
        .map(|j| {
            let a = 2.0 * PI * j as f64 / samples as f64;
            let x = [r0 * a.cos(), r0 * a.sin()];
            (field(&x) - polynomial.eval(&x)).norm()
        })
        .fold(0.0, f64::max);
    Ok(HarmonicPart {
        polynomial,
        mode_coefficients,
        remainder_scale,
    })
}

fn dot_c(z: &[Complex64], t: &[f64]) -> Complex64 {
    z.iter().zip(t).map(|(a, b)| a * b).sum()
}

fn check_planar(h: &HarmonicHomogeneousPolynomial, z: &[Complex64]) -> Result<()> {
    if h.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: h.dim(),
        });
    }
    if z.len() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: z.len(),
        });
    }
    Ok(())
}

/// `min Re(z . theta)` over the extreme rays of the sector.
pub fn sector_domain_margin(w: &SectorGeometry, z: &[Complex64]) -> f64 {
    let phi0 = w.half_aperture();
    [-phi0, phi0]
        .iter()
        .map(|&p| dot_c(z, &w.ray_direction(p)).re)
        .fold(f64::INFINITY, f64::min)
}

const LAPLACE_TOL: f64 = 1e-12;

/// `F(z) = int_W exp(-z.y) H(y) dy` with `y` measured from the vertex,
/// evaluated as `(n+1)! int h(theta) (z.theta)^{-(n+2)} dphi`.
pub fn sector_laplace(h: &HarmonicHomogeneousPolynomial, w: &SectorGeometry, z: &[Complex64]) -> Result<Complex64> {
    check_planar(h, z)?;
    let margin = sector_domain_margin(w, z);
    if !(margin > 0.0) {
        return Err(Error::DomainCondition { min_real_part: margin });
    }
    if h.is_zero() {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let n = h.degree();
    let phi0 = w.half_aperture();
    let power = -((n + 2) as i32);
    let v = integrate_adaptive(
        |p| {
            let t = w.ray_direction(p);
            h.eval(&t) * dot_c(z, &t).powi(power)
        },
        -phi0,
        phi0,
        LAPLACE_TOL,
        0.0,
    );
    Ok(v * factorial(n + 1))
}

/// `int_0^rho r^{m-1} e^{-a r} dr = gamma(m, a rho) / a^m` and the matching
/// tail `Gamma(m, a rho) / a^m`, for integer `m >= 1` and `Re a > 0`.
fn radial_moments(m: usize, a: Complex64, rho: f64) -> (Complex64, Complex64) {
    let x = a * rho;
    let am = a.powi(m as i32);
    // Gamma(m, x) = (m-1)! e^{-x} sum_{j<m} x^j / j!
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    for j in 1..m {
        term *= x / j as f64;
        sum += term;
    }
    let upper = (-x).exp() * sum * factorial(m - 1);
    let lower = if x.norm() < (m as f64 + 20.0) {
        // gamma(m, x) = x^m e^{-x} sum_j x^j / (m (m+1) ... (m+j))
        let mut t = Complex64::new(1.0 / m as f64, 0.0);
        let mut s = t;
        let mut j = 1usize;
        loop {
            t *= x / (m + j) as f64;
            s += t;
            if t.norm() < 1e-17 * s.norm() || j > 500 {
                break;
            }
            j += 1;
        }
        x.powi(m as i32) * (-x).exp() * s
    } else {
        factorial(m - 1) - upper
    };
    (lower / am, upper / am)
}

/// Transform restricted to `S_{R/2}`.
pub fn truncated_sector_laplace(
    h: &HarmonicHomogeneousPolynomial,
    ts: &TruncatedSector,
    z: &[Complex64],
) -> Result<Complex64> {
    check_planar(h, z)?;
    if h.is_zero() {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let w = ts.base();
    let phi0 = w.half_aperture();
    let rho = 0.5 * ts.radius();
    let m = h.degree() + 2;
    Ok(integrate_adaptive(
        |p| {
            let t = w.ray_direction(p);
            h.eval(&t) * radial_moments(m, dot_c(z, &t), rho).0
        },
        -phi0,
        phi0,
        LAPLACE_TOL,
        0.0,
    ))
}

/// The part of the transform outside `S_{R/2}`, `F - F_trunc`, computed
/// directly from the radial tail so it stays accurate far below `|F|`.
pub fn sector_laplace_tail(
    h: &HarmonicHomogeneousPolynomial,
    ts: &TruncatedSector,
    z: &[Complex64],
) -> Result<Complex64> {
    check_planar(h, z)?;
    let margin = sector_domain_margin(ts.base(), z);
    if !(margin > 0.0) {
        return Err(Error::DomainCondition { min_real_part: margin });
    }
    if h.is_zero() {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let w = ts.base();
    let phi0 = w.half_aperture();
    let rho = 0.5 * ts.radius();
    let m = h.degree() + 2;
    // scale out the smallest decay so the adaptive tolerance stays relative
    let scale = (-margin * rho).exp();
    let v = integrate_adaptive(
        |p| {
            let t = w.ray_direction(p);
            let a = dot_c(z, &t);
            let x = a * rho;
            let mut term = Complex64::new(1.0, 0.0);
            let mut sum = term;
            for j in 1..m {
                term *= x / j as f64;
                sum += term;
            }
            h.eval(&t) * (-(x - margin * rho)).exp() * sum / a.powi(m as i32)
        },
        -phi0,
        phi0,
        LAPLACE_TOL,
        0.0,
    );
    Ok(v * factorial(m - 1) * scale)
}

/// Geometric decay-rate candidate `(R/2) cos(phi0 + beta/2)` for the tail.
pub fn tail_rate_candidate(ts: &TruncatedSector) -> f64 {
    let w = ts.base();
    0.5 * ts.radius() * (w.half_aperture() + 0.5 * w.beta()).cos()
}

fn check_spatial(h: &HarmonicHomogeneousPolynomial, z: &[Complex64]) -> Result<()> {
    if h.dim() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            got: h.dim(),
        });
    }
    if z.len() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            got: z.len(),
        });
    }
    Ok(())
}

/// `min Re(z . theta)` over the vertices and edge midpoints of the octant cap.
pub fn octant_domain_margin(cone: &OrthantCone, z: &[Complex64]) -> f64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let locals = [
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
        [s, s, 0.0],
        [s, 0.0, s],
        [0.0, s, s],
    ];
    locals
        .iter()
        .map(|l| dot_c(z, &cone.direction_from_local(*l)).re)
        .fold(f64::INFINITY, f64::min)
}

fn octant_cap_rule(h: &HarmonicHomogeneousPolynomial, cone: &OrthantCone, z: &[Complex64], nodes: usize) -> Complex64 {
    let power = -((h.degree() + 3) as i32);
    let polar = gauss_legendre_on(nodes, 0.0, FRAC_PI_2);
    let azimuth = gauss_legendre_on(nodes, 0.0, FRAC_PI_2);
    polar
        .par_iter()
        .map(|&(t, wt)| {
            let (st, ct) = t.sin_cos();
            azimuth
                .iter()
                .map(|&(p, wp)| {
                    let dir = cone.direction_from_local([st * p.cos(), st * p.sin(), ct]);
                    h.eval(&dir) * dot_c(z, &dir).powi(power) * (wt * wp * st)
                })
                .sum::<Complex64>()
        })
        .collect::<Vec<_>>()
        .iter()
        .sum()
}

/// Octant transform `(n+2)! int_cap h(theta) (z.theta)^{-(n+3)} dtheta` by a
/// product Gauss rule in spherical coordinates, doubled until two successive
/// rules agree to `1e-12`.
pub fn octant_laplace(h: &HarmonicHomogeneousPolynomial, cone: &OrthantCone, z: &[Complex64]) -> Result<Complex64> {
    check_spatial(h, z)?;
    let margin = octant_domain_margin(cone, z);
    if !(margin > 0.0) {
        return Err(Error::DomainCondition { min_real_part: margin });
    }
    if h.is_zero() {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let mut nodes = 24;
    let mut prev = octant_cap_rule(h, cone, z, nodes);
    loop {
        nodes *= 2;
        let next = octant_cap_rule(h, cone, z, nodes);
        if (next - prev).norm() <= LAPLACE_TOL * next.norm() || nodes >= 768 {
            return Ok(next * factorial(h.degree() + 2));
        }
        prev = next;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub tau: f64,
    pub phi: f64,
    pub branch: Branch,
    pub value: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub max_abs: f64,
    pub argmax: Option<ScanRow>,
    pub rows: Vec<ScanRow>,
}

/// `F(tau (omega + i omega_perp))` over a `(tau, phi)` grid and both branches,
/// with `phi` the angle from the bisector.
pub fn vanishing_scan(
    h: &HarmonicHomogeneousPolynomial,
    w: &SectorGeometry,
    taus: &[f64],
    phis: &[f64],
) -> Result<ScanReport> {
    if taus.is_empty() || phis.is_empty() {
        return Err(invalid("grid", "scan grids must be non-empty"));
    }
    let mut points = Vec::new();
    for &tau in taus {
        for &phi in phis {
            for branch in [Branch::Plus, Branch::Minus] {
                points.push((tau, phi, branch));
            }
        }
    }
    let rows: Vec<ScanRow> = points
        .par_iter()
        .map(|&(tau, phi, branch)| {
            let p = CgoParameters::for_sector(w, tau, 1.0, phi, branch)?.with_kind(RhoKind::Harmonic);
            let value = sector_laplace(h, w, &make_rho(&p))?;
            Ok(ScanRow {
                tau,
                phi,
                branch,
                value,
            })
        })
        .collect::<Result<_>>()?;
    let mut max_abs = 0.0;
    let mut argmax = None;
    for r in &rows {
        if r.value.norm() > max_abs || argmax.is_none() {
            max_abs = r.value.norm().max(max_abs);
            argmax = Some(*r);
        }
    }
    Ok(ScanReport { max_abs, argmax, rows })
}

/// `prod_j 2 sin(a xi_j) / xi_j`, the Fourier transform of the indicator of
/// `[-a, a]^3`.
pub fn cube_characteristic_fourier(xi: [f64; 3], half_width: f64) -> f64 {
    xi.iter().map(|&x| interval_fourier(x, half_width)).product()
}

/// `2 sin(a x) / x` with the removable singularity handled by its series.
pub fn interval_fourier(x: f64, a: f64) -> f64 {
    let t = a * x;
    if t.abs() < 1e-4 {
        2.0 * a * (1.0 - t * t / 6.0 * (1.0 - t * t / 20.0))
    } else {
        2.0 * (t).sin() / x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::least_squares_slope;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_6;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn one() -> HarmonicHomogeneousPolynomial {
        HarmonicHomogeneousPolynomial::planar(0, c(1.0, 0.0), c(0.0, 0.0)).unwrap()
    }

    // fourth-order central differences at step 1e-3
    fn laplacian_defect(h: &HarmonicHomogeneousPolynomial, x: &[f64]) -> f64 {
        let step = 1e-3;
        let mut lap = -30.0 * h.dim() as f64 * h.eval(x);
        for a in 0..h.dim() {
            for (off, w) in [(1.0, 16.0), (-1.0, 16.0), (2.0, -1.0), (-2.0, -1.0)] {
                let mut p = x.to_vec();
                p[a] += off * step;
                lap += h.eval(&p) * w;
            }
        }
        (lap / (12.0 * step * step)).norm()
    }

    #[test]
    fn bases_are_harmonic_and_homogeneous() {
        for n in 0..=8 {
            let h = HarmonicHomogeneousPolynomial::planar(n, c(0.7, 0.1), c(-0.3, 0.2)).unwrap();
            assert!(laplacian_defect(&h, &[0.3, -0.5]) <= 1e-8 * (n * n + 1) as f64 * 10.0);
            let x = [0.4, 0.9];
            assert!(
                (h.eval(&[2.0 * x[0], 2.0 * x[1]]) - h.eval(&x) * 2f64.powi(n as i32)).norm()
                    < 1e-12 * 2f64.powi(n as i32)
            );
            let coeffs: Vec<Complex64> = (0..2 * n + 1)
                .map(|j| c(1.0 / (j + 1) as f64, j as f64 * 0.1))
                .collect();
            let s = HarmonicHomogeneousPolynomial::spatial(n, coeffs).unwrap();
            let p = [0.3, -0.2, 0.5];
            let scale = s.coefficients().len() as f64 * factorial(2 * n) / factorial(n);
            assert!(laplacian_defect(&s, &p) <= 1e-7 * scale, "n={n}");
            let q = [0.6, -0.4, 1.0];
            assert!((s.eval(&q) - s.eval(&p) * 2f64.powi(n as i32)).norm() < 1e-10 * s.eval(&q).norm().max(1.0));
        }
        assert!(HarmonicHomogeneousPolynomial::planar(13, c(1.0, 0.0), c(0.0, 0.0)).is_err());
    }

    #[test]
    fn solid_harmonics_low_degree() {
        let x = [0.3, -0.7, 0.5];
        let y = solid_harmonics(1, &x);
        // order -1, 0, 1 -> y, z, x
        assert!((y[0] - x[1]).abs() < 1e-15 && (y[1] - x[2]).abs() < 1e-15 && (y[2] - x[0]).abs() < 1e-15);
        let y2 = solid_harmonics(2, &x);
        let r2 = x.iter().map(|v| v * v).sum::<f64>();
        assert!((y2[2] - (1.5 * x[2] * x[2] - 0.5 * r2)).abs() < 1e-14);
        assert!((y2[4] - 3.0 * (x[0] * x[0] - x[1] * x[1])).abs() < 1e-14);
    }

    #[test]
    fn extracts_bessel_zero() {
        let k = 2.0;
        let part = lowest_harmonic_part(
            |x| c(crate::specfun::bessel_j(0, k * x[0].hypot(x[1])).unwrap(), 0.0),
            k,
            6,
            0.3,
        )
        .unwrap();
        assert_eq!(part.polynomial.degree(), 0);
        assert!((part.polynomial.eval(&[0.1, 0.2]) - 1.0).norm() < 1e-10);
        assert!(part.remainder_scale < 0.1);
    }

    #[test]
    fn extracts_third_order_mode() {
        let k = 1.5;
        let mode = FourierBesselMode::new(k, 3, c(0.5, -1.0)).unwrap();
        let part = lowest_harmonic_part(|x| mode.eval(x).unwrap(), k, 8, 0.4).unwrap();
        assert_eq!(part.polynomial.degree(), 3);
        let expect = HarmonicHomogeneousPolynomial::from_mode(&mode).unwrap();
        for (a, b) in part.polynomial.coefficients().iter().zip(expect.coefficients()) {
            assert!((a - b).norm() < 1e-10 * b.norm());
        }
        let z = c(0.3, 0.2);
        let direct = c(0.5, -1.0) * (0.5 * k).powi(3) / 6.0 * z.powu(3);
        assert!((part.polynomial.eval(&[0.3, 0.2]) - direct).norm() < 1e-12);
        // negative order uses the conjugate power
        let neg = FourierBesselMode::new(k, -3, c(1.0, 0.0)).unwrap();
        let part = lowest_harmonic_part(|x| neg.eval(x).unwrap(), k, 8, 0.4).unwrap();
        let lead = HarmonicHomogeneousPolynomial::from_mode(&neg).unwrap();
        let e = -(0.5 * k).powi(3) / 6.0 * z.conj().powu(3);
        assert!((lead.eval(&[0.3, 0.2]) - e).norm() < 1e-14);
        assert!((part.polynomial.eval(&[0.3, 0.2]) - e).norm() < 1e-10);
    }

    #[test]
    fn extraction_errors() {
        assert!(matches!(
            lowest_harmonic_part(|_| c(0.0, 0.0), 1.0, 4, 0.5),
            Err(Error::NumericallyZero)
        ));
        let mode = FourierBesselMode::new(1.0, 5, c(1.0, 0.0)).unwrap();
        assert!(matches!(
            lowest_harmonic_part(|x| mode.eval(x).unwrap(), 1.0, 3, 0.5),
            Err(Error::DegreeExceeded { n_max: 3 })
        ));
    }

    #[test]
    fn closed_form_anchor() {
        let w = SectorGeometry::canonical(FRAC_PI_6).unwrap();
        let f = sector_laplace(&one(), &w, &[c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert!((f.re - 2.0 / 3f64.sqrt()).abs() < 1e-10 && f.im.abs() < 1e-12);
        assert!((f.re - 1.1547005).abs() < 1e-7);
    }

    #[test]
    fn matches_brute_force_area_integral() {
        // oracle: polar tensor Gauss rule of exp(-z.x) H(x) over r in [0, 40]
        let w = SectorGeometry::canonical(0.4).unwrap();
        let h = HarmonicHomogeneousPolynomial::planar(2, c(1.0, 0.5), c(-0.2, 0.0)).unwrap();
        let z = [c(2.0, 0.7), c(0.3, -1.1)];
        let f = sector_laplace(&h, &w, &z).unwrap();
        let mut s = c(0.0, 0.0);
        for (r, wr) in gauss_legendre_on(400, 0.0, 40.0) {
            for (p, wp) in gauss_legendre_on(64, -0.4, 0.4) {
                let x = [r * p.cos(), r * p.sin()];
                s += (-(z[0] * x[0] + z[1] * x[1])).exp() * h.eval(&x) * (r * wr * wp);
            }
        }
        assert!((f - s).norm() < 1e-9 * f.norm());
    }

    #[test]
    fn domain_condition_enforced() {
        let w = SectorGeometry::canonical(FRAC_PI_6).unwrap();
        let z = [c(-1.0, 0.0), c(0.0, 0.0)];
        assert!(matches!(
            sector_laplace(&one(), &w, &z),
            Err(Error::DomainCondition { .. })
        ));
        let z = [c(0.1, 0.0), c(1.0, 0.0)];
        assert!(sector_laplace(&one(), &w, &z).is_err());
    }

    #[test]
    fn truncation_behaviour() {
        let w = SectorGeometry::canonical(FRAC_PI_6).unwrap();
        let h = HarmonicHomogeneousPolynomial::planar(1, c(1.0, 0.0), c(0.0, 0.0)).unwrap();
        let z = [c(3.0, 0.0), c(0.0, 2.0)];
        let full = sector_laplace(&h, &w, &z).unwrap();
        let mut prev = f64::INFINITY;
        for r in [1.0, 2.0, 4.0, 8.0] {
            let ts = TruncatedSector::new(w, r).unwrap();
            let t = truncated_sector_laplace(&h, &ts, &z).unwrap();
            let tail = sector_laplace_tail(&h, &ts, &z).unwrap();
            assert!((t + tail - full).norm() < 1e-11 * full.norm());
            assert!((full - t).norm() < prev);
            prev = (full - t).norm();
        }
        let ts = TruncatedSector::new(w, 1.0).unwrap();
        assert_eq!(
            truncated_sector_laplace(&HarmonicHomogeneousPolynomial::zero(2, 3).unwrap(), &ts, &z).unwrap(),
            c(0.0, 0.0)
        );
    }

    #[test]
    fn tail_decays_at_geometric_rate() {
        let ts = TruncatedSector::new(SectorGeometry::canonical(FRAC_PI_6).unwrap(), 1.0).unwrap();
        let edge = 0.5 * ts.base().beta() * (1.0 - 1e-3);
        let taus = [400.0, 500.0, 600.0, 700.0, 800.0];
        for n in 0..3 {
            let h = HarmonicHomogeneousPolynomial::planar(n, c(1.0, 0.0), c(0.0, 0.0)).unwrap();
            let logs: Vec<f64> = taus
                .iter()
                .map(|&tau| {
                    let p = CgoParameters::for_sector(ts.base(), tau, 1.0, edge, Branch::Plus).unwrap();
                    sector_laplace_tail(&h, &ts, &make_rho(&p)).unwrap().norm().ln()
                })
                .collect();
            let slope = least_squares_slope(&taus, &logs);
            let cand = tail_rate_candidate(&ts);
            assert!(
                slope < 0.0 && (slope + cand).abs() < 0.05 * cand,
                "n={n}: {slope} vs {cand}"
            );
        }
    }

    #[test]
    fn scan_detects_nonzero_polynomials() {
        let w = SectorGeometry::canonical(FRAC_PI_6).unwrap();
        let lim = 0.5 * w.beta();
        let taus: Vec<f64> = (0..32).map(|i| 1.0 + i as f64).collect();
        let phis: Vec<f64> = (0..32).map(|i| -lim + 2.0 * lim * (i as f64 + 0.5) / 32.0).collect();
        let h = HarmonicHomogeneousPolynomial::planar(1, c(1.0, 0.0), c(0.0, 0.0)).unwrap();
        let r = vanishing_scan(&h, &w, &taus, &phis).unwrap();
        assert!(r.max_abs > 1e-3);
        assert_eq!(r.rows.len(), 32 * 32 * 2);
        let r2 = vanishing_scan(&h.scaled(c(2.0, 0.0)), &w, &taus, &phis).unwrap();
        assert!((r2.max_abs - 2.0 * r.max_abs).abs() < 1e-12 * r.max_abs);
        let z = vanishing_scan(&HarmonicHomogeneousPolynomial::zero(2, 1).unwrap(), &w, &taus, &phis).unwrap();
        assert_eq!(z.max_abs, 0.0);
        assert!(vanishing_scan(&h, &w, &[], &phis).is_err());
    }

    #[test]
    fn cube_transform_values() {
        assert_eq!(cube_characteristic_fourier([0.0; 3], 1.0), 8.0);
        let h = FRAC_PI_2;
        let v = cube_characteristic_fourier([h, h, h], 1.0);
        assert!((v - 64.0 / PI.powi(3)).abs() < 1e-14);
        assert!((v - 2.0641).abs() < 1e-4);
        assert!(cube_characteristic_fourier([PI, 1e-9, 1e-9], 1.0).abs() < 1e-14);
        // one-dimensional factors against a numerical cosine integral
        for x in [1e-6, 0.3, 2.0, 7.5] {
            let q: f64 = gauss_legendre_on(80, -1.0, 1.0)
                .iter()
                .map(|(t, w)| w * (x * t).cos())
                .sum();
            assert!((interval_fourier(x, 1.0) - q).abs() < 1e-13);
        }
        // series and direct branches meet
        let a = interval_fourier(0.99999e-4, 1.0);
        let b = 2.0 * (1.00001e-4f64).sin() / 1.00001e-4;
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn octant_transform_anchor() {
        // n = 0: int_octant e^{-x1-x2-x3} = 1
        let cone = OrthantCone::canonical();
        let h = HarmonicHomogeneousPolynomial::spatial(0, vec![c(1.0, 0.0)]).unwrap();
        let z = [c(1.0, 0.0); 3];
        assert!((octant_laplace(&h, &cone, &z).unwrap() - 1.0).norm() < 1e-11);
        // H = x1 x2 (order -2 is 3 (x^2 - y^2) rotated; use order 2 pieces) via a degree-1 check
        let h1 = HarmonicHomogeneousPolynomial::spatial(1, vec![c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        let z = [c(2.0, 0.0), c(1.0, 0.0), c(4.0, 0.0)];
        // int x1 e^{-z.x} = 1/(z1^2 z2 z3)
        assert!((octant_laplace(&h1, &cone, &z).unwrap() - 1.0 / 16.0).norm() < 1e-12);
        assert!(octant_laplace(&h1, &cone, &[c(-1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)]).is_err());
    }

    fn admissible_z(a: f64, tau: f64, im: (f64, f64)) -> [Complex64; 2] {
        // real part inside the dual cone of the sector
        let phi = a * 0.5 * (FRAC_PI_2 - FRAC_PI_6);
        [c(tau * phi.cos(), im.0), c(tau * phi.sin(), im.1)]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn homogeneity_2d(n in 0usize..=6, a in -0.99f64..0.99, tau in 0.2f64..20.0, i0 in -10.0f64..10.0, i1 in -10.0f64..10.0) {
            let w = SectorGeometry::canonical(FRAC_PI_6).unwrap();
            let h = HarmonicHomogeneousPolynomial::planar(n, c(1.0, 0.3), c(-0.5, 0.8)).unwrap();
            let z = admissible_z(a, tau, (i0, i1));
            let f = sector_laplace(&h, &w, &z).unwrap();
            for lambda in [0.5, 2.0, 10.0] {
                let zl = [z[0] * lambda, z[1] * lambda];
                let fl = sector_laplace(&h, &w, &zl).unwrap();
                prop_assert!((fl - f * lambda.powi(-(n as i32) - 2)).norm() <= 1e-9 * (1.0 + f.norm()));
            }
        }

        #[test]
        fn linear_in_polynomial(n in 0usize..=4, a in -0.9f64..0.9, i0 in -3.0f64..3.0) {
            let w = SectorGeometry::canonical(0.7).unwrap();
            let z = [c(2.0 * a.cos(), i0), c(2.0 * a.sin() * 0.2, 1.0)];
            prop_assume!(sector_domain_margin(&w, &z) > 0.05);
            let h1 = HarmonicHomogeneousPolynomial::planar(n, c(1.0, 0.0), c(0.0, 0.0)).unwrap();
            let h2 = HarmonicHomogeneousPolynomial::planar(n, c(0.0, 0.0), c(0.0, 1.0)).unwrap();
            let h3 = HarmonicHomogeneousPolynomial::planar(n, c(2.0, 0.0), c(0.0, -3.0)).unwrap();
            let f1 = sector_laplace(&h1, &w, &z).unwrap();
            let f2 = sector_laplace(&h2, &w, &z).unwrap();
            let f3 = sector_laplace(&h3, &w, &z).unwrap();
            prop_assert!((f3 - (f1 * 2.0 - f2 * 3.0)).norm() <= 1e-10 * (1.0 + f3.norm()));
        }

        #[test]
        fn rotational_covariance(n in 0usize..=5, angle in -3.0f64..3.0, a in -0.9f64..0.9, i0 in -3.0f64..3.0) {
            let w = SectorGeometry::canonical(FRAC_PI_6).unwrap();
            let h = HarmonicHomogeneousPolynomial::planar(n, c(0.4, 0.1), c(1.0, -0.2)).unwrap();
            let z = admissible_z(a, 3.0, (i0, 0.5));
            let f = sector_laplace(&h, &w, &z).unwrap();
            let wr = SectorGeometry::new([0.0, 0.0], FRAC_PI_6, angle).unwrap();
            let (cs, sn) = (angle.cos(), angle.sin());
            let zr = [z[0] * cs - z[1] * sn, z[0] * sn + z[1] * cs];
            let fr = sector_laplace(&h.rotated(angle).unwrap(), &wr, &zr).unwrap();
            prop_assert!((fr - f).norm() <= 1e-10 * (1.0 + f.norm()));
        }

        #[test]
        fn homogeneity_3d(n in 0usize..=3, t in 0.0f64..0.4, p in 0.0f64..std::f64::consts::TAU, tau in 0.5f64..5.0, i0 in -2.0f64..2.0) {
            let cone = OrthantCone::canonical();
            let coeffs: Vec<Complex64> = (0..2 * n + 1).map(|j| c(1.0 - 0.1 * j as f64, 0.2)).collect();
            let h = HarmonicHomogeneousPolynomial::spatial(n, coeffs).unwrap();
            let a = crate::cgo::octant_axis();
            // tilt the axis slightly and add an imaginary part
            let d = [a[0] + t * p.cos(), a[1] + t * p.sin(), a[2] - t * 0.3];
            let z = [c(tau * d[0], i0), c(tau * d[1], -i0), c(tau * d[2], 0.5)];
            prop_assume!(octant_domain_margin(&cone, &z) > 0.1 * tau);
            let f = octant_laplace(&h, &cone, &z).unwrap();
            let zl: Vec<Complex64> = z.iter().map(|v| v * 2.0).collect();
            let fl = octant_laplace(&h, &cone, &zl).unwrap();
            prop_assert!((fl - f * 2f64.powi(-(n as i32) - 3)).norm() <= 1e-9 * (1.0 + f.norm()));
        }
    }
}
