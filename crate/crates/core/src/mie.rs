//! Separation-of-variables series for plane-wave scattering by a disk or
//! ball of constant index.
//!
//! Per mode the total field is `c_n J_n(k1 r)` inside and
//! `J_n(k r) + b_n H_n(k r)` outside (times `i^n e^{in(theta - theta_d)}` in
//! 2D, `(2n+1) i^n P_n(cos gamma)` in 3D), with `k1 = k sqrt(q0)`. Value and
//! radial derivative continuity give, with
//! `D = k J_n(k1 a) H_n'(k a) - k1 J_n'(k1 a) H_n(k a)`,
//!
//! `b_n = (k1 J_n'(k1 a) J_n(k a) - k J_n(k1 a) J_n'(k a)) / D`,
//! `c_n = k (J_n H_n' - J_n' H_n)(k a) / D`,
//!
//! and the same with spherical functions in 3D.

use crate::error::{invalid, Error, Result};
use crate::incident::DirectionRule;
use crate::lsolver::FarFieldPattern;
use crate::specfun::{bessel_j_seq, bessel_jy_seq, spherical_jy_seq};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MieScene {
    pub dim: usize,
    pub radius: f64,
    pub q0: f64,
    pub k: f64,
    pub center: Vec<f64>,
}

/// Per-mode exterior (`b`) and interior (`c`) coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeCoefficients {
    pub scattered: Complex64,
    pub interior: Complex64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `z_n'` from `z_0..z_{n+1}` (cylinder functions).
fn cyl_derivative(z: &[f64], n: usize, x: f64) -> f64 {
    if n == 0 {
        -z[1]
    } else {
        z[n - 1] - n as f64 / x * z[n]
    }
}

/// `z_n'` for spherical functions.
fn sph_derivative(z: &[f64], n: usize, x: f64) -> f64 {
    if n == 0 {
        -z[1]
    } else {
        z[n - 1] - (n + 1) as f64 / x * z[n]
    }
}

/// Legendre polynomials `P_0..P_nmax` at `t`.
fn legendre(nmax: usize, t: f64) -> Vec<f64> {
    let mut p = vec![1.0, t];
    for n in 1..nmax {
        let next = ((2 * n + 1) as f64 * t * p[n] - n as f64 * p[n - 1]) / (n + 1) as f64;
        p.push(next);
    }
    p.truncate(nmax + 1);
    p
}

impl MieScene {
    pub fn disk(radius: f64, q0: f64, k: f64) -> Result<Self> {
        Self::new(2, radius, q0, k, vec![0.0, 0.0])
    }

    pub fn ball(radius: f64, q0: f64, k: f64) -> Result<Self> {
        Self::new(3, radius, q0, k, vec![0.0, 0.0, 0.0])
    }

    pub fn new(dim: usize, radius: f64, q0: f64, k: f64, center: Vec<f64>) -> Result<Self> {
        if !(2..=3).contains(&dim) || center.len() != dim {
            return Err(invalid("dim", "scene must be 2D or 3D with a matching centre"));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(invalid("radius", format!("{radius} must be positive")));
        }
        if !(q0 > 0.0 && q0.is_finite()) {
            return Err(invalid("q0", format!("index {q0} must be positive and real")));
        }
        if !(k > 0.0 && k.is_finite()) {
            return Err(invalid("k", format!("wavenumber {k} must be positive")));
        }
        Ok(MieScene {
            dim,
            radius,
            q0,
            k,
            center,
        })
    }

    pub fn with_center(self, center: Vec<f64>) -> Result<Self> {
        Self::new(self.dim, self.radius, self.q0, self.k, center)
    }

    pub fn interior_wavenumber(&self) -> f64 {
        self.k * self.q0.sqrt()
    }

    /// `ka + 4 (ka)^{1/3} + 10` with the larger of the two wavenumbers.
    pub fn mode_count(&self) -> usize {
        let ka = self.k.max(self.interior_wavenumber()) * self.radius;
        (ka + 4.0 * ka.cbrt() + 10.0).ceil() as usize
    }

    /// Coefficients for orders `0..=n_modes`.
    pub fn coefficients(&self, n_modes: usize) -> Result<Vec<ModeCoefficients>> {
        let k = self.k;
        let k1 = self.interior_wavenumber();
        let x = k * self.radius;
        let x1 = k1 * self.radius;
        let (j, y, j1) = if self.dim == 2 {
            let (j, y) = bessel_jy_seq(n_modes + 1, x)?;
            (j, y, bessel_j_seq(n_modes + 1, x1)?)
        } else {
            let (j, y) = spherical_jy_seq(n_modes + 1, x)?;
            (j, y, spherical_jy_seq(n_modes + 1, x1)?.0)
        };
        let deriv = if self.dim == 2 { cyl_derivative } else { sph_derivative };
        let wronskian = if self.dim == 2 {
            Complex64::new(0.0, 2.0 / (PI * x))
        } else {
            Complex64::new(0.0, 1.0 / (x * x))
        };
        (0..=n_modes)
            .map(|n| {
                if self.q0 == 1.0 {
                    return Ok(ModeCoefficients {
                        scattered: Complex64::new(0.0, 0.0),
                        interior: Complex64::new(1.0, 0.0),
                    });
                }
                let jn = j[n];
                let jpn = deriv(&j, n, x);
                let hn = Complex64::new(j[n], y[n]);
                let hpn = Complex64::new(jpn, deriv(&y, n, x));
                let j1n = j1[n];
                let j1pn = deriv(&j1, n, x1);
                let det = k * j1n * hpn - k1 * j1pn * hn;
                if !(det.norm() > 0.0) || !det.re.is_finite() || !det.im.is_finite() {
                    if det.norm().is_infinite() {
                        // Y_n overflow: the mode is negligible
                        return Ok(ModeCoefficients {
                            scattered: Complex64::new(0.0, 0.0),
                            interior: Complex64::new(0.0, 0.0),
                        });
                    }
                    return Err(Error::SingularMode { order: n as i64 });
                }
                Ok(ModeCoefficients {
                    scattered: (k1 * j1pn * jn - k * j1n * jpn) / det,
                    interior: k * wronskian / det,
                })
            })
            .collect()
    }

    fn check_direction(&self, d: &[f64]) -> Result<Vec<f64>> {
        if d.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: d.len(),
            });
        }
        let n = dot(d, d).sqrt();
        if !(n > 0.0) {
            return Err(invalid("d", "incident direction must be nonzero"));
        }
        Ok(d.iter().map(|v| v / n).collect())
    }

    /// Far-field value for incidence `d` and observation `xhat`, centred scene.
    fn centred_far_field(&self, coeffs: &[ModeCoefficients], d: &[f64], xhat: &[f64]) -> Complex64 {
        let k = self.k;
        let cos_g = dot(d, xhat).clamp(-1.0, 1.0);
        if self.dim == 2 {
            let angle = cos_g.acos();
            let mut sum = coeffs[0].scattered;
            for (n, c) in coeffs.iter().enumerate().skip(1) {
                sum += 2.0 * c.scattered * (n as f64 * angle).cos();
            }
            Complex64::from_polar((2.0 / (PI * k)).sqrt(), -PI / 4.0) * sum
        } else {
            let p = legendre(coeffs.len() - 1, cos_g);
            let sum: Complex64 = coeffs
                .iter()
                .enumerate()
                .map(|(n, c)| c.scattered * ((2 * n + 1) as f64 * p[n]))
                .sum();
            -I / k * sum
        }
    }

    /// Phase `e^{ik (d - xhat).c}` from moving the scatterer to its centre.
    fn translation_phase(&self, d: &[f64], xhat: &[f64]) -> Complex64 {
        let s: f64 = d
            .iter()
            .zip(xhat)
            .zip(&self.center)
            .map(|((a, b), c)| (a - b) * c)
            .sum();
        Complex64::from_polar(1.0, self.k * s)
    }

    pub fn far_field_at(&self, d: &[f64], xhat: &[f64]) -> Result<Complex64> {
        let d = self.check_direction(d)?;
        let xhat = self.check_direction(xhat)?;
        let coeffs = self.coefficients(self.mode_count())?;
        Ok(self.translation_phase(&d, &xhat) * self.centred_far_field(&coeffs, &d, &xhat))
    }

    fn far_field_with_modes(&self, d: &[f64], rule: &DirectionRule, n_modes: usize) -> Result<FarFieldPattern> {
        let d = self.check_direction(d)?;
        if rule.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: rule.dim(),
            });
        }
        let coeffs = self.coefficients(n_modes)?;
        let values = rule
            .directions()
            .iter()
            .map(|x| self.translation_phase(&d, x) * self.centred_far_field(&coeffs, &d, x))
            .collect();
        FarFieldPattern::new(self.k, rule.clone(), values)
    }

    /// Interior series at `x` (local frame), without the translation phase.
    fn interior_series(&self, coeffs: &[ModeCoefficients], d: &[f64], local: &[f64]) -> Result<Complex64> {
        let r = dot(local, local).sqrt();
        let k1 = self.interior_wavenumber();
        let nmax = coeffs.len() - 1;
        if self.dim == 2 {
            let j = bessel_j_seq(nmax, k1 * r)?;
            let angle = angle_between_2d(d, local);
            Ok(cyl_sum(coeffs.iter().map(|c| c.interior), &j, angle))
        } else {
            let j = if r == 0.0 {
                let mut v = vec![0.0; nmax + 1];
                v[0] = 1.0;
                v
            } else {
                spherical_jy_seq(nmax, k1 * r)?.0
            };
            let cos_g = if r == 0.0 { 1.0 } else { dot(d, local) / r };
            Ok(sph_sum(coeffs.iter().map(|c| c.interior), &j, cos_g))
        }
    }

    /// Scattered series at `x` (local frame, `r > 0`).
    fn scattered_series(&self, coeffs: &[ModeCoefficients], d: &[f64], local: &[f64]) -> Result<Complex64> {
        let r = dot(local, local).sqrt();
        let nmax = coeffs.len() - 1;
        if self.dim == 2 {
            let (j, y) = bessel_jy_seq(nmax, self.k * r)?;
            let angle = angle_between_2d(d, local);
            let mut sum = Complex64::new(0.0, 0.0);
            for (n, c) in coeffs.iter().enumerate() {
                let h = Complex64::new(j[n], y[n]);
                let term = I.powu(n as u32) * c.scattered * h;
                sum += if n == 0 {
                    term
                } else {
                    2.0 * term * (n as f64 * angle).cos()
                };
            }
            Ok(sum)
        } else {
            let (j, y) = spherical_jy_seq(nmax, self.k * r)?;
            let p = legendre(nmax, dot(d, local) / r);
            Ok(coeffs
                .iter()
                .enumerate()
                .map(|(n, c)| I.powu(n as u32) * c.scattered * Complex64::new(j[n], y[n]) * ((2 * n + 1) as f64 * p[n]))
                .sum())
        }
    }

    fn total_field_with(&self, coeffs: &[ModeCoefficients], d: &[f64], x: &[f64], inside: bool) -> Result<Complex64> {
        let local: Vec<f64> = x.iter().zip(&self.center).map(|(a, c)| a - c).collect();
        let phase = Complex64::from_polar(1.0, self.k * dot(d, &self.center));
        if inside {
            Ok(phase * self.interior_series(coeffs, d, &local)?)
        } else {
            let inc = Complex64::from_polar(1.0, self.k * dot(d, x));
            Ok(inc + phase * self.scattered_series(coeffs, d, &local)?)
        }
    }
}

fn angle_between_2d(d: &[f64], x: &[f64]) -> f64 {
    x[1].atan2(x[0]) - d[1].atan2(d[0])
}

fn cyl_sum<It: Iterator<Item = Complex64>>(coeffs: It, j: &[f64], angle: f64) -> Complex64 {
    let mut sum = Complex64::new(0.0, 0.0);
    for (n, c) in coeffs.enumerate() {
        let term = I.powu(n as u32) * c * j[n];
        sum += if n == 0 {
            term
        } else {
            2.0 * term * (n as f64 * angle).cos()
        };
    }
    sum
}

fn sph_sum<It: Iterator<Item = Complex64>>(coeffs: It, j: &[f64], cos_g: f64) -> Complex64 {
    let c: Vec<Complex64> = coeffs.collect();
    let p = legendre(c.len() - 1, cos_g.clamp(-1.0, 1.0));
    c.iter()
        .enumerate()
        .map(|(n, cn)| I.powu(n as u32) * cn * (j[n] * (2 * n + 1) as f64 * p[n]))
        .sum()
}

/// Far-field pattern of the scene for incidence `d` on a direction rule.
pub fn mie_far_field(scene: &MieScene, d: &[f64], directions: &DirectionRule) -> Result<FarFieldPattern> {
    scene.far_field_with_modes(d, directions, scene.mode_count())
}

/// Far-field pattern with an explicit truncation order.
pub fn mie_far_field_truncated(
    scene: &MieScene,
    d: &[f64],
    directions: &DirectionRule,
    n_modes: usize,
) -> Result<FarFieldPattern> {
    scene.far_field_with_modes(d, directions, n_modes)
}

/// Total field: interior series inside the disk/ball, incident plus
/// scattered series outside.
pub fn mie_total_field(scene: &MieScene, d: &[f64], x: &[f64]) -> Result<Complex64> {
    let d = scene.check_direction(d)?;
    if x.len() != scene.dim {
        return Err(Error::DimensionMismatch {
            expected: scene.dim,
            got: x.len(),
        });
    }
    if scene.q0 == 1.0 {
        return Ok(Complex64::from_polar(1.0, scene.k * dot(&d, x)));
    }
    let coeffs = scene.coefficients(scene.mode_count())?;
    let r: f64 = x
        .iter()
        .zip(&scene.center)
        .map(|(a, c)| (a - c) * (a - c))
        .sum::<f64>()
        .sqrt();
    scene.total_field_with(&coeffs, &d, x, r < scene.radius)
}
