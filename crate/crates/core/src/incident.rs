//! Incident fields: plane waves, Herglotz waves, point sources, and
//! Fourier-Bessel modes used as exact interior Helmholtz solutions.

use crate::error::{invalid, Error, Result};
use crate::quad::gauss_legendre;
use crate::specfun::{bessel_j_seq, distance, green, hankel1_01};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_point(x: &[f64], dim: usize) -> Result<()> {
    if x.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: x.len(),
        });
    }
    Ok(())
}

/// Quadrature rule on the unit circle or sphere.
///
/// In 2D, `m` uniform angles `theta_j = 2 pi j / m` with weight `2 pi / m`.
/// In 3D, `m` Gauss-Legendre nodes in `cos(theta)` times `2m` uniform
/// azimuths; `angles` then holds `(theta, phi)` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionRule {
    dim: usize,
    directions: Vec<Vec<f64>>,
    weights: Vec<f64>,
    angles: Vec<Vec<f64>>,
}

impl DirectionRule {
    pub fn circle(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(invalid("m", "need at least one direction"));
        }
        let w = 2.0 * PI / m as f64;
        let mut directions = Vec::with_capacity(m);
        let mut angles = Vec::with_capacity(m);
        for j in 0..m {
            let t = w * j as f64;
            directions.push(vec![t.cos(), t.sin()]);
            angles.push(vec![t]);
        }
        Ok(DirectionRule {
            dim: 2,
            directions,
            weights: vec![w; m],
            angles,
        })
    }

    /// Product rule with `m` polar and `2m` azimuthal nodes, polar angle
    /// increasing and azimuth fastest.
    pub fn sphere(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(invalid("m", "need at least one direction"));
        }
        let (x, w) = gauss_legendre(m);
        let n_phi = 2 * m;
        let dphi = 2.0 * PI / n_phi as f64;
        let mut directions = Vec::with_capacity(m * n_phi);
        let mut weights = Vec::with_capacity(m * n_phi);
        let mut angles = Vec::with_capacity(m * n_phi);
        // Gauss nodes ascend in cos(theta); walk them backwards so theta ascends
        for i in (0..m).rev() {
            let ct = x[i];
            let st = (1.0 - ct * ct).max(0.0).sqrt();
            let theta = ct.acos();
            for j in 0..n_phi {
                let phi = dphi * j as f64;
                directions.push(vec![st * phi.cos(), st * phi.sin(), ct]);
                weights.push(w[i] * dphi);
                angles.push(vec![theta, phi]);
            }
        }
        Ok(DirectionRule {
            dim: 3,
            directions,
            weights,
            angles,
        })
    }

    /// Circle rule in 2D, sphere rule in 3D.
    pub fn for_dim(dim: usize, m: usize) -> Result<Self> {
        match dim {
            2 => Self::circle(m),
            3 => Self::sphere(m),
            _ => Err(invalid("dim", format!("{dim} is not 2 or 3"))),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn directions(&self) -> &[Vec<f64>] {
        &self.directions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `theta` in 2D, `(theta, phi)` in 3D.
    pub fn angles(&self) -> &[Vec<f64>] {
        &self.angles
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IncidentKind {
    Plane {
        direction: Vec<f64>,
    },
    Herglotz {
        rule: DirectionRule,
        density: Vec<Complex64>,
    },
    PointSource {
        source: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncidentWave {
    k: f64,
    dim: usize,
    kind: IncidentKind,
}

fn check_k(k: f64) -> Result<()> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(invalid("k", format!("wavenumber {k} must be positive")));
    }
    Ok(())
}

impl IncidentWave {
    /// `e^{ik x.d}`; `d` is normalized, zero vectors are rejected.
    pub fn plane(k: f64, direction: &[f64]) -> Result<Self> {
        check_k(k)?;
        let dim = direction.len();
        if !(2..=3).contains(&dim) {
            return Err(invalid("direction", "direction must have 2 or 3 components"));
        }
        let norm = dot(direction, direction).sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(invalid("direction", "direction must be a nonzero finite vector"));
        }
        Ok(IncidentWave {
            k,
            dim,
            kind: IncidentKind::Plane {
                direction: direction.iter().map(|v| v / norm).collect(),
            },
        })
    }

    /// Plane wave in 2D from a direction angle.
    pub fn plane_at_angle(k: f64, angle: f64) -> Result<Self> {
        Self::plane(k, &[angle.cos(), angle.sin()])
    }

    /// `Phi(x, z)`, the fundamental solution itself.
    pub fn point_source(k: f64, source: &[f64]) -> Result<Self> {
        check_k(k)?;
        let dim = source.len();
        if !(2..=3).contains(&dim) {
            return Err(invalid("source", "source must have 2 or 3 components"));
        }
        Ok(IncidentWave {
            k,
            dim,
            kind: IncidentKind::PointSource {
                source: source.to_vec(),
            },
        })
    }

    /// Herglotz wave with density samples on a given rule.
    pub fn herglotz(k: f64, rule: DirectionRule, density: Vec<Complex64>) -> Result<Self> {
        check_k(k)?;
        if density.len() != rule.len() {
            return Err(Error::DimensionMismatch {
                expected: rule.len(),
                got: density.len(),
            });
        }
        if density.iter().any(|g| !g.re.is_finite() || !g.im.is_finite()) {
            return Err(invalid("density", "Herglotz density must be finite"));
        }
        Ok(IncidentWave {
            k,
            dim: rule.dim(),
            kind: IncidentKind::Herglotz { rule, density },
        })
    }

    /// Herglotz wave with density `g` evaluated on the default rule.
    pub fn herglotz_from_fn<G: Fn(&[f64]) -> Complex64>(k: f64, dim: usize, m: usize, g: G) -> Result<Self> {
        if m < 8 {
            return Err(invalid("m", format!("{m} samples; at least 8 are required")));
        }
        let rule = DirectionRule::for_dim(dim, m)?;
        let density = rule.directions().iter().map(|d| g(d)).collect();
        Self::herglotz(k, rule, density)
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &IncidentKind {
        &self.kind
    }

    /// Same wave at another wavenumber.
    pub fn with_k(&self, k: f64) -> Result<Self> {
        check_k(k)?;
        Ok(IncidentWave { k, ..self.clone() })
    }

    pub fn eval(&self, x: &[f64]) -> Result<Complex64> {
        check_point(x, self.dim)?;
        let k = self.k;
        match &self.kind {
            IncidentKind::Plane { direction } => Ok(Complex64::from_polar(1.0, k * dot(x, direction))),
            IncidentKind::Herglotz { rule, density } => Ok(rule
                .directions()
                .iter()
                .zip(rule.weights())
                .zip(density)
                .map(|((d, w), g)| Complex64::from_polar(*w, k * dot(x, d)) * g)
                .sum()),
            IncidentKind::PointSource { source } => green(k, x, source, self.dim),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<Complex64>> {
        check_point(x, self.dim)?;
        let k = self.k;
        match &self.kind {
            IncidentKind::Plane { direction } => {
                let u = I * k * Complex64::from_polar(1.0, k * dot(x, direction));
                Ok(direction.iter().map(|d| u * d).collect())
            }
            IncidentKind::Herglotz { rule, density } => {
                let mut g = vec![Complex64::new(0.0, 0.0); self.dim];
                for ((d, w), dens) in rule.directions().iter().zip(rule.weights()).zip(density) {
                    let u = I * k * Complex64::from_polar(*w, k * dot(x, d)) * dens;
                    for (gc, dc) in g.iter_mut().zip(d) {
                        *gc += u * dc;
                    }
                }
                Ok(g)
            }
            IncidentKind::PointSource { source } => {
                let r = distance(x, source);
                if r == 0.0 {
                    return Err(Error::SingularPoint);
                }
                // radial derivative of the fundamental solution
                let dr = if self.dim == 2 {
                    let (_, h1) = hankel1_01(k * r);
                    -0.25 * I * k * h1
                } else {
                    Complex64::from_polar(1.0 / (4.0 * PI * r), k * r) * (I * k * r - 1.0) / r
                };
                Ok(x.iter().zip(source).map(|(a, b)| dr * ((a - b) / r)).collect())
            }
        }
    }
}

/// Evaluates an incident wave at `x`.
pub fn eval_incident(w: &IncidentWave, x: &[f64]) -> Result<Complex64> {
    w.eval(x)
}

/// Herglotz wave from samples at `M` uniform angles on the circle.
pub fn herglotz_from_samples(samples: &[Complex64], k: f64) -> Result<IncidentWave> {
    if samples.len() < 8 {
        return Err(invalid(
            "samples",
            format!("{} samples; at least 8 are required", samples.len()),
        ));
    }
    IncidentWave::herglotz(k, DirectionRule::circle(samples.len())?, samples.to_vec())
}

/// Herglotz wave in 3D from samples on the `M x 2M` sphere rule
/// (polar index slow, azimuth fast).
pub fn herglotz_from_sphere_samples(samples: &[Complex64], m: usize, k: f64) -> Result<IncidentWave> {
    if m < 8 {
        return Err(invalid("m", format!("{m} polar nodes; at least 8 are required")));
    }
    IncidentWave::herglotz(k, DirectionRule::sphere(m)?, samples.to_vec())
}

/// `amplitude * J_n(kr) e^{i n phi}` in the plane, centred at `center`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourierBesselMode {
    pub k: f64,
    pub order: i64,
    pub amplitude: Complex64,
    pub center: [f64; 2],
}

impl FourierBesselMode {
    pub fn new(k: f64, order: i64, amplitude: Complex64) -> Result<Self> {
        check_k(k)?;
        Ok(FourierBesselMode {
            k,
            order,
            amplitude,
            center: [0.0, 0.0],
        })
    }

    pub fn centered_at(self, center: [f64; 2]) -> Self {
        FourierBesselMode { center, ..self }
    }

    /// Degree of the lowest nonvanishing Taylor term.
    pub fn leading_degree(&self) -> usize {
        self.order.unsigned_abs() as usize
    }

    pub fn eval(&self, x: &[f64]) -> Result<Complex64> {
        check_point(x, 2)?;
        let dx = x[0] - self.center[0];
        let dy = x[1] - self.center[1];
        let n = self.order.unsigned_abs() as usize;
        let j = bessel_j_seq(n, self.k * dx.hypot(dy))?[n];
        // J_{-n} = (-1)^n J_n
        let sign = if self.order < 0 && n % 2 == 1 { -1.0 } else { 1.0 };
        let phase = Complex64::from_polar(1.0, self.order as f64 * dy.atan2(dx));
        Ok(self.amplitude * phase * (sign * j))
    }
}

/// `max |Delta_h u + k^2 q u|` over interior nodes of a row-major grid with
/// spacing `h` (5-point stencil in 2D, 7-point in 3D); `q = None` means 1.
pub fn helmholtz_residual(field: &[Complex64], shape: &[usize], k: f64, h: f64, q: Option<&[f64]>) -> Result<f64> {
    let dim = shape.len();
    if !(2..=3).contains(&dim) {
        return Err(invalid("shape", "grid must be 2D or 3D"));
    }
    let total: usize = shape.iter().product();
    if field.len() != total {
        return Err(Error::DimensionMismatch {
            expected: total,
            got: field.len(),
        });
    }
    if let Some(q) = q {
        if q.len() != total {
            return Err(Error::DimensionMismatch {
                expected: total,
                got: q.len(),
            });
        }
    }
    if shape.iter().any(|&n| n < 3) {
        return Err(invalid("shape", "grid too small for the stencil"));
    }
    if !(h > 0.0) {
        return Err(invalid("h", "grid step must be positive"));
    }
    let mut strides = vec![1usize; dim];
    for a in (0..dim - 1).rev() {
        strides[a] = strides[a + 1] * shape[a + 1];
    }
    let inv_h2 = 1.0 / (h * h);
    let mut worst = 0.0f64;
    let mut idx = vec![1usize; dim];
    loop {
        let lin: usize = idx.iter().zip(&strides).map(|(i, s)| i * s).sum();
        let u = field[lin];
        let mut lap = Complex64::new(0.0, 0.0);
        for s in &strides {
            lap += field[lin + s] + field[lin - s] - 2.0 * u;
        }
        let qv = q.map_or(1.0, |q| q[lin]);
        worst = worst.max((lap * inv_h2 + k * k * qv * u).norm());
        // odometer over the interior
        let mut a = dim;
        loop {
            if a == 0 {
                return Ok(worst);
            }
            a -= 1;
            idx[a] += 1;
            if idx[a] < shape[a] - 1 {
                break;
            }
            idx[a] = 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Power-series `J_n`, independent of the recurrence code.
    fn j_series(n: usize, x: f64) -> f64 {
        let t = 0.5 * x;
        let mut term = t.powi(n as i32) / (1..=n).fold(1.0, |a, v| a * v as f64);
        let mut sum = term;
        for m in 1..80 {
            term *= -t * t / (m as f64 * (m + n) as f64);
            sum += term;
        }
        sum
    }

    #[test]
    fn plane_wave_value() {
        let w = IncidentWave::plane(2.0, &[1.0, 0.0]).unwrap();
        let v = w.eval(&[PI / 2.0, 0.0]).unwrap();
        assert!((v - c(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn herglotz_constant_density_is_bessel() {
        let w = herglotz_from_samples(&vec![c(1.0, 0.0); 64], 1.0).unwrap();
        for phi in [0.0f64, 0.7, 2.0] {
            let v = w.eval(&[phi.cos(), phi.sin()]).unwrap();
            assert!((v - 2.0 * PI * j_series(0, 1.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn herglotz_harmonic_density_is_bessel_mode() {
        let n = 2;
        let w = IncidentWave::herglotz_from_fn(1.5, 2, 64, |d| Complex64::from_polar(1.0, n as f64 * d[1].atan2(d[0])))
            .unwrap();
        for (r, phi) in [(0.3, 0.2), (1.0, -1.1), (2.0, 2.5)] {
            let v = w.eval(&[r * f64::cos(phi), r * f64::sin(phi)]).unwrap();
            let expect =
                2.0 * PI * I.powi(n) * j_series(n as usize, 1.5 * r) * Complex64::from_polar(1.0, n as f64 * phi);
            assert!((v - expect).norm() < 1e-8, "r={r}");
        }
    }

    #[test]
    fn concentrated_density_approximates_plane_wave() {
        let theta0 = 0.4f64;
        let kappa = 200.0;
        let m = 256;
        let samples: Vec<_> = (0..m)
            .map(|j| {
                let t = 2.0 * PI * j as f64 / m as f64;
                c((kappa * ((t - theta0).cos() - 1.0)).exp(), 0.0)
            })
            .collect();
        let w = herglotz_from_samples(&samples, 1.0).unwrap();
        let p = IncidentWave::plane_at_angle(1.0, theta0).unwrap();
        let (mut uv, mut uu, mut vv) = (c(0.0, 0.0), 0.0, 0.0);
        for i in 0..21 {
            for j in 0..21 {
                let x = [-1.0 + 0.1 * i as f64, -1.0 + 0.1 * j as f64];
                let a = w.eval(&x).unwrap();
                let b = p.eval(&x).unwrap();
                uv += a * b.conj();
                uu += a.norm_sqr();
                vv += b.norm_sqr();
            }
        }
        assert!(uv.norm() / (uu * vv).sqrt() > 0.99);
    }

    #[test]
    fn zero_density_and_small_m() {
        let w = herglotz_from_samples(&[c(0.0, 0.0); 16], 3.0).unwrap();
        assert_eq!(w.eval(&[0.3, 0.1]).unwrap(), c(0.0, 0.0));
        assert!(herglotz_from_samples(&[c(1.0, 0.0); 7], 3.0).is_err());
    }

    #[test]
    fn sphere_rule_integrates_low_degree() {
        let r = DirectionRule::sphere(8).unwrap();
        let area: f64 = r.weights().iter().sum();
        assert!((area - 4.0 * PI).abs() < 1e-12);
        let z2: f64 = r
            .directions()
            .iter()
            .zip(r.weights())
            .map(|(d, w)| w * d[2] * d[2])
            .sum();
        assert!((z2 - 4.0 * PI / 3.0).abs() < 1e-12);
        // constant-density 3D Herglotz wave is 4 pi sin(kr)/(kr)
        let w = IncidentWave::herglotz_from_fn(2.0, 3, 16, |_| c(1.0, 0.0)).unwrap();
        let x = [0.3, -0.4, 0.5];
        let kr = 2.0 * dot(&x, &x).sqrt();
        assert!((w.eval(&x).unwrap() - 4.0 * PI * kr.sin() / kr).norm() < 1e-10);
    }

    fn sample_grid<F: Fn(&[f64]) -> Complex64>(n: usize, h: f64, origin: [f64; 2], f: F) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                out.push(f(&[origin[0] + i as f64 * h, origin[1] + j as f64 * h]));
            }
        }
        out
    }

    #[test]
    fn residuals_of_exact_solutions() {
        let w = IncidentWave::plane(1.0, &[0.6, 0.8]).unwrap();
        let g = sample_grid(128, 0.01, [0.0, 0.0], |x| w.eval(x).unwrap());
        assert!(helmholtz_residual(&g, &[128, 128], 1.0, 0.01, None).unwrap() <= 1e-4);
        let z = vec![c(0.0, 0.0); 128 * 128];
        assert_eq!(helmholtz_residual(&z, &[128, 128], 1.0, 0.01, None).unwrap(), 0.0);
        let m = FourierBesselMode::new(1.0, 3, c(1.0, 0.0)).unwrap();
        let g = sample_grid(128, 0.01, [-0.6, -0.6], |x| m.eval(x).unwrap());
        assert!(helmholtz_residual(&g, &[128, 128], 1.0, 0.01, None).unwrap() <= 1e-4);
        // point source away from its singularity
        let s = IncidentWave::point_source(2.0, &[-1.0, -1.0]).unwrap();
        let g = sample_grid(64, 0.01, [0.0, 0.0], |x| s.eval(x).unwrap());
        assert!(helmholtz_residual(&g, &[64, 64], 2.0, 0.01, None).unwrap() <= 1e-3);
        assert!(helmholtz_residual(&z[..4], &[2, 2], 1.0, 0.01, None).is_err());
    }

    #[test]
    fn plane_wave_fd_residual() {
        let k = 3.0;
        let w = IncidentWave::plane(k, &[1.0, 1.0]).unwrap();
        let h = 1e-3;
        let g = sample_grid(5, h, [0.2, 0.1], |x| w.eval(x).unwrap());
        assert!(helmholtz_residual(&g, &[5, 5], k, h, None).unwrap() <= 1e-5 * k * k);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let waves = [
            IncidentWave::plane(2.0, &[0.3, -1.0]).unwrap(),
            IncidentWave::point_source(2.0, &[2.0, 1.0]).unwrap(),
            IncidentWave::point_source(1.5, &[2.0, 1.0, 0.5]).unwrap(),
            IncidentWave::herglotz_from_fn(2.0, 2, 16, |d| c(d[0], d[1] * d[1])).unwrap(),
        ];
        for w in &waves {
            let x: Vec<f64> = (0..w.dim()).map(|i| 0.1 * i as f64 - 0.2).collect();
            let g = w.gradient(&x).unwrap();
            let h = 1e-5;
            for a in 0..w.dim() {
                let mut p = x.clone();
                let mut m = x.clone();
                p[a] += h;
                m[a] -= h;
                let fd = (w.eval(&p).unwrap() - w.eval(&m).unwrap()) / (2.0 * h);
                assert!((fd - g[a]).norm() < 1e-7 * (1.0 + g[a].norm()));
            }
        }
        let s = IncidentWave::point_source(1.0, &[0.0, 0.0]).unwrap();
        assert!(s.eval(&[0.0, 0.0]).is_err());
        assert!(s.gradient(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn negative_order_mode() {
        let p = FourierBesselMode::new(2.0, 3, c(1.0, 0.0)).unwrap();
        let m = FourierBesselMode::new(2.0, -3, c(1.0, 0.0)).unwrap();
        let x = [0.4, 0.7];
        // J_{-n}(kr) e^{-in phi} = conj(J_n(kr) e^{in phi}) * (-1)^n
        assert!((m.eval(&x).unwrap() + p.eval(&x).unwrap().conj()).norm() < 1e-14);
    }

    proptest! {
        #[test]
        fn herglotz_is_linear(a in prop::collection::vec(-1.0f64..1.0, 32), b in prop::collection::vec(-1.0f64..1.0, 32), x in -2.0f64..2.0, y in -2.0f64..2.0) {
            let ga: Vec<_> = a.iter().map(|v| c(*v, 0.5 * v)).collect();
            let gb: Vec<_> = b.iter().map(|v| c(-v, *v)).collect();
            let gs: Vec<_> = ga.iter().zip(&gb).map(|(p, q)| p + q).collect();
            let k = 2.5;
            let sa = herglotz_from_samples(&ga, k).unwrap().eval(&[x, y]).unwrap();
            let sb = herglotz_from_samples(&gb, k).unwrap().eval(&[x, y]).unwrap();
            let ss = herglotz_from_samples(&gs, k).unwrap().eval(&[x, y]).unwrap();
            prop_assert!((ss - sa - sb).norm() < 1e-12 * (1.0 + ss.norm()));
        }

        #[test]
        fn plane_wave_rotation_equivariant(angle in -PI..PI, rot in -PI..PI, x in -3.0f64..3.0, y in -3.0f64..3.0) {
            let w = IncidentWave::plane_at_angle(1.7, angle).unwrap();
            let wr = IncidentWave::plane_at_angle(1.7, angle + rot).unwrap();
            let (s, co) = rot.sin_cos();
            let xr = [co * x - s * y, s * x + co * y];
            prop_assert!((w.eval(&[x, y]).unwrap() - wr.eval(&xr).unwrap()).norm() < 1e-12);
        }
    }
}
