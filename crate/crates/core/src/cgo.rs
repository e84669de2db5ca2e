//! Complex geometrical optics parameters, exponential profiles and the
//! remainder of `u = exp(-rho.x)(1 + psi)` on a periodic box.

use crate::error::{invalid, Error, Result};
use crate::geometry::{NeighborhoodRegion, Point2, SectorGeometry, TruncatedSector};
use crate::lsolver::gmres;
use crate::lsolver::kernel::NdFft;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_3, PI};

/// Which of the two unit normals to `omega` is used for the imaginary part.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }
}

/// `Helmholtz` gives `rho.rho = -k^2`, `Harmonic` gives `rho.rho = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RhoKind {
    Helmholtz,
    Harmonic,
}

/// Unit vector of the cone axis of the first octant.
pub fn octant_axis() -> [f64; 3] {
    let c = 1.0 / 3f64.sqrt();
    [c, c, c]
}

/// Angular budget of the octant, `pi/3`.
pub const OCTANT_BETA: f64 = FRAC_PI_3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CgoParameters {
    tau: f64,
    k: f64,
    kind: RhoKind,
    omega: Vec<f64>,
    omega_perp: Vec<f64>,
    /// Point the profile is centred on (sector vertex, or the origin).
    origin: Vec<f64>,
    /// Local angle and branch when built from a planar angle.
    angle: Option<(f64, Branch)>,
}

fn check_tau_k(tau: f64, k: f64) -> Result<()> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(invalid("tau", format!("{tau} must be positive")));
    }
    if !(k > 0.0 && k.is_finite()) {
        return Err(invalid("k", format!("{k} must be positive")));
    }
    Ok(())
}

impl CgoParameters {
    /// Planar parameters with `omega = (cos phi, sin phi)` and
    /// `omega_perp = +-(-sin phi, cos phi)`.
    pub fn planar(tau: f64, k: f64, phi: f64, branch: Branch) -> Result<Self> {
        check_tau_k(tau, k)?;
        if !phi.is_finite() {
            return Err(invalid("phi", "angle must be finite"));
        }
        let s = branch.sign();
        Ok(CgoParameters {
            tau,
            k,
            kind: RhoKind::Helmholtz,
            omega: vec![phi.cos(), phi.sin()],
            omega_perp: vec![-s * phi.sin(), s * phi.cos()],
            origin: vec![0.0, 0.0],
            angle: Some((phi, branch)),
        })
    }

    /// Planar parameters attached to a sector: `phi` is measured from the
    /// bisector and must satisfy `|phi| < beta/2`.
    pub fn for_sector(sector: &SectorGeometry, tau: f64, k: f64, phi: f64, branch: Branch) -> Result<Self> {
        check_sector_angle(sector, phi)?;
        let mut p = Self::planar(tau, k, sector.orientation() + phi, branch)?;
        p.origin = sector.vertex().to_vec();
        p.angle = Some((phi, branch));
        Ok(p)
    }

    /// Spatial parameters from orthonormal `omega`, `omega_perp`.
    pub fn spatial(tau: f64, k: f64, omega: [f64; 3], omega_perp: [f64; 3]) -> Result<Self> {
        check_tau_k(tau, k)?;
        let n1 = dot(&omega, &omega);
        let n2 = dot(&omega_perp, &omega_perp);
        if (n1 - 1.0).abs() > 1e-12 || (n2 - 1.0).abs() > 1e-12 {
            return Err(invalid("omega", "direction vectors must be unit vectors"));
        }
        if dot(&omega, &omega_perp).abs() > 1e-12 {
            return Err(invalid("omega_perp", "must be orthogonal to omega"));
        }
        Ok(CgoParameters {
            tau,
            k,
            kind: RhoKind::Helmholtz,
            omega: omega.to_vec(),
            omega_perp: omega_perp.to_vec(),
            origin: vec![0.0; 3],
            angle: None,
        })
    }

    pub fn with_kind(mut self, kind: RhoKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn with_tau(&self, tau: f64) -> Result<Self> {
        check_tau_k(tau, self.k)?;
        let mut p = self.clone();
        p.tau = tau;
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.omega.len()
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn kind(&self) -> RhoKind {
        self.kind
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn omega_perp(&self) -> &[f64] {
        &self.omega_perp
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    /// Local sector angle and branch, when built from an angle.
    pub fn angle(&self) -> Option<(f64, Branch)> {
        self.angle
    }

    /// Length of the imaginary part of `rho`.
    pub fn imaginary_scale(&self) -> f64 {
        match self.kind {
            RhoKind::Helmholtz => self.tau.hypot(self.k),
            RhoKind::Harmonic => self.tau,
        }
    }

    /// `exp(-rho.(x - origin))`.
    pub fn profile(&self, x: &[f64]) -> Complex64 {
        let s = self.imaginary_scale();
        let (mut re, mut im) = (0.0, 0.0);
        for i in 0..self.dim() {
            let y = x[i] - self.origin[i];
            re += self.tau * self.omega[i] * y;
            im += s * self.omega_perp[i] * y;
        }
        Complex64::from_polar((-re).exp(), -im)
    }

    /// `omega . a > cos(beta/2)` for the octant axis `a` in local octant coordinates.
    pub fn admissible_in_octant(&self) -> bool {
        self.dim() == 3 && dot(&self.omega, &octant_axis()) > (0.5 * OCTANT_BETA).cos()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_sector_angle(sector: &SectorGeometry, phi: f64) -> Result<()> {
    let limit = 0.5 * sector.beta();
    if !(phi.abs() < limit) {
        return Err(Error::Inadmissible(format!(
            "|phi| = {} is not below beta/2 = {limit}",
            phi.abs()
        )));
    }
    Ok(())
}

/// `rho = tau omega + i s omega_perp` with `s = sqrt(tau^2 + k^2)`, or
/// `s = tau` for the harmonic kind.
pub fn make_rho(p: &CgoParameters) -> Vec<Complex64> {
    let s = p.imaginary_scale();
    p.omega
        .iter()
        .zip(&p.omega_perp)
        .map(|(w, v)| Complex64::new(p.tau * w, s * v))
        .collect()
}

/// Bilinear (non-conjugated) product `rho . rho`.
pub fn rho_square(rho: &[Complex64]) -> Complex64 {
    rho.iter().map(|z| z * z).sum()
}

/// Minimum of `omega . (x - O)` over `D_{eps,R}` for the direction at local
/// angle `phi`: `(R/2 - eps) cos(phi0 + eps + |phi|)`.
pub fn decay_margin(ts: &TruncatedSector, eps: f64, phi: f64) -> Result<f64> {
    let region = crate::geometry::neighborhood_region(ts, eps)?;
    check_sector_angle(ts.base(), phi)?;
    Ok(region_margin(&region, phi))
}

fn region_margin(region: &NeighborhoodRegion, phi: f64) -> f64 {
    let (lo, _) = region.radial_range();
    lo * (region.angular_half_width() + phi.abs()).cos()
}

/// Same minimum by brute force over a polar sample of the region.
pub fn sampled_margin(region: &NeighborhoodRegion, phi: f64, n_r: usize, n_phi: usize) -> f64 {
    let b = region.truncated_sector().base();
    let w = b.ray_direction(phi);
    let v = b.vertex();
    region
        .sample_points(n_r, n_phi)
        .iter()
        .map(|x| w[0] * (x[0] - v[0]) + w[1] * (x[1] - v[1]))
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub tau: f64,
    pub delta0: f64,
    pub max_profile: f64,
    pub bound: f64,
}

impl DecayReport {
    pub fn holds(&self) -> bool {
        self.max_profile <= self.bound * (1.0 + 1e-12)
    }
}

/// Largest `|exp(-rho.x)|` over a `samples x samples` polar sample of the
/// region against `exp(-tau delta0)`.
pub fn profile_decay_check(p: &CgoParameters, region: &NeighborhoodRegion, samples: usize) -> Result<DecayReport> {
    let (phi, _) = p
        .angle()
        .ok_or_else(|| invalid("parameters", "decay check needs planar sector parameters"))?;
    let ts = region.truncated_sector();
    let delta0 = decay_margin(ts, region.eps(), phi)?;
    let max_profile = region
        .sample_points(samples, samples)
        .iter()
        .map(|x| p.profile(x).norm())
        .fold(0.0, f64::max);
    Ok(DecayReport {
        tau: p.tau(),
        delta0,
        max_profile,
        bound: (-p.tau() * delta0).exp(),
    })
}

/// `q - 1 = eta + c r^alpha` on `S_{R/2}` and zero elsewhere, `r` the
/// distance to the vertex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorContrast {
    pub sector: TruncatedSector,
    pub eta: f64,
    pub alpha: f64,
    pub c: f64,
}

impl SectorContrast {
    pub fn constant(sector: TruncatedSector, eta: f64) -> Self {
        SectorContrast {
            sector,
            eta,
            alpha: 1.0,
            c: 0.0,
        }
    }

    /// Value of `q - 1` at a point in polar form around the vertex.
    pub fn at_radius(&self, r: f64) -> f64 {
        if self.c == 0.0 {
            self.eta
        } else {
            self.eta + self.c * r.powf(self.alpha)
        }
    }

    pub fn at(&self, x: Point2) -> f64 {
        if self.sector.contains_half(x) {
            let (r, _) = self.sector.base().local_polar(x);
            self.at_radius(r)
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RemainderOptions {
    /// Nodes per side of the periodic box.
    pub nodes: usize,
    /// Box side as a multiple of the truncation radius `R`.
    pub box_factor: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Lebesgue exponent of the reported norm.
    pub norm_exponent: f64,
}

impl Default for RemainderOptions {
    fn default() -> Self {
        RemainderOptions {
            nodes: 128,
            box_factor: 2.0,
            tol: 1e-10,
            max_iter: 500,
            norm_exponent: 6.0,
        }
    }
}

/// Remainder samples on a square box aligned with `(omega, omega_perp)` and
/// centred at the sector vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct CgoRemainder {
    pub tau: f64,
    pub nodes: usize,
    pub side: f64,
    pub psi: Vec<Complex64>,
    pub norm: f64,
    pub norm_exponent: f64,
    /// Max of the PDE residual over max `k^2 |q - 1|`.
    pub residual: f64,
    pub iterations: usize,
}

/// Solves `Lap psi - 2 rho.grad psi = -k^2 (q - 1)(1 + psi)` for 2D parameters
/// on a box with a half-period shift along `omega`, which keeps the symbol
/// `-|xi|^2 - 2i rho.xi` away from zero.
pub fn solve_cgo_remainder(
    contrast: &SectorContrast,
    p: &CgoParameters,
    opts: &RemainderOptions,
) -> Result<CgoRemainder> {
    if p.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: p.dim(),
        });
    }
    let n = opts.nodes;
    if n < 8 || !n.is_multiple_of(2) {
        return Err(invalid("nodes", format!("{n} must be even and at least 8")));
    }
    let k2 = p.k() * p.k();
    let side = opts.box_factor * contrast.sector.radius();
    let h = side / n as f64;
    let v = contrast.sector.base().vertex();
    let (w, wp) = (p.omega(), p.omega_perp());
    let coord = |j: usize| -0.5 * side + (j as f64 + 0.5) * h;
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let (a, b) = (coord(i), coord(j));
            let x = [v[0] + a * w[0] + b * wp[0], v[1] + a * w[1] + b * wp[1]];
            m[i * n + j] = contrast.at(x);
        }
    }
    let m_max = m.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    let zero = Complex64::new(0.0, 0.0);
    if m_max == 0.0 {
        return Ok(CgoRemainder {
            tau: p.tau(),
            nodes: n,
            side,
            psi: vec![zero; n * n],
            norm: 0.0,
            norm_exponent: opts.norm_exponent,
            residual: 0.0,
            iterations: 0,
        });
    }

    let tau = p.tau();
    let s = p.imaginary_scale();
    let freq = |j: usize| {
        let m = if j < n / 2 { j as f64 } else { j as f64 - n as f64 };
        2.0 * PI * m / side
    };
    let shift = PI / side;
    let mut symbol = vec![zero; n * n];
    let mut smallest = (f64::INFINITY, 0.0);
    for i in 0..n {
        let x1 = freq(i) + shift;
        for j in 0..n {
            let x2 = freq(j);
            let sigma = Complex64::new(-(x1 * x1 + x2 * x2) + 2.0 * s * x2, -2.0 * tau * x1);
            if sigma.norm() < smallest.0 {
                smallest = (sigma.norm(), x1.hypot(x2));
            }
            symbol[i * n + j] = sigma;
        }
    }
    if smallest.0 < 1e-10 * (tau + s) / side {
        return Err(Error::SmallSymbol { shell: smallest.1 });
    }
    let twist: Vec<Complex64> = (0..n).map(|i| Complex64::from_polar(1.0, shift * coord(i))).collect();
    let fft = NdFft::new(&[n, n]);
    let scale = 1.0 / (n * n) as f64;

    // multiplier `f -> F^{-1}[mult F f]` on quasi-periodic data
    let spectral = |f: &[Complex64], out: &mut [Complex64], divide: bool| {
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = f[i * n + j] * twist[i].conj();
            }
        }
        fft.process(out, false);
        for (o, sig) in out.iter_mut().zip(&symbol) {
            if divide {
                *o /= sig;
            } else {
                *o *= sig;
            }
        }
        fft.process(out, true);
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] *= twist[i] * scale;
            }
        }
    };

    let apply = |x: &[Complex64], out: &mut [Complex64]| {
        let mx: Vec<Complex64> = x.iter().zip(&m).map(|(a, b)| a * (k2 * b)).collect();
        spectral(&mx, out, true);
        for (o, a) in out.iter_mut().zip(x) {
            *o += a;
        }
    };
    let src: Vec<Complex64> = m.iter().map(|b| Complex64::new(-k2 * b, 0.0)).collect();
    let mut rhs = vec![zero; n * n];
    spectral(&src, &mut rhs, true);
    let mut psi = vec![zero; n * n];
    let out = gmres(apply, &rhs, &mut psi, 50, opts.tol, opts.max_iter);
    if !out.converged {
        return Err(Error::NotConverged {
            iterations: out.iterations,
            residual: out.relative_residual,
        });
    }

    let mut lhs = vec![zero; n * n];
    spectral(&psi, &mut lhs, false);
    let residual = lhs
        .iter()
        .zip(&psi)
        .zip(&m)
        .map(|((l, p), b)| (l + k2 * b * (1.0 + p)).norm())
        .fold(0.0, f64::max)
        / (k2 * m_max);
    let e = opts.norm_exponent;
    let norm = (psi.iter().map(|z| z.norm().powf(e)).sum::<f64>() * h * h).powf(1.0 / e);
    Ok(CgoRemainder {
        tau,
        nodes: n,
        side,
        psi,
        norm,
        norm_exponent: e,
        residual,
        iterations: out.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::neighborhood_region;
    use crate::quad::least_squares_slope;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_6;

    fn sector(phi0: f64, r: f64) -> TruncatedSector {
        TruncatedSector::new(SectorGeometry::canonical(phi0).unwrap(), r).unwrap()
    }

    #[test]
    fn planar_rho_example() {
        let p = CgoParameters::planar(10.0, 1.0, 0.0, Branch::Plus).unwrap();
        let rho = make_rho(&p);
        assert_eq!(rho[0], Complex64::new(10.0, 0.0));
        assert!((rho[1] - Complex64::new(0.0, 101f64.sqrt())).norm() < 1e-14);
        assert!((rho_square(&rho) + 1.0).norm() < 1e-12);
        let p = p.with_kind(RhoKind::Harmonic);
        assert!(rho_square(&make_rho(&p)).norm() < 1e-12);
    }

    #[test]
    fn rho_grows_like_root_two_tau() {
        let tau = 1e4;
        let p = CgoParameters::planar(tau, 1.0, 0.3, Branch::Minus).unwrap();
        let len = make_rho(&p).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!((len / tau - 2f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn spatial_rho_and_octant_admissibility() {
        let a = octant_axis();
        let perp = [1.0 / 2f64.sqrt(), -1.0 / 2f64.sqrt(), 0.0];
        let p = CgoParameters::spatial(5.0, 1.0, a, perp).unwrap();
        assert!((rho_square(&make_rho(&p)) + 1.0).norm() < 1e-12);
        assert!(p.admissible_in_octant());
        let q = CgoParameters::spatial(5.0, 1.0, [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]).unwrap();
        assert!(!q.admissible_in_octant());
        assert!(CgoParameters::spatial(5.0, 1.0, [1.0, 0.0, 0.0], [0.6, 0.8, 0.0]).is_err());
    }

    #[test]
    fn rejects_bad_tau() {
        assert!(CgoParameters::planar(0.0, 1.0, 0.0, Branch::Plus).is_err());
        assert!(CgoParameters::planar(-1.0, 1.0, 0.0, Branch::Plus).is_err());
    }

    #[test]
    fn margin_example_matches_sampling() {
        let ts = sector(FRAC_PI_6, 1.0);
        let d0 = decay_margin(&ts, 0.1, 0.0).unwrap();
        assert!((d0 - 0.4 * (FRAC_PI_6 + 0.1).cos()).abs() < 1e-15);
        assert!((d0 - 0.3246).abs() < 2e-4);
        let region = neighborhood_region(&ts, 0.1).unwrap();
        let sampled = sampled_margin(&region, 0.0, 201, 401);
        assert!(sampled >= d0 - 1e-12 && sampled - d0 < 1e-6);
    }

    #[test]
    fn margin_rejects_bad_inputs() {
        let ts = sector(FRAC_PI_6, 1.0);
        let beta = ts.base().beta();
        assert!(matches!(
            decay_margin(&ts, 0.1, 0.5 * beta),
            Err(Error::Inadmissible(_))
        ));
        assert!(decay_margin(&ts, 0.5 * beta, 0.0).is_err());
        assert!(CgoParameters::for_sector(ts.base(), 1.0, 1.0, beta, Branch::Plus).is_err());
    }

    #[test]
    fn log_profile_is_linear_in_tau() {
        let ts = sector(FRAC_PI_6, 1.0);
        let region = neighborhood_region(&ts, 0.1).unwrap();
        let p20 = CgoParameters::for_sector(ts.base(), 20.0, 1.0, 0.0, Branch::Plus).unwrap();
        let r20 = profile_decay_check(&p20, &region, 64).unwrap();
        let r40 = profile_decay_check(&p20.with_tau(40.0).unwrap(), &region, 64).unwrap();
        assert!(r20.holds() && r40.holds());
        let slope = (r40.max_profile.ln() - r20.max_profile.ln()) / 20.0;
        assert!((slope + r20.delta0).abs() < 0.02 * r20.delta0);
        // near the admissibility edge the margin shrinks but the bound holds
        let edge = 0.5 * ts.base().beta() * (1.0 - 1e-6);
        let pe = CgoParameters::for_sector(ts.base(), 40.0, 1.0, edge, Branch::Minus).unwrap();
        let re = profile_decay_check(&pe, &region, 64).unwrap();
        assert!(re.holds() && re.delta0 < r40.delta0);
    }

    #[test]
    fn profile_is_one_at_vertex_and_moves_with_sector() {
        let s = SectorGeometry::new([1.0, -2.0], 0.4, 1.1).unwrap();
        let p = CgoParameters::for_sector(&s, 7.0, 2.0, 0.1, Branch::Plus).unwrap();
        assert!((p.profile(&[1.0, -2.0]) - 1.0).norm() < 1e-15);
        let c =
            CgoParameters::for_sector(&SectorGeometry::canonical(0.4).unwrap(), 7.0, 2.0, 0.1, Branch::Plus).unwrap();
        let local = [0.3, 0.05];
        let global = s.from_local(local);
        assert!((p.profile(&global) - c.profile(&local)).norm() < 1e-12);
    }

    #[test]
    fn profile_solves_helmholtz() {
        let p = CgoParameters::planar(3.0, 2.0, 0.2, Branch::Minus).unwrap();
        let h = 1e-3;
        let x = [0.2, -0.1];
        let f = |a: f64, b: f64| p.profile(&[a, b]);
        let lap = (f(x[0] + h, x[1]) + f(x[0] - h, x[1]) + f(x[0], x[1] + h) + f(x[0], x[1] - h) - 4.0 * f(x[0], x[1]))
            / (h * h);
        let res = lap + 4.0 * f(x[0], x[1]);
        assert!(res.norm() < 1e-4 * f(x[0], x[1]).norm() * 13.0);
    }

    #[test]
    fn remainder_vanishes_without_contrast() {
        let ts = sector(FRAC_PI_6, 1.0);
        let p = CgoParameters::for_sector(ts.base(), 10.0, 1.0, 0.0, Branch::Plus).unwrap();
        let r = solve_cgo_remainder(&SectorContrast::constant(ts, 0.0), &p, &RemainderOptions::default()).unwrap();
        assert!(r.psi.iter().all(|z| z.norm() == 0.0));
        assert_eq!(r.norm, 0.0);
    }

    #[test]
    fn remainder_residual_and_decay() {
        let ts = sector(FRAC_PI_6, 1.0);
        let contrast = SectorContrast {
            sector: ts,
            eta: 0.5,
            alpha: 0.5,
            c: 0.5,
        };
        let opts = RemainderOptions {
            nodes: 64,
            ..Default::default()
        };
        let taus = [5.0, 10.0, 20.0, 40.0];
        let mut norms = Vec::new();
        for &tau in &taus {
            let p = CgoParameters::for_sector(ts.base(), tau, 2.0, 0.1, Branch::Plus).unwrap();
            let r = solve_cgo_remainder(&contrast, &p, &opts).unwrap();
            assert!(r.residual < 1e-8, "tau {tau}: {}", r.residual);
            norms.push(r.norm.ln());
        }
        let logs: Vec<f64> = taus.iter().map(|t| t.ln()).collect();
        assert!(least_squares_slope(&logs, &norms) < -0.1);
    }

    #[test]
    fn many_random_draws_keep_rho_square() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let tau = rng.gen_range(1.0..50.0);
            let k = rng.gen_range(0.5..5.0);
            let phi = rng.gen_range(-PI..PI);
            let p = CgoParameters::planar(tau, k, phi, Branch::Plus).unwrap();
            let rho = make_rho(&p);
            let scale: f64 = rho.iter().map(|z| z.norm_sqr()).sum();
            assert!((rho_square(&rho) + k * k).norm() <= 1e-12 * scale);
        }
    }

    proptest! {
        #[test]
        fn rho_square_identity_3d(tau in 0.1f64..100.0, k in 0.1f64..10.0, t in 0.0f64..PI, f in 0.0f64..std::f64::consts::TAU, g in 0.0f64..std::f64::consts::TAU) {
            let w = [t.sin() * f.cos(), t.sin() * f.sin(), t.cos()];
            // orthonormal pair spanning the plane normal to w
            let e1 = [t.cos() * f.cos(), t.cos() * f.sin(), -t.sin()];
            let e2 = [-f.sin(), f.cos(), 0.0];
            let v = [g.cos() * e1[0] + g.sin() * e2[0], g.cos() * e1[1] + g.sin() * e2[1], g.cos() * e1[2] + g.sin() * e2[2]];
            let p = CgoParameters::spatial(tau, k, w, v).unwrap();
            let rho = make_rho(&p);
            let scale: f64 = rho.iter().map(|z| z.norm_sqr()).sum();
            prop_assert!((rho_square(&rho) + k * k).norm() <= 1e-12 * scale);
            let im: f64 = rho.iter().map(|z| z.im * z.im).sum::<f64>().sqrt();
            prop_assert!((im - tau.hypot(k)).abs() <= 1e-12 * im);
        }

        #[test]
        fn margin_is_monotone(phi0 in 0.1f64..1.4, e1 in 0.0f64..1.0, e2 in 0.0f64..1.0, a1 in 0.0f64..1.0, a2 in 0.0f64..1.0) {
            let ts = sector(phi0, 1.0);
            let beta = ts.base().beta();
            let emax = (0.5 * beta).min(0.5) * 0.999;
            let (ea, eb) = (emax * e1.min(e2) + 1e-6, emax * e1.max(e2) + 1e-6);
            let pmax = 0.5 * beta * 0.999;
            let (pa, pb) = (pmax * a1.min(a2), pmax * a1.max(a2));
            prop_assert!(decay_margin(&ts, eb, pa).unwrap() <= decay_margin(&ts, ea, pa).unwrap());
            prop_assert!(decay_margin(&ts, ea, -pb).unwrap() <= decay_margin(&ts, ea, pa).unwrap());
            prop_assert!(decay_margin(&ts, ea, pb).unwrap() > 0.0);
        }

        #[test]
        fn profile_bounded_on_region(phi0 in 0.1f64..1.4, e in 0.05f64..0.95, a in -0.999f64..0.999, tau in 1.0f64..60.0, plus in any::<bool>()) {
            let ts = sector(phi0, 2.0);
            let beta = ts.base().beta();
            let eps = (0.5 * beta).min(1.0) * e;
            let region = neighborhood_region(&ts, eps).unwrap();
            let branch = if plus { Branch::Plus } else { Branch::Minus };
            let p = CgoParameters::for_sector(ts.base(), tau, 1.0, 0.5 * beta * a, branch).unwrap();
            prop_assert!(profile_decay_check(&p, &region, 24).unwrap().holds());
        }
    }
}
