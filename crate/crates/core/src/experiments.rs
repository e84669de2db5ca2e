//! Experiment drivers: far-field distinguishability, non-vanishing scans,
//! orthogonality asymptotics near a corner, a Green identity ledger, CGO
//! decay sweeps and a discrete check of the cube Fourier transform.
//!
//! Reports are desk-scale consistency evidence, not proofs.

use crate::cgo::{
    decay_margin, make_rho, profile_decay_check, rho_square, solve_cgo_remainder, Branch, CgoParameters, DecayReport,
    RemainderOptions, RhoKind, SectorContrast,
};
use crate::error::{invalid, Result};
use crate::geometry::{neighborhood_region, TruncatedSector};
use crate::incident::{DirectionRule, FourierBesselMode, IncidentWave};
use crate::laplace::{cube_characteristic_fourier, interval_fourier, sector_laplace, HarmonicHomogeneousPolynomial};
use crate::lsolver::kernel::NdFft;
use crate::lsolver::{
    build_contrast, far_field, ContrastField, ContrastSpec, FarFieldPattern, LsOperator, Resolution, SolverOptions,
};
use crate::quad::{gauss_legendre_on, least_squares_slope};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// Passes when `value <= threshold`.
    AtMost,
    /// Passes when `value >= threshold`.
    AtLeast,
    /// Recorded only.
    Info,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub value: f64,
    pub threshold: Option<f64>,
    pub relation: Relation,
    /// Where the threshold comes from.
    pub source: String,
}

impl Metric {
    pub fn passes(&self) -> bool {
        match (self.relation, self.threshold) {
            (Relation::AtMost, Some(t)) => self.value <= t,
            (Relation::AtLeast, Some(t)) => self.value >= t,
            _ => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    /// SHA-256 of the canonical JSON of the inputs.
    pub input_digest: String,
    pub metrics: BTreeMap<String, Metric>,
    pub artifacts: Vec<String>,
    pub passed: bool,
}

impl ExperimentReport {
    pub fn new<T: Serialize>(experiment: &str, inputs: &T) -> Self {
        ExperimentReport {
            experiment: experiment.to_string(),
            input_digest: digest(inputs),
            metrics: BTreeMap::new(),
            artifacts: Vec::new(),
            passed: true,
        }
    }

    pub fn record(&mut self, name: &str, value: f64, threshold: Option<f64>, relation: Relation, source: &str) {
        let m = Metric {
            value,
            threshold,
            relation,
            source: source.to_string(),
        };
        self.passed &= m.passes();
        self.metrics.insert(name.to_string(), m);
    }

    pub fn info(&mut self, name: &str, value: f64, source: &str) {
        self.record(name, value, None, Relation::Info, source);
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).map(|m| m.value)
    }
}

pub fn digest<T: Serialize>(inputs: &T) -> String {
    let text = serde_json::to_string(inputs).unwrap_or_default();
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// The same scene at twice the resolution.
pub fn refined(spec: &ContrastSpec) -> ContrastSpec {
    let resolution = match spec.resolution {
        Resolution::Cells(n) => Resolution::Cells(2 * n),
        Resolution::PointsPerWavelength { ppw, k } => Resolution::PointsPerWavelength { ppw: 2.0 * ppw, k },
    };
    ContrastSpec {
        resolution,
        ..spec.clone()
    }
}

fn pattern(
    c: &ContrastField,
    inc: &IncidentWave,
    rule: &DirectionRule,
    opts: &SolverOptions,
) -> Result<FarFieldPattern> {
    let op = LsOperator::with_padding(c, inc.k(), opts.padding_factor)?;
    far_field(&op.solve(inc, opts)?, rule)
}

fn difference_norm(a: &FarFieldPattern, b: &FarFieldPattern) -> f64 {
    a.values
        .iter()
        .zip(&b.values)
        .zip(a.rule.weights())
        .map(|((x, y), w)| w * (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

fn modulus_difference_norm(a: &FarFieldPattern, b: &FarFieldPattern) -> f64 {
    a.values
        .iter()
        .zip(&b.values)
        .zip(a.rule.weights())
        .map(|((x, y), w)| w * (x.norm() - y.norm()).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistinguishConfig {
    pub directions: usize,
    pub solver: SolverOptions,
    /// Required ratio of discrepancy to the estimated solver error.
    pub margin: f64,
}

impl Default for DistinguishConfig {
    fn default() -> Self {
        DistinguishConfig {
            directions: 64,
            solver: SolverOptions::default(),
            margin: 10.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DistinguishOutcome {
    pub report: ExperimentReport,
    pub pattern_a: FarFieldPattern,
    pub pattern_b: FarFieldPattern,
}

/// Far-field discrepancy of two scenes against the grid-refinement error of
/// each. Metrics: `discrepancy`, `solver_error`, `modulus_discrepancy`.
pub fn run_distinguish(
    scene_a: &ContrastSpec,
    scene_b: &ContrastSpec,
    inc: &IncidentWave,
    config: &DistinguishConfig,
) -> Result<DistinguishOutcome> {
    let rule = DirectionRule::for_dim(inc.dim(), config.directions)?;
    let mut report = ExperimentReport::new("distinguish", &(scene_a, scene_b, inc, config));
    let fields = [
        build_contrast(scene_a)?,
        build_contrast(scene_b)?,
        build_contrast(&refined(scene_a))?,
        build_contrast(&refined(scene_b))?,
    ];
    let patterns = fields
        .par_iter()
        .map(|c| pattern(c, inc, &rule, &config.solver))
        .collect::<Result<Vec<_>>>()?;
    let [a, b, a2, b2]: [FarFieldPattern; 4] = patterns.try_into().expect("four patterns");
    let scale = a.l2_norm().max(b.l2_norm());
    let discrepancy = if scale == 0.0 {
        0.0
    } else {
        difference_norm(&a, &b) / scale
    };
    let err_a = a2.relative_l2_error(&a)?;
    let err_b = b2.relative_l2_error(&b)?;
    let solver_error = err_a.max(err_b);
    report.info("solver_error", solver_error, "grid refinement");
    report.record(
        "discrepancy",
        discrepancy,
        Some(config.margin * solver_error),
        Relation::AtLeast,
        "margin times grid-refinement error",
    );
    let modulus = if scale == 0.0 {
        0.0
    } else {
        modulus_difference_norm(&a, &b) / scale
    };
    report.info("modulus_discrepancy", modulus, "far-field moduli");
    Ok(DistinguishOutcome {
        report,
        pattern_a: a,
        pattern_b: b,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IncidentFamily {
    pub plane_directions: usize,
    pub herglotz_draws: usize,
    pub seed: u64,
}

impl IncidentFamily {
    pub fn waves(&self, k: f64, dim: usize) -> Result<Vec<IncidentWave>> {
        if dim != 2 {
            return Err(invalid("dim", "incident families are planar"));
        }
        let mut out = Vec::new();
        for j in 0..self.plane_directions {
            out.push(IncidentWave::plane_at_angle(
                k,
                2.0 * PI * j as f64 / self.plane_directions as f64,
            )?);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        for _ in 0..self.herglotz_draws {
            let rule = DirectionRule::circle(32)?;
            let density: Vec<Complex64> = (0..32)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            out.push(IncidentWave::herglotz(k, rule, density)?);
        }
        if out.is_empty() {
            return Err(invalid("family", "incident family is empty"));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub k: f64,
    pub incident: usize,
    /// `||u_inf||_{L2(S)} / ||u_in||_{L2(D)}`.
    pub ratio: f64,
}

#[derive(Debug, Clone)]
pub struct NonscatteringOutcome {
    pub report: ExperimentReport,
    pub points: Vec<ScanPoint>,
}

fn incident_norm_on_support(c: &ContrastField, u_in: &[Complex64]) -> f64 {
    let vol = c.grid().cell_volume();
    c.q()
        .iter()
        .zip(u_in)
        .filter(|(q, _)| **q != 1.0)
        .map(|(_, u)| u.norm_sqr() * vol)
        .sum::<f64>()
        .sqrt()
}

/// Scan over `k` and an incident family; `fine` supplies the refined field
/// used for the noise floor (re-solving the middle `k`, first incident).
pub fn nonscattering_scan_fields(
    coarse: &ContrastField,
    fine: Option<&ContrastField>,
    k_values: &[f64],
    family: &IncidentFamily,
    directions: usize,
    solver: &SolverOptions,
) -> Result<(Vec<ScanPoint>, f64)> {
    if k_values.is_empty() {
        return Err(invalid("k_values", "empty wavenumber list"));
    }
    let rule = DirectionRule::for_dim(coarse.dim(), directions)?;
    let points: Vec<Vec<ScanPoint>> = k_values
        .par_iter()
        .map(|&k| {
            let op = LsOperator::with_padding(coarse, k, solver.padding_factor)?;
            family
                .waves(k, coarse.dim())?
                .iter()
                .enumerate()
                .map(|(j, w)| {
                    let sol = op.solve(w, solver)?;
                    let ff = far_field(&sol, &rule)?;
                    let den = incident_norm_on_support(coarse, sol.u_in());
                    Ok(ScanPoint {
                        k,
                        incident: j,
                        ratio: if den == 0.0 { 0.0 } else { ff.l2_norm() / den },
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let points: Vec<ScanPoint> = points.into_iter().flatten().collect();
    let noise = match fine {
        None => 0.0,
        Some(fine) => {
            let k = k_values[k_values.len() / 2];
            let w = family.waves(k, coarse.dim())?.remove(0);
            let op = LsOperator::with_padding(coarse, k, solver.padding_factor)?;
            let sol = op.solve(&w, solver)?;
            let a = far_field(&sol, &rule)?;
            let b = pattern(fine, &w, &rule, solver)?;
            let den = incident_norm_on_support(coarse, sol.u_in());
            if den == 0.0 {
                0.0
            } else {
                difference_norm(&a, &b) / den
            }
        }
    };
    Ok((points, noise))
}

/// Minimum normalized far-field norm over the scan against `100 x` the
/// refinement noise floor.
pub fn run_nonscattering_scan(
    scene: &ContrastSpec,
    k_values: &[f64],
    family: &IncidentFamily,
    directions: usize,
    solver: &SolverOptions,
) -> Result<NonscatteringOutcome> {
    let coarse = build_contrast(scene)?;
    let fine = build_contrast(&refined(scene))?;
    let (points, noise) = nonscattering_scan_fields(&coarse, Some(&fine), k_values, family, directions, solver)?;
    let mut report = ExperimentReport::new("nonscatter-scan", &(scene, k_values, family, directions, solver));
    report.info("noise_floor", noise, "grid refinement");
    let min = points.iter().map(|p| p.ratio).fold(f64::INFINITY, f64::min);
    report.record(
        "min_ratio",
        min,
        Some(100.0 * noise),
        Relation::AtLeast,
        "100 times grid-refinement noise",
    );
    if !(min > 0.0) {
        report.passed = false;
    }
    report.info("scan_points", points.len() as f64, "scan size");
    Ok(NonscatteringOutcome { report, points })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSize {
    pub radial: usize,
    pub angular: usize,
}

impl Default for QuadratureSize {
    fn default() -> Self {
        QuadratureSize {
            radial: 200,
            angular: 128,
        }
    }
}

/// `int_{S_{R/2}} (q - 1) v(x) exp(-rho.x) dx` on a polar Gauss rule whose
/// radial variable is mapped to flatten `exp(-rate r)`.
pub fn corner_integral<V>(contrast: &SectorContrast, v: V, p: &CgoParameters, size: QuadratureSize) -> Result<Complex64>
where
    V: Fn(&[f64]) -> Complex64 + Sync,
{
    let ts = &contrast.sector;
    let w = ts.base();
    let phi0 = w.half_aperture();
    let rho_max = 0.5 * ts.radius();
    let (phi, _) = p
        .angle()
        .ok_or_else(|| invalid("parameters", "corner integral needs sector parameters"))?;
    // slowest decay of Re(rho.x) along the rays
    let rate = p.tau() * (phi0 + phi.abs()).cos();
    let span = -(-rate * rho_max).exp_m1();
    let radial: Vec<(f64, f64)> = gauss_legendre_on(size.radial, 0.0, 1.0)
        .into_iter()
        .map(|(t, wt)| {
            if rate * rho_max < 1e-8 {
                (t * rho_max, wt * rho_max)
            } else {
                // r = -ln(1 - t span) / rate
                let r = -(-t * span).ln_1p() / rate;
                (r, wt * span / (rate * (1.0 - t * span)))
            }
        })
        .collect();
    let angular = gauss_legendre_on(size.angular, -phi0, phi0);
    let v0 = w.vertex();
    let total: Complex64 = angular
        .par_iter()
        .map(|&(a, wa)| {
            let d = w.ray_direction(a);
            radial
                .iter()
                .map(|&(r, wr)| {
                    let x = [v0[0] + r * d[0], v0[1] + r * d[1]];
                    v(&x) * p.profile(&x) * (contrast.at_radius(r) * r * wr * wa)
                })
                .sum::<Complex64>()
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrthoRow {
    pub tau: f64,
    pub integral: Complex64,
    /// `tau^{n+2} I(tau)`.
    pub rescaled: Complex64,
}

#[derive(Debug, Clone)]
pub struct OrthoOutcome {
    pub report: ExperimentReport,
    pub rows: Vec<OrthoRow>,
    /// `eta (sqrt 2)^{-n-2} F(unit direction)`.
    pub predicted_limit: Complex64,
    /// Grid points dropped because `exp(-tau delta)` would underflow.
    pub capped: Vec<f64>,
}

/// Rescaled corner integrals `tau^{n+2} I(tau)` along `rho(tau, phi, branch)`;
/// stabilization over the top octave and agreement with the Laplace-transform
/// limit are recorded with a 5% tolerance.
pub fn run_orthogonality_decay(
    contrast: &SectorContrast,
    v1: &FourierBesselMode,
    taus: &[f64],
    phi: f64,
    branch: Branch,
    size: QuadratureSize,
) -> Result<OrthoOutcome> {
    if taus.is_empty() {
        return Err(invalid("taus", "empty tau grid"));
    }
    let ts = &contrast.sector;
    let w = ts.base();
    let n = v1.leading_degree();
    let k = v1.k;
    let centered = v1.centered_at(w.vertex());
    let far_rate = 0.5 * ts.radius() * (w.half_aperture() + phi.abs()).cos();
    let (kept, capped): (Vec<f64>, Vec<f64>) = taus.iter().partition(|&&t| t * far_rate <= 690.0);
    let mut sorted = kept.clone();
    sorted.sort_by(f64::total_cmp);
    let rows = sorted
        .par_iter()
        .map(|&tau| {
            let p = CgoParameters::for_sector(w, tau, k, phi, branch)?;
            let integral = corner_integral(contrast, |x| centered.eval(x).unwrap_or_default(), &p, size)?;
            Ok(OrthoRow {
                tau,
                integral,
                rescaled: integral * tau.powi(n as i32 + 2),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let h = HarmonicHomogeneousPolynomial::from_mode(&v1.centered_at([0.0, 0.0]))?;
    let unit = CgoParameters::for_sector(w, 1.0, k, phi, branch)?.with_kind(RhoKind::Harmonic);
    let dir: Vec<Complex64> = make_rho(&unit).iter().map(|z| z / 2f64.sqrt()).collect();
    let predicted_limit = sector_laplace(&h, w, &dir)? * contrast.eta * 2f64.sqrt().powi(-(n as i32) - 2);

    let mut report = ExperimentReport::new("ortho-decay", &(contrast, v1, taus, phi, branch, size));
    let last = rows.last().ok_or_else(|| invalid("taus", "every tau underflows"))?;
    let top = last.tau / 2.0;
    let variation = rows
        .iter()
        .filter(|r| r.tau >= top * (1.0 - 1e-12))
        .map(|r| (r.rescaled - last.rescaled).norm())
        .fold(0.0, f64::max)
        / last.rescaled.norm().max(f64::MIN_POSITIVE);
    report.info("last_rescaled_abs", last.rescaled.norm(), "volume quadrature");
    report.info(
        "predicted_limit_abs",
        predicted_limit.norm(),
        "sector Laplace transform",
    );
    if contrast.eta != 0.0 {
        report.record(
            "top_octave_variation",
            variation,
            Some(0.05),
            Relation::AtMost,
            "stabilization tolerance",
        );
        let mismatch = (last.rescaled - predicted_limit).norm() / predicted_limit.norm();
        report.record(
            "limit_mismatch",
            mismatch,
            Some(0.05),
            Relation::AtMost,
            "two independent evaluations",
        );
    } else {
        report.info("top_octave_variation", variation, "stabilization tolerance");
    }
    Ok(OrthoOutcome {
        report,
        rows,
        predicted_limit,
        capped,
    })
}

/// `(n+ . y)^2 (n- . y)^2 exp(-|y - c|^2)` with `n+-` the unit normals of the
/// two sector edges, `y` relative to the vertex; it vanishes to second order
/// on both edge lines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeBump {
    pub amplitude: f64,
    pub center: [f64; 2],
}

impl EdgeBump {
    fn normals(ts: &TruncatedSector) -> ([f64; 2], [f64; 2]) {
        let w = ts.base();
        let phi0 = w.half_aperture();
        let a = w.ray_direction(phi0);
        let b = w.ray_direction(-phi0);
        ([-a[1], a[0]], [b[1], -b[0]])
    }

    /// Value, gradient and Laplacian at `x`.
    pub fn eval(&self, ts: &TruncatedSector, x: [f64; 2]) -> (f64, [f64; 2], f64) {
        let (np, nm) = Self::normals(ts);
        let v = ts.base().vertex();
        let y = [x[0] - v[0], x[1] - v[1]];
        let a = np[0] * y[0] + np[1] * y[1];
        let b = nm[0] * y[0] + nm[1] * y[1];
        let d = [y[0] - self.center[0], y[1] - self.center[1]];
        let g = (-(d[0] * d[0] + d[1] * d[1])).exp() * self.amplitude;
        let p = a * a * b * b;
        let grad_p = [
            2.0 * a * b * b * np[0] + 2.0 * a * a * b * nm[0],
            2.0 * a * b * b * np[1] + 2.0 * a * a * b * nm[1],
        ];
        let lap_p = 2.0 * b * b + 2.0 * a * a + 8.0 * a * b * (np[0] * nm[0] + np[1] * nm[1]);
        let grad_g = [-2.0 * d[0] * g, -2.0 * d[1] * g];
        let lap_g = (4.0 * (d[0] * d[0] + d[1] * d[1]) - 4.0) * g;
        let value = p * g;
        let grad = [grad_p[0] * g + p * grad_g[0], grad_p[1] * g + p * grad_g[1]];
        let lap = lap_p * g + 2.0 * (grad_p[0] * grad_g[0] + grad_p[1] * grad_g[1]) + p * lap_g;
        (value, grad, lap)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreenRow {
    pub tau: f64,
    /// `int (Lap u + k^2 q u) w` with `Lap u = (rho.rho) u`.
    pub lhs: Complex64,
    /// `int (Lap w + k^2 q w) u`.
    pub volume: Complex64,
    /// `int_arc (d_nu u w - d_nu w u)`.
    pub boundary: Complex64,
    /// `|lhs - volume - boundary| / max(|lhs|, |volume|, |boundary|)`.
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct GreenOutcome {
    pub report: ExperimentReport,
    pub rows: Vec<GreenRow>,
    pub delta0: f64,
}

/// Green's second identity on `S_{R/2}` for the CGO profile `exp(-rho.x)`
/// and an edge bump; also fits the decay rate of the arc term.
pub fn run_green_identity_check(
    contrast: &SectorContrast,
    bump: &EdgeBump,
    k: f64,
    taus: &[f64],
    phi: f64,
    branch: Branch,
    size: QuadratureSize,
) -> Result<GreenOutcome> {
    if taus.is_empty() {
        return Err(invalid("taus", "empty tau grid"));
    }
    let ts = contrast.sector;
    let w = ts.base();
    let phi0 = w.half_aperture();
    let rmax = 0.5 * ts.radius();
    let v = w.vertex();
    let eps = 0.5 * (0.5 * w.beta()).min(rmax);
    let delta0 = decay_margin(&ts, eps, phi)?;
    let radial = gauss_legendre_on(size.radial, 0.0, rmax);
    let angular = gauss_legendre_on(size.angular, -phi0, phi0);
    let k2 = k * k;
    let rows = taus
        .par_iter()
        .map(|&tau| {
            let p = CgoParameters::for_sector(w, tau, k, phi, branch)?;
            let rho = make_rho(&p);
            let rr = rho_square(&rho);
            let (mut lhs, mut vol) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
            for &(a, wa) in &angular {
                let d = w.ray_direction(a);
                for &(r, wr) in &radial {
                    let x = [v[0] + r * d[0], v[1] + r * d[1]];
                    let u = p.profile(&x);
                    let q = 1.0 + contrast.at_radius(r);
                    let (wv, _, wl) = bump.eval(&ts, x);
                    let jac = r * wr * wa;
                    lhs += (rr + k2 * q) * u * wv * jac;
                    vol += (wl + k2 * q * wv) * u * jac;
                }
            }
            let mut boundary = Complex64::new(0.0, 0.0);
            for &(a, wa) in &angular {
                let d = w.ray_direction(a);
                let x = [v[0] + rmax * d[0], v[1] + rmax * d[1]];
                let u = p.profile(&x);
                let du = -(rho[0] * d[0] + rho[1] * d[1]) * u;
                let (wv, wg, _) = bump.eval(&ts, x);
                let dw = wg[0] * d[0] + wg[1] * d[1];
                boundary += (du * wv - dw * u) * (rmax * wa);
            }
            let scale = lhs.norm().max(vol.norm()).max(boundary.norm());
            let residual = if scale == 0.0 {
                0.0
            } else {
                (lhs - vol - boundary).norm() / scale
            };
            Ok(GreenRow {
                tau,
                lhs,
                volume: vol,
                boundary,
                residual,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = ExperimentReport::new("green-check", &(contrast, bump, k, taus, phi, branch, size));
    let worst = rows.iter().map(|r| r.residual).fold(0.0, f64::max);
    report.record(
        "identity_residual",
        worst,
        Some(1e-8),
        Relation::AtMost,
        "quadrature tolerance",
    );
    report.info("delta0", delta0, "closed-form margin");
    let live: Vec<&GreenRow> = rows.iter().filter(|r| r.boundary.norm() > 0.0).collect();
    if live.len() >= 2 {
        let t: Vec<f64> = live.iter().map(|r| r.tau).collect();
        let l: Vec<f64> = live.iter().map(|r| r.boundary.norm().ln()).collect();
        let slope = least_squares_slope(&t, &l);
        report.record(
            "boundary_decay_slope",
            slope,
            Some(-delta0),
            Relation::AtMost,
            "closed-form margin",
        );
    }
    Ok(GreenOutcome { report, rows, delta0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RemainderRow {
    pub tau: f64,
    pub psi_norm: f64,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct CgoDecayOutcome {
    pub report: ExperimentReport,
    pub decay: Vec<DecayReport>,
    pub remainder: Vec<RemainderRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CgoDecayConfig {
    pub eps: f64,
    pub k: f64,
    pub phi: f64,
    pub branch: Branch,
    pub samples: usize,
}

/// Profile decay on `D_{eps,R}` for each `tau`, and optionally the remainder
/// norms with their fitted exponent.
pub fn run_cgo_decay(
    ts: &TruncatedSector,
    config: &CgoDecayConfig,
    taus: &[f64],
    remainder: Option<(&SectorContrast, &RemainderOptions)>,
) -> Result<CgoDecayOutcome> {
    let region = neighborhood_region(ts, config.eps)?;
    let decay = taus
        .iter()
        .map(|&tau| {
            let p = CgoParameters::for_sector(ts.base(), tau, config.k, config.phi, config.branch)?;
            profile_decay_check(&p, &region, config.samples)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = ExperimentReport::new("cgo-decay", &(ts, config, taus));
    let worst = decay.iter().map(|d| d.max_profile / d.bound).fold(0.0, f64::max);
    report.record(
        "max_profile_over_bound",
        worst,
        Some(1.0 + 1e-12),
        Relation::AtMost,
        "exponential bound",
    );
    let mut rows = Vec::new();
    if let Some((contrast, opts)) = remainder {
        rows = taus
            .iter()
            .map(|&tau| {
                let p = CgoParameters::for_sector(ts.base(), tau, config.k, config.phi, config.branch)?;
                let r = solve_cgo_remainder(contrast, &p, opts)?;
                Ok(RemainderRow {
                    tau,
                    psi_norm: r.norm,
                    residual: r.residual,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let worst = rows.iter().map(|r| r.residual).fold(0.0, f64::max);
        report.record(
            "remainder_residual",
            worst,
            Some(1e-6),
            Relation::AtMost,
            "relative PDE residual",
        );
        if rows.len() >= 2 && rows.iter().all(|r| r.psi_norm > 0.0) {
            let x: Vec<f64> = rows.iter().map(|r| r.tau.ln()).collect();
            let y: Vec<f64> = rows.iter().map(|r| r.psi_norm.ln()).collect();
            report.record(
                "remainder_exponent",
                least_squares_slope(&x, &y),
                Some(-0.1),
                Relation::AtMost,
                "desk-scale decay",
            );
        }
    }
    Ok(CgoDecayOutcome {
        report,
        decay,
        remainder: rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubeFftRow {
    pub index: [i64; 3],
    pub xi: [f64; 3],
    pub closed_form: f64,
    /// Closed form summed over the aliases `xi + 2 pi p / h`.
    pub aliased: Complex64,
    pub dft: Complex64,
}

#[derive(Debug, Clone)]
pub struct CubeFftOutcome {
    pub report: ExperimentReport,
    pub rows: Vec<CubeFftRow>,
}

/// Alias terms kept on each side in the one-dimensional sums.
pub const ALIAS_TERMS: i64 = 20_000;

/// Symmetric alias sum `sum_p (-1)^p g(x + 2 pi p / h)` for cell-centred nodes.
fn aliased_interval(x: f64, a: f64, h: f64) -> f64 {
    let period = 2.0 * PI / h;
    let mut s = interval_fourier(x, a);
    for p in 1..=ALIAS_TERMS {
        let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
        s += sign * (interval_fourier(x + period * p as f64, a) + interval_fourier(x - period * p as f64, a));
    }
    s
}

/// DFT of the indicator of `[-a, a]^3` sampled at cell centres of an
/// `n^3` grid on `[-side/2, side/2]^3`, against the closed-form transform.
pub fn run_cube_fft_check(nodes: usize, side: f64, half_width: f64, indices: &[[i64; 3]]) -> Result<CubeFftOutcome> {
    if nodes < 4 || !(side > 2.0 * half_width) {
        return Err(invalid(
            "nodes",
            "grid must be at least 4 nodes and wider than the cube",
        ));
    }
    let h = side / nodes as f64;
    let faces = half_width / h;
    if (faces - faces.round()).abs() > 1e-9 {
        return Err(invalid("half_width", "cube faces must fall on cell faces"));
    }
    let x0 = -0.5 * side + 0.5 * h;
    let inside = |j: usize| (x0 + j as f64 * h).abs() < half_width;
    let n = nodes;
    let mut data = vec![Complex64::new(0.0, 0.0); n * n * n];
    for i in 0..n {
        for j in 0..n {
            for l in 0..n {
                if inside(i) && inside(j) && inside(l) {
                    data[(i * n + j) * n + l] = Complex64::new(1.0, 0.0);
                }
            }
        }
    }
    NdFft::new(&[n, n, n]).process(&mut data, false);
    let wrap = |m: i64| m.rem_euclid(n as i64) as usize;
    let rows: Vec<CubeFftRow> = indices
        .iter()
        .map(|&m| {
            let xi = [0, 1, 2].map(|a| 2.0 * PI * m[a] as f64 / side);
            let raw = data[(wrap(m[0]) * n + wrap(m[1])) * n + wrap(m[2])];
            let phase = Complex64::from_polar(1.0, -(xi[0] + xi[1] + xi[2]) * x0);
            let dft = raw * phase * h.powi(3);
            let aliased: f64 = xi.iter().map(|&x| aliased_interval(x, half_width, h)).product();
            CubeFftRow {
                index: m,
                xi,
                closed_form: cube_characteristic_fourier(xi, half_width),
                aliased: Complex64::new(aliased, 0.0),
                dft,
            }
        })
        .collect();
    let volume = (2.0 * half_width).powi(3);
    let mut report = ExperimentReport::new("cube-fft", &(nodes, side, half_width, indices));
    let err = rows.iter().map(|r| (r.aliased - r.dft).norm()).fold(0.0, f64::max) / volume;
    report.record(
        "max_error_over_volume",
        err,
        Some(1e-6),
        Relation::AtMost,
        "alias-corrected closed form",
    );
    let plain = rows.iter().map(|r| (r.dft - r.closed_form).norm()).fold(0.0, f64::max) / volume;
    report.info("unaliased_error_over_volume", plain, "closed form without aliases");
    let spot = cube_characteristic_fourier([0.5 * PI; 3], 1.0);
    report.record(
        "spot_value_error",
        (spot - 64.0 / PI.powi(3)).abs(),
        Some(1e-12),
        Relation::AtMost,
        "closed form",
    );
    Ok(CubeFftOutcome { report, rows })
}

/// Twenty low lattice frequencies used by default.
pub fn default_cube_indices() -> Vec<[i64; 3]> {
    vec![
        [0, 0, 0],
        [1, 0, 0],
        [0, 1, 0],
        [0, 0, 1],
        [1, 1, 0],
        [1, 1, 1],
        [2, 0, 1],
        [-1, 2, 0],
        [3, -1, 2],
        [4, 0, 0],
        [0, -5, 1],
        [2, 2, 2],
        [-3, 3, -3],
        [6, 1, 0],
        [1, 7, -2],
        [8, 0, -1],
        [5, 5, 0],
        [-2, -4, 6],
        [10, 3, 1],
        [12, -6, 4],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ConvexPolygon, SectorGeometry};
    use crate::lsolver::{Profile, Scatterer};
    use std::f64::consts::FRAC_PI_6;

    fn polygon(v: Vec<[f64; 2]>, cells: usize) -> ContrastSpec {
        ContrastSpec::new(
            Scatterer::Polygon {
                polygon: ConvexPolygon::new(v).unwrap(),
            },
            Profile::Constant { eta: 0.5 },
            Resolution::Cells(cells),
        )
    }

    fn square(cells: usize) -> ContrastSpec {
        polygon(vec![[-0.5, -0.5], [0.5, -0.5], [0.5, 0.5], [-0.5, 0.5]], cells)
    }

    fn sector() -> TruncatedSector {
        TruncatedSector::new(SectorGeometry::canonical(FRAC_PI_6).unwrap(), 1.0).unwrap()
    }

    fn small_config() -> DistinguishConfig {
        DistinguishConfig {
            directions: 32,
            ..Default::default()
        }
    }

    #[test]
    fn identical_scenes_are_indistinguishable() {
        let inc = IncidentWave::plane(3.0, &[1.0, 0.0]).unwrap();
        let out = run_distinguish(&square(24), &square(24), &inc, &small_config()).unwrap();
        assert_eq!(out.report.metric("discrepancy").unwrap(), 0.0);
        assert!(!out.report.passed);
    }

    #[test]
    fn triangle_and_square_differ_symmetrically() {
        let inc = IncidentWave::plane(3.0, &[1.0, 0.0]).unwrap();
        let tri = polygon(vec![[-0.6, -0.5], [0.6, -0.5], [0.0, 0.6]], 24);
        let ab = run_distinguish(&tri, &square(24), &inc, &small_config()).unwrap();
        let ba = run_distinguish(&square(24), &tri, &inc, &small_config()).unwrap();
        assert!(ab.report.passed);
        for key in ["discrepancy", "solver_error"] {
            assert_eq!(ab.report.metric(key), ba.report.metric(key));
        }
        assert_eq!(ab.report.input_digest.len(), 64);
        assert_ne!(ab.report.input_digest, ba.report.input_digest);
    }

    #[test]
    fn translated_copy_keeps_far_field_moduli() {
        let inc = IncidentWave::plane(3.0, &[1.0, 0.0]).unwrap();
        let moved = polygon(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]], 24);
        let out = run_distinguish(&square(24), &moved, &inc, &small_config()).unwrap();
        assert!(out.report.metric("discrepancy").unwrap() > 0.1);
        assert!(out.report.metric("modulus_discrepancy").unwrap() < 1e-8);
    }

    #[test]
    fn nonscattering_scan_is_positive_and_control_vanishes() {
        let family = IncidentFamily {
            plane_directions: 4,
            herglotz_draws: 2,
            seed: 3,
        };
        let ks = [1.0, 2.0, 3.0];
        let out = run_nonscattering_scan(&square(16), &ks, &family, 32, &SolverOptions::default()).unwrap();
        assert!(out.report.passed, "{:?}", out.report.metrics);
        assert_eq!(out.points.len(), 3 * 6);
        // adding points can only lower the minimum
        let more = run_nonscattering_scan(
            &square(16),
            &[1.0, 2.0, 3.0, 4.0],
            &family,
            32,
            &SolverOptions::default(),
        )
        .unwrap();
        assert!(more.report.metric("min_ratio").unwrap() <= out.report.metric("min_ratio").unwrap());

        let c = build_contrast(&square(16)).unwrap();
        let trivial = ContrastField::from_samples(c.grid().clone(), vec![1.0; c.grid().len()], vec![]).unwrap();
        let (pts, noise) =
            nonscattering_scan_fields(&trivial, None, &ks, &family, 32, &SolverOptions::default()).unwrap();
        assert_eq!(noise, 0.0);
        assert!(pts.iter().all(|p| p.ratio == 0.0));
    }

    #[test]
    fn corner_integral_matches_closed_form_for_constant_field() {
        // v = 1, q - 1 = 1 on S_{R/2}: the exact value is the truncated transform
        let ts = sector();
        let contrast = SectorContrast::constant(ts, 1.0);
        let p = CgoParameters::for_sector(ts.base(), 20.0, 1.0, 0.1, Branch::Plus).unwrap();
        let h = HarmonicHomogeneousPolynomial::planar(0, Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)).unwrap();
        let t = crate::laplace::truncated_sector_laplace(&h, &ts, &make_rho(&p)).unwrap();
        let i = corner_integral(&contrast, |_| Complex64::new(1.0, 0.0), &p, QuadratureSize::default()).unwrap();
        assert!((i - t).norm() < 1e-9 * t.norm());
        let fine = QuadratureSize {
            radial: 400,
            angular: 128,
        };
        let i = corner_integral(&contrast, |_| Complex64::new(1.0, 0.0), &p, fine).unwrap();
        assert!((i - t).norm() < 1e-13 * t.norm());
    }

    #[test]
    fn orthogonality_limit_for_constant_contrast() {
        let taus: Vec<f64> = (0..5).map(|j| 40.0 * 2f64.powf(j as f64 / 4.0)).collect();
        for n in [0i64, 1] {
            let v1 = FourierBesselMode::new(1.0, n, Complex64::new(1.0, 0.0)).unwrap();
            let out = run_orthogonality_decay(
                &SectorContrast::constant(sector(), 0.5),
                &v1,
                &taus,
                0.0,
                Branch::Plus,
                QuadratureSize::default(),
            )
            .unwrap();
            assert!(out.report.passed, "n={n}: {:?}", out.report.metrics);
        }
    }

    #[test]
    fn vanishing_contrast_at_vertex_decays() {
        let taus = [20.0, 40.0, 80.0];
        let v1 = FourierBesselMode::new(1.0, 0, Complex64::new(1.0, 0.0)).unwrap();
        let zero_eta = SectorContrast {
            sector: sector(),
            eta: 0.0,
            alpha: 1.0,
            c: 1.0,
        };
        let out = run_orthogonality_decay(&zero_eta, &v1, &taus, 0.0, Branch::Plus, QuadratureSize::default()).unwrap();
        let r: Vec<f64> = out.rows.iter().map(|r| r.rescaled.norm()).collect();
        assert!(r[2] < r[1] && r[1] < r[0]);
        let reference = run_orthogonality_decay(
            &SectorContrast::constant(sector(), 0.5),
            &v1,
            &taus,
            0.0,
            Branch::Plus,
            QuadratureSize::default(),
        )
        .unwrap();
        assert!(r[2] < 0.1 * reference.predicted_limit.norm());
        // a Hoelder term drifts towards the same limit
        let hoelder = SectorContrast {
            sector: sector(),
            eta: 0.5,
            alpha: 0.3,
            c: 0.5,
        };
        let out = run_orthogonality_decay(
            &hoelder,
            &v1,
            &[20.0, 80.0, 320.0],
            0.0,
            Branch::Plus,
            QuadratureSize::default(),
        )
        .unwrap();
        let lim = reference.predicted_limit;
        let dev: Vec<f64> = out
            .rows
            .iter()
            .map(|r| (r.rescaled - lim).norm() / lim.norm())
            .collect();
        assert!(dev[2] < dev[1] && dev[1] < dev[0], "{dev:?}");
    }

    #[test]
    fn green_identity_balances() {
        let bump = EdgeBump {
            amplitude: 1.0,
            center: [0.3, 0.0],
        };
        let contrast = SectorContrast {
            sector: sector(),
            eta: 0.5,
            alpha: 0.5,
            c: 0.2,
        };
        let out = run_green_identity_check(
            &contrast,
            &bump,
            2.0,
            &[15.0, 30.0, 60.0],
            0.1,
            Branch::Minus,
            QuadratureSize::default(),
        )
        .unwrap();
        assert!(out.report.passed, "{:?}", out.report.metrics);
        let zero = EdgeBump { amplitude: 0.0, ..bump };
        let out = run_green_identity_check(
            &contrast,
            &zero,
            2.0,
            &[30.0],
            0.1,
            Branch::Minus,
            QuadratureSize::default(),
        )
        .unwrap();
        assert!(out
            .rows
            .iter()
            .all(|r| r.lhs.norm() == 0.0 && r.volume.norm() == 0.0 && r.boundary.norm() == 0.0));
    }

    #[test]
    fn bump_vanishes_on_edges() {
        let ts = sector();
        let bump = EdgeBump {
            amplitude: 1.0,
            center: [0.3, 0.0],
        };
        for s in [0.1, 0.4, 0.9] {
            for phi in [FRAC_PI_6, -FRAC_PI_6] {
                let d = ts.base().ray_direction(phi);
                let (v, g, _) = bump.eval(&ts, [s * d[0], s * d[1]]);
                assert!(v.abs() < 1e-15 && g[0].abs() < 1e-15 && g[1].abs() < 1e-15);
            }
        }
        // Laplacian against finite differences
        let x = [0.31, 0.07];
        let h = 1e-4;
        let f = |a: f64, b: f64| bump.eval(&ts, [a, b]).0;
        let fd = (f(x[0] + h, x[1]) + f(x[0] - h, x[1]) + f(x[0], x[1] + h) + f(x[0], x[1] - h) - 4.0 * f(x[0], x[1]))
            / (h * h);
        assert!((fd - bump.eval(&ts, x).2).abs() < 1e-5);
    }

    #[test]
    fn cgo_decay_driver() {
        let config = CgoDecayConfig {
            eps: 0.1,
            k: 1.0,
            phi: 0.0,
            branch: Branch::Plus,
            samples: 32,
        };
        let out = run_cgo_decay(&sector(), &config, &[10.0, 20.0, 40.0], None).unwrap();
        assert!(out.report.passed);
        assert!(out.remainder.is_empty());
    }

    #[test]
    fn cube_fft_small_grid() {
        let idx = default_cube_indices();
        let out = run_cube_fft_check(32, 4.0, 1.0, &idx[..8]).unwrap();
        assert!(out.report.passed, "{:?}", out.report.metrics);
        assert!((out.rows[0].dft.re - 8.0).abs() < 1e-12);
        assert!(run_cube_fft_check(32, 4.0, 1.01, &idx).is_err());
    }

    #[test]
    fn digest_is_stable() {
        assert_eq!(digest(&(1, "a")), digest(&(1, "a")));
        assert_ne!(digest(&(1, "a")), digest(&(2, "a")));
    }
}
