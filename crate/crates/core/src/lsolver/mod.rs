//! Volume-integral forward solver for `u = u_in + k^2 V[(q - 1) u]`.
//!
//! Piecewise-constant collocation on the contrast grid; `V` is applied with
//! the cell-integrated kernel through a zero-padded FFT convolution, so the
//! discrete operator is exact Toeplitz with no kernel cutoff. The linear
//! system is solved by restarted GMRES (Born iteration on request).

mod contrast;
mod gmres;
pub(crate) mod kernel;

pub use contrast::{
    build_contrast, ContrastField, ContrastSpec, CornerInfo, Grid, PolyTerm, Profile, Resolution, Scatterer,
};
pub use gmres::{gmres, KrylovOutcome};
pub use kernel::{cell_kernel, KernelConvolution};

use crate::error::{invalid, Error, Result};
use crate::incident::{DirectionRule, IncidentWave};
use crate::specfun::{distance, green_2d, green_3d};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::time::Instant;

/// Below this many points per interior wavelength a solve is refused.
pub const MIN_POINTS_PER_WAVELENGTH: f64 = 4.0;
/// Below this many points per interior wavelength a warning is recorded.
pub const WARN_POINTS_PER_WAVELENGTH: f64 = 8.0;
/// Default resolution used when sizing grids from a wavelength.
pub const DEFAULT_POINTS_PER_WAVELENGTH: f64 = 12.0;

/// Tag stored with every far-field pattern.
pub const FAR_FIELD_NORMALIZATION: &str =
    "u_inf = gamma k^2 int exp(-ik xhat.y) (q-1) u dy; gamma_2 = exp(i pi/4)/sqrt(8 pi k), gamma_3 = 1/(4 pi)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMethod {
    Gmres,
    Born,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub restart: usize,
    pub method: SolverMethod,
    /// Padded FFT length per axis is `ceil(padding_factor * n)`, at least `2n - 1`.
    pub padding_factor: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-8,
            max_iter: 2000,
            restart: 50,
            method: SolverMethod::Gmres,
            padding_factor: 2.0,
        }
    }
}

/// Solver run record (kept out of deterministic data files by the CLI).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub iterations: usize,
    pub residual: f64,
    pub grid: Vec<usize>,
    pub padded_grid: Vec<usize>,
    pub h: f64,
    pub points_per_wavelength: f64,
    pub method: SolverMethod,
    pub warnings: Vec<String>,
    pub runtime_seconds: f64,
}

/// Discretized Lippmann-Schwinger operator for one contrast and wavenumber.
pub struct LsOperator {
    contrast: ContrastField,
    k: f64,
    conv: Option<KernelConvolution>,
    /// `k^2 (q - 1)` per cell.
    weight: Vec<f64>,
    warnings: Vec<String>,
    ppw: f64,
}

impl LsOperator {
    pub fn new(contrast: &ContrastField, k: f64) -> Result<Self> {
        Self::with_padding(contrast, k, 2.0)
    }

    pub fn with_padding(contrast: &ContrastField, k: f64, padding_factor: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(invalid("k", format!("wavenumber {k} must be positive")));
        }
        if !(padding_factor >= 2.0 && padding_factor.is_finite()) {
            return Err(invalid(
                "padding_factor",
                format!("{padding_factor} must be at least 2"),
            ));
        }
        let ppw = contrast.points_per_wavelength(k);
        let mut warnings = Vec::new();
        if ppw < MIN_POINTS_PER_WAVELENGTH {
            return Err(Error::Resolution {
                points_per_wavelength: ppw,
                required: MIN_POINTS_PER_WAVELENGTH,
            });
        }
        if ppw < WARN_POINTS_PER_WAVELENGTH {
            warnings.push(format!(
                "grid resolves only {ppw:.2} points per wavelength (recommended at least {WARN_POINTS_PER_WAVELENGTH})"
            ));
        }
        let weight: Vec<f64> = contrast.q().iter().map(|q| k * k * (q - 1.0)).collect();
        let conv = if contrast.is_trivial() {
            None
        } else {
            let shape = contrast.grid().shape();
            let padded: Vec<usize> = shape
                .iter()
                .map(|&n| ((padding_factor * n as f64).ceil() as usize).max(2 * n - 1))
                .collect();
            Some(KernelConvolution::new(k, contrast.grid().h(), shape, &padded))
        };
        Ok(LsOperator {
            contrast: contrast.clone(),
            k,
            conv,
            weight,
            warnings,
            ppw,
        })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn contrast(&self) -> &ContrastField {
        &self.contrast
    }

    /// `k^2 V[(q-1) u]`.
    pub fn scattered_part(&self, u: &[Complex64], out: &mut [Complex64]) {
        match &self.conv {
            None => out.iter_mut().for_each(|o| *o = Complex64::new(0.0, 0.0)),
            Some(conv) => {
                let f: Vec<Complex64> = u.iter().zip(&self.weight).map(|(a, w)| a * w).collect();
                conv.apply(&f, out);
            }
        }
    }

    /// `u - k^2 V[(q-1) u]`.
    pub fn apply(&self, u: &[Complex64], out: &mut [Complex64]) {
        self.scattered_part(u, out);
        for (o, a) in out.iter_mut().zip(u) {
            *o = a - *o;
        }
    }

    /// Incident field sampled at the cell centres.
    pub fn sample_incident(&self, inc: &IncidentWave) -> Result<Vec<Complex64>> {
        let grid = self.contrast.grid();
        if inc.dim() != grid.dim() {
            return Err(Error::DimensionMismatch {
                expected: grid.dim(),
                got: inc.dim(),
            });
        }
        (0..grid.len())
            .into_par_iter()
            .map(|lin| inc.eval(&grid.center(lin)))
            .collect()
    }

    /// `max |u - u_in - k^2 V[(q-1)u]|`.
    pub fn ls_residual(&self, u: &[Complex64], u_in: &[Complex64]) -> f64 {
        let mut au = vec![Complex64::new(0.0, 0.0); u.len()];
        self.apply(u, &mut au);
        au.iter().zip(u_in).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn solve(&self, inc: &IncidentWave, opts: &SolverOptions) -> Result<TotalFieldSolution> {
        let start = Instant::now();
        if (inc.k() - self.k).abs() > 1e-14 * self.k {
            return Err(invalid("k", "incident wavenumber differs from the operator's"));
        }
        if let crate::incident::IncidentKind::PointSource { source } = inc.kind() {
            if let Some(lin) = self.contrast.grid().locate(source) {
                if self.weight[lin] != 0.0 {
                    return Err(Error::InsideSupport(source.clone()));
                }
            }
        }
        if !(opts.tol > 0.0) {
            return Err(invalid("tol", "tolerance must be positive"));
        }
        let u_in = self.sample_incident(inc)?;
        let mut u = u_in.clone();
        let (iterations, residual) = if self.conv.is_none() {
            (0, 0.0)
        } else {
            match opts.method {
                SolverMethod::Gmres => {
                    let out = gmres(
                        |v, o| self.apply(v, o),
                        &u_in,
                        &mut u,
                        opts.restart,
                        opts.tol,
                        opts.max_iter,
                    );
                    if !out.converged {
                        return Err(Error::NotConverged {
                            iterations: out.iterations,
                            residual: out.relative_residual,
                        });
                    }
                    (out.iterations, out.relative_residual)
                }
                SolverMethod::Born => self.born(&u_in, &mut u, opts)?,
            }
        };
        Ok(TotalFieldSolution {
            contrast: self.contrast.clone(),
            incident: inc.clone(),
            u,
            u_in,
            diagnostics: SolverDiagnostics {
                iterations,
                residual,
                grid: self.contrast.grid().shape().to_vec(),
                padded_grid: self
                    .conv
                    .as_ref()
                    .map_or_else(|| self.contrast.grid().shape().to_vec(), |c| c.padded_shape().to_vec()),
                h: self.contrast.grid().h(),
                points_per_wavelength: self.ppw,
                method: opts.method,
                warnings: self.warnings.clone(),
                runtime_seconds: start.elapsed().as_secs_f64(),
            },
        })
    }

    /// Neumann series `u <- u_in + k^2 V[(q-1)u]`.
    fn born(&self, u_in: &[Complex64], u: &mut [Complex64], opts: &SolverOptions) -> Result<(usize, f64)> {
        let norm_in = u_in.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let mut scat = vec![Complex64::new(0.0, 0.0); u.len()];
        let mut au = vec![Complex64::new(0.0, 0.0); u.len()];
        for it in 1..=opts.max_iter {
            self.scattered_part(u, &mut scat);
            for ((ui, ii), si) in u.iter_mut().zip(u_in).zip(&scat) {
                *ui = ii + si;
            }
            self.apply(u, &mut au);
            let res = au.iter().zip(u_in).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt()
                / norm_in.max(f64::MIN_POSITIVE);
            if !res.is_finite() {
                return Err(Error::NotConverged {
                    iterations: it,
                    residual: res,
                });
            }
            if res <= opts.tol {
                return Ok((it, res));
            }
            if it == opts.max_iter {
                return Err(Error::NotConverged {
                    iterations: it,
                    residual: res,
                });
            }
        }
        Ok((0, 0.0))
    }
}

/// Total field on the contrast grid together with its inputs.
#[derive(Debug, Clone)]
pub struct TotalFieldSolution {
    contrast: ContrastField,
    incident: IncidentWave,
    u: Vec<Complex64>,
    u_in: Vec<Complex64>,
    pub diagnostics: SolverDiagnostics,
}

impl TotalFieldSolution {
    pub fn contrast(&self) -> &ContrastField {
        &self.contrast
    }

    pub fn incident(&self) -> &IncidentWave {
        &self.incident
    }

    pub fn k(&self) -> f64 {
        self.incident.k()
    }

    /// Total field at the cell centres.
    pub fn u(&self) -> &[Complex64] {
        &self.u
    }

    /// Incident field at the cell centres.
    pub fn u_in(&self) -> &[Complex64] {
        &self.u_in
    }

    /// `k^2 (q-1) u h^N` per cell: the discrete source density.
    fn sources(&self) -> Vec<(usize, Complex64)> {
        let k = self.k();
        let vol = self.contrast.grid().cell_volume();
        self.contrast
            .q()
            .iter()
            .zip(&self.u)
            .enumerate()
            .filter(|(_, (q, _))| **q != 1.0)
            .map(|(i, (q, u))| (i, u * (k * k * (q - 1.0) * vol)))
            .collect()
    }
}

/// Builds the operator and solves in one call.
pub fn solve_total_field(
    contrast: &ContrastField,
    inc: &IncidentWave,
    opts: &SolverOptions,
) -> Result<TotalFieldSolution> {
    LsOperator::with_padding(contrast, inc.k(), opts.padding_factor)?.solve(inc, opts)
}

/// Far-field samples with their direction rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FarFieldPattern {
    pub k: f64,
    pub rule: DirectionRule,
    pub values: Vec<Complex64>,
    pub normalization: String,
}

impl FarFieldPattern {
    pub fn new(k: f64, rule: DirectionRule, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != rule.len() {
            return Err(Error::DimensionMismatch {
                expected: rule.len(),
                got: values.len(),
            });
        }
        if rule.len() < 32 {
            return Err(invalid(
                "directions",
                format!("{} directions; at least 32 are required", rule.len()),
            ));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(invalid("values", "far-field samples must be finite"));
        }
        Ok(FarFieldPattern {
            k,
            rule,
            values,
            normalization: FAR_FIELD_NORMALIZATION.to_string(),
        })
    }

    pub fn dim(&self) -> usize {
        self.rule.dim()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `L^2` norm on the circle or sphere with the rule's weights.
    pub fn l2_norm(&self) -> f64 {
        self.values
            .iter()
            .zip(self.rule.weights())
            .map(|(v, w)| w * v.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// `||self - other|| / ||other||` on the shared rule.
    pub fn relative_l2_error(&self, reference: &FarFieldPattern) -> Result<f64> {
        if self.rule != reference.rule {
            return Err(invalid("rule", "patterns are sampled on different rules"));
        }
        let diff: f64 = self
            .values
            .iter()
            .zip(&reference.values)
            .zip(self.rule.weights())
            .map(|((a, b), w)| w * (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        Ok(diff / reference.l2_norm())
    }
}

/// `gamma_N`.
pub fn far_field_constant(k: f64, dim: usize) -> Complex64 {
    if dim == 2 {
        Complex64::from_polar(1.0 / (8.0 * PI * k).sqrt(), PI / 4.0)
    } else {
        Complex64::new(1.0 / (4.0 * PI), 0.0)
    }
}

/// `u_inf(xhat)` for one unit direction.
pub fn far_field_at(sol: &TotalFieldSolution, xhat: &[f64]) -> Result<Complex64> {
    let grid = sol.contrast.grid();
    if xhat.len() != grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            got: xhat.len(),
        });
    }
    Ok(far_field_sum(sol, &sol.sources(), xhat))
}

fn far_field_sum(sol: &TotalFieldSolution, sources: &[(usize, Complex64)], xhat: &[f64]) -> Complex64 {
    let grid = sol.contrast.grid();
    let k = sol.k();
    let dim = grid.dim();
    // exp(-ik xhat.y) factorizes over the axes
    let phases: Vec<Vec<Complex64>> = (0..dim)
        .map(|a| {
            (0..grid.shape()[a])
                .map(|i| Complex64::from_polar(1.0, -k * xhat[a] * grid.coord(a, i)))
                .collect()
        })
        .collect();
    let shape = grid.shape();
    let sum: Complex64 = sources
        .iter()
        .map(|(lin, s)| {
            let mut r = *lin;
            let mut p = Complex64::new(1.0, 0.0);
            for a in (0..dim).rev() {
                p *= phases[a][r % shape[a]];
                r /= shape[a];
            }
            p * s
        })
        .sum();
    far_field_constant(k, dim) * sum
}

/// Far-field pattern on a direction rule (at least 32 directions).
pub fn far_field(sol: &TotalFieldSolution, directions: &DirectionRule) -> Result<FarFieldPattern> {
    if directions.dim() != sol.contrast.dim() {
        return Err(Error::DimensionMismatch {
            expected: sol.contrast.dim(),
            got: directions.dim(),
        });
    }
    let sources = sol.sources();
    let values = directions
        .directions()
        .par_iter()
        .map(|d| far_field_sum(sol, &sources, d))
        .collect();
    FarFieldPattern::new(sol.k(), directions.clone(), values)
}

/// `u_sc(x) = k^2 int Phi(x, y) (q-1) u dy` by the midpoint rule; `x` must
/// not lie in a contrast cell.
pub fn scattered_field_at(sol: &TotalFieldSolution, x: &[f64]) -> Result<Complex64> {
    let grid = sol.contrast.grid();
    if x.len() != grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            got: x.len(),
        });
    }
    if let Some(lin) = grid.locate(x) {
        if sol.contrast.q()[lin] != 1.0 {
            return Err(Error::InsideSupport(x.to_vec()));
        }
    }
    let k = sol.k();
    let dim = grid.dim();
    Ok(sol
        .sources()
        .par_iter()
        .map(|(lin, s)| {
            let r = distance(x, &grid.center(*lin));
            s * if dim == 2 { green_2d(k, r) } else { green_3d(k, r) }
        })
        .collect::<Vec<_>>()
        .iter()
        .sum())
}
