//! Uniform cell grids and sampled refractive-index fields.

use crate::error::{invalid, Error, Result};
use crate::geometry::{ConvexPolygon, RectBox};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// Axis-aligned uniform grid of cubic cells, row-major with the last axis
/// fastest. Cell `i` has centre `lo + (i + 1/2) h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    lo: Vec<f64>,
    h: f64,
    n: Vec<usize>,
}

impl Grid {
    pub fn new(lo: Vec<f64>, h: f64, n: Vec<usize>) -> Result<Self> {
        if lo.len() != n.len() || !(2..=3).contains(&n.len()) {
            return Err(invalid("grid", "grid must be 2D or 3D with matching corner"));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(invalid("h", format!("cell size {h} must be positive")));
        }
        if n.contains(&0) {
            return Err(invalid("n", "grid needs at least one cell per axis"));
        }
        Ok(Grid { lo, h, n })
    }

    pub fn dim(&self) -> usize {
        self.n.len()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn shape(&self) -> &[usize] {
        &self.n
    }

    pub fn len(&self) -> usize {
        self.n.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim() as i32)
    }

    /// Centre coordinate along one axis.
    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.lo[axis] + (i as f64 + 0.5) * self.h
    }

    /// Multi-index of a linear index.
    pub fn unravel(&self, mut lin: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for a in (0..self.dim()).rev() {
            idx[a] = lin % self.n[a];
            lin /= self.n[a];
        }
        idx
    }

    pub fn center(&self, lin: usize) -> Vec<f64> {
        self.unravel(lin)
            .iter()
            .enumerate()
            .map(|(a, &i)| self.coord(a, i))
            .collect()
    }

    /// All cell centres, flattened with stride `dim`.
    pub fn centers(&self) -> Vec<f64> {
        let d = self.dim();
        let mut out = Vec::with_capacity(self.len() * d);
        for lin in 0..self.len() {
            out.extend(self.center(lin));
        }
        out
    }

    /// Linear index of the cell containing `x`, if any.
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        let mut lin = 0;
        for a in 0..self.dim() {
            let t = (x[a] - self.lo[a]) / self.h;
            if !(t >= 0.0 && t < self.n[a] as f64) {
                return None;
            }
            lin = lin * self.n[a] + t.floor() as usize;
        }
        Some(lin)
    }

    pub fn hi(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.n)
            .map(|(l, &n)| l + n as f64 * self.h)
            .collect()
    }

    /// Uniform grid covering `[lo, hi]` with `cells` cells along the longest side.
    pub fn covering(lo: &[f64], hi: &[f64], cells: usize) -> Result<Self> {
        if cells == 0 {
            return Err(invalid("cells", "need at least one cell"));
        }
        let longest = lo.iter().zip(hi).map(|(a, b)| b - a).fold(0.0f64, f64::max);
        let h = longest / cells as f64;
        let n: Vec<usize> = lo
            .iter()
            .zip(hi)
            .map(|(a, b)| (((b - a) / h) - 1e-9).ceil().max(1.0) as usize)
            .collect();
        // centre the grid on the box along short axes
        let lo = lo
            .iter()
            .zip(hi)
            .zip(&n)
            .map(|((a, b), &m)| 0.5 * (a + b) - 0.5 * m as f64 * h)
            .collect();
        Grid::new(lo, h, n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Scatterer {
    Polygon { polygon: ConvexPolygon },
    Box { rect: RectBox },
    Disk { center: [f64; 2], radius: f64 },
    Ball { center: [f64; 3], radius: f64 },
}

impl Scatterer {
    pub fn dim(&self) -> usize {
        match self {
            Scatterer::Polygon { .. } | Scatterer::Disk { .. } => 2,
            Scatterer::Box { rect } => rect.dim(),
            Scatterer::Ball { .. } => 3,
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Scatterer::Polygon { polygon } => polygon.contains([x[0], x[1]]),
            Scatterer::Box { rect } => rect.contains(x),
            Scatterer::Disk { center, radius } => (x[0] - center[0]).hypot(x[1] - center[1]) <= *radius,
            Scatterer::Ball { center, radius } => {
                let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                r2 <= radius * radius
            }
        }
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Scatterer::Polygon { polygon } => {
                let (lo, hi) = polygon.bounding_box();
                (lo.to_vec(), hi.to_vec())
            }
            Scatterer::Box { rect } => rect.bounding_box(),
            Scatterer::Disk { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
            Scatterer::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
        }
    }

    /// Corner points (polygon vertices, box corners); empty for smooth shapes.
    pub fn corners(&self) -> Vec<Vec<f64>> {
        match self {
            Scatterer::Polygon { polygon } => polygon.vertices().iter().map(|v| v.to_vec()).collect(),
            Scatterer::Box { rect } => rect.corners(),
            _ => Vec::new(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Scatterer::Disk { radius, .. } | Scatterer::Ball { radius, .. } => {
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(invalid("radius", format!("{radius} must be positive")));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// One monomial `coefficient * x^exponents`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyTerm {
    pub exponents: Vec<u32>,
    pub coefficient: f64,
}

/// Index profile inside the scatterer; `q = 1` outside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    /// `q = 1 + eta`.
    Constant { eta: f64 },
    /// `q = 1 + eta (1 + c r^alpha)`, `r` the distance to the nearest corner.
    Hoelder { eta: f64, alpha: f64, c: f64 },
    /// `q = 1 + sum_t coefficient_t x^exponents_t`.
    Polynomial { terms: Vec<PolyTerm> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resolution {
    /// Cells along the longest side of the bounding box.
    Cells(usize),
    /// Points per interior wavelength `2 pi / (k sqrt(max q))`.
    PointsPerWavelength { ppw: f64, k: f64 },
}

/// Everything needed to sample a contrast on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastSpec {
    pub scatterer: Scatterer,
    pub profile: Profile,
    pub resolution: Resolution,
    /// Sub-samples per cell and axis used to average `q` (1: centre value).
    #[serde(default = "one")]
    pub subsamples: usize,
}

fn one() -> usize {
    1
}

impl ContrastSpec {
    pub fn new(scatterer: Scatterer, profile: Profile, resolution: Resolution) -> Self {
        ContrastSpec {
            scatterer,
            profile,
            resolution,
            subsamples: 1,
        }
    }

    /// Profile value ignoring membership.
    fn profile_value(&self, x: &[f64], corners: &[Vec<f64>]) -> f64 {
        match &self.profile {
            Profile::Constant { eta } => 1.0 + eta,
            Profile::Hoelder { eta, alpha, c } => {
                let r = corners
                    .iter()
                    .map(|o| o.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
                    .fold(f64::INFINITY, f64::min);
                1.0 + eta * (1.0 + c * r.powf(*alpha))
            }
            Profile::Polynomial { terms } => {
                1.0 + terms
                    .iter()
                    .map(|t| {
                        t.coefficient
                            * t.exponents
                                .iter()
                                .zip(x)
                                .map(|(e, v)| v.powi(*e as i32))
                                .product::<f64>()
                    })
                    .sum::<f64>()
            }
        }
    }

    /// `q(x)`, equal to 1 outside the scatterer.
    pub fn q_at(&self, x: &[f64]) -> f64 {
        if self.scatterer.contains(x) {
            self.profile_value(x, &self.scatterer.corners())
        } else {
            1.0
        }
    }

    fn validate(&self) -> Result<()> {
        self.scatterer.validate()?;
        let dim = self.scatterer.dim();
        if self.subsamples == 0 {
            return Err(invalid("subsamples", "must be at least 1"));
        }
        match &self.profile {
            Profile::Constant { eta } => {
                if !eta.is_finite() || 1.0 + eta <= 0.0 {
                    return Err(invalid("eta", format!("q = 1 + {eta} must be positive")));
                }
            }
            Profile::Hoelder { eta, alpha, c } => {
                if self.scatterer.corners().is_empty() {
                    return Err(Error::Hypothesis(
                        "a Hoelder corner profile needs a scatterer with corners".into(),
                    ));
                }
                if !(*alpha > 0.0 && *alpha <= 1.0) {
                    return Err(invalid("alpha", format!("Hoelder exponent {alpha} not in (0, 1]")));
                }
                if !eta.is_finite() || !c.is_finite() {
                    return Err(invalid("eta", "non-finite profile parameter"));
                }
            }
            Profile::Polynomial { terms } => {
                if terms
                    .iter()
                    .any(|t| t.exponents.len() != dim || !t.coefficient.is_finite())
                {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: terms
                            .iter()
                            .map(|t| t.exponents.len())
                            .find(|&l| l != dim)
                            .unwrap_or(dim),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Corner data: location, limit of `q` from inside, Hoelder exponent of
/// the profile there (`None` when smooth).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CornerInfo {
    pub point: Vec<f64>,
    pub q_value: f64,
    pub alpha: Option<f64>,
}

impl CornerInfo {
    /// `q(O) - 1`.
    pub fn eta(&self) -> f64 {
        self.q_value - 1.0
    }
}

/// Refractive index sampled on cell centres.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastField {
    grid: Grid,
    q: Arc<Vec<f64>>,
    corners: Vec<CornerInfo>,
}

impl ContrastField {
    /// Field from raw samples; cells equal to 1 are background.
    pub fn from_samples(grid: Grid, q: Vec<f64>, corners: Vec<CornerInfo>) -> Result<Self> {
        if q.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: q.len(),
            });
        }
        if q.iter().any(|v| !v.is_finite()) {
            return Err(invalid("q", "refractive index must be finite"));
        }
        Ok(ContrastField {
            grid,
            q: Arc::new(q),
            corners,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn corners(&self) -> &[CornerInfo] {
        &self.corners
    }

    pub fn q_max(&self) -> f64 {
        self.q.iter().cloned().fold(1.0, f64::max)
    }

    /// True when `q = 1` everywhere.
    pub fn is_trivial(&self) -> bool {
        self.q.iter().all(|&v| v == 1.0)
    }

    /// Points per interior wavelength at wavenumber `k`.
    pub fn points_per_wavelength(&self, k: f64) -> f64 {
        2.0 * PI / (k * self.q_max().sqrt() * self.grid.h())
    }
}

/// Samples a contrast description on its grid and records corner data.
pub fn build_contrast(spec: &ContrastSpec) -> Result<ContrastField> {
    spec.validate()?;
    let corners_pts = spec.scatterer.corners();
    let corners: Vec<CornerInfo> = corners_pts
        .iter()
        .map(|o| CornerInfo {
            point: o.clone(),
            q_value: spec.profile_value(o, &corners_pts),
            alpha: match spec.profile {
                Profile::Hoelder { alpha, .. } => Some(alpha),
                _ => None,
            },
        })
        .collect();
    for (i, c) in corners.iter().enumerate() {
        if c.eta() == 0.0 {
            return Err(Error::Hypothesis(format!(
                "q(O) = 1 at corner {i} {:?}; every corner needs q(O) != 1",
                c.point
            )));
        }
    }
    let (lo, hi) = spec.scatterer.bounding_box();
    let cells = match spec.resolution {
        Resolution::Cells(n) => n,
        Resolution::PointsPerWavelength { ppw, k } => {
            if !(ppw > 0.0 && k > 0.0) {
                return Err(invalid("resolution", "points per wavelength and k must be positive"));
            }
            let q_max = corners
                .iter()
                .map(|c| c.q_value)
                .chain(probe_q_max(spec, &lo, &hi))
                .fold(1.0, f64::max);
            let h = 2.0 * PI / (k * q_max.sqrt() * ppw);
            let longest = lo.iter().zip(&hi).map(|(a, b)| b - a).fold(0.0f64, f64::max);
            (longest / h - 1e-9).ceil().max(1.0) as usize
        }
    };
    let grid = Grid::covering(&lo, &hi, cells)?;
    let s = spec.subsamples;
    let dim = grid.dim();
    let subs = s.pow(dim as u32);
    let q: Vec<f64> = (0..grid.len())
        .map(|lin| {
            let c = grid.center(lin);
            if s == 1 {
                return spec.q_at(&c);
            }
            let mut acc = 0.0;
            let mut x = vec![0.0; dim];
            for sub in 0..subs {
                let mut r = sub;
                for a in 0..dim {
                    let j = r % s;
                    r /= s;
                    x[a] = c[a] + ((j as f64 + 0.5) / s as f64 - 0.5) * grid.h();
                }
                acc += spec.q_at(&x);
            }
            acc / subs as f64
        })
        .collect();
    ContrastField::from_samples(grid, q, corners)
}

/// Coarse probe of the profile maximum, used only to size grids.
fn probe_q_max(spec: &ContrastSpec, lo: &[f64], hi: &[f64]) -> Option<f64> {
    let probe = Grid::covering(lo, hi, 16).ok()?;
    (0..probe.len())
        .map(|lin| spec.q_at(&probe.center(lin)))
        .reduce(f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> Scatterer {
        Scatterer::Polygon {
            polygon: ConvexPolygon::new(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap(),
        }
    }

    #[test]
    fn constant_square_samples() {
        let spec = ContrastSpec::new(unit_square(), Profile::Constant { eta: 0.5 }, Resolution::Cells(16));
        let f = build_contrast(&spec).unwrap();
        assert_eq!(f.grid().shape(), &[16, 16]);
        assert!(f.q().iter().all(|&v| v == 1.5));
        assert_eq!(f.corners().len(), 4);
        assert!(f.corners().iter().all(|c| c.eta() == 0.5));
        // outside the polygon
        assert_eq!(spec.q_at(&[1.5, 0.5]), 1.0);
    }

    #[test]
    fn triangle_has_background_cells() {
        let tri = Scatterer::Polygon {
            polygon: ConvexPolygon::new(vec![[-0.5, -0.5], [0.5, -0.5], [0.0, 0.5]]).unwrap(),
        };
        let f = build_contrast(&ContrastSpec::new(
            tri,
            Profile::Constant { eta: 0.5 },
            Resolution::Cells(32),
        ))
        .unwrap();
        let exterior = f.q().iter().filter(|&&v| v == 1.0).count();
        let interior = f.q().iter().filter(|&&v| v == 1.5).count();
        assert_eq!(exterior + interior, f.q().len());
        // area 1/2 of a unit box
        let frac = interior as f64 / f.q().len() as f64;
        assert!((frac - 0.5).abs() < 0.05);
    }

    #[test]
    fn hoelder_profile_along_bisector() {
        let spec = ContrastSpec::new(
            unit_square(),
            Profile::Hoelder {
                eta: 0.5,
                alpha: 0.3,
                c: 1.0,
            },
            Resolution::Cells(8),
        );
        for r in [0.01, 0.1, 0.3] {
            let x = [r / 2f64.sqrt(), r / 2f64.sqrt()];
            let expect = 1.0 + 0.5 * (1.0 + f64::powf(r, 0.3));
            assert!((spec.q_at(&x) - expect).abs() < 1e-14);
        }
        let f = build_contrast(&spec).unwrap();
        assert!(f.corners().iter().all(|c| c.alpha == Some(0.3) && c.eta() == 0.5));
    }

    #[test]
    fn rejects_hypothesis_violations() {
        let zero = ContrastSpec::new(unit_square(), Profile::Constant { eta: 0.0 }, Resolution::Cells(8));
        assert!(matches!(build_contrast(&zero), Err(Error::Hypothesis(_))));
        let disk = ContrastSpec::new(
            Scatterer::Disk {
                center: [0.0, 0.0],
                radius: 1.0,
            },
            Profile::Hoelder {
                eta: 0.5,
                alpha: 0.5,
                c: 1.0,
            },
            Resolution::Cells(8),
        );
        assert!(build_contrast(&disk).is_err());
        // polynomial vanishing at the corner (0,0)
        let poly = ContrastSpec::new(
            unit_square(),
            Profile::Polynomial {
                terms: vec![PolyTerm {
                    exponents: vec![1, 0],
                    coefficient: 0.5,
                }],
            },
            Resolution::Cells(8),
        );
        assert!(build_contrast(&poly).is_err());
    }

    #[test]
    fn resolution_by_wavelength() {
        let spec = ContrastSpec::new(
            unit_square(),
            Profile::Constant { eta: 3.0 },
            Resolution::PointsPerWavelength { ppw: 12.0, k: 2.0 * PI },
        );
        let f = build_contrast(&spec).unwrap();
        // interior wavelength 1/2, 12 points each
        assert_eq!(f.grid().shape(), &[24, 24]);
        assert!((f.points_per_wavelength(2.0 * PI) - 12.0).abs() < 1e-9);
    }

    #[test]
    fn grid_indexing_round_trips() {
        let g = Grid::new(vec![-1.0, 0.0, 2.0], 0.25, vec![3, 4, 5]).unwrap();
        for lin in 0..g.len() {
            let c = g.center(lin);
            assert_eq!(g.locate(&c), Some(lin));
        }
        assert_eq!(g.locate(&[-1.5, 0.1, 2.1]), None);
    }
}
