//! Sectors, convex polygons, rectangular boxes and the truncated regions
//! built around a corner.

use crate::error::{invalid, Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

pub type Point2 = [f64; 2];
pub type Point3 = [f64; 3];

/// Absolute slack on angle comparisons.
pub const ANGLE_SLACK: f64 = 1e-12;

fn rotate(x: Point2, angle: f64) -> Point2 {
    let (s, c) = angle.sin_cos();
    [c * x[0] - s * x[1], s * x[0] + c * x[1]]
}

/// Wrap an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut t = a % (2.0 * PI);
    if t <= -PI {
        t += 2.0 * PI;
    } else if t > PI {
        t -= 2.0 * PI;
    }
    t
}

/// Planar rotation followed by a translation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidMotion2 {
    pub angle: f64,
    pub translation: Point2,
}

impl RigidMotion2 {
    pub fn apply(&self, x: Point2) -> Point2 {
        let r = rotate(x, self.angle);
        [r[0] + self.translation[0], r[1] + self.translation[1]]
    }
}

/// Infinite planar sector with vertex `O`, half-aperture `phi0` and bisector
/// direction `orientation`. Its boundary consists of the rays
/// `Gamma^+` (local angle `+phi0`) and `Gamma^-` (local angle `-phi0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorGeometry {
    vertex: Point2,
    half_aperture: f64,
    orientation: f64,
}

impl SectorGeometry {
    /// Convex sector, `0 < half_aperture < pi/2`.
    pub fn new(vertex: Point2, half_aperture: f64, orientation: f64) -> Result<Self> {
        if !(half_aperture > 0.0 && half_aperture < FRAC_PI_2) {
            return Err(invalid("half_aperture", format!("{half_aperture} is not in (0, pi/2)")));
        }
        if !vertex.iter().all(|v| v.is_finite()) || !orientation.is_finite() {
            return Err(invalid("vertex", "non-finite sector data"));
        }
        Ok(SectorGeometry {
            vertex,
            half_aperture,
            orientation,
        })
    }

    /// Sector with vertex at the origin, bisector along the first axis.
    pub fn canonical(half_aperture: f64) -> Result<Self> {
        Self::new([0.0, 0.0], half_aperture, 0.0)
    }

    pub fn vertex(&self) -> Point2 {
        self.vertex
    }

    pub fn half_aperture(&self) -> f64 {
        self.half_aperture
    }

    pub fn orientation(&self) -> f64 {
        self.orientation
    }

    /// `beta = pi/2 - phi0`, the admissible angular budget for CGO directions.
    pub fn beta(&self) -> f64 {
        FRAC_PI_2 - self.half_aperture
    }

    /// Coordinates relative to the vertex in the bisector frame.
    pub fn to_local(&self, x: Point2) -> Point2 {
        rotate([x[0] - self.vertex[0], x[1] - self.vertex[1]], -self.orientation)
    }

    pub fn from_local(&self, x: Point2) -> Point2 {
        let r = rotate(x, self.orientation);
        [r[0] + self.vertex[0], r[1] + self.vertex[1]]
    }

    /// Local polar coordinates `(r, phi)` with `phi` in `(-pi, pi]`.
    pub fn local_polar(&self, x: Point2) -> (f64, f64) {
        let l = self.to_local(x);
        (l[0].hypot(l[1]), l[1].atan2(l[0]))
    }

    /// Global unit vector of the ray at local angle `phi`.
    pub fn ray_direction(&self, phi: f64) -> Point2 {
        let a = self.orientation + phi;
        [a.cos(), a.sin()]
    }

    /// Closed-cone membership.
    pub fn contains(&self, x: Point2) -> bool {
        let (r, phi) = self.local_polar(x);
        r == 0.0 || phi.abs() <= self.half_aperture + ANGLE_SLACK
    }

    pub fn moved(&self, motion: &RigidMotion2) -> SectorGeometry {
        SectorGeometry {
            vertex: motion.apply(self.vertex),
            half_aperture: self.half_aperture,
            orientation: self.orientation + motion.angle,
        }
    }
}

/// Checks the shared membership test against a rigid motion.
pub fn contains(sector: &SectorGeometry, x: Point2) -> bool {
    sector.contains(x)
}

/// A sector truncated to the ball `B_R` around its vertex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncatedSector {
    base: SectorGeometry,
    radius: f64,
}

impl TruncatedSector {
    pub fn new(base: SectorGeometry, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(invalid("radius", format!("{radius} must be positive")));
        }
        Ok(TruncatedSector { base, radius })
    }

    pub fn base(&self) -> &SectorGeometry {
        &self.base
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// `x` in `S_R` (closed cone, open ball).
    pub fn contains(&self, x: Point2) -> bool {
        let (r, _) = self.base.local_polar(x);
        r < self.radius && self.base.contains(x)
    }

    /// `x` in `S_{R/2}`.
    pub fn contains_half(&self, x: Point2) -> bool {
        let (r, _) = self.base.local_polar(x);
        r < 0.5 * self.radius && self.base.contains(x)
    }

    /// Point on the arc `Lambda_{R/2}` at local angle `phi`.
    pub fn arc_point(&self, phi: f64) -> Point2 {
        let d = self.base.ray_direction(phi);
        let v = self.base.vertex;
        let r = 0.5 * self.radius;
        [v[0] + r * d[0], v[1] + r * d[1]]
    }
}

/// The annular neighbourhood `D_{eps,R}` of the arc `Lambda_{R/2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborhoodRegion {
    sector: TruncatedSector,
    eps: f64,
}

impl NeighborhoodRegion {
    pub fn truncated_sector(&self) -> &TruncatedSector {
        &self.sector
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Radial extent `(R/2 - eps, R/2 + eps)`.
    pub fn radial_range(&self) -> (f64, f64) {
        let half = 0.5 * self.sector.radius;
        (half - self.eps, half + self.eps)
    }

    /// Angular half-width `phi0 + eps`.
    pub fn angular_half_width(&self) -> f64 {
        self.sector.base.half_aperture + self.eps
    }

    pub fn contains(&self, x: Point2) -> bool {
        let (r, phi) = self.sector.base.local_polar(x);
        let (lo, hi) = self.radial_range();
        r > lo && r < hi && phi.abs() < self.angular_half_width()
    }

    /// The four corner points of the region (local polar extremes), global frame.
    pub fn corner_points(&self) -> [Point2; 4] {
        let (lo, hi) = self.radial_range();
        let a = self.angular_half_width();
        let b = &self.sector.base;
        let at = |r: f64, phi: f64| {
            let d = b.ray_direction(phi);
            [b.vertex[0] + r * d[0], b.vertex[1] + r * d[1]]
        };
        [at(lo, -a), at(lo, a), at(hi, -a), at(hi, a)]
    }

    /// Deterministic polar sample of the open region, `n_r x n_phi` points
    /// including points arbitrarily close to the closure (boundary nodes
    /// pulled inward by a relative `1e-9`).
    pub fn sample_points(&self, n_r: usize, n_phi: usize) -> Vec<Point2> {
        let (lo, hi) = self.radial_range();
        let a = self.angular_half_width();
        let b = &self.sector.base;
        let shrink = 1e-9;
        let mut pts = Vec::with_capacity(n_r * n_phi);
        for i in 0..n_r {
            let t = if n_r == 1 { 0.5 } else { i as f64 / (n_r - 1) as f64 };
            let r = lo + (hi - lo) * (shrink + (1.0 - 2.0 * shrink) * t);
            for j in 0..n_phi {
                let s = if n_phi == 1 { 0.5 } else { j as f64 / (n_phi - 1) as f64 };
                let phi = -a + 2.0 * a * (shrink + (1.0 - 2.0 * shrink) * s);
                let d = b.ray_direction(phi);
                pts.push([b.vertex[0] + r * d[0], b.vertex[1] + r * d[1]]);
            }
        }
        pts
    }
}

/// Membership predicate for `D_{eps,R}`; requires `0 < eps < min(beta/2, R/2)`.
pub fn neighborhood_region(ts: &TruncatedSector, eps: f64) -> Result<NeighborhoodRegion> {
    let limit = (0.5 * ts.base.beta()).min(0.5 * ts.radius);
    if !(eps > 0.0 && eps < limit) {
        return Err(invalid(
            "eps",
            format!("{eps} is not in (0, min(beta/2, R/2)) = (0, {limit})"),
        ));
    }
    Ok(NeighborhoodRegion { sector: *ts, eps })
}

/// Strictly convex polygon, vertices stored counterclockwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexPolygon {
    vertices: Vec<Point2>,
}

fn cross(o: Point2, a: Point2, b: Point2) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0);
    let q = [a[0] + t * ab[0], a[1] + t * ab[1]];
    (p[0] - q[0]).hypot(p[1] - q[1])
}

impl ConvexPolygon {
    /// Accepts either orientation; rejects collinear or reflex vertices.
    pub fn new(vertices: Vec<Point2>) -> Result<Self> {
        let n = vertices.len();
        if n < 3 {
            return Err(invalid("vertices", "a polygon needs at least three vertices"));
        }
        if vertices.iter().flatten().any(|v| !v.is_finite()) {
            return Err(invalid("vertices", "non-finite coordinate"));
        }
        let signed_area: f64 = (0..n)
            .map(|i| {
                let a = vertices[i];
                let b = vertices[(i + 1) % n];
                a[0] * b[1] - a[1] * b[0]
            })
            .sum();
        let mut vertices = vertices;
        if signed_area < 0.0 {
            vertices.reverse();
        }
        let scale = vertices.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        for i in 0..n {
            let prev = vertices[(i + n - 1) % n];
            let cur = vertices[i];
            let next = vertices[(i + 1) % n];
            if cross(prev, cur, next) <= 1e-14 * scale * scale {
                return Err(Error::NotConvex { vertex: i });
            }
        }
        // a star-shaped turn sequence can wind twice; total turning must be 2 pi
        let turning: f64 = (0..n)
            .map(|i| {
                let prev = vertices[(i + n - 1) % n];
                let cur = vertices[i];
                let next = vertices[(i + 1) % n];
                let a1 = (cur[1] - prev[1]).atan2(cur[0] - prev[0]);
                let a2 = (next[1] - cur[1]).atan2(next[0] - cur[0]);
                wrap_angle(a2 - a1)
            })
            .sum();
        if (turning - 2.0 * PI).abs() > 1e-9 {
            return Err(Error::NotConvex { vertex: 0 });
        }
        Ok(ConvexPolygon { vertices })
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Closed membership.
    pub fn contains(&self, x: Point2) -> bool {
        let n = self.vertices.len();
        (0..n).all(|i| cross(self.vertices[i], self.vertices[(i + 1) % n], x) >= 0.0)
    }

    pub fn bounding_box(&self) -> (Point2, Point2) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for v in &self.vertices {
            for a in 0..2 {
                lo[a] = lo[a].min(v[a]);
                hi[a] = hi[a].max(v[a]);
            }
        }
        (lo, hi)
    }

    pub fn translated(&self, t: Point2) -> ConvexPolygon {
        ConvexPolygon {
            vertices: self.vertices.iter().map(|v| [v[0] + t[0], v[1] + t[1]]).collect(),
        }
    }

    /// Interior angle at a vertex.
    pub fn interior_angle(&self, index: usize) -> f64 {
        let n = self.vertices.len();
        let cur = self.vertices[index];
        let prev = self.vertices[(index + n - 1) % n];
        let next = self.vertices[(index + 1) % n];
        let a1 = (prev[1] - cur[1]).atan2(prev[0] - cur[0]);
        let a2 = (next[1] - cur[1]).atan2(next[0] - cur[0]);
        wrap_angle(a1 - a2).abs()
    }

    /// Local sector frame at a vertex: `D cap B_R(O)` becomes `{|phi| < phi0}`.
    pub fn corner_sector(&self, vertex_index: usize, radius: f64) -> Result<TruncatedSector> {
        let n = self.vertices.len();
        if vertex_index >= n {
            return Err(invalid("vertex_index", format!("{vertex_index} >= {n}")));
        }
        let cur = self.vertices[vertex_index];
        let prev = self.vertices[(vertex_index + n - 1) % n];
        let next = self.vertices[(vertex_index + 1) % n];
        for i in 0..n {
            let j = (i + 1) % n;
            if i == vertex_index || j == vertex_index {
                continue;
            }
            if point_segment_distance(cur, self.vertices[i], self.vertices[j]) <= radius {
                return Err(Error::RadiusTooLarge {
                    vertex: vertex_index,
                    radius,
                });
            }
        }
        let to_prev = (prev[1] - cur[1]).atan2(prev[0] - cur[0]);
        let to_next = (next[1] - cur[1]).atan2(next[0] - cur[0]);
        let opening = wrap_angle(to_prev - to_next);
        if opening <= 0.0 || opening >= PI {
            return Err(Error::NotConvex { vertex: vertex_index });
        }
        let orientation = wrap_angle(to_next + 0.5 * opening);
        let sector = SectorGeometry::new(cur, 0.5 * opening, orientation)?;
        TruncatedSector::new(sector, radius)
    }

    /// Largest admissible `corner_sector` radius at a vertex (exclusive).
    pub fn corner_radius_limit(&self, vertex_index: usize) -> f64 {
        let n = self.vertices.len();
        let cur = self.vertices[vertex_index];
        (0..n)
            .filter(|&i| i != vertex_index && (i + 1) % n != vertex_index)
            .map(|i| point_segment_distance(cur, self.vertices[i], self.vertices[(i + 1) % n]))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Orthant cone `[0, inf)^3` in a rotated and translated frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrthantCone {
    vertex: Point3,
    axes: [Point3; 3],
}

fn dot3(a: Point3, b: Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

impl OrthantCone {
    /// `axes` must be pairwise orthogonal unit vectors.
    pub fn new(vertex: Point3, axes: [Point3; 3]) -> Result<Self> {
        for i in 0..3 {
            if (dot3(axes[i], axes[i]) - 1.0).abs() > 1e-10 {
                return Err(Error::UnsupportedCone);
            }
            for j in 0..i {
                if dot3(axes[i], axes[j]).abs() > 1e-10 {
                    return Err(Error::UnsupportedCone);
                }
            }
        }
        Ok(OrthantCone { vertex, axes })
    }

    pub fn canonical() -> Self {
        OrthantCone {
            vertex: [0.0; 3],
            axes: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        }
    }

    pub fn vertex(&self) -> Point3 {
        self.vertex
    }

    pub fn axes(&self) -> &[Point3; 3] {
        &self.axes
    }

    pub fn to_local(&self, x: Point3) -> Point3 {
        let d = [x[0] - self.vertex[0], x[1] - self.vertex[1], x[2] - self.vertex[2]];
        [dot3(d, self.axes[0]), dot3(d, self.axes[1]), dot3(d, self.axes[2])]
    }

    /// Global direction of a local unit vector.
    pub fn direction_from_local(&self, l: Point3) -> Point3 {
        let mut out = [0.0; 3];
        for (a, axis) in self.axes.iter().enumerate() {
            for c in 0..3 {
                out[c] += l[a] * axis[c];
            }
        }
        out
    }

    pub fn contains(&self, x: Point3) -> bool {
        self.to_local(x).iter().all(|&c| c >= -ANGLE_SLACK)
    }
}

/// Closed rectangular box `corner + sum t_i extents_i axes_i`, `t in [0,1]^N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RectBox {
    corner: Vec<f64>,
    extents: Vec<f64>,
    axes: Vec<Vec<f64>>,
}

impl RectBox {
    pub fn new(corner: Vec<f64>, extents: Vec<f64>, axes: Vec<Vec<f64>>) -> Result<Self> {
        let dim = corner.len();
        if !(2..=3).contains(&dim) {
            return Err(invalid("corner", "boxes are supported in 2 or 3 dimensions"));
        }
        if extents.len() != dim || axes.len() != dim || axes.iter().any(|a| a.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: extents.len(),
            });
        }
        if let Some(bad) = extents.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
            return Err(invalid("extents", format!("box extent {bad} must be positive")));
        }
        for i in 0..dim {
            let n: f64 = axes[i].iter().map(|v| v * v).sum();
            if (n - 1.0).abs() > 1e-10 {
                return Err(invalid("axes", "box axes must be unit vectors"));
            }
            for j in 0..i {
                let d: f64 = axes[i].iter().zip(&axes[j]).map(|(a, b)| a * b).sum();
                if d.abs() > 1e-10 {
                    return Err(invalid("axes", "box axes must be orthogonal"));
                }
            }
        }
        Ok(RectBox { corner, extents, axes })
    }

    /// Axis-aligned box `[lo, lo + extents]`.
    pub fn axis_aligned(lo: Vec<f64>, extents: Vec<f64>) -> Result<Self> {
        let dim = lo.len();
        let axes = (0..dim)
            .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::new(lo, extents, axes)
    }

    pub fn dim(&self) -> usize {
        self.corner.len()
    }

    pub fn extents(&self) -> &[f64] {
        &self.extents
    }

    fn local(&self, x: &[f64]) -> Vec<f64> {
        let d: Vec<f64> = x.iter().zip(&self.corner).map(|(a, b)| a - b).collect();
        self.axes
            .iter()
            .map(|ax| ax.iter().zip(&d).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let l = self.local(x);
        l.iter()
            .zip(&self.extents)
            .all(|(c, e)| *c >= -1e-14 && *c <= e + 1e-14)
    }

    /// All `2^N` corner points.
    pub fn corners(&self) -> Vec<Vec<f64>> {
        let dim = self.dim();
        (0..(1usize << dim))
            .map(|mask| {
                let mut p = self.corner.clone();
                for a in 0..dim {
                    if mask & (1 << a) != 0 {
                        for c in 0..dim {
                            p[c] += self.extents[a] * self.axes[a][c];
                        }
                    }
                }
                p
            })
            .collect()
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let dim = self.dim();
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for c in self.corners() {
            for a in 0..dim {
                lo[a] = lo[a].min(c[a]);
                hi[a] = hi[a].max(c[a]);
            }
        }
        (lo, hi)
    }

    /// The orthant cone at corner `mask` (bit `a` set: far face along axis `a`).
    pub fn corner_cone(&self, mask: usize) -> Result<OrthantCone> {
        if self.dim() != 3 {
            return Err(Error::UnsupportedCone);
        }
        let vertex = &self.corners()[mask];
        let mut axes = [[0.0; 3]; 3];
        for a in 0..3 {
            let s = if mask & (1 << a) != 0 { -1.0 } else { 1.0 };
            for c in 0..3 {
                axes[a][c] = s * self.axes[a][c];
            }
        }
        OrthantCone::new([vertex[0], vertex[1], vertex[2]], axes)
    }

    /// The rectangle as a polygon (2D only).
    pub fn to_polygon(&self) -> Result<ConvexPolygon> {
        if self.dim() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                got: self.dim(),
            });
        }
        let c = self.corners();
        ConvexPolygon::new(vec![
            [c[0][0], c[0][1]],
            [c[1][0], c[1][1]],
            [c[3][0], c[3][1]],
            [c[2][0], c[2][1]],
        ])
    }
}

/// Convex polygon (2D) or rectangular box (2D/3D).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ConvexPolytope {
    Polygon(ConvexPolygon),
    Box(RectBox),
}

/// Local sector frame at a polygon vertex (rectangles are treated as polygons).
pub fn corner_sector(poly: &ConvexPolytope, vertex_index: usize, radius: f64) -> Result<TruncatedSector> {
    match poly {
        ConvexPolytope::Polygon(p) => p.corner_sector(vertex_index, radius),
        ConvexPolytope::Box(b) if b.dim() == 2 => b.to_polygon()?.corner_sector(vertex_index, radius),
        ConvexPolytope::Box(_) => Err(Error::UnsupportedCone),
    }
}
