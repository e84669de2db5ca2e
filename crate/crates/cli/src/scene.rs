//! Scene files: the JSON schema, its validation, and conversion into solver
//! inputs.
//!
//! Parsing goes through `serde_path_to_error`, so schema violations report
//! the offending field path together with the line and column. Hypotheses
//! that the corner results rely on (convex scatterer, a jump of `q` at every
//! corner, a well-formed Hoelder profile) are checked at load time and the
//! error message names the hypothesis.

use anyhow::{anyhow, bail, Context};
use cornerlab::geometry::{ConvexPolygon, RectBox};
use cornerlab::incident::{herglotz_from_samples, herglotz_from_sphere_samples, IncidentWave};
use cornerlab::lsolver::{ContrastSpec, PolyTerm, Profile, Resolution, Scatterer, SolverMethod, SolverOptions};
use cornerlab::{Error, C64};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub dimension: usize,
    pub k: f64,
    pub scatterer: ScattererConfig,
    pub contrast: ContrastConfig,
    #[serde(default)]
    pub incident: Option<IncidentConfig>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub far_field: FarFieldConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScattererConfig {
    /// Vertices of a strictly convex polygon, either orientation.
    Polygon { vertices: Vec<[f64; 2]> },
    /// Box with side lengths `extents`, centred at `center`, edges along the
    /// rows of `axes` (identity when omitted).
    Box {
        extents: Vec<f64>,
        #[serde(default)]
        center: Option<Vec<f64>>,
        #[serde(default)]
        axes: Option<Vec<Vec<f64>>>,
    },
    Disk {
        #[serde(default)]
        center: [f64; 2],
        radius: f64,
    },
    Ball {
        #[serde(default)]
        center: [f64; 3],
        radius: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ContrastConfig {
    /// `q = 1 + eta`.
    Constant { eta: f64 },
    /// `q = 1 + eta (1 + c r^alpha)`, `r` the distance to the nearest corner.
    Hoelder { eta: f64, alpha: f64, c: f64 },
    /// `q = 1 + sum coefficient x^exponents`.
    Polynomial { terms: Vec<TermConfig> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    pub exponents: Vec<u32>,
    pub coefficient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum IncidentConfig {
    Plane {
        direction: Vec<f64>,
    },
    PointSource {
        source: Vec<f64>,
    },
    /// Density samples `[re, im]` on the far-field rule: `m` uniform angles
    /// in 2D, `m x 2m` polar-azimuth nodes in 3D.
    Herglotz {
        density: Vec<[f64; 2]>,
        #[serde(default)]
        polar_nodes: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub points_per_wavelength: f64,
    pub padding_factor: f64,
    /// Cells along the longest bounding-box side; overrides
    /// `points_per_wavelength` when present.
    pub cells: Option<usize>,
    pub subsamples: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            points_per_wavelength: 12.0,
            padding_factor: 2.0,
            cells: None,
            subsamples: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub restart: usize,
    pub method: SolverMethod,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = SolverOptions::default();
        SolverConfig {
            tol: d.tol,
            max_iter: d.max_iter,
            restart: d.restart,
            method: d.method,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FarFieldConfig {
    /// Directions on the circle (2D) or polar nodes (3D).
    pub directions: usize,
}

impl Default for FarFieldConfig {
    fn default() -> Self {
        FarFieldConfig { directions: 64 }
    }
}

/// A validated scene ready for the solver.
#[derive(Debug, Clone)]
pub struct Scene {
    pub config: SceneConfig,
    pub contrast: ContrastSpec,
    pub incident: IncidentWave,
    pub solver: SolverOptions,
}

pub fn load_scene(path: &Path) -> anyhow::Result<Scene> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read scene file {}", path.display()))?;
    parse_scene(&text).with_context(|| format!("invalid scene {}", path.display()))
}

pub fn parse_scene(text: &str) -> anyhow::Result<Scene> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: SceneConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        anyhow!("at `{path}`: {}", e.into_inner())
    })?;
    validate(config)
}

fn at(field: &str, e: impl std::fmt::Display) -> anyhow::Error {
    anyhow!("at `{field}`: {e}")
}

fn validate(config: SceneConfig) -> anyhow::Result<Scene> {
    let dim = config.dimension;
    if dim != 2 && dim != 3 {
        bail!(at("dimension", format!("{dim} is not 2 or 3")));
    }
    if !(config.k > 0.0 && config.k.is_finite()) {
        bail!(at("k", format!("wavenumber {} must be positive", config.k)));
    }
    let scatterer = build_scatterer(&config.scatterer)?;
    if scatterer.dim() != dim {
        bail!(at(
            "scatterer",
            format!("a {}-dimensional shape in a {dim}-dimensional scene", scatterer.dim())
        ));
    }
    let profile = build_profile(&config.contrast, dim)?;
    check_hypotheses(&scatterer, &profile)?;

    let g = &config.grid;
    if !(g.padding_factor >= 2.0 && g.padding_factor.is_finite()) {
        bail!(at("grid.padding_factor", format!("{} is below 2", g.padding_factor)));
    }
    let resolution = match g.cells {
        Some(0) => bail!(at("grid.cells", "need at least one cell")),
        Some(n) => Resolution::Cells(n),
        None => {
            if !(g.points_per_wavelength > 0.0 && g.points_per_wavelength.is_finite()) {
                bail!(at("grid.points_per_wavelength", "must be positive"));
            }
            Resolution::PointsPerWavelength {
                ppw: g.points_per_wavelength,
                k: config.k,
            }
        }
    };
    if g.subsamples == 0 {
        bail!(at("grid.subsamples", "must be at least 1"));
    }
    let s = &config.solver;
    if !(s.tol > 0.0 && s.tol < 1.0) {
        bail!(at("solver.tol", format!("{} not in (0, 1)", s.tol)));
    }
    if s.max_iter == 0 || s.restart == 0 {
        bail!(at("solver", "max_iter and restart must be positive"));
    }
    if config.far_field.directions == 0 {
        bail!(at("far_field.directions", "need at least one direction"));
    }
    let solver = SolverOptions {
        tol: s.tol,
        max_iter: s.max_iter,
        restart: s.restart,
        method: s.method,
        padding_factor: g.padding_factor,
    };
    let incident = build_incident(config.incident.as_ref(), config.k, dim, &scatterer)?;
    let contrast = ContrastSpec {
        subsamples: g.subsamples,
        ..ContrastSpec::new(scatterer, profile, resolution)
    };
    Ok(Scene {
        config,
        contrast,
        incident,
        solver,
    })
}

fn build_scatterer(s: &ScattererConfig) -> anyhow::Result<Scatterer> {
    match s {
        ScattererConfig::Polygon { vertices } => match ConvexPolygon::new(vertices.clone()) {
            Ok(polygon) => Ok(Scatterer::Polygon { polygon }),
            Err(Error::NotConvex { vertex }) => Err(at(
                "scatterer.vertices",
                format!("convexity hypothesis violated: the polygon is not strictly convex at vertex {vertex}"),
            )),
            Err(e) => Err(at("scatterer.vertices", e)),
        },
        ScattererConfig::Box { extents, center, axes } => {
            let dim = extents.len();
            let center = center.clone().unwrap_or_else(|| vec![0.0; dim]);
            let axes = axes.clone().unwrap_or_else(|| {
                (0..dim)
                    .map(|i| (0..dim).map(|j| f64::from(u8::from(i == j))).collect())
                    .collect()
            });
            if center.len() != dim {
                bail!(at("scatterer.center", format!("expected {dim} coordinates")));
            }
            let mut corner = center;
            for (ax, e) in axes.iter().zip(extents) {
                for (c, a) in corner.iter_mut().zip(ax) {
                    *c -= 0.5 * e * a;
                }
            }
            let rect = RectBox::new(corner, extents.clone(), axes).map_err(|e| at("scatterer", e))?;
            Ok(Scatterer::Box { rect })
        }
        ScattererConfig::Disk { center, radius } => {
            check_radius(*radius)?;
            Ok(Scatterer::Disk {
                center: *center,
                radius: *radius,
            })
        }
        ScattererConfig::Ball { center, radius } => {
            check_radius(*radius)?;
            Ok(Scatterer::Ball {
                center: *center,
                radius: *radius,
            })
        }
    }
}

fn check_radius(r: f64) -> anyhow::Result<()> {
    if !(r > 0.0 && r.is_finite()) {
        bail!(at("scatterer.radius", format!("{r} must be positive")));
    }
    Ok(())
}

fn build_profile(c: &ContrastConfig, dim: usize) -> anyhow::Result<Profile> {
    Ok(match c {
        ContrastConfig::Constant { eta } => {
            if !(eta.is_finite() && 1.0 + eta > 0.0) {
                bail!(at("contrast.eta", format!("q = 1 + {eta} must be positive")));
            }
            Profile::Constant { eta: *eta }
        }
        ContrastConfig::Hoelder { eta, alpha, c } => {
            if !(eta.is_finite() && c.is_finite()) {
                bail!(at("contrast", "non-finite profile parameter"));
            }
            if !(*alpha > 0.0 && *alpha <= 1.0) {
                bail!(at(
                    "contrast.alpha",
                    format!("corner Hoelder hypothesis violated: exponent {alpha} is not in (0, 1]")
                ));
            }
            Profile::Hoelder {
                eta: *eta,
                alpha: *alpha,
                c: *c,
            }
        }
        ContrastConfig::Polynomial { terms } => {
            for (i, t) in terms.iter().enumerate() {
                if t.exponents.len() != dim {
                    bail!(at(
                        &format!("contrast.terms[{i}].exponents"),
                        format!("expected {dim} exponents, got {}", t.exponents.len())
                    ));
                }
                if !t.coefficient.is_finite() {
                    bail!(at(&format!("contrast.terms[{i}].coefficient"), "must be finite"));
                }
            }
            Profile::Polynomial {
                terms: terms
                    .iter()
                    .map(|t| PolyTerm {
                        exponents: t.exponents.clone(),
                        coefficient: t.coefficient,
                    })
                    .collect(),
            }
        }
    })
}

/// `q(O) - 1` for the profile at a corner point.
fn corner_jump(profile: &Profile, x: &[f64]) -> f64 {
    match profile {
        Profile::Constant { eta } | Profile::Hoelder { eta, .. } => *eta,
        Profile::Polynomial { terms } => terms
            .iter()
            .map(|t| {
                t.coefficient
                    * t.exponents
                        .iter()
                        .zip(x)
                        .map(|(e, v)| v.powi(*e as i32))
                        .product::<f64>()
            })
            .sum(),
    }
}

fn check_hypotheses(scatterer: &Scatterer, profile: &Profile) -> anyhow::Result<()> {
    let corners = scatterer.corners();
    if matches!(profile, Profile::Hoelder { .. }) && corners.is_empty() {
        bail!(at(
            "contrast",
            "corner Hoelder hypothesis violated: a Hoelder corner profile needs a scatterer with corners"
        ));
    }
    for (i, o) in corners.iter().enumerate() {
        if corner_jump(profile, o) == 0.0 {
            bail!(at(
                "contrast",
                format!("corner jump hypothesis violated: q(O) = 1 at corner {i} {o:?}; every corner needs q(O) != 1")
            ));
        }
    }
    Ok(())
}

fn build_incident(
    c: Option<&IncidentConfig>,
    k: f64,
    dim: usize,
    scatterer: &Scatterer,
) -> anyhow::Result<IncidentWave> {
    let wave = match c {
        None => {
            let mut d = vec![0.0; dim];
            d[0] = 1.0;
            IncidentWave::plane(k, &d)
        }
        Some(IncidentConfig::Plane { direction }) => {
            if direction.len() != dim {
                bail!(at("incident.direction", format!("expected {dim} components")));
            }
            IncidentWave::plane(k, direction)
        }
        Some(IncidentConfig::PointSource { source }) => {
            if source.len() != dim {
                bail!(at("incident.source", format!("expected {dim} coordinates")));
            }
            if scatterer.contains(source) {
                bail!(at("incident.source", "point source lies inside the scatterer"));
            }
            IncidentWave::point_source(k, source)
        }
        Some(IncidentConfig::Herglotz { density, polar_nodes }) => {
            let samples: Vec<C64> = density.iter().map(|[re, im]| C64::new(*re, *im)).collect();
            match (dim, polar_nodes) {
                (2, None) => herglotz_from_samples(&samples, k),
                (2, Some(_)) => bail!(at("incident.polar_nodes", "only used in three dimensions")),
                (_, Some(m)) => herglotz_from_sphere_samples(&samples, *m, k),
                (_, None) => bail!(at(
                    "incident.polar_nodes",
                    "required for a three-dimensional Herglotz density"
                )),
            }
        }
    };
    wave.map_err(|e| at("incident", e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use cornerlab::incident::IncidentKind;

    const MINIMAL: &str = r#"{"dimension": 2, "k": 2.0,
        "scatterer": {"shape": "polygon", "vertices": [[0, 0], [1, 0], [0, 1]]},
        "contrast": {"kind": "constant", "eta": 0.5}}"#;

    #[test]
    fn defaults_fill_optional_blocks() {
        let s = parse_scene(MINIMAL).unwrap();
        assert_eq!(s.solver.tol, 1e-8);
        assert_eq!(s.solver.max_iter, 2000);
        assert_eq!(s.solver.padding_factor, 2.0);
        assert_eq!(s.config.far_field.directions, 64);
        assert_eq!(
            s.contrast.resolution,
            Resolution::PointsPerWavelength { ppw: 12.0, k: 2.0 }
        );
        assert!(matches!(s.incident.kind(), IncidentKind::Plane { .. }));
    }

    #[test]
    fn rotated_box_is_centred() {
        let c = std::f64::consts::FRAC_1_SQRT_2;
        let text = format!(
            r#"{{"dimension": 2, "k": 1, "contrast": {{"kind": "constant", "eta": 1}},
                "scatterer": {{"shape": "box", "extents": [2, 1], "center": [1, 1],
                               "axes": [[{c}, {c}], [-{c}, {c}]]}}}}"#
        );
        let s = parse_scene(&text).unwrap();
        assert!(s.contrast.scatterer.contains(&[1.0, 1.0]));
        assert!(s.contrast.scatterer.contains(&[1.0 + 0.9 * c, 1.0 + 0.9 * c]));
        assert!(!s.contrast.scatterer.contains(&[1.0 + 0.9 * c, 1.0 - 0.9 * c]));
    }

    #[test]
    fn dimension_mismatches_are_rejected() {
        let bad = MINIMAL.replace("\"dimension\": 2", "\"dimension\": 3");
        assert!(parse_scene(&bad).unwrap_err().to_string().contains("scatterer"));
        let bad = MINIMAL.replace(
            "\"eta\": 0.5}",
            "\"eta\": 0.5}, \"incident\": {\"kind\": \"plane\", \"direction\": [1, 0, 0]}",
        );
        assert!(parse_scene(&bad)
            .unwrap_err()
            .to_string()
            .contains("incident.direction"));
    }

    #[test]
    fn polynomial_jump_is_evaluated_at_each_corner() {
        // q - 1 = x vanishes at the corners (0, 0) and (0, 1)
        let bad = MINIMAL.replace(
            r#"{"kind": "constant", "eta": 0.5}"#,
            r#"{"kind": "polynomial", "terms": [{"exponents": [1, 0], "coefficient": 1.0}]}"#,
        );
        let e = parse_scene(&bad).unwrap_err().to_string();
        assert!(e.contains("corner jump hypothesis") && e.contains("corner 0"), "{e}");
        let good = bad.replace(
            "\"coefficient\": 1.0}",
            "\"coefficient\": 1.0}, {\"exponents\": [0, 0], \"coefficient\": 0.3}",
        );
        parse_scene(&good).unwrap();
    }

    #[test]
    fn sources_inside_the_scatterer_are_rejected() {
        let bad = MINIMAL.replace(
            "\"eta\": 0.5}",
            "\"eta\": 0.5}, \"incident\": {\"kind\": \"point_source\", \"source\": [0.2, 0.2]}",
        );
        assert!(parse_scene(&bad).unwrap_err().to_string().contains("inside"));
    }

    #[test]
    fn herglotz_density_builds_a_wave() {
        let density: Vec<String> = (0..32).map(|_| "[1, 0]".to_string()).collect();
        let text = MINIMAL.replace(
            "\"eta\": 0.5}",
            &format!(
                "\"eta\": 0.5}}, \"incident\": {{\"kind\": \"herglotz\", \"density\": [{}]}}",
                density.join(",")
            ),
        );
        let s = parse_scene(&text).unwrap();
        assert!(matches!(s.incident.kind(), IncidentKind::Herglotz { .. }));
    }

    #[test]
    fn padding_below_two_is_rejected() {
        let bad = MINIMAL.replace("\"eta\": 0.5}", "\"eta\": 0.5}, \"grid\": {\"padding_factor\": 1.5}");
        assert!(parse_scene(&bad)
            .unwrap_err()
            .to_string()
            .contains("grid.padding_factor"));
    }
}
