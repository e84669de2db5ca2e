//! One function per subcommand. Each returns whether the experiment passed
//! its thresholds (commands without thresholds always pass).

use crate::output::{complex_row, csv, far_field_csv, far_field_header, summary, RunRecord, Sink};
use crate::scene::{load_scene, Scene};
use crate::{
    BranchArg, CgoArgs, Command, CubeArgs, DistinguishArgs, GreenArgs, LaplaceArgs, MieArgs, OrthoArgs, PlanarPart,
    ScanArgs, SceneArgs, SectorArgs, TauArgs,
};
use anyhow::{bail, Context};
use cornerlab::cgo::{Branch, RemainderOptions, SectorContrast};
use cornerlab::experiments::{
    default_cube_indices, run_cgo_decay, run_cube_fft_check, run_distinguish, run_green_identity_check,
    run_nonscattering_scan, run_orthogonality_decay, CgoDecayConfig, DistinguishConfig, EdgeBump, ExperimentReport,
    IncidentFamily, QuadratureSize, Relation,
};
use cornerlab::geometry::{OrthantCone, SectorGeometry, TruncatedSector};
use cornerlab::incident::{DirectionRule, FourierBesselMode, IncidentWave};
use cornerlab::laplace::{
    octant_laplace, sector_laplace, sector_laplace_tail, truncated_sector_laplace, HarmonicHomogeneousPolynomial,
};
use cornerlab::lsolver::{
    build_contrast, far_field, ContrastSpec, LsOperator, Profile, Resolution, Scatterer, SolverDiagnostics,
    SolverMethod, FAR_FIELD_NORMALIZATION,
};
use cornerlab::mie::{mie_far_field, MieScene};
use cornerlab::C64;
use serde::Serialize;
use std::time::Instant;

pub fn execute(command: &Command) -> anyhow::Result<bool> {
    let start = Instant::now();
    let (name, out, passed, solver_runtimes) = match command {
        Command::Forward(a) => ("forward", &a.out, solve_scene(a, true)?, vec![]),
        Command::Farfield(a) => ("farfield", &a.out, solve_scene(a, false)?, vec![]),
        Command::MieCheck(a) => {
            let (passed, t) = mie_check(a)?;
            ("mie-check", &a.out, passed, vec![t])
        }
        Command::Distinguish(a) => ("distinguish", &a.out, distinguish(a)?, vec![]),
        Command::NonscatterScan(a) => ("nonscatter-scan", &a.out, nonscatter_scan(a)?, vec![]),
        Command::OrthoDecay(a) => ("ortho-decay", &a.out, ortho_decay(a)?, vec![]),
        Command::CgoDecay(a) => ("cgo-decay", &a.out, cgo_decay(a)?, vec![]),
        Command::Laplace(a) => ("laplace", &None, laplace(a)?, vec![]),
        Command::CubeFft(a) => ("cube-fft", &a.out, cube_fft(a)?, vec![]),
        Command::GreenCheck(a) => ("green-check", &a.out, green_check(a)?, vec![]),
    };
    if let Some(dir) = out {
        let record = RunRecord {
            command: name.to_string(),
            version: env!("CARGO_PKG_VERSION"),
            threads: rayon::current_num_threads(),
            runtime_seconds: start.elapsed().as_secs_f64(),
            solver_runtimes,
        };
        crate::output::write_json(&dir.join("run.json"), &record)?;
    }
    Ok(passed)
}

/// Solver record without the wall-clock time, which lives in `run.json`.
#[derive(Debug, Serialize)]
struct Diagnostics<'a> {
    k: f64,
    iterations: usize,
    residual: f64,
    grid: &'a [usize],
    padded_grid: &'a [usize],
    h: f64,
    points_per_wavelength: f64,
    method: SolverMethod,
    warnings: &'a [String],
    far_field_normalization: &'a str,
}

impl<'a> Diagnostics<'a> {
    fn new(k: f64, d: &'a SolverDiagnostics) -> Self {
        Diagnostics {
            k,
            iterations: d.iterations,
            residual: d.residual,
            grid: &d.grid,
            padded_grid: &d.padded_grid,
            h: d.h,
            points_per_wavelength: d.points_per_wavelength,
            method: d.method,
            warnings: &d.warnings,
            far_field_normalization: FAR_FIELD_NORMALIZATION,
        }
    }
}

fn finish(command: &str, sink: &mut Sink, report: &ExperimentReport, detail: &str) -> anyhow::Result<bool> {
    sink.json("report.json", report, true)?;
    eprintln!("{}", summary(command, Some(report.passed), detail));
    Ok(report.passed)
}

fn metric_detail(report: &ExperimentReport) -> String {
    report
        .metrics
        .iter()
        .map(|(name, m)| match m.threshold {
            Some(t) if m.relation == Relation::AtMost => format!("{name}={:.3e} (<= {t:.3e})", m.value),
            Some(t) if m.relation == Relation::AtLeast => format!("{name}={:.3e} (>= {t:.3e})", m.value),
            _ => format!("{name}={:.3e}", m.value),
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn solve_scene(args: &SceneArgs, total_field: bool) -> anyhow::Result<bool> {
    let scene = load_scene(&args.scene)?;
    let dim = scene.config.dimension;
    let directions = args.directions.unwrap_or(scene.config.far_field.directions);
    let contrast = build_contrast(&scene.contrast)?;
    let k = scene.incident.k();
    let op = LsOperator::with_padding(&contrast, k, scene.solver.padding_factor)?;
    let sol = op.solve(&scene.incident, &scene.solver)?;
    let pattern = far_field(&sol, &DirectionRule::for_dim(dim, directions)?)?;

    let mut sink = Sink::new(args.out.as_deref())?;
    if total_field {
        let grid = contrast.grid();
        let header: &[&str] = if dim == 2 {
            &["x", "y", "re", "im"]
        } else {
            &["x", "y", "z", "re", "im"]
        };
        let rows = sol.u().iter().enumerate().map(|(lin, u)| {
            let mut row = grid.center(lin);
            row.extend([u.re, u.im]);
            row
        });
        sink.file("total_field.csv", &csv(header, rows), true)?;
    }
    sink.file("far_field.csv", &far_field_csv(&pattern), !total_field)?;
    sink.json("diagnostics.json", &Diagnostics::new(k, &sol.diagnostics), false)?;
    let d = &sol.diagnostics;
    let command = if total_field { "forward" } else { "farfield" };
    eprintln!(
        "{}",
        summary(
            command,
            None,
            &format!(
                "{} iterations, residual {:.2e}, grid {:?}",
                d.iterations, d.residual, d.grid
            )
        )
    );
    Ok(true)
}

fn mie_check(args: &MieArgs) -> anyhow::Result<(bool, f64)> {
    if !(args.radius > 0.0 && args.ka > 0.0 && args.q0 > 0.0) {
        bail!("--ka, --q0 and --radius must be positive");
    }
    let k = args.ka / args.radius;
    let (scatterer, cells, directions) = match args.dim {
        2 => (
            Scatterer::Disk {
                center: [0.0; 2],
                radius: args.radius,
            },
            args.cells.unwrap_or(256),
            args.directions.unwrap_or(256),
        ),
        3 => (
            Scatterer::Ball {
                center: [0.0; 3],
                radius: args.radius,
            },
            args.cells.unwrap_or(24),
            args.directions.unwrap_or(16),
        ),
        d => bail!("--dim {d} is not 2 or 3"),
    };
    let spec = ContrastSpec::new(
        scatterer,
        Profile::Constant { eta: args.q0 - 1.0 },
        Resolution::Cells(cells),
    );
    let mut d = vec![0.0; args.dim];
    d[0] = 1.0;
    let inc = IncidentWave::plane(k, &d)?;
    let rule = DirectionRule::for_dim(args.dim, directions)?;
    let contrast = build_contrast(&spec)?;
    let sol = LsOperator::new(&contrast, k)?.solve(&inc, &Default::default())?;
    let solver = far_field(&sol, &rule)?;
    let series = mie_far_field(
        &MieScene::new(args.dim, args.radius, args.q0, k, vec![0.0; args.dim])?,
        &d,
        &rule,
    )?;
    let err = solver.relative_l2_error(&series)?;

    let mut report = ExperimentReport::new(
        "mie-check",
        &(args.ka, args.q0, args.radius, args.dim, cells, directions),
    );
    report.record(
        "relative_l2_error",
        err,
        Some(args.tolerance),
        Relation::AtMost,
        "series oracle tolerance",
    );
    report.info("iterations", sol.diagnostics.iterations as f64, "solver");

    let mut header: Vec<&str> = far_field_header(args.dim)[..args.dim - 1].to_vec();
    header.extend(["solver_re", "solver_im", "series_re", "series_im"]);
    let rows = rule
        .angles()
        .iter()
        .zip(solver.values.iter().zip(&series.values))
        .map(|(a, (s, m))| {
            let mut row = a.clone();
            row.extend([s.re, s.im, m.re, m.im]);
            row
        });
    let mut sink = Sink::new(args.out.as_deref())?;
    sink.file("mie_check.csv", &csv(&header, rows), true)?;
    sink.json("report.json", &report, false)?;
    eprintln!("{}", summary("mie-check", Some(report.passed), &metric_detail(&report)));
    Ok((report.passed, sol.diagnostics.runtime_seconds))
}

fn distinguish(args: &DistinguishArgs) -> anyhow::Result<bool> {
    let a = load_scene(&args.scene_a)?;
    let b = load_scene(&args.scene_b)?;
    if a.config.dimension != b.config.dimension {
        bail!("scenes have different dimensions");
    }
    if a.config.k != b.config.k {
        bail!("scenes have different wavenumbers ({} and {})", a.config.k, b.config.k);
    }
    let config = DistinguishConfig {
        directions: args.directions.unwrap_or(a.config.far_field.directions),
        solver: a.solver,
        margin: args.margin,
    };
    let out = run_distinguish(&a.contrast, &b.contrast, &a.incident, &config)?;
    let mut sink = Sink::new(args.out.as_deref())?;
    sink.file("far_field_a.csv", &far_field_csv(&out.pattern_a), false)?;
    sink.file("far_field_b.csv", &far_field_csv(&out.pattern_b), false)?;
    finish("distinguish", &mut sink, &out.report, &metric_detail(&out.report))
}

fn nonscatter_scan(args: &ScanArgs) -> anyhow::Result<bool> {
    let Scene {
        config,
        mut contrast,
        solver,
        ..
    } = load_scene(&args.scene)?;
    if !(args.k_min > 0.0 && args.k_max >= args.k_min) || args.k_count == 0 {
        bail!("need 0 < k-min <= k-max and a positive k-count");
    }
    if let Resolution::PointsPerWavelength { ppw, .. } = contrast.resolution {
        // resolve the largest wavenumber of the scan
        contrast.resolution = Resolution::PointsPerWavelength { ppw, k: args.k_max };
    }
    let ks: Vec<f64> = if args.k_count == 1 {
        vec![args.k_min]
    } else {
        (0..args.k_count)
            .map(|j| args.k_min + (args.k_max - args.k_min) * j as f64 / (args.k_count - 1) as f64)
            .collect()
    };
    let family = IncidentFamily {
        plane_directions: args.plane_directions,
        herglotz_draws: args.herglotz,
        seed: args.seed,
    };
    let directions = args.directions.unwrap_or(config.far_field.directions);
    let out = run_nonscattering_scan(&contrast, &ks, &family, directions, &solver)?;
    let mut sink = Sink::new(args.out.as_deref())?;
    let rows = out.points.iter().map(|p| vec![p.k, p.incident as f64, p.ratio]);
    sink.file("scan.csv", &csv(&["k", "incident", "ratio"], rows), false)?;
    finish("nonscatter-scan", &mut sink, &out.report, &metric_detail(&out.report))
}

fn branch(b: BranchArg) -> Branch {
    match b {
        BranchArg::Plus => Branch::Plus,
        BranchArg::Minus => Branch::Minus,
    }
}

fn sector_contrast(s: &SectorArgs) -> anyhow::Result<SectorContrast> {
    let base = SectorGeometry::canonical(s.phi0).context("invalid --phi0")?;
    let sector = TruncatedSector::new(base, s.radius).context("invalid --radius")?;
    if !(s.alpha > 0.0 && s.alpha <= 1.0) {
        bail!(
            "corner Hoelder hypothesis violated: --alpha {} is not in (0, 1]",
            s.alpha
        );
    }
    Ok(SectorContrast {
        sector,
        eta: s.eta,
        alpha: s.alpha,
        c: s.c,
    })
}

impl TauArgs {
    fn resolve(&self, min: f64, max: f64, count: usize) -> anyhow::Result<Vec<f64>> {
        if let Some(t) = &self.taus {
            if t.is_empty() || t.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                bail!("--taus must be positive numbers");
            }
            return Ok(t.clone());
        }
        let (lo, hi, n) = (
            self.tau_min.unwrap_or(min),
            self.tau_max.unwrap_or(max),
            self.tau_count.unwrap_or(count),
        );
        if !(lo > 0.0 && hi >= lo) || n == 0 {
            bail!("need 0 < tau-min <= tau-max and a positive tau-count");
        }
        if n == 1 {
            return Ok(vec![lo]);
        }
        Ok((0..n).map(|j| lo * (hi / lo).powf(j as f64 / (n - 1) as f64)).collect())
    }
}

fn ortho_decay(args: &OrthoArgs) -> anyhow::Result<bool> {
    let contrast = sector_contrast(&args.sector)?;
    let taus = args.taus.resolve(40.0, 80.0, 9)?;
    let mode = FourierBesselMode::new(args.k, args.order, C64::new(1.0, 0.0))?;
    let size = QuadratureSize {
        radial: args.radial_nodes,
        angular: args.angular_nodes,
    };
    let out = run_orthogonality_decay(
        &contrast,
        &mode,
        &taus,
        args.sector.phi,
        branch(args.sector.branch),
        size,
    )?;
    let mut sink = Sink::new(args.out.as_deref())?;
    let rows = out
        .rows
        .iter()
        .map(|r| vec![r.tau, r.integral.re, r.integral.im, r.rescaled.re, r.rescaled.im]);
    let header = ["tau", "integral_re", "integral_im", "rescaled_re", "rescaled_im"];
    sink.file("ortho.csv", &csv(&header, rows), false)?;
    finish("ortho-decay", &mut sink, &out.report, &metric_detail(&out.report))
}

fn cgo_decay(args: &CgoArgs) -> anyhow::Result<bool> {
    let contrast = sector_contrast(&args.sector)?;
    let taus = args.taus.resolve(10.0, 40.0, 3)?;
    let config = CgoDecayConfig {
        eps: args.eps,
        k: args.k,
        phi: args.sector.phi,
        branch: branch(args.sector.branch),
        samples: args.samples,
    };
    let opts = RemainderOptions {
        nodes: args.nodes,
        ..RemainderOptions::default()
    };
    let remainder = args.remainder.then_some((&contrast, &opts));
    let out = run_cgo_decay(&contrast.sector, &config, &taus, remainder)?;
    let mut sink = Sink::new(args.out.as_deref())?;
    let rows = out.decay.iter().map(|d| vec![d.tau, d.delta0, d.max_profile, d.bound]);
    sink.file(
        "decay.csv",
        &csv(&["tau", "delta0", "max_profile", "bound"], rows),
        false,
    )?;
    if args.remainder {
        let rows = out.remainder.iter().map(|r| vec![r.tau, r.psi_norm, r.residual]);
        sink.file("remainder.csv", &csv(&["tau", "psi_norm", "residual"], rows), false)?;
    }
    finish("cgo-decay", &mut sink, &out.report, &metric_detail(&out.report))
}

fn laplace(args: &LaplaceArgs) -> anyhow::Result<bool> {
    let dim = args.z.len();
    let zi = args.zi.clone().unwrap_or_else(|| vec![0.0; dim]);
    if zi.len() != dim {
        bail!("--zi has {} components but --z has {dim}", zi.len());
    }
    let z: Vec<C64> = args.z.iter().zip(&zi).map(|(&re, &im)| C64::new(re, im)).collect();
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    let values = match dim {
        2 => {
            let h = match args.part {
                PlanarPart::Re => HarmonicHomogeneousPolynomial::planar(args.n, one, zero)?,
                PlanarPart::Im => HarmonicHomogeneousPolynomial::planar(args.n, zero, one)?,
            };
            let w = SectorGeometry::canonical(args.phi0).context("invalid --phi0")?;
            let mut values = vec![sector_laplace(&h, &w, &z)?];
            if let Some(r) = args.truncate {
                let ts = TruncatedSector::new(w, r).context("invalid --truncate")?;
                values.push(truncated_sector_laplace(&h, &ts, &z)?);
                values.push(sector_laplace_tail(&h, &ts, &z)?);
            }
            values
        }
        3 => {
            if args.truncate.is_some() {
                bail!("--truncate is only available for the planar sector");
            }
            let n = args.n as i64;
            if args.order.abs() > n {
                bail!("--order {} exceeds the degree {n}", args.order);
            }
            let mut coefficients = vec![zero; 2 * args.n + 1];
            coefficients[(n + args.order) as usize] = one;
            let h = HarmonicHomogeneousPolynomial::spatial(args.n, coefficients)?;
            vec![octant_laplace(&h, &OrthantCone::canonical(), &z)?]
        }
        _ => bail!("--z needs 2 (sector) or 3 (octant) components, got {dim}"),
    };
    let line: Vec<String> = values
        .iter()
        .flat_map(|v| [crate::output::format_float(v.re), crate::output::format_float(v.im)])
        .collect();
    println!("{}", line.join(","));
    Ok(true)
}

fn cube_fft(args: &CubeArgs) -> anyhow::Result<bool> {
    let out = run_cube_fft_check(args.nodes, args.side, args.half_width, &default_cube_indices())?;
    let mut sink = Sink::new(args.out.as_deref())?;
    let rows = out.rows.iter().map(|r| {
        let mut row: Vec<f64> = r.index.iter().map(|&i| i as f64).collect();
        row.extend(r.xi);
        row.extend([r.closed_form, r.aliased.re, r.aliased.im, r.dft.re, r.dft.im]);
        row
    });
    let header = [
        "i",
        "j",
        "l",
        "xi1",
        "xi2",
        "xi3",
        "closed_form",
        "aliased_re",
        "aliased_im",
        "dft_re",
        "dft_im",
    ];
    sink.file("cube_fft.csv", &csv(&header, rows), false)?;
    finish("cube-fft", &mut sink, &out.report, &metric_detail(&out.report))
}

fn green_check(args: &GreenArgs) -> anyhow::Result<bool> {
    let contrast = sector_contrast(&args.sector)?;
    let taus = args.taus.resolve(15.0, 60.0, 3)?;
    let &[cx, cy] = &args.bump_center[..] else {
        bail!("--bump-center needs two coordinates");
    };
    let bump = EdgeBump {
        amplitude: args.bump_amplitude,
        center: [cx, cy],
    };
    let out = run_green_identity_check(
        &contrast,
        &bump,
        args.k,
        &taus,
        args.sector.phi,
        branch(args.sector.branch),
        QuadratureSize::default(),
    )?;
    let mut sink = Sink::new(args.out.as_deref())?;
    let rows = out.rows.iter().map(|r| {
        let mut row = complex_row(r.tau, r.lhs);
        row.extend([r.volume.re, r.volume.im, r.boundary.re, r.boundary.im, r.residual]);
        row
    });
    let header = [
        "tau",
        "lhs_re",
        "lhs_im",
        "volume_re",
        "volume_im",
        "boundary_re",
        "boundary_im",
        "residual",
    ];
    sink.file("green.csv", &csv(&header, rows), false)?;
    finish("green-check", &mut sink, &out.report, &metric_detail(&out.report))
}
