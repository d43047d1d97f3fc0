//! End-to-end run orchestration: build the instance, run the solver,
//! analyze the result, and write every artifact (CSV series, raw fields,
//! images, manifest) into an output directory.

use crate::analysis::{
    boundary_cells, box_counting, component_count, diffuse_fraction, dyadic_scales,
    extract_shape, irrigated_density, isoperimetric_ratio, theory_refs, DimensionEstimate,
};
use crate::config::SolverConfig;
use crate::grid::GridGeometry;
use crate::io::{display_oriented, write_field_csv, write_pgm};
use crate::optimizer::{initial_field, solve, RunReport, SolveStatus};
use crate::problem::{mollified_dirac, SourceSpec};
use crate::Result;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Everything a finished run leaves behind, besides the files.
pub struct RunOutcome {
    pub report: RunReport,
    pub dimension: Option<DimensionEstimate>,
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

impl RunOutcome {
    /// Process exit code: 0 converged, 2 stalled, 3 iteration cap.
    pub fn exit_code(&self) -> i32 {
        match self.report.status {
            SolveStatus::Converged => 0,
            SolveStatus::Stalled => 2,
            SolveStatus::IterationCap => 3,
        }
    }
}

/// Runs the full pipeline into `out_dir` (created if missing).
pub fn run_solve(cfg: &SolverConfig, out_dir: &Path) -> Result<RunOutcome> {
    std::fs::create_dir_all(out_dir)?;
    let started = Instant::now();

    let geom = GridGeometry::new(cfg.m);
    let spec = SourceSpec::centered(cfg.source_radius(), cfg.source_profile);
    let delta = mollified_dirac(&spec, geom)?;
    let v0 = initial_field(geom, cfg.seed);
    let (v, report) = solve(cfg, &v0, &delta);

    let nu = irrigated_density(&delta, &v);
    let mask = extract_shape(&nu, cfg.threshold);
    let boundary = boundary_cells(&mask);

    let mut warnings = Vec::new();
    if mask.touches_domain_edge() {
        warnings.push("shape touches the domain edge; the domain may be too small".into());
    }
    if report.projection_flags.iter().any(|&ok| !ok) {
        let n = report.projection_flags.iter().filter(|&&ok| !ok).count();
        warnings.push(format!("{n} projections hit the iteration cap"));
    }
    if !report.polish_converged {
        warnings.push("final feasibility polish did not reach its target".into());
    }

    let dimension = match box_counting(&boundary, &dyadic_scales(cfg.m)) {
        Ok(mut est) => {
            est.bound = theory_refs(cfg.alpha, 2).ok().map(|t| t.dim_bound);
            Some(est)
        }
        Err(e) => {
            warnings.push(format!("dimension estimate unavailable: {e}"));
            None
        }
    };

    let mut files = Vec::new();
    let mut emit = |name: &str| {
        let p = out_dir.join(name);
        files.push(p.clone());
        p
    };

    // per-iteration series
    {
        let path = emit("energy.csv");
        let mut out = BufWriter::new(File::create(&path)?);
        writeln!(out, "iteration,energy,tau,violation")?;
        for k in 0..report.iterations {
            writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e}",
                k + 1,
                report.energies[k],
                report.step_sizes[k],
                report.violations[k]
            )?;
        }
        out.flush()?;
    }

    // raw fields
    write_field_csv(&delta, &emit("delta.csv"))?;
    write_field_csv(&nu, &emit("nu.csv"))?;
    write_component_csv(v.vx(), &emit("vx.csv"))?;
    write_component_csv(v.vy(), &emit("vy.csv"))?;

    // images
    let vhat = v.interpolate_to_centers().magnitude();
    write_pgm(&display_oriented(&vhat), &emit("vhat_norm.pgm"))?;
    write_pgm(&display_oriented(&nu), &emit("nu.pgm"))?;

    // manifest goes last so it can list every emitted file
    let manifest_path = out_dir.join("manifest.txt");
    {
        let mut out = BufWriter::new(File::create(&manifest_path)?);
        writeln!(out, "# run manifest")?;
        writeln!(out, "version = {}", env!("CARGO_PKG_VERSION"))?;
        for (k, val) in cfg.to_key_values() {
            writeln!(out, "{k} = {val}")?;
        }
        writeln!(out, "wall_time_s = {:.3}", started.elapsed().as_secs_f64())?;
        writeln!(out, "status = {}", status_name(report.status))?;
        writeln!(out, "iterations = {}", report.iterations)?;
        writeln!(out, "final_energy = {:.16e}", report.final_energy())?;
        writeln!(out, "final_error = {:.16e}", report.final_error)?;
        writeln!(out, "final_violation = {:.16e}", report.final_violation)?;
        writeln!(out, "shape_area = {:.6}", mask.area())?;
        for t in [0.3, 0.7] {
            let side = extract_shape(&nu, t);
            writeln!(out, "shape_area_at_{t} = {:.6}", side.area())?;
        }
        writeln!(out, "shape_components = {}", component_count(&mask))?;
        writeln!(out, "diffuse_fraction = {:.6}", diffuse_fraction(&nu, &mask))?;
        writeln!(out, "isoperimetric_ratio = {:.6}", isoperimetric_ratio(&mask))?;
        if let Some(est) = &dimension {
            writeln!(out, "dim_slope = {:.6}", est.slope)?;
            writeln!(out, "dim_r2 = {:.6}", est.r2)?;
            if let Some(bound) = est.bound {
                writeln!(out, "dim_bound = {:.6}", bound)?;
            }
            let scales: Vec<String> = est.scales.iter().map(|s| format!("{s:.6}")).collect();
            let counts: Vec<String> = est.counts.iter().map(|c| c.to_string()).collect();
            writeln!(out, "dim_scales = {}", scales.join(","))?;
            writeln!(out, "dim_counts = {}", counts.join(","))?;
        }
        for (k, w) in warnings.iter().enumerate() {
            writeln!(out, "warning_{k} = {w}")?;
        }
        let names: Vec<String> = files
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        writeln!(out, "files = {},manifest.txt", names.join(","))?;
        out.flush()?;
    }
    files.push(manifest_path);

    Ok(RunOutcome { report, dimension, files, warnings })
}

fn status_name(status: SolveStatus) -> &'static str {
    match status {
        SolveStatus::Converged => "converged",
        SolveStatus::Stalled => "stalled",
        SolveStatus::IterationCap => "iteration-cap",
    }
}

fn write_component_csv(values: &[f64], path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for v in values {
        writeln!(out, "{v:.16e}")?;
    }
    out.flush()?;
    Ok(())
}

/// The `analyze` entry point: box-counting dimension of the boundary of
/// the thresholded density, plus shape summary numbers.
pub struct AnalysisSummary {
    pub area: f64,
    pub components: usize,
    pub diffuse_fraction: f64,
    pub isoperimetric_ratio: f64,
    pub dimension: DimensionEstimate,
}

pub fn analyze_density(
    nu: &crate::grid::CellField,
    threshold: f64,
    alpha: Option<f64>,
) -> Result<AnalysisSummary> {
    let mask = extract_shape(nu, threshold);
    let boundary = boundary_cells(&mask);
    let mut dimension = box_counting(&boundary, &dyadic_scales(nu.geometry().m()))?;
    if let Some(a) = alpha {
        dimension.bound = theory_refs(a, 2).ok().map(|t| t.dim_bound);
    }
    Ok(AnalysisSummary {
        area: mask.area(),
        components: component_count(&mask),
        diffuse_fraction: diffuse_fraction(nu, &mask),
        isoperimetric_ratio: isoperimetric_ratio(&mask),
        dimension,
    })
}
