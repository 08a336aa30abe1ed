//! The two canned comparisons: Shepp-Logan from 21 views and the FORBILD-like
//! head from 41 views, each reconstructed by all four methods.

use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use sparsect::io::{fmt_psnr, write_trace_csv};
use sparsect::phantom::PhantomKind;
use sparsect::{
    gradient_magnitude, l0_norm, metrics, reconstruct_with, Geometry, Image, Method, MetricReport, Projector,
    ReconResult, SolverConfig, SystemMatrix,
};

use crate::commands::phantom_name;
use crate::error::{CliError, CliResult};
use crate::manifest::Recorder;
use crate::pgm::write_pgm;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentName {
    SheppLogan21,
    Forbild41,
}

impl ExperimentName {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentName::SheppLogan21 => "shepp-logan-21",
            ExperimentName::Forbild41 => "forbild-41",
        }
    }

    pub fn spec(self) -> ExperimentSpec {
        match self {
            ExperimentName::SheppLogan21 => ExperimentSpec {
                name: self,
                phantom: PhantomKind::SheppLogan,
                size: 128,
                views: 21,
                iterations: 800,
                sparsity: Some(1081),
                window: (0.1, 0.35),
                snapshots: vec![100, 200, 400, 800],
                snapshot_window: (0.15, 0.25),
            },
            ExperimentName::Forbild41 => ExperimentSpec {
                name: self,
                phantom: PhantomKind::Forbild,
                size: 256,
                views: 41,
                iterations: 800,
                sparsity: None,
                window: (1.035, 1.065),
                snapshots: vec![100, 200, 400, 800],
                snapshot_window: (1.035, 1.065),
            },
        }
    }
}

impl FromStr for ExperimentName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "shepp-logan-21" => Ok(ExperimentName::SheppLogan21),
            "forbild-41" => Ok(ExperimentName::Forbild41),
            other => Err(format!("unknown experiment {other:?} (expected shepp-logan-21 or forbild-41)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub name: ExperimentName,
    pub phantom: PhantomKind,
    /// Square image side.
    pub size: usize,
    pub views: usize,
    pub iterations: usize,
    /// `None` uses the phantom's own count of nonzero gradients.
    pub sparsity: Option<usize>,
    pub window: (f64, f64),
    /// IHT-POCS iterations saved as images; those past `iterations` are skipped.
    pub snapshots: Vec<usize>,
    pub snapshot_window: (f64, f64),
}

#[derive(Debug, Clone)]
pub struct MethodRun {
    pub method: Method,
    pub result: ReconResult,
    pub metrics: MetricReport,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub sparsity: usize,
    /// In [`Method::ALL`] order.
    pub runs: Vec<MethodRun>,
}

impl ExperimentReport {
    pub fn run(&self, method: Method) -> &MethodRun {
        self.runs.iter().find(|r| r.method == method).expect("every method runs")
    }
}

/// Summary CSV with header `method,d,r,psnr,iterations`.
pub fn summary_csv(runs: &[MethodRun]) -> String {
    let mut s = String::from("method,d,r,psnr,iterations\n");
    for r in runs {
        let m = &r.metrics;
        writeln!(s, "{},{:e},{:e},{},{}", r.method, m.d, m.r, fmt_psnr(m.psnr), r.result.iterations).unwrap();
    }
    s
}

fn write_trace(path: &Path, result: &ReconResult) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    write_trace_csv(&result.trace, BufWriter::new(file)).map_err(|e| CliError::io(path, e))
}

/// Phantom, projection, four reconstructions, metrics, traces and windowed
/// PGMs, all written under `out_dir`. Every output path goes into `rec`.
pub fn run_experiment(
    spec: &ExperimentSpec,
    out_dir: &Path,
    progress: bool,
    rec: &mut Recorder,
) -> CliResult<ExperimentReport> {
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let n = spec.size;
    let truth = spec.phantom.render(n, n)?;
    let proj = Projector::auto(Geometry::parallel_beam(n, n, spec.views)?);
    let sino = proj.forward(&truth)?;
    let sparsity = match spec.sparsity {
        Some(s) => s,
        None => l0_norm(&gradient_magnitude(&truth)?, 0.0),
    };

    let mut outputs = Vec::new();
    let phantom_rcf = out_dir.join("phantom.rcf");
    truth.write_rcf(&phantom_rcf)?;
    let phantom_pgm = out_dir.join("phantom.pgm");
    write_pgm(&phantom_pgm, &truth, spec.window.0, spec.window.1)?;
    let sino_rcf = out_dir.join("sinogram.rcf");
    sino.write_rcf(&sino_rcf)?;
    outputs.extend([phantom_rcf, phantom_pgm, sino_rcf]);

    let snapshots: Vec<usize> = spec.snapshots.iter().copied().filter(|&k| k <= spec.iterations).collect();
    // The methods share only read-only inputs, so they run side by side.
    let runs = Method::ALL
        .par_iter()
        .map(|&method| {
            let mut cfg = SolverConfig::new(method, spec.iterations);
            if method.needs_sparsity() {
                cfg = cfg.with_sparsity(sparsity);
            }
            let mut saved: Vec<(usize, Image)> = Vec::new();
            let result = reconstruct_with(&proj, &sino, &cfg, Some(&truth), |k, f| {
                if progress {
                    eprintln!("{method} iter {k}/{}", spec.iterations);
                }
                if method == Method::IhtPocs && snapshots.contains(&k) {
                    saved.push((k, f.clone()));
                }
            })?;
            let metrics = metrics::evaluate(&truth, &result.image)?;
            Ok((MethodRun { method, result, metrics }, saved))
        })
        .collect::<sparsect::Result<Vec<_>>>()?;

    let mut report_runs = Vec::with_capacity(runs.len());
    for (run, saved) in runs {
        let name = run.method.name();
        let rcf = out_dir.join(format!("{name}.rcf"));
        run.result.image.write_rcf(&rcf)?;
        let pgm = out_dir.join(format!("{name}.pgm"));
        write_pgm(&pgm, &run.result.image, spec.window.0, spec.window.1)?;
        let trace = out_dir.join(format!("{name}_trace.csv"));
        write_trace(&trace, &run.result)?;
        outputs.extend([rcf, pgm, trace]);
        for (k, img) in saved {
            let rcf = out_dir.join(format!("{name}_iter{k:04}.rcf"));
            img.write_rcf(&rcf)?;
            let pgm = out_dir.join(format!("{name}_iter{k:04}.pgm"));
            write_pgm(&pgm, &img, spec.snapshot_window.0, spec.snapshot_window.1)?;
            outputs.extend([rcf, pgm]);
        }
        report_runs.push(run);
    }

    let summary = out_dir.join("summary.csv");
    std::fs::write(&summary, summary_csv(&report_runs)).map_err(|e| CliError::io(&summary, e))?;
    outputs.push(summary);

    rec.param("experiment", spec.name.name());
    rec.param("phantom", phantom_name(spec.phantom));
    rec.param("size", n);
    rec.param("views", spec.views);
    rec.param("bins", proj.geometry().bins());
    rec.param("iterations", spec.iterations);
    rec.param("sparsity", sparsity);
    rec.param("lambda", 1.0);
    rec.param("eps0", 0.0);
    rec.param("methods", Method::ALL.map(Method::name));
    rec.param("window", spec.window);
    rec.param("snapshots", &snapshots);
    rec.param("snapshot_window", spec.snapshot_window);
    for p in &outputs {
        rec.output(p);
    }
    Ok(ExperimentReport { sparsity, runs: report_runs })
}
