use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use sparsect::geometry::default_bins;
use sparsect::io::write_trace_csv;
use sparsect::phantom::PhantomKind;
use sparsect::{
    estimate_sparsity, metrics, reconstruct_with, EstimateConfig, Geometry, Image, Projector, Relaxation, Sinogram,
    SolverConfig, SystemMatrix,
};

use crate::args::{
    Cli, Command, EstimateArgs, ExperimentArgs, ExportArgs, MetricsArgs, PhantomArgs, ProjectArgs, ReconstructArgs,
    ScanArgs, Size,
};
use crate::error::{CliError, CliResult};
use crate::experiment::run_experiment;
use crate::manifest::{default_path, Recorder};
use crate::pgm::write_pgm;

/// Run one subcommand and write its manifest.
pub fn run(cli: Cli) -> CliResult<()> {
    let mut rec = Recorder::new(cli.command.name());
    let primary = match &cli.command {
        Command::Phantom(a) => phantom(a, &mut rec)?,
        Command::Project(a) => project(a, &mut rec)?,
        Command::Reconstruct(a) => reconstruct(a, &mut rec)?,
        Command::Metrics(a) => metrics_cmd(a, &mut rec)?,
        Command::EstimateSparsity(a) => estimate(a, &mut rec)?,
        Command::ExportPgm(a) => export_pgm(a, &mut rec)?,
        Command::Experiment(a) => experiment(a, &mut rec)?,
    };
    rec.finish(&cli.manifest.unwrap_or(primary))?;
    Ok(())
}

pub fn phantom_name(kind: PhantomKind) -> &'static str {
    match kind {
        PhantomKind::SheppLogan => "shepp-logan",
        PhantomKind::Forbild => "forbild",
    }
}

fn read_image(path: &Path, rec: &mut Recorder) -> CliResult<Image> {
    rec.input(path);
    Ok(Image::read_rcf(path)?)
}

/// Angles in radians separated by commas or whitespace.
pub fn read_angles(path: &Path) -> CliResult<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| CliError::Input(format!("{}: bad angle {t:?}", path.display()))))
        .collect()
}

fn geometry(rows: usize, cols: usize, scan: &ScanArgs, rec: &mut Recorder) -> CliResult<Geometry> {
    let mut b = Geometry::builder(rows, cols);
    match &scan.angles_file {
        Some(path) => {
            rec.input(path);
            let angles = read_angles(path)?;
            if angles.len() != scan.views {
                return Err(CliError::Usage(format!(
                    "--views {} but {} lists {} angles",
                    scan.views,
                    path.display(),
                    angles.len()
                )));
            }
            b = b.angles(angles);
        }
        None => b = b.views(scan.views),
    }
    if let Some(bins) = scan.bins {
        b = b.bins(bins);
    }
    let g = b.build()?;
    rec.param("views", g.views());
    rec.param("bins", g.bins());
    rec.param("angles", g.angles());
    Ok(g)
}

fn read_sinogram(path: &Path, scan: &ScanArgs, rec: &mut Recorder) -> CliResult<Sinogram> {
    rec.input(path);
    let sino = Sinogram::read_rcf(path)?;
    if sino.views() != scan.views {
        return Err(CliError::Input(format!(
            "{} has {} views, --views says {}",
            path.display(),
            sino.views(),
            scan.views
        )));
    }
    if let Some(b) = scan.bins.filter(|&b| b != sino.bins()) {
        return Err(CliError::Input(format!("{} has {} bins, --bins says {b}", path.display(), sino.bins())));
    }
    Ok(sino)
}

/// The square size whose default detector has exactly `bins` bins, if any.
pub fn infer_square_size(bins: usize) -> Option<usize> {
    let guess = (bins as f64 / std::f64::consts::SQRT_2).floor() as usize;
    (guess.saturating_sub(1)..=guess + 1).find(|&n| n > 0 && default_bins(n, n) == bins)
}

fn resolve_size(size: Option<Size>, reference: Option<&Image>, bins: usize) -> CliResult<(usize, usize)> {
    if let Some(s) = size {
        return Ok((s.rows, s.cols));
    }
    if let Some(t) = reference {
        return Ok((t.rows(), t.cols()));
    }
    infer_square_size(bins)
        .map(|n| (n, n))
        .ok_or_else(|| CliError::Usage(format!("cannot infer the image size from {bins} bins; pass --size")))
}

/// `recon.rcf` -> `recon_iter0100.rcf`
pub fn snapshot_path(out: &Path, k: usize, width: usize) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match out.extension() {
        Some(ext) => format!("{stem}_iter{k:0width$}.{}", ext.to_string_lossy()),
        None => format!("{stem}_iter{k:0width$}"),
    };
    out.with_file_name(name)
}

fn phantom(a: &PhantomArgs, rec: &mut Recorder) -> CliResult<PathBuf> {
    let img = a.name.render(a.size.rows, a.size.cols)?;
    img.write_rcf(&a.out)?;
    rec.param("name", phantom_name(a.name));
    rec.param("rows", a.size.rows);
    rec.param("cols", a.size.cols);
    rec.output(&a.out);
    Ok(default_path(&a.out))
}

fn project(a: &ProjectArgs, rec: &mut Recorder) -> CliResult<PathBuf> {
    let img = read_image(&a.image, rec)?;
    let proj = Projector::auto(geometry(img.rows(), img.cols(), &a.scan, rec)?);
    proj.forward(&img)?.write_rcf(&a.out)?;
    rec.output(&a.out);
    Ok(default_path(&a.out))
}

fn reconstruct(a: &ReconstructArgs, rec: &mut Recorder) -> CliResult<PathBuf> {
    let sino = read_sinogram(&a.sino, &a.scan, rec)?;
    let reference = a.reference.as_deref().map(|p| read_image(p, rec)).transpose()?;
    let (rows, cols) = resolve_size(a.size, reference.as_ref(), sino.bins())?;
    let scan = ScanArgs { views: a.scan.views, bins: Some(sino.bins()), angles_file: a.scan.angles_file.clone() };
    let proj = Projector::auto(geometry(rows, cols, &scan, rec)?);

    let relaxation = match (a.lambda, a.lambda_decay) {
        (_, Some(rate)) => Relaxation::Decay { initial: 1.0, rate },
        (l, None) => Relaxation::Constant(l.unwrap_or(1.0)),
    };
    let mut cfg = SolverConfig::new(a.method, a.iters).with_relaxation(relaxation).with_eps0(a.eps0);
    if let Some(s) = a.sparsity {
        cfg = cfg.with_sparsity(s);
    }
    if a.snapshot_every == Some(0) {
        return Err(CliError::Usage("--snapshot-every must be at least 1".into()));
    }

    let width = a.iters.to_string().len().max(4);
    let mut snapshot_err = None;
    let mut snapshots = Vec::new();
    let mut previous = Image::zeros(rows, cols)?;
    let result = reconstruct_with(&proj, &sino, &cfg, reference.as_ref(), |k, f| {
        if a.progress {
            let eps = previous.distance(f).unwrap_or(f64::NAN);
            eprintln!("{} iter {k} epsilon {eps:e}", a.method);
            previous = f.clone();
        }
        if let Some(every) = a.snapshot_every {
            if k % every == 0 && snapshot_err.is_none() {
                let path = snapshot_path(&a.out, k, width);
                match f.write_rcf(&path) {
                    Ok(()) => snapshots.push(path),
                    Err(e) => snapshot_err = Some(e),
                }
            }
        }
    })?;
    if let Some(e) = snapshot_err {
        return Err(e.into());
    }

    result.image.write_rcf(&a.out)?;
    rec.output(&a.out);
    for p in &snapshots {
        rec.output(p);
    }
    if let Some(path) = &a.trace {
        let file = File::create(path).map_err(|e| CliError::io(path, e))?;
        write_trace_csv(&result.trace, BufWriter::new(file)).map_err(|e| CliError::io(path, e))?;
        rec.output(path);
    }
    eprintln!("{}: {} iterations{}", a.method, result.iterations, if result.converged { ", converged" } else { "" });

    rec.param("method", a.method.name());
    rec.param("rows", rows);
    rec.param("cols", cols);
    rec.param("iters", a.iters);
    rec.param("sparsity", a.sparsity);
    rec.param("relaxation", format!("{relaxation:?}"));
    rec.param("eps0", a.eps0);
    rec.param("snapshot_every", a.snapshot_every);
    rec.param("iterations_run", result.iterations);
    Ok(default_path(&a.out))
}

fn metrics_cmd(a: &MetricsArgs, rec: &mut Recorder) -> CliResult<PathBuf> {
    let t = read_image(&a.reference, rec)?;
    let f = read_image(&a.test, rec)?;
    if !t.same_shape(&f) {
        return Err(CliError::Input(format!(
            "reference is {}x{} but test image is {}x{}",
            t.rows(),
            t.cols(),
            f.rows(),
            f.cols()
        )));
    }
    let m = metrics::evaluate(&t, &f)?;
    println!("{},{},{}", m.d, m.r, m.psnr);
    rec.param("d", m.d);
    rec.param("r", m.r);
    rec.param("psnr", sparsect::io::fmt_psnr(m.psnr));
    let mut s = a.test.as_os_str().to_owned();
    s.push(".metrics.manifest.json");
    Ok(PathBuf::from(s))
}

fn estimate(a: &EstimateArgs, rec: &mut Recorder) -> CliResult<PathBuf> {
    let sino = read_sinogram(&a.sino, &a.scan, rec)?;
    let (rows, cols) = resolve_size(a.size, None, sino.bins())?;
    let scan = ScanArgs { views: a.scan.views, bins: Some(sino.bins()), angles_file: a.scan.angles_file.clone() };
    let proj = Projector::auto(geometry(rows, cols, &scan, rec)?);
    let cfg = EstimateConfig {
        probe_iters: a.probe_iters,
        grid: a.grid.clone(),
        knee_factor: a.knee_factor,
        bracket_tolerance: a.tolerance,
    };
    rec.param("rows", rows);
    rec.param("cols", cols);
    rec.param("probe_iters", a.probe_iters);
    rec.param("grid", cfg.grid.values(proj.num_cols())?);
    rec.param("knee_factor", a.knee_factor);
    rec.param("tolerance", a.tolerance);

    let write_curve = |curve: &sparsect::ResidualCurve| -> CliResult<()> {
        let file = File::create(&a.out_curve).map_err(|e| CliError::io(&a.out_curve, e))?;
        curve.write_csv(BufWriter::new(file)).map_err(|e| CliError::io(&a.out_curve, e))
    };
    match estimate_sparsity(&proj, &sino, &cfg) {
        Ok(est) => {
            write_curve(&est.curve)?;
            rec.output(&a.out_curve);
            println!("{}", est.sparsity);
            eprintln!("coarse bracket {:?}, final bracket {:?}", est.coarse_bracket, est.bracket);
            rec.param("estimate", est.sparsity);
            rec.param("bracket", est.bracket);
            Ok(default_path(&a.out_curve))
        }
        Err(sparsect::Error::EstimationFailed { knee_factor, curve }) => {
            // Keep the curve for inspection even though no knee was found.
            write_curve(&curve)?;
            Err(sparsect::Error::EstimationFailed { knee_factor, curve }.into())
        }
        Err(e) => Err(e.into()),
    }
}

fn export_pgm(a: &ExportArgs, rec: &mut Recorder) -> CliResult<PathBuf> {
    let img = read_image(&a.image, rec)?;
    write_pgm(&a.out, &img, a.lo, a.hi)?;
    rec.param("lo", a.lo);
    rec.param("hi", a.hi);
    rec.output(&a.out);
    Ok(default_path(&a.out))
}

fn experiment(a: &ExperimentArgs, rec: &mut Recorder) -> CliResult<PathBuf> {
    let mut spec = a.name.spec();
    if let Some(n) = a.iters {
        spec.iterations = n;
    }
    run_experiment(&spec, &a.out, a.progress, rec)?;
    Ok(a.out.join("manifest.json"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn size_inference_inverts_default_bins() {
        for n in 1..600 {
            assert_eq!(infer_square_size(default_bins(n, n)), Some(n), "n = {n}");
        }
        // ceil(sqrt(2) n) jumps from 3 to 5.
        assert_eq!(infer_square_size(4), None);
    }

    #[test]
    fn snapshot_names() {
        assert_eq!(snapshot_path(Path::new("a/recon.rcf"), 100, 4), Path::new("a/recon_iter0100.rcf"));
        assert_eq!(snapshot_path(Path::new("recon"), 7, 5), Path::new("recon_iter00007"));
    }

    #[test]
    fn angle_file_separators() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        std::fs::write(&p, "0, 0.5\n1.0\n").unwrap();
        assert_eq!(read_angles(&p).unwrap(), vec![0.0, 0.5, 1.0]);
        std::fs::write(&p, "0,x").unwrap();
        assert!(matches!(read_angles(&p), Err(CliError::Input(_))));
    }
}
