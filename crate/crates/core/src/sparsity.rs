//! Estimating the gradient sparsity `S` from projection data alone.
//!
//! For a trial sparsity `S`, a short IHT-POCS run gives an image `f_S` and
//! the residual `sigma(S) = ||p - R f_S||^2`. The residual falls slowly as
//! `S` grows, but jumps once `S` drops below the true sparsity: the filter
//! then has to flatten real edges and the data can no longer be matched.
//!
//! [`estimate_sparsity`] evaluates `sigma` on a coarse grid (powers of two
//! by default), walks down from the largest `S` to the first adjacent pair
//! whose residual ratio exceeds the knee factor, and bisects that bracket
//! until it is narrow.
//! The upper end of the final bracket is returned, which errs on the side
//! of overestimating `S`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::Sinogram;
use crate::projector::SystemMatrix;
use crate::solvers::{reconstruct, residual_sq, Method, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualPoint {
    pub sparsity: usize,
    pub sigma: f64,
    pub iterations: usize,
}

/// `sigma(S)` samples ordered by strictly increasing `S`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResidualCurve {
    entries: Vec<ResidualPoint>,
}

impl ResidualCurve {
    pub fn entries(&self) -> &[ResidualPoint] {
        &self.entries
    }

    pub fn sigma_at(&self, s: usize) -> Option<f64> {
        self.entries.iter().find(|e| e.sparsity == s).map(|e| e.sigma)
    }

    fn insert(&mut self, point: ResidualPoint) {
        match self.entries.binary_search_by_key(&point.sparsity, |e| e.sparsity) {
            Ok(k) => self.entries[k] = point,
            Err(k) => self.entries.insert(k, point),
        }
    }

    /// CSV with header `S,sigma,iters`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "S,sigma,iters")?;
        for e in &self.entries {
            writeln!(w, "{},{:e},{}", e.sparsity, e.sigma, e.iterations)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SparsityGrid {
    /// `1, 2, 4, ...` up to the pixel count (inclusive when it is a power of two).
    PowersOfTwo,
    Explicit(Vec<usize>),
}

impl SparsityGrid {
    pub fn values(&self, num_pixels: usize) -> Result<Vec<usize>> {
        let mut v = match self {
            SparsityGrid::PowersOfTwo => {
                std::iter::successors(Some(1usize), |s| s.checked_mul(2)).take_while(|&s| s <= num_pixels).collect()
            }
            SparsityGrid::Explicit(v) => v.clone(),
        };
        v.sort_unstable();
        v.dedup();
        if v.len() < 2 {
            return Err(Error::InvalidConfig("sparsity grid needs at least two points".into()));
        }
        if v[0] == 0 || *v.last().unwrap() > num_pixels {
            return Err(Error::InvalidConfig(format!("sparsity grid must lie in 1..={num_pixels}")));
        }
        Ok(v)
    }
}

/// Short probes leave the residual dominated by slow ART convergence and
/// blur the jump; 400 iterations separate the two regimes clearly.
pub const DEFAULT_PROBE_ITERS: usize = 400;

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateConfig {
    pub probe_iters: usize,
    pub grid: SparsityGrid,
    /// Adjacent ratio `sigma(S_i) / sigma(S_{i+1})` that marks the jump.
    pub knee_factor: f64,
    /// Bisection stops once `hi - lo <= bracket_tolerance * hi`.
    pub bracket_tolerance: f64,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self {
            probe_iters: DEFAULT_PROBE_ITERS,
            grid: SparsityGrid::PowersOfTwo,
            knee_factor: 3.0,
            bracket_tolerance: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparsityEstimate {
    pub sparsity: usize,
    /// Final `(lo, hi)`; `sparsity == hi`.
    pub bracket: (usize, usize),
    /// The coarse bracket found on the grid.
    pub coarse_bracket: (usize, usize),
    pub curve: ResidualCurve,
}

/// `sigma(S)` after `probe_iters` iterations of IHT-POCS with `lambda = 1`.
pub fn residual_at<A: SystemMatrix + ?Sized>(
    a: &A,
    p: &Sinogram,
    sparsity: usize,
    probe_iters: usize,
) -> Result<ResidualPoint> {
    if probe_iters == 0 {
        return Err(Error::InvalidConfig("probe iterations must be at least 1".into()));
    }
    let cfg = SolverConfig::new(Method::IhtPocs, probe_iters).with_sparsity(sparsity);
    let res = reconstruct(a, p, &cfg, None)?;
    Ok(ResidualPoint { sparsity, sigma: residual_sq(a, p, &res.image)?, iterations: res.iterations })
}

fn is_jump(sigma_lower_s: f64, sigma_upper_s: f64, knee: f64) -> bool {
    sigma_lower_s > knee * sigma_upper_s
}

pub fn estimate_sparsity<A: SystemMatrix + ?Sized>(
    a: &A,
    p: &Sinogram,
    cfg: &EstimateConfig,
) -> Result<SparsityEstimate> {
    if !(cfg.knee_factor > 1.0) {
        return Err(Error::InvalidConfig(format!("knee factor {} must exceed 1", cfg.knee_factor)));
    }
    if !(cfg.bracket_tolerance > 0.0 && cfg.bracket_tolerance < 1.0) {
        return Err(Error::InvalidConfig(format!("bracket tolerance {} outside (0, 1)", cfg.bracket_tolerance)));
    }
    let grid = cfg.grid.values(a.num_cols())?;

    let points = grid.par_iter().map(|&s| residual_at(a, p, s, cfg.probe_iters)).collect::<Result<Vec<_>>>()?;
    let mut curve = ResidualCurve::default();
    for pt in points {
        curve.insert(pt);
    }

    // Walk down from the largest S: the first jump met is the one just below
    // the true sparsity. Further down the residual keeps climbing, often by
    // even larger ratios, so the smallest jump on the grid is the wrong one.
    let knee = curve.entries.windows(2).rposition(|w| is_jump(w[0].sigma, w[1].sigma, cfg.knee_factor));
    let Some(k) = knee else {
        return Err(Error::EstimationFailed { knee_factor: cfg.knee_factor, curve });
    };
    let (lo_pt, hi_pt) = (curve.entries[k], curve.entries[k + 1]);
    let coarse_bracket = (lo_pt.sparsity, hi_pt.sparsity);

    // Bisect on which side of the jump the midpoint falls: a midpoint whose
    // residual sits closer (in log scale) to the high end joins the jump side.
    let (mut lo, mut hi) = (lo_pt, hi_pt);
    while hi.sparsity - lo.sparsity > 1
        && (hi.sparsity - lo.sparsity) as f64 > cfg.bracket_tolerance * hi.sparsity as f64
    {
        let mid_s = lo.sparsity + (hi.sparsity - lo.sparsity) / 2;
        let mid = residual_at(a, p, mid_s, cfg.probe_iters)?;
        curve.insert(mid);
        if mid.sigma * mid.sigma > lo.sigma * hi.sigma {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    Ok(SparsityEstimate { sparsity: hi.sparsity, bracket: (lo.sparsity, hi.sparsity), coarse_bracket, curve })
}
