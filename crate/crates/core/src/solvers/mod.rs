//! Reconstruction loops.
//!
//! Every method shares the same outer iteration, starting from `f = 0`:
//!
//! 1. one ART sweep over all measurements with relaxation `lambda_k`;
//! 2. clamp negative pixels to zero;
//! 3. a method-specific regularization step;
//! 4. record `eps_k = ||f_k - f_{k-1}||_2` and stop early once `eps_k < eps0`.
//!
//! The regularization step is what distinguishes the methods:
//!
//! | method     | step 3                                                            |
//! |------------|-------------------------------------------------------------------|
//! | `art`      | none                                                              |
//! | `iht-pocs` | hard-threshold pseudo-inverse at the rank-`S` gradient magnitude  |
//! | `ist-tv`   | shrinkage pseudo-inverse at the rank-`S` gradient magnitude       |
//! | `art-tv`   | `n_tv` normalized steepest-descent steps on smoothed TV           |

mod art;
pub mod tv;

use std::fmt;
use std::str::FromStr;

pub use art::{art_sweep, residual_sq};

use crate::dgt::{gradient_magnitude, hard_threshold_pinv, select_threshold, soft_threshold_pinv};
use crate::error::{Error, Result};
use crate::image::{ConvergenceTrace, Image, Sinogram, TraceRecord};
use crate::metrics;
use crate::projector::{check_image, check_sinogram, SystemMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Art,
    IhtPocs,
    ArtTv,
    IstTv,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Art, Method::ArtTv, Method::IstTv, Method::IhtPocs];

    pub fn name(self) -> &'static str {
        match self {
            Method::Art => "art",
            Method::IhtPocs => "iht-pocs",
            Method::ArtTv => "art-tv",
            Method::IstTv => "ist-tv",
        }
    }

    pub fn needs_sparsity(self) -> bool {
        matches!(self, Method::IhtPocs | Method::IstTv)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method {s:?} (expected art, art-tv, ist-tv or iht-pocs)"))
    }
}

/// ART relaxation schedule `lambda_k`, `k = 1, 2, ...`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Relaxation {
    Constant(f64),
    /// `initial * rate^k`
    Decay {
        initial: f64,
        rate: f64,
    },
}

impl Relaxation {
    pub fn at(&self, k: usize) -> f64 {
        match *self {
            Relaxation::Constant(l) => l,
            Relaxation::Decay { initial, rate } => initial * rate.powi(k as i32),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Relaxation::Constant(l) => check_lambda(l),
            Relaxation::Decay { initial, rate } => {
                check_lambda(initial)?;
                if !(rate > 0.0 && rate <= 1.0) {
                    return Err(Error::InvalidConfig(format!("decay rate {rate} outside (0, 1]")));
                }
                Ok(())
            }
        }
    }
}

impl Default for Relaxation {
    fn default() -> Self {
        Relaxation::Constant(1.0)
    }
}

pub(crate) fn check_lambda(l: f64) -> Result<()> {
    if l > 0.0 && l < 2.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("relaxation {l} outside (0, 2)")))
    }
}

/// Parameters of the ART-TV baseline's descent phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TvParams {
    /// Descent steps per outer iteration.
    pub steps: usize,
    /// Each step moves `beta * ||ART change||` along the normalized TV gradient.
    pub beta: f64,
    /// Smoothing inside the square root.
    pub delta: f64,
}

impl Default for TvParams {
    fn default() -> Self {
        Self { steps: 20, beta: 0.2, delta: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub method: Method,
    pub iterations: usize,
    pub relaxation: Relaxation,
    pub sparsity: Option<usize>,
    pub eps0: f64,
    pub tv: TvParams,
}

impl SolverConfig {
    /// Constant `lambda = 1`, `eps0 = 0` (run every iteration), default TV parameters.
    pub fn new(method: Method, iterations: usize) -> Self {
        Self {
            method,
            iterations,
            relaxation: Relaxation::default(),
            sparsity: None,
            eps0: 0.0,
            tv: TvParams::default(),
        }
    }

    pub fn with_sparsity(mut self, s: usize) -> Self {
        self.sparsity = Some(s);
        self
    }

    pub fn with_relaxation(mut self, r: Relaxation) -> Self {
        self.relaxation = r;
        self
    }

    pub fn with_eps0(mut self, eps0: f64) -> Self {
        self.eps0 = eps0;
        self
    }

    pub fn with_tv(mut self, tv: TvParams) -> Self {
        self.tv = tv;
        self
    }

    pub fn validate(&self, num_pixels: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.iterations == 0 {
            return bad("iteration count must be at least 1".into());
        }
        self.relaxation.validate()?;
        if !(self.eps0 >= 0.0) {
            return bad(format!("eps0 {} must be nonnegative", self.eps0));
        }
        if self.method.needs_sparsity() {
            match self.sparsity {
                None => return bad(format!("{} requires a sparsity level", self.method)),
                Some(s) if s == 0 || s > num_pixels => return bad(format!("sparsity {s} outside 1..={num_pixels}")),
                _ => {}
            }
        }
        if self.method == Method::ArtTv {
            let tv = &self.tv;
            if !(tv.beta > 0.0 && tv.beta.is_finite()) || !(tv.delta > 0.0 && tv.delta.is_finite()) {
                return bad(format!("tv beta {} and delta {} must be positive", tv.beta, tv.delta));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconResult {
    pub image: Image,
    pub iterations: usize,
    /// The exit criterion `eps_k < eps0` fired.
    pub converged: bool,
    pub trace: ConvergenceTrace,
}

/// Per-pixel `max(v, 0)`.
pub fn positivity_clamp(f: &Image) -> Image {
    let data = f.as_slice().iter().map(|&v| if v >= 0.0 { v } else { 0.0 }).collect();
    Image::from_parts(f.rows(), f.cols(), data)
}

fn clamp_in_place(x: &mut [f64]) {
    for v in x {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

fn tv_descent(x: &mut [f64], rows: usize, cols: usize, art_change: f64, tv: &TvParams) {
    let step = tv.beta * art_change;
    if step == 0.0 {
        return;
    }
    for _ in 0..tv.steps {
        let g = tv::smoothed_tv_gradient(x, rows, cols, tv.delta);
        let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gn == 0.0 {
            break;
        }
        let scale = step / gn;
        for (xi, gi) in x.iter_mut().zip(&g) {
            *xi -= scale * gi;
        }
    }
}

/// Run `cfg.method` from `f = 0`; see the module docs for the loop.
pub fn reconstruct<A: SystemMatrix + ?Sized>(
    a: &A,
    p: &Sinogram,
    cfg: &SolverConfig,
    reference: Option<&Image>,
) -> Result<ReconResult> {
    reconstruct_with(a, p, cfg, reference, |_, _| {})
}

/// [`reconstruct`] with a callback receiving `(k, f_k)` after every iteration.
pub fn reconstruct_with<A, F>(
    a: &A,
    p: &Sinogram,
    cfg: &SolverConfig,
    reference: Option<&Image>,
    mut observer: F,
) -> Result<ReconResult>
where
    A: SystemMatrix + ?Sized,
    F: FnMut(usize, &Image),
{
    let (rows, cols) = a.image_shape();
    check_sinogram(a, p)?;
    cfg.validate(rows * cols)?;
    if let Some(t) = reference {
        check_image(a, t)?;
        // Surface a degenerate reference before running anything.
        metrics::evaluate(t, t)?;
    }

    let mut current = Image::zeros(rows, cols)?;
    let mut trace = ConvergenceTrace::new();
    let mut converged = false;
    let mut iterations = 0;

    for k in 1..=cfg.iterations {
        let mut x = current.as_slice().to_vec();
        art::sweep_in_place(a, p.as_slice(), &mut x, cfg.relaxation.at(k));
        clamp_in_place(&mut x);

        let next = match cfg.method {
            Method::Art => Image::new(rows, cols, x)?,
            Method::IhtPocs | Method::IstTv => {
                let tilde = Image::new(rows, cols, x)?;
                let s = cfg.sparsity.expect("validated");
                let w = select_threshold(&gradient_magnitude(&tilde)?, s)?.w;
                if cfg.method == Method::IhtPocs {
                    hard_threshold_pinv(&tilde, w)?
                } else {
                    soft_threshold_pinv(&tilde, w)?
                }
            }
            Method::ArtTv => {
                let change = x.iter().zip(current.as_slice()).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
                tv_descent(&mut x, rows, cols, change, &cfg.tv);
                Image::new(rows, cols, x)?
            }
        };

        let epsilon = next.distance(&current)?;
        let metrics = match reference {
            Some(t) => Some(metrics::evaluate(t, &next)?),
            None => None,
        };
        trace.push(TraceRecord { iter: k, epsilon, metrics })?;
        observer(k, &next);
        current = next;
        iterations = k;
        if epsilon < cfg.eps0 {
            converged = true;
            break;
        }
    }

    Ok(ReconResult { image: current, iterations, converged, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Geometry;
    use crate::projector::{ExplicitMatrix, Projector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn clamp_examples() {
        let f = Image::new(1, 3, vec![-1.0, 0.0, 2.0]).unwrap();
        let c = positivity_clamp(&f);
        assert_eq!(c.as_slice(), &[0.0, 0.0, 2.0]);
        assert_eq!(positivity_clamp(&c), c);
        let nonneg = Image::new(1, 2, vec![0.5, 3.0]).unwrap();
        assert_eq!(positivity_clamp(&nonneg), nonneg);
    }

    #[test]
    fn relaxation_schedules() {
        assert_eq!(Relaxation::Constant(1.0).at(50), 1.0);
        let d = Relaxation::Decay { initial: 1.0, rate: 0.99 };
        assert!((d.at(1) - 0.99).abs() < 1e-15);
        assert!((d.at(100) - 0.99f64.powi(100)).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        let ok = SolverConfig::new(Method::IhtPocs, 5).with_sparsity(10);
        assert!(ok.validate(100).is_ok());
        assert!(SolverConfig::new(Method::IhtPocs, 5).validate(100).is_err());
        assert!(ok.clone().with_sparsity(101).validate(100).is_err());
        assert!(SolverConfig::new(Method::Art, 0).validate(100).is_err());
        assert!(SolverConfig::new(Method::Art, 1).with_eps0(-1.0).validate(100).is_err());
        assert!(SolverConfig::new(Method::Art, 1).with_relaxation(Relaxation::Constant(2.0)).validate(100).is_err());
        assert!(SolverConfig::new(Method::Art, 1)
            .with_relaxation(Relaxation::Decay { initial: 1.0, rate: 1.5 })
            .validate(100)
            .is_err());
        assert!(SolverConfig::new(Method::ArtTv, 1)
            .with_tv(TvParams { steps: 3, beta: 0.0, delta: 1e-8 })
            .validate(100)
            .is_err());
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("sart".parse::<Method>().is_err());
    }

    fn small_problem() -> (Projector, Sinogram, Image) {
        let t = crate::phantom::shepp_logan(16, 16).unwrap();
        let g = Geometry::parallel_beam(16, 16, 6).unwrap();
        let a = Projector::precomputed(g);
        let p = a.forward(&t).unwrap();
        (a, p, t)
    }

    #[test]
    fn single_iteration_with_large_eps0() {
        let (a, p, _) = small_problem();
        let cfg = SolverConfig::new(Method::Art, 1).with_eps0(1e9);
        let res = reconstruct(&a, &p, &cfg, None).unwrap();
        assert_eq!(res.iterations, 1);
        assert!(res.converged);
        assert!(res.trace.records()[0].epsilon < 1e9);
        assert!(res.trace.records()[0].metrics.is_none());

        let strict = SolverConfig::new(Method::Art, 1).with_eps0(1e-12);
        let res = reconstruct(&a, &p, &strict, None).unwrap();
        assert_eq!(res.iterations, 1);
        assert!(!res.converged);
    }

    #[test]
    fn early_exit_respects_eps0() {
        let (a, p, _) = small_problem();
        let cfg = SolverConfig::new(Method::Art, 500).with_eps0(1e-3);
        let res = reconstruct(&a, &p, &cfg, None).unwrap();
        assert!(res.converged);
        assert!(res.iterations < 500);
        assert!(res.trace.last().unwrap().epsilon < 1e-3);
        assert!(res.trace.records()[..res.iterations - 1].iter().all(|r| r.epsilon >= 1e-3));
    }

    #[test]
    fn trace_epsilon_matches_snapshots() {
        let (a, p, t) = small_problem();
        for method in Method::ALL {
            let cfg = SolverConfig::new(method, 12).with_sparsity(60);
            let mut snaps = vec![Image::zeros(16, 16).unwrap()];
            let res = reconstruct_with(&a, &p, &cfg, Some(&t), |_, f| snaps.push(f.clone())).unwrap();
            assert_eq!(snaps.len(), 13);
            for k in [1usize, 5, 12] {
                let eps = snaps[k].distance(&snaps[k - 1]).unwrap();
                assert_eq!(res.trace.records()[k - 1].epsilon, eps, "{method} k={k}");
            }
            assert_eq!(snaps[12], res.image);
            let m = res.trace.last().unwrap().metrics.unwrap();
            assert_eq!(m, metrics::evaluate(&t, &res.image).unwrap());
        }
    }

    #[test]
    fn runs_are_bit_identical() {
        let (a, p, _) = small_problem();
        for method in Method::ALL {
            let cfg = SolverConfig::new(method, 8).with_sparsity(60);
            assert_eq!(reconstruct(&a, &p, &cfg, None).unwrap(), reconstruct(&a, &p, &cfg, None).unwrap());
        }
    }

    #[test]
    fn sparsity_methods_stay_nonnegative() {
        let (a, p, _) = small_problem();
        for method in [Method::IhtPocs, Method::IstTv] {
            let cfg = SolverConfig::new(method, 20).with_sparsity(40);
            assert!(reconstruct(&a, &p, &cfg, None).unwrap().image.min() >= 0.0);
        }
    }

    #[test]
    fn feasible_sparse_image_is_a_fixed_point() {
        // A single bright pixel block: consistent data, nonnegative, and its
        // gradient support fits within S with every entry at the threshold.
        let f =
            Image::from_fn(6, 6, |i, j| if (3..=4).contains(&i) && (3..=4).contains(&j) { 1.0 } else { 0.0 }).unwrap();
        let support = crate::dgt::l0_norm(&gradient_magnitude(&f).unwrap(), 0.0);
        let n = 36;
        let dense: Vec<Vec<f64>> = (0..n).map(|k| (0..n).map(|c| if c == k { 1.0 } else { 0.0 }).collect()).collect();
        let a = ExplicitMatrix::from_dense(6, 6, &dense).unwrap();
        let p = a.forward(&f).unwrap();
        // One iteration from f itself: ART is exact, clamp is identity, and
        // the filter keeps every stencil since all nonzero gradients are >= w.
        let mut x = f.as_slice().to_vec();
        art::sweep_in_place(&a, p.as_slice(), &mut x, 1.0);
        clamp_in_place(&mut x);
        let tilde = Image::new(6, 6, x).unwrap();
        assert_eq!(tilde, f);
        let w = select_threshold(&gradient_magnitude(&tilde).unwrap(), support).unwrap().w;
        assert!(w > 0.0);
        // Stencils with zero gradient are flat already, so averaging them is exact.
        assert_eq!(hard_threshold_pinv(&tilde, w).unwrap(), f);
    }

    #[test]
    fn art_residual_is_monotone_on_consistent_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..5 {
            let (rows, cols, m) = (4, 4, 10);
            let dense: Vec<Vec<f64>> = (0..m)
                .map(|_| {
                    (0..rows * cols)
                        .map(|_| if rng.random_bool(0.5) { rng.random_range(0.1..1.0) } else { 0.0 })
                        .collect()
                })
                .collect();
            let a = ExplicitMatrix::from_dense(rows, cols, &dense).unwrap();
            let truth = Image::from_fn(rows, cols, |_, _| rng.random_range(0.0..1.0)).unwrap();
            let p = a.forward(&truth).unwrap();
            let mut f = Image::zeros(rows, cols).unwrap();
            let mut prev = residual_sq(&a, &p, &f).unwrap();
            for _ in 0..50 {
                f = art_sweep(&a, &p, &f, 1.0).unwrap();
                let r = residual_sq(&a, &p, &f).unwrap();
                assert!(r <= prev * (1.0 + 1e-12) + 1e-24, "{r} > {prev}");
                prev = r;
            }
        }
    }

    #[test]
    fn rejects_mismatched_inputs() {
        let (a, _, t) = small_problem();
        let cfg = SolverConfig::new(Method::Art, 1);
        let wrong = Sinogram::new(2, 2, vec![0.0; 4]).unwrap();
        assert!(reconstruct(&a, &wrong, &cfg, None).is_err());
        let p = a.forward(&t).unwrap();
        let bad_ref = Image::zeros(4, 4).unwrap();
        assert!(reconstruct(&a, &p, &cfg, Some(&bad_ref)).is_err());
        let flat_ref = Image::filled(16, 16, 1.0).unwrap();
        assert!(matches!(reconstruct(&a, &p, &cfg, Some(&flat_ref)), Err(Error::Degenerate(_))));
    }
}
