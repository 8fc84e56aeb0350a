use crate::error::{invalid, Result};
use crate::geometry::{
    grid_discretize, sample_pairs_with, sample_points, DomainKind, DomainSpec, PairStrategy, SampleOptions,
};
use crate::kernels::{ball_green, Dimension};
use crate::solver::{assemble_bilaplacian, evaluate_pairs, GreenSample, SolveOptions};
use rayon::prelude::*;

/// How discrete samples are drawn: pair count, seed, strategy and the size
/// of the source pool (each source costs one Green column).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplePlan {
    pub count: usize,
    pub seed: u64,
    pub strategy: PairStrategy,
    pub sources: usize,
}

/// Exact Green samples on a disk (n = 2) from Boggio's kernel.
pub fn exact_disk_samples(
    domain: &DomainSpec,
    count: usize,
    seed: u64,
    strategy: PairStrategy,
) -> Result<Vec<GreenSample>> {
    let DomainKind::Disk { radius } = domain.kind() else {
        return Err(invalid(format!("exact samples need a disk, got {domain}")));
    };
    let c = domain.offset();
    let pairs = sample_pairs_with(domain, count, seed, strategy, &SampleOptions::default())?;
    pairs
        .into_par_iter()
        .map(|p| {
            let x = [p.x[0] - c[0], p.x[1] - c[1]];
            let y = [p.y[0] - c[0], p.y[1] - c[1]];
            let g = ball_green(Dimension::TWO, &x, &y, radius)?;
            GreenSample::new(Dimension::TWO, p, g, None)
        })
        .collect()
}

/// Discrete Green samples on a grid of spacing `h`. Sources come from a
/// pool of `plan.sources` points drawn with the same seed; every point keeps
/// d ≥ 2h and every pair r ≥ 2h.
pub fn discrete_samples(
    domain: &DomainSpec,
    h: f64,
    plan: &SamplePlan,
    opts: &SolveOptions,
) -> Result<Vec<GreenSample>> {
    if plan.sources == 0 {
        return Err(invalid("the source pool must not be empty"));
    }
    let op = assemble_bilaplacian(grid_discretize(domain, h)?)?;
    let anchors = sample_points(domain, plan.sources, plan.seed, 2.0 * h)?;
    let options = SampleOptions {
        min_d: 2.0 * h,
        min_r: 2.0 * h,
        anchors: Some(anchors),
    };
    let pairs = sample_pairs_with(domain, plan.count, plan.seed, plan.strategy, &options)?;
    evaluate_pairs(&op, &pairs, opts)
}
