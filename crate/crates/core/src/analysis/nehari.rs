use crate::error::{invalid, Result};
use crate::geometry::{Ball, PointPair};
use crate::kernels::{ball_green, Dimension, DimensionCase};
use crate::solver::GreenSample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NehariReport {
    pub n: usize,
    pub delta: f64,
    /// Samples inside |x − y| ≤ δ max(dx, dy).
    pub region_count: usize,
    /// min G / shape over the region.
    pub c3: f64,
    /// Index of the sample attaining `c3`.
    pub argmin: usize,
    /// Region samples with G ≤ 0.
    pub violations: Vec<usize>,
}

impl NehariReport {
    pub fn passes(&self) -> bool {
        self.violations.is_empty() && self.c3 > 0.0
    }
}

/// Lower-bound shape near the diagonal: r^{4−n} for n > 4,
/// log(1 + r⁻⁴) for n = 4, (dx dy)^{1/2} for n = 3 and dx dy for n = 2.
pub fn nehari_shape(n: Dimension, dx: f64, dy: f64, r: f64) -> f64 {
    match n.case() {
        DimensionCase::AboveFour => r.powi(4 - n.get() as i32),
        DimensionCase::Four => (1.0 / r.powi(4)).ln_1p(),
        DimensionCase::Three => (dx * dy).sqrt(),
        DimensionCase::Two => dx * dy,
    }
}

/// Empirical lower-bound constant over the samples that fall in the region
/// |x − y| ≤ δ max(dx, dy). Fails when the region holds no sample.
pub fn nehari_region_check(samples: &[GreenSample], n: Dimension, delta: f64) -> Result<NehariReport> {
    if !(delta > 0.0) {
        return Err(invalid(format!("delta must be positive, got {delta}")));
    }
    let mut region_count = 0;
    let mut c3 = f64::INFINITY;
    let mut argmin = 0;
    let mut violations = Vec::new();
    for (k, s) in samples.iter().enumerate() {
        if s.r > delta * s.dx.max(s.dy) || s.r == 0.0 {
            continue;
        }
        region_count += 1;
        if s.g <= 0.0 {
            violations.push(k);
        }
        let ratio = s.g / nehari_shape(n, s.dx, s.dy, s.r);
        if ratio < c3 {
            c3 = ratio;
            argmin = k;
        }
    }
    if region_count == 0 {
        return Err(invalid(format!("no sample lies in the region for delta = {delta}")));
    }
    Ok(NehariReport {
        n: n.get(),
        delta,
        region_count,
        c3,
        argmin,
        violations,
    })
}

/// Exact Green values on a ball for each pair.
pub fn exact_ball_samples(ball: &Ball, pairs: &[PointPair]) -> Result<Vec<GreenSample>> {
    pairs
        .par_iter()
        .map(|p| {
            let g = ball_green(ball.n, &p.x, &p.y, ball.radius)?;
            GreenSample::new(ball.n, p.clone(), g, None)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{sample_region_pairs, SampleOptions};

    #[test]
    fn three_ball_region_is_positive() {
        let ball = Ball::new(Dimension::THREE, 1.0).unwrap();
        let pairs = sample_region_pairs(&ball, 2000, 1, 0.5, &SampleOptions::default()).unwrap();
        let samples = exact_ball_samples(&ball, &pairs).unwrap();
        let report = nehari_region_check(&samples, Dimension::THREE, 0.5).unwrap();
        assert_eq!(report.region_count, 2000);
        assert!(report.passes());
    }

    #[test]
    fn empty_region_is_an_error() {
        let s = GreenSample {
            x: vec![0.0, 0.0],
            y: vec![0.5, 0.0],
            dx: 0.1,
            dy: 0.1,
            r: 0.5,
            g: 1.0,
            h: 1.0,
            grid_h: None,
        };
        assert!(nehari_region_check(&[s], Dimension::TWO, 0.1).is_err());
    }

    #[test]
    fn shapes() {
        let five = Dimension::new(5).unwrap();
        assert_eq!(nehari_shape(five, 1.0, 1.0, 0.5), 2.0);
        assert!((nehari_shape(Dimension::new(4).unwrap(), 1.0, 1.0, 1.0) - 2f64.ln()).abs() < 1e-16);
        assert_eq!(nehari_shape(Dimension::THREE, 0.25, 1.0, 0.1), 0.5);
    }
}
