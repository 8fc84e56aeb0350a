use crate::error::{invalid, Result};
use crate::solver::GreenSample;
use serde::{Deserialize, Serialize};

/// Relative slack when re-checking the fitted band, so that values exactly
/// on a band edge are not flagged by rounding in the re-evaluation.
const SANDWICH_SLACK: f64 = 1e-12;

/// Empirical constants of the two-sided estimate
/// `c2⁻¹ H ≤ G + c1 dx²dy² ≤ c2 H`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateBand {
    /// c1 after the margin.
    pub c1: f64,
    /// max(0, max −G/(dx²dy²)) before the margin.
    pub c1_raw: f64,
    pub c2: f64,
    pub epsilon: f64,
    pub samples: usize,
    pub domain: Option<String>,
    pub seed: Option<u64>,
    pub grid_h: Option<f64>,
}

impl EstimateBand {
    pub fn with_provenance(mut self, domain: impl Into<String>, seed: u64) -> Self {
        self.domain = Some(domain.into());
        self.seed = Some(seed);
        self
    }

    /// Lower and upper band values for a sample, expressed for G:
    /// `(c2⁻¹H − c1 dd, c2 H − c1 dd)` with `dd = dx²dy²`.
    pub fn band_for(&self, s: &GreenSample) -> (f64, f64) {
        let dd = (s.dx * s.dy).powi(2);
        (s.h / self.c2 - self.c1 * dd, self.c2 * s.h - self.c1 * dd)
    }
}

/// Fits (c1, c2) so that every sample lies in the band.
///
/// c1 is the largest negative part relative to dx²dy², inflated by
/// `1 + epsilon`; when no sample is negative but some G is exactly zero, a
/// small positive c1 keeps the shifted value away from zero. c2 is the
/// worst ratio in either direction.
pub fn estimate_constants(samples: &[GreenSample], epsilon: f64) -> Result<EstimateBand> {
    if samples.is_empty() {
        return Err(invalid("no samples to fit"));
    }
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    for (k, s) in samples.iter().enumerate() {
        if !(s.h > 0.0) || !s.h.is_finite() {
            return Err(invalid(format!("sample {k} has H = {}", s.h)));
        }
        if !(s.dx * s.dy > 0.0) {
            return Err(invalid(format!("sample {k} touches the boundary")));
        }
        if !s.g.is_finite() {
            return Err(invalid(format!("sample {k} has G = {}", s.g)));
        }
    }
    let dd = |s: &GreenSample| (s.dx * s.dy).powi(2);
    let c1_raw = samples.iter().map(|s| -s.g / dd(s)).fold(0.0, f64::max);
    let c1 = if c1_raw > 0.0 {
        (1.0 + epsilon) * c1_raw
    } else if samples.iter().any(|s| s.g == 0.0) {
        let max_dd = samples.iter().map(dd).fold(0.0, f64::max);
        let min_pos = samples
            .iter()
            .map(|s| s.g)
            .filter(|&g| g > 0.0)
            .fold(f64::INFINITY, f64::min);
        // all-zero input: fall back to the H scale
        let scale = if min_pos.is_finite() {
            min_pos
        } else {
            samples.iter().map(|s| s.h).fold(0.0, f64::max)
        };
        epsilon * scale / max_dd
    } else {
        0.0
    };
    let c2 = samples
        .iter()
        .map(|s| {
            let v = s.g + c1 * dd(s);
            (v / s.h).max(s.h / v)
        })
        .fold(0.0, f64::max);
    Ok(EstimateBand {
        c1,
        c1_raw,
        c2,
        epsilon,
        samples: samples.len(),
        domain: None,
        seed: None,
        grid_h: samples[0].grid_h,
    })
}

/// Indices of samples outside the band.
pub fn check_sandwich(band: &EstimateBand, samples: &[GreenSample]) -> Vec<usize> {
    samples
        .iter()
        .enumerate()
        .filter(|(_, s)| {
            let v = s.g + band.c1 * (s.dx * s.dy).powi(2);
            let lower = s.h / band.c2;
            let upper = band.c2 * s.h;
            v < lower * (1.0 - SANDWICH_SLACK) || v > upper * (1.0 + SANDWICH_SLACK)
        })
        .map(|(k, _)| k)
        .collect()
}

/// Smallest pair distance among samples with G ≤ 0, or `diameter` when
/// there is none. An upper estimate of the positivity radius: no
/// counterexample was seen below it.
pub fn positivity_radius(samples: &[GreenSample], diameter: f64) -> f64 {
    samples
        .iter()
        .filter(|s| s.g <= 0.0)
        .map(|s| s.r)
        .fold(diameter, f64::min)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegativeSample {
    pub index: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub r: f64,
    pub g: f64,
    /// |G| / (dx²dy²)
    pub ratio: f64,
    /// |G| rⁿ / (dx²dy²)
    pub weighted_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegativePartReport {
    pub c: f64,
    pub negatives: Vec<NegativeSample>,
    /// Negative samples with |G| > c dx²dy².
    pub violations: Vec<usize>,
    /// Negative samples with |G| > c r⁻ⁿ dx²dy².
    pub weighted_violations: Vec<usize>,
    pub worst_ratio: f64,
    /// Smallest constant for which the weighted form holds on these samples.
    pub worst_weighted_ratio: f64,
    pub max_negative: f64,
    pub max_positive: f64,
    /// max |G⁻| / max G⁺ (0 without negative samples).
    pub negative_to_positive: f64,
}

impl NegativePartReport {
    pub fn passes(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Lists the samples with G < 0 and checks |G| ≤ c dx²dy² and
/// |G| ≤ c r⁻ⁿ dx²dy² for each. Violations are report content.
pub fn negative_part_report(samples: &[GreenSample], c: f64, n: usize) -> NegativePartReport {
    let mut negatives = Vec::new();
    let mut violations = Vec::new();
    let mut weighted_violations = Vec::new();
    let mut max_positive: f64 = 0.0;
    let mut max_negative: f64 = 0.0;
    for (index, s) in samples.iter().enumerate() {
        if s.g >= 0.0 {
            max_positive = max_positive.max(s.g);
            continue;
        }
        let dd = (s.dx * s.dy).powi(2);
        let ratio = -s.g / dd;
        let weighted_ratio = ratio * s.r.powi(n as i32);
        max_negative = max_negative.max(-s.g);
        if ratio > c {
            violations.push(index);
        }
        if weighted_ratio > c {
            weighted_violations.push(index);
        }
        negatives.push(NegativeSample {
            index,
            x: s.x.clone(),
            y: s.y.clone(),
            r: s.r,
            g: s.g,
            ratio,
            weighted_ratio,
        });
    }
    let worst_ratio = negatives.iter().map(|s| s.ratio).fold(0.0, f64::max);
    let worst_weighted_ratio = negatives.iter().map(|s| s.weighted_ratio).fold(0.0, f64::max);
    let negative_to_positive = if negatives.is_empty() {
        0.0
    } else if max_positive > 0.0 {
        max_negative / max_positive
    } else {
        f64::INFINITY
    };
    NegativePartReport {
        c,
        negatives,
        violations,
        weighted_violations,
        worst_ratio,
        worst_weighted_ratio,
        max_negative,
        max_positive,
        negative_to_positive,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(g: f64, d: f64, h: f64, r: f64) -> GreenSample {
        GreenSample {
            x: vec![0.0, 0.0],
            y: vec![r, 0.0],
            dx: d,
            dy: d,
            r,
            g,
            h,
            grid_h: None,
        }
    }

    #[test]
    fn identity_band() {
        let s: Vec<_> = (1..10).map(|k| sample(k as f64, 1.0, k as f64, 1.0)).collect();
        let band = estimate_constants(&s, 0.01).unwrap();
        assert_eq!(band.c1, 0.0);
        assert_eq!(band.c2, 1.0);
    }

    #[test]
    fn synthetic_pair() {
        let s = vec![sample(-1.0, 1.0, 1.0, 1.0), sample(2.0, 1.0, 1.0, 1.0)];
        let band = estimate_constants(&s, 0.01).unwrap();
        assert!((band.c1 - 1.01).abs() < 1e-15);
        assert!((band.c2 - 100.0).abs() < 1e-9);
        assert!(check_sandwich(&band, &s).is_empty());
    }

    #[test]
    fn zero_sample_gets_positive_c1() {
        let s = vec![sample(0.0, 1.0, 1.0, 1.0), sample(0.5, 2.0, 1.0, 1.0)];
        let band = estimate_constants(&s, 0.01).unwrap();
        assert!((band.c1 - 0.01 * 0.5 / 16.0).abs() < 1e-18);
        assert!(band.c2.is_finite());
        assert!(check_sandwich(&band, &s).is_empty());
    }

    #[test]
    fn rejects_bad_samples() {
        assert!(estimate_constants(&[], 0.01).is_err());
        assert!(estimate_constants(&[sample(1.0, 1.0, 0.0, 1.0)], 0.01).is_err());
        assert!(estimate_constants(&[sample(1.0, 0.0, 1.0, 1.0)], 0.01).is_err());
        assert!(estimate_constants(&[sample(1.0, 1.0, 1.0, 1.0)], 0.0).is_err());
    }

    #[test]
    fn positivity_radius_examples() {
        let pos = vec![sample(1.0, 1.0, 1.0, 0.3), sample(2.0, 1.0, 1.0, 0.9)];
        assert_eq!(positivity_radius(&pos, 2.0), 2.0);
        let mut mixed = pos.clone();
        mixed.push(sample(-0.1, 1.0, 1.0, 0.7));
        assert_eq!(positivity_radius(&mixed, 2.0), 0.7);
    }

    #[test]
    fn negative_part_examples() {
        let pos = vec![sample(1.0, 1.0, 1.0, 0.5)];
        let report = negative_part_report(&pos, 1.0, 2);
        assert!(report.negatives.is_empty() && report.passes());
        let neg = vec![sample(-1.0, 1.0, 1.0, 1.0), sample(4.0, 1.0, 1.0, 1.0)];
        let report = negative_part_report(&neg, 2.0, 2);
        assert!(report.passes());
        assert_eq!(report.negatives[0].ratio, 1.0);
        assert_eq!(report.negatives[0].ratio / report.c, 0.5);
        assert_eq!(report.negative_to_positive, 0.25);
        let report = negative_part_report(&neg, 0.5, 2);
        assert_eq!(report.violations, vec![0]);
    }
}
