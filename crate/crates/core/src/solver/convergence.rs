use super::{assemble_bilaplacian, evaluate_pairs, SolveOptions};
use crate::error::{invalid, Result};
use crate::geometry::{grid_discretize, DomainKind, DomainSpec, PointPair};
use crate::kernels::{ball_green, Dimension};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConvergenceMode {
    /// Errors against the exact disk kernel.
    Oracle,
    /// Differences between successive grids.
    Richardson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub h: f64,
    /// Max relative error over the pairs (oracle mode), or max relative
    /// change from the previous, coarser grid (Richardson mode; absent on
    /// the first row).
    pub error: Option<f64>,
    /// ln(e_prev/e)/ln(h_prev/h), which is log₂(e_h/e_{h/2}) for halvings.
    pub order: Option<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub mode: ConvergenceMode,
    pub rows: Vec<ConvergenceRow>,
    /// Exact kernel values in oracle mode.
    pub reference: Option<Vec<f64>>,
}

impl ConvergenceTable {
    /// Least-squares slope of ln e against ln h over all rows with an error.
    pub fn fitted_order(&self) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .rows
            .iter()
            .filter_map(|r| r.error.filter(|e| *e > 0.0).map(|e| (r.h.ln(), e.ln())))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let m = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        (sxx > 0.0).then(|| sxy / sxx)
    }

    /// Errors strictly decrease from row to row.
    pub fn monotone(&self) -> bool {
        let e: Vec<f64> = self.rows.iter().filter_map(|r| r.error).collect();
        e.windows(2).all(|w| w[1] < w[0])
    }
}

fn max_relative(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(a, b)| (a - b).abs() / b.abs())
        .fold(0.0, f64::max)
}

/// Discrete Green values at `pairs` on each grid of `h_list`. On a disk the
/// errors are measured against the exact kernel; elsewhere successive grids
/// are compared.
pub fn convergence_study(
    domain: &DomainSpec,
    pairs: &[PointPair],
    h_list: &[f64],
    opts: &SolveOptions,
) -> Result<ConvergenceTable> {
    if pairs.is_empty() || h_list.is_empty() {
        return Err(invalid("convergence study needs pairs and grid spacings"));
    }
    if h_list.windows(2).any(|w| w[1] > w[0]) {
        return Err(invalid("grid spacings must be non-increasing"));
    }
    let reference = match domain.kind() {
        DomainKind::Disk { radius } => {
            let c = domain.offset();
            let shift = |p: &[f64]| [p[0] - c[0], p[1] - c[1]];
            Some(
                pairs
                    .iter()
                    .map(|p| ball_green(Dimension::TWO, &shift(&p.x), &shift(&p.y), radius))
                    .collect::<Result<Vec<f64>>>()?,
            )
        }
        _ => None,
    };
    let mode = if reference.is_some() {
        ConvergenceMode::Oracle
    } else {
        ConvergenceMode::Richardson
    };

    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(h_list.len());
    for &h in h_list {
        let op = assemble_bilaplacian(grid_discretize(domain, h)?)?;
        let values: Vec<f64> = evaluate_pairs(&op, pairs, opts)?.into_iter().map(|s| s.g).collect();
        let error = match (&reference, rows.last()) {
            (Some(exact), _) => Some(max_relative(&values, exact)),
            (None, Some(prev)) => Some(max_relative(&prev.values, &values)),
            (None, None) => None,
        };
        if let Some(e) = error {
            if !e.is_finite() {
                return Err(invalid(format!("non-finite error at h = {h}")));
            }
        }
        let order = match (rows.last(), error) {
            (Some(prev), Some(e)) => match prev.error {
                Some(pe) if prev.h != h && e > 0.0 && pe > 0.0 => Some((pe / e).ln() / (prev.h / h).ln()),
                _ => None,
            },
            _ => None,
        };
        rows.push(ConvergenceRow {
            h,
            error,
            order,
            values,
        });
    }
    Ok(ConvergenceTable { mode, rows, reference })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(domain: &DomainSpec, x: [f64; 2], y: [f64; 2]) -> PointPair {
        PointPair {
            x: x.to_vec(),
            y: y.to_vec(),
            dx: domain.distance_to_boundary(x).unwrap(),
            dy: domain.distance_to_boundary(y).unwrap(),
            r: (x[0] - y[0]).hypot(x[1] - y[1]),
        }
    }

    #[test]
    fn disk_errors_decrease() {
        let disk = DomainSpec::disk(1.0).unwrap();
        let pairs = vec![pair(&disk, [0.0, 0.0], [0.5, 0.0]), pair(&disk, [0.0, 0.6], [0.0, 0.2])];
        let t = convergence_study(&disk, &pairs, &[1.0 / 16.0, 1.0 / 32.0], &SolveOptions::default()).unwrap();
        assert_eq!(t.mode, ConvergenceMode::Oracle);
        assert!(t.monotone());
        assert!(t.rows[1].order.unwrap() > 0.5);
    }

    #[test]
    fn repeated_spacing_repeats_row() {
        let disk = DomainSpec::disk(1.0).unwrap();
        let pairs = vec![pair(&disk, [0.0, 0.0], [0.5, 0.0])];
        let t = convergence_study(&disk, &pairs, &[1.0 / 16.0, 1.0 / 16.0], &SolveOptions::default()).unwrap();
        assert_eq!(t.rows[0].values, t.rows[1].values);
        assert_eq!(t.rows[0].error, t.rows[1].error);
        assert!(t.rows[1].order.is_none());
    }

    #[test]
    fn richardson_on_ellipse_contracts() {
        let ellipse = DomainSpec::ellipse(2.0, 1.0).unwrap();
        let pairs = vec![
            pair(&ellipse, [0.0, 0.0], [0.8, 0.2]),
            pair(&ellipse, [-0.5, 0.3], [0.4, -0.2]),
        ];
        let hs = [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0];
        let t = convergence_study(&ellipse, &pairs, &hs, &SolveOptions::default()).unwrap();
        assert_eq!(t.mode, ConvergenceMode::Richardson);
        assert!(t.rows[0].error.is_none());
        let e: Vec<f64> = t.rows.iter().filter_map(|r| r.error).collect();
        for w in e.windows(2) {
            assert!(w[1] / w[0] <= 0.6, "ratios {e:?}");
        }
    }

    #[test]
    fn rejects_bad_input() {
        let disk = DomainSpec::disk(1.0).unwrap();
        let pairs = vec![pair(&disk, [0.0, 0.0], [0.5, 0.0])];
        assert!(convergence_study(&disk, &[], &[0.1], &SolveOptions::default()).is_err());
        assert!(convergence_study(&disk, &pairs, &[0.05, 0.1], &SolveOptions::default()).is_err());
    }
}
