use crate::config::{BandAxis, Command};
use anyhow::{bail, Result};
use plate_green::analysis::EstimateBand;
use plate_green::solver::GreenSample;
use plate_green::GridField;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::io::Write;

pub const SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Violations,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub schema: u32,
    pub command: Command,
    pub config: BTreeMap<String, String>,
    pub versions: BTreeMap<&'static str, String>,
    pub status: Status,
    pub violations: Vec<String>,
    /// sha256 of the sample CSV, or of the results when there are no samples.
    pub checksum: String,
    pub results: serde_json::Value,
    pub wall_clock_seconds: f64,
    #[serde(skip)]
    pub samples: Vec<GreenSample>,
    #[serde(skip)]
    pub band: Option<EstimateBand>,
    #[serde(skip)]
    pub field: Option<GridField>,
    /// Human-readable lines for the terminal.
    #[serde(skip)]
    pub summary: Vec<String>,
}

impl RunReport {
    pub fn new(command: Command, config: BTreeMap<String, String>) -> Self {
        let versions = BTreeMap::from([("plate-green", env!("CARGO_PKG_VERSION").to_string())]);
        RunReport {
            schema: SCHEMA,
            command,
            config,
            versions,
            status: Status::Pass,
            violations: Vec::new(),
            checksum: String::new(),
            results: serde_json::Value::Null,
            wall_clock_seconds: 0.0,
            samples: Vec::new(),
            band: None,
            field: None,
            summary: Vec::new(),
        }
    }

    /// Fills `status` and `checksum` from the final content.
    pub fn seal(&mut self) -> Result<()> {
        self.status = if self.violations.is_empty() {
            Status::Pass
        } else {
            Status::Violations
        };
        let bytes = if self.samples.is_empty() {
            serde_json::to_vec(&self.results)?
        } else {
            let mut buf = Vec::new();
            write_samples_csv(&self.samples, &mut buf)?;
            buf
        };
        self.checksum = format!("sha256:{:x}", Sha256::digest(&bytes));
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// Columns x1,x2,y1,y2,dx,dy,r,G,H,ratio (coordinates x1..xn, y1..yn for
/// n ≥ 3).
pub fn write_samples_csv<W: Write>(samples: &[GreenSample], out: W) -> Result<()> {
    let n = samples.first().map_or(2, |s| s.x.len());
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    header.extend((1..=n).map(|i| format!("y{i}")));
    header.extend(["dx", "dy", "r", "G", "H", "ratio"].map(String::from));
    w.write_record(&header)?;
    for s in samples {
        let mut row: Vec<String> = s.x.iter().chain(&s.y).map(f64::to_string).collect();
        row.extend([s.dx, s.dy, s.r, s.g, s.h, s.ratio()].map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Band plot data from a verify-estimate report: one row per sample with
/// the abscissa, G and the band c₂⁻¹H − c₁dx²dy² .. c₂H − c₁dx²dy², sorted
/// by abscissa. The boundary-distance axis uses min(dx, dy).
pub fn emit_band_data<W: Write>(report: &RunReport, axis: BandAxis, out: W) -> Result<()> {
    if report.command != Command::VerifyEstimate {
        bail!(
            "band data needs a verify-estimate report, got {}",
            report.command.name()
        );
    }
    let Some(band) = &report.band else {
        bail!("report carries no fitted band");
    };
    let mut rows: Vec<[f64; 4]> = report
        .samples
        .iter()
        .map(|s| {
            let (lower, upper) = band.band_for(s);
            let abscissa = match axis {
                BandAxis::PairDistance => s.r,
                BandAxis::BoundaryDistance => s.dx.min(s.dy),
            };
            [abscissa, s.g, lower, upper]
        })
        .collect();
    rows.sort_by(|a, b| a[0].total_cmp(&b[0]));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["abscissa", "G", "lower", "upper"])?;
    for row in rows {
        w.write_record(row.map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use plate_green::analysis::estimate_constants;
    use plate_green::{Dimension, PointPair};

    fn sample(r: f64, g: f64) -> GreenSample {
        let pair = PointPair {
            x: vec![0.0, 0.0],
            y: vec![r, 0.0],
            dx: 0.5,
            dy: 0.4,
            r,
        };
        GreenSample::new(Dimension::TWO, pair, g, None).unwrap()
    }

    fn estimate_report(samples: Vec<GreenSample>) -> RunReport {
        let mut report = RunReport::new(Command::VerifyEstimate, BTreeMap::new());
        report.band = Some(if samples.is_empty() {
            EstimateBand {
                c1: 0.0,
                c1_raw: 0.0,
                c2: 1.0,
                epsilon: 0.01,
                samples: 0,
                domain: None,
                seed: None,
                grid_h: None,
            }
        } else {
            estimate_constants(&samples, 0.01).unwrap()
        });
        report.samples = samples;
        report
    }

    fn rows(report: &RunReport) -> Vec<Vec<f64>> {
        let mut buf = Vec::new();
        emit_band_data(report, BandAxis::PairDistance, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("abscissa,G,lower,upper"));
        text.lines()
            .skip(1)
            .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
            .collect()
    }

    #[test]
    fn one_sample_one_row() {
        assert_eq!(rows(&estimate_report(vec![sample(0.3, 0.01)])).len(), 1);
    }

    #[test]
    fn empty_report_is_header_only() {
        assert!(rows(&estimate_report(Vec::new())).is_empty());
    }

    #[test]
    fn rows_sorted_and_inside_band() {
        let samples = vec![sample(0.5, 0.002), sample(0.1, 0.03), sample(0.3, 0.01)];
        let rows = rows(&estimate_report(samples));
        assert!(rows.windows(2).all(|w| w[0][0] <= w[1][0]));
        for r in rows {
            let slack = 1e-12 * r[1].abs();
            assert!(r[2] <= r[1] + slack && r[1] <= r[3] + slack, "{r:?}");
        }
    }

    #[test]
    fn other_reports_rejected() {
        let report = RunReport::new(Command::Nehari, BTreeMap::new());
        assert!(emit_band_data(&report, BandAxis::PairDistance, Vec::new()).is_err());
    }

    #[test]
    fn checksum_tracks_samples() {
        let mut a = estimate_report(vec![sample(0.3, 0.01)]);
        let mut b = estimate_report(vec![sample(0.3, 0.01)]);
        let mut c = estimate_report(vec![sample(0.3, 0.02)]);
        for r in [&mut a, &mut b, &mut c] {
            r.seal().unwrap();
        }
        assert_eq!(a.checksum, b.checksum);
        assert_ne!(a.checksum, c.checksum);
        assert!(a.checksum.starts_with("sha256:"));
    }

    #[test]
    fn sample_csv_columns() {
        let mut buf = Vec::new();
        write_samples_csv(&[sample(0.3, 0.01)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "x1,x2,y1,y2,dx,dy,r,G,H,ratio");
    }
}
