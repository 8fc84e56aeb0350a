//! Planar test domains and the sampling machinery built on them.

mod grid;
mod sampling;

pub use grid::{grid_discretize, GridMask, NodeKind};
pub use sampling::{
    sample_pairs, sample_pairs_with, sample_points, sample_region_pairs, PairStrategy, PointPair, SampleOptions,
};

use crate::error::{invalid, Error, Result};
use crate::kernels::Dimension;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_4, TAU};
use std::fmt;
use std::str::FromStr;

pub type Point2 = [f64; 2];

/// Number of equispaced starting parameters for the nearest-point search.
const NEWTON_STARTS: usize = 8;
const NEWTON_MAX_STEPS: usize = 100;
/// Tangential residual (a length, relative to the domain scale) at which a
/// nearest-point iterate counts as converged.
const NEWTON_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DomainKind {
    Disk {
        radius: f64,
    },
    Ellipse {
        a: f64,
        b: f64,
    },
    /// Polar boundary ρ(θ) = a + b cos θ around the pole.
    Limacon {
        a: f64,
        b: f64,
    },
    /// The rectangle [0, width] × [0, height] before the offset is applied.
    Rectangle {
        width: f64,
        height: f64,
    },
}

/// A bounded planar domain. `offset` is the centre (disk, ellipse), the pole
/// (limaçon) or the lower-left corner (rectangle).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    kind: DomainKind,
    offset: Point2,
    diameter: f64,
}

impl DomainSpec {
    pub fn new(kind: DomainKind) -> Result<Self> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(format!("{name} must be positive and finite, got {v}")))
            }
        };
        match kind {
            DomainKind::Disk { radius } => positive("radius", radius)?,
            DomainKind::Ellipse { a, b } => {
                positive("a", a)?;
                positive("b", b)?;
            }
            DomainKind::Limacon { a, b } => {
                positive("a", a)?;
                positive("b", b)?;
                if a < 2.0 * b {
                    return Err(invalid(format!(
                        "limacon needs a >= 2b for a simple convex boundary, got a = {a}, b = {b}"
                    )));
                }
            }
            DomainKind::Rectangle { width, height } => {
                positive("width", width)?;
                positive("height", height)?;
            }
        }
        let mut spec = DomainSpec {
            kind,
            offset: [0.0, 0.0],
            diameter: 0.0,
        };
        spec.diameter = spec.compute_diameter();
        Ok(spec)
    }

    pub fn disk(radius: f64) -> Result<Self> {
        Self::new(DomainKind::Disk { radius })
    }

    pub fn ellipse(a: f64, b: f64) -> Result<Self> {
        Self::new(DomainKind::Ellipse { a, b })
    }

    pub fn limacon(a: f64, b: f64) -> Result<Self> {
        Self::new(DomainKind::Limacon { a, b })
    }

    pub fn rectangle(width: f64, height: f64) -> Result<Self> {
        Self::new(DomainKind::Rectangle { width, height })
    }

    pub fn with_offset(mut self, offset: Point2) -> Self {
        self.offset = offset;
        self
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn offset(&self) -> Point2 {
        self.offset
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// False for the rectangle, whose corners put it outside the smooth
    /// (C^{4,γ}) class; results there are exploratory.
    pub fn is_smooth(&self) -> bool {
        !matches!(self.kind, DomainKind::Rectangle { .. })
    }

    /// A length no larger than the inradius; used to size sampling bands.
    pub fn inradius_hint(&self) -> f64 {
        match self.kind {
            DomainKind::Disk { radius } => radius,
            DomainKind::Ellipse { a, b } => a.min(b),
            DomainKind::Limacon { a, b } => a - b,
            DomainKind::Rectangle { width, height } => 0.5 * width.min(height),
        }
    }

    fn local(&self, p: Point2) -> Point2 {
        [p[0] - self.offset[0], p[1] - self.offset[1]]
    }

    fn global(&self, q: Point2) -> Point2 {
        [q[0] + self.offset[0], q[1] + self.offset[1]]
    }

    /// Strict inside test.
    pub fn contains(&self, p: Point2) -> bool {
        let [x, y] = self.local(p);
        match self.kind {
            DomainKind::Disk { radius } => x * x + y * y < radius * radius,
            DomainKind::Ellipse { a, b } => (x / a).powi(2) + (y / b).powi(2) < 1.0,
            DomainKind::Limacon { a, b } => {
                let rho = x.hypot(y);
                if rho == 0.0 {
                    return true;
                }
                rho < a + b * x / rho
            }
            DomainKind::Rectangle { width, height } => x > 0.0 && x < width && y > 0.0 && y < height,
        }
    }

    /// Axis-aligned bounding box `(min, max)` in global coordinates.
    pub fn bounding_box(&self) -> (Point2, Point2) {
        let (lo, hi) = match self.kind {
            DomainKind::Disk { radius } => ([-radius, -radius], [radius, radius]),
            DomainKind::Ellipse { a, b } => ([-a, -b], [a, b]),
            DomainKind::Rectangle { width, height } => ([0.0, 0.0], [width, height]),
            DomainKind::Limacon { a, b } => {
                let mut lo = [f64::INFINITY; 2];
                let mut hi = [f64::NEG_INFINITY; 2];
                for k in 0..4096 {
                    let t = TAU * k as f64 / 4096.0;
                    let p = self.curve(t).0;
                    for c in 0..2 {
                        lo[c] = lo[c].min(p[c]);
                        hi[c] = hi[c].max(p[c]);
                    }
                }
                let pad = 1e-3 * (a + b);
                ([lo[0] - pad, lo[1] - pad], [hi[0] + pad, hi[1] + pad])
            }
        };
        (self.global(lo), self.global(hi))
    }

    /// Node of the bounding grid that every discretization of this domain
    /// contains: the centre, the pole or the lower-left corner.
    pub fn grid_anchor(&self) -> Point2 {
        self.offset
    }

    /// Smooth boundary parameterization in local coordinates with its first
    /// two derivatives. Not defined for the rectangle.
    fn curve(&self, t: f64) -> (Point2, Point2, Point2) {
        let (s, c) = t.sin_cos();
        match self.kind {
            DomainKind::Disk { radius } => (
                [radius * c, radius * s],
                [-radius * s, radius * c],
                [-radius * c, -radius * s],
            ),
            DomainKind::Ellipse { a, b } => ([a * c, b * s], [-a * s, b * c], [-a * c, -b * s]),
            DomainKind::Limacon { a, b } => {
                let rho = a + b * c;
                let d1 = -b * s;
                let d2 = -b * c;
                (
                    [rho * c, rho * s],
                    [d1 * c - rho * s, d1 * s + rho * c],
                    [d2 * c - 2.0 * d1 * s - rho * c, d2 * s + 2.0 * d1 * c - rho * s],
                )
            }
            DomainKind::Rectangle { .. } => unreachable!("rectangle has no smooth parameterization"),
        }
    }

    /// Boundary point at parameter `t ∈ [0, 2π)`. For the rectangle the
    /// parameter runs along the perimeter counter-clockwise from the
    /// lower-left corner.
    pub fn boundary_point(&self, t: f64) -> Point2 {
        match self.kind {
            DomainKind::Rectangle { width, height } => {
                let perimeter = 2.0 * (width + height);
                let mut s = t.rem_euclid(TAU) / TAU * perimeter;
                let q = if s < width {
                    [s, 0.0]
                } else {
                    s -= width;
                    if s < height {
                        [width, s]
                    } else {
                        s -= height;
                        if s < width {
                            [width - s, height]
                        } else {
                            [0.0, height - (s - width)]
                        }
                    }
                };
                self.global(q)
            }
            _ => self.global(self.curve(t).0),
        }
    }

    /// d(x) = inf |x − x*| over boundary points x*. Exterior points get their
    /// (positive) distance to the boundary as well; use [`Self::contains`]
    /// for the side.
    pub fn distance_to_boundary(&self, p: Point2) -> Result<f64> {
        Ok(self.nearest_boundary_point(p)?.1)
    }

    /// Closest boundary point and its distance.
    pub fn nearest_boundary_point(&self, p: Point2) -> Result<(Point2, f64)> {
        let q = self.local(p);
        match self.kind {
            DomainKind::Disk { radius } => {
                let norm = q[0].hypot(q[1]);
                let dir = if norm > 0.0 {
                    [q[0] / norm, q[1] / norm]
                } else {
                    [1.0, 0.0]
                };
                let foot = [radius * dir[0], radius * dir[1]];
                Ok((self.global(foot), (radius - norm).abs()))
            }
            DomainKind::Rectangle { width, height } => {
                let inside = q[0] >= 0.0 && q[0] <= width && q[1] >= 0.0 && q[1] <= height;
                if inside {
                    let candidates = [
                        (q[0], [0.0, q[1]]),
                        (width - q[0], [width, q[1]]),
                        (q[1], [q[0], 0.0]),
                        (height - q[1], [q[0], height]),
                    ];
                    let (d, foot) = candidates
                        .into_iter()
                        .min_by(|a, b| a.0.total_cmp(&b.0))
                        .expect("four sides");
                    Ok((self.global(foot), d))
                } else {
                    let foot = [q[0].clamp(0.0, width), q[1].clamp(0.0, height)];
                    Ok((self.global(foot), (q[0] - foot[0]).hypot(q[1] - foot[1])))
                }
            }
            _ => self.nearest_point_iterative(p),
        }
    }

    /// Nearest boundary point by damped Newton iteration on the boundary
    /// parameter from several equispaced starts. Available for every smooth
    /// kind, including the disk (where it must agree with the closed form).
    pub fn nearest_point_iterative(&self, p: Point2) -> Result<(Point2, f64)> {
        if !self.is_smooth() {
            return Err(invalid("iterative nearest point needs a smooth boundary"));
        }
        let q = self.local(p);
        let tol = NEWTON_TOL * self.diameter.max(1.0);
        let mut best: Option<(f64, Point2)> = None;
        let mut best_residual = f64::INFINITY;
        for k in 0..NEWTON_STARTS {
            let t0 = TAU * k as f64 / NEWTON_STARTS as f64;
            let (t, residual) = self.newton_from(q, t0, tol);
            best_residual = best_residual.min(residual);
            if residual > tol {
                continue;
            }
            let foot = self.curve(t).0;
            let d = (foot[0] - q[0]).hypot(foot[1] - q[1]);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, foot));
            }
        }
        match best {
            Some((d, foot)) => Ok((self.global(foot), d)),
            None => Err(Error::NearestPointFailed {
                point: p,
                residual: best_residual,
            }),
        }
    }

    /// Minimizes φ(t) = |γ(t) − q|²/2; returns the parameter and the final
    /// tangential residual |(γ − q)·γ'| / |γ'|.
    fn newton_from(&self, q: Point2, t0: f64, tol: f64) -> (f64, f64) {
        let phi = |t: f64| {
            let g = self.curve(t).0;
            0.5 * ((g[0] - q[0]).powi(2) + (g[1] - q[1]).powi(2))
        };
        let mut t = t0;
        let mut residual = f64::INFINITY;
        for _ in 0..NEWTON_MAX_STEPS {
            let (g, g1, g2) = self.curve(t);
            let diff = [g[0] - q[0], g[1] - q[1]];
            let speed2 = g1[0] * g1[0] + g1[1] * g1[1];
            let f1 = diff[0] * g1[0] + diff[1] * g1[1];
            let f2 = speed2 + diff[0] * g2[0] + diff[1] * g2[1];
            residual = f1.abs() / speed2.sqrt();
            if residual <= tol {
                break;
            }
            let raw = if f2 > 0.0 { -f1 / f2 } else { -f1 / speed2 };
            if f2 > 0.0 && raw.abs() < 1e-3 {
                // inside the quadratic basin: φ changes below rounding, so
                // take plain Newton steps without the descent test
                t += raw;
                continue;
            }
            let mut step = raw.clamp(-FRAC_PI_4, FRAC_PI_4);
            let current = phi(t);
            let mut accepted = false;
            for _ in 0..40 {
                if phi(t + step) <= current {
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                // φ is flat to rounding here; the residual decides convergence.
                break;
            }
            t += step;
        }
        (t.rem_euclid(TAU), residual)
    }

    /// Outward unit normal at a boundary point.
    pub fn outward_normal(&self, p: Point2) -> Result<Point2> {
        let (_, d) = self.nearest_boundary_point(p)?;
        if d > 1e-9 * self.diameter.max(1.0) {
            return Err(invalid(format!("{p:?} is not on the boundary (distance {d:e})")));
        }
        let [x, y] = self.local(p);
        let normalize = |v: Point2| {
            let n = v[0].hypot(v[1]);
            [v[0] / n, v[1] / n]
        };
        match self.kind {
            DomainKind::Disk { .. } => Ok(normalize([x, y])),
            DomainKind::Ellipse { a, b } => Ok(normalize([x / (a * a), y / (b * b)])),
            DomainKind::Limacon { .. } => {
                let t = y.atan2(x);
                let g1 = self.curve(t).1;
                Ok(normalize([g1[1], -g1[0]]))
            }
            DomainKind::Rectangle { width, height } => {
                let eps = 1e-9 * self.diameter;
                let sides = [
                    (x.abs() < eps, [-1.0, 0.0]),
                    ((x - width).abs() < eps, [1.0, 0.0]),
                    (y.abs() < eps, [0.0, -1.0]),
                    ((y - height).abs() < eps, [0.0, 1.0]),
                ];
                let hits: Vec<Point2> = sides.iter().filter(|s| s.0).map(|s| s.1).collect();
                match hits.as_slice() {
                    [n] => Ok(*n),
                    _ => Err(invalid(format!("normal undefined at rectangle corner {p:?}"))),
                }
            }
        }
    }

    fn compute_diameter(&self) -> f64 {
        match self.kind {
            DomainKind::Disk { radius } => 2.0 * radius,
            DomainKind::Ellipse { a, b } => 2.0 * a.max(b),
            DomainKind::Rectangle { width, height } => width.hypot(height),
            DomainKind::Limacon { .. } => {
                let pts: Vec<Point2> = (0..1024).map(|k| self.curve(TAU * k as f64 / 1024.0).0).collect();
                let mut best: f64 = 0.0;
                for (i, p) in pts.iter().enumerate() {
                    for q in &pts[i + 1..] {
                        best = best.max((p[0] - q[0]).hypot(p[1] - q[1]));
                    }
                }
                best
            }
        }
    }
}

fn parse_numbers(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| invalid(format!("cannot parse number '{t}'")))
        })
        .collect()
}

impl FromStr for DomainSpec {
    type Err = Error;

    /// `disk:R`, `ellipse:a,b`, `limacon:a,b`, `rect:w,h`, each optionally
    /// followed by `@x,y` for the offset.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (body, offset) = match s.split_once('@') {
            Some((body, off)) => {
                let o = parse_numbers(off)?;
                if o.len() != 2 {
                    return Err(invalid(format!("offset needs two numbers: '{off}'")));
                }
                (body, [o[0], o[1]])
            }
            None => (s, [0.0, 0.0]),
        };
        let (name, args) = body
            .split_once(':')
            .ok_or_else(|| invalid(format!("domain '{s}' is not of the form kind:params")))?;
        let v = parse_numbers(args)?;
        let need = |k: usize| {
            if v.len() == k {
                Ok(())
            } else {
                Err(invalid(format!(
                    "domain '{name}' takes {k} parameter(s), got {}",
                    v.len()
                )))
            }
        };
        let spec = match name.trim() {
            "disk" => {
                need(1)?;
                DomainSpec::disk(v[0])?
            }
            "ellipse" => {
                need(2)?;
                DomainSpec::ellipse(v[0], v[1])?
            }
            "limacon" => {
                need(2)?;
                DomainSpec::limacon(v[0], v[1])?
            }
            "rect" | "rectangle" => {
                need(2)?;
                DomainSpec::rectangle(v[0], v[1])?
            }
            other => return Err(invalid(format!("unknown domain kind '{other}'"))),
        };
        Ok(spec.with_offset(offset))
    }
}

impl fmt::Display for DomainSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            DomainKind::Disk { radius } => write!(f, "disk:{radius}")?,
            DomainKind::Ellipse { a, b } => write!(f, "ellipse:{a},{b}")?,
            DomainKind::Limacon { a, b } => write!(f, "limacon:{a},{b}")?,
            DomainKind::Rectangle { width, height } => write!(f, "rect:{width},{height}")?,
        }
        if self.offset != [0.0, 0.0] {
            write!(f, "@{},{}", self.offset[0], self.offset[1])?;
        }
        Ok(())
    }
}

/// What the pair samplers need from a domain, in any dimension.
pub trait SampleDomain: Sync {
    fn dim(&self) -> usize;
    fn contains_point(&self, p: &[f64]) -> bool;
    fn boundary_distance(&self, p: &[f64]) -> Result<f64>;
    fn inradius(&self) -> f64;
    /// A point drawn uniformly from the domain.
    fn random_point(&self, rng: &mut ChaCha8Rng) -> Result<Vec<f64>>;
}

impl SampleDomain for DomainSpec {
    fn dim(&self) -> usize {
        2
    }

    fn contains_point(&self, p: &[f64]) -> bool {
        self.contains([p[0], p[1]])
    }

    fn boundary_distance(&self, p: &[f64]) -> Result<f64> {
        self.distance_to_boundary([p[0], p[1]])
    }

    fn inradius(&self) -> f64 {
        self.inradius_hint()
    }

    fn random_point(&self, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        let (lo, hi) = self.bounding_box();
        for _ in 0..10_000 {
            let p = [
                lo[0] + (hi[0] - lo[0]) * rng.random::<f64>(),
                lo[1] + (hi[1] - lo[1]) * rng.random::<f64>(),
            ];
            if self.contains(p) {
                return Ok(p.to_vec());
            }
        }
        Err(Error::Sampling(format!("no interior point found in {self}")))
    }
}

/// Ball of the given radius centred at the origin of ℝⁿ; the domain used with
/// the exact kernels in dimensions where no grid solver exists.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub n: Dimension,
    pub radius: f64,
}

impl Ball {
    pub fn new(n: Dimension, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(invalid(format!("ball radius must be positive, got {radius}")));
        }
        Ok(Ball { n, radius })
    }

    pub fn diameter(&self) -> f64 {
        2.0 * self.radius
    }
}

impl SampleDomain for Ball {
    fn dim(&self) -> usize {
        self.n.get()
    }

    fn contains_point(&self, p: &[f64]) -> bool {
        p.iter().map(|c| c * c).sum::<f64>() < self.radius * self.radius
    }

    fn boundary_distance(&self, p: &[f64]) -> Result<f64> {
        Ok((self.radius - p.iter().map(|c| c * c).sum::<f64>().sqrt()).abs())
    }

    fn inradius(&self) -> f64 {
        self.radius
    }

    fn random_point(&self, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        let n = self.n.get();
        let dir = random_direction(n, rng);
        let u: f64 = rng.random();
        let rad = self.radius * u.powf(1.0 / n as f64);
        Ok(dir.into_iter().map(|c| c * rad).collect())
    }
}

pub(crate) fn random_direction(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|c| c / norm).collect();
        }
    }
}
