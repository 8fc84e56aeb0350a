use super::{random_direction, SampleDomain};
use crate::error::{invalid, Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Attempts per pair before sampling gives up.
const MAX_ATTEMPTS: usize = 20_000;
/// Width of the near-boundary band, as a fraction of the inradius.
const BAND_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairStrategy {
    /// Both points uniform in the domain.
    Uniform,
    /// Cycles through Case I (dx dy ≤ r²), Case II (dx dy ≥ 2 r²) and the
    /// transition band 1/2 ≤ dx dy / r² ≤ 2.
    BoundaryStratified,
    /// r ≤ min(dx, dy)/2.
    NearDiagonal,
}

impl std::str::FromStr for PairStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(PairStrategy::Uniform),
            "boundary-stratified" | "stratified" => Ok(PairStrategy::BoundaryStratified),
            "near-diagonal" => Ok(PairStrategy::NearDiagonal),
            other => Err(invalid(format!("unknown pair strategy '{other}'"))),
        }
    }
}

/// Two points of the domain with their boundary distances and separation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointPair {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub dx: f64,
    pub dy: f64,
    pub r: f64,
}

impl PointPair {
    /// `dx dy / r²`; Case I when at most 1.
    pub fn case_ratio(&self) -> f64 {
        self.dx * self.dy / (self.r * self.r)
    }
}

/// Constraints shared by all strategies.
#[derive(Debug, Clone, Default)]
pub struct SampleOptions {
    /// Both points keep at least this distance from the boundary.
    pub min_d: f64,
    /// Pairs are at least this far apart.
    pub min_r: f64,
    /// If set, every `y` is drawn from this pool (for example the sources of
    /// precomputed Green columns).
    pub anchors: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Copy)]
enum Rule {
    Uniform,
    CaseOne,
    CaseTwo,
    Transition,
    NearDiagonal,
    Region(f64),
}

struct Sampler<'a, D: SampleDomain> {
    domain: &'a D,
    options: &'a SampleOptions,
    anchor_d: Vec<f64>,
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

fn open_unit(rng: &mut ChaCha8Rng) -> f64 {
    1.0 - rng.random::<f64>()
}

impl<'a, D: SampleDomain> Sampler<'a, D> {
    fn new(domain: &'a D, options: &'a SampleOptions) -> Result<Self> {
        if !(options.min_d >= 0.0) || !(options.min_r >= 0.0) {
            return Err(invalid("sampling bounds must be non-negative"));
        }
        if options.min_d >= domain.inradius() {
            return Err(Error::Sampling(format!(
                "minimum boundary distance {} leaves no room in a domain of inradius {}",
                options.min_d,
                domain.inradius()
            )));
        }
        let mut anchor_d = Vec::new();
        if let Some(anchors) = &options.anchors {
            if anchors.is_empty() {
                return Err(invalid("anchor pool is empty"));
            }
            for a in anchors {
                if a.len() != domain.dim() || !domain.contains_point(a) {
                    return Err(Error::OutsideDomain {
                        point: a.clone(),
                        region: "sampling domain".into(),
                    });
                }
                anchor_d.push(domain.boundary_distance(a)?);
            }
        }
        Ok(Sampler {
            domain,
            options,
            anchor_d,
        })
    }

    /// Uniform point with probability 1/2, otherwise uniform within the
    /// near-boundary band.
    fn mixture_point(&self, rng: &mut ChaCha8Rng) -> Result<(Vec<f64>, f64)> {
        let band = (BAND_FRACTION * self.domain.inradius()).max(2.0 * self.options.min_d);
        let want_band = rng.random::<bool>();
        for _ in 0..MAX_ATTEMPTS {
            let p = self.domain.random_point(rng)?;
            let d = self.domain.boundary_distance(&p)?;
            if d < self.options.min_d || (want_band && d >= band) {
                continue;
            }
            return Ok((p, d));
        }
        Err(Error::Sampling("could not place a point in the domain".into()))
    }

    fn anchor(&self, rng: &mut ChaCha8Rng) -> Result<(Vec<f64>, f64)> {
        match &self.options.anchors {
            Some(pool) => {
                let k = rng.random_range(0..pool.len());
                Ok((pool[k].clone(), self.anchor_d[k]))
            }
            None => self.mixture_point(rng),
        }
    }

    /// Point at distance `rho` from `a` in a random direction, kept only if
    /// it respects the bounds.
    fn offset_point(&self, a: &[f64], rho: f64, rng: &mut ChaCha8Rng) -> Result<Option<(Vec<f64>, f64)>> {
        let dir = random_direction(a.len(), rng);
        let p: Vec<f64> = a.iter().zip(&dir).map(|(c, u)| c + rho * u).collect();
        if !self.domain.contains_point(&p) {
            return Ok(None);
        }
        let d = self.domain.boundary_distance(&p)?;
        Ok((d >= self.options.min_d).then_some((p, d)))
    }

    fn attempt(&self, rule: Rule, rng: &mut ChaCha8Rng) -> Result<Option<PointPair>> {
        let (y, dy) = self.anchor(rng)?;
        let partner = match rule {
            Rule::Uniform => {
                let x = self.domain.random_point(rng)?;
                let d = self.domain.boundary_distance(&x)?;
                (d >= self.options.min_d).then_some((x, d))
            }
            Rule::CaseOne => Some(self.mixture_point(rng)?),
            Rule::CaseTwo => self.offset_point(&y, 0.5 * dy * open_unit(rng), rng)?,
            Rule::Transition => {
                let q = 2f64.powf(2.0 * rng.random::<f64>() - 1.0);
                self.offset_point(&y, dy / q.sqrt(), rng)?
            }
            Rule::NearDiagonal => self.offset_point(&y, dy / 3.0 * open_unit(rng), rng)?,
            Rule::Region(delta) => {
                let u = open_unit(rng).powf(1.0 / y.len() as f64);
                self.offset_point(&y, delta * dy / (1.0 - delta) * u, rng)?
            }
        };
        let Some((x, dx)) = partner else {
            return Ok(None);
        };
        let r = distance(&x, &y);
        if r < self.options.min_r || r == 0.0 {
            return Ok(None);
        }
        let q = dx * dy / (r * r);
        let ok = match rule {
            Rule::Uniform => true,
            Rule::CaseOne => q <= 1.0,
            Rule::CaseTwo => q >= 2.0,
            Rule::Transition => (0.5..=2.0).contains(&q),
            Rule::NearDiagonal => r <= 0.5 * dx.min(dy),
            Rule::Region(delta) => r <= delta * dx.max(dy),
        };
        Ok(ok.then_some(PointPair { x, y, dx, dy, r }))
    }

    fn draw(&self, rule: Rule, seed: u64, index: usize) -> Result<PointPair> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index as u64);
        for _ in 0..MAX_ATTEMPTS {
            if let Some(pair) = self.attempt(rule, &mut rng)? {
                return Ok(pair);
            }
        }
        Err(Error::Sampling(format!(
            "no admissible pair for rule {rule:?} after {MAX_ATTEMPTS} attempts"
        )))
    }

    fn run(&self, count: usize, seed: u64, rule_of: impl Fn(usize) -> Rule + Sync) -> Result<Vec<PointPair>> {
        (0..count)
            .into_par_iter()
            .map(|i| self.draw(rule_of(i), seed, i))
            .collect()
    }
}

/// `count` pairs from `domain` under `strategy`, reproducible from `seed`.
/// Pair `i` depends only on `(seed, i)`.
pub fn sample_pairs<D: SampleDomain>(
    domain: &D,
    count: usize,
    seed: u64,
    strategy: PairStrategy,
) -> Result<Vec<PointPair>> {
    sample_pairs_with(domain, count, seed, strategy, &SampleOptions::default())
}

pub fn sample_pairs_with<D: SampleDomain>(
    domain: &D,
    count: usize,
    seed: u64,
    strategy: PairStrategy,
    options: &SampleOptions,
) -> Result<Vec<PointPair>> {
    let sampler = Sampler::new(domain, options)?;
    sampler.run(count, seed, |i| match strategy {
        PairStrategy::Uniform => Rule::Uniform,
        PairStrategy::NearDiagonal => Rule::NearDiagonal,
        PairStrategy::BoundaryStratified => [Rule::CaseOne, Rule::CaseTwo, Rule::Transition][i % 3],
    })
}

/// Pairs with |x − y| ≤ δ max(dx, dy), for 0 < δ < 1.
pub fn sample_region_pairs<D: SampleDomain>(
    domain: &D,
    count: usize,
    seed: u64,
    delta: f64,
    options: &SampleOptions,
) -> Result<Vec<PointPair>> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("region parameter must lie in (0, 1), got {delta}")));
    }
    let sampler = Sampler::new(domain, options)?;
    sampler.run(count, seed, |_| Rule::Region(delta))
}

/// `count` points from the boundary-weighted mixture, each at least `min_d`
/// from the boundary.
pub fn sample_points<D: SampleDomain>(domain: &D, count: usize, seed: u64, min_d: f64) -> Result<Vec<Vec<f64>>> {
    let options = SampleOptions {
        min_d,
        ..SampleOptions::default()
    };
    let sampler = Sampler::new(domain, &options)?;
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
            rng.set_stream(i as u64);
            sampler.mixture_point(&mut rng).map(|(p, _)| p)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Ball, DomainSpec};
    use crate::kernels::Dimension;

    fn check_consistent(domain: &DomainSpec, pairs: &[PointPair]) {
        for p in pairs {
            assert!(domain.contains([p.x[0], p.x[1]]));
            assert!(domain.contains([p.y[0], p.y[1]]));
            let dx = domain.distance_to_boundary([p.x[0], p.x[1]]).unwrap();
            assert_eq!(dx, p.dx);
            assert!((distance(&p.x, &p.y) - p.r).abs() < 1e-15);
        }
    }

    #[test]
    fn strategies_meet_their_constraints() {
        let domain = DomainSpec::ellipse(2.0, 1.0).unwrap();
        let strat = sample_pairs(&domain, 300, 5, PairStrategy::BoundaryStratified).unwrap();
        check_consistent(&domain, &strat);
        for (i, p) in strat.iter().enumerate() {
            let q = p.case_ratio();
            match i % 3 {
                0 => assert!(q <= 1.0),
                1 => assert!(q >= 2.0),
                _ => assert!((0.5..=2.0).contains(&q)),
            }
        }
        let near = sample_pairs(&domain, 200, 5, PairStrategy::NearDiagonal).unwrap();
        check_consistent(&domain, &near);
        assert!(near.iter().all(|p| p.r <= 0.5 * p.dx.min(p.dy)));
    }

    #[test]
    fn deterministic_and_prefix_stable() {
        let domain = DomainSpec::disk(1.0).unwrap();
        let a = sample_pairs(&domain, 50, 42, PairStrategy::Uniform).unwrap();
        let b = sample_pairs(&domain, 50, 42, PairStrategy::Uniform).unwrap();
        let c = sample_pairs(&domain, 20, 42, PairStrategy::Uniform).unwrap();
        assert_eq!(a, b);
        assert_eq!(&a[..20], &c[..]);
        let d = sample_pairs(&domain, 50, 43, PairStrategy::Uniform).unwrap();
        assert_ne!(a, d);
    }

    #[test]
    fn bounds_and_anchors_are_respected() {
        let domain = DomainSpec::disk(1.0).unwrap();
        let anchors = vec![vec![0.2, 0.1], vec![-0.5, 0.3]];
        let options = SampleOptions {
            min_d: 0.05,
            min_r: 0.05,
            anchors: Some(anchors.clone()),
        };
        let pairs = sample_pairs_with(&domain, 120, 1, PairStrategy::BoundaryStratified, &options).unwrap();
        for p in &pairs {
            assert!(anchors.contains(&p.y));
            assert!(p.dx >= 0.05 && p.r >= 0.05);
        }
    }

    #[test]
    fn region_pairs_and_balls() {
        let ball = Ball::new(Dimension::new(6).unwrap(), 1.0).unwrap();
        let pairs = sample_region_pairs(&ball, 100, 9, 0.5, &SampleOptions::default()).unwrap();
        for p in &pairs {
            assert_eq!(p.x.len(), 6);
            assert!(p.r <= 0.5 * p.dx.max(p.dy) + 1e-15);
        }
        assert!(sample_region_pairs(&ball, 1, 0, 1.0, &SampleOptions::default()).is_err());
    }

    #[test]
    fn impossible_bounds_fail() {
        let domain = DomainSpec::disk(1.0).unwrap();
        let options = SampleOptions {
            min_d: 2.0,
            ..Default::default()
        };
        assert!(sample_pairs_with(&domain, 1, 0, PairStrategy::Uniform, &options).is_err());
        assert!("bogus".parse::<PairStrategy>().is_err());
    }
}
