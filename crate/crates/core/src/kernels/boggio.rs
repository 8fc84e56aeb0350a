use super::{boggio_prefactor, check_point, Dimension, DimensionCase};
use crate::error::{invalid, Error, Result};
use std::cmp::Ordering;
use std::f64::consts::PI;

/// Below this excess A − 1 the closed forms lose digits to cancellation and
/// a power series in (A − 1) is summed instead.
const SERIES_CUTOFF: f64 = 1e-4;

/// ∫₁^A (v² − 1) v^{1−n} dv for A ≥ 1.
pub fn boggio_integral(n: Dimension, a: f64) -> Result<f64> {
    if !(a >= 1.0) || !a.is_finite() {
        return Err(invalid(format!("Boggio integral needs finite A >= 1, got {a}")));
    }
    Ok(boggio_from_excess(n, a - 1.0))
}

/// The same integral parameterised by the excess t = A − 1 ≥ 0, which callers
/// can often compute without cancellation.
pub(crate) fn boggio_from_excess(n: Dimension, t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    if t == 0.0 {
        return 0.0;
    }
    if n.case() == DimensionCase::Three {
        // A + 1/A − 2 = (A − 1)² / A
        return t * t / (1.0 + t);
    }
    if t < SERIES_CUTOFF {
        return excess_series(n, t);
    }
    let lna = t.ln_1p();
    match n.case() {
        DimensionCase::Two => t + 0.5 * t * t - lna,
        DimensionCase::Four => lna + 0.5 * (-2.0 * lna).exp_m1(),
        _ => {
            let m = n.get() as f64;
            let p4 = 4.0 - m;
            let p2 = 2.0 - m;
            (p4 * lna).exp_m1() / p4 - (p2 * lna).exp_m1() / p2
        }
    }
}

/// Σ_{k≥1} (2 b_{k−1} + b_{k−2}) t^{k+1}/(k+1) with b_j = binom(1−n, j):
/// the termwise integral of (2s + s²)(1 + s)^{1−n} over [0, t].
fn excess_series(n: Dimension, t: f64) -> f64 {
    let m = 1.0 - n.get() as f64;
    let mut b_prev2 = 0.0; // b_{k-2}
    let mut b_prev1 = 1.0; // b_{k-1}
    let mut power = t * t; // t^{k+1}
    let mut sum = 0.0;
    for k in 1..64 {
        let term = (2.0 * b_prev1 + b_prev2) * power / (k as f64 + 1.0);
        sum += term;
        if k > 2 && term.abs() <= 1e-18 * sum.abs() {
            break;
        }
        let j = k as f64; // next binomial index
        let b_next = b_prev1 * (m - j + 1.0) / j;
        b_prev2 = b_prev1;
        b_prev1 = b_next;
        power *= t;
    }
    sum
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| *o != Ordering::Equal)
        .unwrap_or(Ordering::Equal)
}

/// Evaluates with the arguments in a canonical order so that swapping them
/// runs the identical floating-point path.
fn ordered<'a>(x: &'a [f64], y: &'a [f64]) -> (&'a [f64], &'a [f64]) {
    if lexicographic(x, y) == Ordering::Greater {
        (y, x)
    } else {
        (x, y)
    }
}

fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Green function of the clamped bilaplacian on the half-space {x₁ < 0}.
///
/// `G(ξ,η) = 1/(4n e_n) |ξ−η|^{4−n} ∫₁^{|ξ*−η|/|ξ−η|} (v²−1) v^{1−n} dv`
/// with ξ* the reflection of ξ in the hyperplane x₁ = 0. For n = 2, 3 the
/// diagonal ξ = η returns the finite limit.
pub fn halfspace_green(n: Dimension, xi: &[f64], eta: &[f64]) -> Result<f64> {
    check_point(n, xi, "xi")?;
    check_point(n, eta, "eta")?;
    for p in [xi, eta] {
        if p[0] > 0.0 {
            return Err(Error::OutsideDomain {
                point: p.to_vec(),
                region: "closed half-space {x1 <= 0}".into(),
            });
        }
    }
    let (xi, eta) = ordered(xi, eta);
    let pref = boggio_prefactor(n);
    if xi == eta {
        return match n.case() {
            DimensionCase::Two => Ok(xi[0] * xi[0] / (4.0 * PI)),
            DimensionCase::Three => Ok(xi[0].abs() / (8.0 * PI)),
            _ => Err(Error::SingularDiagonal(n.get())),
        };
    }
    if xi[0] == 0.0 || eta[0] == 0.0 {
        return Ok(0.0);
    }
    let tangential = squared_distance(&xi[1..], &eta[1..]);
    let r = ((xi[0] - eta[0]).powi(2) + tangential).sqrt();
    let s = ((xi[0] + eta[0]).powi(2) + tangential).sqrt();
    // A − 1 = (|ξ*−η|² − |ξ−η|²) / (r (s + r)) and |ξ*−η|² − |ξ−η|² = 4 ξ₁η₁
    let t = 4.0 * xi[0] * eta[0] / (r * (s + r));
    Ok(pref * r.powi(n.singular_exponent()) * boggio_from_excess(n, t))
}

/// Boggio's Green function of the clamped bilaplacian on the ball of the
/// given radius centred at the origin.
///
/// On the unit ball `G(x,y) = 1/(4n e_n) |x−y|^{4−n} ∫₁^B (v²−1) v^{1−n} dv`
/// with `B = sqrt(|x−y|² + (1−|x|²)(1−|y|²)) / |x−y|`; other radii follow from
/// `G_R(x,y) = R^{4−n} G_1(x/R, y/R)`.
pub fn ball_green(n: Dimension, x: &[f64], y: &[f64], radius: f64) -> Result<f64> {
    check_point(n, x, "x")?;
    check_point(n, y, "y")?;
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(invalid(format!("ball radius must be positive, got {radius}")));
    }
    let (x, y) = ordered(x, y);
    let scale = radius.powi(n.singular_exponent());
    let xs: Vec<f64> = x.iter().map(|c| c / radius).collect();
    let ys: Vec<f64> = y.iter().map(|c| c / radius).collect();
    let mut weights = [0.0; 2];
    for (k, p) in [&xs, &ys].into_iter().enumerate() {
        let norm = p.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm > 1.0 + 1e-12 {
            return Err(Error::OutsideDomain {
                point: if k == 0 { x.to_vec() } else { y.to_vec() },
                region: format!("closed ball of radius {radius}"),
            });
        }
        weights[k] = ((1.0 - norm) * (1.0 + norm)).max(0.0);
    }
    let [wx, wy] = weights;
    let pref = boggio_prefactor(n);
    if x == y {
        return match n.case() {
            DimensionCase::Two => Ok(scale * pref * wx * wx / 2.0),
            DimensionCase::Three => Ok(scale * pref * wx),
            _ => Err(Error::SingularDiagonal(n.get())),
        };
    }
    if wx == 0.0 || wy == 0.0 {
        return Ok(0.0);
    }
    let r2 = squared_distance(&xs, &ys);
    let r = r2.sqrt();
    let prod = wx * wy;
    let s = (r2 + prod).sqrt();
    let t = prod / (r * (s + r));
    Ok(scale * pref * r.powi(n.singular_exponent()) * boggio_from_excess(n, t))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dim(n: usize) -> Dimension {
        Dimension::new(n).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn integral_examples() {
        assert_eq!(boggio_integral(dim(2), 1.0).unwrap(), 0.0);
        let v2 = boggio_integral(dim(2), 2.0).unwrap();
        assert!(rel(v2, 1.5 - 2f64.ln()) < 1e-15);
        assert!((v2 - 0.806853).abs() < 1e-6);
        assert!(rel(boggio_integral(dim(3), 2.0).unwrap(), 0.5) < 1e-15);
        let v4 = boggio_integral(dim(4), 2.0).unwrap();
        assert!((v4 - 0.318147).abs() < 1e-6);
        assert!(boggio_integral(dim(2), 0.5).is_err());
        assert!(boggio_integral(dim(2), f64::NAN).is_err());
    }

    #[test]
    fn series_and_closed_form_agree_at_cutoff() {
        for n in 2..=10 {
            let d = dim(n);
            let below = excess_series(d, SERIES_CUTOFF);
            let t: f64 = SERIES_CUTOFF;
            let lna = t.ln_1p();
            let closed = match d.case() {
                DimensionCase::Two => t + 0.5 * t * t - lna,
                DimensionCase::Three => t * t / (1.0 + t),
                DimensionCase::Four => lna + 0.5 * (-2.0 * lna).exp_m1(),
                _ => {
                    let m = n as f64;
                    ((4.0 - m) * lna).exp_m1() / (4.0 - m) - ((2.0 - m) * lna).exp_m1() / (2.0 - m)
                }
            };
            assert!(rel(below, closed) < 1e-10, "n = {n}: {below} vs {closed}");
        }
    }

    #[test]
    fn tiny_excess_is_quadratic() {
        // (v²−1)v^{1−n} ≈ 2(v−1) near v = 1, so the integral ≈ t².
        for n in 2..=10 {
            let t = 1e-9;
            let v = boggio_from_excess(dim(n), t);
            assert!(rel(v, t * t) < 1e-8, "n = {n}");
        }
    }

    #[test]
    fn halfspace_examples() {
        let g = halfspace_green(dim(2), &[-1.0, 0.0], &[-3.0, 0.0]).unwrap();
        assert!(rel(g, 4.0 * (1.5 - 2f64.ln()) / (8.0 * PI)) < 1e-14);
        assert!((g - 0.12842).abs() < 1e-5);
        let diag = halfspace_green(dim(2), &[-1.0, 0.0], &[-1.0, 0.0]).unwrap();
        assert!(rel(diag, 1.0 / (4.0 * PI)) < 1e-15);
        assert_eq!(halfspace_green(dim(2), &[0.0, 0.3], &[-1.0, 0.0]).unwrap(), 0.0);
        let g3 = halfspace_green(dim(3), &[-1.0, 0.0, 0.0], &[-3.0, 0.0, 0.0]).unwrap();
        assert!(rel(g3, 1.0 / (16.0 * PI)) < 1e-14);
    }

    #[test]
    fn halfspace_near_diagonal_approaches_limit() {
        let xi = [-0.7, 0.2];
        let limit = halfspace_green(dim(2), &xi, &xi).unwrap();
        let near = halfspace_green(dim(2), &xi, &[-0.7, 0.2 + 1e-7]).unwrap();
        assert!(rel(near, limit) < 1e-6);
        let xi3 = [-0.4, 0.1, -0.2];
        let limit3 = halfspace_green(dim(3), &xi3, &xi3).unwrap();
        let near3 = halfspace_green(dim(3), &xi3, &[-0.4, 0.1, -0.2 + 1e-8]).unwrap();
        assert!(rel(near3, limit3) < 1e-6);
    }

    #[test]
    fn halfspace_errors() {
        assert_eq!(
            halfspace_green(dim(4), &[-1.0; 4], &[-1.0; 4]),
            Err(Error::SingularDiagonal(4))
        );
        assert!(matches!(
            halfspace_green(dim(2), &[0.5, 0.0], &[-1.0, 0.0]),
            Err(Error::OutsideDomain { .. })
        ));
        assert!(halfspace_green(dim(3), &[-1.0, 0.0], &[-1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn ball_examples() {
        let g = ball_green(dim(2), &[0.0, 0.0], &[0.5, 0.0], 1.0).unwrap();
        assert!(rel(g, 0.25 * (1.5 - 2f64.ln()) / (8.0 * PI)) < 1e-14);
        assert!((g - 0.008026).abs() < 1e-6);
        let diag = ball_green(dim(2), &[0.0, 0.0], &[0.0, 0.0], 1.0).unwrap();
        assert!(rel(diag, 1.0 / (16.0 * PI)) < 1e-15);
        assert_eq!(ball_green(dim(2), &[1.0, 0.0], &[0.2, 0.1], 1.0).unwrap(), 0.0);
        assert!(ball_green(dim(2), &[1.1, 0.0], &[0.2, 0.1], 1.0).is_err());
        assert_eq!(
            ball_green(dim(5), &[0.1; 5], &[0.1; 5], 1.0),
            Err(Error::SingularDiagonal(5))
        );
    }

    #[test]
    fn ball_radius_scaling() {
        for n in [2, 3, 5] {
            let d = dim(n);
            let x: Vec<f64> = (0..n).map(|i| 0.1 * i as f64 - 0.2).collect();
            let y: Vec<f64> = (0..n).map(|i| 0.05 * (i as f64) + 0.1).collect();
            let radius = 2.5;
            let xr: Vec<f64> = x.iter().map(|c| c * radius).collect();
            let yr: Vec<f64> = y.iter().map(|c| c * radius).collect();
            let big = ball_green(d, &xr, &yr, radius).unwrap();
            let unit = ball_green(d, &x, &y, 1.0).unwrap();
            assert!(rel(big, radius.powi(4 - n as i32) * unit) < 1e-13);
        }
    }

    #[test]
    fn kernels_are_exactly_symmetric() {
        let x = [-0.3, 0.25];
        let y = [-0.8, -0.1];
        let d = dim(2);
        assert_eq!(
            halfspace_green(d, &x, &y).unwrap().to_bits(),
            halfspace_green(d, &y, &x).unwrap().to_bits()
        );
        let bx = [0.3, 0.25];
        assert_eq!(
            ball_green(d, &bx, &y, 1.0).unwrap().to_bits(),
            ball_green(d, &y, &bx, 1.0).unwrap().to_bits()
        );
    }

    #[test]
    fn ball_kernel_vanishes_quadratically_at_the_boundary() {
        let d = dim(2);
        let y = [0.1, 0.2];
        let ratios: Vec<f64> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&t| ball_green(d, &[1.0 - t, 0.0], &y, 1.0).unwrap() / (t * t))
            .collect();
        assert!(ratios.iter().all(|r| *r > 0.0));
        assert!(rel(ratios[2], ratios[1]) < 2e-3);
    }
}
