use crate::error::{invalid, Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Points per finite-difference stencil inside the extension.
const STENCIL_POINTS: usize = 9;
/// Euclidean norm of the 13-point stencil weights, √(20² + 4·8² + 4·2² + 4).
const STENCIL_NORM: f64 = 26.0;

/// Samples of H on the half-plane window y₁ ∈ [−depth·h, 0],
/// y₂ = y2_start + j h for j < ny. Row `i` holds y₁ = (i − depth) h.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfPlaneData {
    pub h: f64,
    pub depth: usize,
    pub y2_start: f64,
    pub ny: usize,
    values: Vec<f64>,
}

impl HalfPlaneData {
    pub fn from_fn(h: f64, depth: usize, y2_start: f64, ny: usize, f: impl Fn(f64, f64) -> f64 + Sync) -> Result<Self> {
        if !(h > 0.0) {
            return Err(invalid("grid spacing must be positive"));
        }
        if depth < 4 || ny < 5 {
            return Err(invalid("need at least 4 layers below the interface and 5 columns"));
        }
        let values = (0..(depth + 1) * ny)
            .into_par_iter()
            .map(|k| {
                let (row, j) = (k / ny, k % ny);
                f((row as f64 - depth as f64) * h, y2_start + j as f64 * h)
            })
            .collect::<Vec<_>>();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("half-plane data has non-finite values"));
        }
        Ok(HalfPlaneData {
            h,
            depth,
            y2_start,
            ny,
            values,
        })
    }

    /// Value at y₁ = −m h (m = 0..=depth), column j.
    fn at(&self, m: usize, j: usize) -> f64 {
        self.values[(self.depth - m) * self.ny + j]
    }
}

/// H on y₁ ≤ 0 together with its reflection H* on y₁ > 0, on the rows
/// y₁ = i h for i ∈ [−depth, depth].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflectionField {
    pub h: f64,
    pub depth: usize,
    pub y2_start: f64,
    pub ny: usize,
    /// Rows within this many nodes of y₁ = 0 form the interface band.
    pub band: usize,
    values: Vec<f64>,
    /// Per-node estimate of the rounding deviation of `values`.
    noise: Vec<f64>,
}

impl ReflectionField {
    /// Value at y₁ = i h, column j.
    pub fn value(&self, i: isize, j: usize) -> f64 {
        self.values[(i + self.depth as isize) as usize * self.ny + j]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Finite-difference weights for derivatives 0..=order at `z` from the
/// nodes `x` (Fornberg's recursion). Returns `w[d][k]`.
pub fn fornberg_weights(z: f64, x: &[f64], order: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; n]; order + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Stencil of up to `STENCIL_POINTS` consecutive indices in `0..len`,
/// centred on `at` where the range allows.
fn stencil(at: usize, len: usize) -> std::ops::Range<usize> {
    let m = STENCIL_POINTS.min(len);
    let start = at.saturating_sub(m / 2).min(len - m);
    start..start + m
}

/// Derivative of order `d` at index `at` of equispaced samples `v(k)`,
/// with √Σ(w_k v_k)² / h^d as the scale of its rounding error.
fn derivative(at: usize, len: usize, h: f64, d: usize, v: impl Fn(usize) -> f64) -> (f64, f64) {
    let range = stencil(at, len);
    let nodes: Vec<f64> = range.clone().map(|k| k as f64).collect();
    let w = fornberg_weights(at as f64, &nodes, d);
    let hd = h.powi(d as i32);
    let (sum, sq) = range.zip(&w[d]).fold((0.0, 0.0), |(s, q), (k, wk)| {
        let t = wk * v(k);
        (s + t, q + t * t)
    });
    (sum / hd, sq.sqrt() / hd)
}

/// Checks the clamped data H = ∂₁H = 0 on y₁ = 0 relative to the field's
/// scale: |H| ≤ tol·max|H| and |∂₁H|·(depth h) ≤ tol·max|H|.
pub fn check_boundary_data(data: &HalfPlaneData, tol: f64) -> Result<()> {
    let scale = data.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Ok(());
    }
    let width = data.depth as f64 * data.h;
    let len = data.depth + 1;
    for j in 0..data.ny {
        let value = data.at(0, j).abs();
        // m counts layers downward, so the y₁-derivative changes sign
        let slope = derivative(0, len, data.h, 1, |m| data.at(m, j)).0.abs();
        if value > tol * scale || slope * width > tol * scale {
            return Err(Error::BoundaryData(format!(
                "at y2 = {}: |H| = {value:.3e}, |dH/dy1| = {slope:.3e}, scale {scale:.3e}",
                data.y2_start + j as f64 * data.h
            )));
        }
    }
    Ok(())
}

/// Reflects clamped data across y₁ = 0:
/// H*(y) = −H(y*) − 2y₁ ∂₁H(y*) − y₁² ΔH(y*) for y₁ > 0, with y* the mirror
/// image. Derivatives at y* come from 9-point stencils, centred where the
/// window allows and one-sided at its edges.
pub fn duffin_extend(data: &HalfPlaneData, tol: f64) -> Result<ReflectionField> {
    check_boundary_data(data, tol)?;
    Ok(duffin_extend_unchecked(data))
}

/// [`duffin_extend`] without the boundary-data check, for demonstrating
/// what broken data does to the residual.
pub fn duffin_extend_unchecked(data: &HalfPlaneData) -> ReflectionField {
    let (depth, ny, h) = (data.depth, data.ny, data.h);
    let len = depth + 1;
    let rows = 2 * depth + 1;
    let (values, noise): (Vec<f64>, Vec<f64>) = (0..rows * ny)
        .into_par_iter()
        .map(|k| {
            let (row, j) = (k / ny, k % ny);
            let i = row as isize - depth as isize;
            if i <= 0 {
                let v = data.at((-i) as usize, j);
                return (v, f64::EPSILON * v.abs());
            }
            let m = i as usize;
            let y1 = i as f64 * h;
            // along m the coordinate is −y₁, so ∂/∂y₁ = −∂/∂m
            let (d1, a1) = derivative(m, len, h, 1, |q| data.at(q, j));
            let (d11, a11) = derivative(m, len, h, 2, |q| data.at(q, j));
            let (d22, a22) = derivative(j, ny, h, 2, |q| data.at(m, q));
            let value = -data.at(m, j) + 2.0 * y1 * d1 - y1 * y1 * (d11 + d22);
            // independent unit roundings in every stencil product, summed in quadrature
            let spread = data.at(m, j).powi(2)
                + (2.0 * y1 * a1).powi(2)
                + (y1 * y1 * a11).powi(2)
                + (y1 * y1 * a22).powi(2)
                + value * value;
            (value, f64::EPSILON * spread.sqrt())
        })
        .unzip();
    ReflectionField {
        h,
        depth,
        y2_start: data.y2_start,
        ny,
        band: depth / 2,
        values,
        noise,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DuffinResidual {
    pub h: f64,
    /// max |Δ²_h H*| over the interface band.
    pub residual: f64,
    /// Level explained by rounding alone: the propagated per-node rounding
    /// deviation of H* pushed through the stencil.
    pub rounding_floor: f64,
}

/// Applies the 13-point bilaplacian to H* at every node of the interface
/// band with a full stencil available.
pub fn duffin_residual(field: &ReflectionField) -> DuffinResidual {
    let h4 = field.h.powi(4);
    let band = field.band.min(field.depth - 2) as isize;
    let mut residual: f64 = 0.0;
    let mut noise: f64 = 0.0;
    for i in -band - 2..=band + 2 {
        for j in 0..field.ny {
            noise = noise.max(field.noise[(i + field.depth as isize) as usize * field.ny + j]);
        }
    }
    for i in -band..=band {
        for j in 2..field.ny - 2 {
            let v = |di: isize, dj: isize| field.value(i + di, (j as isize + dj) as usize);
            let lap2 = 20.0 * v(0, 0) - 8.0 * (v(1, 0) + v(-1, 0) + v(0, 1) + v(0, -1))
                + 2.0 * (v(1, 1) + v(1, -1) + v(-1, 1) + v(-1, -1))
                + (v(2, 0) + v(-2, 0) + v(0, 2) + v(0, -2));
            residual = residual.max((lap2 / h4).abs());
        }
    }
    DuffinResidual {
        h: field.h,
        residual,
        rounding_floor: STENCIL_NORM * noise / h4,
    }
}

/// Window for a refinement study: y₁ ∈ [−depth_len, 0] reflected to
/// [−depth_len, depth_len], y₂ ∈ [y2_min, y2_max], band of half-width
/// `band_len` around the interface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DuffinWindow {
    pub depth_len: f64,
    pub y2_min: f64,
    pub y2_max: f64,
    pub band_len: f64,
}

impl Default for DuffinWindow {
    fn default() -> Self {
        DuffinWindow {
            depth_len: 0.5,
            y2_min: -0.5,
            y2_max: 0.5,
            band_len: 0.25,
        }
    }
}

/// Extends `f` on each grid of `h_list` and reports the band residuals.
/// `checked = false` skips the boundary-data check.
pub fn duffin_study(
    f: impl Fn(f64, f64) -> f64 + Sync,
    window: &DuffinWindow,
    h_list: &[f64],
    tol: f64,
    checked: bool,
) -> Result<Vec<DuffinResidual>> {
    h_list
        .iter()
        .map(|&h| {
            let depth = (window.depth_len / h).round() as usize;
            let ny = ((window.y2_max - window.y2_min) / h).round() as usize + 1;
            let data = HalfPlaneData::from_fn(h, depth, window.y2_min, ny, &f)?;
            let mut field = if checked {
                duffin_extend(&data, tol)?
            } else {
                duffin_extend_unchecked(&data)
            };
            field.band = (window.band_len / h).round() as usize;
            Ok(duffin_residual(&field))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fornberg_reproduces_classic_weights() {
        let w = fornberg_weights(0.0, &[-1.0, 0.0, 1.0], 2);
        assert_eq!(w[1], vec![-0.5, 0.0, 0.5]);
        assert_eq!(w[2], vec![1.0, -2.0, 1.0]);
        let w = fornberg_weights(0.0, &[0.0, 1.0, 2.0], 1);
        assert_eq!(w[1], vec![-1.5, 2.0, -0.5]);
    }

    #[test]
    fn quadratic_extends_exactly() {
        let data = HalfPlaneData::from_fn(0.1, 6, -0.5, 11, |y1, _| y1 * y1).unwrap();
        let field = duffin_extend(&data, 1e-6).unwrap();
        for i in 1..=6isize {
            let y1 = i as f64 * 0.1;
            for j in 0..11 {
                assert!((field.value(i, j) - y1 * y1).abs() < 1e-12);
            }
        }
        let res = duffin_residual(&field);
        assert!(res.residual <= res.rounding_floor);
    }

    #[test]
    fn zero_extends_to_zero() {
        let data = HalfPlaneData::from_fn(0.1, 5, 0.0, 7, |_, _| 0.0).unwrap();
        let field = duffin_extend(&data, 1e-6).unwrap();
        assert_eq!(field.max_abs(), 0.0);
        assert_eq!(duffin_residual(&field).residual, 0.0);
    }

    #[test]
    fn broken_boundary_data_rejected() {
        let data = HalfPlaneData::from_fn(0.1, 5, 0.0, 7, |y1, _| y1).unwrap();
        assert!(matches!(duffin_extend(&data, 1e-6), Err(Error::BoundaryData(_))));
        let shifted = HalfPlaneData::from_fn(0.1, 5, 0.0, 7, |y1, _| (y1 - 0.1).powi(2)).unwrap();
        assert!(duffin_extend(&shifted, 1e-6).is_err());
    }

    /// The reflection of y₁² p(y₂) worked out by hand.
    #[test]
    fn polynomial_biharmonic_data() {
        let f = |y1: f64, y2: f64| y1 * y1 * (1.0 + y2 + y2 * y2);
        let data = HalfPlaneData::from_fn(0.05, 10, -0.3, 13, f).unwrap();
        let field = duffin_extend(&data, 1e-6).unwrap();
        // reflection of y₁² p(y₂): −y₁²p − 2y₁(−2y₁ p) − y₁²(2p + y₁² p'') with p'' = 2
        for i in 1..=10isize {
            let y1 = i as f64 * 0.05;
            for j in 0..13 {
                let y2 = -0.3 + j as f64 * 0.05;
                let p = 1.0 + y2 + y2 * y2;
                let expect = y1 * y1 * p - 2.0 * y1.powi(4);
                assert!((field.value(i, j) - expect).abs() < 1e-10);
            }
        }
    }
}
