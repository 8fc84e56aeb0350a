use super::{assemble_bilaplacian, GridOperator, SolveOptions};
use crate::error::{invalid, Error, Result};
use crate::geometry::{grid_discretize, DomainSpec, GridMask, Point2, PointPair};
use crate::kernels::{h_estimate, Dimension, HInput};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::sync::Arc;

/// Minimum number of interior nodes for a Green column to mean anything.
pub const MIN_INTERIOR_NODES: usize = 25;

/// Values on the interior nodes of a mask, zero-extended elsewhere.
#[derive(Debug, Clone)]
pub struct GridField {
    mask: Arc<GridMask>,
    values: Vec<f64>,
    source: String,
    residual: f64,
}

impl GridField {
    pub fn new(mask: Arc<GridMask>, values: Vec<f64>, source: String, residual: f64) -> Self {
        assert_eq!(values.len(), mask.interior_count(), "one value per interior node");
        GridField {
            mask,
            values,
            source,
            residual,
        }
    }

    pub fn zeros(mask: Arc<GridMask>, source: &str) -> Self {
        let n = mask.interior_count();
        GridField::new(mask, vec![0.0; n], source.into(), 0.0)
    }

    pub fn mask(&self) -> &Arc<GridMask> {
        &self.mask
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Relative residual reached by the solve that produced this field.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Value at node (i, j); zero off the interior.
    pub fn node_value(&self, i: isize, j: isize) -> f64 {
        self.mask.unknown(i, j).map_or(0.0, |u| self.values[u])
    }

    /// Writes `node,x1,x2,value` rows for every interior node.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "node,x1,x2,value")?;
        for (u, v) in self.values.iter().enumerate() {
            let (i, j) = self.mask.node(u);
            let p = self.mask.position(i, j);
            writeln!(out, "{u},{},{},{v:e}", p[0], p[1])?;
        }
        Ok(())
    }
}

/// Bilinear interpolation of a field, with zeros at non-interior nodes.
pub fn green_value(field: &GridField, x: Point2) -> Result<f64> {
    let ((i, j), w) = field.mask.cell(x)?;
    Ok(w[0] * field.node_value(i, j)
        + w[1] * field.node_value(i + 1, j)
        + w[2] * field.node_value(i, j + 1)
        + w[3] * field.node_value(i + 1, j + 1))
}

/// Discrete Dirac at `y`: the unit mass spread over the four surrounding
/// nodes with bilinear weights, each divided by h². At a node this is the
/// single value 1/h²; elsewhere it is the transpose of the interpolation in
/// [`green_value`], which keeps G_h(x, y) = G_h(y, x) exactly.
pub fn point_source(mask: &GridMask, y: Point2) -> Result<Vec<f64>> {
    let ((i, j), w) = mask.cell(y)?;
    let scale = 1.0 / (mask.h() * mask.h());
    let mut rhs = vec![0.0; mask.interior_count()];
    for (k, (di, dj)) in [(0, 0), (1, 0), (0, 1), (1, 1)].into_iter().enumerate() {
        if let Some(u) = mask.unknown(i + di, j + dj) {
            rhs[u] += w[k] * scale;
        }
    }
    Ok(rhs)
}

fn check_evaluation_point(domain: &DomainSpec, p: Point2, h: f64, what: &str) -> Result<f64> {
    if !domain.contains(p) {
        return Err(Error::OutsideDomain {
            point: p.to_vec(),
            region: domain.to_string(),
        });
    }
    let d = domain.distance_to_boundary(p)?;
    if d < 2.0 * h {
        return Err(invalid(format!(
            "{what} {p:?} is {d:.3e} from the boundary, closer than 2h = {:.3e}",
            2.0 * h
        )));
    }
    Ok(d)
}

impl GridOperator {
    /// Green column for the source `y`.
    pub fn green_column(&self, y: Point2, opts: &SolveOptions) -> Result<GridField> {
        Ok(self.green_columns(&[y], opts)?.pop().expect("one column"))
    }

    /// Green columns for several sources, solved as a block.
    pub fn green_columns(&self, ys: &[Point2], opts: &SolveOptions) -> Result<Vec<GridField>> {
        let mask = self.mask();
        if mask.interior_count() < MIN_INTERIOR_NODES {
            return Err(Error::GridTooCoarse {
                interior: mask.interior_count(),
                required: MIN_INTERIOR_NODES,
            });
        }
        let mut rhs = Vec::with_capacity(ys.len());
        for &y in ys {
            check_evaluation_point(mask.domain(), y, self.h(), "source")?;
            rhs.push(point_source(mask, y)?);
        }
        let sols = self.solve_vectors(&rhs, opts)?;
        Ok(ys
            .iter()
            .zip(sols)
            .map(|(y, s)| {
                GridField::new(
                    mask.clone(),
                    s.values,
                    format!("green column, y = ({}, {})", y[0], y[1]),
                    s.residual,
                )
            })
            .collect())
    }
}

/// Approximates G_Ω(·, y) by the discrete Green column on a grid of spacing
/// `h`. Needs d(y) ≥ 2h and at least 25 interior nodes.
pub fn discrete_green(domain: &DomainSpec, h: f64, y: Point2, tol: f64) -> Result<GridField> {
    let mask = grid_discretize(domain, h)?;
    let op = assemble_bilaplacian(mask)?;
    op.green_column(y, &SolveOptions::with_tol(tol))
}

/// One evaluated pair: G together with the comparison value H.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreenSample {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub dx: f64,
    pub dy: f64,
    pub r: f64,
    pub g: f64,
    /// H on (n, dx, dy, r).
    pub h: f64,
    /// Grid spacing of the solve, absent for exact kernels.
    pub grid_h: Option<f64>,
}

impl GreenSample {
    pub fn new(n: Dimension, pair: PointPair, g: f64, grid_h: Option<f64>) -> Result<Self> {
        if !g.is_finite() {
            return Err(invalid(format!("non-finite Green value at {:?}, {:?}", pair.x, pair.y)));
        }
        let h = h_estimate(&HInput::new(n, pair.dx, pair.dy, pair.r)?);
        Ok(GreenSample {
            x: pair.x,
            y: pair.y,
            dx: pair.dx,
            dy: pair.dy,
            r: pair.r,
            g,
            h,
            grid_h,
        })
    }

    /// G / H.
    pub fn ratio(&self) -> f64 {
        self.g / self.h
    }
}

/// Evaluates the discrete Green function at each pair. Pairs sharing a
/// source reuse one column; columns are solved in blocks and dropped once
/// their pairs are evaluated, so memory stays bounded by the block size.
pub fn evaluate_pairs(op: &GridOperator, pairs: &[PointPair], opts: &SolveOptions) -> Result<Vec<GreenSample>> {
    let h = op.h();
    let domain = op.mask().domain();
    let mut sources: Vec<Point2> = Vec::new();
    let mut source_of_pair = Vec::with_capacity(pairs.len());
    let mut index = std::collections::HashMap::new();
    for p in pairs {
        if p.x.len() != 2 || p.y.len() != 2 {
            return Err(invalid("discrete Green evaluation is planar"));
        }
        let x = [p.x[0], p.x[1]];
        let y = [p.y[0], p.y[1]];
        check_evaluation_point(domain, x, h, "evaluation point")?;
        if p.r < 2.0 * h {
            return Err(invalid(format!(
                "pair distance {:.3e} is below 2h = {:.3e}",
                p.r,
                2.0 * h
            )));
        }
        let key = (y[0].to_bits(), y[1].to_bits());
        let k = *index.entry(key).or_insert_with(|| {
            sources.push(y);
            sources.len() - 1
        });
        source_of_pair.push(k);
    }
    let mut pairs_of_source = vec![Vec::new(); sources.len()];
    for (i, &k) in source_of_pair.iter().enumerate() {
        pairs_of_source[k].push(i);
    }

    let mut g = vec![0.0; pairs.len()];
    const CHUNK: usize = 64;
    for (c, chunk) in sources.chunks(CHUNK).enumerate() {
        let columns = op.green_columns(chunk, opts)?;
        for (offset, column) in columns.iter().enumerate() {
            for &i in &pairs_of_source[c * CHUNK + offset] {
                g[i] = green_value(column, [pairs[i].x[0], pairs[i].x[1]])?;
            }
        }
    }
    pairs
        .iter()
        .zip(g)
        .map(|(p, g)| GreenSample::new(Dimension::TWO, p.clone(), g, Some(h)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::ball_green;

    #[test]
    fn interpolation_reproduces_nodes_and_averages() {
        let mask = Arc::new(grid_discretize(&DomainSpec::disk(1.0).unwrap(), 0.25).unwrap());
        let values: Vec<f64> = (0..mask.interior_count()).map(|k| k as f64 + 1.0).collect();
        let field = GridField::new(mask.clone(), values, "test".into(), 0.0);
        let u = mask.unknown(4, 4).unwrap();
        let (i, j) = mask.node(u);
        let p = mask.position(i, j);
        assert_eq!(green_value(&field, p).unwrap(), field.values()[u]);
        let centre = [p[0] + 0.125, p[1] + 0.125];
        let avg =
            0.25 * (field.node_value(4, 4) + field.node_value(5, 4) + field.node_value(4, 5) + field.node_value(5, 5));
        assert!((green_value(&field, centre).unwrap() - avg).abs() < 1e-14);
        assert!(green_value(&field, [5.0, 5.0]).is_err());
    }

    #[test]
    fn disk_column_matches_exact_kernel() {
        let field = discrete_green(&DomainSpec::disk(1.0).unwrap(), 1.0 / 64.0, [0.5, 0.0], 1e-10).unwrap();
        let g = green_value(&field, [0.0, 0.0]).unwrap();
        let exact = ball_green(Dimension::TWO, &[0.0, 0.0], &[0.5, 0.0], 1.0).unwrap();
        assert!((exact - 0.008026).abs() < 1e-6);
        assert!((g - exact).abs() / exact < 0.05, "g = {g}, exact = {exact}");
        assert!(field.residual() <= 1e-10);
    }

    #[test]
    fn columns_are_symmetric() {
        let h = 1.0 / 32.0;
        let disk = DomainSpec::disk(1.0).unwrap();
        let a = discrete_green(&disk, h, [0.0, 0.0], 1e-10).unwrap();
        let b = discrete_green(&disk, h, [0.5, 0.0], 1e-10).unwrap();
        let gab = green_value(&a, [0.5, 0.0]).unwrap();
        let gba = green_value(&b, [0.0, 0.0]).unwrap();
        assert!((gab - gba).abs() / gab.abs() <= 1e-3);
    }

    #[test]
    fn boundary_adjacent_values_are_small() {
        let h = 1.0 / 32.0;
        let field = discrete_green(&DomainSpec::disk(1.0).unwrap(), h, [0.0, 0.0], 1e-10).unwrap();
        let mask = field.mask();
        let peak = field.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        // the interior nodes closest to the boundary hold O(h²) values
        for u in 0..mask.interior_count() {
            let (i, j) = mask.node(u);
            let p = mask.position(i, j);
            if mask.domain().distance_to_boundary(p).unwrap() < h {
                assert!(field.values()[u].abs() <= 10.0 * h * h * peak);
            }
        }
    }

    #[test]
    fn source_checks() {
        let disk = DomainSpec::disk(1.0).unwrap();
        assert!(discrete_green(&disk, 0.05, [0.95, 0.0], 1e-10).is_err());
        assert!(discrete_green(&disk, 0.05, [1.5, 0.0], 1e-10).is_err());
        assert!(matches!(
            discrete_green(&disk, 0.4, [0.0, 0.0], 1e-10),
            Err(Error::GridTooCoarse { .. })
        ));
    }

    #[test]
    fn pair_evaluation_matches_columns() {
        let disk = DomainSpec::disk(1.0).unwrap();
        let op = assemble_bilaplacian(grid_discretize(&disk, 1.0 / 32.0).unwrap()).unwrap();
        let pair = |x: Point2, y: Point2| PointPair {
            x: x.to_vec(),
            y: y.to_vec(),
            dx: disk.distance_to_boundary(x).unwrap(),
            dy: disk.distance_to_boundary(y).unwrap(),
            r: (x[0] - y[0]).hypot(x[1] - y[1]),
        };
        let pairs = vec![
            pair([0.0, 0.0], [0.5, 0.0]),
            pair([0.1, 0.3], [0.5, 0.0]),
            pair([0.5, 0.0], [0.0, 0.0]),
        ];
        let samples = evaluate_pairs(&op, &pairs, &SolveOptions::default()).unwrap();
        let col = op.green_column([0.5, 0.0], &SolveOptions::default()).unwrap();
        assert_eq!(samples[1].g, green_value(&col, [0.1, 0.3]).unwrap());
        assert!((samples[0].g - samples[2].g).abs() / samples[0].g < 1e-6);
        let close = vec![pair([0.0, 0.0], [0.03, 0.0])];
        assert!(evaluate_pairs(&op, &close, &SolveOptions::default()).is_err());
    }

    #[test]
    fn csv_export_lists_interior_nodes() {
        let mask = Arc::new(grid_discretize(&DomainSpec::rectangle(1.0, 1.0).unwrap(), 0.25).unwrap());
        let field = GridField::zeros(mask, "zero");
        let mut buf = Vec::new();
        field.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 10);
        assert!(text.starts_with("node,x1,x2,value"));
    }
}
