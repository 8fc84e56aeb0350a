use super::{DomainSpec, Point2};
use crate::error::{invalid, Error, Result};

/// Hard cap on the number of nodes in the bounding grid.
const MAX_GRID_NODES: usize = 40_000_000;
/// Extra layers of nodes around the bounding box, enough for the 13-point
/// stencil to reach past the boundary.
const MARGIN: isize = 2;
const NO_UNKNOWN: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    /// Strictly inside the domain; carries an unknown.
    Interior,
    /// Outside (or on) the boundary but reached by the stencil of an interior node.
    BoundaryAdjacent,
    Exterior,
}

/// Uniform grid of spacing `h` over the bounding box, with each node
/// classified against the domain and interior nodes numbered row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMask {
    domain: DomainSpec,
    h: f64,
    anchor: Point2,
    /// Index offset of node (0, 0) from the anchor.
    lo: (isize, isize),
    nx: usize,
    ny: usize,
    kinds: Vec<NodeKind>,
    unknown_of_node: Vec<u32>,
    node_of_unknown: Vec<usize>,
}

impl GridMask {
    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Position of node (0, 0).
    pub fn origin(&self) -> Point2 {
        self.position(0, 0)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn interior_count(&self) -> usize {
        self.node_of_unknown.len()
    }

    pub fn position(&self, i: usize, j: usize) -> Point2 {
        // integer offsets from the anchor keep positions exact on it
        [
            self.anchor[0] + (self.lo.0 + i as isize) as f64 * self.h,
            self.anchor[1] + (self.lo.1 + j as isize) as f64 * self.h,
        ]
    }

    /// Kind of node (i, j); anything off the grid counts as exterior.
    pub fn kind(&self, i: isize, j: isize) -> NodeKind {
        match self.index(i, j) {
            Some(k) => self.kinds[k],
            None => NodeKind::Exterior,
        }
    }

    /// Unknown number of node (i, j) if it is interior.
    pub fn unknown(&self, i: isize, j: isize) -> Option<usize> {
        let k = self.index(i, j)?;
        let u = self.unknown_of_node[k];
        (u != NO_UNKNOWN).then_some(u as usize)
    }

    /// Grid indices of an unknown.
    pub fn node(&self, unknown: usize) -> (usize, usize) {
        let k = self.node_of_unknown[unknown];
        (k % self.nx, k / self.nx)
    }

    pub fn count(&self, kind: NodeKind) -> usize {
        self.kinds.iter().filter(|&&k| k == kind).count()
    }

    fn index(&self, i: isize, j: isize) -> Option<usize> {
        if i < 0 || j < 0 || i as usize >= self.nx || j as usize >= self.ny {
            return None;
        }
        Some(j as usize * self.nx + i as usize)
    }

    /// Cell containing `p` and the bilinear weights of its four corners,
    /// ordered (i,j), (i+1,j), (i,j+1), (i+1,j+1).
    pub fn cell(&self, p: Point2) -> Result<((isize, isize), [f64; 4])> {
        let fx = (p[0] - self.anchor[0]) / self.h - self.lo.0 as f64;
        let fy = (p[1] - self.anchor[1]) / self.h - self.lo.1 as f64;
        let i = fx.floor();
        let j = fy.floor();
        if !(i >= 0.0 && j >= 0.0 && (i as usize) + 1 < self.nx && (j as usize) + 1 < self.ny) {
            return Err(Error::OutsideDomain {
                point: p.to_vec(),
                region: "grid".into(),
            });
        }
        let (tx, ty) = (fx - i, fy - j);
        Ok((
            (i as isize, j as isize),
            [(1.0 - tx) * (1.0 - ty), tx * (1.0 - ty), (1.0 - tx) * ty, tx * ty],
        ))
    }
}

/// Classifies the nodes of a grid of spacing `h` anchored at the domain's
/// grid anchor. Fails only when no node lies strictly inside.
pub fn grid_discretize(domain: &DomainSpec, h: f64) -> Result<GridMask> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(invalid(format!("grid spacing must be positive, got {h}")));
    }
    let (lo, hi) = domain.bounding_box();
    let anchor = domain.grid_anchor();
    let lo_i = ((lo[0] - anchor[0]) / h).floor() as isize - MARGIN;
    let hi_i = ((hi[0] - anchor[0]) / h).ceil() as isize + MARGIN;
    let lo_j = ((lo[1] - anchor[1]) / h).floor() as isize - MARGIN;
    let hi_j = ((hi[1] - anchor[1]) / h).ceil() as isize + MARGIN;
    let nx = (hi_i - lo_i + 1) as usize;
    let ny = (hi_j - lo_j + 1) as usize;
    let nodes = nx.saturating_mul(ny);
    if nodes > MAX_GRID_NODES {
        return Err(Error::GridTooLarge {
            nodes,
            limit: MAX_GRID_NODES,
        });
    }
    let mut kinds = vec![NodeKind::Exterior; nodes];
    let mut unknown_of_node = vec![NO_UNKNOWN; nodes];
    let mut node_of_unknown = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let p = [
                anchor[0] + (lo_i + i as isize) as f64 * h,
                anchor[1] + (lo_j + j as isize) as f64 * h,
            ];
            if domain.contains(p) {
                let k = j * nx + i;
                kinds[k] = NodeKind::Interior;
                unknown_of_node[k] = node_of_unknown.len() as u32;
                node_of_unknown.push(k);
            }
        }
    }
    if node_of_unknown.is_empty() {
        return Err(Error::GridTooCoarse {
            interior: 0,
            required: 1,
        });
    }

    // Everything within two steps (axis) or one diagonal step of an
    // interior node is touched by the stencil.
    let reach: [(isize, isize); 12] = [
        (1, 0),
        (-1, 0),
        (0, 1),
        (0, -1),
        (2, 0),
        (-2, 0),
        (0, 2),
        (0, -2),
        (1, 1),
        (1, -1),
        (-1, 1),
        (-1, -1),
    ];
    for &k in &node_of_unknown {
        let (i, j) = ((k % nx) as isize, (k / nx) as isize);
        for (di, dj) in reach {
            let (a, b) = (i + di, j + dj);
            if a >= 0 && b >= 0 && (a as usize) < nx && (b as usize) < ny {
                let m = b as usize * nx + a as usize;
                if kinds[m] == NodeKind::Exterior {
                    kinds[m] = NodeKind::BoundaryAdjacent;
                }
            }
        }
    }

    Ok(GridMask {
        domain: domain.clone(),
        h,
        anchor,
        lo: (lo_i, lo_j),
        nx,
        ny,
        kinds,
        unknown_of_node,
        node_of_unknown,
    })
}
