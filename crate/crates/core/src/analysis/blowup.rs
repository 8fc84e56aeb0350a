use crate::error::{invalid, Result};
use crate::geometry::{grid_discretize, DomainKind, DomainSpec, Point2};
use crate::kernels::{ball_green, halfspace_green, Dimension};
use crate::solver::{assemble_bilaplacian, green_value, SolveOptions};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// Scale by the pair distance; |ξ − η| = 1.
    A,
    /// Scale by the boundary distance of the first point; ξ = (−1, 0).
    B,
}

impl std::str::FromStr for Regime {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(Regime::A),
            "B" | "b" => Ok(Regime::B),
            other => Err(invalid(format!("unknown regime '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupConfig {
    /// Boundary point to zoom into.
    pub x0: Point2,
    pub regime: Regime,
    /// Rescaled positions in the half-plane {ξ₁ < 0}, first coordinate
    /// along the inward normal direction reversed.
    pub xi: Point2,
    pub eta: Point2,
    pub steps: usize,
    /// Scale of step 0; step k uses s₀ 2⁻ᵏ.
    pub s0: f64,
    /// Grid nodes per unit of scale (h = s / nodes_per_scale).
    pub nodes_per_scale: usize,
    /// Cap on interior unknowns per solve.
    pub node_budget: usize,
    pub tol: f64,
}

impl BlowupConfig {
    pub fn new(x0: Point2, regime: Regime, xi: Point2, eta: Point2, steps: usize) -> Self {
        BlowupConfig {
            x0,
            regime,
            xi,
            eta,
            steps,
            s0: 0.5,
            nodes_per_scale: 16,
            node_budget: 1_000_000,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupStep {
    pub k: usize,
    /// |x_k − y_k| in regime A, d(x_k) in regime B.
    pub scale: f64,
    pub h: f64,
    pub unknowns: usize,
    pub x: Point2,
    pub y: Point2,
    pub xi: Point2,
    pub eta: Point2,
    pub gk: f64,
    pub g_halfspace: f64,
    pub abs_error: f64,
    /// Rescaled exact kernel, when the domain is a disk.
    pub gk_exact: Option<f64>,
    /// |G_k| / ((1 + log⁺|ξ| + log⁺|η|)(1 + |ξ|² + |η|²)).
    pub growth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupOutcome {
    pub steps: Vec<BlowupStep>,
    /// Why the sequence stopped early, if it did.
    pub aborted: Option<String>,
    /// Growth diagnostic of the limit kernel itself.
    pub growth_reference: f64,
}

impl BlowupOutcome {
    /// The final error is at most `factor` times the first.
    pub fn converging(&self, factor: f64) -> bool {
        match (self.steps.first(), self.steps.last()) {
            (Some(a), Some(b)) if self.steps.len() > 1 => b.abs_error <= factor * a.abs_error,
            _ => false,
        }
    }

    /// Every step's growth diagnostic stays within `factor` times that of
    /// the limit kernel.
    pub fn growth_bounded(&self, factor: f64) -> bool {
        self.steps.iter().all(|s| s.growth <= factor * self.growth_reference)
    }
}

fn growth_weight(xi: Point2, eta: Point2) -> f64 {
    let norm = |p: Point2| p[0].hypot(p[1]);
    let lp = |p: Point2| norm(p).ln().max(0.0);
    (1.0 + lp(xi) + lp(eta)) * (1.0 + norm(xi).powi(2) + norm(eta).powi(2))
}

/// Rescaled discrete Green functions at a boundary point converging to the
/// half-plane kernel. Step k places x_k = x0 + s_k(ξ₁ν + ξ₂τ) (ν the outward
/// normal, τ its rotation) and similarly y_k, solves on a grid with
/// h = s_k / nodes_per_scale, and rescales by s_k⁻² (n = 2). Steps whose
/// grid would exceed the node budget end the sequence early.
pub fn blowup_sequence(domain: &DomainSpec, config: &BlowupConfig) -> Result<BlowupOutcome> {
    let (xi, eta) = (config.xi, config.eta);
    if !(xi[0] < 0.0 && eta[0] < 0.0) {
        return Err(invalid("rescaled points must lie in the open half-plane ξ₁ < 0"));
    }
    let dist = (xi[0] - eta[0]).hypot(xi[1] - eta[1]);
    match config.regime {
        Regime::A => {
            if (dist - 1.0).abs() > 1e-12 {
                return Err(invalid(format!("regime A needs |ξ − η| = 1, got {dist}")));
            }
        }
        Regime::B => {
            if xi != [-1.0, 0.0] {
                return Err(invalid("regime B places ξ at (−1, 0)"));
            }
            if !(dist < 0.5 && dist > 0.0) || -eta[0] < 0.5 {
                return Err(invalid("regime B needs 0 < |ξ − η| < 1/2 and η₁ ≤ −1/2"));
            }
        }
    }
    if !(config.s0 > 0.0) || config.nodes_per_scale < 4 {
        return Err(invalid("blow-up needs s0 > 0 and at least 4 nodes per scale"));
    }
    let nu = domain.outward_normal(config.x0)?;
    let tau = [-nu[1], nu[0]];
    let place = |p: Point2, s: f64| {
        [
            config.x0[0] + s * (p[0] * nu[0] + p[1] * tau[0]),
            config.x0[1] + s * (p[0] * nu[1] + p[1] * tau[1]),
        ]
    };
    let two = Dimension::TWO;
    let g_halfspace = halfspace_green(two, &xi, &eta)?;
    let weight = growth_weight(xi, eta);
    let growth_reference = g_halfspace.abs() / weight;
    let opts = SolveOptions::with_tol(config.tol);

    let mut steps = Vec::new();
    let mut aborted = None;
    for k in 1..=config.steps {
        let s = config.s0 * 0.5f64.powi(k as i32);
        let h = s / config.nodes_per_scale as f64;
        let mask = grid_discretize(domain, h)?;
        let unknowns = mask.interior_count();
        if unknowns > config.node_budget {
            aborted = Some(format!(
                "step {k} needs {unknowns} unknowns at h = {h:.3e}, over the budget of {}",
                config.node_budget
            ));
            break;
        }
        let x = place(xi, s);
        let y = place(eta, s);
        let op = assemble_bilaplacian(mask)?;
        let g = green_value(&op.green_column(y, &opts)?, x)?;
        let scale = match config.regime {
            Regime::A => s,
            Regime::B => domain.distance_to_boundary(x)?,
        };
        let gk = g / (scale * scale);
        let gk_exact = match domain.kind() {
            DomainKind::Disk { radius } => {
                let c = domain.offset();
                let e = ball_green(two, &[x[0] - c[0], x[1] - c[1]], &[y[0] - c[0], y[1] - c[1]], radius)?;
                Some(e / (scale * scale))
            }
            _ => None,
        };
        steps.push(BlowupStep {
            k,
            scale,
            h,
            unknowns,
            x,
            y,
            xi,
            eta,
            gk,
            g_halfspace,
            abs_error: (gk - g_halfspace).abs(),
            gk_exact,
            growth: gk.abs() / weight,
        });
    }
    Ok(BlowupOutcome {
        steps,
        aborted,
        growth_reference,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_steps_is_empty() {
        let disk = DomainSpec::disk(1.0).unwrap();
        let cfg = BlowupConfig::new([1.0, 0.0], Regime::A, [-1.0, 0.0], [-2.0, 0.0], 0);
        let out = blowup_sequence(&disk, &cfg).unwrap();
        assert!(out.steps.is_empty() && out.aborted.is_none());
    }

    #[test]
    fn budget_aborts_with_completed_steps() {
        let disk = DomainSpec::disk(1.0).unwrap();
        let mut cfg = BlowupConfig::new([1.0, 0.0], Regime::A, [-1.0, 0.0], [-2.0, 0.0], 4);
        cfg.nodes_per_scale = 8;
        cfg.node_budget = 15_000;
        let out = blowup_sequence(&disk, &cfg).unwrap();
        assert_eq!(out.steps.len(), 2);
        assert!(out.aborted.is_some());
        assert!(out.steps[0].scale > out.steps[1].scale);
    }

    #[test]
    fn configuration_checks() {
        let disk = DomainSpec::disk(1.0).unwrap();
        let bad_a = BlowupConfig::new([1.0, 0.0], Regime::A, [-1.0, 0.0], [-3.0, 0.0], 3);
        assert!(blowup_sequence(&disk, &bad_a).is_err());
        let bad_b = BlowupConfig::new([1.0, 0.0], Regime::B, [-1.0, 0.0], [-2.0, 0.0], 3);
        assert!(blowup_sequence(&disk, &bad_b).is_err());
        let off = BlowupConfig::new([0.5, 0.0], Regime::A, [-1.0, 0.0], [-2.0, 0.0], 3);
        assert!(blowup_sequence(&disk, &off).is_err());
    }

    #[test]
    fn regime_b_stays_bounded() {
        let disk = DomainSpec::disk(1.0).unwrap();
        let mut cfg = BlowupConfig::new([1.0, 0.0], Regime::B, [-1.0, 0.0], [-1.2, 0.3], 3);
        cfg.nodes_per_scale = 8;
        let out = blowup_sequence(&disk, &cfg).unwrap();
        assert_eq!(out.steps.len(), 3);
        for s in &out.steps {
            assert!(s.gk > 0.2 * s.g_halfspace && s.gk < 5.0 * s.g_halfspace);
        }
    }
}
