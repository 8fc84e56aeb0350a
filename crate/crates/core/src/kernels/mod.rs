//! Closed-form kernels of the clamped bilaplacian.
//!
//! Everything here is a pure function of its arguments: the fundamental
//! solution of Δ², Boggio's half-space and ball Green functions in any
//! dimension n ≥ 2, and the two-sided comparison function `H` together with
//! its case-split form.

mod boggio;
mod estimator;

pub use boggio::{ball_green, boggio_integral, halfspace_green};
pub use estimator::{h_case_form, h_estimate, HInput};

use crate::error::{invalid, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;

/// Spatial dimension, always at least 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct Dimension(usize);

/// The dimension classes that select a branch of the kernels and of `H`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DimensionCase {
    Two,
    Three,
    Four,
    AboveFour,
}

impl Dimension {
    pub const TWO: Dimension = Dimension(2);
    pub const THREE: Dimension = Dimension(3);

    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(invalid(format!("dimension must be at least 2, got {n}")));
        }
        Ok(Dimension(n))
    }

    #[inline]
    pub fn get(self) -> usize {
        self.0
    }

    pub fn case(self) -> DimensionCase {
        match self.0 {
            2 => DimensionCase::Two,
            3 => DimensionCase::Three,
            4 => DimensionCase::Four,
            _ => DimensionCase::AboveFour,
        }
    }

    /// Exponent 4 − n of the kernel singularity.
    #[inline]
    pub(crate) fn singular_exponent(self) -> i32 {
        4 - self.0 as i32
    }
}

impl TryFrom<usize> for Dimension {
    type Error = crate::Error;
    fn try_from(n: usize) -> Result<Self> {
        Dimension::new(n)
    }
}

impl From<Dimension> for usize {
    fn from(d: Dimension) -> usize {
        d.0
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Volume of the unit ball in ℝⁿ, π^{n/2} / Γ(n/2 + 1).
///
/// Evaluated through the exact two-step recurrence e_n = e_{n−2}·2π/n, which
/// reproduces the Gamma-function formula without a special-function call.
pub fn unit_ball_volume(n: usize) -> f64 {
    let (mut v, start) = if n.is_multiple_of(2) { (1.0, 2) } else { (2.0, 3) };
    let mut k = start;
    while k <= n {
        v *= 2.0 * PI / k as f64;
        k += 2;
    }
    v
}

/// Prefactor 1/(4 n e_n) shared by the half-space and ball kernels.
#[inline]
pub fn boggio_prefactor(n: Dimension) -> f64 {
    let n = n.get();
    1.0 / (4.0 * n as f64 * unit_ball_volume(n))
}

/// Radial fundamental solution F of Δ²F = δ in ℝⁿ.
///
/// * n = 2: r² log r / (8π)
/// * n = 4: −log r / (8π²)
/// * otherwise: r^{4−n} / (2 (n−4)(n−2) n e_n)
pub fn fundamental_solution(n: Dimension, r: f64) -> Result<f64> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(invalid(format!("fundamental solution needs r > 0, got {r}")));
    }
    let value = match n.case() {
        DimensionCase::Two => r * r * r.ln() / (8.0 * PI),
        DimensionCase::Four => -r.ln() / (8.0 * PI * PI),
        _ => {
            let m = n.get() as f64;
            let c = 1.0 / (2.0 * (m - 4.0) * (m - 2.0) * m * unit_ball_volume(n.get()));
            c * r.powi(n.singular_exponent())
        }
    };
    Ok(value)
}

pub(crate) fn check_point(n: Dimension, p: &[f64], name: &str) -> Result<()> {
    if p.len() != n.get() {
        return Err(invalid(format!("{name} has {} coordinates, expected n = {n}", p.len())));
    }
    if p.iter().any(|c| !c.is_finite()) {
        return Err(invalid(format!("{name} has non-finite coordinates")));
    }
    Ok(())
}
