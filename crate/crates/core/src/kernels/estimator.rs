use super::{Dimension, DimensionCase};
use crate::error::{invalid, Result};
use serde::{Deserialize, Serialize};

/// Arguments of the comparison function `H`: boundary distances of both
/// points and their mutual distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HInput {
    pub n: Dimension,
    pub dx: f64,
    pub dy: f64,
    pub r: f64,
}

impl HInput {
    pub fn new(n: Dimension, dx: f64, dy: f64, r: f64) -> Result<Self> {
        for (name, v) in [("dx", dx), ("dy", dy), ("r", r)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(invalid(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(HInput { n, dx, dy, r })
    }
}

/// `H(x,y)` from boundary distances and pair distance:
///
/// * n > 4: `r^{4−n} min{1, dx²dy²/r⁴}`
/// * n = 4: `log(1 + dx²dy²/r⁴)`
/// * n = 2, 3: `(dx dy)^{2−n/2} min{1, (dx dy)^{n/2}/rⁿ}`
///
/// Returns the r → 0 limit on the diagonal, which is `+∞` for n ≥ 4.
pub fn h_estimate(h: &HInput) -> f64 {
    let p = h.dx * h.dy;
    if p == 0.0 {
        return 0.0;
    }
    let r = h.r;
    match h.n.case() {
        DimensionCase::Two => {
            if r == 0.0 {
                p
            } else {
                p * (p / (r * r)).min(1.0)
            }
        }
        DimensionCase::Three => {
            let root = p.sqrt();
            if r == 0.0 {
                root
            } else {
                root * (p * root / (r * r * r)).min(1.0)
            }
        }
        DimensionCase::Four => {
            if r == 0.0 {
                f64::INFINITY
            } else {
                (p * p / r.powi(4)).ln_1p()
            }
        }
        DimensionCase::AboveFour => {
            if r == 0.0 {
                f64::INFINITY
            } else {
                r.powi(h.n.singular_exponent()) * (p * p / r.powi(4)).min(1.0)
            }
        }
    }
}

/// `H` evaluated through its case split: Case I (`dx dy ≤ r²`) gives
/// `r^{−n} dx²dy²` (log form for n = 4), Case II gives `r^{4−n}`,
/// the log form, or `(dx dy)^{2−n/2}`.
pub fn h_case_form(h: &HInput) -> f64 {
    let p = h.dx * h.dy;
    if p == 0.0 {
        return 0.0;
    }
    let r = h.r;
    let n = h.n;
    if p <= r * r {
        return match n.case() {
            DimensionCase::Four => (p * p / r.powi(4)).ln_1p(),
            _ => p * p / r.powi(n.get() as i32),
        };
    }
    match n.case() {
        DimensionCase::AboveFour => {
            if r == 0.0 {
                f64::INFINITY
            } else {
                r.powi(n.singular_exponent())
            }
        }
        DimensionCase::Four => {
            if r == 0.0 {
                f64::INFINITY
            } else {
                (p * p / r.powi(4)).ln_1p()
            }
        }
        DimensionCase::Three => p.sqrt(),
        DimensionCase::Two => p,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn input(n: usize, dx: f64, dy: f64, r: f64) -> HInput {
        HInput::new(Dimension::new(n).unwrap(), dx, dy, r).unwrap()
    }

    #[test]
    fn estimate_examples() {
        assert_eq!(h_estimate(&input(5, 1.0, 1.0, 2.0)), 1.0 / 32.0);
        assert!((h_estimate(&input(4, 1.0, 1.0, 1.0)) - 2f64.ln()).abs() < 1e-16);
        assert_eq!(h_estimate(&input(2, 0.3, 0.3, 0.0)), 0.3 * 0.3);
        assert_eq!(h_estimate(&input(3, 0.0, 0.7, 0.2)), 0.0);
        assert_eq!(h_estimate(&input(4, 0.5, 0.5, 0.0)), f64::INFINITY);
        assert_eq!(h_estimate(&input(6, 0.5, 0.5, 0.0)), f64::INFINITY);
        assert!((h_estimate(&input(3, 0.25, 0.25, 0.0)) - 0.25).abs() < 1e-16);
    }

    #[test]
    fn case_form_examples() {
        assert_eq!(h_case_form(&input(5, 1.0, 1.0, 2.0)), 1.0 / 32.0);
        assert!((h_case_form(&input(3, 2.0, 2.0, 1.0)) - 2.0).abs() < 1e-15);
        // dx dy = r² exactly: both branches agree
        let h = input(2, 0.5, 0.5, 0.5);
        assert_eq!(h_case_form(&h), h_estimate(&h));
    }

    #[test]
    fn negative_inputs_rejected() {
        let n = Dimension::TWO;
        assert!(HInput::new(n, -0.1, 1.0, 1.0).is_err());
        assert!(HInput::new(n, 0.1, -1.0, 1.0).is_err());
        assert!(HInput::new(n, 0.1, 1.0, -1.0).is_err());
        assert!(HInput::new(n, f64::NAN, 1.0, 1.0).is_err());
    }

    #[test]
    fn symmetric_in_boundary_distances() {
        for n in 2..=7 {
            let a = input(n, 0.2, 0.7, 0.4);
            let b = input(n, 0.7, 0.2, 0.4);
            assert_eq!(h_estimate(&a), h_estimate(&b));
        }
    }
}
