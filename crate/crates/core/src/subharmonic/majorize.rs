use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `l(z) = a0 + b0 |z - center| + c0 |z - center|^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeQuadratic {
    pub a0: f64,
    pub b0: f64,
    pub c0: f64,
    pub center: Vec<f64>,
}

impl ConeQuadratic {
    pub fn new(a0: f64, b0: f64, c0: f64, center: Vec<f64>) -> Result<Self> {
        if !(b0 >= 0.0 && c0 >= 0.0) || !a0.is_finite() || !b0.is_finite() || !c0.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "cone-quadratic needs finite a0 and b0, c0 >= 0 (got {a0}, {b0}, {c0})"
            )));
        }
        Ok(Self { a0, b0, c0, center })
    }

    /// Value at distance `r` from the center.
    pub fn at_radius(&self, r: f64) -> f64 {
        self.a0 + self.b0 * r + self.c0 * r * r
    }
}

/// `q(z) = d0 + e0 |z - center|^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PureQuadratic {
    pub d0: f64,
    pub e0: f64,
    pub center: Vec<f64>,
}

impl PureQuadratic {
    pub fn at_radius(&self, r: f64) -> f64 {
        self.d0 + self.e0 * r * r
    }
}

/// A purely quadratic majorant together with its exact slack.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Majorization {
    pub q: PureQuadratic,
    pub eta: f64,
    /// `min_{r >= 0} q - l`.
    pub min_slack: f64,
    /// Distance from the center where the minimum slack is attained.
    pub argmin_radius: f64,
    /// `q(center) - l(center)`, at most `eps`.
    pub center_gap: f64,
}

/// With `eta = max(b0^2 / (2 eps), eps)`, takes `d0 = a0 + eps/2 + b0^2 / (4 eta)`
/// and `e0 = c0 + eta`. Then `q - l = eps/2 + eta (r - b0/(2 eta))^2 >= eps/2`
/// and `q(center) - l(center) = eps/2 + b0^2/(4 eta) <= eps`.
pub fn majorize_cone_quadratic(l: &ConeQuadratic, eps: f64) -> Result<Majorization> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    let eta = (l.b0 * l.b0 / (2.0 * eps)).max(eps);
    let d0 = l.a0 + 0.5 * eps + l.b0 * l.b0 / (4.0 * eta);
    let e0 = l.c0 + eta;
    let argmin_radius = l.b0 / (2.0 * eta);
    let q = PureQuadratic {
        d0,
        e0,
        center: l.center.clone(),
    };
    let min_slack = q.at_radius(argmin_radius) - l.at_radius(argmin_radius);
    let center_gap = d0 - l.a0;
    Ok(Majorization {
        q,
        eta,
        min_slack,
        argmin_radius,
        center_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn worked_examples() {
        let m = majorize_cone_quadratic(&ConeQuadratic::new(1.0, 0.0, 2.0, vec![0.0]).unwrap(), 0.1).unwrap();
        assert!(close(m.q.d0, 1.05) && close(m.q.e0, 2.1));
        assert!(m.center_gap <= 0.1);

        let m = majorize_cone_quadratic(&ConeQuadratic::new(0.0, 1.0, 0.0, vec![0.0]).unwrap(), 0.5).unwrap();
        assert!(close(m.eta, 1.0) && close(m.q.d0, 0.5) && close(m.q.e0, 1.0));
        assert!(close(m.argmin_radius, 0.5) && close(m.min_slack, 0.25));

        let eps = 0.3;
        let m = majorize_cone_quadratic(&ConeQuadratic::new(0.0, 0.0, 0.0, vec![1.0, 2.0]).unwrap(), eps).unwrap();
        assert!(close(m.q.d0, eps / 2.0) && close(m.q.e0, eps));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ConeQuadratic::new(0.0, -1.0, 0.0, vec![0.0]).is_err());
        let l = ConeQuadratic::new(0.0, 1.0, 1.0, vec![0.0]).unwrap();
        assert!(majorize_cone_quadratic(&l, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn dominates_everywhere(a0 in -10.0f64..10.0, b0 in 0.0f64..10.0, c0 in 0.0f64..10.0, eps in 1e-3f64..5.0) {
            let l = ConeQuadratic::new(a0, b0, c0, vec![0.0]).unwrap();
            let m = majorize_cone_quadratic(&l, eps).unwrap();
            prop_assert!(m.q.e0 > 0.0);
            prop_assert!(m.min_slack >= 0.0);
            prop_assert!((m.min_slack - eps / 2.0).abs() <= 1e-9 * (1.0 + a0.abs() + b0 * b0 / eps));
            prop_assert!(m.center_gap <= eps * (1.0 + 1e-12));
            for k in 0..=200 {
                let r = 10.0 * k as f64 / 200.0;
                prop_assert!(m.q.at_radius(r) - l.at_radius(r) >= -1e-9 * (1.0 + l.at_radius(r).abs()));
            }
        }
    }
}
