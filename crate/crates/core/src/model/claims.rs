//! Claim-size distributions.
//!
//! Every quantity the solver needs from a claim law has a closed form here,
//! from the survival function up to the stop-loss transform. The jump kernels integrate the piecewise-linear value table
//! exactly against these, so no tail truncation is involved.

use crate::error::{GameError, Result};

/// Claim-size distribution of one insurer. Both laws have `F(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClaimModel {
    /// Exponential with the given mean.
    Exponential { mean: f64 },
    /// Pareto type II (Lomax): `S(y) = (1 + y/scale)^(-shape)`.
    ParetoII { shape: f64, scale: f64 },
}

impl ClaimModel {
    pub fn exponential(mean: f64) -> Result<Self> {
        if !(mean.is_finite() && mean > 0.0) {
            return Err(GameError::InvalidSpec(format!(
                "exponential claim mean must be positive and finite, got {mean}"
            )));
        }
        Ok(ClaimModel::Exponential { mean })
    }

    /// Pareto II requires `shape > 1` so that the mean exists.
    pub fn pareto_ii(shape: f64, scale: f64) -> Result<Self> {
        if !(shape.is_finite() && shape > 1.0) {
            return Err(GameError::InvalidSpec(format!(
                "Pareto II shape must exceed 1 (finite mean), got {shape}"
            )));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(GameError::InvalidSpec(format!(
                "Pareto II scale must be positive and finite, got {scale}"
            )));
        }
        Ok(ClaimModel::ParetoII { shape, scale })
    }

    pub fn cdf(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        match *self {
            ClaimModel::Exponential { mean } => -(-y / mean).exp_m1(),
            ClaimModel::ParetoII { shape, scale } => -(-shape * (y / scale).ln_1p()).exp_m1(),
        }
    }

    /// `P(Y > y)`.
    pub fn survival(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 1.0;
        }
        match *self {
            ClaimModel::Exponential { mean } => (-y / mean).exp(),
            ClaimModel::ParetoII { shape, scale } => (-shape * (y / scale).ln_1p()).exp(),
        }
    }

    pub fn density(&self, y: f64) -> f64 {
        if y < 0.0 {
            return 0.0;
        }
        match *self {
            ClaimModel::Exponential { mean } => (-y / mean).exp() / mean,
            ClaimModel::ParetoII { shape, scale } => {
                shape / scale * (-(shape + 1.0) * (y / scale).ln_1p()).exp()
            }
        }
    }

    /// Inverse CDF on `[0, 1)`.
    pub fn inverse_cdf(&self, p: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&p) {
            return Err(GameError::Domain(format!(
                "inverse CDF argument must lie in [0, 1), got {p}"
            )));
        }
        Ok(match *self {
            ClaimModel::Exponential { mean } => -mean * (-p).ln_1p(),
            ClaimModel::ParetoII { shape, scale } => scale * (-(-p).ln_1p() / shape).exp_m1(),
        })
    }

    /// Inverse of the survival function on `(0, 1]`; `q = 0` maps to `+inf`.
    pub fn inverse_survival(&self, q: f64) -> f64 {
        if q <= 0.0 {
            return f64::INFINITY;
        }
        if q >= 1.0 {
            return 0.0;
        }
        match *self {
            ClaimModel::Exponential { mean } => -mean * q.ln(),
            ClaimModel::ParetoII { shape, scale } => scale * (-q.ln() / shape).exp_m1(),
        }
    }

    /// Draws a claim by inversion from a uniform `p ∈ [0, 1)`.
    pub fn sample(&self, p: f64) -> Result<f64> {
        self.inverse_cdf(p)
    }

    pub fn mean(&self) -> f64 {
        match *self {
            ClaimModel::Exponential { mean } => mean,
            ClaimModel::ParetoII { shape, scale } => scale / (shape - 1.0),
        }
    }

    /// Variance; infinite for Pareto II with `shape <= 2`.
    pub fn variance(&self) -> f64 {
        match *self {
            ClaimModel::Exponential { mean } => mean * mean,
            ClaimModel::ParetoII { shape, scale } => {
                if shape > 2.0 {
                    scale * scale * shape / ((shape - 1.0).powi(2) * (shape - 2.0))
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// `∫_{y0}^{y1} S(y) dy = E[min(Y, y1)] - E[min(Y, y0)]`, computed without
    /// subtracting two numbers close to the mean.
    pub fn integrated_survival(&self, y0: f64, y1: f64) -> f64 {
        let y0 = y0.max(0.0);
        if y1 <= y0 {
            return 0.0;
        }
        match *self {
            ClaimModel::Exponential { mean } => mean * (self.survival(y0) - self.survival(y1)),
            ClaimModel::ParetoII { shape, scale } => {
                let tail = |y: f64| {
                    if y.is_infinite() {
                        0.0
                    } else {
                        ((1.0 - shape) * (y / scale).ln_1p()).exp()
                    }
                };
                scale / (shape - 1.0) * (tail(y0) - tail(y1))
            }
        }
    }

    /// Limited expectation `E[min(Y, m)]`.
    pub fn limited_mean(&self, m: f64) -> f64 {
        self.integrated_survival(0.0, m)
    }

    /// Stop-loss transform `E[(Y - m)^+]`; zero for `m = +inf`.
    pub fn stop_loss(&self, m: f64) -> f64 {
        if m.is_infinite() {
            return 0.0;
        }
        self.integrated_survival(m, f64::INFINITY)
    }

    /// Claim level whose exceedance probability equals `eps`.
    pub fn tail_quantile(&self, eps: f64) -> f64 {
        self.inverse_survival(eps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn laws() -> Vec<ClaimModel> {
        vec![
            ClaimModel::exponential(1.0).unwrap(),
            ClaimModel::exponential(2.0).unwrap(),
            ClaimModel::pareto_ii(3.0, 1.0).unwrap(),
            ClaimModel::pareto_ii(1.5, 2.0).unwrap(),
        ]
    }

    #[test]
    fn inverse_cdf_examples() {
        let e1 = ClaimModel::exponential(1.0).unwrap();
        assert_eq!(e1.sample(0.0).unwrap(), 0.0);
        let e2 = ClaimModel::exponential(2.0).unwrap();
        let p = 1.0 - (-1.0f64).exp();
        assert!((e2.sample(p).unwrap() - 2.0).abs() < 1e-12);
        let par = ClaimModel::pareto_ii(3.0, 1.0).unwrap();
        assert_eq!(par.sample(0.0).unwrap(), 0.0);
    }

    #[test]
    fn rejects_out_of_range_uniform() {
        let e = ClaimModel::exponential(1.0).unwrap();
        assert!(e.sample(1.0).is_err());
        assert!(e.sample(-0.1).is_err());
        assert!(e.sample(f64::NAN).is_err());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(ClaimModel::exponential(0.0).is_err());
        assert!(ClaimModel::exponential(f64::INFINITY).is_err());
        assert!(ClaimModel::pareto_ii(1.0, 1.0).is_err());
        assert!(ClaimModel::pareto_ii(3.0, -1.0).is_err());
    }

    #[test]
    fn cdf_at_zero_and_means() {
        for law in laws() {
            assert_eq!(law.cdf(0.0), 0.0);
            assert!(law.mean().is_finite());
        }
        assert_eq!(ClaimModel::pareto_ii(3.0, 1.0).unwrap().mean(), 0.5);
    }

    #[test]
    fn limited_mean_matches_quadrature() {
        // midpoint rule on ∫_0^m S(y) dy
        for law in laws() {
            for &m in &[0.3, 1.0, 4.0] {
                let n = 200_000;
                let h = m / n as f64;
                let approx: f64 = (0..n).map(|i| law.survival((i as f64 + 0.5) * h) * h).sum();
                assert!((law.limited_mean(m) - approx).abs() < 1e-9, "{law:?} {m}");
            }
            assert!((law.limited_mean(f64::INFINITY) - law.mean()).abs() < 1e-12);
        }
    }

    #[test]
    fn stop_loss_closed_forms() {
        let e = ClaimModel::exponential(2.0).unwrap();
        assert!((e.stop_loss(1.0) - 2.0 * (-0.5f64).exp()).abs() < 1e-14);
        let p = ClaimModel::pareto_ii(3.0, 1.0).unwrap();
        assert!((p.stop_loss(0.0) - 0.5).abs() < 1e-14);
        assert!((p.stop_loss(1.0) - 0.5 * 0.25).abs() < 1e-14);
        assert_eq!(p.stop_loss(f64::INFINITY), 0.0);
    }

    proptest! {
        #[test]
        fn cdf_inverts_inverse_cdf(p in 0.0f64..0.999_999) {
            for law in laws() {
                let y = law.inverse_cdf(p).unwrap();
                prop_assert!((law.cdf(y) - p).abs() < 1e-12);
            }
        }

        #[test]
        fn cdf_is_monotone(y in 0.0f64..50.0, dy in 0.0f64..5.0) {
            for law in laws() {
                prop_assert!(law.cdf(y + dy) >= law.cdf(y));
                prop_assert!((law.cdf(y) + law.survival(y) - 1.0).abs() < 1e-14);
            }
        }
    }
}
