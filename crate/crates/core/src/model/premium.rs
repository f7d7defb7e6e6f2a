use super::claims::ClaimModel;
use crate::error::{GameError, Result};

/// Expected-value premium `λ(1+η)μ` collected without reinsurance.
pub fn base_premium(intensity: f64, loading: f64, mean_claim: f64) -> Result<f64> {
    if !(intensity > 0.0 && mean_claim > 0.0) || loading.is_nan() || loading < 0.0 {
        return Err(GameError::InvalidSpec(format!(
            "base premium needs positive intensity and mean and a nonnegative loading \
             (got λ={intensity}, η={loading}, μ={mean_claim})"
        )));
    }
    Ok(intensity * (1.0 + loading) * mean_claim)
}

/// How the reinsurer prices the ceded part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PremiumPrinciple {
    /// Variance principle on the ceded share `(1-u)Y` of proportional cover.
    VarianceOnProportional { loading: f64 },
    /// Expectation principle on the ceded layer `(Y-M)^+` of excess-of-loss cover.
    ExpectationOnExcessOfLoss { loading: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PremiumModel {
    pub base_rate: f64,
    pub intensity: f64,
    pub claims: ClaimModel,
    pub principle: PremiumPrinciple,
}

impl PremiumModel {
    pub fn new(
        base_rate: f64,
        intensity: f64,
        claims: ClaimModel,
        principle: PremiumPrinciple,
    ) -> Result<Self> {
        if !base_rate.is_finite() {
            return Err(GameError::InvalidSpec(format!("base rate must be finite, got {base_rate}")));
        }
        if !(intensity.is_finite() && intensity > 0.0) {
            return Err(GameError::InvalidSpec(format!(
                "claim intensity must be positive and finite, got {intensity}"
            )));
        }
        let loading = match principle {
            PremiumPrinciple::VarianceOnProportional { loading } => {
                if !claims.variance().is_finite() {
                    return Err(GameError::InvalidSpec(
                        "variance principle needs claims with finite variance".into(),
                    ));
                }
                loading
            }
            PremiumPrinciple::ExpectationOnExcessOfLoss { loading } => loading,
        };
        if !(loading.is_finite() && loading >= 0.0) {
            return Err(GameError::InvalidSpec(format!(
                "reinsurance loading must be nonnegative, got {loading}"
            )));
        }
        Ok(Self { base_rate, intensity, claims, principle })
    }

    /// Premium income net of the reinsurance premium under control `u`.
    pub fn net_rate(&self, u: f64) -> Result<f64> {
        match self.principle {
            PremiumPrinciple::VarianceOnProportional { loading } => {
                if !(0.0..=1.0).contains(&u) {
                    return Err(GameError::Domain(format!(
                        "proportional control must lie in [0, 1], got {u}"
                    )));
                }
                let ceded = 1.0 - u;
                let mean = self.claims.mean();
                let var = self.claims.variance();
                Ok(self.base_rate - self.intensity * (mean * ceded + loading * var * ceded * ceded))
            }
            PremiumPrinciple::ExpectationOnExcessOfLoss { loading } => {
                if u.is_nan() || u < 0.0 {
                    return Err(GameError::Domain(format!(
                        "retention level must be nonnegative, got {u}"
                    )));
                }
                Ok(self.base_rate
                    - self.intensity * (1.0 + loading) * self.claims.stop_loss(u))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prop_player1() -> PremiumModel {
        let claims = ClaimModel::exponential(1.0).unwrap();
        PremiumModel::new(
            base_premium(1.0, 0.1, 1.0).unwrap(),
            1.0,
            claims,
            PremiumPrinciple::VarianceOnProportional { loading: 0.12 },
        )
        .unwrap()
    }

    #[test]
    fn base_premium_examples() {
        assert!((base_premium(1.0, 0.1, 1.0).unwrap() - 1.1).abs() < 1e-15);
        assert!((base_premium(1.0, 0.08, 2.0).unwrap() - 2.16).abs() < 1e-15);
        assert_eq!(base_premium(3.0, 0.0, 0.5).unwrap(), 1.5);
        assert!(base_premium(0.0, 0.1, 1.0).is_err());
        assert!(base_premium(1.0, -0.1, 1.0).is_err());
        assert!(base_premium(1.0, 0.1, -1.0).is_err());
    }

    #[test]
    fn variance_principle_examples() {
        let p = prop_player1();
        assert!((p.net_rate(1.0).unwrap() - 1.1).abs() < 1e-15);
        assert!((p.net_rate(0.0).unwrap() - (-0.02)).abs() < 1e-14);
        assert!(p.net_rate(1.5).is_err());
    }

    #[test]
    fn expectation_principle_pareto_example() {
        let claims = ClaimModel::pareto_ii(3.0, 1.0).unwrap();
        let p = PremiumModel::new(
            1.1,
            1.0,
            claims,
            PremiumPrinciple::ExpectationOnExcessOfLoss { loading: 0.12 },
        )
        .unwrap();
        assert!((p.net_rate(0.0).unwrap() - 0.54).abs() < 1e-14);
        assert_eq!(p.net_rate(f64::INFINITY).unwrap(), 1.1);
        assert!(p.net_rate(-1.0).is_err());
    }

    #[test]
    fn net_rate_is_monotone() {
        let p = prop_player1();
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=100 {
            let r = p.net_rate(i as f64 / 100.0).unwrap();
            assert!(r >= prev);
            prev = r;
        }
        let xl = PremiumModel::new(
            2.16,
            1.0,
            ClaimModel::exponential(2.0).unwrap(),
            PremiumPrinciple::ExpectationOnExcessOfLoss { loading: 0.12 },
        )
        .unwrap();
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=300 {
            let r = xl.net_rate(i as f64 * 0.1).unwrap();
            assert!(r >= prev);
            prev = r;
        }
        assert!(xl.net_rate(f64::INFINITY).unwrap() >= prev);
    }

    #[test]
    fn variance_principle_rejects_infinite_variance() {
        let claims = ClaimModel::pareto_ii(1.5, 1.0).unwrap();
        assert!(PremiumModel::new(
            1.0,
            1.0,
            claims,
            PremiumPrinciple::VarianceOnProportional { loading: 0.1 }
        )
        .is_err());
    }
}
