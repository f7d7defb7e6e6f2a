//! Market parameters and the three preset games.

use std::fmt;
use std::str::FromStr;

use crate::error::{GameError, Result};
use crate::model::{
    base_premium, ClaimModel, ControlSet, ExitPayoff, GameSpec, Insurer, PayoffSpec,
    PremiumModel, PremiumPrinciple, RetentionKind, RunningPayoff,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    /// Proportional cover, variance principle, exponential claims on `[-4, 4]`.
    PropVarExp,
    /// Excess of loss, expectation principle, exponential claims on `[-2, 2]`.
    XlExpExp,
    /// Excess of loss, expectation principle, Pareto II claims on `[-2, 2]`.
    XlExpPareto,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::PropVarExp, Scenario::XlExpExp, Scenario::XlExpPareto];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::PropVarExp => "prop-var-exp",
            Scenario::XlExpExp => "xl-exp-exp",
            Scenario::XlExpPareto => "xl-exp-pareto",
        }
    }

    pub fn params(self) -> MarketParams {
        let exp1 = ClaimModel::Exponential { mean: 1.0 };
        let exp2 = ClaimModel::Exponential { mean: 2.0 };
        let common = MarketParams {
            lower: -4.0,
            upper: 4.0,
            discount: 0.05,
            intensity: [1.0, 1.0],
            claims: [exp1, exp2],
            loading: [0.1, 0.08],
            reinsurance_loading: [0.12, 0.12],
            retention: RetentionKind::Proportional,
            base_rate: [None, None],
            retention_cap: [None, None],
            running: RunningPayoff::Constant(0.0),
            exit: ExitPayoff::UpperIndicator,
        };
        match self {
            Scenario::PropVarExp => common,
            Scenario::XlExpExp => MarketParams {
                lower: -2.0,
                upper: 2.0,
                retention: RetentionKind::ExcessOfLoss,
                ..common
            },
            Scenario::XlExpPareto => {
                let pareto = ClaimModel::ParetoII { shape: 3.0, scale: 1.0 };
                MarketParams {
                    lower: -2.0,
                    upper: 2.0,
                    retention: RetentionKind::ExcessOfLoss,
                    claims: [pareto, pareto],
                    ..common
                }
            }
        }
    }

    pub fn game_spec(self) -> GameSpec {
        self.params().build().expect("preset parameters are valid")
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = GameError;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| GameError::InvalidSpec(format!("unknown scenario '{s}'")))
    }
}

/// Flat parameter set from which a [`GameSpec`] is assembled.
///
/// The base premium of insurer `i` is `λ_i(1+η_i)E[Y_i]` unless `base_rate[i]`
/// overrides it. The reinsurance premium principle follows the retention
/// type: variance principle for proportional cover, expectation principle for
/// excess of loss.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketParams {
    pub lower: f64,
    pub upper: f64,
    pub discount: f64,
    pub intensity: [f64; 2],
    pub claims: [ClaimModel; 2],
    pub loading: [f64; 2],
    pub reinsurance_loading: [f64; 2],
    pub retention: RetentionKind,
    pub base_rate: [Option<f64>; 2],
    /// Finite upper bound of an excess-of-loss control set; defaults to the
    /// `1 - 1e-6` claim quantile.
    pub retention_cap: [Option<f64>; 2],
    pub running: RunningPayoff,
    pub exit: ExitPayoff,
}

impl MarketParams {
    pub fn build(&self) -> Result<GameSpec> {
        let mut insurers = Vec::with_capacity(2);
        for i in 0..2 {
            let claims = match self.claims[i] {
                ClaimModel::Exponential { mean } => ClaimModel::exponential(mean)?,
                ClaimModel::ParetoII { shape, scale } => ClaimModel::pareto_ii(shape, scale)?,
            };
            let base = match self.base_rate[i] {
                Some(c) => c,
                None => base_premium(self.intensity[i], self.loading[i], claims.mean())?,
            };
            let (principle, controls) = match self.retention {
                RetentionKind::Proportional => (
                    PremiumPrinciple::VarianceOnProportional { loading: self.reinsurance_loading[i] },
                    ControlSet::proportional(),
                ),
                RetentionKind::ExcessOfLoss => {
                    let mut set = ControlSet::excess_of_loss(&claims);
                    if let Some(cap) = self.retention_cap[i] {
                        set.upper = cap;
                    }
                    (
                        PremiumPrinciple::ExpectationOnExcessOfLoss {
                            loading: self.reinsurance_loading[i],
                        },
                        set,
                    )
                }
            };
            let premium = PremiumModel::new(base, self.intensity[i], claims, principle)?;
            insurers.push(Insurer { premium, controls });
        }
        let insurers: [Insurer; 2] = insurers.try_into().expect("two insurers");
        GameSpec::new(
            self.lower,
            self.upper,
            self.retention,
            insurers,
            PayoffSpec { discount: self.discount, running: self.running.clone(), exit: self.exit.clone() },
        )
    }
}
