//! Problem definition: market primitives and the validated game
//! specification built from them.

mod claims;
mod payoff;
mod premium;
mod retention;

pub use claims::ClaimModel;
pub use payoff::{ExitPayoff, PayoffSpec, PiecewiseLinear, RunningPayoff};
pub use premium::{base_premium, PremiumModel, PremiumPrinciple};
pub use retention::RetentionKind;

use crate::error::{GameError, Result};

/// Tail probability defining the truncation level of an excess-of-loss control set.
pub const RETENTION_TAIL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Player {
    /// The maximizer; its claims push the state down.
    One,
    /// The minimizer; its claims push the state up.
    Two,
}

impl Player {
    pub fn index(self) -> usize {
        match self {
            Player::One => 0,
            Player::Two => 1,
        }
    }
}

/// Closed control interval `[lower, upper]`, optionally joined with the
/// unbounded "no reinsurance" retention `+inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlSet {
    pub lower: f64,
    pub upper: f64,
    pub unbounded: bool,
}

impl ControlSet {
    pub fn interval(lower: f64, upper: f64) -> Self {
        Self { lower, upper, unbounded: false }
    }

    pub fn point(u: f64) -> Self {
        if u.is_infinite() {
            Self { lower: u, upper: u, unbounded: true }
        } else {
            Self::interval(u, u)
        }
    }

    /// `[0, 1]` for proportional cover.
    pub fn proportional() -> Self {
        Self::interval(0.0, 1.0)
    }

    /// `[0, M_max] ∪ {∞}` where `M_max` leaves tail mass below [`RETENTION_TAIL`].
    pub fn excess_of_loss(claims: &ClaimModel) -> Self {
        Self { lower: 0.0, upper: claims.tail_quantile(RETENTION_TAIL), unbounded: true }
    }

    pub fn contains(&self, u: f64) -> bool {
        (u >= self.lower && u <= self.upper) || (self.unbounded && u == f64::INFINITY)
    }

    /// `m` equally spaced points covering `[lower, upper]` (one point if the
    /// interval is degenerate), followed by `+inf` when it belongs to the set.
    pub fn discretize(&self, m: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(m + 1);
        if self.lower.is_finite() {
            if self.upper == self.lower || m <= 1 {
                out.push(self.lower);
            } else {
                let step = (self.upper - self.lower) / (m - 1) as f64;
                out.extend((0..m - 1).map(|i| self.lower + i as f64 * step));
                out.push(self.upper);
            }
        }
        if self.unbounded {
            out.push(f64::INFINITY);
        }
        out
    }

    /// The no-reinsurance control, or the closest admissible one.
    pub fn no_reinsurance(&self, kind: RetentionKind) -> f64 {
        let ideal = kind.no_reinsurance();
        if self.contains(ideal) {
            ideal
        } else {
            self.upper
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Insurer {
    pub premium: PremiumModel,
    pub controls: ControlSet,
}

impl Insurer {
    pub fn intensity(&self) -> f64 {
        self.premium.intensity
    }

    pub fn claims(&self) -> &ClaimModel {
        &self.premium.claims
    }
}

/// A fully specified game on the interval `[lower, upper]` of the surplus difference.
#[derive(Debug, Clone, PartialEq)]
pub struct GameSpec {
    pub lower: f64,
    pub upper: f64,
    pub retention: RetentionKind,
    pub insurers: [Insurer; 2],
    pub payoff: PayoffSpec,
}

impl GameSpec {
    pub fn new(
        lower: f64,
        upper: f64,
        retention: RetentionKind,
        insurers: [Insurer; 2],
        payoff: PayoffSpec,
    ) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && lower < upper) {
            return Err(GameError::InvalidSpec(format!(
                "interval needs finite a < b, got [{lower}, {upper}]"
            )));
        }
        for (i, ins) in insurers.iter().enumerate() {
            let c = ins.controls;
            if c.lower.is_nan() || c.upper.is_nan() || c.lower > c.upper {
                return Err(GameError::InvalidSpec(format!("control set of player {} is empty", i + 1)));
            }
            if c.upper.is_infinite() && !c.lower.is_infinite() {
                return Err(GameError::InvalidSpec(format!(
                    "control set of player {} must have a finite upper bound (use the unbounded flag for +inf)",
                    i + 1
                )));
            }
            for u in [c.lower, c.upper] {
                retention.check_control(u).map_err(|_| {
                    GameError::InvalidSpec(format!(
                        "control set of player {} is not admissible for {retention:?}",
                        i + 1
                    ))
                })?;
            }
            if c.unbounded && retention != RetentionKind::ExcessOfLoss {
                return Err(GameError::InvalidSpec(
                    "an unbounded control only exists for excess-of-loss cover".into(),
                ));
            }
            let consistent = matches!(
                (retention, ins.premium.principle),
                (RetentionKind::Proportional, PremiumPrinciple::VarianceOnProportional { .. })
                    | (RetentionKind::ExcessOfLoss, PremiumPrinciple::ExpectationOnExcessOfLoss { .. })
            );
            if !consistent {
                return Err(GameError::InvalidSpec(format!(
                    "premium principle of player {} does not match {retention:?}",
                    i + 1
                )));
            }
        }
        payoff.validate()?;
        Ok(Self { lower, upper, retention, insurers, payoff })
    }

    pub fn insurer(&self, player: Player) -> &Insurer {
        &self.insurers[player.index()]
    }

    pub fn intensity(&self, player: Player) -> f64 {
        self.insurer(player).intensity()
    }

    pub fn total_intensity(&self) -> f64 {
        self.insurers[0].intensity() + self.insurers[1].intensity()
    }

    pub fn discount(&self) -> f64 {
        self.payoff.discount
    }

    /// Net premium rate of `player` under control `u ∈ A_player`.
    pub fn net_rate(&self, player: Player, u: f64) -> Result<f64> {
        let ins = self.insurer(player);
        if !ins.controls.contains(u) {
            return Err(GameError::Domain(format!(
                "control {u} outside the control set of {player:?}"
            )));
        }
        ins.premium.net_rate(u)
    }

    /// Drift `c₁(u₁) - c₂(u₂)` of the surplus difference.
    pub fn drift(&self, u1: f64, u2: f64) -> Result<f64> {
        Ok(self.net_rate(Player::One, u1)? - self.net_rate(Player::Two, u2)?)
    }

    pub fn exit_payoff(&self, x: f64) -> f64 {
        self.payoff.exit.eval(x, self.upper)
    }

    pub fn running_payoff(&self, x: f64) -> f64 {
        self.payoff.running.eval(x)
    }

    pub fn value_bound(&self) -> f64 {
        self.payoff.value_bound()
    }
}
