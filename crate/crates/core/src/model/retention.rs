use crate::error::{GameError, Result};

/// Reinsurance type shared by both players.
///
/// Controls are plain `f64`: the retained share `u ∈ [0, 1]` for proportional
/// cover, the retention level `M ∈ [0, ∞]` for excess of loss. `M = +inf` is
/// the "no reinsurance" control.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RetentionKind {
    Proportional,
    ExcessOfLoss,
}

impl RetentionKind {
    /// Part of a claim `y` kept by the insurer under control `u`.
    pub fn retained(self, y: f64, u: f64) -> f64 {
        match self {
            RetentionKind::Proportional => y * u,
            RetentionKind::ExcessOfLoss => y.min(u),
        }
    }

    /// Smallest claim whose retained part reaches `z`: `inf { y >= 0 : r(y, u) >= z }`.
    /// `+inf` when no claim suffices.
    pub fn rho(self, z: f64, u: f64) -> f64 {
        if z <= 0.0 {
            return 0.0;
        }
        match self {
            RetentionKind::Proportional => {
                if u <= 0.0 {
                    f64::INFINITY
                } else {
                    z / u
                }
            }
            RetentionKind::ExcessOfLoss => {
                if z <= u {
                    z
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    pub fn no_reinsurance(self) -> f64 {
        match self {
            RetentionKind::Proportional => 1.0,
            RetentionKind::ExcessOfLoss => f64::INFINITY,
        }
    }

    pub fn check_control(self, u: f64) -> Result<()> {
        let ok = match self {
            RetentionKind::Proportional => (0.0..=1.0).contains(&u),
            RetentionKind::ExcessOfLoss => u >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(GameError::Domain(format!("control {u} is not admissible for {self:?}")))
        }
    }
}
