use crate::error::{GameError, Result};

/// Piecewise-linear function through `(xs[i], ys[i])`, constant beyond the
/// first and last knot.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.is_empty() || xs.len() != ys.len() {
            return Err(GameError::InvalidSpec(
                "table needs the same nonzero number of abscissae and values".into(),
            ));
        }
        if xs.iter().chain(&ys).any(|v| !v.is_finite()) {
            return Err(GameError::InvalidSpec("table entries must be finite".into()));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(GameError::InvalidSpec("table abscissae must be strictly increasing".into()));
        }
        Ok(Self { xs, ys })
    }

    pub fn knots(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.ys.iter().copied())
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let i = self.xs.partition_point(|&k| k <= x) - 1;
        let t = (x - self.xs[i]) / (self.xs[i + 1] - self.xs[i]);
        self.ys[i] + t * (self.ys[i + 1] - self.ys[i])
    }

    pub fn sup_abs(&self) -> f64 {
        self.ys.iter().fold(0.0f64, |m, y| m.max(y.abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.ys.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn lipschitz(&self) -> f64 {
        self.xs
            .windows(2)
            .zip(self.ys.windows(2))
            .map(|(x, y)| ((y[1] - y[0]) / (x[1] - x[0])).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_nondecreasing(&self) -> bool {
        self.ys.windows(2).all(|w| w[1] >= w[0])
    }
}

/// Running payoff ζ on `[a, b]`, paid per unit time while the game lasts.
#[derive(Debug, Clone, PartialEq)]
pub enum RunningPayoff {
    Constant(f64),
    Table(PiecewiseLinear),
}

impl RunningPayoff {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            RunningPayoff::Constant(c) => *c,
            RunningPayoff::Table(t) => t.eval(x),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        match self {
            RunningPayoff::Constant(c) => c.abs(),
            RunningPayoff::Table(t) => t.sup_abs(),
        }
    }
}

/// Exit payoff `h`, applied to the state at the exit time.
#[derive(Debug, Clone, PartialEq)]
pub enum ExitPayoff {
    /// `h(x) = 1{x >= b}` with `b` the upper end of the game interval.
    UpperIndicator,
    Constant(f64),
    Table(PiecewiseLinear),
}

impl ExitPayoff {
    /// Evaluates `h(x)` for the game interval with upper end `upper`.
    pub fn eval(&self, x: f64, upper: f64) -> f64 {
        match self {
            ExitPayoff::UpperIndicator => {
                if x >= upper {
                    1.0
                } else {
                    0.0
                }
            }
            ExitPayoff::Constant(c) => *c,
            ExitPayoff::Table(t) => t.eval(x),
        }
    }

    pub fn sup_abs(&self) -> f64 {
        match self {
            ExitPayoff::UpperIndicator => 1.0,
            ExitPayoff::Constant(c) => c.abs(),
            ExitPayoff::Table(t) => t.sup_abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PayoffSpec {
    pub discount: f64,
    pub running: RunningPayoff,
    pub exit: ExitPayoff,
}

impl PayoffSpec {
    /// The functional `E[e^{-δτ} 1{X_τ >= b}]`.
    pub fn upper_exit_test(discount: f64) -> Self {
        Self {
            discount,
            running: RunningPayoff::Constant(0.0),
            exit: ExitPayoff::UpperIndicator,
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.discount.is_finite() && self.discount > 0.0) {
            return Err(GameError::InvalidSpec(format!(
                "discount rate must be positive, got {}",
                self.discount
            )));
        }
        match &self.running {
            RunningPayoff::Constant(c) if !(c.is_finite() && *c >= 0.0) => {
                return Err(GameError::InvalidSpec(format!(
                    "running payoff must be nonnegative, got {c}"
                )))
            }
            RunningPayoff::Table(t) if t.min_value() < 0.0 => {
                return Err(GameError::InvalidSpec("running payoff must be nonnegative".into()))
            }
            _ => {}
        }
        match &self.exit {
            ExitPayoff::UpperIndicator => {
                log::debug!("exit payoff 1{{x >= b}} is not Lipschitz at b; Lipschitz check skipped");
            }
            ExitPayoff::Constant(c) if !c.is_finite() => {
                return Err(GameError::InvalidSpec("exit payoff must be finite".into()))
            }
            ExitPayoff::Table(t) if !t.is_nondecreasing() => {
                return Err(GameError::InvalidSpec("exit payoff must be nondecreasing".into()))
            }
            _ => {}
        }
        Ok(())
    }

    /// `‖ζ‖∞/δ + sup|h|`, the a-priori bound on every value function.
    pub fn value_bound(&self) -> f64 {
        self.running.sup_norm() / self.discount + self.exit.sup_abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_interpolates_and_extrapolates_flat() {
        let t = PiecewiseLinear::new(vec![0.0, 1.0, 3.0], vec![0.0, 2.0, 3.0]).unwrap();
        assert_eq!(t.eval(-5.0), 0.0);
        assert_eq!(t.eval(0.5), 1.0);
        assert_eq!(t.eval(2.0), 2.5);
        assert_eq!(t.eval(9.0), 3.0);
        assert_eq!(t.lipschitz(), 2.0);
        assert!(t.is_nondecreasing());
    }

    #[test]
    fn table_validation() {
        assert!(PiecewiseLinear::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(PiecewiseLinear::new(vec![0.0], vec![]).is_err());
        assert!(PiecewiseLinear::new(vec![0.0, f64::NAN], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn indicator_payoff() {
        let h = ExitPayoff::UpperIndicator;
        assert_eq!(h.eval(4.0, 4.0), 1.0);
        assert_eq!(h.eval(3.99, 4.0), 0.0);
        assert_eq!(h.eval(-5.0, 4.0), 0.0);
    }

    #[test]
    fn payoff_validation() {
        let mut p = PayoffSpec::upper_exit_test(0.05);
        assert!(p.validate().is_ok());
        assert_eq!(p.value_bound(), 1.0);
        p.running = RunningPayoff::Constant(-1.0);
        assert!(p.validate().is_err());
        p.running = RunningPayoff::Constant(0.1);
        p.exit = ExitPayoff::Table(PiecewiseLinear::new(vec![0.0, 1.0], vec![1.0, 0.0]).unwrap());
        assert!(p.validate().is_err());
        p.exit = ExitPayoff::Constant(2.0);
        p.discount = 0.0;
        assert!(p.validate().is_err());
        p.discount = 0.1;
        assert!((p.value_bound() - 3.0).abs() < 1e-15);
    }
}
