//! Jump kernels: the law of the retained claim of one player under one
//! control, projected onto the grid.
//!
//! For a grid point with `avail` whole cells between it and the boundary the
//! player's claims push towards, the staying part of the jump integral is
//! `Σ_o weight(o) · v(x ∓ o·Δx)`. Cell masses and first moments are exact, so
//! the integral of the piecewise-linear interpolant carries no quadrature
//! error. A jump whose retained part exactly reaches the boundary stays in
//! the table.

use super::grid::Grid;
use crate::error::Result;
use crate::model::{ClaimModel, ExitPayoff, GameSpec, Player, RetentionKind};
use crate::quadrature::GaussLegendre;

/// Direction in which a player's claims move the state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Player 1's claims lower the surplus difference.
    Down,
    /// Player 2's claims raise it.
    Up,
}

impl From<Player> for Side {
    fn from(p: Player) -> Self {
        match p {
            Player::One => Side::Down,
            Player::Two => Side::Up,
        }
    }
}

/// Retained claim `R = r(Y, u)`.
#[derive(Debug, Clone, Copy)]
enum RetainedLaw {
    /// `R = uY`, `u > 0`.
    Scaled { claims: ClaimModel, share: f64 },
    /// `R = min(Y, M)`, `M` possibly infinite.
    Capped { claims: ClaimModel, level: f64 },
    /// `R = 0`.
    Zero,
}

impl RetainedLaw {
    fn new(kind: RetentionKind, claims: ClaimModel, u: f64) -> Self {
        match kind {
            RetentionKind::Proportional if u <= 0.0 => RetainedLaw::Zero,
            RetentionKind::Proportional => RetainedLaw::Scaled { claims, share: u },
            RetentionKind::ExcessOfLoss if u <= 0.0 => RetainedLaw::Zero,
            RetentionKind::ExcessOfLoss => RetainedLaw::Capped { claims, level: u },
        }
    }

    /// `P(R > t)` for `t >= 0`.
    fn survival(&self, t: f64) -> f64 {
        match *self {
            RetainedLaw::Scaled { claims, share } => claims.survival(t / share),
            RetainedLaw::Capped { claims, level } => {
                if t < level {
                    claims.survival(t)
                } else {
                    0.0
                }
            }
            RetainedLaw::Zero => 0.0,
        }
    }

    /// End of the absolutely continuous part.
    fn continuous_end(&self) -> f64 {
        match *self {
            RetainedLaw::Scaled { .. } => f64::INFINITY,
            RetainedLaw::Capped { level, .. } => level,
            RetainedLaw::Zero => 0.0,
        }
    }

    /// Left limit of the survival function of the continuous part.
    fn continuous_survival(&self, t: f64) -> f64 {
        match *self {
            RetainedLaw::Scaled { claims, share } => claims.survival(t / share),
            RetainedLaw::Capped { claims, .. } => claims.survival(t),
            RetainedLaw::Zero => 0.0,
        }
    }

    /// `∫_{t0}^{t1} P(R > t) dt` on the continuous part.
    fn integrated_survival(&self, t0: f64, t1: f64) -> f64 {
        match *self {
            RetainedLaw::Scaled { claims, share } => {
                share * claims.integrated_survival(t0 / share, t1 / share)
            }
            RetainedLaw::Capped { claims, .. } => claims.integrated_survival(t0, t1),
            RetainedLaw::Zero => 0.0,
        }
    }

    fn atom(&self) -> Option<(f64, f64)> {
        match *self {
            RetainedLaw::Zero => Some((0.0, 1.0)),
            RetainedLaw::Capped { claims, level } if level.is_finite() => {
                let m = claims.survival(level);
                (m > 0.0).then_some((level, m))
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct JumpKernel {
    control: f64,
    side: Side,
    net_rate: f64,
    spacing: f64,
    /// `weights[o]` multiplies `v` at offset `o` when more than `o` cells are available.
    weights: Vec<f64>,
    /// First-moment share of each cell, carried by the far end of the cell.
    tilt: Vec<f64>,
    atom: Option<(f64, f64)>,
    /// `P(R > avail·Δx)` for `avail = 0..=cells`.
    exit_mass: Vec<f64>,
    /// Exit-payoff integral for `avail = 0..=cells`.
    exit_value: Vec<f64>,
}

impl JumpKernel {
    pub fn new(spec: &GameSpec, player: Player, control: f64, grid: &Grid) -> Result<Self> {
        let net_rate = spec.net_rate(player, control)?;
        let claims = *spec.insurer(player).claims();
        let law = RetainedLaw::new(spec.retention, claims, control);
        let side = Side::from(player);
        let h = grid.spacing();
        let cells = grid.cells();

        let end = law.continuous_end();
        let mut mass = vec![0.0; cells];
        let mut tilt = vec![0.0; cells];
        for j in 0..cells {
            let t0 = j as f64 * h;
            if t0 >= end {
                break;
            }
            let t1 = ((j + 1) as f64 * h).min(end);
            let s1 = law.continuous_survival(t1);
            let m = (law.continuous_survival(t0) - s1).max(0.0);
            let first = (law.integrated_survival(t0, t1) - (t1 - t0) * s1) / h;
            mass[j] = m;
            tilt[j] = first.clamp(0.0, m);
        }
        let weights = (0..cells)
            .map(|o| mass[o] - tilt[o] + if o > 0 { tilt[o - 1] } else { 0.0 })
            .collect();

        let exit_mass: Vec<f64> = (0..=cells).map(|k| law.survival(k as f64 * h)).collect();
        let exit_value = exit_values(spec, grid, side, &law, control, &exit_mass);

        Ok(Self { control, side, net_rate, spacing: h, weights, tilt, atom: law.atom(), exit_mass, exit_value })
    }

    pub fn control(&self) -> f64 {
        self.control
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn net_rate(&self) -> f64 {
        self.net_rate
    }

    /// Cells between grid point `k` and the boundary in this kernel's direction.
    pub fn available(&self, k: usize, cells: usize) -> usize {
        match self.side {
            Side::Down => k,
            Side::Up => cells - k,
        }
    }

    fn atom_split(&self, avail: usize) -> Option<(usize, f64, f64)> {
        let (at, m) = self.atom?;
        if at > avail as f64 * self.spacing {
            return None;
        }
        let pos = at / self.spacing;
        let q = (pos.floor() as usize).min(avail);
        let frac = if q == avail { 0.0 } else { (pos - q as f64).clamp(0.0, 1.0) };
        Some((q, frac, m))
    }

    /// `∫_{r(y,u) <= z} v(x ∓ r(y,u)) dF(y)` with `value_at(o) = v(x ∓ o·Δx)`.
    pub fn integrate<F: Fn(usize) -> f64>(&self, avail: usize, value_at: F) -> f64 {
        let mut acc = 0.0;
        if avail > 0 {
            for (o, w) in self.weights[..avail].iter().enumerate() {
                acc += w * value_at(o);
            }
            acc += self.tilt[avail - 1] * value_at(avail);
        }
        if let Some((q, frac, m)) = self.atom_split(avail) {
            acc += m * (1.0 - frac) * value_at(q);
            if frac > 0.0 {
                acc += m * frac * value_at(q + 1);
            }
        }
        acc
    }

    /// Staying part of the jump integral at grid point `k` of `v`.
    pub fn inner(&self, v: &[f64], k: usize) -> f64 {
        let cells = v.len() - 1;
        let avail = self.available(k, cells);
        match self.side {
            Side::Down => {
                let mut acc = 0.0;
                if avail > 0 {
                    // v[k - o] for o in 0..avail is the reversed slice v[1..=k]
                    for (w, x) in self.weights[..avail].iter().zip(v[1..=k].iter().rev()) {
                        acc += w * x;
                    }
                    acc += self.tilt[avail - 1] * v[k - avail];
                }
                if let Some((q, frac, m)) = self.atom_split(avail) {
                    acc += m * (1.0 - frac) * v[k - q];
                    if frac > 0.0 {
                        acc += m * frac * v[k - q - 1];
                    }
                }
                acc
            }
            Side::Up => {
                let mut acc = 0.0;
                if avail > 0 {
                    for (w, x) in self.weights[..avail].iter().zip(&v[k..k + avail]) {
                        acc += w * x;
                    }
                    acc += self.tilt[avail - 1] * v[k + avail];
                }
                if let Some((q, frac, m)) = self.atom_split(avail) {
                    acc += m * (1.0 - frac) * v[k + q];
                    if frac > 0.0 {
                        acc += m * frac * v[k + q + 1];
                    }
                }
                acc
            }
        }
    }

    /// Weight the staying integral puts on the starting point itself.
    pub fn self_weight(&self, avail: usize) -> f64 {
        let mut w = 0.0;
        if avail > 0 {
            w += self.weights[0];
        }
        if let Some((q, frac, m)) = self.atom_split(avail) {
            if q == 0 {
                w += m * (1.0 - frac);
            }
        }
        w
    }

    /// `P(r(Y,u) > z)` with `z = avail·Δx`.
    pub fn exit_mass(&self, avail: usize) -> f64 {
        self.exit_mass[avail]
    }

    /// `∫_{r(y,u) > z} h(x ∓ r(y,u)) dF(y)`.
    pub fn exit_value(&self, avail: usize) -> f64 {
        self.exit_value[avail]
    }
}

/// Panels and nodes of the composite rule used for tabulated exit payoffs.
const EXIT_PANELS: usize = 8;
const EXIT_NODES: usize = 8;

fn exit_values(
    spec: &GameSpec,
    grid: &Grid,
    side: Side,
    law: &RetainedLaw,
    control: f64,
    exit_mass: &[f64],
) -> Vec<f64> {
    let h = grid.spacing();
    match (&spec.payoff.exit, side) {
        (ExitPayoff::UpperIndicator, Side::Down) => vec![0.0; exit_mass.len()],
        (ExitPayoff::UpperIndicator, Side::Up) => exit_mass.to_vec(),
        (ExitPayoff::Constant(c), _) => exit_mass.iter().map(|m| c * m).collect(),
        (ExitPayoff::Table(table), _) => {
            // integrate in survival-probability space: R = r(S⁻¹(q), u) for q ∈ (0, P(R > z))
            let gl = GaussLegendre::new(EXIT_NODES);
            let claims = match *law {
                RetainedLaw::Scaled { claims, .. } | RetainedLaw::Capped { claims, .. } => claims,
                RetainedLaw::Zero => return vec![0.0; exit_mass.len()],
            };
            let landing = |avail: usize, r: f64| match side {
                Side::Down => spec.lower - (r - avail as f64 * h),
                Side::Up => spec.upper + (r - avail as f64 * h),
            };
            exit_mass
                .iter()
                .enumerate()
                .map(|(avail, &q_exit)| {
                    if q_exit <= 0.0 {
                        return 0.0;
                    }
                    let mut lo = 0.0;
                    let mut acc = 0.0;
                    if let Some((level, m)) = law.atom() {
                        // the atom sits at r = level > z, occupying q ∈ (0, m]
                        acc += m * spec.exit_payoff(landing(avail, level));
                        lo = m;
                    }
                    // split at the kinks of the table so every piece is smooth
                    let z = avail as f64 * h;
                    let mut cuts: Vec<f64> = table
                        .knots()
                        .filter_map(|(xk, _)| {
                            let r = match side {
                                Side::Down => spec.lower - xk + z,
                                Side::Up => xk - spec.upper + z,
                            };
                            (r > z).then(|| claims.survival(spec.retention.rho(r, control)))
                        })
                        .filter(|&q| q > lo && q < q_exit)
                        .collect();
                    cuts.push(lo);
                    cuts.push(q_exit);
                    cuts.sort_by(f64::total_cmp);
                    let f = |q: f64| {
                        let r = spec.retention.retained(claims.inverse_survival(q), control);
                        spec.exit_payoff(landing(avail, r))
                    };
                    acc + cuts
                        .windows(2)
                        .map(|w| gl.integrate_composite(w[0], w[1], EXIT_PANELS, &f))
                        .sum::<f64>()
                })
                .collect()
        }
    }
}
