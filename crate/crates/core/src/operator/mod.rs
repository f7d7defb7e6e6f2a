//! The Bellman-Isaacs operator on the grid and its upper and lower
//! Hamiltonians over discretized control sets.

mod grid;
mod kernel;

pub use grid::{Grid, ValueTable};
pub use kernel::{JumpKernel, Side};

use crate::error::Result;
use crate::model::{GameSpec, Player};

/// Differences below this are treated as ties when picking optimal controls.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// A player's control set sampled at finitely many points, with the jump
/// kernel of every point prebuilt.
#[derive(Debug, Clone)]
pub struct ControlGrid {
    player: Player,
    kernels: Vec<JumpKernel>,
}

impl ControlGrid {
    /// `m` equally spaced controls over the player's control set (plus the
    /// unbounded retention when it belongs to the set).
    pub fn new(spec: &GameSpec, player: Player, grid: &Grid, m: usize) -> Result<Self> {
        let values = spec.insurer(player).controls.discretize(m);
        Self::from_values(spec, player, grid, &values)
    }

    pub fn from_values(spec: &GameSpec, player: Player, grid: &Grid, values: &[f64]) -> Result<Self> {
        let kernels = values
            .iter()
            .map(|&u| JumpKernel::new(spec, player, u, grid))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { player, kernels })
    }

    pub fn player(&self) -> Player {
        self.player
    }

    pub fn len(&self) -> usize {
        self.kernels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kernels.is_empty()
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.kernels.iter().map(JumpKernel::control)
    }

    pub fn kernels(&self) -> &[JumpKernel] {
        &self.kernels
    }

    /// Position of `u` in the grid, if it is one of the sampled controls.
    pub fn position(&self, u: f64) -> Option<usize> {
        self.kernels.iter().position(|k| k.control() == u)
    }
}

/// Optimal value at one grid point with the optimizing controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Saddle {
    pub value: f64,
    pub u1: f64,
    pub u2: f64,
}

/// Jump and payoff contributions of one player at one grid point.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PlayerTerms {
    /// `λ·(staying integral + exit integral)`.
    pub jump: f64,
    pub net_rate: f64,
}

/// The operator `𝓛(x, v(x), v'(x), v, u₁, u₂)` at grid points.
#[derive(Debug, Clone)]
pub struct Operator<'a> {
    spec: &'a GameSpec,
    grid: Grid,
    running: Vec<f64>,
    ghost: [f64; 2],
}

impl<'a> Operator<'a> {
    pub fn new(spec: &'a GameSpec, grid: Grid) -> Self {
        let running = grid.xs().map(|x| spec.running_payoff(x)).collect();
        let ghost = [spec.exit_payoff(spec.lower), spec.exit_payoff(spec.upper)];
        Self { spec, grid, running, ghost }
    }

    pub fn spec(&self) -> &'a GameSpec {
        self.spec
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn kernel(&self, player: Player, u: f64) -> Result<JumpKernel> {
        JumpKernel::new(self.spec, player, u, &self.grid)
    }

    pub fn running(&self, k: usize) -> f64 {
        self.running[k]
    }

    /// Exit payoff at the lower (`false`) or upper (`true`) end.
    pub fn boundary_value(&self, upper: bool) -> f64 {
        self.ghost[upper as usize]
    }

    fn available(&self, k: usize, kernel: &JumpKernel) -> usize {
        kernel.available(k, self.grid.cells())
    }

    /// `∫_0^{ρ(z,u)} v(x ∓ r(y,u)) dF(y)` at grid point `k`, without the intensity factor.
    pub fn inner_jump_integral(&self, v: &ValueTable, k: usize, kernel: &JumpKernel) -> f64 {
        kernel.inner(v.values(), k)
    }

    /// `∫_{ρ(z,u)}^∞ h(x ∓ r(y,u)) dF(y)` at grid point `k`, without the intensity factor.
    pub fn exit_jump_integral(&self, k: usize, kernel: &JumpKernel) -> f64 {
        kernel.exit_value(self.available(k, kernel))
    }

    pub(crate) fn player_terms(&self, v: &[f64], k: usize, kernel: &JumpKernel) -> PlayerTerms {
        let lambda = self.spec.intensity(self.player_of(kernel));
        let avail = self.available(k, kernel);
        PlayerTerms {
            jump: lambda * (kernel.inner(v, k) + kernel.exit_value(avail)),
            net_rate: kernel.net_rate(),
        }
    }

    fn player_of(&self, kernel: &JumpKernel) -> Player {
        match kernel.side() {
            Side::Down => Player::One,
            Side::Up => Player::Two,
        }
    }

    /// `δ + λ₁ + λ₂` minus the rate at which jumps return to the same point.
    pub(crate) fn local_rate(&self, self_rate1: f64, self_rate2: f64) -> f64 {
        self.spec.discount() + self.spec.total_intensity() - self_rate1 - self_rate2
    }

    /// Neighbour used by the one-sided difference at `k`: upwind inside the
    /// grid, the interior neighbour at the endpoints, none for zero drift.
    pub fn neighbour(&self, k: usize, drift: f64) -> Option<usize> {
        let last = self.grid.cells();
        if drift == 0.0 {
            None
        } else if k == 0 {
            Some(1)
        } else if k == last {
            Some(last - 1)
        } else if drift > 0.0 {
            Some(k + 1)
        } else {
            Some(k - 1)
        }
    }

    /// Coefficient `|d|·B(δΔx/|d|)/Δx` of the fitted one-sided difference,
    /// `B(θ) = θ/(e^θ - 1)`. The fit is exact for `e^{δx/d}`, the jump-free
    /// solution; jump outflow is not a decay and stays out of the fit.
    pub fn coupling(&self, drift: f64) -> f64 {
        if drift == 0.0 {
            return 0.0;
        }
        let rate = self.spec.discount();
        let theta = rate * self.grid.spacing() / drift.abs();
        let c = rate / theta.exp_m1();
        if c.is_finite() {
            c
        } else {
            drift.abs() / self.grid.spacing()
        }
    }

    /// Exponentially fitted one-sided derivative at `k` for drift `drift`.
    /// Reduces to the plain upwind difference as Δx → 0.
    pub fn fitted_derivative(&self, v: &[f64], k: usize, drift: f64) -> f64 {
        match self.neighbour(k, drift) {
            None => 0.0,
            Some(nb) => {
                let h = self.grid.spacing();
                let b = self.coupling(drift) * h / drift.abs();
                let diff = if nb > k { v[nb] - v[k] } else { v[k] - v[nb] };
                b * diff / h
            }
        }
    }

    /// Upwind derivative for the control pair given by the two kernels.
    pub fn upwind_derivative(
        &self,
        v: &ValueTable,
        k: usize,
        kernel1: &JumpKernel,
        kernel2: &JumpKernel,
    ) -> f64 {
        let t1 = self.player_terms(v.values(), k, kernel1);
        let t2 = self.player_terms(v.values(), k, kernel2);
        let drift = t1.net_rate - t2.net_rate;
        self.fitted_derivative(v.values(), k, drift)
    }

    /// `𝓛` at grid point `k` for a given derivative value `dv`.
    pub fn bi_operator(
        &self,
        v: &ValueTable,
        k: usize,
        dv: f64,
        kernel1: &JumpKernel,
        kernel2: &JumpKernel,
    ) -> f64 {
        let t1 = self.player_terms(v.values(), k, kernel1);
        let t2 = self.player_terms(v.values(), k, kernel2);
        self.assemble(v.values(), k, dv, &t1, &t2)
    }

    fn assemble(&self, v: &[f64], k: usize, dv: f64, t1: &PlayerTerms, t2: &PlayerTerms) -> f64 {
        let drift = t1.net_rate - t2.net_rate;
        let decay = self.spec.discount() + self.spec.total_intensity();
        drift * dv + t1.jump + t2.jump - decay * v[k] + self.running[k]
    }

    /// Exit payoff when the drift at endpoint `k` points out of the interval.
    pub fn exit_flow(&self, k: usize, drift: f64) -> Option<f64> {
        if k == 0 && drift < 0.0 {
            Some(self.ghost[0])
        } else if k == self.grid.cells() && drift > 0.0 {
            Some(self.ghost[1])
        } else {
            None
        }
    }

    /// The discrete equation solved by policy evaluation: `𝓛` with the fitted
    /// upwind derivative, or `c·(h - v)` with `c = δ + λ₁ + λ₂ + |d|/Δx` where
    /// the flow leaves the interval.
    pub(crate) fn discrete(&self, v: &[f64], k: usize, t1: &PlayerTerms, t2: &PlayerTerms) -> f64 {
        let drift = t1.net_rate - t2.net_rate;
        match self.exit_flow(k, drift) {
            Some(h) => {
                let scale = self.spec.discount() + self.spec.total_intensity() + drift.abs() / self.grid.spacing();
                scale * (h - v[k])
            }
            None => self.interior_form(v, k, t1, t2),
        }
    }

    /// `𝓛` with the fitted derivative, taken into the interior at the endpoints
    /// whatever the drift.
    pub(crate) fn interior_form(&self, v: &[f64], k: usize, t1: &PlayerTerms, t2: &PlayerTerms) -> f64 {
        let drift = t1.net_rate - t2.net_rate;
        let dv = self.fitted_derivative(v, k, drift);
        self.assemble(v, k, dv, t1, t2)
    }

    /// Discrete operator for the pair of kernels.
    pub fn apply(&self, v: &ValueTable, k: usize, kernel1: &JumpKernel, kernel2: &JumpKernel) -> f64 {
        let t1 = self.player_terms(v.values(), k, kernel1);
        let t2 = self.player_terms(v.values(), k, kernel2);
        self.discrete(v.values(), k, &t1, &t2)
    }

    /// Matrix `L[i1][i2]` of the discrete operator over both control grids.
    pub fn payoff_matrix(
        &self,
        v: &ValueTable,
        k: usize,
        controls1: &ControlGrid,
        controls2: &ControlGrid,
    ) -> Vec<Vec<f64>> {
        let vals = v.values();
        let t1: Vec<_> = controls1.kernels().iter().map(|kr| self.player_terms(vals, k, kr)).collect();
        let t2: Vec<_> = controls2.kernels().iter().map(|kr| self.player_terms(vals, k, kr)).collect();
        t1.iter()
            .map(|a| t2.iter().map(|b| self.discrete(vals, k, a, b)).collect())
            .collect()
    }

    /// `inf_{u₂} sup_{u₁} 𝓛` at grid point `k`, with the minimizing `u₂` and
    /// its maximizing response `u₁`.
    pub fn upper_hamiltonian(
        &self,
        v: &ValueTable,
        k: usize,
        controls1: &ControlGrid,
        controls2: &ControlGrid,
    ) -> Saddle {
        let m = self.payoff_matrix(v, k, controls1, controls2);
        let responses: Vec<(usize, f64)> = (0..controls2.len())
            .map(|j| {
                let column: Vec<f64> = m.iter().map(|row| row[j]).collect();
                let i = argmax(&column, TIE_TOLERANCE);
                (i, column[i])
            })
            .collect();
        let maxima: Vec<f64> = responses.iter().map(|r| r.1).collect();
        let j = argmin(&maxima, TIE_TOLERANCE);
        Saddle {
            value: maxima.iter().copied().fold(f64::INFINITY, f64::min),
            u1: controls1.kernels()[responses[j].0].control(),
            u2: controls2.kernels()[j].control(),
        }
    }

    /// `sup_{u₁} inf_{u₂} 𝓛` at grid point `k`, with the maximizing `u₁` and
    /// its minimizing response `u₂`.
    pub fn lower_hamiltonian(
        &self,
        v: &ValueTable,
        k: usize,
        controls1: &ControlGrid,
        controls2: &ControlGrid,
    ) -> Saddle {
        let m = self.payoff_matrix(v, k, controls1, controls2);
        let responses: Vec<(usize, f64)> = m
            .iter()
            .map(|row| {
                let j = argmin(row, TIE_TOLERANCE);
                (j, row[j])
            })
            .collect();
        let minima: Vec<f64> = responses.iter().map(|r| r.1).collect();
        let i = argmax(&minima, TIE_TOLERANCE);
        Saddle {
            value: minima.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            u1: controls1.kernels()[i].control(),
            u2: controls2.kernels()[responses[i].0].control(),
        }
    }
}

/// First index whose value is within `tie` of the maximum.
pub(crate) fn argmax(values: &[f64], tie: f64) -> usize {
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    values.iter().position(|&x| x >= best - tie).unwrap_or(0)
}

/// First index whose value is within `tie` of the minimum.
pub(crate) fn argmin(values: &[f64], tie: f64) -> usize {
    let best = values.iter().copied().fold(f64::INFINITY, f64::min);
    values.iter().position(|&x| x <= best + tie).unwrap_or(0)
}
