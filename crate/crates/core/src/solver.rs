//! Policy evaluation and alternating policy iteration.

use std::collections::HashMap;
use std::fmt;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::error::{GameError, Result};
use crate::model::{GameSpec, Player};
use crate::operator::{argmax, argmin, ControlGrid, Grid, JumpKernel, Operator, ValueTable, TIE_TOLERANCE};

/// Which end of `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryRule {
    /// The flow leaves the interval here; the value is the exit payoff.
    Absorbed(f64),
    /// The state stays; the equation is solved with an interior difference.
    SolveEquation,
}

/// Boundary treatment at an endpoint for the endpoint controls `u1`, `u2`.
pub fn boundary_rule(spec: &GameSpec, u1: f64, u2: f64, endpoint: Endpoint) -> Result<BoundaryRule> {
    let drift = spec.drift(u1, u2)?;
    Ok(match endpoint {
        Endpoint::Lower if drift < 0.0 => BoundaryRule::Absorbed(spec.exit_payoff(spec.lower)),
        Endpoint::Upper if drift > 0.0 => BoundaryRule::Absorbed(spec.exit_payoff(spec.upper)),
        _ => BoundaryRule::SolveEquation,
    })
}

/// A Markov control; the value at `x_k` is in force on `(x_{k-1}, x_k]`.
///
/// Right-closed cells keep a retention chosen at `x_k` admissible on the
/// whole cell: an upward jump capped so that it lands at or below `b` from
/// `x_k` does so from every state to its left.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTable {
    grid: Grid,
    controls: Vec<f64>,
}

impl PolicyTable {
    pub fn new(spec: &GameSpec, player: Player, grid: Grid, controls: Vec<f64>) -> Result<Self> {
        if controls.len() != grid.len() {
            return Err(GameError::InvalidSpec(format!(
                "policy has {} entries for {} grid points",
                controls.len(),
                grid.len()
            )));
        }
        let set = &spec.insurer(player).controls;
        if let Some(u) = controls.iter().find(|&&u| !set.contains(u)) {
            return Err(GameError::Domain(format!("control {u} outside the control set of {player:?}")));
        }
        Ok(Self { grid, controls })
    }

    pub fn constant(spec: &GameSpec, player: Player, grid: Grid, u: f64) -> Result<Self> {
        Self::new(spec, player, grid, vec![u; grid.len()])
    }

    /// Both players start from here: no reinsurance anywhere.
    pub fn no_reinsurance(spec: &GameSpec, player: Player, grid: Grid) -> Self {
        let u = spec.insurer(player).controls.no_reinsurance(spec.retention);
        Self { grid, controls: vec![u; grid.len()] }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn controls(&self) -> &[f64] {
        &self.controls
    }

    /// Control in force at state `x` (nearest grid point at or to the right).
    pub fn control_at(&self, x: f64) -> f64 {
        self.controls[self.grid.nearest_right(x)]
    }

    /// Largest pointwise difference; an infinite retention differs from every
    /// finite one by infinity.
    pub fn max_change(&self, other: &PolicyTable) -> f64 {
        self.controls
            .iter()
            .zip(&other.controls)
            .map(|(&a, &b)| if a == b { 0.0 } else { (a - b).abs() })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Grid points `n`.
    pub grid_points: usize,
    /// Control points `m` per player.
    pub control_points: usize,
    /// Sweep tolerance of policy evaluation.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Stopping level of policy iteration.
    pub epsilon: f64,
    /// Full rounds (one update of each player).
    pub max_rounds: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { grid_points: 801, control_points: 101, tol: 1e-8, max_sweeps: 10_000, epsilon: 1e-5, max_rounds: 10 }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if self.grid_points < 3 {
            return Err(GameError::InvalidSpec("grid needs at least 3 points".into()));
        }
        if self.control_points < 1 {
            return Err(GameError::InvalidSpec("control grid needs at least 1 point".into()));
        }
        if !(self.tol > 0.0 && self.epsilon > 0.0) {
            return Err(GameError::InvalidSpec("tolerances must be positive".into()));
        }
        if self.max_sweeps == 0 || self.max_rounds == 0 {
            return Err(GameError::InvalidSpec("iteration caps must be positive".into()));
        }
        Ok(())
    }
}

/// Which player updates first in every round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateOrder {
    /// Player 2 first; approximates the upper value.
    MinFirst,
    /// Player 1 first; approximates the lower value.
    MaxFirst,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub order: UpdateOrder,
    /// Full rounds performed.
    pub rounds: usize,
    pub converged: bool,
    /// Sup-norm value change of the last round.
    pub value_change: f64,
    /// Sup-norm policy change of the last round (both players).
    pub policy_change: f64,
    /// Largest `|𝓛|` over interior grid points at the returned triple.
    pub max_residual: f64,
    pub boundary_lower: BoundaryRule,
    pub boundary_upper: BoundaryRule,
    pub value_lower: f64,
    pub value_upper: f64,
    pub total_sweeps: usize,
    /// Range over every value table produced on the way.
    pub min_value_seen: f64,
    pub max_value_seen: f64,
    pub elapsed: Duration,
}

impl fmt::Display for SolveReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rule = |r: &BoundaryRule| match r {
            BoundaryRule::Absorbed(v) => format!("absorbed {v}"),
            BoundaryRule::SolveEquation => "solve-equation".to_string(),
        };
        writeln!(f, "order = {:?}", self.order)?;
        writeln!(f, "rounds = {}", self.rounds)?;
        writeln!(f, "converged = {}", self.converged)?;
        writeln!(f, "value_change = {}", self.value_change)?;
        writeln!(f, "policy_change = {}", self.policy_change)?;
        writeln!(f, "max_residual = {}", self.max_residual)?;
        writeln!(f, "boundary_a = {}", rule(&self.boundary_lower))?;
        writeln!(f, "boundary_b = {}", rule(&self.boundary_upper))?;
        writeln!(f, "v_a = {}", self.value_lower)?;
        writeln!(f, "v_b = {}", self.value_upper)?;
        writeln!(f, "total_sweeps = {}", self.total_sweeps)?;
        writeln!(f, "min_value_seen = {}", self.min_value_seen)?;
        writeln!(f, "max_value_seen = {}", self.max_value_seen)?;
        write!(f, "elapsed_seconds = {}", self.elapsed.as_secs_f64())
    }
}

/// Result of one policy iteration run.
#[derive(Debug, Clone)]
pub struct Solution {
    pub value: ValueTable,
    pub u1: PolicyTable,
    pub u2: PolicyTable,
    pub report: SolveReport,
}

#[derive(Debug, Clone)]
pub struct GapResult {
    pub gap: f64,
    pub upper: Solution,
    pub lower: Solution,
}

/// Per-point data of the policy evaluation equation
/// `(κ + D)v_k = D·v_nb + λ₁·I₁' + λ₂·I₂' + c`.
struct Row {
    k1: usize,
    k2: usize,
    absorbed: Option<f64>,
    neighbour: Option<usize>,
    coupling: f64,
    /// `κ + D`.
    diag: f64,
    /// `λ₁·w₁`, `λ₂·w₂`: self weights removed from the staying integrals.
    self1: f64,
    self2: f64,
    /// Exit integrals and running payoff.
    constant: f64,
}

/// Owns the discretized game and runs evaluation and improvement.
pub struct GameSolver<'a> {
    op: Operator<'a>,
    controls1: ControlGrid,
    controls2: ControlGrid,
    settings: SolverSettings,
}

impl<'a> GameSolver<'a> {
    pub fn new(spec: &'a GameSpec, settings: SolverSettings) -> Result<Self> {
        settings.validate()?;
        let grid = Grid::for_spec(spec, settings.grid_points)?;
        let m = settings.control_points;
        let controls1 = ControlGrid::new(spec, Player::One, &grid, m)?;
        let controls2 = ControlGrid::new(spec, Player::Two, &grid, m)?;
        Ok(Self { op: Operator::new(spec, grid), controls1, controls2, settings })
    }

    /// Solver with explicit control grids.
    pub fn with_controls(
        spec: &'a GameSpec,
        settings: SolverSettings,
        controls1: &[f64],
        controls2: &[f64],
    ) -> Result<Self> {
        settings.validate()?;
        let grid = Grid::for_spec(spec, settings.grid_points)?;
        let controls1 = ControlGrid::from_values(spec, Player::One, &grid, controls1)?;
        let controls2 = ControlGrid::from_values(spec, Player::Two, &grid, controls2)?;
        Ok(Self { op: Operator::new(spec, grid), controls1, controls2, settings })
    }

    pub fn spec(&self) -> &'a GameSpec {
        self.op.spec()
    }

    pub fn grid(&self) -> &Grid {
        self.op.grid()
    }

    pub fn operator(&self) -> &Operator<'a> {
        &self.op
    }

    pub fn settings(&self) -> &SolverSettings {
        &self.settings
    }

    pub fn controls(&self, player: Player) -> &ControlGrid {
        match player {
            Player::One => &self.controls1,
            Player::Two => &self.controls2,
        }
    }

    /// Kernels for every distinct control of `policy`, and the index of the
    /// kernel used at each grid point.
    fn policy_kernels(&self, player: Player, policy: &PolicyTable) -> Result<(Vec<JumpKernel>, Vec<usize>)> {
        let grid_controls = self.controls(player);
        let mut kernels = Vec::new();
        let mut seen: HashMap<u64, usize> = HashMap::new();
        let mut index = Vec::with_capacity(policy.controls.len());
        for &u in &policy.controls {
            let i = match seen.get(&u.to_bits()) {
                Some(&i) => i,
                None => {
                    let kr = match grid_controls.position(u) {
                        Some(p) => grid_controls.kernels()[p].clone(),
                        None => self.op.kernel(player, u)?,
                    };
                    kernels.push(kr);
                    seen.insert(u.to_bits(), kernels.len() - 1);
                    kernels.len() - 1
                }
            };
            index.push(i);
        }
        Ok((kernels, index))
    }

    fn rows(&self, kernels1: &[JumpKernel], idx1: &[usize], kernels2: &[JumpKernel], idx2: &[usize]) -> Vec<Row> {
        let spec = self.spec();
        let grid = self.grid();
        let cells = grid.cells();
        let (l1, l2) = (spec.intensity(Player::One), spec.intensity(Player::Two));
        (0..grid.len())
            .map(|k| {
                let (kr1, kr2) = (&kernels1[idx1[k]], &kernels2[idx2[k]]);
                let drift = kr1.net_rate() - kr2.net_rate();
                let (a1, a2) = (kr1.available(k, cells), kr2.available(k, cells));
                let self1 = l1 * kr1.self_weight(a1);
                let self2 = l2 * kr2.self_weight(a2);
                let rate = self.op.local_rate(self1, self2);
                let absorbed = self.op.exit_flow(k, drift);
                let neighbour = self.op.neighbour(k, drift);
                let coupling = self.op.coupling(drift);
                Row {
                    k1: idx1[k],
                    k2: idx2[k],
                    absorbed,
                    neighbour,
                    coupling,
                    diag: rate + if neighbour.is_some() { coupling } else { 0.0 },
                    self1,
                    self2,
                    constant: l1 * kr1.exit_value(a1) + l2 * kr2.exit_value(a2) + self.op.running(k),
                }
            })
            .collect()
    }

    fn update(&self, v: &[f64], k: usize, row: &Row, kernels1: &[JumpKernel], kernels2: &[JumpKernel]) -> f64 {
        if let Some(h) = row.absorbed {
            return h;
        }
        let spec = self.spec();
        let i1 = spec.intensity(Player::One) * kernels1[row.k1].inner(v, k) - row.self1 * v[k];
        let i2 = spec.intensity(Player::Two) * kernels2[row.k2].inner(v, k) - row.self2 * v[k];
        let flow = match row.neighbour {
            Some(nb) => row.coupling * v[nb],
            None => 0.0,
        };
        (flow + i1 + i2 + row.constant) / row.diag
    }

    /// Largest `|𝓛|` over interior grid points for the given value and policies.
    pub fn max_residual(&self, v: &ValueTable, u1: &PolicyTable, u2: &PolicyTable) -> Result<f64> {
        let (kernels1, idx1) = self.policy_kernels(Player::One, u1)?;
        let (kernels2, idx2) = self.policy_kernels(Player::Two, u2)?;
        let cells = self.grid().cells();
        Ok((1..cells)
            .map(|k| self.op.apply(v, k, &kernels1[idx1[k]], &kernels2[idx2[k]]).abs())
            .fold(0.0, f64::max))
    }

    /// Solves `𝓛 = 0` for fixed policies by Gauss-Seidel sweeps in
    /// alternating directions, starting from `init`. Stops once a sweep moves
    /// no value by `tol` and the interior residual is below `tol·min(δ, 1)`.
    /// Returns the value table and the number of sweeps.
    pub fn policy_evaluate(
        &self,
        u1: &PolicyTable,
        u2: &PolicyTable,
        init: Option<&ValueTable>,
    ) -> Result<(ValueTable, usize)> {
        let grid = *self.grid();
        let (kernels1, idx1) = self.policy_kernels(Player::One, u1)?;
        let (kernels2, idx2) = self.policy_kernels(Player::Two, u2)?;
        let rows = self.rows(&kernels1, &idx1, &kernels2, &idx2);
        let mut v = match init {
            Some(t) => t.values().to_vec(),
            None => vec![0.0; grid.len()],
        };
        let tol = self.settings.tol;
        // the value error is at most residual/δ, so the residual target scales with δ
        let residual_target = tol * self.spec().discount().min(1.0);
        let mut change = f64::INFINITY;
        let mut residual = f64::INFINITY;
        for sweep in 1..=self.settings.max_sweeps {
            change = 0.0;
            let mut visit = |k: usize, v: &mut Vec<f64>| {
                let new = self.update(v, k, &rows[k], &kernels1, &kernels2);
                change = f64::max(change, (new - v[k]).abs());
                v[k] = new;
            };
            if sweep % 2 == 1 {
                (0..grid.len()).for_each(|k| visit(k, &mut v));
            } else {
                (0..grid.len()).rev().for_each(|k| visit(k, &mut v));
            }
            if change < tol {
                let table = ValueTable::new(grid, v)?;
                residual = (1..grid.cells())
                    .map(|k| self.op.apply(&table, k, &kernels1[idx1[k]], &kernels2[idx2[k]]).abs())
                    .fold(0.0, f64::max);
                if residual <= residual_target {
                    return Ok((table, sweep));
                }
                v = table.into_values();
            }
        }
        Err(GameError::NotConverged { sweeps: self.settings.max_sweeps, change, residual })
    }

    /// Pointwise maximizer of `𝓛` over the control grid of player 1, with
    /// player 2 held at `u2`. Controls within `tol` of the best count as ties
    /// and the smallest wins.
    pub fn improve_max(&self, v: &ValueTable, u2: &PolicyTable) -> Result<PolicyTable> {
        self.improve(v, u2, Player::One)
    }

    /// Pointwise minimizer of `𝓛` over the control grid of player 2, with
    /// player 1 held at `u1`.
    pub fn improve_min(&self, v: &ValueTable, u1: &PolicyTable) -> Result<PolicyTable> {
        self.improve(v, u1, Player::Two)
    }

    fn improve(&self, v: &ValueTable, fixed: &PolicyTable, mover: Player) -> Result<PolicyTable> {
        let other = match mover {
            Player::One => Player::Two,
            Player::Two => Player::One,
        };
        let (fixed_kernels, idx) = self.policy_kernels(other, fixed)?;
        let candidates = self.controls(mover).kernels();
        // v is only accurate to the evaluation tolerance; smaller gaps are ties
        let tie = self.settings.tol.max(TIE_TOLERANCE);
        let cells = self.grid().cells();
        let pick = |scores: &[f64]| match mover {
            Player::One => argmax(scores, tie),
            Player::Two => argmin(scores, tie),
        };
        let controls: Vec<f64> = (0..self.grid().len())
            .into_par_iter()
            .map(|k| {
                let vals = v.values();
                let tf = self.op.player_terms(vals, k, &fixed_kernels[idx[k]]);
                let terms: Vec<_> = candidates.iter().map(|kr| self.op.player_terms(vals, k, kr)).collect();
                let pair = |tm| match mover {
                    Player::One => (tm, &tf),
                    Player::Two => (&tf, tm),
                };
                let scores: Vec<f64> = terms
                    .iter()
                    .map(|tm| {
                        let (t1, t2) = pair(tm);
                        self.op.discrete(vals, k, t1, t2)
                    })
                    .collect();
                let best = pick(&scores);
                if k != 0 && k != cells {
                    return candidates[best].control();
                }
                // controls tied at an endpoint (typically all absorbed) are
                // ranked by the interior form, the limit from inside
                let tied: Vec<usize> = (0..scores.len())
                    .filter(|&i| (scores[i] - scores[best]).abs() <= tie)
                    .collect();
                let inner: Vec<f64> = tied
                    .iter()
                    .map(|&i| {
                        let (t1, t2) = pair(&terms[i]);
                        self.op.interior_form(vals, k, t1, t2)
                    })
                    .collect();
                candidates[tied[pick(&inner)]].control()
            })
            .collect();
        Ok(PolicyTable { grid: *self.grid(), controls })
    }

    /// Alternating policy iteration from no reinsurance. Hitting the round
    /// cap is flagged in the report, not returned as an error.
    pub fn policy_iteration(&self, order: UpdateOrder) -> Result<Solution> {
        let start = Instant::now();
        let spec = self.spec();
        let grid = *self.grid();
        let mut u1 = PolicyTable::no_reinsurance(spec, Player::One, grid);
        let mut u2 = PolicyTable::no_reinsurance(spec, Player::Two, grid);
        let (mut v, mut total_sweeps) = self.policy_evaluate(&u1, &u2, None)?;
        let mut lo = v.min();
        let mut hi = v.max();
        let mut rounds = 0;
        let mut converged = false;
        let mut value_change = f64::INFINITY;
        let mut policy_change = f64::INFINITY;

        while rounds < self.settings.max_rounds {
            rounds += 1;
            let v_start = v.clone();
            policy_change = 0.0;
            for step in 0..2 {
                let player1_moves = matches!((order, step), (UpdateOrder::MaxFirst, 0) | (UpdateOrder::MinFirst, 1));
                if player1_moves {
                    let next = self.improve_max(&v, &u2)?;
                    policy_change = policy_change.max(next.max_change(&u1));
                    u1 = next;
                } else {
                    let next = self.improve_min(&v, &u1)?;
                    policy_change = policy_change.max(next.max_change(&u2));
                    u2 = next;
                }
                let (next, sweeps) = self.policy_evaluate(&u1, &u2, Some(&v))?;
                total_sweeps += sweeps;
                lo = lo.min(next.min());
                hi = hi.max(next.max());
                v = next;
            }
            value_change = v.max_abs_diff(&v_start);
            log::debug!(
                "{order:?} round {rounds}: value change {value_change:e}, policy change {policy_change:e}"
            );
            if value_change.max(policy_change) < self.settings.epsilon {
                converged = true;
                break;
            }
        }
        if !converged {
            log::warn!("{order:?} policy iteration stopped after {rounds} rounds without convergence");
        }

        let cells = grid.cells();
        let report = SolveReport {
            order,
            rounds,
            converged,
            value_change,
            policy_change,
            max_residual: self.max_residual(&v, &u1, &u2)?,
            boundary_lower: boundary_rule(spec, u1.controls[0], u2.controls[0], Endpoint::Lower)?,
            boundary_upper: boundary_rule(spec, u1.controls[cells], u2.controls[cells], Endpoint::Upper)?,
            value_lower: v.values()[0],
            value_upper: v.values()[cells],
            total_sweeps,
            min_value_seen: lo,
            max_value_seen: hi,
            elapsed: start.elapsed(),
        };
        Ok(Solution { value: v, u1, u2, report })
    }

    /// Runs both update orders and returns `max_k |v̄_k - v_k|`.
    pub fn upper_lower_gap(&self) -> Result<GapResult> {
        let upper = self.policy_iteration(UpdateOrder::MinFirst)?;
        let lower = self.policy_iteration(UpdateOrder::MaxFirst)?;
        let gap = upper.value.max_abs_diff(&lower.value);
        Ok(GapResult { gap, upper, lower })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ExitPayoff, RetentionKind, RunningPayoff};
    use crate::scenario::{MarketParams, Scenario};

    fn settings(n: usize, m: usize) -> SolverSettings {
        SolverSettings { grid_points: n, control_points: m, ..SolverSettings::default() }
    }

    fn constant_spec(k: f64, retention: RetentionKind) -> GameSpec {
        let mut p = MarketParams { lower: -1.0, upper: 1.0, retention, ..Scenario::PropVarExp.params() };
        p.running = RunningPayoff::Constant(p.discount * k);
        p.exit = ExitPayoff::Constant(k);
        p.build().unwrap()
    }

    #[test]
    fn boundary_rule_cases() {
        let spec = Scenario::PropVarExp.game_spec();
        // drift 1.1 - 2.16 < 0 at a: continuous ruin of player 1
        assert_eq!(boundary_rule(&spec, 1.0, 1.0, Endpoint::Lower).unwrap(), BoundaryRule::Absorbed(0.0));
        assert_eq!(boundary_rule(&spec, 1.0, 1.0, Endpoint::Upper).unwrap(), BoundaryRule::SolveEquation);
        assert_eq!(boundary_rule(&spec, 0.0, 0.0, Endpoint::Upper).unwrap(), BoundaryRule::Absorbed(1.0));
        let pareto = Scenario::XlExpPareto.game_spec();
        let inf = f64::INFINITY;
        assert_eq!(boundary_rule(&pareto, inf, inf, Endpoint::Upper).unwrap(), BoundaryRule::Absorbed(1.0));
        // zero drift: nothing leaves
        let mut p = Scenario::PropVarExp.params();
        p.base_rate = [Some(1.0), Some(1.0)];
        p.claims = [p.claims[0]; 2];
        let sym = p.build().unwrap();
        assert_eq!(boundary_rule(&sym, 0.5, 0.5, Endpoint::Lower).unwrap(), BoundaryRule::SolveEquation);
        assert_eq!(boundary_rule(&sym, 0.5, 0.5, Endpoint::Upper).unwrap(), BoundaryRule::SolveEquation);
    }

    #[test]
    fn policy_table_lookup_and_validation() {
        let spec = Scenario::PropVarExp.game_spec();
        let grid = Grid::new(-4.0, 4.0, 5).unwrap();
        let p = PolicyTable::new(&spec, Player::Two, grid, vec![0.0, 0.25, 0.5, 0.75, 1.0]).unwrap();
        assert_eq!(p.control_at(-4.0), 0.0);
        assert_eq!(p.control_at(-2.5), 0.25);
        assert_eq!(p.control_at(-2.0), 0.25);
        assert_eq!(p.control_at(-1.5), 0.5);
        assert_eq!(p.control_at(1.99), 0.75);
        assert_eq!(p.control_at(4.0), 1.0);
        assert!(PolicyTable::new(&spec, Player::Two, grid, vec![1.5; 5]).is_err());
        assert!(PolicyTable::new(&spec, Player::Two, grid, vec![1.0; 4]).is_err());
        let q = PolicyTable::constant(&spec, Player::Two, grid, 1.0).unwrap();
        assert_eq!(p.max_change(&q), 1.0);
        let xl = Scenario::XlExpExp.game_spec();
        let a = PolicyTable::constant(&xl, Player::One, grid, f64::INFINITY).unwrap();
        let b = PolicyTable::constant(&xl, Player::One, grid, 3.0).unwrap();
        assert_eq!(a.max_change(&a), 0.0);
        assert_eq!(a.max_change(&b), f64::INFINITY);
    }

    #[test]
    fn evaluation_reproduces_constant_solution() {
        for retention in [RetentionKind::Proportional, RetentionKind::ExcessOfLoss] {
            let spec = constant_spec(0.8, retention);
            let solver = GameSolver::new(&spec, settings(101, 5)).unwrap();
            let grid = *solver.grid();
            let c1 = solver.controls(Player::One).values().collect::<Vec<_>>();
            let c2 = solver.controls(Player::Two).values().collect::<Vec<_>>();
            let u1 = PolicyTable::new(&spec, Player::One, grid, (0..grid.len()).map(|k| c1[k % c1.len()]).collect()).unwrap();
            let u2 = PolicyTable::new(&spec, Player::Two, grid, (0..grid.len()).map(|k| c2[(k / 7) % c2.len()]).collect()).unwrap();
            let (v, _) = solver.policy_evaluate(&u1, &u2, None).unwrap();
            let err = v.values().iter().map(|x| (x - 0.8).abs()).fold(0.0, f64::max);
            assert!(err <= 1e-8, "{retention:?} {err} {:?}", &v.values()[..5]);
        }
    }

    #[test]
    fn evaluation_meets_residual_tolerance() {
        let spec = Scenario::XlExpExp.game_spec();
        let solver = GameSolver::new(&spec, settings(201, 11)).unwrap();
        let grid = *solver.grid();
        let u1 = PolicyTable::constant(&spec, Player::One, grid, 2.0).unwrap();
        let u2 = PolicyTable::new(&spec, Player::Two, grid, grid.xs().map(|x| if x < 0.0 { 1.0 } else { f64::INFINITY }).collect()).unwrap();
        let (v, _) = solver.policy_evaluate(&u1, &u2, None).unwrap();
        assert!(solver.max_residual(&v, &u1, &u2).unwrap() <= 1e-8);
        assert!(v.min() >= 0.0 && v.max() <= 1.0);
    }

    #[test]
    fn evaluation_reports_non_convergence() {
        let spec = Scenario::PropVarExp.game_spec();
        let s = SolverSettings { max_sweeps: 2, ..settings(101, 3) };
        let solver = GameSolver::new(&spec, s).unwrap();
        let grid = *solver.grid();
        let u1 = PolicyTable::no_reinsurance(&spec, Player::One, grid);
        let u2 = PolicyTable::no_reinsurance(&spec, Player::Two, grid);
        match solver.policy_evaluate(&u1, &u2, None) {
            Err(GameError::NotConverged { sweeps: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn full_reinsurance_is_a_deterministic_drift() {
        let spec = Scenario::PropVarExp.game_spec();
        let solver = GameSolver::new(&spec, settings(801, 3)).unwrap();
        let grid = *solver.grid();
        let u1 = PolicyTable::constant(&spec, Player::One, grid, 0.0).unwrap();
        let u2 = PolicyTable::constant(&spec, Player::Two, grid, 0.0).unwrap();
        let (v, _) = solver.policy_evaluate(&u1, &u2, None).unwrap();
        let err = grid
            .xs()
            .zip(v.values())
            .map(|(x, y)| (y - (-0.05 * (4.0 - x) / 0.30).exp()).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-7, "{err}");
    }

    #[test]
    fn single_point_sets_keep_policies() {
        let spec = Scenario::PropVarExp.game_spec();
        let solver = GameSolver::with_controls(&spec, settings(41, 1), &[0.6], &[0.3]).unwrap();
        let grid = *solver.grid();
        let u1 = PolicyTable::constant(&spec, Player::One, grid, 0.6).unwrap();
        let u2 = PolicyTable::constant(&spec, Player::Two, grid, 0.3).unwrap();
        let v = ValueTable::from_fn(grid, |x| 0.5 + 0.1 * x);
        assert_eq!(solver.improve_max(&v, &u2).unwrap(), u1);
        assert_eq!(solver.improve_min(&v, &u1).unwrap(), u2);
        // both orders reach the same policies; only the evaluation warm starts differ
        let gap = solver.upper_lower_gap().unwrap();
        assert!(gap.gap <= 1e-8, "{}", gap.gap);
    }

    #[test]
    fn improvement_on_constant_solution_picks_smallest_controls() {
        let spec = constant_spec(1.5, RetentionKind::ExcessOfLoss);
        let solver = GameSolver::new(&spec, settings(21, 6)).unwrap();
        let grid = *solver.grid();
        let v = ValueTable::constant(grid, 1.5);
        let u1 = PolicyTable::no_reinsurance(&spec, Player::One, grid);
        let u2 = PolicyTable::no_reinsurance(&spec, Player::Two, grid);
        assert!(solver.improve_max(&v, &u2).unwrap().controls().iter().all(|&u| u == 0.0));
        assert!(solver.improve_min(&v, &u1).unwrap().controls().iter().all(|&u| u == 0.0));
        let sol = solver.policy_iteration(UpdateOrder::MinFirst).unwrap();
        // round one moves off no reinsurance, round two confirms the fixed point
        assert!(sol.report.converged);
        assert!(sol.report.rounds <= 2);
        assert!(sol.value.values().iter().all(|x| (x - 1.5).abs() <= 1e-8));
        assert!(solver.upper_lower_gap().unwrap().gap <= 1e-8);
    }

    #[test]
    fn improvement_matches_exhaustive_search() {
        let spec = Scenario::PropVarExp.game_spec();
        let controls = [0.0, 0.25, 0.5, 0.75, 1.0];
        let solver = GameSolver::with_controls(&spec, settings(3, 5), &controls, &controls).unwrap();
        let grid = *solver.grid();
        let v = ValueTable::new(grid, vec![0.1, 0.45, 0.9]).unwrap();
        let u1 = PolicyTable::new(&spec, Player::One, grid, vec![1.0, 0.5, 0.0]).unwrap();
        let u2 = PolicyTable::new(&spec, Player::Two, grid, vec![0.25, 0.75, 1.0]).unwrap();
        let best1 = solver.improve_max(&v, &u2).unwrap();
        let best2 = solver.improve_min(&v, &u1).unwrap();
        let op = solver.operator();
        for k in 0..3 {
            let kern = |p, u| op.kernel(p, u).unwrap();
            let s1: Vec<f64> = controls.iter().map(|&a| op.apply(&v, k, &kern(Player::One, a), &kern(Player::Two, u2.controls()[k]))).collect();
            let s2: Vec<f64> = controls.iter().map(|&b| op.apply(&v, k, &kern(Player::One, u1.controls()[k]), &kern(Player::Two, b))).collect();
            let m1 = s1.iter().copied().fold(f64::MIN, f64::max);
            let m2 = s2.iter().copied().fold(f64::MAX, f64::min);
            let i = controls.iter().position(|&c| c == best1.controls()[k]).unwrap();
            let j = controls.iter().position(|&c| c == best2.controls()[k]).unwrap();
            assert_eq!(s1[i], m1);
            assert_eq!(s2[j], m2);
            assert!(s1[..i].iter().all(|&s| s < m1 - TIE));
            assert!(s2[..j].iter().all(|&s| s > m2 + TIE));
        }
    }

    const TIE: f64 = 1e-8;

    #[test]
    fn improvement_steps_are_monotone() {
        let spec = Scenario::XlExpExp.game_spec();
        let solver = GameSolver::new(&spec, settings(81, 9)).unwrap();
        let grid = *solver.grid();
        let op = solver.operator();
        let u1 = PolicyTable::no_reinsurance(&spec, Player::One, grid);
        let u2 = PolicyTable::no_reinsurance(&spec, Player::Two, grid);
        let (v, _) = solver.policy_evaluate(&u1, &u2, None).unwrap();
        let n1 = solver.improve_max(&v, &u2).unwrap();
        let n2 = solver.improve_min(&v, &u1).unwrap();
        for k in 0..grid.len() {
            let kern = |p, u| op.kernel(p, u).unwrap();
            let base = op.apply(&v, k, &kern(Player::One, u1.controls()[k]), &kern(Player::Two, u2.controls()[k]));
            let up = op.apply(&v, k, &kern(Player::One, n1.controls()[k]), &kern(Player::Two, u2.controls()[k]));
            let down = op.apply(&v, k, &kern(Player::One, u1.controls()[k]), &kern(Player::Two, n2.controls()[k]));
            assert!(up >= base - TIE);
            assert!(down <= base + TIE);
        }
    }

    #[test]
    fn policy_iteration_is_deterministic() {
        let spec = Scenario::XlExpExp.game_spec();
        let solver = GameSolver::new(&spec, settings(81, 11)).unwrap();
        let a = solver.policy_iteration(UpdateOrder::MinFirst).unwrap();
        let b = solver.policy_iteration(UpdateOrder::MinFirst).unwrap();
        assert_eq!(a.value, b.value);
        assert_eq!(a.u1, b.u1);
        assert_eq!(a.u2, b.u2);
        let strip = |r: &SolveReport| SolveReport { elapsed: Duration::ZERO, ..r.clone() };
        assert_eq!(strip(&a.report), strip(&b.report));
    }
}
