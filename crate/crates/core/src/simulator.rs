//! Exact Monte Carlo simulation of the controlled difference process.
//!
//! Between claims the state follows the premium drift, which is constant on
//! each grid cell because the Markov controls are. The flow is integrated
//! cell run by cell run, so continuous exits are located exactly and no time
//! stepping is involved.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{GameError, Result};
use crate::model::{GameSpec, Player, RunningPayoff};
use crate::operator::{Grid, ValueTable};
use crate::quadrature::GaussLegendre;
use crate::solver::PolicyTable;

/// Paths per work unit. Partial sums are merged in block order, so results
/// do not depend on the thread count.
const BLOCK: usize = 1024;

/// Uniforms for one path, derived from a master seed and the path index.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    index: u64,
    counter: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        Self { seed, index, counter: 0, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    /// Uniforms drawn so far.
    pub fn counter(&self) -> u64 {
        self.counter
    }

    /// Next uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.counter += 1;
        self.rng.gen()
    }
}

/// One claim of the combined Poisson stream, before reinsurance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClaimEvent {
    /// Time since the previous claim.
    pub wait: f64,
    pub mark: Player,
    pub claim: f64,
    /// Uniform independent of mark and claim, recycled from the mark draw.
    pub spare: f64,
}

/// Draws claims of the merged process at rate `λ₁ + λ₂`, three uniforms each.
#[derive(Debug, Clone)]
pub struct ClaimSampler<'a> {
    spec: &'a GameSpec,
    rate: f64,
    share_one: f64,
}

impl<'a> ClaimSampler<'a> {
    pub fn new(spec: &'a GameSpec) -> Self {
        let rate = spec.total_intensity();
        Self { spec, rate, share_one: spec.intensity(Player::One) / rate }
    }

    pub fn next(&self, rng: &mut RngStream) -> ClaimEvent {
        let wait = -(-rng.uniform()).ln_1p() / self.rate;
        let u = rng.uniform();
        let (mark, spare) = if u < self.share_one {
            (Player::One, u / self.share_one)
        } else {
            (Player::Two, (u - self.share_one) / (1.0 - self.share_one))
        };
        let claims = self.spec.insurer(mark).claims();
        let claim = claims.sample(rng.uniform()).expect("uniform lies in [0, 1)");
        ClaimEvent { wait, mark, claim, spare: spare.min(1.0 - f64::EPSILON) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpRecord {
    pub time: f64,
    pub mark: Player,
    pub claim: f64,
    pub retained: f64,
    /// State right after the jump.
    pub state: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitSide {
    BelowA,
    AboveB,
    Censored,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    pub x0: f64,
    pub jumps: Vec<JumpRecord>,
    /// Exit time, or the censoring horizon.
    pub end_time: f64,
    /// Exit location (post-jump on overshoot), or the state at the horizon.
    pub end_state: f64,
    pub side: ExitSide,
    /// `∫₀^{τ∧T} e^{-δt} ζ(X_t) dt`.
    pub running: f64,
    /// `e^{-δτ} h(X_τ)`; zero for censored paths.
    pub exit: f64,
}

impl PathRecord {
    /// The discounted functional; censored paths keep only the running part.
    pub fn functional(&self) -> f64 {
        self.running + self.exit
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub paths: usize,
    pub censored_fraction: f64,
    /// `e^{-δT}·M` with `M = ‖ζ‖∞/δ + sup|h|`.
    pub truncation_bias_bound: f64,
}

/// Horizon `T` with `e^{-δT}·M < 1e-4`.
pub fn default_horizon(spec: &GameSpec) -> f64 {
    let m = spec.value_bound().max(1e-4);
    ((m * 1e4).ln() / spec.discount()).ceil().max(1.0)
}

/// Where the flow stopped.
enum Flow {
    Stayed,
    /// Left `[a, b]` continuously after the given time.
    Exited(f64, ExitSide),
}

/// Running sample statistics (count, mean, centred sum of squares).
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: usize,
    mean: f64,
    m2: f64,
    censored: usize,
}

impl Moments {
    fn push(&mut self, y: f64, censored: bool) {
        self.n += 1;
        let d = y - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (y - self.mean);
        self.censored += censored as usize;
    }

    fn merge(self, other: Moments) -> Moments {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        Moments {
            n,
            mean: self.mean + d * other.n as f64 / n as f64,
            m2: self.m2 + other.m2 + d * d * (self.n as f64 * other.n as f64) / n as f64,
            censored: self.censored + other.censored,
        }
    }
}

/// Simulates the game under fixed Markov policies.
pub struct Simulator<'a> {
    spec: &'a GameSpec,
    grid: Grid,
    u1: &'a PolicyTable,
    u2: &'a PolicyTable,
    sampler: ClaimSampler<'a>,
    /// Drift at each node. The open cell `(x_c, x_{c+1})` takes the drift and
    /// controls of node `c + 1`.
    drift: Vec<f64>,
    /// For a cell with positive drift: first node to the right where the drift changes.
    run_right: Vec<usize>,
    /// For a cell with negative drift: leftmost node of its run of equal drift.
    run_left: Vec<usize>,
    gl: GaussLegendre,
}

impl<'a> Simulator<'a> {
    pub fn new(spec: &'a GameSpec, u1: &'a PolicyTable, u2: &'a PolicyTable) -> Result<Self> {
        let grid = *u1.grid();
        if *u2.grid() != grid {
            return Err(GameError::InvalidSpec("policies are defined on different grids".into()));
        }
        if grid.lower() != spec.lower || grid.upper() != spec.upper {
            return Err(GameError::InvalidSpec("policy grid does not span [a, b]".into()));
        }
        let drift = u1
            .controls()
            .iter()
            .zip(u2.controls())
            .map(|(&c1, &c2)| spec.drift(c1, c2))
            .collect::<Result<Vec<_>>>()?;
        let cells = grid.cells();
        let mut run_right = vec![cells; cells];
        for c in (0..cells.saturating_sub(1)).rev() {
            run_right[c] = if drift[c + 2] == drift[c + 1] { run_right[c + 1] } else { c + 1 };
        }
        let mut run_left = vec![0; cells];
        for c in 1..cells {
            run_left[c] = if drift[c] == drift[c + 1] { run_left[c - 1] } else { c };
        }
        Ok(Self {
            spec,
            grid,
            u1,
            u2,
            sampler: ClaimSampler::new(spec),
            drift,
            run_right,
            run_left,
            gl: GaussLegendre::new(16),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// `∫_{t0}^{t0+s} e^{-δt} ζ(x + d(t-t0)) dt`.
    fn running_integral(&self, t0: f64, s: f64, x: f64, d: f64) -> f64 {
        let delta = self.spec.discount();
        match &self.spec.payoff.running {
            RunningPayoff::Constant(c) if *c == 0.0 => 0.0,
            RunningPayoff::Constant(c) => c * (-delta * t0).exp() * -(-delta * s).exp_m1() / delta,
            RunningPayoff::Table(table) => {
                let mut cuts = vec![0.0, s];
                if d != 0.0 {
                    cuts.extend(table.knots().map(|(k, _)| (k - x) / d).filter(|&t| t > 0.0 && t < s));
                    cuts.sort_by(f64::total_cmp);
                }
                cuts.windows(2)
                    .map(|w| {
                        self.gl.integrate(w[0], w[1], |t| (-delta * (t0 + t)).exp() * table.eval(x + d * t))
                    })
                    .sum()
            }
        }
    }

    /// Moves the state along the flow for up to `dt`, accumulating the running
    /// payoff. A node with positive drift whose right cell has nonpositive
    /// drift holds the state until the next jump.
    fn advance(&self, x: &mut f64, t0: f64, dt: f64, running: &mut f64) -> Flow {
        let g = &self.grid;
        let cells = g.cells();
        let mut used = 0.0;
        loop {
            let left = dt - used;
            let k = g.nearest_left(*x);
            let (d, cell) = if g.x(k) == *x {
                let dk = self.drift[k];
                if dk > 0.0 {
                    if k == cells {
                        return Flow::Exited(used, ExitSide::AboveB);
                    }
                    (if self.drift[k + 1] > 0.0 { self.drift[k + 1] } else { 0.0 }, k)
                } else if dk < 0.0 {
                    if k == 0 {
                        return Flow::Exited(used, ExitSide::BelowA);
                    }
                    (dk, k - 1)
                } else {
                    (0.0, k)
                }
            } else {
                (self.drift[k + 1], k)
            };
            if d == 0.0 {
                *running += self.running_integral(t0 + used, left, *x, 0.0);
                return Flow::Stayed;
            }
            let target = g.x(if d > 0.0 { self.run_right[cell] } else { self.run_left[cell] });
            let need = (target - *x) / d;
            if need >= left {
                *running += self.running_integral(t0 + used, left, *x, d);
                *x = (*x + d * left).clamp(g.lower(), g.upper());
                return Flow::Stayed;
            }
            *running += self.running_integral(t0 + used, need, *x, d);
            used += need;
            *x = target;
        }
    }

    /// Control applied to a claim at `x`. A node held by opposing drifts is
    /// left and re-entered at once, so the state chatters between the node
    /// and its right cell; the right cell's control is used for the fraction
    /// of time `d_j / (d_j - d_{j+1})` that makes the mean drift vanish.
    fn control(&self, player: Player, x: f64, spare: f64) -> f64 {
        let policy = match player {
            Player::One => self.u1,
            Player::Two => self.u2,
        };
        let j = self.grid.nearest_right(x);
        if j < self.grid.cells() && self.grid.x(j) == x {
            let (dj, dr) = (self.drift[j], self.drift[j + 1]);
            if dj > 0.0 && dr <= 0.0 && spare * (dj - dr) < dj {
                return policy.controls()[j + 1];
            }
        }
        policy.controls()[j]
    }

    /// Simulates one path from `x0` until exit or `horizon`. A start outside
    /// `[a, b]` exits at time zero.
    pub fn sample_path(&self, x0: f64, stream: &mut RngStream, horizon: f64) -> PathRecord {
        let mut jumps = Vec::new();
        self.run(x0, stream, horizon, Some(&mut jumps)).with_jumps(jumps)
    }

    fn run(&self, x0: f64, stream: &mut RngStream, horizon: f64, mut jumps: Option<&mut Vec<JumpRecord>>) -> PathRecord {
        let spec = self.spec;
        let delta = spec.discount();
        let exit = |x0: f64, t: f64, x: f64, side: ExitSide, running: f64| PathRecord {
            x0,
            jumps: Vec::new(),
            end_time: t,
            end_state: x,
            side,
            running,
            exit: (-delta * t).exp() * spec.exit_payoff(x),
        };
        if x0 < spec.lower {
            return exit(x0, 0.0, x0, ExitSide::BelowA, 0.0);
        }
        if x0 > spec.upper {
            return exit(x0, 0.0, x0, ExitSide::AboveB, 0.0);
        }
        let mut t = 0.0;
        let mut x = x0;
        let mut running = 0.0;
        loop {
            let event = self.sampler.next(stream);
            let remaining = horizon - t;
            let dt = event.wait.min(remaining);
            if let Flow::Exited(after, side) = self.advance(&mut x, t, dt, &mut running) {
                return exit(x0, t + after, x, side, running);
            }
            if event.wait >= remaining {
                return PathRecord {
                    x0,
                    jumps: Vec::new(),
                    end_time: horizon,
                    end_state: x,
                    side: ExitSide::Censored,
                    running,
                    exit: 0.0,
                };
            }
            t += event.wait;
            let retained = spec.retention.retained(event.claim, self.control(event.mark, x, event.spare));
            x = match event.mark {
                Player::One => x - retained,
                Player::Two => x + retained,
            };
            if let Some(list) = jumps.as_deref_mut() {
                list.push(JumpRecord { time: t, mark: event.mark, claim: event.claim, retained, state: x });
            }
            if x < spec.lower {
                return exit(x0, t, x, ExitSide::BelowA, running);
            }
            if x > spec.upper {
                return exit(x0, t, x, ExitSide::AboveB, running);
            }
        }
    }

    fn moments(&self, n_paths: usize, seed: u64, value: impl Fn(&mut RngStream) -> (f64, bool) + Sync) -> Moments {
        let blocks = n_paths.div_ceil(BLOCK);
        let parts: Vec<Moments> = (0..blocks)
            .into_par_iter()
            .map(|b| {
                let mut m = Moments::default();
                for i in b * BLOCK..((b + 1) * BLOCK).min(n_paths) {
                    let (y, censored) = value(&mut RngStream::new(seed, i as u64));
                    m.push(y, censored);
                }
                m
            })
            .collect();
        parts.into_iter().fold(Moments::default(), Moments::merge)
    }

    fn estimate(&self, m: Moments, horizon: f64) -> McEstimate {
        McEstimate {
            mean: m.mean,
            std_error: (m.m2 / (m.n - 1) as f64).max(0.0).sqrt() / (m.n as f64).sqrt(),
            paths: m.n,
            censored_fraction: m.censored as f64 / m.n as f64,
            truncation_bias_bound: (-self.spec.discount() * horizon).exp() * self.spec.value_bound(),
        }
    }

    /// Monte Carlo estimate of `J(x0)` from `n_paths` paths censored at `horizon`.
    pub fn estimate_j(&self, x0: f64, n_paths: usize, seed: u64, horizon: f64) -> Result<McEstimate> {
        check_paths(n_paths)?;
        let m = self.moments(n_paths, seed, |s| {
            let p = self.run(x0, s, horizon, None);
            (p.functional(), p.side == ExitSide::Censored)
        });
        Ok(self.estimate(m, horizon))
    }

    /// Estimates `E[∫₀^{τ∧T} e^{-δs}ζ ds + e^{-δT} v(X_T) 1{T<τ} + e^{-δτ}h(X_τ) 1{T≥τ}] - v(x0)`.
    /// The mean of the returned estimate is the residual; it vanishes when
    /// `v` is the value of the simulated policies.
    pub fn check_dpp(&self, x0: f64, horizon: f64, n_paths: usize, seed: u64, v: &ValueTable) -> Result<McEstimate> {
        check_paths(n_paths)?;
        if !(horizon >= 0.0 && horizon.is_finite()) {
            return Err(GameError::Domain(format!("horizon must be finite and nonnegative, got {horizon}")));
        }
        let v0 = v.eval_extended(x0, self.spec);
        let decay = (-self.spec.discount() * horizon).exp();
        let m = self.moments(n_paths, seed, |s| {
            let p = self.run(x0, s, horizon, None);
            let censored = p.side == ExitSide::Censored;
            let tail = if censored { decay * v.interpolate(p.end_state) } else { p.exit };
            (p.running + tail - v0, false)
        });
        Ok(McEstimate { truncation_bias_bound: 0.0, ..self.estimate(m, horizon) })
    }
}

impl PathRecord {
    fn with_jumps(mut self, jumps: Vec<JumpRecord>) -> Self {
        self.jumps = jumps;
        self
    }
}

fn check_paths(n: usize) -> Result<()> {
    if n < 2 {
        return Err(GameError::Domain(format!("need at least 2 paths, got {n}")));
    }
    Ok(())
}

/// Kolmogorov-Smirnov distance between a sample and a continuous CDF.
pub fn ks_statistic(sample: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let f = cdf(y);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ExitPayoff, RetentionKind};
    use crate::scenario::{MarketParams, Scenario};

    fn policies(spec: &GameSpec, n: usize, c1: f64, c2: f64) -> (PolicyTable, PolicyTable) {
        let grid = Grid::for_spec(spec, n).unwrap();
        (
            PolicyTable::constant(spec, Player::One, grid, c1).unwrap(),
            PolicyTable::constant(spec, Player::Two, grid, c2).unwrap(),
        )
    }

    fn jump_free() -> GameSpec {
        let p = MarketParams { intensity: [1e-12, 1e-12], ..Scenario::PropVarExp.params() };
        MarketParams { base_rate: [Some(0.9), Some(0.4)], ..p }.build().unwrap()
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let mut a = RngStream::new(7, 3);
        let mut b = RngStream::new(7, 3);
        let mut c = RngStream::new(7, 4);
        let xs: Vec<f64> = (0..5).map(|_| a.uniform()).collect();
        let ys: Vec<f64> = (0..5).map(|_| b.uniform()).collect();
        let zs: Vec<f64> = (0..5).map(|_| c.uniform()).collect();
        assert_eq!(xs, ys);
        assert_ne!(xs, zs);
        assert_eq!(a.counter(), 5);
    }

    #[test]
    fn start_outside_exits_at_once() {
        let spec = Scenario::PropVarExp.game_spec();
        let (u1, u2) = policies(&spec, 81, 1.0, 1.0);
        let sim = Simulator::new(&spec, &u1, &u2).unwrap();
        let p = sim.sample_path(4.5, &mut RngStream::new(1, 0), 100.0);
        assert_eq!((p.end_time, p.side, p.functional()), (0.0, ExitSide::AboveB, 1.0));
        let p = sim.sample_path(-4.5, &mut RngStream::new(1, 0), 100.0);
        assert_eq!((p.end_time, p.side, p.functional()), (0.0, ExitSide::BelowA, 0.0));
    }

    #[test]
    fn deterministic_drift_exits_at_closed_form_time() {
        let spec = jump_free();
        let (u1, u2) = policies(&spec, 81, 1.0, 0.0);
        let d = spec.drift(1.0, 0.0).unwrap();
        let sim = Simulator::new(&spec, &u1, &u2).unwrap();
        for x0 in [-3.97, 0.0, 1.234] {
            let p = sim.sample_path(x0, &mut RngStream::new(5, 0), 1e6);
            assert_eq!(p.side, ExitSide::AboveB);
            assert!(p.jumps.is_empty());
            assert!((p.end_time - (4.0 - x0) / d).abs() < 1e-12);
            assert!((p.functional() - (-0.05 * (4.0 - x0) / d).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn full_reinsurance_keeps_zero_jumps() {
        let spec = Scenario::PropVarExp.game_spec();
        let (u1, u2) = policies(&spec, 801, 0.0, 0.0);
        let sim = Simulator::new(&spec, &u1, &u2).unwrap();
        let p = sim.sample_path(1.0, &mut RngStream::new(9, 2), 1e6);
        assert!((p.end_time - 3.0 / 0.3).abs() < 1e-12);
        assert!(p.jumps.iter().all(|j| j.retained == 0.0 && j.claim > 0.0));
        assert!(!p.jumps.is_empty());
        assert!(p.jumps.windows(2).all(|w| w[0].time < w[1].time));
    }

    #[test]
    fn opposite_drifts_hold_the_state_at_a_node() {
        let spec = Scenario::PropVarExp.game_spec();
        let grid = Grid::for_spec(&spec, 9).unwrap();
        // drift 0.3 up to x = -1 and -2.18 on the cells right of it
        let c2: Vec<f64> = grid.xs().map(|x| if x < 0.0 { 0.0 } else { 1.0 }).collect();
        let u1 = PolicyTable::constant(&spec, Player::One, grid, 0.0).unwrap();
        let u2 = PolicyTable::new(&spec, Player::Two, grid, c2).unwrap();
        let sim = Simulator::new(&spec, &u1, &u2).unwrap();
        for x0 in [-2.5, -1.0, -0.5, 0.7] {
            let (mut x, mut running) = (x0, 0.0);
            assert!(matches!(sim.advance(&mut x, 0.0, 50.0, &mut running), Flow::Stayed));
            assert_eq!(x, -1.0);
        }
        // the node itself and the cell right of it share the holding time
        let picks: Vec<f64> = [0.0, 0.1, 0.13, 0.9].iter().map(|&s| sim.control(Player::Two, -1.0, s)).collect();
        assert_eq!(picks, vec![1.0, 1.0, 0.0, 0.0]);
        assert_eq!(sim.control(Player::Two, -0.5, 0.0), 1.0);
        let mut x = -3.5;
        assert!(matches!(sim.advance(&mut x, 0.0, 1.0, &mut 0.0), Flow::Stayed));
        assert!((x - (-3.5 + 0.3)).abs() < 1e-12);
    }

    #[test]
    fn constant_solution_holds_per_path() {
        let k = 0.7;
        let mut p = MarketParams { lower: -1.0, upper: 1.0, ..Scenario::XlExpPareto.params() };
        p.running = RunningPayoff::Constant(p.discount * k);
        p.exit = ExitPayoff::Constant(k);
        let spec = p.build().unwrap();
        let (u1, u2) = policies(&spec, 21, f64::INFINITY, 1.5);
        let sim = Simulator::new(&spec, &u1, &u2).unwrap();
        let horizon = default_horizon(&spec);
        for i in 0..200 {
            let path = sim.sample_path(0.1, &mut RngStream::new(3, i), horizon);
            assert_ne!(path.side, ExitSide::Censored);
            assert!((path.functional() - k).abs() < 1e-12);
        }
        let est = sim.estimate_j(0.1, 1000, 3, horizon).unwrap();
        assert!((est.mean - k).abs() < 1e-12 && est.std_error < 1e-12);
    }

    #[test]
    fn tabulated_running_payoff_is_integrated_exactly() {
        use crate::model::PiecewiseLinear;
        let mut p = MarketParams { intensity: [1e-12, 1e-12], ..Scenario::PropVarExp.params() };
        p.running = RunningPayoff::Table(PiecewiseLinear::new(vec![-4.0, 0.5, 4.0], vec![0.0, 0.9, 0.1]).unwrap());
        p.exit = ExitPayoff::Constant(0.0);
        let spec = p.build().unwrap();
        let (u1, u2) = policies(&spec, 17, 1.0, 0.0);
        let d = spec.drift(1.0, 0.0).unwrap();
        let sim = Simulator::new(&spec, &u1, &u2).unwrap();
        let path = sim.sample_path(-1.0, &mut RngStream::new(0, 0), 1e6);
        let fine = GaussLegendre::new(16).integrate_composite(0.0, 5.0 / d, 4000, |t| {
            (-0.05 * t).exp() * spec.running_payoff(-1.0 + d * t)
        });
        assert!((path.running - fine).abs() < 1e-10, "{} {fine}", path.running);
    }

    #[test]
    fn estimates_are_reproducible() {
        let spec = Scenario::XlExpExp.game_spec();
        let (u1, u2) = policies(&spec, 41, f64::INFINITY, 1.0);
        let sim = Simulator::new(&spec, &u1, &u2).unwrap();
        let a = sim.estimate_j(0.0, 3000, 11, 185.0).unwrap();
        let b = sim.estimate_j(0.0, 3000, 11, 185.0).unwrap();
        assert_eq!(a, b);
        assert!(a.std_error > 0.0 && a.mean > 0.0 && a.mean < 1.0);
        assert!(sim.estimate_j(0.0, 1, 11, 185.0).is_err());
    }

    #[test]
    fn zero_horizon_dpp_residual_is_exactly_zero() {
        let spec = Scenario::PropVarExp.game_spec();
        let (u1, u2) = policies(&spec, 81, 1.0, 0.5);
        let sim = Simulator::new(&spec, &u1, &u2).unwrap();
        let v = ValueTable::from_fn(*sim.grid(), |x| 0.5 + 0.1 * x.sin());
        let r = sim.check_dpp(0.3, 0.0, 500, 1, &v).unwrap();
        assert_eq!((r.mean, r.std_error), (0.0, 0.0));
    }

    #[test]
    fn jump_free_dpp_matches_closed_form() {
        let spec = jump_free();
        let (u1, u2) = policies(&spec, 161, 1.0, 0.0);
        let d = spec.drift(1.0, 0.0).unwrap();
        let sim = Simulator::new(&spec, &u1, &u2).unwrap();
        let v = ValueTable::from_fn(*sim.grid(), |x| (-0.05 * (4.0 - x) / d).exp());
        for horizon in [0.5, 1.0, 2.0, 50.0] {
            let r = sim.check_dpp(0.0, horizon, 100, 4, &v).unwrap();
            // linear interpolation of the convex exponential
            assert!(r.mean.abs() < 1e-5, "{horizon}: {}", r.mean);
        }
    }

    #[test]
    fn default_horizon_bounds_truncation() {
        let spec = Scenario::PropVarExp.game_spec();
        assert_eq!(default_horizon(&spec), 185.0);
        assert!((-0.05 * 185.0_f64).exp() < 1e-4);
    }

    #[test]
    fn marks_and_waits_follow_the_merged_process() {
        let mut p = Scenario::XlExpPareto.params();
        p.intensity = [0.5, 1.5];
        p.retention = RetentionKind::ExcessOfLoss;
        let spec = p.build().unwrap();
        let sampler = ClaimSampler::new(&spec);
        let n = 100_000;
        let mut rng = RngStream::new(2024, 0);
        let events: Vec<ClaimEvent> = (0..n).map(|_| sampler.next(&mut rng)).collect();
        assert_eq!(rng.counter(), 3 * n as u64);
        let share = events.iter().filter(|e| e.mark == Player::One).count() as f64 / n as f64;
        assert!((share - 0.25).abs() <= 4.0 * (0.25 * 0.75 / n as f64).sqrt());
        let mean_wait = events.iter().map(|e| e.wait).sum::<f64>() / n as f64;
        assert!((mean_wait - 0.5).abs() <= 4.0 * 0.5 / (n as f64).sqrt());
        let mut claims: Vec<f64> = events.iter().map(|e| e.claim).collect();
        let d = ks_statistic(&mut claims, |y| spec.insurer(Player::One).claims().cdf(y));
        assert!(d < 1.9495 / (n as f64).sqrt(), "{d}");
    }

    #[test]
    fn ks_statistic_of_exact_quantiles_is_small() {
        let mut s: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        assert!((ks_statistic(&mut s, |y| y) - 0.005).abs() < 1e-12);
    }
}
