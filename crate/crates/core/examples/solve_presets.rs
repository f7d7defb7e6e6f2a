//! Solves every preset at the default resolution and prints a coarse value table.

use std::time::Instant;

use reinsurance_game::scenario::Scenario;
use reinsurance_game::solver::{GameSolver, SolverSettings, UpdateOrder};

fn main() {
    env_logger::init();
    for scenario in Scenario::ALL {
        let spec = scenario.game_spec();
        let solver = GameSolver::new(&spec, SolverSettings::default()).expect("default settings are valid");
        for order in [UpdateOrder::MinFirst, UpdateOrder::MaxFirst] {
            let start = Instant::now();
            let sol = solver.policy_iteration(order).expect("policy iteration runs");
            println!("{scenario} {order:?} ({:.1}s)\n{}", start.elapsed().as_secs_f64(), sol.report);
            let grid = solver.grid();
            for k in (0..grid.len()).step_by(80) {
                println!(
                    "  x={:+.2} v={:.6} u1={} u2={}",
                    grid.x(k),
                    sol.value.values()[k],
                    sol.u1.controls()[k],
                    sol.u2.controls()[k]
                );
            }
        }
    }
}
