use crate::error::{GameError, Result};
use crate::model::GameSpec;

/// Equidistant grid `x_k = a + k(b-a)/(n-1)`, `k = 0..n-1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    lower: f64,
    upper: f64,
    points: usize,
}

impl Grid {
    pub fn new(lower: f64, upper: f64, points: usize) -> Result<Self> {
        if points < 3 {
            return Err(GameError::InvalidSpec(format!("grid needs at least 3 points, got {points}")));
        }
        if !(lower.is_finite() && upper.is_finite() && lower < upper) {
            return Err(GameError::InvalidSpec(format!("grid needs a < b, got [{lower}, {upper}]")));
        }
        Ok(Self { lower, upper, points })
    }

    pub fn for_spec(spec: &GameSpec, points: usize) -> Result<Self> {
        Self::new(spec.lower, spec.upper, points)
    }

    pub fn len(&self) -> usize {
        self.points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of cells, `n - 1`.
    pub fn cells(&self) -> usize {
        self.points - 1
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn spacing(&self) -> f64 {
        (self.upper - self.lower) / self.cells() as f64
    }

    pub fn x(&self, k: usize) -> f64 {
        if k >= self.cells() {
            self.upper
        } else {
            self.lower + k as f64 * self.spacing()
        }
    }

    pub fn xs(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.points).map(move |k| self.x(k))
    }

    /// Index of the grid point at or to the left of `x`, clamped to the grid.
    pub fn nearest_left(&self, x: f64) -> usize {
        if x <= self.lower {
            return 0;
        }
        if x >= self.upper {
            return self.cells();
        }
        let mut k = ((x - self.lower) / self.spacing()).floor() as usize;
        k = k.min(self.cells());
        // guard against rounding in the division
        if self.x(k) > x {
            k -= 1;
        } else if k < self.cells() && self.x(k + 1) <= x {
            k += 1;
        }
        k
    }

    /// Index of the grid point at or to the right of `x`, clamped to the grid.
    pub fn nearest_right(&self, x: f64) -> usize {
        let k = self.nearest_left(x);
        if self.x(k) < x && k < self.cells() {
            k + 1
        } else {
            k
        }
    }

    /// Index of the grid point equal to `x`, if any.
    pub fn node_at(&self, x: f64) -> Option<usize> {
        let k = self.nearest_left(x);
        (self.x(k) == x).then_some(k)
    }
}

/// Grid approximation of a value function, linear between grid points.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    grid: Grid,
    values: Vec<f64>,
}

impl ValueTable {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(GameError::InvalidSpec(format!(
                "value table has {} entries for {} grid points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(GameError::InvalidSpec(format!("value table entry {v} is not finite")));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Self { grid, values: vec![value; grid.len()] }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        Self { grid, values: grid.xs().map(f).collect() }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Linear interpolation; arguments outside `[a, b]` are clamped.
    pub fn interpolate(&self, x: f64) -> f64 {
        let k = self.grid.nearest_left(x);
        if k >= self.grid.cells() {
            return self.values[self.grid.cells()];
        }
        let x0 = self.grid.x(k);
        let t = ((x - x0) / self.grid.spacing()).clamp(0.0, 1.0);
        self.values[k] + t * (self.values[k + 1] - self.values[k])
    }

    /// The table inside `[a, b]`, the exit payoff outside.
    pub fn eval_extended(&self, x: f64, spec: &GameSpec) -> f64 {
        if x < self.grid.lower() || x > self.grid.upper() {
            spec.exit_payoff(x)
        } else {
            self.interpolate(x)
        }
    }

    pub fn max_abs_diff(&self, other: &ValueTable) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_endpoints_are_exact() {
        let g = Grid::new(-4.0, 4.0, 801).unwrap();
        assert_eq!(g.x(0), -4.0);
        assert_eq!(g.x(800), 4.0);
        assert!((g.spacing() - 0.01).abs() < 1e-15);
        assert!(g.xs().collect::<Vec<_>>().windows(2).all(|w| w[1] > w[0]));
        assert!(Grid::new(0.0, 1.0, 2).is_err());
        assert!(Grid::new(1.0, 0.0, 5).is_err());
    }

    #[test]
    fn nearest_left_is_consistent_with_nodes() {
        let g = Grid::new(-2.0, 2.0, 401).unwrap();
        for k in 0..g.len() {
            assert_eq!(g.nearest_left(g.x(k)), k);
            assert_eq!(g.nearest_right(g.x(k)), k);
            assert_eq!(g.node_at(g.x(k)), Some(k));
            if k < g.cells() {
                let mid = 0.5 * (g.x(k) + g.x(k + 1));
                assert_eq!(g.nearest_left(mid), k);
                assert_eq!(g.nearest_right(mid), k + 1);
                assert_eq!(g.node_at(mid), None);
            }
        }
        assert_eq!(g.nearest_left(-10.0), 0);
        assert_eq!(g.nearest_left(10.0), 400);
        assert_eq!(g.nearest_right(-10.0), 0);
        assert_eq!(g.nearest_right(10.0), 400);
    }

    #[test]
    fn interpolation_is_linear() {
        let g = Grid::new(0.0, 1.0, 5).unwrap();
        let v = ValueTable::from_fn(g, |x| 3.0 * x - 1.0);
        for &x in &[0.0, 0.1, 0.33, 0.9, 1.0] {
            assert!((v.interpolate(x) - (3.0 * x - 1.0)).abs() < 1e-14);
        }
        assert_eq!(v.interpolate(-1.0), -1.0);
        assert!(ValueTable::new(g, vec![0.0; 4]).is_err());
        assert!(ValueTable::new(g, vec![f64::NAN; 5]).is_err());
    }
}
