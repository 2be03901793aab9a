//! Exactly-recombining price lattice for the CEV diffusion.
//!
//! Every interior triple of adjacent prices on a level satisfies
//!
//! ```text
//! (S[j+1] - S[j]) * (S[j] - S[j-1]) = sigma^2 * S[j]^beta * dt
//! ```
//!
//! which is the condition under which the explicit three-point
//! finite-difference stencil for the pricing PDE loses its middle weight and
//! becomes a two-branch tree. Level `i` (1-based) holds `2i - 1` prices and is
//! the previous level with one new price appended at each end, so the whole
//! lattice is stored as the final level alone: level `i` is the centred
//! window of width `2i - 1`. Copying the interior is therefore exact by
//! construction and storage is linear in the step count.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::CevParams;

/// Floor applied to the bottom branch, relative to the spot price.
pub const EPS_FLOOR_REL: f64 = 1e-8;

const DEGENERATE_REL: f64 = 1e-14;

/// Up move of the first step, `s0 * exp(sigma * s0^(beta/2 - 1) * sqrt(dt))`.
///
/// This is the one free choice of the construction; every other price
/// follows from the recombination equation.
pub fn first_up_value(params: &CevParams, dt: f64) -> Result<f64> {
    params.validate()?;
    check_dt(dt)?;
    let s0 = params.s0;
    Ok(s0 * (params.sigma * s0.powf(params.alpha() - 1.0) * dt.sqrt()).exp())
}

/// Solves the recombination equation for the price above `middle`.
pub fn extend_top(middle: f64, lower: f64, params: &CevParams, dt: f64) -> Result<f64> {
    let gap = middle - lower;
    if !(lower > 0.0) || !(gap >= DEGENERATE_REL * middle) {
        return Err(Error::DegenerateSpacing { level: 0, index: 0 });
    }
    Ok(middle + params.variance(middle) * dt / gap)
}

/// Solves the recombination equation for the price below `middle`.
///
/// A candidate at or below `eps_floor` is clamped to `eps_floor` and
/// reported as floored: for `beta < 2` the lower boundary of the lattice
/// reaches zero after finitely many steps.
pub fn extend_bottom(
    middle: f64,
    upper: f64,
    params: &CevParams,
    dt: f64,
    eps_floor: f64,
) -> Result<(f64, bool)> {
    let gap = upper - middle;
    if !(middle > 0.0) || !(gap >= DEGENERATE_REL * middle) {
        return Err(Error::DegenerateSpacing { level: 0, index: 0 });
    }
    let candidate = middle - params.variance(middle) * dt / gap;
    if candidate <= eps_floor {
        Ok((eps_floor, true))
    } else {
        Ok((candidate, false))
    }
}

fn check_dt(dt: f64) -> Result<()> {
    if dt.is_finite() && dt > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid("dt", format!("must be > 0, got {dt}")))
    }
}

/// An immutable recombining lattice with `n_steps + 1` levels.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    params: CevParams,
    dt: f64,
    n_steps: usize,
    eps_floor: f64,
    // Final level, 2 * n_steps + 1 prices; the root sits at index n_steps.
    grid: Vec<f64>,
    floored: Vec<bool>,
}

/// Builds the lattice level by level on a uniform grid `dt = maturity / n_steps`.
pub fn build_lattice(params: &CevParams, maturity: f64, n_steps: usize) -> Result<Lattice> {
    params.validate_for_lattice()?;
    if n_steps < 1 {
        return Err(Error::invalid("steps", "steps must be ≥ 1"));
    }
    if !(maturity.is_finite() && maturity > 0.0) {
        return Err(Error::invalid(
            "maturity",
            format!("must be > 0, got {maturity}"),
        ));
    }
    let dt = maturity / n_steps as f64;
    let eps_floor = EPS_FLOOR_REL * params.s0;
    let n = n_steps;
    let mut grid = vec![0.0; 2 * n + 1];
    let mut floored = vec![false; 2 * n + 1];

    grid[n] = params.s0;
    grid[n + 1] = first_up_value(params, dt)?;
    let (down, f) = extend_bottom(grid[n], grid[n + 1], params, dt, eps_floor)
        .map_err(|e| with_context(e, 2, 1))?;
    grid[n - 1] = down;
    floored[n - 1] = f;

    for step in 2..=n {
        let level = step + 1;
        let top = n + step;
        grid[top] = extend_top(grid[top - 1], grid[top - 2], params, dt)
            .map_err(|e| with_context(e, level, 2 * level - 1))?;

        let bottom = n - step;
        if floored[bottom + 1] {
            // absorbed: the equation is degenerate at the floor
            grid[bottom] = eps_floor;
            floored[bottom] = true;
        } else {
            let (b, f) = extend_bottom(grid[bottom + 1], grid[bottom + 2], params, dt, eps_floor)
                .map_err(|e| with_context(e, level, 1))?;
            grid[bottom] = b;
            floored[bottom] = f;
        }
    }

    Ok(Lattice {
        params: *params,
        dt,
        n_steps,
        eps_floor,
        grid,
        floored,
    })
}

fn with_context(err: Error, level: usize, index: usize) -> Error {
    match err {
        Error::DegenerateSpacing { .. } => Error::DegenerateSpacing { level, index },
        other => other,
    }
}

impl Lattice {
    pub fn params(&self) -> &CevParams {
        &self.params
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn maturity(&self) -> f64 {
        self.dt * self.n_steps as f64
    }

    pub fn eps_floor(&self) -> f64 {
        self.eps_floor
    }

    pub fn n_levels(&self) -> usize {
        self.n_steps + 1
    }

    /// Prices on level `i`, 1-based: `level(i)[j - 1] = S(i, j)`.
    pub fn level(&self, i: usize) -> &[f64] {
        &self.grid[self.level_range(i)]
    }

    pub fn level_floored(&self, i: usize) -> &[bool] {
        &self.floored[self.level_range(i)]
    }

    fn level_range(&self, i: usize) -> std::ops::Range<usize> {
        assert!(
            (1..=self.n_levels()).contains(&i),
            "level {i} out of range 1..={}",
            self.n_levels()
        );
        self.n_steps + 1 - i..self.n_steps + i
    }

    /// `S(i, j)` with 1-based level and node indices.
    pub fn price(&self, i: usize, j: usize) -> f64 {
        self.level(i)[j - 1]
    }

    /// The final level, which contains every price in the lattice.
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn floored(&self) -> &[bool] {
        &self.floored
    }

    /// Grid index of reachable node `m` (0..=step) after `step` periods.
    ///
    /// Its successors are `index - 1` (down) and `index + 1` (up); the price
    /// at `index` itself is the middle of the successor triple.
    pub fn node_index(&self, step: usize, m: usize) -> usize {
        debug_assert!(step <= self.n_steps && m <= step);
        self.n_steps - step + 2 * m
    }

    pub fn is_floored(&self, index: usize) -> bool {
        self.floored[index]
    }

    /// Largest relative residual of the recombination equation over all
    /// interior triples without a floored member.
    pub fn max_recombination_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for g in 1..self.grid.len() - 1 {
            if self.floored[g - 1] || self.floored[g] || self.floored[g + 1] {
                continue;
            }
            let lhs = (self.grid[g + 1] - self.grid[g]) * (self.grid[g] - self.grid[g - 1]);
            let rhs = self.params.variance(self.grid[g]) * self.dt;
            worst = worst.max((lhs - rhs).abs() / rhs);
        }
        worst
    }

    /// Uppermost and lowermost prices after `step` periods.
    pub fn extremes(&self, step: usize) -> (f64, f64) {
        let n = self.n_steps;
        (self.grid[n + step], self.grid[n - step])
    }

    pub fn dump(&self) -> LatticeDump {
        let levels = (1..=self.n_levels())
            .map(|i| self.level(i).to_vec())
            .collect();
        let floored = (1..=self.n_levels())
            .map(|i| self.level_floored(i).to_vec())
            .collect();
        LatticeDump {
            dt: self.dt,
            n_steps: self.n_steps,
            levels,
            floored,
        }
    }
}

/// JSON layout of a lattice dump: `levels[i - 1][j - 1] = S(i, j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeDump {
    pub dt: f64,
    pub n_steps: usize,
    pub levels: Vec<Vec<f64>>,
    pub floored: Vec<Vec<bool>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Up,
    Down,
}

/// Closed-form solution of `(y')^2 = sigma^2 y^beta`, `y(0) = s0`, in the
/// rescaled time `tau = t / sqrt(dt)`.
pub fn envelope_closed_form(params: &CevParams, tau: f64, direction: Direction) -> f64 {
    let sign = match direction {
        Direction::Up => 1.0,
        Direction::Down => -1.0,
    };
    let s0 = params.s0;
    if tau == 0.0 {
        return s0;
    }
    if params.is_gbm() {
        return s0 * (sign * params.sigma * tau).exp();
    }
    let k = 1.0 - params.alpha();
    let c = s0.powf(k) / k;
    let base = sign * params.sigma * tau + c;
    if base <= 0.0 {
        return 0.0;
    }
    (k * base).powf(1.0 / k)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopePoint {
    pub tau: f64,
    pub upper: f64,
    pub lower: f64,
}

/// Closed-form envelope sampled at every step of `lattice`.
pub fn envelope_points(lattice: &Lattice) -> Vec<EnvelopePoint> {
    let sqrt_dt = lattice.dt().sqrt();
    (0..=lattice.n_steps())
        .map(|n| {
            let tau = n as f64 * sqrt_dt;
            EnvelopePoint {
                tau,
                upper: envelope_closed_form(lattice.params(), tau, Direction::Up),
                lower: envelope_closed_form(lattice.params(), tau, Direction::Down),
            }
        })
        .collect()
}

/// Maximum relative gap between the uppermost branch and the closed-form
/// upper envelope over all steps.
pub fn envelope_deviation(lattice: &Lattice, params: &CevParams) -> f64 {
    let sqrt_dt = lattice.dt().sqrt();
    (0..=lattice.n_steps())
        .map(|n| {
            let exact = envelope_closed_form(params, n as f64 * sqrt_dt, Direction::Up);
            (lattice.extremes(n).0 - exact).abs() / exact
        })
        .fold(0.0, f64::max)
}
