//! Transition weights and backward induction on a [`Lattice`].
//!
//! Two weight sets are supported. `ExactH` uses the explicit
//! finite-difference coefficients on the successor triple `(d, S, u)`:
//!
//! ```text
//! h_up   = ( r dt S + sigma^2 S^beta dt / (u - S)) / (u - d)
//! h_down = (-r dt S + sigma^2 S^beta dt / (S - d)) / (u - d)
//! V = (h_up V_u + h_down V_d) / (1 + r dt)
//! ```
//!
//! whose middle coefficient vanishes on a recombining triple, so that
//! `h_up + h_down = 1`. `ApproxP` replaces them with the closed-form
//! probability obtained by assuming equal scaled spacings above and below,
//! discounted by `exp(-r dt)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::params::{CevParams, OptionKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum WeightsMode {
    #[default]
    #[serde(rename = "exact-h")]
    ExactH,
    #[serde(rename = "approx-p")]
    ApproxP,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Style {
    #[default]
    European,
    American,
}

macro_rules! string_enum {
    ($ty:ty, $($variant:path => $name:literal),+) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($variant => $name),+ })
            }
        }

        impl FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s {
                    $($name => Ok($variant),)+
                    other => Err(format!(
                        "unknown value '{other}', expected one of: {}",
                        [$($name),+].join(", ")
                    )),
                }
            }
        }
    };
}

string_enum!(WeightsMode, WeightsMode::ExactH => "exact-h", WeightsMode::ApproxP => "approx-p");
string_enum!(Style, Style::European => "european", Style::American => "american");
string_enum!(OptionKind, OptionKind::Put => "put", OptionKind::Call => "call");

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionWeights {
    pub h_up: f64,
    pub h_down: f64,
    pub mode: WeightsMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayoffSpec {
    pub kind: OptionKind,
    pub strike: f64,
}

impl PayoffSpec {
    pub fn new(kind: OptionKind, strike: f64) -> Result<Self> {
        if !(strike.is_finite() && strike > 0.0) {
            return Err(Error::invalid(
                "strike",
                format!("must be > 0, got {strike}"),
            ));
        }
        Ok(PayoffSpec { kind, strike })
    }

    pub fn put(strike: f64) -> Result<Self> {
        Self::new(OptionKind::Put, strike)
    }

    pub fn call(strike: f64) -> Result<Self> {
        Self::new(OptionKind::Call, strike)
    }

    pub fn intrinsic(&self, spot: f64) -> f64 {
        self.kind.intrinsic(spot, self.strike)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingResult {
    pub price: f64,
    pub style: Style,
    #[serde(rename = "mode")]
    pub weights_mode: WeightsMode,
    pub n_steps: usize,
    /// `(step, largest price at which exercising is optimal)`; American only.
    pub exercise_boundary: Option<Vec<(usize, f64)>>,
}

fn check_weights(step: usize, node: usize, w: TransitionWeights) -> Result<TransitionWeights> {
    let inside = |x: f64| x > 0.0 && x < 1.0;
    if inside(w.h_up) && inside(w.h_down) {
        Ok(w)
    } else {
        Err(Error::InadmissibleWeights {
            step,
            node,
            h_up: w.h_up,
            h_down: w.h_down,
        })
    }
}

/// Exact weights around grid index `g`, or `None` for an absorbed node.
fn exact_weights_at(lattice: &Lattice, g: usize) -> Option<(f64, f64)> {
    if lattice.is_floored(g) {
        return None;
    }
    let grid = lattice.grid();
    let (d, s, u) = (grid[g - 1], grid[g], grid[g + 1]);
    let p = lattice.params();
    let dt = lattice.dt();
    if lattice.is_floored(g - 1) {
        // The clamped down price breaks the recombination equation, so keep
        // only the unit-mass and first-moment conditions of the stencil.
        let h_up = (s * (1.0 + p.r * dt) - d) / (u - d);
        return Some((h_up, 1.0 - h_up));
    }
    let width = u - d;
    let drift = p.r * dt * s / width;
    let diffusion = p.variance(s) * dt / width;
    Some((drift + diffusion / (u - s), -drift + diffusion / (s - d)))
}

/// Exact finite-difference weights for reachable node `node` after `step` periods.
pub fn transition_weights_exact(
    lattice: &Lattice,
    step: usize,
    node: usize,
) -> Result<TransitionWeights> {
    if step >= lattice.n_steps() || node > step {
        return Err(Error::invalid(
            "node",
            format!(
                "({step}, {node}) has no successors in a {}-step lattice",
                lattice.n_steps()
            ),
        ));
    }
    let g = lattice.node_index(step, node);
    let (h_up, h_down) = exact_weights_at(lattice, g).ok_or_else(|| {
        Error::invalid("node", format!("({step}, {node}) is absorbed at the floor"))
    })?;
    check_weights(
        step,
        node,
        TransitionWeights {
            h_up,
            h_down,
            mode: WeightsMode::ExactH,
        },
    )
}

fn approx_pair(node_price: f64, params: &CevParams, dt: f64) -> (f64, f64) {
    let growth = (params.r * dt).exp() / (1.0 + params.r * dt);
    let tilt = 0.5 * params.r * dt.sqrt() * node_price.powf(1.0 - params.alpha()) / params.sigma;
    (growth * (0.5 + tilt), growth * (0.5 - tilt))
}

/// Closed-form up probability at a node with price `node_price`.
pub fn up_probability_approx(node_price: f64, params: &CevParams, dt: f64) -> Result<f64> {
    if !(node_price > 0.0) {
        return Err(Error::invalid(
            "node_price",
            format!("must be > 0, got {node_price}"),
        ));
    }
    let (p, _) = approx_pair(node_price, params, dt);
    if p > 0.0 && p < 1.0 {
        Ok(p)
    } else {
        Err(Error::InadmissibleProbability {
            p,
            price: node_price,
        })
    }
}

/// Both approx-p weights as printed: `p_up + p_down = e^{r dt} / (1 + r dt)`.
pub fn transition_weights_approx(
    lattice: &Lattice,
    step: usize,
    node: usize,
) -> Result<TransitionWeights> {
    let s = lattice.grid()[lattice.node_index(step, node)];
    let (h_up, h_down) = approx_pair(s, lattice.params(), lattice.dt());
    check_weights(
        step,
        node,
        TransitionWeights {
            h_up,
            h_down,
            mode: WeightsMode::ApproxP,
        },
    )
}

/// Per-grid-index weights and the one-step discount factor for `mode`.
///
/// Weights depend only on the successor triple, which is the same for a
/// price at any level, so they are computed once per grid index.
struct WeightTable {
    weights: Vec<Option<(f64, f64)>>,
    discount: f64,
}

impl WeightTable {
    fn new(lattice: &Lattice, mode: WeightsMode) -> Result<Self> {
        let n = lattice.n_steps();
        let p = lattice.params();
        let dt = lattice.dt();
        let mut weights = vec![None; 2 * n + 1];
        for (g, slot) in weights.iter_mut().enumerate().take(2 * n).skip(1) {
            if lattice.is_floored(g) {
                continue;
            }
            let (up, down) = match mode {
                WeightsMode::ExactH => {
                    let w = exact_weights_at(lattice, g).expect("non-floored node");
                    debug_assert!(
                        lattice.is_floored(g - 1) || (w.0 + w.1 - 1.0).abs() < 1e-12,
                        "weight identity violated at {g}: {w:?}"
                    );
                    w
                }
                WeightsMode::ApproxP => approx_pair(lattice.grid()[g], p, dt),
            };
            let inside = |x: f64| x > 0.0 && x < 1.0;
            if !(inside(up) && inside(down)) {
                // Report the earliest reachable node sitting on this price.
                let offset = g.abs_diff(n);
                return Err(Error::InadmissibleWeights {
                    step: offset,
                    node: (g + offset - n) / 2,
                    h_up: up,
                    h_down: down,
                });
            }
            *slot = Some((up, down));
        }
        let discount = match mode {
            WeightsMode::ExactH => 1.0 / (1.0 + p.r * dt),
            WeightsMode::ApproxP => (-p.r * dt).exp(),
        };
        Ok(WeightTable { weights, discount })
    }
}

fn absorbed_value(payoff: &PayoffSpec, style: Style, r: f64, remaining: f64) -> f64 {
    match (payoff.kind, style) {
        (OptionKind::Call, _) => 0.0,
        (OptionKind::Put, Style::European) => payoff.strike * (-r * remaining).exp(),
        (OptionKind::Put, Style::American) => payoff.strike,
    }
}

/// Backward induction over the reachable nodes of `lattice`.
///
/// The working set is a single vector of `n_steps + 1` option values.
pub fn price_option(
    lattice: &Lattice,
    payoff: &PayoffSpec,
    style: Style,
    mode: WeightsMode,
) -> Result<PricingResult> {
    let n = lattice.n_steps();
    let grid = lattice.grid();
    let table = WeightTable::new(lattice, mode)?;
    let r = lattice.params().r;
    let dt = lattice.dt();

    let mut values: Vec<f64> = (0..=n)
        .map(|m| payoff.intrinsic(grid[lattice.node_index(n, m)]))
        .collect();
    let mut boundary = Vec::new();

    for step in (0..n).rev() {
        let remaining = (n - step) as f64 * dt;
        let mut critical: Option<f64> = None;
        for m in 0..=step {
            let g = lattice.node_index(step, m);
            let s = grid[g];
            let value = match table.weights[g] {
                None => {
                    if style == Style::American && payoff.intrinsic(s) > 0.0 {
                        critical = Some(critical.map_or(s, |c| c.max(s)));
                    }
                    absorbed_value(payoff, style, r, remaining)
                }
                Some((up, down)) => {
                    let cont = table.discount * (up * values[m + 1] + down * values[m]);
                    match style {
                        Style::European => cont,
                        Style::American => {
                            let intrinsic = payoff.intrinsic(s);
                            if intrinsic > 0.0 && intrinsic >= cont {
                                critical = Some(critical.map_or(s, |c| c.max(s)));
                                intrinsic
                            } else {
                                cont
                            }
                        }
                    }
                }
            };
            values[m] = value;
        }
        if let Some(c) = critical {
            boundary.push((step, c));
        }
    }
    boundary.reverse();

    Ok(PricingResult {
        price: values[0].max(0.0),
        style,
        weights_mode: mode,
        n_steps: n,
        exercise_boundary: (style == Style::American).then_some(boundary),
    })
}

/// Tree-implied distribution of the terminal price as ascending
/// `(price, probability)` pairs.
///
/// Branch weights are normalized to sum to one at every node; mass reaching
/// the floor stays there and is reported as a single entry at the floor.
pub fn terminal_distribution(lattice: &Lattice, mode: WeightsMode) -> Result<Vec<(f64, f64)>> {
    let n = lattice.n_steps();
    let table = WeightTable::new(lattice, mode)?;
    let mut mass = vec![0.0; n + 1];
    let mut next = vec![0.0; n + 1];
    mass[0] = 1.0;
    for step in 0..n {
        next[..=step + 1].fill(0.0);
        for m in 0..=step {
            let g = lattice.node_index(step, m);
            match table.weights[g] {
                None => next[m] += mass[m],
                Some((up, down)) => {
                    let w = up / (up + down);
                    next[m + 1] += mass[m] * w;
                    next[m] += mass[m] * (1.0 - w);
                }
            }
        }
        std::mem::swap(&mut mass, &mut next);
    }

    let grid = lattice.grid();
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(n + 1);
    for (m, &w) in mass.iter().enumerate() {
        let g = lattice.node_index(n, m);
        match out.last_mut() {
            Some(last) if lattice.is_floored(g) && last.0 == grid[g] => last.1 += w,
            _ => out.push((grid[g], w)),
        }
    }
    Ok(out)
}
