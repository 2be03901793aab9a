//! Euler-Maruyama Monte Carlo for the CEV diffusion, used as an oracle.
//!
//! Each path (or antithetic pair) draws from its own ChaCha stream selected
//! by the path index, so output depends only on `(params, cfg)` and not on
//! how paths are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::{CevParams, OptionKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    pub n_paths: usize,
    pub n_time_steps: usize,
    pub seed: u64,
    pub antithetic: bool,
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths < 2 {
            return Err(Error::invalid("paths", "need at least 2 paths"));
        }
        if self.n_time_steps < 1 {
            return Err(Error::invalid("steps", "steps must be ≥ 1"));
        }
        if self.antithetic && !self.n_paths.is_multiple_of(2) {
            return Err(Error::invalid(
                "paths",
                "antithetic sampling needs an even number of paths",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub price: f64,
    pub std_error: f64,
}

// Unlike the lattice, the simulator also accepts sigma = 0.
fn validate_process(params: &CevParams, maturity: f64) -> Result<()> {
    if params.sigma == 0.0 {
        CevParams {
            sigma: 1.0,
            ..*params
        }
        .validate()?;
    } else {
        params.validate()?;
    }
    if !(maturity.is_finite() && maturity > 0.0) {
        return Err(Error::invalid(
            "maturity",
            format!("must be > 0, got {maturity}"),
        ));
    }
    Ok(())
}

struct Stepper {
    drift: f64,
    vol: f64,
    alpha: f64,
    gbm: bool,
    n: usize,
}

impl Stepper {
    fn new(params: &CevParams, maturity: f64, n: usize) -> Self {
        let dt = maturity / n as f64;
        Stepper {
            drift: (params.r - params.q) * dt,
            vol: params.sigma * dt.sqrt(),
            alpha: params.alpha(),
            gbm: params.beta == 2.0,
            n,
        }
    }

    /// Runs one path from `s0` with shocks `sign * Y`; zero is absorbing.
    fn run(&self, s0: f64, sign: f64, shocks: &[f64]) -> f64 {
        let mut s = s0;
        for &y in &shocks[..self.n] {
            let level = if self.gbm { s } else { s.powf(self.alpha) };
            s += self.drift * s + self.vol * level * sign * y;
            if s <= 0.0 {
                return 0.0;
            }
        }
        s
    }
}

fn draw_shocks(seed: u64, stream: u64, buf: &mut [f64]) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    for y in buf.iter_mut() {
        *y = StandardNormal.sample(&mut rng);
    }
}

/// Terminal prices of `cfg.n_paths` full-truncation Euler paths under the
/// risk-neutral drift `r - q`. With antithetic sampling, paths `2i` and
/// `2i + 1` share stream `i` with opposite shocks.
pub fn simulate_terminal(params: &CevParams, maturity: f64, cfg: &McConfig) -> Result<Vec<f64>> {
    validate_process(params, maturity)?;
    cfg.validate()?;
    let stepper = Stepper::new(params, maturity, cfg.n_time_steps);
    let s0 = params.s0;
    let out = if cfg.antithetic {
        (0..cfg.n_paths / 2)
            .into_par_iter()
            .map_init(
                || vec![0.0; cfg.n_time_steps],
                |buf, i| {
                    draw_shocks(cfg.seed, i as u64, buf);
                    [stepper.run(s0, 1.0, buf), stepper.run(s0, -1.0, buf)]
                },
            )
            .flatten_iter()
            .collect()
    } else {
        (0..cfg.n_paths)
            .into_par_iter()
            .map_init(
                || vec![0.0; cfg.n_time_steps],
                |buf, i| {
                    draw_shocks(cfg.seed, i as u64, buf);
                    stepper.run(s0, 1.0, buf)
                },
            )
            .collect()
    };
    Ok(out)
}

/// Discounted mean payoff and its standard error.
///
/// Antithetic pairs are averaged before the error is estimated.
pub fn mc_european_price(
    params: &CevParams,
    strike: f64,
    maturity: f64,
    kind: OptionKind,
    cfg: &McConfig,
) -> Result<McEstimate> {
    if !(strike.is_finite() && strike >= 0.0) {
        return Err(Error::invalid(
            "strike",
            format!("must be >= 0, got {strike}"),
        ));
    }
    let terminal = simulate_terminal(params, maturity, cfg)?;
    let discount = (-params.r * maturity).exp();
    let samples: Vec<f64> = if cfg.antithetic {
        terminal
            .chunks_exact(2)
            .map(|p| 0.5 * (kind.intrinsic(p[0], strike) + kind.intrinsic(p[1], strike)))
            .collect()
    } else {
        terminal
            .iter()
            .map(|&s| kind.intrinsic(s, strike))
            .collect()
    };
    let (mean, std_error) = mean_and_std_error(&samples);
    Ok(McEstimate {
        price: discount * mean,
        std_error: discount * std_error,
    })
}

/// Two-pass mean and standard error of the mean, summed in index order.
pub fn mean_and_std_error(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let ss: f64 = samples.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (n - 1.0) / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n_paths: usize, antithetic: bool) -> McConfig {
        McConfig {
            n_paths,
            n_time_steps: 50,
            seed: 7,
            antithetic,
        }
    }

    #[test]
    fn zero_volatility_is_deterministic_drift() {
        let p = CevParams {
            s0: 1.3,
            sigma: 0.0,
            beta: 1.0,
            r: 0.05,
            q: 0.01,
        };
        let paths = simulate_terminal(&p, 2.0, &cfg(16, false)).unwrap();
        let expected = 1.3 * (1.0f64 + 0.04 * 2.0 / 50.0).powi(50);
        for s in paths {
            assert!((s - expected).abs() < 1e-12 * expected);
        }
    }

    #[test]
    fn same_seed_same_paths() {
        let p = CevParams::no_dividend(1.0, 0.3, 0.7, 0.05).unwrap();
        for anti in [false, true] {
            let a = simulate_terminal(&p, 1.0, &cfg(200, anti)).unwrap();
            let b = simulate_terminal(&p, 1.0, &cfg(200, anti)).unwrap();
            assert_eq!(a, b);
        }
        let other = McConfig {
            seed: 8,
            ..cfg(200, false)
        };
        assert_ne!(
            simulate_terminal(&p, 1.0, &cfg(200, false)).unwrap(),
            simulate_terminal(&p, 1.0, &other).unwrap()
        );
    }

    #[test]
    fn prefix_of_paths_is_stable() {
        // path i depends on (seed, i) only
        let p = CevParams::no_dividend(1.0, 0.3, 0.7, 0.05).unwrap();
        let short = simulate_terminal(&p, 1.0, &cfg(10, false)).unwrap();
        let long = simulate_terminal(&p, 1.0, &cfg(100, false)).unwrap();
        assert_eq!(short[..], long[..10]);
    }

    #[test]
    fn absorbed_paths_stay_at_zero() {
        let p = CevParams::no_dividend(0.05, 0.8, 0.5, 0.0).unwrap();
        let paths = simulate_terminal(&p, 2.0, &cfg(2000, true)).unwrap();
        assert!(paths.iter().all(|&s| s >= 0.0));
        assert!(paths.contains(&0.0));
    }

    #[test]
    fn zero_strike_put_is_worthless() {
        let p = CevParams::no_dividend(1.0, 0.2, 1.0, 0.05).unwrap();
        let est = mc_european_price(&p, 0.0, 1.0, OptionKind::Put, &cfg(100, false)).unwrap();
        assert_eq!(
            est,
            McEstimate {
                price: 0.0,
                std_error: 0.0
            }
        );
    }

    #[test]
    fn config_validation() {
        let p = CevParams::no_dividend(1.0, 0.2, 1.0, 0.05).unwrap();
        assert!(simulate_terminal(&p, 1.0, &cfg(1, false)).is_err());
        assert!(simulate_terminal(&p, 1.0, &cfg(11, true)).is_err());
        assert!(simulate_terminal(
            &p,
            1.0,
            &McConfig {
                n_time_steps: 0,
                ..cfg(10, false)
            }
        )
        .is_err());
        assert!(simulate_terminal(&p, 0.0, &cfg(10, false)).is_err());
    }
}
