//! Monte Carlo simulation of the resetting diffusion, used as an
//! independent check on the analytic pipeline.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{check_positive, RateFunction, Support};

/// Simulation settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub n_paths: usize,
    pub t_max: f64,
    pub seed: u64,
    pub bridge_correction: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { dt: 1e-4, n_paths: 200_000, t_max: 1e3, seed: 0, bridge_correction: true }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        check_positive("dt", self.dt)?;
        check_positive("t_max", self.t_max)?;
        if self.n_paths == 0 {
            return Err(Error::InvalidConfig("n_paths must be >= 1".into()));
        }
        Ok(())
    }
}

/// Empirical estimate of `E₀ T_a`. Censored paths count as `t_max`, so the
/// mean is a lower bound whenever `censored_fraction > 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub censored_fraction: f64,
    pub n: usize,
    pub seed: u64,
}

/// Outcome of one path: absorption time, or `None` when censored.
pub type PathOutcome = Option<f64>;

/// Probability that a Brownian bridge between `x` and `y` (same side of
/// `b`) touched `b` during a step; `inv` is `2/(D dt)`. Exactly zero when
/// below `e^{-40}`, which skips the exponential for most steps.
#[inline]
fn bridge_hit(b: f64, x: f64, y: f64, inv: f64) -> f64 {
    let e = (b - x) * (b - y) * inv;
    if e > 40.0 {
        0.0
    } else {
        (-e).exp()
    }
}

fn simulate_path(rate: &RateFunction, d: f64, a: f64, support: &Support, cfg: &SimConfig, index: usize) -> PathOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let sd = (d * cfg.dt).sqrt();
    let inv = 2.0 / (d * cfg.dt);
    let max_steps = (cfg.t_max / cfg.dt).ceil() as u64;
    // For a constant rate the per-step reset trials are replaced by a
    // geometric countdown with the same law: floor(Exp(1) / (r dt)) steps
    // pass before the next reset.
    let constant = match *rate {
        RateFunction::Constant { r } => Some(r * cfg.dt),
        _ => None,
    };
    let draw_countdown = |rng: &mut ChaCha8Rng, rdt: f64| -> u64 {
        if rdt > 0.0 {
            let e: f64 = rng.sample(Exp1);
            (e / rdt).floor().min(u64::MAX as f64) as u64
        } else {
            u64::MAX
        }
    };
    let mut countdown = constant.map_or(0, |rdt| draw_countdown(&mut rng, rdt));
    let bounds = match *support {
        Support::FullLine => None,
        Support::Interval { l1, l2 } => Some((-l1, l2)),
    };
    let mut x = 0.0f64;
    for k in 0..max_steps {
        match constant {
            Some(rdt) => {
                if countdown == 0 {
                    x = 0.0;
                    countdown = draw_countdown(&mut rng, rdt);
                    continue;
                }
                countdown -= 1;
            }
            None => {
                let p_reset = -(-rate.eval(x) * cfg.dt).exp_m1();
                if p_reset > 0.0 && rng.random::<f64>() < p_reset {
                    x = 0.0;
                    continue;
                }
            }
        }
        let z: f64 = rng.sample(StandardNormal);
        let y = x + sd * z;
        let t_next = (k + 1) as f64 * cfg.dt;
        if (x - a) * (y - a) <= 0.0 {
            return Some(t_next);
        }
        if cfg.bridge_correction {
            let p = bridge_hit(a, x, y, inv);
            if p > 0.0 && rng.random::<f64>() < p {
                return Some(t_next);
            }
        }
        if let Some((lo, hi)) = bounds {
            if y <= lo || y >= hi {
                x = 0.0;
                continue;
            }
            if cfg.bridge_correction {
                let p = bridge_hit(lo, x, y, inv).max(bridge_hit(hi, x, y, inv));
                if p > 0.0 && rng.random::<f64>() < p {
                    x = 0.0;
                    continue;
                }
            }
        }
        x = y;
    }
    None
}

/// Simulates `n_paths` independent paths. Each path draws from its own
/// ChaCha stream selected by its index, so the result does not depend on
/// the thread count.
pub fn simulate_paths(rate: &RateFunction, d: f64, a: f64, support: &Support, cfg: &SimConfig) -> Result<Vec<PathOutcome>> {
    check_positive("D", d)?;
    cfg.validate()?;
    rate.validate()?;
    support.validate()?;
    if a == 0.0 || !support.contains(a) {
        return Err(Error::InvalidConfig(format!("target {a} must be nonzero and inside the support")));
    }
    Ok((0..cfg.n_paths)
        .into_par_iter()
        .map(|i| simulate_path(rate, d, a, support, cfg, i))
        .collect())
}

/// Estimates `E₀ T_a` by simulation.
///
/// Paths follow the Euler scheme `X += √(D dt) Z`. Before each move the
/// path resets to the origin with probability `1 - exp(-r(X) dt)`. Hitting
/// is detected by a sign change of `X - a`, plus the Brownian-bridge
/// crossing probability when enabled. On an interval support, leaving
/// `[-L1, L2]` resets the path.
pub fn simulate_hitting(rate: &RateFunction, d: f64, a: f64, support: &Support, cfg: &SimConfig) -> Result<McEstimate> {
    let outcomes = simulate_paths(rate, d, a, support, cfg)?;
    let estimate = summarize(&outcomes, cfg);
    if estimate.censored_fraction > 0.05 {
        return Err(Error::ExcessCensoring {
            fraction: estimate.censored_fraction,
            estimate: Box::new(estimate),
        });
    }
    Ok(estimate)
}

fn summarize(outcomes: &[PathOutcome], cfg: &SimConfig) -> McEstimate {
    let n = outcomes.len();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut censored = 0usize;
    for o in outcomes {
        let t = match o {
            Some(t) => *t,
            None => {
                censored += 1;
                cfg.t_max
            }
        };
        sum += t;
        sum_sq += t * t;
    }
    let nf = n as f64;
    let mean = sum / nf;
    let var = if n > 1 { ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0) } else { 0.0 };
    McEstimate {
        mean,
        stderr: (var / nf).sqrt(),
        censored_fraction: censored as f64 / nf,
        n,
        seed: cfg.seed,
    }
}

/// Empirical `P(T_a > t)` on a grid of times not exceeding `t_max`.
pub fn survival_curve(
    rate: &RateFunction,
    d: f64,
    a: f64,
    support: &Support,
    cfg: &SimConfig,
    ts: &[f64],
) -> Result<Vec<f64>> {
    if ts.iter().any(|&t| !(0.0..=cfg.t_max).contains(&t)) {
        return Err(Error::InvalidConfig("survival times must lie in [0, t_max]".into()));
    }
    let mut times: Vec<f64> = simulate_paths(rate, d, a, support, cfg)?
        .into_iter()
        .map(|o| o.unwrap_or(f64::INFINITY))
        .collect();
    times.sort_by(f64::total_cmp);
    let n = times.len() as f64;
    Ok(ts
        .iter()
        .map(|&t| {
            let at_or_below = times.partition_point(|&x| x <= t);
            (times.len() - at_or_below) as f64 / n
        })
        .collect())
}
