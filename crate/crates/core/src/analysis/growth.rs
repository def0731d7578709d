use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::harmonic::RiccatiOptions;
use crate::hitting::{expected_hitting_constant, HittingEvaluator, PhiChoice};
use crate::model::{check_positive, RateFunction};

/// Which law to fit to `E₀T_a` over a grid of targets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum GrowthModelChoice {
    /// `log E ≈ K |a|^{l+1} + b`.
    LogPolynomial { l: f64 },
    /// `log E ≈ p log|a| + log C`.
    PowerLaw,
}

/// Fitted law.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GrowthModel {
    LogPolynomial { k: f64, exponent: f64 },
    PowerLaw { c: f64, exponent: f64 },
}

/// Least-squares growth fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub model: GrowthModel,
    /// `q = l + 1` for the log-polynomial law, `p` for the power law.
    pub exponent: f64,
    /// `K` or `C`.
    pub prefactor: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit in `log E`.
    pub residual: f64,
    pub r_squared: f64,
    pub a_range: (f64, f64),
    /// `(a, log E₀T_a)` samples.
    pub samples: Vec<(f64, f64)>,
}

/// Fits the growth of `E₀T_a` along a target grid (at least four nonzero
/// targets). The log-polynomial law regresses `log E` on `|a|^{l+1}`, the
/// power law `log E` on `log|a|`.
pub fn estimate_growth(rate: &RateFunction, d: f64, grid: &[f64], choice: GrowthModelChoice) -> Result<GrowthFit> {
    check_positive("D", d)?;
    if grid.len() < 4 {
        return Err(invalid("growth fits need at least 4 grid points"));
    }
    if grid.iter().any(|a| *a == 0.0 || !a.is_finite()) {
        return Err(invalid("growth grid points must be finite and nonzero"));
    }
    if let GrowthModelChoice::LogPolynomial { l } = choice {
        if !(l > -1.0 && l.is_finite()) {
            return Err(invalid("log-polynomial exponent needs l > -1"));
        }
    }
    let ln_e: Box<dyn Fn(f64) -> Result<Option<f64>>> = match *rate {
        RateFunction::Constant { r } => Box::new(move |a| Ok(expected_hitting_constant(r, d, a)?.log_value)),
        _ => {
            let ev = HittingEvaluator::new(rate, d, PhiChoice::Phi3, &RiccatiOptions::default())?;
            Box::new(move |a| Ok(ev.eval(a)?.log_value))
        }
    };
    let mut samples = Vec::with_capacity(grid.len());
    for &a in grid {
        match ln_e(a)? {
            Some(l) => samples.push((a, l)),
            None => return Err(Error::InfiniteSample(a)),
        }
    }
    let xs: Vec<f64> = samples
        .iter()
        .map(|&(a, _)| match choice {
            GrowthModelChoice::LogPolynomial { l } => a.abs().powf(l + 1.0),
            GrowthModelChoice::PowerLaw => a.abs().ln(),
        })
        .collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let (slope, intercept, rms, r2) = linear_fit(&xs, &ys)?;
    let (model, exponent, prefactor) = match choice {
        GrowthModelChoice::LogPolynomial { l } => (GrowthModel::LogPolynomial { k: slope, exponent: l + 1.0 }, l + 1.0, slope),
        GrowthModelChoice::PowerLaw => {
            let c = intercept.exp();
            (GrowthModel::PowerLaw { c, exponent: slope }, slope, c)
        }
    };
    let lo = grid.iter().map(|a| a.abs()).fold(f64::INFINITY, f64::min);
    let hi = grid.iter().map(|a| a.abs()).fold(0.0, f64::max);
    Ok(GrowthFit { model, exponent, prefactor, intercept, residual: rms, r_squared: r2, a_range: (lo, hi), samples })
}

/// `(slope, intercept, rms residual, R²)`.
fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64, f64)> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(invalid("growth grid needs at least two distinct |a|"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Ok((slope, intercept, (sse / n).sqrt(), r2))
}
