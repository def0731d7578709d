use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

use crate::error::{invalid, Error, Result};
use crate::harmonic::RiccatiOptions;
use crate::hitting::{classify_finiteness, ln_expm1, expected_hitting_interval, Finiteness, HittingEvaluator, PhiChoice};
use crate::model::{check_positive, DensityPiece, DensityShape, HalfLineMeasure, RateFunction, Side, Support, TailLaw, TargetDistribution};
use crate::numerics::{gauss_legendre, ln_weighted_sum};

/// `∫ E₀T_a μ(da)` with its split over the two half-lines.
/// `None` stands for an infinite value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValue {
    pub value: Option<f64>,
    /// Contribution of targets with `a > 0`.
    pub positive: Option<f64>,
    /// Contribution of targets with `a < 0`.
    pub negative: Option<f64>,
    /// Relative quadrature error estimate.
    pub error_estimate: f64,
}

impl ObjectiveValue {
    pub fn is_finite(&self) -> bool {
        self.value.is_some()
    }

    /// The value, with `+∞` for an infinite objective.
    pub fn value_or_inf(&self) -> f64 {
        self.value.unwrap_or(f64::INFINITY)
    }
}

#[derive(Clone, Debug)]
pub struct ObjectiveOptions {
    /// Relative change between successive node doublings that ends the
    /// refinement of one density piece.
    pub rel_tol: f64,
    pub max_nodes: usize,
    pub phi: PhiChoice,
    pub riccati: RiccatiOptions,
}

impl Default for ObjectiveOptions {
    fn default() -> Self {
        ObjectiveOptions { rel_tol: 1e-7, max_nodes: 2048, phi: PhiChoice::Phi3, riccati: RiccatiOptions::default() }
    }
}

/// Large-distance growth of `E₀ T_a` along one side.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum Growth {
    /// `log E ≈ g |a|`; `g = 0` means subexponential but faster than any
    /// power, `g = ∞` faster than any exponential.
    Exponential(f64),
    /// `E ≈ C |a|^m`.
    Power(f64),
}

/// Growth of the hitting time along a side whose rate tail is `c |x|^{-p}`:
/// a constant tail gives the rate `√(2c/D)`, a `λD/x²` tail the power
/// `(1 + √(1 + 8λ))/2`.
pub(crate) fn growth_from_tail(law: TailLaw, d: f64) -> Growth {
    if law.c <= 0.0 || law.p > 2.0 {
        return Growth::Power(f64::INFINITY);
    }
    if law.p < 0.0 {
        Growth::Exponential(f64::INFINITY)
    } else if law.p == 0.0 {
        Growth::Exponential((2.0 * law.c / d).sqrt())
    } else if law.p < 2.0 {
        Growth::Exponential(0.0)
    } else {
        let lambda = law.c / d;
        Growth::Power(0.5 * (1.0 + (1.0 + 8.0 * lambda).sqrt()))
    }
}

/// `ln E₀T_a` at a signed target; `None` when infinite.
pub(crate) type LnHitting<'a> = dyn Fn(f64) -> Result<Option<f64>> + Sync + 'a;

/// Expected search time `∫ E₀T_a μ(da)`.
///
/// Each smooth piece of `μ` is integrated with Gauss–Legendre rules whose
/// node count doubles from 16 until successive values agree; unbounded
/// pieces are first mapped to a finite range with a tangent substitution
/// sized by the decay of density × hitting time. Infinite values are
/// detected before quadrature from the rate tails (tail classification and
/// the moment condition against power-tailed targets), and afterwards when
/// the refinement fails to settle.
pub fn expected_search_time(rate: &RateFunction, d: f64, mu: &TargetDistribution, support: &Support) -> Result<ObjectiveValue> {
    expected_search_time_with(rate, d, mu, support, &ObjectiveOptions::default())
}

pub fn expected_search_time_with(
    rate: &RateFunction,
    d: f64,
    mu: &TargetDistribution,
    support: &Support,
    opts: &ObjectiveOptions,
) -> Result<ObjectiveValue> {
    check_positive("D", d)?;
    rate.validate()?;
    support.validate()?;
    let halves = mu.half_measures()?;
    let symmetric = mu.is_symmetric()? && rate.is_even();
    match *support {
        Support::Interval { l1, l2 } => {
            if halves.left.extent() > l1 || halves.right.extent() > l2 {
                return Err(invalid("target law must be supported inside the search interval"));
            }
            let e = |a: f64| -> Result<Option<f64>> { Ok(expected_hitting_interval(rate, d, l1, l2, a)?.log_value) };
            let growth = [Growth::Power(0.0); 2];
            integrate_target(&halves.left, &halves.right, &e, growth, symmetric, opts, 0.0)
        }
        Support::FullLine => {
            rate.validate_full_line()?;
            let report = classify_finiteness(rate, d)?;
            for side in [Side::Left, Side::Right] {
                let massive = !halves.side(side).is_empty();
                // targets on `side` are governed by the opposite tail
                let verdict = match side {
                    Side::Right => report.left,
                    Side::Left => report.right,
                };
                if massive && verdict == Finiteness::Infinite {
                    return Ok(INFINITE);
                }
            }
            let growth = [
                growth_from_tail(rate.tail_law(Side::Left), d),
                growth_from_tail(rate.tail_law(Side::Right), d),
            ];
            let base_err;
            let evaluator;
            let e: Box<LnHitting> = match *rate {
                RateFunction::Constant { r } => {
                    base_err = 1e-15;
                    let s = (2.0 * r / d).sqrt();
                    Box::new(move |a: f64| Ok(Some(ln_expm1(s * a.abs()) - r.ln())))
                }
                _ => {
                    evaluator = HittingEvaluator::new(rate, d, opts.phi, &opts.riccati)?;
                    base_err = evaluator.integrals().error_estimate();
                    let ev = &evaluator;
                    Box::new(move |a: f64| Ok(ev.eval(a)?.log_value))
                }
            };
            integrate_target(&halves.left, &halves.right, &*e, growth, symmetric, opts, base_err)
        }
    }
}

/// Infinite objective; neither side's contribution is reported.
const INFINITE: ObjectiveValue = ObjectiveValue { value: None, positive: None, negative: None, error_estimate: 0.0 };

/// Integrates `E₀T_a` against the two half-line measures.
/// `growth` is indexed `[left, right]`.
pub(crate) fn integrate_target(
    left: &HalfLineMeasure,
    right: &HalfLineMeasure,
    e: &LnHitting,
    growth: [Growth; 2],
    symmetric: bool,
    opts: &ObjectiveOptions,
    extra_err: f64,
) -> Result<ObjectiveValue> {
    let pos = integrate_side(right, 1.0, e, growth[1], opts)?;
    let neg = if symmetric { pos } else { integrate_side(left, -1.0, e, growth[0], opts)? };
    let value = match (pos, neg) {
        (Some((p, _)), Some((n, _))) => Some(p + n),
        _ => None,
    };
    let error_estimate = match (pos, neg) {
        (Some((p, ep)), Some((n, en))) if p + n > 0.0 => (p * ep + n * en) / (p + n) + extra_err,
        _ => 0.0,
    };
    Ok(ObjectiveValue { value, positive: pos.map(|p| p.0), negative: neg.map(|n| n.0), error_estimate })
}

/// `(value, relative error)` of one side, `None` when infinite.
fn integrate_side(m: &HalfLineMeasure, sign: f64, e: &LnHitting, growth: Growth, opts: &ObjectiveOptions) -> Result<Option<(f64, f64)>> {
    let mut total = 0.0;
    let mut abs_err = 0.0;
    for &(t, w) in &m.atoms {
        if w <= 0.0 {
            continue;
        }
        match e(sign * t)? {
            Some(l) => total += w * l.exp(),
            None => return Ok(None),
        }
    }
    for piece in &m.pieces {
        if piece.shape.mass(piece.lo, piece.hi) <= 0.0 {
            continue;
        }
        match integrate_piece(piece, sign, e, growth, opts)? {
            Some((v, err)) => {
                total += v;
                abs_err += v * err;
            }
            None => return Ok(None),
        }
    }
    if !total.is_finite() {
        return Ok(None);
    }
    Ok(Some((total, if total > 0.0 { abs_err / total } else { 0.0 })))
}

#[derive(Clone, Copy, Debug)]
enum Map {
    Linear { lo: f64, hi: f64 },
    /// `t = lo + c tan θ`.
    Tan { lo: f64, c: f64 },
    /// `t = lo · exp(c tan θ)`.
    LogTan { lo: f64, c: f64 },
}

impl Map {
    /// `(t, ln t, ln dt/dz)` for `z ∈ (-1, 1)`.
    fn node(&self, z: f64) -> (f64, f64, f64) {
        use std::f64::consts::FRAC_PI_4;
        match *self {
            Map::Linear { lo, hi } => {
                let t = lo + 0.5 * (hi - lo) * (z + 1.0);
                (t, t.ln(), (0.5 * (hi - lo)).ln())
            }
            Map::Tan { lo, c } => {
                let th = FRAC_PI_4 * (z + 1.0);
                let cos = th.cos();
                let t = lo + c * th.tan();
                (t, t.ln(), (c * FRAC_PI_4).ln() - 2.0 * cos.ln())
            }
            Map::LogTan { lo, c } => {
                let th = FRAC_PI_4 * (z + 1.0);
                let u = c * th.tan();
                let ln_t = lo.ln() + u;
                (ln_t.exp(), ln_t, ln_t + (c * FRAC_PI_4).ln() - 2.0 * th.cos().ln())
            }
        }
    }
}

fn rules() -> &'static Vec<(Vec<f64>, Vec<f64>)> {
    static RULES: OnceLock<Vec<(Vec<f64>, Vec<f64>)>> = OnceLock::new();
    RULES.get_or_init(|| (4..=12).map(|k| gauss_legendre(1 << k)).collect())
}

fn rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let k = n.trailing_zeros() as usize;
    if n.is_power_of_two() && (4..=12).contains(&k) {
        rules()[k - 4].clone()
    } else {
        gauss_legendre(n)
    }
}

/// Chooses the substitution for a piece, or `None` when the integral is
/// infinite by the growth test.
fn piece_map(piece: &DensityPiece, growth: Growth) -> Option<Map> {
    if piece.hi.is_finite() {
        return Some(Map::Linear { lo: piece.lo, hi: piece.hi });
    }
    match piece.shape {
        DensityShape::Exponential { rate, .. } => match growth {
            Growth::Exponential(g) => {
                if g >= rate * (1.0 - 1e-12) {
                    None
                } else {
                    Some(Map::Tan { lo: piece.lo, c: 1.0 / (rate - g) })
                }
            }
            Growth::Power(m) if m.is_finite() => Some(Map::Tan { lo: piece.lo, c: (1.0 + m) / rate }),
            Growth::Power(_) => None,
        },
        DensityShape::PowerTail { alpha, .. } => match growth {
            Growth::Power(m) if m < alpha => Some(Map::LogTan { lo: piece.lo, c: 1.0 / (alpha - m) }),
            _ => None,
        },
        // a linear density on an unbounded piece has infinite mass
        DensityShape::Linear { .. } => None,
    }
}

fn integrate_piece(piece: &DensityPiece, sign: f64, e: &LnHitting, growth: Growth, opts: &ObjectiveOptions) -> Result<Option<(f64, f64)>> {
    let Some(map) = piece_map(piece, growth) else {
        return Ok(None);
    };
    let mut prev: Option<f64> = None;
    let mut n = 16;
    while n <= opts.max_nodes {
        let (z, w) = rule(n);
        let Some(ln_i) = ln_rule(&map, piece, sign, e, growth, &z, &w)? else {
            return Ok(None);
        };
        if let Some(p) = prev {
            let change = (ln_i - p).abs();
            if change < opts.rel_tol {
                return Ok(Some((ln_i.exp(), change.max(1e-15))));
            }
        }
        prev = Some(ln_i);
        n *= 2;
    }
    // refinement failed to settle: the tail carries unbounded mass
    Ok(None)
}

/// `ln Σ wᵢ density(tᵢ) E(tᵢ) jac(zᵢ)`. Nodes where the hitting time cannot
/// be evaluated (beyond the solution's domain) are extrapolated from the
/// last evaluated node with the known growth law.
fn ln_rule(map: &Map, piece: &DensityPiece, sign: f64, e: &LnHitting, growth: Growth, z: &[f64], w: &[f64]) -> Result<Option<f64>> {
    let nodes: Vec<(f64, f64, f64)> = z.iter().map(|&zi| map.node(zi)).collect();
    let evals: Vec<Result<Option<f64>>> = nodes
        .par_iter()
        .map(|&(t, _, _)| if t.is_finite() && t > 0.0 { e(sign * t) } else { Err(Error::NonFinite) })
        .collect();
    let mut logs = Vec::with_capacity(nodes.len());
    let mut last: Option<(f64, f64, f64)> = None;
    for (&(t, ln_t, ln_jac), ev) in nodes.iter().zip(evals) {
        let ln_e = match ev {
            Ok(Some(l)) if l.is_finite() || l == f64::NEG_INFINITY => {
                last = Some((t, ln_t, l));
                l
            }
            Ok(Some(_)) => return Err(Error::NonFinite),
            Ok(None) => return Ok(None),
            Err(Error::DomainExceeded { .. }) | Err(Error::NonFinite) => match last {
                Some((t0, ln_t0, l0)) => match growth {
                    Growth::Power(m) => l0 + m * (ln_t - ln_t0),
                    Growth::Exponential(g) => l0 + g * (t - t0),
                },
                None => return Err(Error::NonFinite),
            },
            Err(err) => return Err(err),
        };
        let ln_dens = match piece.shape {
            DensityShape::PowerTail { c, alpha } => c.ln() - (1.0 + alpha) * ln_t,
            s => s.ln_density(t),
        };
        logs.push(ln_e + ln_dens + ln_jac);
    }
    let v = ln_weighted_sum(&logs, w);
    if v.is_nan() {
        return Err(Error::NonFinite);
    }
    Ok(Some(v))
}
