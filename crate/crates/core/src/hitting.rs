//! Expected hitting times `E₀ T_a`: closed forms, the general
//! harmonic-function representation, the tail-based finiteness classifier
//! and the compact-interval case.

use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;

use crate::error::{invalid, Error, Result};
use crate::harmonic::{
    build_phi1, build_phi3, CumulativeIntegrals, HarmonicSolution, PhiKind, RiccatiOptions,
};
use crate::model::{check_positive, RateFunction, Side};
use crate::numerics::ln_add_exp;

/// How a hitting time was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    ClosedForm,
    Phi3Quadrature,
    Phi1Quadrature,
    IntervalClosedForm,
    IntervalGeneral,
}

/// Outcome of the tail classification for one tail or overall.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Finiteness {
    Finite,
    Infinite,
    Boundary,
}

impl std::fmt::Display for Finiteness {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Finiteness::Finite => "finite",
            Finiteness::Infinite => "infinite",
            Finiteness::Boundary => "boundary",
        })
    }
}

/// `E₀ T_a` in log space. `log_value = None` means the expectation is
/// infinite; `a = 0` gives `Some(-inf)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HittingTimeResult {
    pub a: f64,
    pub log_value: Option<f64>,
    pub method: Method,
    /// Relative error estimate.
    pub error_estimate: f64,
    /// Verdict of the tail classifier for the tail that matters for this
    /// `a`, when one was consulted.
    pub classifier: Option<Finiteness>,
}

impl HittingTimeResult {
    pub fn value(&self) -> f64 {
        self.log_value.map_or(f64::INFINITY, f64::exp)
    }

    pub fn is_finite(&self) -> bool {
        self.log_value.is_some()
    }

    fn zero(a: f64, method: Method) -> Self {
        HittingTimeResult { a, log_value: Some(f64::NEG_INFINITY), method, error_estimate: 0.0, classifier: None }
    }
}

/// `u(0)` and `v(0)` of the hitting problem for target `a`, in log space.
/// `E₀ T_a = v(0)/u(0)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HittingComponents {
    pub a: f64,
    pub ln_u: f64,
    /// `None` when `v ≡ ∞`.
    pub ln_v: Option<f64>,
}

impl HittingComponents {
    pub fn ln_expectation(&self) -> Option<f64> {
        self.ln_v.map(|v| v - self.ln_u)
    }
}

/// `ln(e^x - 1)` for `x > 0`.
pub(crate) fn ln_expm1(x: f64) -> f64 {
    if x > 40.0 {
        x + (-(-x).exp()).ln_1p()
    } else {
        x.exp_m1().ln()
    }
}

/// Constant rate on the full line: `E₀ T_a = (e^{√(2r/D)|a|} - 1)/r`.
pub fn expected_hitting_constant(r: f64, d: f64, a: f64) -> Result<HittingTimeResult> {
    check_positive("r", r)?;
    check_positive("D", d)?;
    if !a.is_finite() {
        return Err(invalid("target position must be finite"));
    }
    if a == 0.0 {
        return Ok(HittingTimeResult::zero(a, Method::ClosedForm));
    }
    let s = (2.0 * r / d).sqrt();
    Ok(HittingTimeResult {
        a,
        log_value: Some(ln_expm1(s * a.abs()) - r.ln()),
        method: Method::ClosedForm,
        error_estimate: 1e-15,
        classifier: Some(Finiteness::Finite),
    })
}

/// Which harmonic function the general evaluator uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhiChoice {
    Phi3,
    Phi1,
}

/// `u(0)`, `v(0)` from the cumulative integrals of a harmonic function.
///
/// With `t = |a|` on side `σ` of the target, write `G`, `P`, `W` for the
/// cumulative integrals along `σ` and `I`, `J`, `Q` for the totals of
/// `G`, `W`, `P` along the opposite side. When `I < ∞`:
/// `u = φ(0)/φ(a) · I/(I + G)` and `v = (2/D) φ(0)(I W + J G)/(I + G)`.
/// When `I = ∞`: `u = φ(0)/φ(a)` and `v = (2/D) φ(0)(Q G + W)`. The nested
/// integrals of the representation reduce to these products exactly.
pub fn hitting_components(ci: &CumulativeIntegrals, d: f64, a: f64) -> Result<HittingComponents> {
    check_positive("D", d)?;
    if a == 0.0 || !a.is_finite() {
        return Err(invalid("components need a finite nonzero target"));
    }
    let declared = ci.phi().kind();
    match ci.implied_kind() {
        Some(found) if found == declared => {}
        found => {
            return Err(Error::KindMismatch {
                declared: declared.to_string(),
                found: found.map_or("none".to_string(), |k| k.to_string()),
            })
        }
    }
    let side = Side::of(a);
    let t = a.abs();
    let phi = ci.phi();
    let l_a = phi.log_phi(a)?;
    let ln_2d = (2.0 / d).ln();
    // φ(0) with the Green's-function factor 2/D folded in for v
    let l_0 = phi.log_phi(0.0)? + ln_2d;
    let (ln_g, ln_w) = ci.g_w_at(side, t)?;
    let opp = ci.totals(side.opposite());
    let (ln_u, ln_v) = match opp.g.ln() {
        Some(ln_i) => {
            let ln_den = ln_add_exp(ln_i, ln_g);
            let ln_u = l_0 - ln_2d - l_a + ln_i - ln_den;
            let ln_v = opp
                .w
                .ln()
                .map(|ln_j| l_0 + ln_add_exp(ln_i + ln_w, ln_j + ln_g) - ln_den);
            (ln_u, ln_v)
        }
        None => {
            let ln_v = opp.p.ln().map(|ln_q| l_0 + ln_add_exp(ln_q + ln_g, ln_w));
            (l_0 - ln_2d - l_a, ln_v)
        }
    };
    Ok(HittingComponents { a, ln_u, ln_v })
}

/// Tail-based finiteness verdicts. The tail opposite to the target decides:
/// `a > 0` is governed by the left tail, `a < 0` by the right tail.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinitenessReport {
    pub left: Finiteness,
    pub right: Finiteness,
    pub overall: Finiteness,
    /// Limits of `x² r(x)/D` along each tail.
    pub lambda_left: f64,
    pub lambda_right: f64,
}

impl FinitenessReport {
    /// Verdict relevant to a target at `a`.
    pub fn for_target(&self, a: f64) -> Finiteness {
        if a > 0.0 {
            self.left
        } else {
            self.right
        }
    }
}

/// Classifies finiteness of `E₀ T_a` from the rate's tails: tails with
/// `x² r/D → λ > 1` give finite values, `λ < 1` (in particular
/// `r <= D/(γ + x²)` eventually) infinite values, `λ = 1` without a
/// dominating comparison is reported as a boundary case.
pub fn classify_finiteness(rate: &RateFunction, d: f64) -> Result<FinitenessReport> {
    check_positive("D", d)?;
    rate.validate()?;
    let verdict = |side: Side| -> (Finiteness, f64) {
        let lam = rate.tail_law(side).lambda_hat(d);
        let f = if rate.is_identically_zero() || lam < 1.0 - 1e-12 {
            Finiteness::Infinite
        } else if lam > 1.0 + 1e-12 {
            Finiteness::Finite
        } else if matches!(rate, RateFunction::PowerLaw { .. }) {
            // c (γ + x²)^{-1} with c = D is exactly the critical comparison rate
            Finiteness::Infinite
        } else {
            Finiteness::Boundary
        };
        (f, lam)
    };
    let (left, lambda_left) = verdict(Side::Left);
    let (right, lambda_right) = verdict(Side::Right);
    let overall = if left == Finiteness::Infinite || right == Finiteness::Infinite {
        Finiteness::Infinite
    } else if left == Finiteness::Finite && right == Finiteness::Finite {
        Finiteness::Finite
    } else {
        Finiteness::Boundary
    };
    Ok(FinitenessReport { left, right, overall, lambda_left, lambda_right })
}

/// Prebuilt harmonic function and cumulative integrals for evaluating many
/// targets under one rate.
#[derive(Clone, Debug)]
pub struct HittingEvaluator {
    ci: CumulativeIntegrals,
    d: f64,
    method: Method,
    classifier: Option<FinitenessReport>,
    base_error: f64,
}

impl HittingEvaluator {
    pub fn new(rate: &RateFunction, d: f64, choice: PhiChoice, opts: &RiccatiOptions) -> Result<Self> {
        check_positive("D", d)?;
        rate.validate_full_line()?;
        let classifier = classify_finiteness(rate, d)?;
        let (phi, method) = match choice {
            PhiChoice::Phi3 => (build_phi3(rate, d, opts)?, Method::Phi3Quadrature),
            PhiChoice::Phi1 => (build_phi1(rate, d, opts)?, Method::Phi1Quadrature),
        };
        let mut ev = Self::from_phi(&phi, d)?;
        ev.method = method;
        ev.classifier = Some(classifier);
        Ok(ev)
    }

    /// Evaluator for an arbitrary harmonic function, without classifier.
    pub fn from_phi(phi: &HarmonicSolution, d: f64) -> Result<Self> {
        check_positive("D", d)?;
        let ci = CumulativeIntegrals::new(phi)?;
        let method = match phi.kind() {
            PhiKind::Phi3 => Method::Phi3Quadrature,
            PhiKind::Phi1 | PhiKind::Phi2 => Method::Phi1Quadrature,
        };
        let base_error = if phi.closed_form().is_some() { 1e-12 } else { 1e-7 };
        Ok(HittingEvaluator { ci, d, method, classifier: None, base_error })
    }

    pub fn integrals(&self) -> &CumulativeIntegrals {
        &self.ci
    }

    pub fn classifier(&self) -> Option<&FinitenessReport> {
        self.classifier.as_ref()
    }

    pub fn components(&self, a: f64) -> Result<HittingComponents> {
        hitting_components(&self.ci, self.d, a)
    }

    /// `E₀ T_a`, cross-checked against the classifier when available.
    pub fn eval(&self, a: f64) -> Result<HittingTimeResult> {
        if a == 0.0 {
            return Ok(HittingTimeResult::zero(a, self.method));
        }
        let comp = self.components(a)?;
        let log_value = comp.ln_expectation();
        let verdict = self.classifier.map(|c| c.for_target(a));
        if let Some(v) = verdict {
            let quad = if log_value.is_some() { Finiteness::Finite } else { Finiteness::Infinite };
            if v != Finiteness::Boundary && v != quad {
                return Err(Error::ChannelDisagreement { classifier: v.to_string(), quadrature: quad.to_string() });
            }
        }
        Ok(HittingTimeResult {
            a,
            log_value,
            method: self.method,
            error_estimate: self.base_error + self.ci.error_estimate(),
            classifier: verdict,
        })
    }
}

/// `E₀ T_a` for a general full-line rate via φ₃ or φ₁.
pub fn expected_hitting_general(rate: &RateFunction, d: f64, a: f64, choice: PhiChoice) -> Result<HittingTimeResult> {
    if a == 0.0 {
        rate.validate_full_line()?;
        let method = match choice {
            PhiChoice::Phi3 => Method::Phi3Quadrature,
            PhiChoice::Phi1 => Method::Phi1Quadrature,
        };
        return Ok(HittingTimeResult::zero(a, method));
    }
    HittingEvaluator::new(rate, d, choice, &RiccatiOptions::default())?.eval(a)
}

/// `E₀ T_a` for search on `[-L1, L2]` with reset at the endpoints.
pub fn expected_hitting_interval(rate: &RateFunction, d: f64, l1: f64, l2: f64, a: f64) -> Result<HittingTimeResult> {
    check_positive("D", d)?;
    check_positive("L1", l1)?;
    check_positive("L2", l2)?;
    rate.validate()?;
    if !(a >= -l1 && a <= l2) {
        return Err(Error::TargetOutsideInterval { a, l1, l2 });
    }
    if a == 0.0 {
        return Ok(HittingTimeResult::zero(a, Method::IntervalClosedForm));
    }
    // distance to the target and extent of the interval behind the origin
    let (t, back) = if a > 0.0 { (a, l1) } else { (-a, l2) };
    match *rate {
        RateFunction::Constant { r } => Ok(HittingTimeResult {
            a,
            log_value: Some(interval_constant_ln(r, d, back, t)),
            method: Method::IntervalClosedForm,
            error_estimate: 1e-14,
            classifier: None,
        }),
        _ => interval_shooting(rate, d, l1, l2, a),
    }
}

/// `ln E` for a constant rate on an interval, in the stable form
/// `(1/r)[sinh(s t) tanh(s L/2) + cosh(s t) - 1]`, `s = √(2r/D)`;
/// `t(t + L)/D` when `r = 0`.
fn interval_constant_ln(r: f64, d: f64, back: f64, t: f64) -> f64 {
    if r == 0.0 {
        return (t * (t + back) / d).ln();
    }
    let s = (2.0 * r / d).sqrt();
    let x = s * t;
    let th = (0.5 * s * back).tanh();
    if x < 40.0 {
        let h = (0.5 * x).sinh();
        (x.sinh() * th + 2.0 * h * h).ln() - r.ln()
    } else {
        x - LN_2 + (th + 1.0).ln() - r.ln()
    }
}

/// General-rate interval solution by shooting from `-L1` (after mirroring
/// when `a < 0`): a fundamental pair and a particular solution of
/// `(D/2) y'' - r y = -1` turn the nonlocal conditions `u(a) = 1`,
/// `u(-L1) = u(0)` and `v(a) = 0`, `v(-L1) = v(0)` into 2×2 systems.
pub fn interval_shooting(rate: &RateFunction, d: f64, l1: f64, l2: f64, a: f64) -> Result<HittingTimeResult> {
    check_positive("D", d)?;
    if !(a >= -l1 && a <= l2) || a == 0.0 {
        return Err(Error::TargetOutsideInterval { a, l1, l2 });
    }
    let sign = if a > 0.0 { 1.0 } else { -1.0 };
    let (t, back) = if a > 0.0 { (a, l1) } else { (-a, l2) };
    let r = |x: f64| rate.eval(sign * x);
    let kappa_max = (0..=400)
        .map(|i| -back + (back + t) * i as f64 / 400.0)
        .map(|x| (2.0 * r(x) / d).sqrt())
        .fold(0.0, f64::max);
    if kappa_max * (back + t) > 600.0 {
        return Err(invalid("interval too long relative to the rate for direct shooting"));
    }
    let n = (2000.0f64).max((50.0 * kappa_max * (back + t)).ceil()) as usize;
    let coarse = shoot(&r, d, back, t, n)?;
    let fine = shoot(&r, d, back, t, 2 * n)?;
    let err = ((fine - coarse) / fine).abs() / 15.0;
    Ok(HittingTimeResult {
        a,
        log_value: Some(fine.ln()),
        method: Method::IntervalGeneral,
        error_estimate: err.max(1e-14),
        classifier: None,
    })
}

fn shoot(r: &dyn Fn(f64) -> f64, d: f64, back: f64, t: f64, n: usize) -> Result<f64> {
    // state: y1, y1', y2, y2', yp, yp'
    let f = |x: f64, y: &[f64; 6]| -> [f64; 6] {
        let k = 2.0 * r(x) / d;
        [y[1], k * y[0], y[3], k * y[2], y[5], k * y[4] - 2.0 / d]
    };
    let step = |x: f64, y: &[f64; 6], h: f64| -> [f64; 6] {
        let add = |y: &[f64; 6], k: &[f64; 6], c: f64| -> [f64; 6] {
            let mut o = *y;
            for i in 0..6 {
                o[i] += c * k[i];
            }
            o
        };
        let k1 = f(x, y);
        let k2 = f(x + 0.5 * h, &add(y, &k1, 0.5 * h));
        let k3 = f(x + 0.5 * h, &add(y, &k2, 0.5 * h));
        let k4 = f(x + h, &add(y, &k3, h));
        let mut o = *y;
        for i in 0..6 {
            o[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        o
    };
    let run = |x0: f64, x1: f64, y0: [f64; 6], steps: usize| -> [f64; 6] {
        let h = (x1 - x0) / steps as f64;
        let mut y = y0;
        for i in 0..steps {
            y = step(x0 + i as f64 * h, &y, h);
        }
        y
    };
    let n_back = ((n as f64) * back / (back + t)).ceil().max(10.0) as usize;
    let n_front = ((n as f64) * t / (back + t)).ceil().max(10.0) as usize;
    let at0 = run(-back, 0.0, [1.0, 0.0, 0.0, 1.0, 0.0, 0.0], n_back);
    let at_a = run(0.0, t, at0, n_front);
    let (y1_0, y2_0, yp_0) = (at0[0], at0[2], at0[4]);
    let (y1_a, y2_a, yp_a) = (at_a[0], at_a[2], at_a[4]);
    // rows: value at a; y(-L) - y(0) with y1(-L) = 1, y2(-L) = 0, yp(-L) = 0
    let (m00, m01, m10, m11) = (y1_a, y2_a, 1.0 - y1_0, -y2_0);
    let det = m00 * m11 - m01 * m10;
    if !(det.abs() > 1e-12 * (m00 * m11).abs().max((m01 * m10).abs())) {
        return Err(Error::SingularSystem { det });
    }
    let solve = |b0: f64, b1: f64| ((b0 * m11 - m01 * b1) / det, (m00 * b1 - m10 * b0) / det);
    let (au, bu) = solve(1.0, 0.0);
    let u0 = au * y1_0 + bu * y2_0;
    let (av, bv) = solve(-yp_a, yp_0);
    let v0 = yp_0 + av * y1_0 + bv * y2_0;
    Ok(v0 / u0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_examples() {
        let e = expected_hitting_constant(2.0, 2.0, 1.0).unwrap();
        assert!((e.value() - (2f64.sqrt().exp() - 1.0) / 2.0).abs() < 1e-14);
        assert_eq!(expected_hitting_constant(1.0, 1.0, 0.0).unwrap().value(), 0.0);
        let e = expected_hitting_constant(0.125, 1.0, 3.0).unwrap();
        assert!((e.value() - (1.5f64.exp() - 1.0) / 0.125).abs() < 1e-12);
        // log-space keeps huge values
        let e = expected_hitting_constant(1.0, 1.0, 1000.0).unwrap();
        assert!((e.log_value.unwrap() - 1000.0 * 2f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn components_for_exponential_phi1() {
        let rate = RateFunction::constant(0.5).unwrap();
        let ev = HittingEvaluator::new(&rate, 1.0, PhiChoice::Phi1, &RiccatiOptions::default()).unwrap();
        let c = ev.components(1.0).unwrap();
        assert!((c.ln_u.exp() - (-1f64).exp()).abs() < 1e-13);
        assert!((c.ln_v.unwrap().exp() - 2.0 * (1.0 - (-1f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn both_representations_match_closed_form() {
        let rate = RateFunction::constant(2.0).unwrap();
        for choice in [PhiChoice::Phi3, PhiChoice::Phi1] {
            for a in [-1.0, 1.0] {
                let e = expected_hitting_general(&rate, 2.0, a, choice).unwrap();
                let exact = (2f64.sqrt().exp() - 1.0) / 2.0;
                assert!((e.value() / exact - 1.0).abs() < 1e-6, "{choice:?} {a}");
            }
        }
    }

    #[test]
    fn inverse_square_critical_rate_is_infinite() {
        let rate = RateFunction::power_law(1.0, 1.0, -1.0).unwrap();
        let e = expected_hitting_general(&rate, 1.0, 1.0, PhiChoice::Phi3).unwrap();
        assert!(!e.is_finite());
        assert_eq!(e.classifier, Some(Finiteness::Infinite));
    }

    #[test]
    fn classifier_examples() {
        let d = 1.3;
        let crit = RateFunction::power_law(d, 1.0, -1.0).unwrap();
        assert_eq!(classify_finiteness(&crit, d).unwrap().overall, Finiteness::Infinite);
        let twice = RateFunction::power_law(2.0 * d, 1.0, -1.0).unwrap();
        assert_eq!(classify_finiteness(&twice, d).unwrap().overall, Finiteness::Finite);
        let c = RateFunction::constant(0.1).unwrap();
        assert_eq!(classify_finiteness(&c, d).unwrap().overall, Finiteness::Finite);
        let q = RateFunction::quad_decay(2.1, 1.0, d).unwrap();
        assert_eq!(classify_finiteness(&q, d).unwrap().overall, Finiteness::Finite);
    }

    #[test]
    fn interval_examples() {
        let zero = RateFunction::constant(0.0).unwrap();
        let e = expected_hitting_interval(&zero, 1.0, 2.0, 3.0, 1.0).unwrap();
        assert!((e.value() - 3.0).abs() < 1e-14);
        let e = expected_hitting_interval(&zero, 1.0, 2.0, 3.0, -1.0).unwrap();
        assert!((e.value() - 4.0).abs() < 1e-14);
        assert!(matches!(
            expected_hitting_interval(&zero, 1.0, 2.0, 3.0, 3.5),
            Err(Error::TargetOutsideInterval { .. })
        ));
    }

    #[test]
    fn interval_shooting_matches_closed_form() {
        let rate = RateFunction::constant(1.0).unwrap();
        let closed = expected_hitting_interval(&rate, 1.0, 1.0, 1.0, 0.5).unwrap();
        let general = interval_shooting(&rate, 1.0, 1.0, 1.0, 0.5).unwrap();
        assert!((general.value() / closed.value() - 1.0).abs() < 1e-8);
        let zero = RateFunction::constant(0.0).unwrap();
        let g0 = interval_shooting(&zero, 1.0, 2.0, 3.0, -1.0).unwrap();
        assert!((g0.value() - 4.0).abs() < 1e-10);
    }

    #[test]
    fn interval_small_rate_limit() {
        let tiny = RateFunction::constant(1e-10).unwrap();
        let zero = RateFunction::constant(0.0).unwrap();
        let a = expected_hitting_interval(&tiny, 1.0, 1.0, 1.0, 0.7).unwrap().value();
        let b = expected_hitting_interval(&zero, 1.0, 1.0, 1.0, 0.7).unwrap().value();
        assert!((a / b - 1.0).abs() < 1e-6);
    }
}
