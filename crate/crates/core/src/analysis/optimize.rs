use serde::{Deserialize, Serialize};

use super::objective::expected_search_time;
use crate::error::{invalid, Error, Result};
use crate::model::{check_positive, RateFunction, Support, TargetDistribution};
use crate::numerics::brent_minimize;

/// One objective evaluation; `value = None` for an infinite objective.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub params: Vec<f64>,
    pub value: Option<f64>,
}

/// Result of a search over a rate family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizationReport {
    pub family: String,
    pub parameter_names: Vec<String>,
    pub optimum: Vec<f64>,
    pub value: f64,
    /// `√(2r/D) A` at the optimum, for symmetric interval searches.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_star: Option<f64>,
    /// Whether the optimum sits on the boundary of the parameter range.
    pub boundary: bool,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub trace: Vec<TraceEntry>,
}

impl OptimizationReport {
    fn finish(&mut self) {
        self.evaluations = self.trace.len();
    }
}

type Objective<'a> = Box<dyn Fn(&[f64]) -> Result<Option<f64>> + 'a>;

struct Recorder<'a> {
    trace: Vec<TraceEntry>,
    f: Objective<'a>,
}

impl<'a> Recorder<'a> {
    fn new(f: impl Fn(&[f64]) -> Result<Option<f64>> + 'a) -> Self {
        Recorder { trace: Vec::new(), f: Box::new(f) }
    }

    /// Objective with `+∞` for infinite values and failed evaluations at
    /// parameters where the quadrature cannot settle.
    fn eval(&mut self, params: &[f64]) -> Result<f64> {
        let v = match (self.f)(params) {
            Ok(v) => v,
            Err(Error::NonFinite) => None,
            Err(e) => return Err(e),
        };
        self.trace.push(TraceEntry { params: params.to_vec(), value: v });
        Ok(v.unwrap_or(f64::INFINITY))
    }
}

/// Minimizes `∫ E₀T_a μ(da)` over constant rates.
///
/// On the full line (and on asymmetric intervals) the search runs over
/// `ln r` in `[1e-8, 1e8] · D/S²`, `S` the mean target distance: a 32-point
/// log-grid scan picks the basin, Brent's method refines it. On a symmetric
/// interval `[-A, A]` the search runs over `x = √(2r/D) A`, and `r = 0` is
/// reported exactly when the scan finds the objective increasing at `0⁺`.
pub fn optimize_constant_rate(d: f64, mu: &TargetDistribution, support: &Support) -> Result<OptimizationReport> {
    check_positive("D", d)?;
    support.validate()?;
    let scale = mu.avg_dist()?;
    if !(scale > 0.0) {
        return Err(invalid("target law must put mass away from the origin"));
    }
    match *support {
        Support::Interval { l1, l2 } if l1 == l2 => optimize_interval_x(d, mu, support, l1),
        _ => optimize_log_r(d, mu, support, scale),
    }
}

fn objective_at(r: f64, d: f64, mu: &TargetDistribution, support: &Support) -> Result<Option<f64>> {
    Ok(expected_search_time(&RateFunction::constant(r)?, d, mu, support)?.value)
}

fn optimize_log_r(d: f64, mu: &TargetDistribution, support: &Support, scale: f64) -> Result<OptimizationReport> {
    let base = (d / (scale * scale)).ln();
    let (lo, hi) = (base + (1e-8f64).ln(), base + (1e8f64).ln());
    let mut rec = Recorder::new(|p: &[f64]| objective_at(p[0].exp(), d, mu, support));
    let n = 32;
    let grid: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let mut values = Vec::with_capacity(n);
    for &u in &grid {
        values.push(rec.eval(&[u])?);
    }
    let (best, &fbest) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty scan");
    let interval = matches!(support, Support::Interval { .. });
    let zero = if interval { objective_at(0.0, d, mu, support)? } else { None };
    if !fbest.is_finite() && zero.is_none() {
        return Err(Error::NonFinite);
    }
    let a = grid[best.saturating_sub(1)];
    let b = grid[(best + 1).min(n - 1)];
    let mut err = None;
    let (u, fu, iters) = brent_minimize(
        |u| match rec.eval(&[u]) {
            Ok(v) => v.min(f64::MAX),
            Err(e) => {
                err.get_or_insert(e);
                f64::MAX
            }
        },
        a,
        b,
        1e-10,
        200,
    );
    if let Some(e) = err {
        return Err(e);
    }
    let (u, fu) = if fbest < fu { (grid[best], fbest) } else { (u, fu) };
    let (mut r_opt, mut value, mut boundary) = (u.exp(), fu, false);
    if let Some(z) = zero {
        rec.trace.push(TraceEntry { params: vec![f64::NEG_INFINITY], value: Some(z) });
        if z <= value {
            (r_opt, value, boundary) = (0.0, z, true);
        }
    }
    if !value.is_finite() {
        return Err(Error::NonFinite);
    }
    let mut report = OptimizationReport {
        family: "constant".into(),
        parameter_names: vec!["r".into()],
        optimum: vec![r_opt],
        value,
        x_star: None,
        boundary: boundary || best == 0 || best == n - 1,
        iterations: iters,
        evaluations: 0,
        converged: true,
        trace: log_r_trace(rec.trace),
    };
    report.finish();
    Ok(report)
}

/// Converts `ln r` trace parameters to `r`.
fn log_r_trace(trace: Vec<TraceEntry>) -> Vec<TraceEntry> {
    trace
        .into_iter()
        .map(|t| TraceEntry { params: vec![t.params[0].exp()], value: t.value })
        .collect()
}

fn optimize_interval_x(d: f64, mu: &TargetDistribution, support: &Support, a: f64) -> Result<OptimizationReport> {
    let rate_of = |x: f64| d * x * x / (2.0 * a * a);
    let mut rec = Recorder::new(|p: &[f64]| objective_at(rate_of(p[0]), d, mu, support));
    let n = 32;
    let mut grid = vec![0.0];
    grid.extend((0..n - 1).map(|i| 1e-3 * (5e4f64).powf(i as f64 / (n - 2) as f64)));
    let mut values = Vec::with_capacity(n);
    for &x in &grid {
        values.push(rec.eval(&[x])?);
    }
    let (best, &fbest) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty scan");
    if !fbest.is_finite() {
        return Err(Error::NonFinite);
    }
    let (x_opt, value, iters, boundary) = if best == 0 {
        // increasing at 0⁺: the optimum is r = 0 exactly
        (0.0, values[0], 0, true)
    } else {
        let lo = grid[best - 1];
        let hi = grid[(best + 1).min(n - 1)];
        let mut err = None;
        let (x, fx, iters) = brent_minimize(
            |x| match rec.eval(&[x]) {
                Ok(v) => v.min(f64::MAX),
                Err(e) => {
                    err.get_or_insert(e);
                    f64::MAX
                }
            },
            lo,
            hi,
            1e-10,
            200,
        );
        if let Some(e) = err {
            return Err(e);
        }
        let (x, fx) = if fbest < fx { (grid[best], fbest) } else { (x, fx) };
        if values[0] <= fx {
            (0.0, values[0], iters, true)
        } else {
            (x, fx, iters, best == n - 1)
        }
    };
    let mut report = OptimizationReport {
        family: "constant".into(),
        parameter_names: vec!["r".into()],
        optimum: vec![rate_of(x_opt)],
        value,
        x_star: Some(x_opt),
        boundary,
        iterations: iters,
        evaluations: 0,
        converged: true,
        trace: rec
            .trace
            .into_iter()
            .map(|t| TraceEntry { params: vec![rate_of(t.params[0])], value: t.value })
            .collect(),
    };
    report.finish();
    Ok(report)
}

/// Search box for the quadratic-decay family `γ + |x|^m`, in `(ln γ, m)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyBox {
    pub m_lo: f64,
    pub m_hi: f64,
    pub ln_gamma_lo: f64,
    pub ln_gamma_hi: f64,
}

impl FamilyBox {
    /// A box sized to the target: `γ^{1/m}` (the length scale of the rate)
    /// ranges from well below to well above the mean target distance.
    pub fn for_target(mu: &TargetDistribution) -> Result<Self> {
        let s = mu.avg_dist()?;
        check_positive("mean target distance", s)?;
        let (m_lo, m_hi) = (2.05, 8.0);
        let ls = s.ln();
        let a = m_lo * ls - 10.0;
        let b = m_hi * ls + 15.0;
        let c = m_lo * ls + 15.0;
        let e = m_hi * ls - 10.0;
        let lo = a.min(b).min(c).min(e);
        let hi = a.max(b).max(c).max(e);
        Ok(FamilyBox { m_lo, m_hi, ln_gamma_lo: lo, ln_gamma_hi: hi })
    }

    fn validate(&self) -> Result<()> {
        if !(self.m_lo > 2.0 && self.m_hi > self.m_lo && self.ln_gamma_hi > self.ln_gamma_lo) {
            return Err(invalid("family box needs 2 < m_lo < m_hi and ln_gamma_lo < ln_gamma_hi"));
        }
        if ![self.m_lo, self.m_hi, self.ln_gamma_lo, self.ln_gamma_hi].iter().all(|v| v.is_finite()) {
            return Err(invalid("family box must be finite"));
        }
        Ok(())
    }

    fn clamp(&self, p: [f64; 2]) -> [f64; 2] {
        [p[0].clamp(self.ln_gamma_lo, self.ln_gamma_hi), p[1].clamp(self.m_lo, self.m_hi)]
    }

    fn on_boundary(&self, p: [f64; 2]) -> bool {
        let eg = 1e-3 * (self.ln_gamma_hi - self.ln_gamma_lo);
        let em = 1e-3 * (self.m_hi - self.m_lo);
        p[0] - self.ln_gamma_lo < eg || self.ln_gamma_hi - p[0] < eg || p[1] - self.m_lo < em || self.m_hi - p[1] < em
    }
}

/// Minimizes `∫ E₀T_a μ(da)` over the quadratic-decay family
/// `r = (D/2) φ''/φ`, `φ = γ + |x|^m`, on the full line.
///
/// Nelder–Mead in `(ln γ, m)`, started from the best point of a 3×3 grid,
/// with trial points clamped into the box. Ends with `BoxExhausted` (the
/// report attached) when the simplex collapses onto the box boundary.
pub fn optimize_family(d: f64, mu: &TargetDistribution, fbox: &FamilyBox) -> Result<OptimizationReport> {
    check_positive("D", d)?;
    fbox.validate()?;
    let mut rec = Recorder::new(|p: &[f64]| {
        let rate = RateFunction::quad_decay(p[1], p[0].exp(), d)?;
        Ok(expected_search_time(&rate, d, mu, &Support::FullLine)?.value)
    });
    let wg = fbox.ln_gamma_hi - fbox.ln_gamma_lo;
    let wm = fbox.m_hi - fbox.m_lo;
    let fr = [1.0 / 6.0, 0.5, 5.0 / 6.0];
    let mut start = None;
    for &fg in &fr {
        for &fm in &fr {
            let p = [fbox.ln_gamma_lo + fg * wg, fbox.m_lo + fm * wm];
            let v = rec.eval(&p)?;
            if start.is_none_or(|(_, b)| v < b) {
                start = Some((p, v));
            }
        }
    }
    let (p0, f0) = start.expect("grid is non-empty");
    if !f0.is_finite() {
        return Err(Error::NonFinite);
    }
    let steps = [0.1 * wg, 0.1 * wm];
    let mut simplex: Vec<([f64; 2], f64)> = vec![(p0, f0)];
    for k in 0..2 {
        let mut p = p0;
        p[k] += steps[k];
        if p[k] > [fbox.ln_gamma_hi, fbox.m_hi][k] {
            p[k] = p0[k] - steps[k];
        }
        let p = fbox.clamp(p);
        let v = rec.eval(&p)?;
        simplex.push((p, v));
    }
    let (mut iterations, mut converged) = (0, false);
    while iterations < 500 {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (simplex[0].1, simplex[2].1);
        let size = (0..2)
            .map(|k| {
                let w = [wg, wm][k];
                simplex.iter().map(|s| (s.0[k] - simplex[0].0[k]).abs() / w).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if (worst - best).abs() <= 1e-10 * best.abs() && size < 1e-5 || size < 1e-9 {
            converged = true;
            break;
        }
        iterations += 1;
        let centroid = [0.5 * (simplex[0].0[0] + simplex[1].0[0]), 0.5 * (simplex[0].0[1] + simplex[1].0[1])];
        let along = |t: f64| fbox.clamp([centroid[0] + t * (simplex[2].0[0] - centroid[0]), centroid[1] + t * (simplex[2].0[1] - centroid[1])]);
        let pr = along(-1.0);
        let fr_ = rec.eval(&pr)?;
        if fr_ < simplex[0].1 {
            let pe = along(-2.0);
            let fe = rec.eval(&pe)?;
            simplex[2] = if fe < fr_ { (pe, fe) } else { (pr, fr_) };
        } else if fr_ < simplex[1].1 {
            simplex[2] = (pr, fr_);
        } else {
            let (pc, fc) = if fr_ < simplex[2].1 {
                let pc = along(-0.5);
                (pc, rec.eval(&pc)?)
            } else {
                let pc = along(0.5);
                (pc, rec.eval(&pc)?)
            };
            if fc < simplex[2].1.min(fr_) {
                simplex[2] = (pc, fc);
            } else {
                let b = simplex[0].0;
                for s in simplex.iter_mut().skip(1) {
                    let p = [b[0] + 0.5 * (s.0[0] - b[0]), b[1] + 0.5 * (s.0[1] - b[1])];
                    *s = (p, rec.eval(&p)?);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (p, v) = simplex[0];
    let boundary = fbox.on_boundary(p);
    let mut report = OptimizationReport {
        family: "quad_decay".into(),
        parameter_names: vec!["m".into(), "gamma".into()],
        optimum: vec![p[1], p[0].exp()],
        value: v,
        x_star: None,
        boundary,
        iterations,
        evaluations: 0,
        converged,
        trace: rec
            .trace
            .into_iter()
            .map(|t| TraceEntry { params: vec![t.params[1], t.params[0].exp()], value: t.value })
            .collect(),
    };
    report.finish();
    if boundary {
        return Err(Error::BoxExhausted { report: Box::new(report) });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_target_optimum() {
        let mu = TargetDistribution::TwoSidedExponential { beta: 1.0 };
        let rep = optimize_constant_rate(1.0, &mu, &Support::FullLine).unwrap();
        assert!((rep.optimum[0] / 0.125 - 1.0).abs() < 1e-3, "{:?}", rep.optimum);
        assert!((rep.value / 8.0 - 1.0).abs() < 1e-6);
        let min_trace = rep.trace.iter().filter_map(|t| t.value).fold(f64::INFINITY, f64::min);
        assert!(rep.value <= min_trace);
    }

    #[test]
    fn uniform_interval_boundary_optimum() {
        let mu = TargetDistribution::UniformInterval { half_width: 1.0 };
        let rep = optimize_constant_rate(1.0, &mu, &Support::Interval { l1: 1.0, l2: 1.0 }).unwrap();
        assert_eq!(rep.optimum[0], 0.0);
        assert!(rep.boundary);
        assert!((rep.value - 5.0 / 6.0).abs() < 1e-9);
    }

    #[test]
    fn family_box_is_ordered() {
        let b = FamilyBox::for_target(&TargetDistribution::TwoSidedExponential { beta: 20.0 }).unwrap();
        assert!(b.ln_gamma_lo < b.ln_gamma_hi);
    }
}
