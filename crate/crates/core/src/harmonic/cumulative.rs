use super::{HarmonicSolution, PhiKind};
use crate::error::{Error, Result};
use crate::model::Side;
use crate::numerics::{gl10, ln_add_exp, ln_weighted_sum};

/// A tail integral `∫_0^∞` along one side: finite (log value) or divergent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TailValue {
    /// `completion` is the fraction of the value contributed by the
    /// analytic tail completion beyond the last panel.
    Finite { ln_value: f64, completion: f64, error: f64 },
    Divergent,
}

impl TailValue {
    pub fn ln(&self) -> Option<f64> {
        match *self {
            TailValue::Finite { ln_value, .. } => Some(ln_value),
            TailValue::Divergent => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, TailValue::Finite { .. })
    }

    fn error(&self) -> f64 {
        match *self {
            TailValue::Finite { error, .. } => error,
            TailValue::Divergent => 0.0,
        }
    }
}

/// Logs of the cumulative integrals at distance `t` along one side, with
/// `z` running from the origin outward:
/// `G = ∫ φ⁻²`, `P = ∫ φ`, `W = ∫ φ⁻²(z) P(z) dz`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CumValues {
    pub ln_g: f64,
    pub ln_p: f64,
    pub ln_w: f64,
}

impl CumValues {
    const ZERO: CumValues = CumValues {
        ln_g: f64::NEG_INFINITY,
        ln_p: f64::NEG_INFINITY,
        ln_w: f64::NEG_INFINITY,
    };

    fn get(&self, q: usize) -> f64 {
        [self.ln_g, self.ln_p, self.ln_w][q]
    }
}

/// Tail values of `G`, `P`, `W` along one side.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SideTotals {
    pub g: TailValue,
    pub p: TailValue,
    pub w: TailValue,
}

#[derive(Clone, Copy, Debug)]
enum Status {
    Running,
    Done { value: TailValue, t: f64 },
}

#[derive(Clone, Debug)]
struct SideSweep {
    /// Panel boundaries with the cumulative values there.
    bounds: Vec<(f64, CumValues)>,
    totals: SideTotals,
    /// Distance beyond which each converged quantity equals its total to
    /// double precision.
    settled: [Option<f64>; 3],
    limit: f64,
}

/// Cumulative integrals of a harmonic function on both half-lines, the
/// building blocks of the hitting-time formulas.
///
/// Each side is swept outward with 10-point Gauss–Legendre panels in log
/// space. A tail is closed off with a local power-law completion once the
/// remainder is below double precision, declared divergent once the
/// integrand stops decaying far out, and otherwise settled by a Cauchy test
/// comparing the completed value at the far end with the one at half that
/// distance.
#[derive(Clone, Debug)]
pub struct CumulativeIntegrals {
    phi: HarmonicSolution,
    left: SideSweep,
    right: SideSweep,
}

const CAUCHY_TOL: f64 = 1e-3;
const LN_NEGLIGIBLE: f64 = -36.9; // ln(1e-16)

impl CumulativeIntegrals {
    pub fn new(phi: &HarmonicSolution) -> Result<Self> {
        let left = sweep(phi, Side::Left)?;
        let right = sweep(phi, Side::Right)?;
        Ok(CumulativeIntegrals { phi: phi.clone(), left, right })
    }

    pub fn phi(&self) -> &HarmonicSolution {
        &self.phi
    }

    fn side(&self, side: Side) -> &SideSweep {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    pub fn totals(&self, side: Side) -> SideTotals {
        self.side(side).totals
    }

    /// Integrability type implied by the `∫φ⁻²` tails, if any.
    pub fn implied_kind(&self) -> Option<PhiKind> {
        match (self.left.totals.g.is_finite(), self.right.totals.g.is_finite()) {
            (true, true) => Some(PhiKind::Phi3),
            (false, true) => Some(PhiKind::Phi1),
            (true, false) => Some(PhiKind::Phi2),
            (false, false) => None,
        }
    }

    /// Relative error budget of the tail totals.
    pub fn error_estimate(&self) -> f64 {
        let mut e = 1e-13;
        for s in [&self.left, &self.right] {
            e += s.totals.g.error() + s.totals.p.error() + s.totals.w.error();
        }
        e
    }

    /// Cumulative values at distance `t >= 0` along `side`.
    pub fn at(&self, side: Side, t: f64) -> Result<CumValues> {
        let s = self.side(side);
        if t > s.limit {
            let x = side.sign() * t;
            let (lo, hi) = self.phi.domain();
            return Err(Error::DomainExceeded { x, lo, hi });
        }
        let k = s.bounds.partition_point(|b| b.0 <= t).max(1) - 1;
        let (mut t0, mut vals) = s.bounds[k];
        if k + 1 < s.bounds.len() {
            return integrate_panel(&self.phi, side, t0, t, vals);
        }
        while t0 < t {
            let t1 = (t0 + panel_width(&self.phi, side, t0)?).min(t);
            vals = integrate_panel(&self.phi, side, t0, t1, vals)?;
            t0 = t1;
        }
        Ok(vals)
    }

    /// `(ln G(t), ln W(t))`, using the totals where they have settled.
    pub fn g_w_at(&self, side: Side, t: f64) -> Result<(f64, f64)> {
        let s = self.side(side);
        let settled = |q: usize| s.settled[q].is_some_and(|ts| t >= ts);
        if settled(0) && settled(2) {
            return Ok((s.totals.g.ln().unwrap(), s.totals.w.ln().unwrap()));
        }
        let v = self.at(side, t)?;
        Ok((v.ln_g, v.ln_w))
    }

    /// `ln |∫_0^x φ|`.
    pub fn ln_phi_int(&self, x: f64) -> Result<f64> {
        Ok(self.at(Side::of(x), x.abs())?.ln_p)
    }

    /// `ln |∫_0^x φ⁻²|`.
    pub fn ln_inv_int(&self, x: f64) -> Result<f64> {
        Ok(self.at(Side::of(x), x.abs())?.ln_g)
    }
}

fn psi_out(phi: &HarmonicSolution, side: Side, t: f64) -> Result<(f64, f64)> {
    let (l, p, _) = phi.eval(side.sign() * t)?;
    Ok((l, side.sign() * p))
}

fn panel_width(phi: &HarmonicSolution, side: Side, t: f64) -> Result<f64> {
    let scale = phi.scale();
    let (_, psi) = psi_out(phi, side, t)?;
    let mut h = 0.05 * t.max(scale);
    if psi != 0.0 {
        h = h.min(0.25 / psi.abs());
    }
    Ok(h.max(1e-12 * scale))
}

/// Adds `∫_{t0}^{t1}` to the running values.
fn integrate_panel(phi: &HarmonicSolution, side: Side, t0: f64, t1: f64, start: CumValues) -> Result<CumValues> {
    if t1 <= t0 {
        return Ok(start);
    }
    let (xs, ws) = gl10();
    let half = 0.5 * (t1 - t0);
    let mid = 0.5 * (t0 + t1);
    let mut lphi = [0.0; 10];
    for (j, x) in xs.iter().enumerate() {
        lphi[j] = phi.log_phi(side.sign() * (mid + half * x))?;
    }
    let weights: Vec<f64> = ws.iter().map(|w| w * half).collect();
    let neg2: Vec<f64> = lphi.iter().map(|l| -2.0 * l).collect();
    let dg = ln_weighted_sum(&neg2, &weights);
    let dp = ln_weighted_sum(&lphi, &weights);

    // P at each node: start value plus the integral of φ from t0
    let mut w_terms = [0.0; 10];
    for (j, x) in xs.iter().enumerate() {
        let tj = mid + half * x;
        let ih = 0.5 * (tj - t0);
        let im = 0.5 * (tj + t0);
        let mut inner = [0.0; 10];
        for (i, y) in xs.iter().enumerate() {
            inner[i] = phi.log_phi(side.sign() * (im + ih * y))?;
        }
        let iw: Vec<f64> = ws.iter().map(|w| w * ih).collect();
        let ln_pj = ln_add_exp(start.ln_p, ln_weighted_sum(&inner, &iw));
        w_terms[j] = -2.0 * lphi[j] + ln_pj;
    }
    let dw = ln_weighted_sum(&w_terms, &weights);
    Ok(CumValues {
        ln_g: ln_add_exp(start.ln_g, dg),
        ln_p: ln_add_exp(start.ln_p, dp),
        ln_w: ln_add_exp(start.ln_w, dw),
    })
}

fn sweep(phi: &HarmonicSolution, side: Side) -> Result<SideSweep> {
    let scale = phi.scale();
    let (lo, hi) = phi.domain();
    let domain_end = match side {
        Side::Left => -lo,
        Side::Right => hi,
    };
    let limit = domain_end.min(1e8 * scale);
    let mut bounds = vec![(0.0, CumValues::ZERO)];
    let mut status = [Status::Running; 3];
    // completed estimates and local exponents at each boundary
    let mut history: Vec<(f64, [f64; 3], [f64; 3])> = Vec::new();
    let mut t = 0.0;
    let mut vals = CumValues::ZERO;
    loop {
        let t1 = (t + panel_width(phi, side, t)?).min(limit);
        vals = integrate_panel(phi, side, t, t1, vals)?;
        t = t1;
        bounds.push((t, vals));

        let (lphi, psi) = psi_out(phi, side, t)?;
        let ln_f = [-2.0 * lphi, lphi, -2.0 * lphi + vals.ln_p];
        let k = [
            -2.0 * psi * t,
            psi * t,
            -2.0 * psi * t + t * (lphi - vals.ln_p).exp(),
        ];
        let mut completed = [f64::INFINITY; 3];
        for q in 0..3 {
            let ln_q = vals.get(q);
            let ln_tail = if k[q] < -1.0 {
                ln_f[q] + t.ln() - (-k[q] - 1.0).ln()
            } else {
                f64::INFINITY
            };
            if ln_tail.is_finite() {
                completed[q] = ln_add_exp(ln_q, ln_tail);
            }
            if let Status::Running = status[q] {
                if t >= 2.0 * scale && ln_tail - ln_q < LN_NEGLIGIBLE {
                    status[q] = Status::Done {
                        value: TailValue::Finite { ln_value: completed[q], completion: 0.0, error: 1e-15 },
                        t,
                    };
                } else if t >= 20.0 * scale && k[q] >= 0.0 {
                    status[q] = Status::Done { value: TailValue::Divergent, t };
                }
            }
        }
        history.push((t, completed, k));

        if status.iter().all(|s| matches!(s, Status::Done { .. })) {
            break;
        }
        if t >= limit {
            let half = history
                .iter()
                .rev()
                .find(|h| h.0 <= 0.5 * t)
                .copied()
                .unwrap_or(history[0]);
            for q in 0..3 {
                if let Status::Running = status[q] {
                    let (c_far, c_half) = (completed[q], half.1[q]);
                    let value = if c_far.is_finite()
                        && c_half.is_finite()
                        && ((c_far - c_half).exp() - 1.0).abs() <= CAUCHY_TOL
                    {
                        let completion = 1.0 - (vals.get(q) - c_far).exp();
                        let error = completion * (k[q] - half.2[q]).abs().min(1.0);
                        TailValue::Finite { ln_value: c_far, completion, error }
                    } else {
                        TailValue::Divergent
                    };
                    status[q] = Status::Done { value, t };
                }
            }
            break;
        }
    }

    let mut settled = [None; 3];
    let mut tv = [TailValue::Divergent; 3];
    for q in 0..3 {
        if let Status::Done { value, t } = status[q] {
            tv[q] = value;
            if let TailValue::Finite { completion, .. } = value {
                if completion == 0.0 {
                    settled[q] = Some(t);
                }
            }
        }
    }
    Ok(SideSweep {
        bounds,
        totals: SideTotals { g: tv[0], p: tv[1], w: tv[2] },
        settled,
        limit: domain_end,
    })
}
