//! Small numerical kernels shared across the crate: Gauss–Legendre rules,
//! log-space accumulation, a step-doubling RK4 driver and a few
//! overflow-safe hyperbolic helpers.

use std::sync::OnceLock;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, computed by Newton
/// iteration on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                let jf = j as f64;
                p0 = ((2.0 * jf + 1.0) * z * p1 - jf * p2) / (jf + 1.0);
            }
            dp = nf * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Cached 10-point rule used for panel integration.
pub fn gl10() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(10))
}

/// Integrates `f` over `[a, b]` with the 10-point rule.
pub fn gl10_integrate(a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    let (xs, ws) = gl10();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    xs.iter()
        .zip(ws)
        .map(|(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

/// `ln(e^a + e^b)` without overflow; `-inf` is the additive identity.
pub fn ln_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln(e^a - e^b)` for `a >= b`.
pub fn ln_sub_exp(a: f64, b: f64) -> f64 {
    if b == f64::NEG_INFINITY {
        return a;
    }
    if b >= a {
        return f64::NEG_INFINITY;
    }
    a + (-(b - a).exp()).ln_1p()
}

/// `ln Σ w_i e^{l_i}` for nonnegative weights.
pub fn ln_weighted_sum(logs: &[f64], weights: &[f64]) -> f64 {
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let s: f64 = logs
        .iter()
        .zip(weights)
        .map(|(l, w)| w * (l - max).exp())
        .sum();
    max + s.ln()
}

/// `ln sinh(x)` for `x > 0`, stable for large and small arguments.
pub fn ln_sinh(x: f64) -> f64 {
    if x > 20.0 {
        x - std::f64::consts::LN_2 + (-(-2.0 * x).exp()).ln_1p()
    } else {
        x.sinh().ln()
    }
}

/// `ln cosh(x)`.
pub fn ln_cosh(x: f64) -> f64 {
    let ax = x.abs();
    ax - std::f64::consts::LN_2 + (-2.0 * ax).exp().ln_1p()
}

/// Cubic Hermite interpolation on `[x0, x1]` with endpoint values and slopes.
/// Returns the value and the derivative at `x`.
pub fn hermite(x0: f64, x1: f64, y0: f64, y1: f64, d0: f64, d1: f64, x: f64) -> (f64, f64) {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    let value = h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1;
    let dh00 = (6.0 * t2 - 6.0 * t) / h;
    let dh10 = 3.0 * t2 - 4.0 * t + 1.0;
    let dh01 = (-6.0 * t2 + 6.0 * t) / h;
    let dh11 = 3.0 * t2 - 2.0 * t;
    let deriv = dh00 * y0 + dh10 * d0 + dh01 * y1 + dh11 * d1;
    (value, deriv)
}

/// One classical RK4 step for a two-component system.
pub fn rk4_step2(
    f: &impl Fn(f64, [f64; 2]) -> [f64; 2],
    t: f64,
    y: [f64; 2],
    h: f64,
) -> [f64; 2] {
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
    let k3 = f(t + 0.5 * h, [y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
    let k4 = f(t + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
    [
        y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

/// Outcome of an adaptive integration leg.
pub struct AdaptiveLeg {
    pub ts: Vec<f64>,
    pub ys: Vec<[f64; 2]>,
    pub rejected: usize,
}

const MAX_FORCED_STEPS: usize = 10_000;

/// Adaptive RK4 with step-halving error control: a full step is compared
/// against two half steps; the local error must stay below
/// `tol * |h| * max(1, |y[0]|)` (tolerance per unit length, scaled by the
/// first component). Integrates from `t0` to `t1` (either direction),
/// stopping early when `stop` returns true on an accepted node.
#[allow(clippy::too_many_arguments)]
pub fn rk4_adaptive(
    f: &impl Fn(f64, [f64; 2]) -> [f64; 2],
    t0: f64,
    t1: f64,
    y0: [f64; 2],
    h_init: f64,
    h_max: f64,
    tol: f64,
    stop: &mut impl FnMut(f64, [f64; 2]) -> bool,
) -> Result<AdaptiveLeg, f64> {
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let mut ts = vec![t0];
    let mut ys = vec![y0];
    let mut t = t0;
    let mut y = y0;
    let mut h = h_init.abs().min(h_max).min((t1 - t0).abs());
    let mut rejected = 0usize;
    let mut forced_steps = 0usize;
    let h_min = 1e-14 * (1.0 + t0.abs().max(t1.abs()));
    while (t1 - t) * dir > 0.0 {
        let remaining = (t1 - t).abs();
        let mut step = h.min(remaining);
        let last = step >= remaining * (1.0 - 1e-12);
        if last {
            step = remaining;
        }
        let hs = step * dir;
        let full = rk4_step2(f, t, y, hs);
        let half = rk4_step2(f, t, y, 0.5 * hs);
        let two = rk4_step2(f, t + 0.5 * hs, half, 0.5 * hs);
        // the second component is the integral of the first, so controlling
        // the first controls both
        let err = (two[0] - full[0]).abs() / 15.0;
        // the floor keeps weak singularities at an endpoint (a cusp in the
        // rate) from shrinking the step geometrically
        let allowed = tol * step.max(1e-6 * h_max) * y[0].abs().max(1.0);
        let finite = two[0].is_finite() && two[1].is_finite();
        // at the minimum step a finite result is taken as is, a bounded
        // number of times, so an integrable kink cannot stall the leg
        let forced = finite && step <= h_min && forced_steps < MAX_FORCED_STEPS;
        if forced {
            forced_steps += 1;
        }
        if finite && (err <= allowed || forced) {
            let corrected = [two[0] + (two[0] - full[0]) / 15.0, two[1] + (two[1] - full[1]) / 15.0];
            t = if last { t1 } else { t + hs };
            y = corrected;
            ts.push(t);
            ys.push(y);
            let grow = if err > 0.0 { 0.9 * (allowed / err).powf(0.25) } else { 4.0 };
            h = (step * grow.clamp(0.2, 4.0)).min(h_max);
            if stop(t, y) {
                break;
            }
        } else {
            rejected += 1;
            let shrink = if finite && err > 0.0 { 0.9 * (allowed / err).powf(0.25) } else { 0.25 };
            h = step * shrink.clamp(0.1, 0.5);
            if h < h_min {
                if !finite || forced_steps >= MAX_FORCED_STEPS {
                    return Err(t);
                }
                h = h_min;
            }
        }
    }
    Ok(AdaptiveLeg { ts, ys, rejected })
}

/// Brent's derivative-free minimizer on `[lo, hi]` (golden-section with
/// parabolic refinement). Returns `(x_min, f_min, evaluations)`.
pub fn brent_minimize(
    mut f: impl FnMut(f64) -> f64,
    lo: f64,
    hi: f64,
    tol: f64,
    max_iter: usize,
) -> (f64, f64, usize) {
    const CGOLD: f64 = 0.381_966_011_250_105;
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let mut x = a + CGOLD * (b - a);
    let mut w = x;
    let mut v = x;
    let mut fx = f(x);
    let mut evals = 1;
    let mut fw = fx;
    let mut fv = fx;
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    for _ in 0..max_iter {
        let xm = 0.5 * (a + b);
        let tol1 = tol * x.abs() + 1e-12;
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let etemp = e;
            e = d;
            if p.abs() < (0.5 * q * etemp).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = tol1.copysign(xm - x);
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= xm { a - x } else { b - x };
            d = CGOLD * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = f(u);
        evals += 1;
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    (x, fx, evals)
}
