use super::{GridBranch, HarmonicSolution, PhiKind};
use crate::error::{Error, Result};
use crate::model::{check_positive, RateFunction, Side, TailLaw};
use crate::numerics::rk4_adaptive;

/// Knobs for the numeric construction.
#[derive(Clone, Debug)]
pub struct RiccatiOptions {
    /// Half-width `X` of the bulk region integrated in `x`; defaults to
    /// `max(50, 10 · rate length scale)`.
    pub half_width: Option<f64>,
    /// Local error tolerance per unit length.
    pub tol: f64,
    /// Tails are followed out to `far_factor · X`.
    pub far_factor: f64,
    /// Verify the ODE residual between grid nodes.
    pub check_residual: bool,
}

impl Default for RiccatiOptions {
    fn default() -> Self {
        RiccatiOptions { half_width: None, tol: 1e-8, far_factor: 1e8, check_residual: true }
    }
}

/// The three harmonic functions built numerically, normalized so that
/// `φ₁(0) = φ₂(0) = 1` and `φ₃ = φ₁ + φ₂`.
#[derive(Clone, Debug)]
pub struct RiccatiTriple {
    pub phi1: HarmonicSolution,
    pub phi2: HarmonicSolution,
    pub phi3: HarmonicSolution,
}

/// Stop following a growing tail once `log φ` has risen by this much.
const GROWTH_CUTOFF: f64 = 3000.0;
/// Phase `∫ √(2r/D)` after which a decaying branch is started.
const PHASE_START: f64 = 400.0;

/// Builds φ₁, φ₂, φ₃ by integrating the Riccati equation `ψ' = 2r/D - ψ²`.
///
/// φ₁ is the solution that decays (in the `∫φ⁻² = ∞` sense) at `-∞`. It is
/// started far out on the left on its asymptotic branch and integrated
/// left to right, the stable direction for the decaying branch, first in
/// `u = ln|x|` through the left tail, then in `x` across `[-X, X]`, then in
/// `u` out along the right tail. φ₂ is the mirror construction.
pub fn build_phi_riccati(rate: &RateFunction, d: f64, opts: &RiccatiOptions) -> Result<RiccatiTriple> {
    check_positive("D", d)?;
    rate.validate_full_line()?;
    let scale = rate.length_scale(d);
    let x_half = opts.half_width.unwrap_or((10.0 * scale).max(50.0));
    check_positive("half width X", x_half)?;

    let left = rate.tail_law(Side::Left);
    let right = rate.tail_law(Side::Right);
    let b1 = decaying_left_branch(&|x| rate.eval(x), d, x_half, left, right, scale, opts)?;
    let b2 = decaying_left_branch(&|x| rate.eval(-x), d, x_half, right, left, scale, opts)?.mirrored();

    if opts.check_residual {
        check_residual(&b1, &|x| rate.eval(x), d)?;
        check_residual(&b2, &|x| rate.eval(x), d)?;
    }

    Ok(RiccatiTriple {
        phi1: HarmonicSolution::grid(PhiKind::Phi1, vec![b1.clone()], scale),
        phi2: HarmonicSolution::grid(PhiKind::Phi2, vec![b2.clone()], scale),
        phi3: HarmonicSolution::grid(PhiKind::Phi3, vec![b1, b2], scale),
    })
}

fn is_inverse_square(tail: &TailLaw) -> bool {
    (tail.p - 2.0).abs() < 1e-12
}

/// `m` with `φ ~ t^m` for the growing solution of an inverse-square tail.
fn growth_power(tail: &TailLaw, d: f64) -> f64 {
    0.5 * (1.0 + (1.0 + 8.0 * tail.c / d).sqrt())
}

/// Log-derivative (in the outward distance `t`) of the decaying solution.
fn decaying_asymptote(tail: &TailLaw, d: f64, t: f64, kappa2: f64) -> f64 {
    if tail.c == 0.0 {
        0.0
    } else if is_inverse_square(tail) {
        (1.0 - growth_power(tail, d)) / t
    } else if tail.p > 2.0 {
        -(2.0 * tail.c / d) * t.powf(1.0 - tail.p) / (tail.p - 1.0)
    } else {
        -kappa2.sqrt() + tail.p / (4.0 * t)
    }
}

/// Log-derivative of the growing solution, where the tail law pins it down.
fn growing_asymptote(tail: &TailLaw, d: f64, t: f64, kappa2: f64) -> Option<f64> {
    if tail.c == 0.0 || tail.p > 2.0 {
        None
    } else if is_inverse_square(tail) {
        Some(growth_power(tail, d) / t)
    } else {
        Some(kappa2.sqrt() + tail.p / (4.0 * t))
    }
}

struct Nodes {
    xs: Vec<f64>,
    logphi: Vec<f64>,
    psi: Vec<f64>,
}

impl Nodes {
    fn push(&mut self, x: f64, l: f64, psi: f64) {
        if let Some(&last) = self.xs.last() {
            if x <= last {
                return;
            }
        }
        self.xs.push(x);
        self.logphi.push(l);
        self.psi.push(psi);
    }
}

fn decaying_left_branch(
    g: &dyn Fn(f64) -> f64,
    d: f64,
    x_half: f64,
    left: TailLaw,
    right: TailLaw,
    scale: f64,
    opts: &RiccatiOptions,
) -> Result<GridBranch> {
    let kappa2 = |x: f64| 2.0 * g(x) / d;
    let far = opts.far_factor * x_half;
    let stalled = |u: f64| Error::IntegrationStalled(u);

    // starting distance on the left
    let t_start = if left.c > 0.0 && left.p < 2.0 {
        let mut t = x_half;
        let mut phase = 0.0;
        let mut k_prev = kappa2(-t).sqrt();
        while phase < PHASE_START && t < far {
            let t_next = (t * 1.1).min(far);
            let k_next = kappa2(-t_next).sqrt();
            phase += 0.5 * (k_prev + k_next) * (t_next - t);
            t = t_next;
            k_prev = k_next;
        }
        t
    } else {
        far
    };

    let mut nodes = Nodes { xs: Vec::new(), logphi: Vec::new(), psi: Vec::new() };

    // left tail, inward in u = ln t, state (χ = t ψ_t, log φ)
    let f_tail_left = |u: f64, y: [f64; 2]| {
        let t = u.exp();
        [y[0] + t * t * kappa2(-t) - y[0] * y[0], y[0]]
    };
    let psi_t0 = decaying_asymptote(&left, d, t_start, kappa2(-t_start));
    let (u0, u1) = (t_start.ln(), x_half.ln());
    let mut l_end = 0.0;
    let mut psi_x_end = -psi_t0;
    if u0 > u1 {
        let leg = rk4_adaptive(&f_tail_left, u0, u1, [t_start * psi_t0, 0.0], 0.01, 0.1, opts.tol, &mut |_, _| false)
            .map_err(|u| stalled(-u.exp()))?;
        for (u, y) in leg.ts.iter().zip(&leg.ys) {
            let t = u.exp();
            nodes.push(-t, y[1], -y[0] / t);
        }
        let last = leg.ys.last().unwrap();
        l_end = last[1];
        psi_x_end = -last[0] / x_half;
    }

    // bulk in x, state (ψ, log φ)
    let f_bulk = |x: f64, y: [f64; 2]| [kappa2(x) - y[0] * y[0], y[0]];
    let h_max = 0.05 * scale.min(x_half);
    let mut y = [psi_x_end, l_end];
    for (a, b) in [(-x_half, 0.0), (0.0, x_half)] {
        let leg = rk4_adaptive(&f_bulk, a, b, y, 1e-3 * h_max, h_max, opts.tol, &mut |_, _| false)
            .map_err(stalled)?;
        for (x, v) in leg.ts.iter().zip(&leg.ys) {
            nodes.push(*x, v[1], v[0]);
        }
        y = *leg.ys.last().unwrap();
    }
    let psi_edge = y[0];
    if let Some(expected) = growing_asymptote(&right, d, x_half, kappa2(x_half)) {
        if ((psi_edge - expected) / expected).abs() > 5e-2 {
            return Err(Error::DomainTooSmall { x: x_half, psi: psi_edge, expected });
        }
    }

    // right tail, outward in u, state (χ = t ψ, log φ)
    let f_tail_right = |u: f64, y: [f64; 2]| {
        let t = u.exp();
        [y[0] + t * t * kappa2(t) - y[0] * y[0], y[0]]
    };
    let l_edge = y[1];
    let leg = rk4_adaptive(
        &f_tail_right,
        x_half.ln(),
        far.ln(),
        [x_half * psi_edge, l_edge],
        0.01,
        0.1,
        opts.tol,
        &mut |_, y| y[1] - l_edge > GROWTH_CUTOFF,
    )
    .map_err(|u| stalled(u.exp()))?;
    for (u, v) in leg.ts.iter().zip(&leg.ys) {
        let t = u.exp();
        nodes.push(t, v[1], v[0] / t);
    }

    let zero = nodes.xs.iter().position(|&x| x == 0.0).expect("bulk grid contains the origin");
    let l0 = nodes.logphi[zero];
    let logphi: Vec<f64> = nodes.logphi.iter().map(|l| l - l0).collect();
    let dpsi: Vec<f64> = nodes.xs.iter().zip(&nodes.psi).map(|(x, p)| kappa2(*x) - p * p).collect();
    Ok(GridBranch::new(scale, nodes.xs, logphi, nodes.psi, dpsi, Some(Side::Left)))
}

fn check_residual(branch: &GridBranch, g: &dyn Fn(f64) -> f64, d: f64) -> Result<()> {
    let xs = branch.nodes();
    for w in xs.windows(2) {
        let c = branch.c;
        let mid = c * (0.5 * ((w[0] / c).asinh() + (w[1] / c).asinh())).sinh();
        if let Some((_, psi, dpsi)) = branch.eval(mid)? {
            let r = g(mid);
            let res = 0.5 * d * (dpsi + psi * psi) - r;
            if !(res.abs() <= 1e-6 * (1.0 + r)) {
                return Err(Error::GridTooCoarse { x: mid, residual: res });
            }
        }
    }
    Ok(())
}
