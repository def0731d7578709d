//! Positive solutions φ of `(D/2) φ'' = r φ`, stored in log space together
//! with the log-derivative `ψ = φ'/φ`.
//!
//! Closed forms cover the analytic rate families; other rates go through a
//! Riccati integration on an adaptive grid. [`CumulativeIntegrals`] turns a
//! solution into the one-dimensional integrals the hitting-time formulas
//! need.

mod closed_form;
mod cumulative;
mod riccati;

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{hermite, ln_add_exp, ln_cosh};

pub use closed_form::{build_phi_closed_form, ClosedFormPhis};
pub use cumulative::{CumValues, CumulativeIntegrals, SideTotals, TailValue};
pub use riccati::{build_phi_riccati, RiccatiOptions, RiccatiTriple};

/// Integrability type: φ₁ has `∫_{-∞} φ⁻² = ∞` and `∫^{∞} φ⁻² < ∞`, φ₂ the
/// mirror image, φ₃ both tails integrable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhiKind {
    Phi1,
    Phi2,
    Phi3,
}

impl std::fmt::Display for PhiKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PhiKind::Phi1 => "phi1",
            PhiKind::Phi2 => "phi2",
            PhiKind::Phi3 => "phi3",
        })
    }
}

/// Analytic positive functions used as harmonic solutions or as variational
/// candidates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum ClosedFormPhi {
    /// `e^{sx} + e^{-sx}`.
    Cosh { s: f64 },
    /// `e^{sx}`.
    Exponential { s: f64 },
    /// `γ + (ε² + x²)^{m/2}`; `ε = 0` gives `γ + |x|^m`.
    Polynomial { gamma: f64, m: f64, eps: f64 },
    /// `exp(λ (γ + x²)^{(l+1)/2})`.
    StretchedExp { lambda: f64, gamma: f64, l: f64 },
    /// `c0 + c1 x`.
    Affine { c0: f64, c1: f64 },
}

impl ClosedFormPhi {
    pub fn log_phi(&self, x: f64) -> f64 {
        match *self {
            ClosedFormPhi::Cosh { s } => std::f64::consts::LN_2 + ln_cosh(s * x),
            ClosedFormPhi::Exponential { s } => s * x,
            ClosedFormPhi::Polynomial { gamma, m, eps } => {
                let ax = x.abs();
                if ax > 1.0 {
                    // ln(γ + q^{m/2}) = (m/2) ln q + ln(1 + γ q^{-m/2}), q = ε² + x²
                    let ln_q = 2.0 * ax.ln() + (eps / ax).powi(2).ln_1p();
                    0.5 * m * ln_q + (gamma * (-0.5 * m * ln_q).exp()).ln_1p()
                } else {
                    let q = eps * eps + x * x;
                    (gamma + q.powf(0.5 * m)).ln()
                }
            }
            ClosedFormPhi::StretchedExp { lambda, gamma, l } => lambda * (gamma + x * x).powf(0.5 * (l + 1.0)),
            ClosedFormPhi::Affine { c0, c1 } => (c0 + c1 * x).ln(),
        }
    }

    pub fn psi(&self, x: f64) -> f64 {
        match *self {
            ClosedFormPhi::Cosh { s } => s * (s * x).tanh(),
            ClosedFormPhi::Exponential { s } => s,
            ClosedFormPhi::Polynomial { gamma, m, eps } => {
                if x.abs() > 1e100 {
                    return m / x;
                }
                let q = eps * eps + x * x;
                if q == 0.0 {
                    return 0.0;
                }
                // φ'/φ = m x q^{m/2-1} / (γ + q^{m/2})
                let qm = q.powf(0.5 * m);
                if qm.is_infinite() {
                    return m * x / q;
                }
                m * x * qm / (q * (gamma + qm))
            }
            ClosedFormPhi::StretchedExp { lambda, gamma, l } => {
                lambda * (l + 1.0) * x * (gamma + x * x).powf(0.5 * (l - 1.0))
            }
            ClosedFormPhi::Affine { c0, c1 } => c1 / (c0 + c1 * x),
        }
    }

    /// `φ''/φ`.
    pub fn curvature(&self, x: f64) -> f64 {
        match *self {
            ClosedFormPhi::Cosh { s } | ClosedFormPhi::Exponential { s } => s * s,
            ClosedFormPhi::Polynomial { gamma, m, eps } => {
                if x.abs() > 1e100 {
                    return m * (m - 1.0) / (x * x);
                }
                let x2 = x * x;
                let q = eps * eps + x2;
                if q == 0.0 {
                    return if m == 2.0 { 2.0 / gamma } else { 0.0 };
                }
                // φ'' = m q^{m/2-2} (q + (m-2) x²)
                let qm = q.powf(0.5 * m);
                if qm.is_infinite() {
                    return m * (q + (m - 2.0) * x2) / (q * q);
                }
                m * qm * (q + (m - 2.0) * x2) / (q * q * (gamma + qm))
            }
            ClosedFormPhi::StretchedExp { .. } => {
                let psi = self.psi(x);
                self.dpsi(x) + psi * psi
            }
            ClosedFormPhi::Affine { .. } => 0.0,
        }
    }

    /// `ψ'`.
    pub fn dpsi(&self, x: f64) -> f64 {
        match *self {
            ClosedFormPhi::Cosh { s } => {
                let c = (s * x).cosh();
                if c.is_infinite() {
                    0.0
                } else {
                    s * s / (c * c)
                }
            }
            ClosedFormPhi::Exponential { .. } => 0.0,
            ClosedFormPhi::StretchedExp { lambda, gamma, l } => {
                let q = gamma + x * x;
                lambda * (l + 1.0) * q.powf(0.5 * (l - 3.0)) * (gamma + l * x * x)
            }
            _ => {
                let psi = self.psi(x);
                self.curvature(x) - psi * psi
            }
        }
    }

    /// Natural length scale of the candidate.
    pub fn scale(&self) -> f64 {
        let s = match *self {
            ClosedFormPhi::Cosh { s } | ClosedFormPhi::Exponential { s } => 1.0 / s.abs(),
            ClosedFormPhi::Polynomial { gamma, m, eps } => gamma.powf(1.0 / m).max(eps),
            ClosedFormPhi::StretchedExp { lambda, gamma, l } => gamma.sqrt().max(lambda.powf(-1.0 / (l + 1.0))),
            ClosedFormPhi::Affine { c0, c1 } => {
                if c1 == 0.0 {
                    1.0
                } else {
                    (c0 / c1).abs()
                }
            }
        };
        if s.is_finite() {
            s.clamp(1e-6, 1e6)
        } else {
            1.0
        }
    }

    fn check(&self) -> Result<()> {
        let ok = match *self {
            ClosedFormPhi::Cosh { s } | ClosedFormPhi::Exponential { s } => s.is_finite() && s != 0.0,
            ClosedFormPhi::Polynomial { gamma, m, eps } => gamma > 0.0 && m > 0.0 && eps >= 0.0 && m.is_finite(),
            ClosedFormPhi::StretchedExp { lambda, gamma, l } => lambda > 0.0 && gamma > 0.0 && l > -1.0,
            ClosedFormPhi::Affine { c0, c1 } => c0.is_finite() && c1.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InadmissiblePhi(format!("invalid parameters {self:?}")))
        }
    }
}

/// One Riccati-built solution sampled on a grid.
///
/// Interpolation runs in `ξ = asinh(x/c)`, where both `log φ` and
/// `χ = ψ √(c² + x²)` stay smooth for algebraic and exponential tails.
#[derive(Clone, Debug)]
pub(crate) struct GridBranch {
    c: f64,
    xs: Vec<f64>,
    xi: Vec<f64>,
    logphi: Vec<f64>,
    chi: Vec<f64>,
    dchi: Vec<f64>,
    /// The side on which the branch decays; beyond the grid on that side
    /// the branch is treated as negligible.
    recessive: Option<crate::model::Side>,
}

impl GridBranch {
    pub(crate) fn new(
        c: f64,
        xs: Vec<f64>,
        logphi: Vec<f64>,
        psi: Vec<f64>,
        dpsi: Vec<f64>,
        recessive: Option<crate::model::Side>,
    ) -> Self {
        let xi = xs.iter().map(|x| (x / c).asinh()).collect();
        let chi = xs.iter().zip(&psi).map(|(x, p)| p * (c * c + x * x).sqrt()).collect();
        let dchi = xs
            .iter()
            .zip(psi.iter().zip(&dpsi))
            .map(|(x, (p, dp))| dp * (c * c + x * x) + p * x)
            .collect();
        GridBranch { c, xs, xi, logphi, chi, dchi, recessive }
    }

    pub(crate) fn lo(&self) -> f64 {
        self.xs[0]
    }

    pub(crate) fn hi(&self) -> f64 {
        self.xs[self.xs.len() - 1]
    }

    pub(crate) fn nodes(&self) -> &[f64] {
        &self.xs
    }

    /// `(log φ, ψ, ψ')`, or `None` outside the grid on the recessive side.
    pub(crate) fn eval(&self, x: f64) -> Result<Option<(f64, f64, f64)>> {
        let n = self.xs.len();
        if x < self.xs[0] || x > self.xs[n - 1] {
            let side = crate::model::Side::of(x);
            if self.recessive == Some(side) {
                return Ok(None);
            }
            return Err(Error::DomainExceeded { x, lo: self.xs[0], hi: self.xs[n - 1] });
        }
        let i = match self.xs.partition_point(|&g| g <= x) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        };
        let xi = (x / self.c).asinh();
        let (l, _) = hermite(
            self.xi[i],
            self.xi[i + 1],
            self.logphi[i],
            self.logphi[i + 1],
            self.chi[i],
            self.chi[i + 1],
            xi,
        );
        let (chi, dchi) = hermite(
            self.xi[i],
            self.xi[i + 1],
            self.chi[i],
            self.chi[i + 1],
            self.dchi[i],
            self.dchi[i + 1],
            xi,
        );
        let w2 = self.c * self.c + x * x;
        let w = w2.sqrt();
        let psi = chi / w;
        let dpsi = dchi / w2 - chi * x / (w2 * w);
        Ok(Some((l, psi, dpsi)))
    }

    /// Mirror image `x ↦ -x`.
    pub(crate) fn mirrored(&self) -> GridBranch {
        let n = self.xs.len();
        let rev = |v: &[f64], sign: f64| -> Vec<f64> { (0..n).map(|i| sign * v[n - 1 - i]).collect() };
        GridBranch {
            c: self.c,
            xs: rev(&self.xs, -1.0),
            xi: rev(&self.xi, -1.0),
            logphi: rev(&self.logphi, 1.0),
            chi: rev(&self.chi, -1.0),
            dchi: rev(&self.dchi, 1.0),
            recessive: self.recessive.map(|s| s.opposite()),
        }
    }
}

#[derive(Clone, Debug)]
enum PhiRepr {
    Closed(ClosedFormPhi),
    /// Sum of grid branches, `φ = Σ exp(logφ_i)`.
    Grid(Arc<Vec<GridBranch>>),
}

/// A positive solution of `(D/2) φ'' = r φ` (or a candidate function), in
/// log space.
#[derive(Clone, Debug)]
pub struct HarmonicSolution {
    kind: PhiKind,
    repr: PhiRepr,
    /// Added to `log φ` everywhere; models the free normalization.
    log_norm: f64,
    scale: f64,
}

impl HarmonicSolution {
    pub fn closed(kind: PhiKind, phi: ClosedFormPhi) -> Result<Self> {
        phi.check()?;
        Ok(HarmonicSolution { kind, repr: PhiRepr::Closed(phi), log_norm: 0.0, scale: phi.scale() })
    }

    pub(crate) fn grid(kind: PhiKind, branches: Vec<GridBranch>, scale: f64) -> Self {
        HarmonicSolution { kind, repr: PhiRepr::Grid(Arc::new(branches)), log_norm: 0.0, scale }
    }

    pub fn kind(&self) -> PhiKind {
        self.kind
    }

    /// Length scale used to size quadrature panels and tail tests.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn closed_form(&self) -> Option<ClosedFormPhi> {
        match self.repr {
            PhiRepr::Closed(c) => Some(c),
            PhiRepr::Grid(_) => None,
        }
    }

    /// The same function multiplied by `factor > 0`.
    pub fn rescaled(&self, factor: f64) -> HarmonicSolution {
        let mut out = self.clone();
        out.log_norm += factor.ln();
        out
    }

    /// Interval on which the solution can be evaluated.
    pub fn domain(&self) -> (f64, f64) {
        match &self.repr {
            PhiRepr::Closed(_) => (f64::NEG_INFINITY, f64::INFINITY),
            PhiRepr::Grid(branches) => {
                let mut lo = f64::NEG_INFINITY;
                let mut hi = f64::INFINITY;
                for b in branches.iter() {
                    if b.recessive != Some(crate::model::Side::Left) {
                        lo = lo.max(b.lo());
                    }
                    if b.recessive != Some(crate::model::Side::Right) {
                        hi = hi.min(b.hi());
                    }
                }
                (lo, hi)
            }
        }
    }

    /// `(log φ, ψ, ψ')` at `x`.
    pub fn eval(&self, x: f64) -> Result<(f64, f64, f64)> {
        match &self.repr {
            PhiRepr::Closed(c) => Ok((c.log_phi(x) + self.log_norm, c.psi(x), c.dpsi(x))),
            PhiRepr::Grid(branches) => {
                if branches.len() == 1 {
                    return match branches[0].eval(x)? {
                        Some((l, p, dp)) => Ok((l + self.log_norm, p, dp)),
                        None => {
                            let (lo, hi) = self.domain();
                            Err(Error::DomainExceeded { x, lo, hi })
                        }
                    };
                }
                let mut parts = Vec::with_capacity(branches.len());
                for b in branches.iter() {
                    if let Some(v) = b.eval(x)? {
                        parts.push(v);
                    }
                }
                if parts.is_empty() {
                    let (lo, hi) = self.domain();
                    return Err(Error::DomainExceeded { x, lo, hi });
                }
                let l = parts.iter().fold(f64::NEG_INFINITY, |acc, p| ln_add_exp(acc, p.0));
                let mut psi = 0.0;
                let mut curv = 0.0;
                for &(li, pi, dpi) in &parts {
                    let w = (li - l).exp();
                    psi += w * pi;
                    curv += w * (dpi + pi * pi);
                }
                Ok((l + self.log_norm, psi, curv - psi * psi))
            }
        }
    }

    pub fn log_phi(&self, x: f64) -> Result<f64> {
        Ok(self.eval(x)?.0)
    }

    pub fn psi(&self, x: f64) -> Result<f64> {
        Ok(self.eval(x)?.1)
    }

    /// `φ''/φ = ψ' + ψ²`.
    pub fn curvature(&self, x: f64) -> Result<f64> {
        let (_, p, dp) = self.eval(x)?;
        Ok(dp + p * p)
    }

    /// `(D/2)(ψ' + ψ²) - r(x)`.
    pub fn residual(&self, rate: &crate::model::RateFunction, d: f64, x: f64) -> Result<f64> {
        Ok(0.5 * d * self.curvature(x)? - rate.eval(x))
    }

    /// Grid abscissae (empty for closed forms).
    pub fn grid_nodes(&self) -> Vec<f64> {
        match &self.repr {
            PhiRepr::Closed(_) => Vec::new(),
            PhiRepr::Grid(branches) => {
                let mut v: Vec<f64> = branches.iter().flat_map(|b| b.nodes().iter().copied()).collect();
                v.sort_by(f64::total_cmp);
                v.dedup();
                v
            }
        }
    }

    /// Writes `x,logphi,psi` rows for plotting.
    pub fn write_csv<W: Write>(&self, mut out: W, xs: &[f64]) -> std::io::Result<()> {
        writeln!(out, "x,logphi,psi")?;
        for &x in xs {
            match self.eval(x) {
                Ok((l, p, _)) => writeln!(out, "{x},{l},{p}")?,
                Err(_) => continue,
            }
        }
        Ok(())
    }
}

/// φ₃ for the rate: closed form when available, Riccati otherwise.
pub fn build_phi3(rate: &crate::model::RateFunction, d: f64, opts: &RiccatiOptions) -> Result<HarmonicSolution> {
    match build_phi_closed_form(rate, d) {
        Ok(c) => Ok(c.phi3),
        Err(Error::NoClosedForm(_)) => Ok(build_phi_riccati(rate, d, opts)?.phi3),
        Err(e) => Err(e),
    }
}

/// φ₁ for the rate: closed form when available, Riccati otherwise.
pub fn build_phi1(rate: &crate::model::RateFunction, d: f64, opts: &RiccatiOptions) -> Result<HarmonicSolution> {
    match build_phi_closed_form(rate, d) {
        Ok(ClosedFormPhis { phi1: Some(p), .. }) => Ok(p),
        Ok(_) | Err(Error::NoClosedForm(_)) => Ok(build_phi_riccati(rate, d, opts)?.phi1),
        Err(e) => Err(e),
    }
}
