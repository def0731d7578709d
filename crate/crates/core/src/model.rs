//! Domain types: diffusion parameters, resetting-rate families, target
//! distributions and search supports.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Which half-line a quantity refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Left => -1.0,
            Side::Right => 1.0,
        }
    }

    pub fn opposite(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }

    pub fn of(x: f64) -> Side {
        if x < 0.0 {
            Side::Left
        } else {
            Side::Right
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

/// Diffusion parameters of the searcher.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    #[serde(rename = "D")]
    pub d: f64,
}

impl ModelParams {
    pub fn new(d: f64) -> Result<Self> {
        check_positive("D", d)?;
        Ok(Self { d })
    }
}

pub(crate) fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be finite and > 0, got {v}")))
    }
}

fn check_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be finite, got {v}")))
    }
}

/// Asymptotic power law `r(x) ≈ c |x|^{-p}` along one tail. Negative `p`
/// describes a growing rate; `p = 0` a constant tail.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailLaw {
    pub c: f64,
    pub p: f64,
}

impl TailLaw {
    pub fn eval(&self, t: f64) -> f64 {
        self.c * t.abs().powf(-self.p)
    }

    /// Limit of `x² r(x) / D` along the tail.
    pub fn lambda_hat(&self, d: f64) -> f64 {
        if self.c == 0.0 || self.p > 2.0 {
            0.0
        } else if self.p < 2.0 {
            f64::INFINITY
        } else {
            self.c / d
        }
    }
}

/// A resetting-rate profile `r(x) >= 0`.
///
/// Variants can be built directly; every entry point calls
/// [`RateFunction::validate`], and the checked constructors validate eagerly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum RateFunction {
    /// `r(x) = r`.
    #[serde(rename = "constant")]
    Constant { r: f64 },
    /// `r(x) = c (γ + x²)^l`.
    #[serde(rename = "power_law")]
    PowerLaw { c: f64, gamma: f64, l: f64 },
    /// `r(x) = m(m-1)/2 · D |x|^{m-2} / (γ + |x|^m)`, harmonic function `γ + |x|^m`.
    #[serde(rename = "quad_decay")]
    QuadDecayPoly {
        m: f64,
        gamma: f64,
        #[serde(rename = "D")]
        d: f64,
    },
    /// Rate whose harmonic function is `exp(λ (γ + x²)^{(l+1)/2})`.
    #[serde(rename = "stretched_exp")]
    StretchedExpHarmonic {
        lambda: f64,
        gamma: f64,
        l: f64,
        #[serde(rename = "D")]
        d: f64,
    },
    #[serde(rename = "tabulated")]
    Tabulated(TabulatedRate),
}

impl RateFunction {
    pub fn constant(r: f64) -> Result<Self> {
        let rate = RateFunction::Constant { r };
        rate.validate()?;
        Ok(rate)
    }

    pub fn power_law(c: f64, gamma: f64, l: f64) -> Result<Self> {
        let rate = RateFunction::PowerLaw { c, gamma, l };
        rate.validate()?;
        Ok(rate)
    }

    pub fn quad_decay(m: f64, gamma: f64, d: f64) -> Result<Self> {
        let rate = RateFunction::QuadDecayPoly { m, gamma, d };
        rate.validate()?;
        Ok(rate)
    }

    pub fn stretched_exp(lambda: f64, gamma: f64, l: f64, d: f64) -> Result<Self> {
        let rate = RateFunction::StretchedExpHarmonic { lambda, gamma, l, d };
        rate.validate()?;
        Ok(rate)
    }

    /// Smallest offset keeping the stretched-exponential rate nonnegative
    /// when `l ∈ (-1, 0)`; zero otherwise.
    pub fn stretched_exp_min_gamma(lambda: f64, l: f64) -> f64 {
        if l < 0.0 {
            (-l / ((l + 1.0) * lambda)).powf(2.0 / (l + 1.0))
        } else {
            0.0
        }
    }

    /// Checks the parameter domain of the family.
    pub fn validate(&self) -> Result<()> {
        match *self {
            RateFunction::Constant { r } => {
                check_finite("r", r)?;
                if r < 0.0 {
                    return Err(invalid(format!("constant rate must be >= 0, got {r}")));
                }
            }
            RateFunction::PowerLaw { c, gamma, l } => {
                check_positive("c", c)?;
                check_positive("gamma", gamma)?;
                check_finite("l", l)?;
            }
            RateFunction::QuadDecayPoly { m, gamma, d } => {
                check_finite("m", m)?;
                if m <= 2.0 {
                    return Err(invalid(format!("quadratic-decay exponent m must be > 2, got {m}")));
                }
                check_positive("gamma", gamma)?;
                check_positive("D", d)?;
            }
            RateFunction::StretchedExpHarmonic { lambda, gamma, l, d } => {
                check_positive("lambda", lambda)?;
                check_positive("gamma", gamma)?;
                check_positive("D", d)?;
                check_finite("l", l)?;
                if l <= -1.0 {
                    return Err(invalid(format!("stretched-exponential exponent l must be > -1, got {l}")));
                }
                let min = Self::stretched_exp_min_gamma(lambda, l);
                if gamma < min * (1.0 - 1e-12) {
                    return Err(invalid(format!(
                        "gamma = {gamma} makes the rate negative; need gamma >= {min}"
                    )));
                }
            }
            RateFunction::Tabulated(ref t) => t.validate()?,
        }
        Ok(())
    }

    /// Additionally rejects rates that vanish identically (full-line search
    /// needs `r ⪈ 0`).
    pub fn validate_full_line(&self) -> Result<()> {
        self.validate()?;
        if self.is_identically_zero() {
            return Err(invalid("full-line search needs a rate that is not identically zero"));
        }
        Ok(())
    }

    pub fn is_identically_zero(&self) -> bool {
        match self {
            RateFunction::Constant { r } => *r == 0.0,
            RateFunction::Tabulated(t) => {
                t.values.iter().all(|&v| v == 0.0) && t.tail_left.c == 0.0 && t.tail_right.c == 0.0
            }
            _ => false,
        }
    }

    /// Pointwise evaluation.
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            RateFunction::Constant { r } => r,
            RateFunction::PowerLaw { c, gamma, l } => c * (gamma + x * x).powf(l),
            RateFunction::QuadDecayPoly { m, gamma, d } => {
                let lam = 0.5 * m * (m - 1.0) * d;
                let ax = x.abs();
                if ax == 0.0 {
                    0.0
                } else if ax <= 1.0 {
                    lam * ax.powf(m - 2.0) / (gamma + ax.powf(m))
                } else {
                    lam / (ax * ax * (gamma * ax.powf(-m) + 1.0))
                }
            }
            RateFunction::StretchedExpHarmonic { lambda, gamma, l, d } => {
                let q = gamma + x * x;
                let x2 = x * x;
                let bracket = (l + 1.0) * lambda * x2 * q.powf(0.5 * (l + 1.0)) + gamma + l * x2;
                (0.5 * d * lambda * (l + 1.0) * q.powf(0.5 * (l - 3.0)) * bracket).max(0.0)
            }
            RateFunction::Tabulated(ref t) => t.eval(x),
        }
    }

    /// Whether `r(x) = r(-x)` for all `x`.
    pub fn is_even(&self) -> bool {
        match self {
            RateFunction::Tabulated(t) => t.is_even(),
            _ => true,
        }
    }

    /// Diffusion constant baked into the family, if any.
    pub fn family_d(&self) -> Option<f64> {
        match *self {
            RateFunction::QuadDecayPoly { d, .. } | RateFunction::StretchedExpHarmonic { d, .. } => Some(d),
            _ => None,
        }
    }

    /// Asymptotic law of the rate along the given tail.
    pub fn tail_law(&self, side: Side) -> TailLaw {
        match *self {
            RateFunction::Constant { r } => TailLaw { c: r, p: 0.0 },
            RateFunction::PowerLaw { c, l, .. } => TailLaw { c, p: -2.0 * l },
            RateFunction::QuadDecayPoly { m, d, .. } => TailLaw { c: 0.5 * m * (m - 1.0) * d, p: 2.0 },
            RateFunction::StretchedExpHarmonic { lambda, l, d, .. } => TailLaw {
                c: 0.5 * d * lambda * lambda * (l + 1.0) * (l + 1.0),
                p: -2.0 * l,
            },
            RateFunction::Tabulated(ref t) => match side {
                Side::Left => t.tail_left,
                Side::Right => t.tail_right,
            },
        }
    }

    /// Characteristic length over which the rate or its harmonic functions
    /// vary; used to size grids and tail tests.
    pub fn length_scale(&self, d: f64) -> f64 {
        let s = match *self {
            RateFunction::Constant { r } => {
                if r > 0.0 {
                    (d / (2.0 * r)).sqrt()
                } else {
                    1.0
                }
            }
            RateFunction::PowerLaw { c, gamma, l } => {
                if l > -1.0 {
                    gamma.sqrt().max((d / (2.0 * c)).powf(1.0 / (2.0 * l + 2.0)))
                } else {
                    gamma.sqrt()
                }
            }
            RateFunction::QuadDecayPoly { m, gamma, .. } => gamma.powf(1.0 / m),
            RateFunction::StretchedExpHarmonic { lambda, gamma, l, .. } => {
                gamma.sqrt().max(lambda.powf(-1.0 / (l + 1.0)))
            }
            RateFunction::Tabulated(ref t) => {
                let span = t.grid[0].abs().max(t.grid[t.grid.len() - 1].abs());
                let mut s = span;
                let rmax = t.values.iter().copied().fold(0.0, f64::max);
                if rmax > 0.0 {
                    s = s.max((d / (2.0 * rmax)).sqrt());
                }
                s
            }
        };
        s.clamp(1e-6, 1e6)
    }
}

/// Rate sampled on a grid, interpolated with a shape-preserving cubic and
/// extended by declared tail laws.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TabulatedRateSpec", into = "TabulatedRateSpec")]
pub struct TabulatedRate {
    grid: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
    tail_left: TailLaw,
    tail_right: TailLaw,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct TabulatedRateSpec {
    grid: Vec<f64>,
    values: Vec<f64>,
    tail_left: TailLaw,
    tail_right: TailLaw,
}

impl TryFrom<TabulatedRateSpec> for TabulatedRate {
    type Error = Error;
    fn try_from(s: TabulatedRateSpec) -> Result<Self> {
        TabulatedRate::new(s.grid, s.values, s.tail_left, s.tail_right)
    }
}

impl From<TabulatedRate> for TabulatedRateSpec {
    fn from(t: TabulatedRate) -> Self {
        TabulatedRateSpec {
            grid: t.grid,
            values: t.values,
            tail_left: t.tail_left,
            tail_right: t.tail_right,
        }
    }
}

impl TabulatedRate {
    /// The grid must straddle the origin; tails apply beyond its ends.
    pub fn new(grid: Vec<f64>, values: Vec<f64>, tail_left: TailLaw, tail_right: TailLaw) -> Result<Self> {
        let mut t = TabulatedRate {
            slopes: vec![0.0; grid.len()],
            grid,
            values,
            tail_left,
            tail_right,
        };
        t.validate()?;
        t.slopes = monotone_slopes(&t.grid, &t.values);
        Ok(t)
    }

    fn validate(&self) -> Result<()> {
        let n = self.grid.len();
        if n < 2 || self.values.len() != n {
            return Err(invalid("tabulated rate needs >= 2 grid points and matching values"));
        }
        if self.grid.windows(2).any(|w| !(w[1] > w[0])) || self.grid.iter().any(|g| !g.is_finite()) {
            return Err(invalid("tabulated grid must be finite and strictly increasing"));
        }
        if !(self.grid[0] < 0.0 && self.grid[n - 1] > 0.0) {
            return Err(invalid("tabulated grid must straddle the origin"));
        }
        if self.values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(invalid("tabulated rate values must be finite and >= 0"));
        }
        for (name, tail) in [("left", self.tail_left), ("right", self.tail_right)] {
            if !(tail.c.is_finite() && tail.c >= 0.0 && tail.p.is_finite()) {
                return Err(invalid(format!("{name} tail law needs finite c >= 0 and finite p")));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.grid.len();
        if x < self.grid[0] {
            return self.tail_left.eval(x);
        }
        if x > self.grid[n - 1] {
            return self.tail_right.eval(x);
        }
        let i = match self.grid.partition_point(|&g| g <= x) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        };
        let (v, _) = crate::numerics::hermite(
            self.grid[i],
            self.grid[i + 1],
            self.values[i],
            self.values[i + 1],
            self.slopes[i],
            self.slopes[i + 1],
            x,
        );
        v.max(0.0)
    }

    fn is_even(&self) -> bool {
        let n = self.grid.len();
        self.tail_left == self.tail_right
            && (0..n).all(|i| {
                let j = n - 1 - i;
                (self.grid[i] + self.grid[j]).abs() <= 1e-12 * self.grid[j].abs().max(1.0)
                    && (self.values[i] - self.values[j]).abs() <= 1e-12 * self.values[i].abs().max(1e-300)
            })
    }
}

/// Fritsch–Carlson slopes for monotone piecewise-cubic interpolation.
fn monotone_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i])).collect();
    let mut m = vec![0.0; n];
    m[0] = delta[0];
    m[n - 1] = delta[n - 2];
    for i in 1..n - 1 {
        m[i] = if delta[i - 1] * delta[i] <= 0.0 {
            0.0
        } else {
            0.5 * (delta[i - 1] + delta[i])
        };
    }
    for i in 0..n - 1 {
        if delta[i] == 0.0 {
            m[i] = 0.0;
            m[i + 1] = 0.0;
            continue;
        }
        let a = m[i] / delta[i];
        let b = m[i + 1] / delta[i];
        let s = a * a + b * b;
        if s > 9.0 {
            let tau = 3.0 / s.sqrt();
            m[i] = tau * a * delta[i];
            m[i + 1] = tau * b * delta[i];
        }
    }
    m
}

/// Declared power tail of a tabulated target density: `c |a|^{-(1+alpha)}`
/// beyond the grid, so moments of order `p` are finite iff `p < alpha`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityTail {
    pub c: f64,
    pub alpha: f64,
}

/// Law of the target position.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum TargetDistribution {
    /// Density `β/2 e^{-β|a|}`.
    #[serde(rename = "exp2")]
    TwoSidedExponential { beta: f64 },
    #[serde(rename = "uniform")]
    UniformInterval {
        #[serde(rename = "A")]
        half_width: f64,
    },
    /// Density `(A - |a|)/A²` on `[-A, A]`.
    #[serde(rename = "triangular")]
    TriangularInterval {
        #[serde(rename = "A")]
        half_width: f64,
    },
    #[serde(rename = "point")]
    PointMass { a: f64 },
    #[serde(rename = "mixture")]
    Mixture {
        weights: Vec<f64>,
        components: Vec<TargetDistribution>,
    },
    /// Piecewise-linear density on a grid, optionally continued by a
    /// power tail beyond the grid ends.
    #[serde(rename = "tabulated")]
    TabulatedDensity {
        grid: Vec<f64>,
        density: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tail: Option<DensityTail>,
    },
}

/// Density shape on a piece of a half-line, in the distance coordinate
/// `t = |a|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DensityShape {
    /// `coef · e^{-rate t}`.
    Exponential { coef: f64, rate: f64 },
    /// `c0 + c1 t`.
    Linear { c0: f64, c1: f64 },
    /// `c · t^{-(1+alpha)}`.
    PowerTail { c: f64, alpha: f64 },
}

impl DensityShape {
    pub fn density(&self, t: f64) -> f64 {
        match *self {
            DensityShape::Exponential { coef, rate } => coef * (-rate * t).exp(),
            DensityShape::Linear { c0, c1 } => (c0 + c1 * t).max(0.0),
            DensityShape::PowerTail { c, alpha } => c * t.powf(-(1.0 + alpha)),
        }
    }

    pub fn ln_density(&self, t: f64) -> f64 {
        match *self {
            DensityShape::Exponential { coef, rate } => coef.ln() - rate * t,
            DensityShape::Linear { .. } => self.density(t).ln(),
            DensityShape::PowerTail { c, alpha } => c.ln() - (1.0 + alpha) * t.ln(),
        }
    }

    /// `∫_u^v density`.
    pub fn mass(&self, u: f64, v: f64) -> f64 {
        match *self {
            DensityShape::Exponential { coef, rate } => {
                let tail = |t: f64| if t.is_infinite() { 0.0 } else { (-rate * t).exp() };
                coef / rate * (tail(u) - tail(v))
            }
            DensityShape::Linear { c0, c1 } => c0 * (v - u) + 0.5 * c1 * (v * v - u * u),
            DensityShape::PowerTail { c, alpha } => {
                let tail = |t: f64| if t.is_infinite() { 0.0 } else { t.powf(-alpha) };
                c / alpha * (tail(u) - tail(v))
            }
        }
    }

    /// `∫_u^v t · density`.
    pub fn first_moment(&self, u: f64, v: f64) -> f64 {
        match *self {
            DensityShape::Exponential { coef, rate } => {
                let f = |t: f64| {
                    if t.is_infinite() {
                        0.0
                    } else {
                        (-rate * t).exp() * (t / rate + 1.0 / (rate * rate))
                    }
                };
                coef * (f(u) - f(v))
            }
            DensityShape::Linear { c0, c1 } => 0.5 * c0 * (v * v - u * u) + c1 * (v.powi(3) - u.powi(3)) / 3.0,
            DensityShape::PowerTail { c, alpha } => {
                if alpha <= 1.0 && v.is_infinite() {
                    f64::INFINITY
                } else if (alpha - 1.0).abs() < 1e-15 {
                    c * (v.ln() - u.ln())
                } else {
                    let f = |t: f64| if t.is_infinite() { 0.0 } else { t.powf(1.0 - alpha) };
                    c / (alpha - 1.0) * (f(u) - f(v))
                }
            }
        }
    }

    fn scaled(&self, k: f64) -> DensityShape {
        match *self {
            DensityShape::Exponential { coef, rate } => DensityShape::Exponential { coef: coef * k, rate },
            DensityShape::Linear { c0, c1 } => DensityShape::Linear { c0: c0 * k, c1: c1 * k },
            DensityShape::PowerTail { c, alpha } => DensityShape::PowerTail { c: c * k, alpha },
        }
    }
}

/// A smooth piece `[lo, hi]` (distance coordinates, `hi` may be infinite).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityPiece {
    pub lo: f64,
    pub hi: f64,
    pub shape: DensityShape,
}

/// Restriction of a target law to one open half-line, expressed in the
/// distance coordinate `t = |a| > 0`. Not necessarily normalized.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct HalfLineMeasure {
    /// `(distance, mass)` pairs.
    pub atoms: Vec<(f64, f64)>,
    pub pieces: Vec<DensityPiece>,
}

impl HalfLineMeasure {
    pub fn mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum::<f64>()
            + self.pieces.iter().map(|p| p.shape.mass(p.lo, p.hi)).sum::<f64>()
    }

    /// Mass of `(0, t]`.
    pub fn mass_below(&self, t: f64) -> f64 {
        let atoms: f64 = self.atoms.iter().filter(|a| a.0 <= t).map(|a| a.1).sum();
        let cont: f64 = self
            .pieces
            .iter()
            .filter(|p| p.lo < t)
            .map(|p| p.shape.mass(p.lo, p.hi.min(t)))
            .sum();
        atoms + cont
    }

    pub fn first_moment(&self) -> f64 {
        self.atoms.iter().map(|a| a.0 * a.1).sum::<f64>()
            + self.pieces.iter().map(|p| p.shape.first_moment(p.lo, p.hi)).sum::<f64>()
    }

    pub fn is_empty(&self) -> bool {
        self.mass() <= 0.0
    }

    pub fn scaled(&self, k: f64) -> HalfLineMeasure {
        HalfLineMeasure {
            atoms: self.atoms.iter().map(|&(t, w)| (t, w * k)).collect(),
            pieces: self
                .pieces
                .iter()
                .map(|p| DensityPiece { shape: p.shape.scaled(k), ..*p })
                .collect(),
        }
    }

    fn extend(&mut self, other: HalfLineMeasure) {
        self.atoms.extend(other.atoms);
        self.pieces.extend(other.pieces);
    }

    /// Largest distance carrying mass (infinite for unbounded pieces).
    pub fn extent(&self) -> f64 {
        let a = self.atoms.iter().map(|a| a.0).fold(0.0, f64::max);
        let p = self.pieces.iter().map(|p| p.hi).fold(0.0, f64::max);
        a.max(p)
    }
}

/// Decomposition `μ = (1-p) μ₋ + p μ₊` into normalized half-line laws.
#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub p: f64,
    pub plus: HalfLineMeasure,
    pub minus: HalfLineMeasure,
}

/// Unnormalized restrictions of a target law to both open half-lines plus
/// the mass at the origin.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct HalfMeasures {
    pub right: HalfLineMeasure,
    pub left: HalfLineMeasure,
    pub origin: f64,
}

impl HalfMeasures {
    pub fn side(&self, side: Side) -> &HalfLineMeasure {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }
}

impl TargetDistribution {
    pub fn validate(&self) -> Result<()> {
        match self {
            TargetDistribution::TwoSidedExponential { beta } => check_positive("beta", *beta)?,
            TargetDistribution::UniformInterval { half_width }
            | TargetDistribution::TriangularInterval { half_width } => check_positive("A", *half_width)?,
            TargetDistribution::PointMass { a } => check_finite("a", *a)?,
            TargetDistribution::Mixture { weights, components } => {
                if weights.is_empty() || weights.len() != components.len() {
                    return Err(invalid("mixture needs one weight per component and at least one component"));
                }
                if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
                    return Err(invalid("mixture weights must be finite and >= 0"));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-10 {
                    return Err(Error::DensityNotNormalized { mass: total });
                }
                for c in components {
                    c.validate()?;
                }
            }
            TargetDistribution::TabulatedDensity { grid, density, tail } => {
                let n = grid.len();
                if n < 2 || density.len() != n {
                    return Err(invalid("tabulated density needs >= 2 grid points and matching values"));
                }
                if grid.windows(2).any(|w| !(w[1] > w[0])) || grid.iter().any(|g| !g.is_finite()) {
                    return Err(invalid("tabulated density grid must be finite and strictly increasing"));
                }
                if density.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(invalid("tabulated density values must be finite and >= 0"));
                }
                if let Some(t) = tail {
                    if !(t.c.is_finite() && t.c >= 0.0) {
                        return Err(invalid("density tail coefficient must be finite and >= 0"));
                    }
                    check_positive("tail alpha", t.alpha)?;
                }
                let mass = self.half_measures_unchecked().total();
                if (mass - 1.0).abs() > 1e-10 {
                    return Err(Error::DensityNotNormalized { mass });
                }
            }
        }
        Ok(())
    }

    /// Restrictions to the two half-lines.
    pub fn half_measures(&self) -> Result<HalfMeasures> {
        self.validate()?;
        Ok(self.half_measures_unchecked())
    }

    fn half_measures_unchecked(&self) -> HalfMeasures {
        let mut out = HalfMeasures::default();
        match *self {
            TargetDistribution::TwoSidedExponential { beta } => {
                let shape = DensityShape::Exponential { coef: 0.5 * beta, rate: beta };
                let piece = DensityPiece { lo: 0.0, hi: f64::INFINITY, shape };
                out.right.pieces.push(piece);
                out.left.pieces.push(piece);
            }
            TargetDistribution::UniformInterval { half_width: a } => {
                let shape = DensityShape::Linear { c0: 0.5 / a, c1: 0.0 };
                let piece = DensityPiece { lo: 0.0, hi: a, shape };
                out.right.pieces.push(piece);
                out.left.pieces.push(piece);
            }
            TargetDistribution::TriangularInterval { half_width: a } => {
                let shape = DensityShape::Linear { c0: 1.0 / a, c1: -1.0 / (a * a) };
                let piece = DensityPiece { lo: 0.0, hi: a, shape };
                out.right.pieces.push(piece);
                out.left.pieces.push(piece);
            }
            TargetDistribution::PointMass { a } => {
                if a > 0.0 {
                    out.right.atoms.push((a, 1.0));
                } else if a < 0.0 {
                    out.left.atoms.push((-a, 1.0));
                } else {
                    out.origin = 1.0;
                }
            }
            TargetDistribution::Mixture { ref weights, ref components } => {
                for (w, c) in weights.iter().zip(components) {
                    let h = c.half_measures_unchecked();
                    out.right.extend(h.right.scaled(*w));
                    out.left.extend(h.left.scaled(*w));
                    out.origin += w * h.origin;
                }
            }
            TargetDistribution::TabulatedDensity { ref grid, ref density, tail } => {
                tabulated_pieces(grid, density, &mut out);
                let n = grid.len();
                if let Some(tail) = tail {
                    if tail.c > 0.0 {
                        let shape = DensityShape::PowerTail { c: tail.c, alpha: tail.alpha };
                        if grid[n - 1] > 0.0 {
                            out.right.pieces.push(DensityPiece { lo: grid[n - 1], hi: f64::INFINITY, shape });
                        }
                        if grid[0] < 0.0 {
                            out.left.pieces.push(DensityPiece { lo: -grid[0], hi: f64::INFINITY, shape });
                        }
                    }
                }
            }
        }
        out
    }

    /// `P(X <= x)`.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        let h = self.half_measures()?;
        Ok(cdf_from_halves(&h.left, &h.right, h.origin, x))
    }

    /// Mean absolute distance `∫|a| μ(da)`.
    pub fn avg_dist(&self) -> Result<f64> {
        let h = self.half_measures()?;
        Ok(h.left.first_moment() + h.right.first_moment())
    }

    /// Whether `μ` is invariant under `a ↦ -a` (checked on the CDF).
    pub fn is_symmetric(&self) -> Result<bool> {
        let h = self.half_measures()?;
        if (h.left.mass() - h.right.mass()).abs() > 1e-12 {
            return Ok(false);
        }
        let mut probes: Vec<f64> = Vec::new();
        for m in [&h.left, &h.right] {
            for &(t, _) in &m.atoms {
                probes.extend([t * (1.0 - 1e-9), t, t * (1.0 + 1e-9)]);
            }
            for p in &m.pieces {
                probes.push(p.lo);
                if p.hi.is_finite() {
                    probes.extend([0.5 * (p.lo + p.hi), p.hi]);
                } else {
                    probes.extend([p.lo + 1.0, 2.0 * p.lo + 3.0]);
                }
            }
        }
        Ok(probes
            .iter()
            .all(|&t| (h.left.mass_below(t) - h.right.mass_below(t)).abs() <= 1e-12))
    }

    /// Splits `μ` into `p = μ((0,∞))` and normalized half-line laws.
    pub fn split(&self) -> Result<Split> {
        let h = self.half_measures()?;
        if h.origin > 0.0 {
            return Err(Error::AtomAtOrigin);
        }
        let p = h.right.mass();
        let q = h.left.mass();
        if p <= 0.0 {
            return Err(Error::OneSided { side: "left" });
        }
        if q <= 0.0 {
            return Err(Error::OneSided { side: "right" });
        }
        let total = p + q;
        Ok(Split {
            p: p / total,
            plus: h.right.scaled(1.0 / p),
            minus: h.left.scaled(1.0 / q),
        })
    }

    /// Supremum of moment orders that are finite: `Some(alpha)` for a
    /// declared power tail, `None` when all moments are finite.
    pub fn moment_index(&self) -> Option<f64> {
        match self {
            TargetDistribution::TabulatedDensity { tail: Some(t), .. } if t.c > 0.0 => Some(t.alpha),
            TargetDistribution::Mixture { weights, components } => weights
                .iter()
                .zip(components)
                .filter(|(w, _)| **w > 0.0)
                .filter_map(|(_, c)| c.moment_index())
                .reduce(f64::min),
            _ => None,
        }
    }
}

impl HalfMeasures {
    pub fn total(&self) -> f64 {
        self.left.mass() + self.right.mass() + self.origin
    }
}

/// Recombines half-line measures into a CDF value at `x`.
pub fn cdf_from_halves(left: &HalfLineMeasure, right: &HalfLineMeasure, origin: f64, x: f64) -> f64 {
    let lm = left.mass();
    if x < 0.0 {
        // P(X <= x) = mass of the left half at distances >= |x|
        let t = -x;
        let strictly_below = left.mass_below(t) - left.atoms.iter().filter(|a| a.0 == t).map(|a| a.1).sum::<f64>();
        lm - strictly_below
    } else {
        lm + origin + right.mass_below(x)
    }
}

fn tabulated_pieces(grid: &[f64], density: &[f64], out: &mut HalfMeasures) {
    for i in 0..grid.len() - 1 {
        let (x0, x1, d0, d1) = (grid[i], grid[i + 1], density[i], density[i + 1]);
        let slope = (d1 - d0) / (x1 - x0);
        let at = |x: f64| d0 + slope * (x - x0);
        let mut push = |lo: f64, hi: f64| {
            if hi <= lo {
                return;
            }
            if lo >= 0.0 {
                let shape = DensityShape::Linear { c0: at(0.0), c1: slope };
                out.right.pieces.push(DensityPiece { lo, hi, shape });
            } else {
                // t = -x, density(t) = at(0) - slope t
                let shape = DensityShape::Linear { c0: at(0.0), c1: -slope };
                out.left.pieces.push(DensityPiece { lo: -hi, hi: -lo, shape });
            }
        };
        if x0 < 0.0 && x1 > 0.0 {
            push(x0, 0.0);
            push(0.0, x1);
        } else {
            push(x0, x1);
        }
    }
}

/// Search domain.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Support {
    #[default]
    #[serde(rename = "full")]
    FullLine,
    /// Search on `[-L1, L2]` with reset at the endpoints.
    #[serde(rename = "interval")]
    Interval {
        #[serde(rename = "L1")]
        l1: f64,
        #[serde(rename = "L2")]
        l2: f64,
    },
}

impl Support {
    pub fn validate(&self) -> Result<()> {
        if let Support::Interval { l1, l2 } = *self {
            check_positive("L1", l1)?;
            check_positive("L2", l2)?;
        }
        Ok(())
    }

    pub fn contains(&self, a: f64) -> bool {
        match *self {
            Support::FullLine => a.is_finite(),
            Support::Interval { l1, l2 } => a >= -l1 && a <= l2,
        }
    }
}

/// Complete model description as read from a JSON file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(rename = "D")]
    pub d: f64,
    pub rate: RateFunction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetDistribution>,
    #[serde(default)]
    pub support: Support,
}

impl ModelSpec {
    /// Parses a model file. Families that carry their own `D` inherit the
    /// model's value when it is omitted.
    pub fn from_json(text: &str) -> Result<Self> {
        let mut value: serde_json::Value = serde_json::from_str(text)?;
        if let Some(d) = value.get("D").cloned() {
            if let Some(rate) = value.get_mut("rate").and_then(|r| r.as_object_mut()) {
                let needs_d = matches!(
                    rate.get("family").and_then(|f| f.as_str()),
                    Some("quad_decay") | Some("stretched_exp")
                );
                if needs_d && !rate.contains_key("D") {
                    rate.insert("D".into(), d);
                }
            }
        }
        let spec: ModelSpec = serde_json::from_value(value)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        ModelParams::new(self.d)?;
        self.rate.validate()?;
        self.support.validate()?;
        if let Some(t) = &self.target {
            t.validate()?;
        }
        Ok(())
    }
}
