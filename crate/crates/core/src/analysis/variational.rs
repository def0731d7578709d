use super::objective::{growth_from_tail, integrate_target, Growth, ObjectiveOptions, ObjectiveValue};
use crate::error::{Error, Result};
use crate::harmonic::{ClosedFormPhi, CumulativeIntegrals, HarmonicSolution, PhiKind};
use crate::hitting::HittingEvaluator;
use crate::model::{check_positive, Side, TailLaw, TargetDistribution};

/// Objective of a candidate harmonic function `φ`, evaluated through `φ`
/// alone: for `∫φ⁻² < ∞` on both sides the two-sided functional, for
/// `∫_{-∞}φ⁻² = ∞` the one-sided functional (and its mirror image). It
/// equals `∫ E₀T_a μ(da)` for the induced rate `r = (D/2) φ''/φ`.
///
/// Polynomial candidates with `ε = 0` are mollified to `(ε² + x²)^{m/2}`
/// with `ε = 1e-6 · scale` so that `φ` is `C²` at the origin.
pub fn variational_objective(phi: &ClosedFormPhi, d: f64, mu: &TargetDistribution) -> Result<ObjectiveValue> {
    check_positive("D", d)?;
    let phi = match *phi {
        ClosedFormPhi::Polynomial { gamma, m, eps } if eps == 0.0 && m != 2.0 => {
            let p = ClosedFormPhi::Polynomial { gamma, m, eps: 0.0 };
            ClosedFormPhi::Polynomial { gamma, m, eps: 1e-6 * p.scale() }
        }
        p => p,
    };
    let trial = HarmonicSolution::closed(PhiKind::Phi3, phi)?;
    check_admissible(&phi, trial.scale())?;
    let ci = CumulativeIntegrals::new(&trial)?;
    let kind = ci
        .implied_kind()
        .ok_or_else(|| Error::InadmissiblePhi("∫φ⁻² diverges on both sides".into()))?;
    let sol = HarmonicSolution::closed(kind, phi)?;
    let evaluator = HittingEvaluator::from_phi(&sol, d)?;
    let halves = mu.half_measures()?;
    let symmetric = mu.is_symmetric()? && is_even(&phi);
    let growth = [induced_growth(&phi, d, Side::Left), induced_growth(&phi, d, Side::Right)];
    let e = |a: f64| -> Result<Option<f64>> { Ok(evaluator.eval(a)?.log_value) };
    let err = evaluator.integrals().error_estimate();
    integrate_target(&halves.left, &halves.right, &e, growth, symmetric, &ObjectiveOptions::default(), err)
}

fn is_even(phi: &ClosedFormPhi) -> bool {
    !matches!(phi, ClosedFormPhi::Exponential { .. } | ClosedFormPhi::Affine { .. })
}

/// `φ'' >= 0` on a probe grid, and not identically zero.
fn check_admissible(phi: &ClosedFormPhi, scale: f64) -> Result<()> {
    let mut positive = false;
    for i in -300..=300 {
        let x = scale * (i as f64 * 0.05).sinh();
        let c = phi.curvature(x);
        if c.is_nan() || c < -1e-12 * (1.0 + phi.psi(x).powi(2)) {
            return Err(Error::InadmissiblePhi(format!("φ'' < 0 at x = {x}")));
        }
        positive |= c > 0.0;
    }
    if !positive {
        return Err(Error::InadmissiblePhi("φ'' vanishes identically, so the induced rate is zero".into()));
    }
    Ok(())
}

/// Growth of `E₀T_a` along `side` for the induced rate, from its far tail
/// `(D/2) φ''/φ ≈ c |x|^{-p}` fitted at two distant points.
fn induced_growth(phi: &ClosedFormPhi, d: f64, side: Side) -> Growth {
    let x = 1e6 * phi.scale();
    let r1 = 0.5 * d * phi.curvature(side.sign() * x);
    let r2 = 0.5 * d * phi.curvature(side.sign() * 2.0 * x);
    if !(r1 > 0.0 && r2 > 0.0) {
        return Growth::Power(f64::INFINITY);
    }
    let mut p = -(r2 / r1).log2();
    for snap in [0.0, 2.0] {
        if (p - snap).abs() < 1e-3 {
            p = snap;
        }
    }
    let c = r1 * x.powf(p);
    growth_from_tail(TailLaw { c, p }, d)
}
