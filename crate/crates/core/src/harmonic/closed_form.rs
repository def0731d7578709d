use super::{ClosedFormPhi, HarmonicSolution, PhiKind};
use crate::error::{Error, Result};
use crate::model::{check_positive, RateFunction};

/// Closed-form harmonic functions of a rate: always φ₃, plus φ₁ when the
/// family has one in closed form.
#[derive(Clone, Debug)]
pub struct ClosedFormPhis {
    pub phi3: HarmonicSolution,
    pub phi1: Option<HarmonicSolution>,
}

fn same_d(family: f64, d: f64) -> bool {
    (family - d).abs() <= 1e-12 * d
}

/// Exact φ for the analytic families.
///
/// Constant rates give `e^{sx} + e^{-sx}` and `e^{sx}` with `s = √(2r/D)`,
/// the quadratic-decay family `γ + |x|^m`, the stretched-exponential family
/// `exp(λ(γ + x²)^{(l+1)/2})` and `D/(γ + x²)` the polynomial `γ + x²`.
pub fn build_phi_closed_form(rate: &RateFunction, d: f64) -> Result<ClosedFormPhis> {
    check_positive("D", d)?;
    rate.validate()?;
    let constant = |r: f64| -> Result<ClosedFormPhis> {
        if r <= 0.0 {
            return Err(Error::NoClosedForm("a vanishing rate has no positive recurrent harmonic pair".into()));
        }
        let s = (2.0 * r / d).sqrt();
        Ok(ClosedFormPhis {
            phi3: HarmonicSolution::closed(PhiKind::Phi3, ClosedFormPhi::Cosh { s })?,
            phi1: Some(HarmonicSolution::closed(PhiKind::Phi1, ClosedFormPhi::Exponential { s })?),
        })
    };
    match *rate {
        RateFunction::Constant { r } => constant(r),
        RateFunction::PowerLaw { c, gamma, l } => {
            if l == 0.0 {
                constant(c)
            } else if l == -1.0 && same_d(c, d) {
                Ok(ClosedFormPhis {
                    phi3: HarmonicSolution::closed(PhiKind::Phi3, ClosedFormPhi::Polynomial { gamma, m: 2.0, eps: 0.0 })?,
                    phi1: None,
                })
            } else {
                Err(Error::NoClosedForm(format!("power law c={c}, gamma={gamma}, l={l}")))
            }
        }
        RateFunction::QuadDecayPoly { m, gamma, d: fd } => {
            if !same_d(fd, d) {
                return Err(Error::NoClosedForm("family D differs from model D".into()));
            }
            Ok(ClosedFormPhis {
                phi3: HarmonicSolution::closed(PhiKind::Phi3, ClosedFormPhi::Polynomial { gamma, m, eps: 0.0 })?,
                phi1: None,
            })
        }
        RateFunction::StretchedExpHarmonic { lambda, gamma, l, d: fd } => {
            if !same_d(fd, d) {
                return Err(Error::NoClosedForm("family D differs from model D".into()));
            }
            Ok(ClosedFormPhis {
                phi3: HarmonicSolution::closed(PhiKind::Phi3, ClosedFormPhi::StretchedExp { lambda, gamma, l })?,
                phi1: None,
            })
        }
        RateFunction::Tabulated(_) => Err(Error::NoClosedForm("tabulated rate".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_residual(phi: &HarmonicSolution, rate: &RateFunction, d: f64) -> f64 {
        (-400..=400)
            .map(|i| i as f64 * 0.05)
            .map(|x| phi.residual(rate, d, x).unwrap().abs() / (1.0 + rate.eval(x)))
            .fold(0.0, f64::max)
    }

    #[test]
    fn constant_rate_pair() {
        let rate = RateFunction::constant(2.0).unwrap();
        let p = build_phi_closed_form(&rate, 2.0).unwrap();
        // s = √2, φ₃(0) = 2
        assert!((p.phi3.log_phi(0.0).unwrap() - 2f64.ln()).abs() < 1e-15);
        let x = 0.8;
        let expected = ((2f64.sqrt() * x).exp() + (-(2f64.sqrt()) * x).exp()).ln();
        assert!((p.phi3.log_phi(x).unwrap() - expected).abs() < 1e-14);
        let phi1 = p.phi1.unwrap();
        assert!((phi1.log_phi(x).unwrap() - 2f64.sqrt() * x).abs() < 1e-15);
        assert!(max_residual(&p.phi3, &rate, 2.0) < 1e-12);
        assert!(max_residual(&phi1, &rate, 2.0) < 1e-12);
    }

    #[test]
    fn quad_decay_polynomial() {
        let rate = RateFunction::quad_decay(3.0, 1.0, 0.7).unwrap();
        let p = build_phi_closed_form(&rate, 0.7).unwrap();
        for x in [-2.0, 0.5, 3.0] {
            let expected = (1.0 + f64::abs(x).powi(3)).ln();
            assert!((p.phi3.log_phi(x).unwrap() - expected).abs() < 1e-14);
        }
        assert!(max_residual(&p.phi3, &rate, 0.7) < 1e-12);
    }

    #[test]
    fn stretched_exponential() {
        let rate = RateFunction::stretched_exp(1.0, 1.0, 1.0, 1.0).unwrap();
        let p = build_phi_closed_form(&rate, 1.0).unwrap();
        for x in [0.0, 1.0, 2.0] {
            assert!((p.phi3.log_phi(x).unwrap() - (1.0 + x * x)).abs() < 1e-14);
        }
        assert!(max_residual(&p.phi3, &rate, 1.0) < 1e-12);
        let r2 = RateFunction::stretched_exp(0.6, 2.0, 0.5, 1.3).unwrap();
        let p2 = build_phi_closed_form(&r2, 1.3).unwrap();
        assert!(max_residual(&p2.phi3, &r2, 1.3) < 1e-12);
    }

    #[test]
    fn inverse_square_power_law() {
        let rate = RateFunction::power_law(1.5, 2.0, -1.0).unwrap();
        let p = build_phi_closed_form(&rate, 1.5).unwrap();
        assert!(max_residual(&p.phi3, &rate, 1.5) < 1e-12);
        let twice = RateFunction::power_law(3.0, 2.0, -1.0).unwrap();
        assert!(matches!(build_phi_closed_form(&twice, 1.5), Err(Error::NoClosedForm(_))));
    }

    #[test]
    fn even_rates_give_even_phi3() {
        for rate in [
            RateFunction::constant(0.3).unwrap(),
            RateFunction::quad_decay(4.5, 0.2, 1.0).unwrap(),
            RateFunction::stretched_exp(0.5, 1.0, 0.5, 1.0).unwrap(),
        ] {
            let p = build_phi_closed_form(&rate, 1.0).unwrap().phi3;
            for x in [0.1, 1.7, 9.0] {
                assert!((p.log_phi(x).unwrap() - p.log_phi(-x).unwrap()).abs() < 1e-10);
            }
        }
    }
}
