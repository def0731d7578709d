//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line to stderr
//! (bypassing the test harness capture) and then asserts the verdict.

use std::io::Write;
use std::time::Instant;

use resetsearch::analysis::{
    estimate_growth, expected_search_time, optimize_constant_rate, optimize_family, variational_objective, FamilyBox,
    GrowthModelChoice,
};
use resetsearch::harmonic::{ClosedFormPhi, RiccatiOptions};
use resetsearch::hitting::{classify_finiteness, expected_hitting_general, Finiteness, HittingEvaluator, PhiChoice};
use resetsearch::model::{RateFunction, Support, TargetDistribution};
use resetsearch::montecarlo::{simulate_hitting, simulate_paths, SimConfig};
use resetsearch::Error;

fn verdict(n: u32, name: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr().lock(), "\ncriterion {n:>2} [{name}]: {tag}  {detail}");
    assert!(pass, "criterion {n} failed: {detail}");
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

#[test]
fn criterion_01_constant_rate_closed_form() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for r in [0.1f64, 1.0, 10.0] {
        for d in [0.5, 1.0, 2.0] {
            for a in [-5.0, -1.0, -0.5, 0.5, 1.0, 5.0] {
                let x = (2.0 * r / d).sqrt() * f64::abs(a);
                let exact = x.exp_m1() / r;
                for choice in [PhiChoice::Phi3, PhiChoice::Phi1] {
                    let v = expected_hitting_general(&RateFunction::constant(r).unwrap(), d, a, choice).unwrap();
                    worst = worst.max(rel(v.value(), exact));
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        1,
        "constant closed form",
        worst <= 1e-6 && secs < 10.0,
        &format!("max rel err {worst:.2e} over 108 cases, {secs:.2}s"),
    );
}

#[test]
fn criterion_02_monte_carlo_concordance() {
    let start = Instant::now();
    let cfg = SimConfig { dt: 1e-4, n_paths: 200_000, t_max: 1e3, seed: 2024, bridge_correction: true };
    let full = simulate_hitting(&RateFunction::constant(2.0).unwrap(), 2.0, 1.0, &Support::FullLine, &cfg).unwrap();
    let iv = Support::Interval { l1: 1.0, l2: 1.0 };
    let interval = simulate_hitting(&RateFunction::constant(0.0).unwrap(), 1.0, 0.5, &iv, &cfg).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let e_full = (2f64.sqrt().exp() - 1.0) / 2.0;
    let z_full = (full.mean - e_full) / full.stderr;
    let z_iv = (interval.mean - 0.75) / interval.stderr;
    verdict(
        2,
        "monte carlo",
        z_full.abs() <= 3.0 && z_iv.abs() <= 3.0 && secs < 120.0,
        &format!(
            "full line {:.5} ± {:.5} vs {e_full:.5} (z = {z_full:.2}); interval {:.5} ± {:.5} vs 0.75 (z = {z_iv:.2}); {secs:.1}s",
            full.mean, full.stderr, interval.mean, interval.stderr
        ),
    );
}

#[test]
fn criterion_03_exponential_target_optimum() {
    let mut pass = true;
    let mut notes = Vec::new();
    for beta in [0.5, 1.0, 2.0] {
        let mu = TargetDistribution::TwoSidedExponential { beta };
        let rep = optimize_constant_rate(1.0, &mu, &Support::FullLine).unwrap();
        let (er, ev) = (rel(rep.optimum[0], beta * beta / 8.0), rel(rep.value, 8.0 / (beta * beta)));
        pass &= er <= 1e-2 && ev <= 5e-3;
        notes.push(format!("β={beta}: r* {:.6} (err {er:.1e}), value {:.6} (err {ev:.1e})", rep.optimum[0], rep.value));
    }
    verdict(3, "exponential optimum", pass, &notes.join("; "));
}

#[test]
fn criterion_04_uniform_interval() {
    let mu = TargetDistribution::UniformInterval { half_width: 1.0 };
    let rep = optimize_constant_rate(1.0, &mu, &Support::Interval { l1: 1.0, l2: 1.0 }).unwrap();
    let pass = rep.optimum[0] == 0.0 && rep.boundary && (rep.value - 5.0 / 6.0).abs() <= 1e-6;
    verdict(
        4,
        "uniform interval",
        pass,
        &format!("r* = {}, boundary = {}, value {:.9}", rep.optimum[0], rep.boundary, rep.value),
    );
}

#[test]
fn criterion_05_triangular_interval() {
    let mu = TargetDistribution::TriangularInterval { half_width: 1.0 };
    let rep = optimize_constant_rate(1.0, &mu, &Support::Interval { l1: 1.0, l2: 1.0 }).unwrap();
    let x = rep.x_star.unwrap();
    let avg = mu.avg_dist().unwrap();
    let ratio = rep.value / (avg * avg);
    let pass = (x - 1.3538).abs() <= 0.01 && rel(rep.value, 0.495) <= 1e-2 && rel(ratio, 4.455) <= 1e-2;
    verdict(
        5,
        "triangular interval",
        pass,
        &format!("x* {x:.5}, r* {:.5}, objective {:.6}, AvgDist ratio {ratio:.5}", rep.optimum[0], rep.value),
    );
}

#[test]
fn criterion_06_finiteness_dichotomy() {
    let mut pass = true;
    let mut notes = Vec::new();
    for d in [0.5, 1.0, 2.0] {
        for (mult, want) in [(1.0, Finiteness::Infinite), (2.0, Finiteness::Finite)] {
            let rate = RateFunction::power_law(mult * d, 1.0, -1.0).unwrap();
            let class = classify_finiteness(&rate, d).unwrap().overall;
            let mut channel = Vec::new();
            for choice in [PhiChoice::Phi3, PhiChoice::Phi1] {
                let ev = HittingEvaluator::new(&rate, d, choice, &RiccatiOptions::default()).unwrap();
                for a in [-1.0, 1.0] {
                    let finite = ev.eval(a).unwrap().log_value.is_some();
                    channel.push(finite == (want == Finiteness::Finite));
                }
            }
            let ok = class == want && channel.iter().all(|c| *c);
            pass &= ok;
            notes.push(format!("D={d}, {mult}D/(1+x²): {class}{}", if ok { "" } else { " (mismatch)" }));
        }
    }
    verdict(6, "finiteness dichotomy", pass, &notes.join("; "));
}

#[test]
fn criterion_07_power_law_exponent() {
    let start = Instant::now();
    let grid: Vec<f64> = (0..=8).map(|k| 10.0 * 2f64.powf(k as f64 / 2.0)).collect();
    let mut pass = true;
    let mut notes = Vec::new();
    for lambda in [1.5, 3.0, 6.0] {
        let m = 0.5 * (1.0 + (1.0f64 + 8.0 * lambda).sqrt());
        let rate = RateFunction::quad_decay(m, 1.0, 1.0).unwrap();
        let fit = estimate_growth(&rate, 1.0, &grid, GrowthModelChoice::PowerLaw).unwrap();
        pass &= (fit.exponent - m).abs() <= 0.1;
        notes.push(format!("λ={lambda}: exponent {:.4} vs m {m:.4}", fit.exponent));
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 60.0;
    verdict(7, "power-law exponent", pass, &format!("{}; {secs:.2}s", notes.join("; ")));
}

#[test]
fn criterion_08_stretched_exponential_growth() {
    let grid = |hi: f64| -> Vec<f64> { (1..=(hi / 5.0) as usize).map(|k| 5.0 * k as f64).collect() };
    let mut pass = true;
    let mut notes = Vec::new();
    for l in [0.5, 1.0] {
        let rate = RateFunction::stretched_exp(1.0, 1.0, l, 1.0).unwrap();
        let choice = GrowthModelChoice::LogPolynomial { l };
        let base = estimate_growth(&rate, 1.0, &grid(40.0), choice).unwrap();
        let wide = estimate_growth(&rate, 1.0, &grid(80.0), choice).unwrap();
        let drift = rel(wide.prefactor, base.prefactor);
        pass &= base.r_squared > 0.999 && base.prefactor > 0.0 && drift <= 0.05;
        notes.push(format!(
            "l={l}: K {:.5} (R² {:.7}), doubled range K {:.5} (drift {drift:.1e})",
            base.prefactor, base.r_squared, wide.prefactor
        ));
    }
    verdict(8, "stretched-exp growth", pass, &notes.join("; "));
}

#[test]
fn criterion_09_quadratic_family_reproduction() {
    let fit = |beta: f64| (8.14 + 12.42 * (-35.66 * beta).exp()) / (beta * beta);
    let mut pass = true;
    let mut notes = Vec::new();
    for beta in [0.05, 0.1, 0.5] {
        let mu = TargetDistribution::TwoSidedExponential { beta };
        let fbox = FamilyBox::for_target(&mu).unwrap();
        let rep = match optimize_family(1.0, &mu, &fbox) {
            Ok(r) => r,
            Err(Error::BoxExhausted { report }) => *report,
            Err(e) => panic!("β={beta}: {e}"),
        };
        let dev = rep.value / fit(beta) - 1.0;
        // within 2%, or a documented reproducible discrepancy up to 5%
        let ok = dev.abs() <= 0.05;
        pass &= ok;
        let tail: Vec<String> = rep
            .trace
            .iter()
            .rev()
            .take(3)
            .map(|t| format!("(m {:.4}, γ {:.4e}) -> {:?}", t.params[0], t.params[1], t.value))
            .collect();
        notes.push(format!(
            "β={beta}: optimum m {:.4}, γ {:.4e}, value {:.4} vs fit {:.4} ({:+.2}%), value·β² {:.5}, {} evals, last trace [{}]",
            rep.optimum[0],
            rep.optimum[1],
            rep.value,
            fit(beta),
            100.0 * dev,
            rep.value * beta * beta,
            rep.evaluations,
            tail.join(", ")
        ));
    }
    verdict(9, "quadratic family", pass, &notes.join("; "));
}

#[test]
fn criterion_10_property_suite() {
    let start = Instant::now();
    let d = 1.0;
    let mut checks: Vec<(&str, bool)> = Vec::new();

    // representation equivalence
    let rates = [
        RateFunction::constant(0.7).unwrap(),
        RateFunction::power_law(2.0, 1.0, -1.0).unwrap(),
        RateFunction::quad_decay(3.0, 1.0, d).unwrap(),
        RateFunction::power_law(0.5, 1.0, -0.5).unwrap(),
    ];
    let mut equiv = true;
    for rate in &rates {
        let e3 = HittingEvaluator::new(rate, d, PhiChoice::Phi3, &RiccatiOptions::default()).unwrap();
        let e1 = HittingEvaluator::new(rate, d, PhiChoice::Phi1, &RiccatiOptions::default()).unwrap();
        for a in [-2.0, -0.5, 0.5, 3.0] {
            let (x, y) = (e3.eval(a).unwrap(), e1.eval(a).unwrap());
            let tol = 10.0 * (x.error_estimate + y.error_estimate) + 1e-9;
            equiv &= (x.log_value.unwrap() - y.log_value.unwrap()).abs() <= tol;
        }
    }
    checks.push(("phi3/phi1 equivalence", equiv));

    // components decrease as r doubles
    let mut mono = true;
    for (lo, hi) in [
        (RateFunction::constant(0.3).unwrap(), RateFunction::constant(0.6).unwrap()),
        (RateFunction::power_law(1.5, 1.0, -1.0).unwrap(), RateFunction::power_law(3.0, 1.0, -1.0).unwrap()),
    ] {
        let el = HittingEvaluator::new(&lo, d, PhiChoice::Phi3, &RiccatiOptions::default()).unwrap();
        let eh = HittingEvaluator::new(&hi, d, PhiChoice::Phi3, &RiccatiOptions::default()).unwrap();
        for a in [-1.0, 0.5, 4.0] {
            let (cl, ch) = (el.components(a).unwrap(), eh.components(a).unwrap());
            mono &= ch.ln_u <= cl.ln_u + 1e-9 && ch.ln_v.unwrap() <= cl.ln_v.unwrap() + 1e-9;
        }
    }
    checks.push(("component monotonicity", mono));

    // symmetry for an even rate
    let ev = HittingEvaluator::new(&rates[1], d, PhiChoice::Phi3, &RiccatiOptions::default()).unwrap();
    let sym = [0.3, 1.0, 7.0]
        .iter()
        .all(|&a| (ev.eval(a).unwrap().log_value.unwrap() - ev.eval(-a).unwrap().log_value.unwrap()).abs() < 1e-8);
    checks.push(("symmetry", sym));

    // variational objective equals the rate objective
    let mu = TargetDistribution::TwoSidedExponential { beta: 1.0 };
    let v = variational_objective(&ClosedFormPhi::Polynomial { gamma: 1.0, m: 3.0, eps: 0.0 }, d, &mu).unwrap();
    let w = expected_search_time(&rates[2], d, &mu, &Support::FullLine).unwrap();
    checks.push(("variational equality", rel(v.value.unwrap(), w.value.unwrap()) < 1e-5));

    // deterministic replay
    let cfg = SimConfig { dt: 1e-3, n_paths: 500, t_max: 100.0, seed: 17, bridge_correction: true };
    let a = simulate_paths(&rates[0], d, 0.8, &Support::FullLine, &cfg).unwrap();
    let b = simulate_paths(&rates[0], d, 0.8, &Support::FullLine, &cfg).unwrap();
    checks.push(("mc replay", a == b));

    let secs = start.elapsed().as_secs_f64();
    let pass = checks.iter().all(|c| c.1) && secs < 300.0;
    let detail: Vec<String> = checks.iter().map(|(n, ok)| format!("{n} {}", if *ok { "ok" } else { "failed" })).collect();
    verdict(10, "property suite", pass, &format!("{}; {secs:.2}s (full proptest suite in tests/properties.rs)", detail.join(", ")));
}
