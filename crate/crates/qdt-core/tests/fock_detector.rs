use num_complex::Complex64;
use proptest::prelude::*;
use qdt_core::detector::{self, DetectorSpec};
use qdt_core::fock::{self, coherent_amplitudes, hermitize, log_weight, CMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use statrs::function::gamma::ln_gamma;

fn lnfact(n: usize) -> f64 {
    if n < 2 {
        0.0
    } else {
        ln_gamma(n as f64 + 1.0)
    }
}

/// Normal-ordered expansion of the no-click operator,
/// `⟨j|Π₀|k⟩ = e^{-ηR|α_L|²} Σ_m (1-κ)^m (-β)^{j-m} (-β*)^{k-m} √(j!k!)/(m!(j-m)!(k-m)!)`
/// with `β = η√(R(1-R)) α_L`, `κ = η(1-R)`.
fn closed_form(spec: &DetectorSpec, j: usize, k: usize) -> Complex64 {
    let (r, eta, al) = (spec.reflectivity, spec.eta_apd, spec.lo_amplitude);
    let beta = al * (eta * (r * (1.0 - r)).sqrt());
    let kappa = eta * (1.0 - r);
    let mut s = Complex64::new(0.0, 0.0);
    for m in 0..=j.min(k) {
        let mag = 0.5 * (lnfact(j) + lnfact(k)) - lnfact(m) - lnfact(j - m) - lnfact(k - m);
        let damp = if m == 0 {
            1.0
        } else {
            (1.0 - kappa).powi(m as i32)
        };
        s +=
            (-beta).powu((j - m) as u32) * (-beta.conj()).powu((k - m) as u32) * (mag.exp() * damp);
    }
    s * (-eta * r * al.norm_sqr()).exp()
}

fn scenario(r: f64, eta: f64, dim: usize) -> DetectorSpec {
    DetectorSpec::with_lo_photons(r, eta, 5.0, dim).unwrap()
}

#[test]
fn no_click_operator_matches_normal_ordered_expansion() {
    for (r, eta) in [(0.5, 0.6), (0.5, 0.2), (0.1, 0.9), (0.3, 0.7)] {
        let spec = scenario(r, eta, 30);
        let pi0 = detector::build_no_click_povm(&spec, 1e-10).unwrap();
        for j in 0..30 {
            for k in 0..30 {
                let want = closed_form(&spec, j, k);
                assert!(
                    (pi0.get(j, k) - want).norm() < 1e-9,
                    "({r},{eta}) j={j} k={k}: {} vs {want}",
                    pi0.get(j, k)
                );
            }
        }
    }
    // complex LO phase
    let spec = DetectorSpec::new(0.5, 0.6, Complex64::from_polar(5f64.sqrt(), 0.7), 20).unwrap();
    let pi0 = detector::build_no_click_povm(&spec, 1e-10).unwrap();
    for j in 0..20 {
        for k in 0..20 {
            assert!((pi0.get(j, k) - closed_form(&spec, j, k)).norm() < 1e-9);
        }
    }
}

#[test]
fn no_local_oscillator_is_binomial_thinning() {
    let spec = DetectorSpec::with_lo_photons(0.5, 0.6, 0.0, 12).unwrap();
    let pi0 = detector::build_no_click_povm(&spec, 1e-10).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(2024);
    let shots = 200_000;
    for j in 0..=10usize {
        // each photon independently reaches the APD and fires it
        let silent = (0..shots)
            .filter(|_| (0..j).all(|_| !(rng.random::<f64>() < 0.5 && rng.random::<f64>() < 0.6)))
            .count();
        let est = silent as f64 / shots as f64;
        let p = pi0.get(j, j).re;
        let sigma = (p * (1.0 - p) / shots as f64).sqrt().max(1e-6);
        assert!((est - p).abs() < 5.0 * sigma, "j={j}: MC {est} vs {p}");
        assert!((p - 0.7f64.powi(j as i32)).abs() < 1e-12);
        for k in 0..12 {
            if k != j {
                assert!(pi0.get(j, k).norm() < 1e-14);
            }
        }
    }
}

#[test]
fn expectation_matches_q_oracle_on_random_probes() {
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let dim = 130;
    for (r, eta) in [(0.5, 0.6), (0.5, 0.2), (0.1, 0.9)] {
        let spec = scenario(r, eta, dim);
        let tol = 1e-10;
        let pi0 = detector::build_no_click_povm(&spec, tol).unwrap();
        for _ in 0..50 {
            let m = (rng.random::<f64>() * 50.0).sqrt();
            let th = rng.random::<f64>() * std::f64::consts::TAU;
            let c = coherent_amplitudes(m, th, dim).unwrap();
            let got = pi0.expectation(&c.coeffs);
            let want = detector::q_oracle(&spec, Complex64::from_polar(m, th));
            assert!(
                (got - want).abs() < f64::max(1e-6, 10.0 * tol) + c.tail_mass,
                "|α|²={} θ={th}: {got} vs {want}",
                m * m
            );
        }
    }
}

#[test]
fn model_invariants() {
    for (r, eta) in [(0.5, 0.6), (0.5, 0.2), (0.1, 0.9)] {
        let spec = scenario(r, eta, 60);
        let pi0 = detector::build_no_click_povm(&spec, 1e-10).unwrap();
        let ev = pi0.eigenvalues();
        assert!(ev.iter().all(|&x| (-1e-8..=1.0 + 1e-8).contains(&x)));
        for j in 0..60 {
            for k in 0..60 {
                assert!(pi0.get(j, k).im.abs() < 1e-10);
            }
            for l in 1..60 - j {
                let bound = (pi0.get(j, j).re * pi0.get(j + l, j + l).re).sqrt() + 1e-8;
                assert!(pi0.get(j, j + l).norm() <= bound);
            }
        }
        let set = detector::detector_povm(&spec, 1e-10).unwrap();
        let sum = set.outcomes[0].matrix() + set.outcomes[1].matrix();
        assert_eq!(sum, CMatrix::identity(60, 60));
    }
}

#[test]
fn destructive_interference_point_never_clicks() {
    let spec = scenario(0.1, 0.9, 10);
    let alpha = -spec.lo_amplitude * (0.1f64 / 0.9).sqrt();
    assert!((detector::q_oracle(&spec, alpha) - 1.0).abs() < 1e-15);
}

#[test]
fn log_weight_against_extended_precision() {
    // e^{-50} 50^{11} / √(10! 12!) with the factorials as exact integers
    let f10: u128 = (1..=10u128).product();
    let f12: u128 = (1..=12u128).product();
    let want = -50.0 + 11.0 * 50f64.ln() - 0.5 * ((f10 as f64).ln() + (f12 as f64).ln());
    assert!((log_weight(10, 12, 50f64.sqrt()) - want).abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn log_weight_is_symmetric(j in 0usize..300, k in 0usize..300, m in 0.0f64..30.0) {
        prop_assert_eq!(log_weight(j, k, m), log_weight(k, j, m));
    }

    #[test]
    fn hermitize_is_idempotent(d in 1usize..8, seed in any::<u64>()) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let m = CMatrix::from_fn(d, d, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let once = hermitize(&m).unwrap();
        let twice = hermitize(once.matrix()).unwrap();
        prop_assert!((once.matrix() - twice.matrix()).norm() < 1e-15);
    }

    #[test]
    fn coherent_tail_is_small_inside_the_quarter_range(d in 20usize..200, frac in 0.0f64..1.0) {
        let mean = frac * (d - 1) as f64 / 4.0;
        let c = coherent_amplitudes(mean.sqrt(), 0.3, d).unwrap();
        // direct Poisson sum over the kept photon numbers
        let kept: f64 = (0..d).map(|j| (-mean + j as f64 * mean.max(1e-300).ln() - lnfact(j)).exp()).sum();
        let kept = if mean == 0.0 { 1.0 } else { kept };
        prop_assert!(1.0 - kept < 1e-6);
        prop_assert!(c.tail_mass < 1e-6);
        prop_assert!((c.tail_mass - (1.0 - kept)).abs() < 1e-10);
        prop_assert!((fock::poisson_tail_above(mean, d - 1) - c.tail_mass).abs() < 1e-12);
    }
}
