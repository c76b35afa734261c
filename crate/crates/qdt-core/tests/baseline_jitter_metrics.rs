use num_complex::Complex64;
use proptest::prelude::*;
use qdt_core::baseline::joint::{full_joint_solve, JointConfig};
use qdt_core::baseline::pfunction::{self, PhaseSpaceGrid};
use qdt_core::detector::{self, DetectorSpec};
use qdt_core::fock::{hermitize, CMatrix, FockOperator};
use qdt_core::jitter::{apply_jitter, decay_bound_check, jitter_weight};
use qdt_core::probe::{self, ProbeGrid};
use qdt_core::recursive::{run_recursion, ReconConfig};
use qdt_core::{metrics, Execution, PovmSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn random_psd(rng: &mut ChaCha20Rng, d: usize) -> FockOperator {
    let g = CMatrix::from_fn(d, d, |_, _| {
        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    hermitize(&(&g * g.adjoint()).unscale(d as f64)).unwrap()
}

fn desk(dim: usize) -> DetectorSpec {
    DetectorSpec::with_lo_photons(0.5, 0.6, 5.0, dim).unwrap()
}

// ---------------------------------------------------------------------------
// P-function baseline

struct PSetup {
    grid: PhaseSpaceGrid,
    exact: Vec<f64>,
    truth: FockOperator,
    kernels: Vec<pfunction::PKernel>,
}

fn pfunction_setup() -> PSetup {
    let spec = desk(40);
    let grid = PhaseSpaceGrid::new(10.0, 0.05).unwrap();
    let exact = Execution::Parallel.map(grid.len(), |i| detector::q_oracle(&spec, grid.alpha(i)));
    let truth = detector::build_no_click_povm(&spec, 1e-10)
        .unwrap()
        .truncate(5);
    let kernels = (0..5)
        .flat_map(|j| (0..5).map(move |k| (j, k)))
        .map(|(j, k)| pfunction::build_kernel(&grid, j, k, 5.0, Execution::Parallel))
        .collect();
    PSetup {
        grid,
        exact,
        truth,
        kernels,
    }
}

fn pfunction_matrix(s: &PSetup, probs: &[f64]) -> CMatrix {
    let mut m = CMatrix::zeros(5, 5);
    for kern in &s.kernels {
        m[(kern.j, kern.k)] = pfunction::pfunction_element(probs, kern, &s.grid).unwrap();
    }
    m
}

#[test]
fn pfunction_baseline_accuracy_and_noise_amplification() {
    let s = pfunction_setup();
    let exact = pfunction_matrix(&s, &s.exact);
    let rel = (&exact - s.truth.matrix()).norm() / s.truth.frobenius_norm();
    assert!(rel < 0.05, "noise-free relative error {rel}");
    assert_eq!(
        exact,
        pfunction::pfunction_block(&s.exact, &s.grid, 5, 5.0, Execution::Sequential).unwrap()
    );

    let noisy = pfunction_matrix(
        &s,
        &pfunction::noisy_probabilities(&s.exact, 100_000, 42, Execution::Parallel),
    );
    let min_eig = hermitize(&noisy).unwrap().min_eigenvalue();
    assert!(min_eig < -0.05, "noisy min eigenvalue {min_eig}");

    // high-order elements carry larger derivatives of the noise
    let (mut low, mut high) = (0.0, 0.0);
    for seed in 0..20 {
        let m = pfunction_matrix(
            &s,
            &pfunction::noisy_probabilities(&s.exact, 100_000, seed, Execution::Parallel),
        );
        let errs = pfunction::element_errors(&m, &s.truth);
        let mean = |sum: usize| {
            let sel: Vec<f64> = errs
                .iter()
                .filter(|e| e.j + e.k == sum)
                .map(|e| e.abs_error)
                .collect();
            sel.iter().sum::<f64>() / sel.len() as f64
        };
        low += mean(2);
        high += mean(8);
    }
    assert!(high > low, "mean error j+k=8 {high} vs j+k=2 {low}");
}

// ---------------------------------------------------------------------------
// full joint baseline

fn small_grid() -> ProbeGrid {
    ProbeGrid::from_photon_range(2.0, 0.1, 20).unwrap()
}

#[test]
fn joint_solve_recovers_diagonal_detector() {
    let spec = DetectorSpec::with_lo_photons(0.5, 0.6, 0.0, 6).unwrap();
    let truth = detector::detector_povm(&spec, 1e-12).unwrap();
    let data = probe::born_table(&truth, &small_grid(), Execution::Parallel).unwrap();
    let cfg = JointConfig {
        gamma: 1e-4,
        ..Default::default()
    };
    let (povm, _) = full_joint_solve(&data, 6, &cfg).unwrap();
    for (rec, tr) in povm.outcomes.iter().zip(&truth.outcomes) {
        for j in 0..6 {
            for k in 0..6 {
                if j != k {
                    assert!(rec.get(j, k).norm() < 1e-6);
                }
            }
        }
        let (a, b) = (rec.main_diagonal(), tr.main_diagonal());
        let err = a
            .iter()
            .zip(&b)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt()
            / b.iter().map(|y| y * y).sum::<f64>().sqrt();
        assert!(err < 1e-3, "diagonal relative error {err}");
    }
}

#[test]
fn joint_solve_matches_truth_and_recursion_at_small_dimension() {
    let truth = detector::detector_povm(&desk(8), 1e-12).unwrap();
    let data = probe::born_table(&truth, &small_grid(), Execution::Parallel).unwrap();
    let (joint, rep) = full_joint_solve(&data, 8, &JointConfig::default()).unwrap();
    let f = metrics::fidelity(&joint.outcomes[0], &truth.outcomes[0]).unwrap();
    assert!(f >= 0.995, "joint fidelity {f}");
    assert!(rep.residual_norm.is_finite());

    let rec = run_recursion(
        &data,
        8,
        &ReconConfig {
            l_max: 7,
            ..Default::default()
        },
    )
    .map_err(|e| e.0)
    .unwrap();
    let cross = metrics::fidelity(&joint.outcomes[0], &rec.povm.outcomes[0]).unwrap();
    assert!(cross >= 0.99, "joint vs recursion {cross}");
}

#[test]
fn joint_solve_output_is_a_povm_under_noise() {
    let truth = detector::detector_povm(&desk(8), 1e-12).unwrap();
    let ds = probe::synthesize(&truth, &small_grid(), 10_000, 4, Execution::Parallel).unwrap();
    let freqs = probe::relative_frequencies(&ds).unwrap();
    let (povm, _) = full_joint_solve(&freqs, 8, &JointConfig::default()).unwrap();
    let chk = povm.check();
    assert!(chk.min_eigenvalues.iter().all(|&m| m >= -1e-6));
    assert!(chk.completeness_error <= 1e-6);
    assert_eq!(chk.hermitian_defect, 0.0);
}

// ---------------------------------------------------------------------------
// jitter

#[test]
fn jittered_detector_obeys_decay_bound() {
    let pi0 = detector::build_no_click_povm(&desk(40), 1e-10).unwrap();
    for deg in [5.0f64, 10.0, 20.0] {
        let delta = deg.to_radians();
        let jit = apply_jitter(&pi0, delta).unwrap();
        let rep = decay_bound_check(&pi0, &jit, delta).unwrap();
        assert!(rep.passed(), "{deg}°: {:?}", rep.violations.first());
    }
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    let op = random_psd(&mut rng, 12);
    let rep = decay_bound_check(&op, &apply_jitter(&op, 0.2).unwrap(), 0.2).unwrap();
    assert!(rep.passed());
}

#[test]
fn jitter_weight_tracks_gaussian_factor() {
    let delta = 10f64.to_radians();
    let ratio = jitter_weight(5, delta) / jitter_weight(0, delta);
    let g = (-25.0 * delta * delta / 2.0).exp();
    assert!(ratio >= 0.5 * g && ratio <= 2.0 * g, "ratio {ratio} vs {g}");
    // characteristic function of the untruncated Gaussian when δ ≪ π
    assert!((jitter_weight(3, 0.05) - (-9.0 * 0.05f64.powi(2) / 2.0).exp()).abs() < 1e-10);
}

#[test]
fn jitter_weight_decreases_over_the_resolved_range() {
    for delta in [0.1f64, 0.3, 0.6] {
        let l_end = (std::f64::consts::PI / delta).floor() as usize;
        let w: Vec<f64> = (0..=l_end).map(|l| jitter_weight(l, delta)).collect();
        assert!(w.windows(2).all(|p| p[1] <= p[0]), "δ={delta}: {w:?}");
        assert!(w[0] <= 1.0);
    }
}

#[test]
fn jitter_commutes_with_hermitization_and_keeps_psd() {
    let mut rng = ChaCha20Rng::seed_from_u64(12);
    let delta = 0.3;
    let d = 9;
    let raw = CMatrix::from_fn(d, d, |_, _| {
        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    let scaled = CMatrix::from_fn(d, d, |j, k| {
        raw[(j, k)] * jitter_weight(j.abs_diff(k), delta)
    });
    let a = apply_jitter(&hermitize(&raw).unwrap(), delta).unwrap();
    let b = hermitize(&scaled).unwrap();
    assert!((a.matrix() - b.matrix()).norm() < 1e-14);

    for _ in 0..10 {
        let op = random_psd(&mut rng, d);
        assert!(apply_jitter(&op, delta).unwrap().min_eigenvalue() >= -1e-12);
    }
}

// ---------------------------------------------------------------------------
// metrics

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn fidelity_is_symmetric_and_bounded(d in 2usize..8, seed in any::<u64>()) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let (a, b) = (random_psd(&mut rng, d), random_psd(&mut rng, d));
        let (fab, fba) = (metrics::fidelity(&a, &b).unwrap(), metrics::fidelity(&b, &a).unwrap());
        prop_assert!((fab - fba).abs() < 1e-9);
        prop_assert!((-1e-12..=1.0 + 1e-9).contains(&fab));
        prop_assert!((metrics::fidelity(&a, &a).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn diagonal_distances_add_up_to_frobenius(d in 1usize..10, seed in any::<u64>()) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let (a, b) = (random_psd(&mut rng, d), random_psd(&mut rng, d));
        let dist = metrics::diagonal_distances(&a, &b, d - 1);
        let total: f64 = dist.iter().enumerate().map(|(l, x)| if l == 0 { x * x } else { 2.0 * x * x }).sum();
        let fro = (a.matrix() - b.matrix()).norm_squared();
        prop_assert!((total - fro).abs() <= 1e-12 * (1.0 + fro));
    }

    #[test]
    fn frobenius_distance_obeys_triangle_inequality(d in 1usize..8, seed in any::<u64>()) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let (a, b, c) = (random_psd(&mut rng, d), random_psd(&mut rng, d), random_psd(&mut rng, d));
        let dist = |x: &FockOperator, y: &FockOperator| metrics::relative_error(x, y).unwrap() * y.frobenius_norm();
        prop_assert!(dist(&a, &c) <= dist(&a, &b) + dist(&b, &c) + 1e-12);
    }
}

#[test]
fn identical_povms_compare_perfectly() {
    let set: PovmSet = detector::detector_povm(&desk(10), 1e-10).unwrap();
    let rep = metrics::compare(&set.outcomes[0], &set.outcomes[0], 3).unwrap();
    assert!((rep.fidelity - 1.0).abs() < 1e-9);
    assert_eq!(rep.relative_error, 0.0);
    assert!(rep.per_diagonal_distance.iter().all(|&x| x == 0.0));
}
