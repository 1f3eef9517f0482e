//! Acceptance suite: one test per criterion, each printing a PASS line
//! with the measured figures. Run with `cargo test --test acceptance`.

use std::time::Instant;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use qloss_core::bures::{ecb_optimal_probe, min_fidelity_bruteforce, min_fidelity_closed, mu, EcbQuery};
use qloss_core::channel::{
    apply_loss, apply_loss_with_derivatives, kraus_ops, purified_evolve, LossParams,
};
use qloss_core::fock::{build_probe, AncillaPolicy, ModeLayout, ProbeSpec, PureState};
use qloss_core::measurements::{on_off_povm, schmidt_povm};
use qloss_core::metrology::{
    classical_fi, mp_bound, qfi_from_fidelity, qfim, uhlmann_fidelity, QfimOptions,
    DEFAULT_FD_STEP, DEFAULT_PROB_TOL,
};
use qloss_core::sim::{run_sim, Estimator, GridSpec, PovmChoice, SimScenario};

const TEST_ETAS: [f64; 3] = [0.1, 0.5, 0.9];

fn criterion_probes() -> Vec<(&'static str, PureState)> {
    vec![
        (
            "single-photon p1=1",
            build_probe(
                &ProbeSpec::nds_distribution(vec![0.0, 1.0]),
                AncillaPolicy::OrthonormalMin,
            )
            .unwrap(),
        ),
        (
            "single-photon linear-optics N=1.5",
            build_probe(&ProbeSpec::single_photon(1.5), AncillaPolicy::OrthonormalMin).unwrap(),
        ),
        (
            "TMSV N=1 cutoff 25",
            build_probe(&ProbeSpec::tmsv(1.0, 25), AncillaPolicy::OrthonormalMin).unwrap(),
        ),
        (
            "NDS p=(0.2,0.5,0.3)",
            build_probe(
                &ProbeSpec::nds_distribution(vec![0.2, 0.5, 0.3]),
                AncillaPolicy::OrthonormalMin,
            )
            .unwrap(),
        ),
    ]
}

#[test]
fn criterion_1_nds_saturation() {
    let start = Instant::now();
    let mut worst_sld = 0.0f64;
    let mut worst_fid = 0.0f64;
    for (name, probe) in criterion_probes() {
        let energy = probe.energy(0);
        for &eta in &TEST_ETAS {
            let params = LossParams::etas(vec![eta]).unwrap().to_phi();
            let report = qfim(&probe, &params, &QfimOptions::default()).unwrap();
            let sld_err = (report.qfim[0][0] - 4.0 * energy).abs();
            assert!(
                sld_err <= 1e-6,
                "{name} at eta={eta}: SLD QFI {} vs 4N {}",
                report.qfim[0][0],
                4.0 * energy
            );
            worst_sld = worst_sld.max(sld_err);
            let est = qfi_from_fidelity(&probe, &params, 0, DEFAULT_FD_STEP).unwrap();
            let fid_err = (est.value - 4.0 * energy).abs();
            assert!(
                fid_err <= 1e-4,
                "{name} at eta={eta}: fidelity QFI {} vs 4N {}",
                est.value,
                4.0 * energy
            );
            worst_fid = worst_fid.max(fid_err);
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    println!(
        "criterion 1 PASS: NDS saturation, worst |QFI-4N| sld={worst_sld:.2e} fidelity={worst_fid:.2e}, {elapsed:?}"
    );
}

#[test]
fn criterion_2_environment_access_bound() {
    use rand::prelude::*;
    let start = Instant::now();
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(20260810);
    let layout = ModeLayout::with_roles(&[4], &[vec![4], vec![4]]).unwrap();
    let mut worst_margin = f64::INFINITY;
    for _ in 0..100 {
        let probe = PureState::random(layout.clone(), &mut rng);
        let phis: Vec<f64> = (0..2)
            .map(|_| {
                let eta: f64 = 0.1 + 0.8 * rng.random::<f64>();
                eta.sqrt().acos()
            })
            .collect();
        let params = LossParams::phis(phis).unwrap();
        let report = qfim(&probe, &params, &QfimOptions::default()).unwrap();
        worst_margin = worst_margin.min(report.bound_margin);
        assert!(
            report.bound_margin >= -1e-8,
            "bound violated: margin {}",
            report.bound_margin
        );
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}");
    println!(
        "criterion 2 PASS: 100 random probes respect 4 diag(N) (worst margin {worst_margin:.2e}), {elapsed:?}"
    );
}

#[test]
fn criterion_3_multiparameter_qfim() {
    let spec = ProbeSpec {
        kind: qloss_core::fock::ProbeKind::GenericNds,
        energies: vec![0.5, 2.0],
        modes_per_element: vec![1, 1],
        cutoff: None,
        distributions: vec![
            qloss_core::fock::Distribution::Total(vec![0.5, 0.5]),
            qloss_core::fock::Distribution::Total(vec![0.0, 0.0, 1.0]),
        ],
        trunc_tol: 1e-8,
    };
    let probe = build_probe(&spec, AncillaPolicy::OrthonormalMin).unwrap();
    let params = LossParams::etas(vec![0.35, 0.75]).unwrap().to_phi();
    let report = qfim(&probe, &params, &QfimOptions::default()).unwrap();
    assert!((report.qfim[0][0] - 2.0).abs() <= 1e-6, "{:?}", report.qfim);
    assert!((report.qfim[1][1] - 8.0).abs() <= 1e-6, "{:?}", report.qfim);
    assert!(report.qfim[0][1].abs() < 1e-8);
    assert!(report.qfim[1][0].abs() < 1e-8);
    println!(
        "criterion 3 PASS: product-probe QFIM diag({:.8}, {:.8}), off-diagonals < 1e-8",
        report.qfim[0][0], report.qfim[1][1]
    );
}

#[test]
fn criterion_4_measurement_attainment() {
    // Schmidt-basis measurement attains the QFI for every probe of
    // criterion 1, in the transmittance parametrization.
    let mut worst = 0.0f64;
    for (name, probe) in criterion_probes() {
        let povm = schmidt_povm(&probe).unwrap();
        for &eta in &TEST_ETAS {
            let params = LossParams::etas(vec![eta]).unwrap();
            let (out, drhos) = apply_loss_with_derivatives(&probe.to_density(), &params).unwrap();
            let cfi = classical_fi(&povm, &out, &drhos[0], DEFAULT_PROB_TOL).unwrap();
            let report = qfim(&probe, &params, &QfimOptions::default()).unwrap();
            let err = (cfi - report.qfim[0][0]).abs();
            assert!(
                err <= 1e-6,
                "{name} at eta={eta}: Schmidt CFI {cfi} vs QFI {}",
                report.qfim[0][0]
            );
            worst = worst.max(err);
        }
    }
    // On-off detection on every mode equals the Schmidt measurement for
    // the single-photon linear-optics probe (all occupations <= 1).
    let probe = build_probe(&ProbeSpec::single_photon(1.5), AncillaPolicy::OrthonormalMin)
        .unwrap();
    let all_modes: Vec<usize> = (0..probe.layout().mode_count()).collect();
    let onoff = on_off_povm(probe.layout(), &all_modes).unwrap();
    for &eta in &TEST_ETAS {
        let params = LossParams::etas(vec![eta]).unwrap();
        let (out, drhos) = apply_loss_with_derivatives(&probe.to_density(), &params).unwrap();
        let cfi = classical_fi(&onoff, &out, &drhos[0], DEFAULT_PROB_TOL).unwrap();
        let report = qfim(&probe, &params, &QfimOptions::default()).unwrap();
        assert!(
            (cfi - report.qfim[0][0]).abs() <= 1e-6,
            "on-off CFI {cfi} vs QFI {} at eta={eta}",
            report.qfim[0][0]
        );
    }
    // 20 TMSV copies at total energy 0.5: QFI and on-off CFI are both
    // additive over independent copies, so the 20-copy ratio equals the
    // single-copy ratio at per-copy energy 0.025 (additivity itself is
    // checked in the invariants suite at M = 2).
    let copies = 20.0f64;
    let per_copy = 0.5 / copies;
    let copy = build_probe(&ProbeSpec::tmsv(per_copy, 8), AncillaPolicy::OrthonormalMin)
        .unwrap();
    let eta = 0.1;
    let params = LossParams::etas(vec![eta]).unwrap();
    let copy_modes: Vec<usize> = (0..copy.layout().mode_count()).collect();
    let copy_onoff = on_off_povm(copy.layout(), &copy_modes).unwrap();
    let (out, drhos) = apply_loss_with_derivatives(&copy.to_density(), &params).unwrap();
    let cfi_copy = classical_fi(&copy_onoff, &out, &drhos[0], DEFAULT_PROB_TOL).unwrap();
    let qfi_copy = qfim(&copy, &params, &QfimOptions::default()).unwrap().qfim[0][0];
    let ratio = (copies * cfi_copy) / (copies * qfi_copy);
    assert!(
        ratio >= 0.99,
        "20-copy TMSV on-off CFI/QFI = {ratio} < 0.99 at eta={eta}"
    );
    println!(
        "criterion 4 PASS: Schmidt CFI attains QFI (worst gap {worst:.2e}); on-off optimal for the \
         single-photon probe; 20-copy TMSV on-off ratio {ratio:.5}"
    );
}

#[test]
fn criterion_5_coherent_comparison() {
    let (n, eta) = (1.0, 0.7);
    let coherent = build_probe(&ProbeSpec::coherent(n, 25), AncillaPolicy::None).unwrap();
    let params = LossParams::etas(vec![eta]).unwrap();
    let cs = qfim(&coherent, &params, &QfimOptions::default()).unwrap().qfim[0][0];
    assert!(
        (cs - n / eta).abs() <= 1e-6,
        "coherent QFI_eta {cs} vs N/eta {}",
        n / eta
    );
    // Same-energy NDS probe: advantage factor 1/(1-eta).
    let nds = build_probe(
        &ProbeSpec::nds_distribution(vec![0.0, 1.0]),
        AncillaPolicy::OrthonormalMin,
    )
    .unwrap();
    let nds_qfi = qfim(&nds, &params, &QfimOptions::default()).unwrap().qfim[0][0];
    let ratio = nds_qfi / cs;
    assert!(
        (ratio - 1.0 / (1.0 - eta)).abs() <= 1e-6,
        "NDS/coherent ratio {ratio} vs {}",
        1.0 / (1.0 - eta)
    );
    println!(
        "criterion 5 PASS: coherent QFI_eta = {cs:.9} (N/eta = {:.9}), NDS/coherent ratio {ratio:.9}",
        n / eta
    );
}

#[test]
fn criterion_6_ecb_exactness() {
    let start = Instant::now();
    // Closed form vs the two-point LP oracle on the stated grid.
    let etas: Vec<f64> = (0..10).map(|i| 0.05 + 0.1 * i as f64).collect();
    let energies = [0.3, 1.0, 1.5, 2.7, 5.0];
    let mut worst_gap = 0.0f64;
    for &eta in &etas {
        for &eta_p in &etas {
            for &n in &energies {
                let q = EcbQuery::new(eta, eta_p, n, 1).unwrap();
                let closed = min_fidelity_closed(n, mu(eta, eta_p));
                let (oracle, _) = min_fidelity_bruteforce(&q).unwrap();
                let gap = (closed - oracle).abs();
                assert!(gap <= 1e-9, "closed {closed} vs oracle {oracle} at ({eta},{eta_p},{n})");
                worst_gap = worst_gap.max(gap);
            }
        }
    }
    // End-to-end: optimal probe through both channels, Uhlmann fidelity
    // reproduces the closed form for M in {1, 2, 4}.
    let (eta, eta_p, n) = (0.9, 0.5, 1.5);
    let closed = min_fidelity_closed(n, mu(eta, eta_p));
    let mut worst_pipeline = 0.0f64;
    for &modes in &[1usize, 2, 4] {
        let q = EcbQuery::new(eta, eta_p, n, modes).unwrap();
        let probe = ecb_optimal_probe(&q).unwrap();
        let rho0 = probe.to_density();
        let k = probe.layout().element_count();
        let out_a = apply_loss(&rho0, &LossParams::etas(vec![eta; k]).unwrap()).unwrap();
        let out_b = apply_loss(&rho0, &LossParams::etas(vec![eta_p; k]).unwrap()).unwrap();
        let f = uhlmann_fidelity(&out_a, &out_b).unwrap();
        let gap = (f - closed).abs();
        assert!(
            gap <= 1e-9,
            "pipeline fidelity {f} vs closed form {closed} at M={modes}"
        );
        worst_pipeline = worst_pipeline.max(gap);
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}");
    println!(
        "criterion 6 PASS: oracle gap {worst_gap:.2e} on 10x10x5 grid, pipeline gap {worst_pipeline:.2e} for M in {{1,2,4}}, {elapsed:?}"
    );
}

#[test]
fn criterion_7_qcrb_attainment_in_simulation() {
    let start = Instant::now();
    let scenario = SimScenario {
        probe: ProbeSpec::single_photon(1.0),
        true_params: LossParams::etas(vec![0.5]).unwrap(),
        povm: PovmChoice::OnOff,
        shots: 10_000,
        trials: 200,
        seed: 31,
        estimator: Estimator::MleRefined,
        grid: GridSpec::default(),
    };
    let report = run_sim(&scenario).unwrap();
    let eff = report.efficiency[0];
    assert!(
        (0.9..=1.1).contains(&eff),
        "efficiency {eff} outside [0.9, 1.1]"
    );
    let crb = report.crb[0][0];
    let floor = (1.0 - 3.0 / (report.trials as f64).sqrt()) * crb;
    assert!(
        report.covariance[0][0] >= floor,
        "variance {} below (1 - 3/sqrt(T)) CRB = {floor}",
        report.covariance[0][0]
    );
    // Unbiasedness at this shot count: |bias| <= 3 std / sqrt(trials).
    let std = report.covariance[0][0].sqrt();
    let bias_band = 3.0 * std / (report.trials as f64).sqrt();
    assert!(
        report.bias[0].abs() <= bias_band,
        "bias {} exceeds band {bias_band}",
        report.bias[0]
    );
    assert_eq!(report.boundary_hits, 0);
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}");
    println!(
        "criterion 7 PASS: efficiency {eff:.4}, variance/CRB {:.4}, bias {:.2e}, {elapsed:?}",
        report.covariance[0][0] / crb,
        report.bias[0]
    );
}

#[test]
fn criterion_8_channel_correctness() {
    // Kraus completeness on the truncated space.
    let mut worst_complete = 0.0f64;
    for &eta in &[0.0, 0.3, 0.7, 1.0] {
        let ops = kraus_ops(eta, 12).unwrap();
        let mut sum = Array2::<C64>::zeros((13, 13));
        for a in &ops {
            let adag = a.t().mapv(|c| c.conj());
            sum += &adag.dot(a);
        }
        for i in 0..13 {
            for j in 0..13 {
                let expect = if i == j { 1.0 } else { 0.0 };
                worst_complete = worst_complete.max((sum[(i, j)] - C64::new(expect, 0.0)).norm());
            }
        }
    }
    assert!(worst_complete < 1e-10, "completeness residual {worst_complete}");
    // Semigroup composition.
    let probe = build_probe(
        &ProbeSpec::nds_distribution(vec![0.1, 0.2, 0.3, 0.4]),
        AncillaPolicy::OrthonormalMin,
    )
    .unwrap();
    let rho = probe.to_density();
    let mut worst_semigroup = 0.0f64;
    for &(e1, e2) in &[(0.8, 0.5), (0.9, 0.9), (0.3, 0.6)] {
        let step = apply_loss(
            &apply_loss(&rho, &LossParams::etas(vec![e1]).unwrap()).unwrap(),
            &LossParams::etas(vec![e2]).unwrap(),
        )
        .unwrap();
        let direct = apply_loss(&rho, &LossParams::etas(vec![e1 * e2]).unwrap()).unwrap();
        let gap = (step.matrix() - direct.matrix())
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        worst_semigroup = worst_semigroup.max(gap);
    }
    assert!(worst_semigroup < 1e-10, "semigroup residual {worst_semigroup}");
    // Purification consistency.
    let mut worst_purify = 0.0f64;
    for &eta in &[0.25, 0.8] {
        let params = LossParams::etas(vec![eta]).unwrap();
        let reduced = purified_evolve(&probe, &params).unwrap().reduced_density();
        let direct = apply_loss(&rho, &params).unwrap();
        let gap = (reduced.matrix() - direct.matrix())
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        worst_purify = worst_purify.max(gap);
    }
    assert!(worst_purify <= 1e-12, "purification residual {worst_purify}");
    // Coherent covariance |alpha> -> |sqrt(eta) alpha| at cutoff 30.
    let alpha_sq = 1.0;
    let eta = 0.49;
    let coherent = build_probe(&ProbeSpec::coherent(alpha_sq, 30), AncillaPolicy::None).unwrap();
    let out = apply_loss(&coherent.to_density(), &LossParams::etas(vec![eta]).unwrap())
        .unwrap();
    let target = build_probe(&ProbeSpec::coherent(eta * alpha_sq, 30), AncillaPolicy::None)
        .unwrap();
    let f = uhlmann_fidelity(&out, &target.to_density()).unwrap();
    assert!(f >= 1.0 - 1e-8, "coherent covariance fidelity {f}");
    println!(
        "criterion 8 PASS: completeness {worst_complete:.2e}, semigroup {worst_semigroup:.2e}, \
         purification {worst_purify:.2e}, coherent-covariance fidelity 1-{:.2e}",
        1.0 - f
    );
}

#[test]
fn mp_bound_matrix_values() {
    // Bound construction used by the criteria above.
    let b = mp_bound(&[1.0]);
    assert!((b[(0, 0)] - 4.0).abs() < 1e-15);
}
