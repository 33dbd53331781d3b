use irs_backscatter::baselines::{perfect_csi, proposed_estimate, SchemeKind};
use irs_backscatter::channel::ChannelRealization;
use irs_backscatter::estimator::{build_training_matrix, dft_training};
use irs_backscatter::experiments::{run_n_sweep, run_snr_sweep, ExperimentConfig, Omega2Rule, Omega2Size};
use irs_backscatter::linalg::CVector;
use irs_backscatter::rng::SeededRng;
use irs_backscatter::signal::LinkBudget;
use num_complex::Complex64;

fn config(trials: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig { trials, seed: 3, ..Default::default() };
    c.scenario.n_subsurfaces = 6;
    c
}

#[test]
fn estimated_csi_never_beats_perfect_csi_per_trial() {
    let c = config(60);
    let r = run_snr_sweep(&c).unwrap();
    for p in 0..r.points.len() {
        let perfect = &r.row("perfect_csi", p).unwrap().trial_snr_db;
        for scheme in r.schemes() {
            for (x, y) in r.row(&scheme, p).unwrap().trial_snr_db.iter().zip(perfect) {
                assert!(x <= &(y + 1e-9), "{scheme} at point {p}: {x} > {y}");
            }
        }
    }
}

#[test]
fn perfect_csi_mean_grows_with_subsurfaces() {
    let c = ExperimentConfig {
        schemes: vec![SchemeKind::PerfectCsi],
        n_values: vec![1, 2, 4, 8, 12, 16, 20],
        ..config(80)
    };
    let r = run_n_sweep(&c).unwrap();
    let means: Vec<f64> = r.rows.iter().map(|row| row.eff_snr_db_mean).collect();
    assert!(means.windows(2).all(|w| w[1] >= w[0]), "{means:?}");
}

#[test]
fn doubling_trials_moves_means_by_less_than_three_standard_errors() {
    let small = run_snr_sweep(&config(100)).unwrap();
    let large = run_snr_sweep(&config(200)).unwrap();
    for (a, b) in small.rows.iter().zip(&large.rows) {
        assert_eq!(a.scheme, b.scheme);
        let se = a.eff_snr_db_stderr.hypot(b.eff_snr_db_stderr).max(1e-12);
        assert!((a.eff_snr_db_mean - b.eff_snr_db_mean).abs() < 3.0 * se, "{a:?} vs {b:?}");
    }
}

/// With a cascaded gain per subsurface comparable to the direct link, the
/// perfect-to-proposed gap at a fixed reference SNR shrinks as `N` grows.
#[test]
fn gap_shrinks_with_subsurfaces_for_comparable_links() {
    let mut gaps = Vec::new();
    for n in [5usize, 10, 20] {
        let plan = dft_training(n + 1, n).unwrap();
        let matrix = build_training_matrix(&plan).unwrap();
        let mut rng = SeededRng::new(17);
        // unit direct link at 0 dB reference SNR
        let budget = LinkBudget::new(1.0, 1.0);
        let trials = 400;
        let mut gap = 0.0;
        for _ in 0..trials {
            let h_d = Complex64::from_polar(1.0, rng.uniform_phase());
            let h_c = CVector::from_fn(n, |_, _| Complex64::from_polar(0.3, rng.uniform_phase()));
            let ch = ChannelRealization::from_cascade(h_d, h_c).unwrap();
            let est = proposed_estimate(&plan, &matrix, &ch, 1.0, 1.0, &mut rng).unwrap();
            gap += budget.effective_snr_db(&perfect_csi(&ch).reflection, &ch).unwrap()
                - budget.effective_snr_db(&est.reflection, &ch).unwrap();
        }
        gaps.push(gap / trials as f64);
    }
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
}

#[test]
fn single_heldout_pilot_falls_behind_as_subsurfaces_grow() {
    let c = ExperimentConfig {
        schemes: vec![SchemeKind::Baseline3],
        omega2_sizes: vec![Omega2Size::Fixed(1), Omega2Size::Named(Omega2Rule::NPlusOne)],
        n_values: vec![2, 8],
        ..config(60)
    };
    let r = run_n_sweep(&c).unwrap();
    let gap =
        |p| r.row("baseline3[N+1]", p).unwrap().eff_snr_db_mean - r.row("baseline3[1]", p).unwrap().eff_snr_db_mean;
    assert!(gap(1) > gap(0), "gap N=2 {} N=8 {}", gap(0), gap(1));
    assert!(gap(1) > 0.0);
}
