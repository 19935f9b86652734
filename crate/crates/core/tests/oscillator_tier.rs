use qwalk_core::cv::{self, ModelParams};
use qwalk_core::decoherence::{self, DephasingRate};
use qwalk_core::readout::{readout_values, Protocol, ProtocolConfig, Tier};
use qwalk_core::{CoinVector, QwalkError};

#[test]
fn decohered_circle_tiers_agree() {
    let params = ModelParams::default();
    let budget = 3.0 * (-18.0f64).exp() + 1e-6;
    for p in [0.1, 0.3, 0.5] {
        let rate = DephasingRate::new(p).unwrap();
        for steps in [1, 4, 7] {
            let rho = decoherence::evolve_cv_circle_density(
                steps,
                3.0,
                CoinVector::DOWN,
                rate,
                &params,
                |_, _| Ok(()),
            )
            .unwrap();
            let cv = decoherence::cv_circle_site_distribution(&rho, 3.0, &params).unwrap();
            let ideal = decoherence::run_ring_decohered(steps, CoinVector::DOWN, rate).unwrap();
            for k in 0..4 {
                assert!(
                    (cv.get(k) - ideal.get(k)).abs() <= budget,
                    "p={p} N={steps} site={k}"
                );
            }
        }
    }
}

#[test]
fn binned_cv_line_converges_with_fock_dim() {
    let state = |d: usize| {
        let params = ModelParams::with_fock_dim(d);
        cv::position_distribution(
            &cv::run_cv_line(4, CoinVector::symmetric(), &params).unwrap(),
            &params,
        )
    };
    let (small, medium, large) = (state(64), state(128), state(192));
    let coarse = small.l1_distance(&large);
    let fine = medium.l1_distance(&large);
    assert!(fine <= coarse + 1e-12, "{fine} vs {coarse}");
    assert!(fine < 1e-8);
}

#[test]
fn readout_is_stable_under_truncation() {
    let config = |d: usize| ProtocolConfig {
        steps: 5,
        tier: Tier::Cv,
        params: ModelParams::with_fock_dim(d),
        ..ProtocolConfig::default()
    };
    for protocol in [Protocol::Line, Protocol::Circle] {
        let a = readout_values(protocol, &config(96)).unwrap();
        let b = readout_values(protocol, &config(160)).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-8, "{protocol:?}: {a:?} vs {b:?}");
        }
    }
}

#[test]
fn too_small_fock_space_is_reported() {
    let params = ModelParams::with_fock_dim(16);
    match cv::run_cv_line(8, CoinVector::symmetric(), &params) {
        Err(QwalkError::Truncation { fock_dim, .. }) => assert_eq!(fock_dim, 16),
        Err(QwalkError::Compilation { .. }) => {}
        other => panic!("expected a truncation failure, got {other:?}"),
    }
}
