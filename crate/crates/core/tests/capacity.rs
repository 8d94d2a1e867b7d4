mod common;

use common::{capacity_quadrature, frozen_capacity, gauss_hermite};
use rtgmi::capacity::{psk_capacity, rate_budget, rate_ladder, LadderOptions};
use rtgmi::numeric::exact_sum;
use rtgmi::FadingModel;

#[test]
fn gauss_hermite_integrates_moments() {
    let (x, w) = gauss_hermite(64);
    let pi = std::f64::consts::PI;
    let m0: f64 = w.iter().sum();
    let m2: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
    let m4: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(4)).sum();
    assert!((m0 - pi.sqrt()).abs() < 1e-13);
    assert!((m2 - pi.sqrt() / 2.0).abs() < 1e-13);
    assert!((m4 - 0.75 * pi.sqrt()).abs() < 1e-12);
}

#[test]
fn quadrature_oracle_matches_offline_values() {
    for j in [2, 4] {
        for rho in [0.1, 1.0, 10.0] {
            let q = capacity_quadrature(j, rho, 64);
            let f = frozen_capacity(j, rho);
            assert!(
                (q - f).abs() < 2e-4,
                "J={j} rho={rho}: quadrature {q} vs offline {f}"
            );
        }
    }
}

#[test]
fn bpsk_unit_snr_matches_quadrature() {
    let oracle = capacity_quadrature(2, 1.0, 64);
    let est = psk_capacity(2, 1.0, 1 << 22, 11).unwrap();
    assert!((est.nats - oracle).abs() < 1e-3, "{} vs {oracle}", est.nats);
}

#[test]
fn monte_carlo_and_quadrature_agree_within_three_standard_errors() {
    for j in [2, 4] {
        for rho in [0.1, 1.0, 10.0] {
            let oracle = capacity_quadrature(j, rho, 64);
            let est = psk_capacity(j, rho, 1 << 20, 5).unwrap();
            assert!(
                (est.raw_nats - oracle).abs() <= 3.0 * est.std_error,
                "J={j} rho={rho}: {} ± {} vs {oracle}",
                est.raw_nats,
                est.std_error
            );
        }
    }
}

#[test]
fn degenerate_inputs() {
    assert_eq!(psk_capacity(1, 5.0, 1000, 3).unwrap().nats, 0.0);
    let silent = psk_capacity(8, 0.0, 1000, 3).unwrap();
    assert_eq!(silent.nats, 0.0);
    assert!(!silent.clamped);
}

#[test]
fn capacity_is_bounded_and_monotone_in_rho() {
    for j in [2, 4, 8] {
        let ln_j = (j as f64).ln();
        let est: Vec<_> = common::FROZEN_RHO
            .iter()
            .map(|&r| psk_capacity(j, r, 1 << 17, 9).unwrap())
            .collect();
        for e in &est {
            assert!(e.nats >= 0.0 && e.nats <= ln_j);
        }
        for w in est.windows(2) {
            let slack = (w[0].ci_halfwidth.powi(2) + w[1].ci_halfwidth.powi(2)).sqrt();
            assert!(
                w[1].nats >= w[0].nats - slack,
                "J={j}: {} then {}",
                w[0].nats,
                w[1].nats
            );
        }
    }
}

#[test]
fn capacity_is_seed_deterministic() {
    assert_eq!(
        psk_capacity(4, 1.0, 50_000, 77).unwrap(),
        psk_capacity(4, 1.0, 50_000, 77).unwrap()
    );
}

#[test]
fn ladder_edge_cases() {
    let opts = LadderOptions {
        n_samples: 1 << 14,
        ..LadderOptions::default()
    };
    let l1 = rate_ladder(&FadingModel::ar1(0.99).unwrap(), 1, 1.0, 4, 16, &opts).unwrap();
    assert_eq!(l1.capacity, vec![0.0]);
    assert_eq!(l1.l_average, 0.0);
    let white = rate_ladder(&FadingModel::ar1(0.0).unwrap(), 8, 1.0, 4, 16, &opts).unwrap();
    assert!(white.capacity.iter().all(|&c| c == 0.0));
    assert!(white.rho.iter().all(|&r| r == 0.0));
}

#[test]
fn ladder_invariants_and_convergence() {
    let model = FadingModel::ar1(0.99).unwrap();
    let opts = LadderOptions {
        n_samples: 1 << 16,
        ..LadderOptions::default()
    };
    let ln4 = 4f64.ln();
    let mut prev: Option<(f64, f64)> = None;
    for depth in [8, 16, 32, 64] {
        let ladder = rate_ladder(&model, depth, 1.0, 4, 16, &opts).unwrap();
        assert_eq!(ladder.capacity.len(), depth);
        assert_eq!(
            ladder.l_average,
            exact_sum(ladder.capacity.iter().copied()) / depth as f64
        );
        assert_eq!(ladder.rt_estimate, ladder.l_average);
        assert!(ladder.capacity.iter().all(|&c| (0.0..=ln4).contains(&c)));
        for i in 1..depth {
            for j in 1..depth {
                if ladder.rho[i] <= ladder.rho[j] {
                    assert!(ladder.capacity[i] <= ladder.capacity[j]);
                }
            }
        }
        if let Some((avg, gap)) = prev {
            assert!(ladder.l_average >= avg, "L={depth}");
            assert!(ladder.convergence_gap <= gap, "L={depth}");
        }
        prev = Some((ladder.l_average, ladder.convergence_gap));
    }
}

#[test]
fn budget_examples() {
    let b = rate_budget(0.5, 0.5, 0.01, &[0.3; 10]).unwrap();
    assert!((b.fraction - 2.0 / 3.0).abs() < 1e-15);
    assert!(b.error_budgets.iter().all(|&e| (e - 0.001).abs() < 1e-18));
    assert!((b.rate_targets[0] - 0.2).abs() < 1e-15);
    assert_eq!(b.overall_target, 0.25);

    let ladder = rate_ladder(
        &FadingModel::ar1(0.99).unwrap(),
        16,
        1.0,
        4,
        16,
        &LadderOptions {
            n_samples: 1 << 14,
            ..LadderOptions::default()
        },
    )
    .unwrap();
    let full = rate_budget(ladder.rt_estimate, 0.2, 0.05, &ladder.capacity).unwrap();
    assert_eq!(full.total_error_budget(), 0.05);
    assert_eq!(full.error_budgets.len(), 16);
}
