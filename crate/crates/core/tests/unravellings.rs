use proptest::prelude::*;

use unravel::ensemble::{run_ensemble, EnsembleConfig};
use unravel::state::{gaussian_packet, inner, make_grid, moments, normalize, NormPolicy, PhysicalParams};
use unravel::unravel::{
    apply_jump, diffusive_increment, run_trajectory, step_deterministic, Method, StepConfig,
};

fn grid() -> std::sync::Arc<unravel::state::SpatialGrid> {
    make_grid(256, -16.0, 16.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn jumps_are_orthogonal(
        cx in -4.0..4.0f64, cp in -2.0..2.0f64, s2 in 0.3..2.0f64, chirp in -2.0..2.0f64,
        shrink in 0.2..1.0f64,
    ) {
        let g = grid();
        let psi = gaussian_packet(&g, cx, cp, s2, chirp).unwrap();
        // jumps act on the decayed, unnormalized state
        let phi = psi.scaled(num_complex::Complex64::new(shrink.sqrt(), 0.0));
        let post = apply_jump(&phi).unwrap();
        let pre = normalize(&phi).unwrap();
        prop_assert!(inner(&post, &pre).unwrap().norm() < 1e-8);
        prop_assert!((post.squared_norm() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn jump_free_norm_decay_law() {
    // -d ln‖Φ‖²/dt = 2λσ² with σ² of the normalized state
    let g = grid();
    let p = PhysicalParams::unit();
    let dt = 1e-3;
    let mut phi = gaussian_packet(&g, 0.5, 0.3, 0.8, -0.5).unwrap();
    for _ in 0..200 {
        let s2 = moments(&phi, NormPolicy::Renormalize).unwrap().var_x;
        let next = step_deterministic(&phi, dt, &p).unwrap();
        let s2_next = moments(&next, NormPolicy::Renormalize).unwrap().var_x;
        let rate = -(next.squared_norm() / phi.squared_norm()).ln() / dt;
        let want = 2.0 * p.decoherence() * 0.5 * (s2 + s2_next);
        assert!((rate - want).abs() < 1e-4 * want, "{rate} vs {want}");
        phi = next;
    }
}

#[test]
fn diffusive_norm_is_a_martingale() {
    // E‖ψ'‖² = 1 exactly; three-point Gauss–Hermite leaves an O(dt³) error
    let g = grid();
    let p = PhysicalParams::unit();
    let psi = gaussian_packet(&g, 0.0, 0.0, 0.7, -1.0).unwrap();
    let drift = |dt: f64| {
        let a = (3.0 * dt).sqrt();
        let w = [(-a, 1.0 / 6.0), (0.0, 2.0 / 3.0), (a, 1.0 / 6.0)];
        w.iter()
            .map(|&(dw, wt)| wt * diffusive_increment(&psi, dt, dw, &p).unwrap().squared_norm())
            .sum::<f64>()
            - 1.0
    };
    let (d1, d2) = (drift(2e-3), drift(1e-3));
    assert!(d2.abs() < 1e-8, "{d2}");
    let order = (d1 / d2).abs().log2();
    assert!((order - 3.0).abs() < 0.3, "order {order}");
}

#[test]
fn trajectories_are_reproducible_by_index() {
    let g = grid();
    let p = PhysicalParams::unit();
    let psi = gaussian_packet(&g, 0.0, 0.0, 0.7, -1.0).unwrap();
    let cfg = StepConfig::new(1e-3, 0.5, vec![0.0, 0.25, 0.5], 3).unwrap();
    for m in [Method::Diffusive, Method::Orthojump] {
        let a = run_trajectory(m, &psi, &cfg, &p, 4).unwrap();
        let b = run_trajectory(m, &psi, &cfg, &p, 4).unwrap();
        let c = run_trajectory(m, &psi, &cfg, &p, 5).unwrap();
        assert_eq!(a.mean_x_series, b.mean_x_series);
        assert_eq!(a.jump_times, b.jump_times);
        assert_eq!(a.snapshots[2].amplitudes(), b.snapshots[2].amplitudes());
        if m == Method::Diffusive {
            assert_ne!(a.mean_x_series, c.mean_x_series);
        }
        assert_eq!(a.times, vec![0.0, 0.25, 0.5]);
        for s in &a.snapshots {
            assert!(s.is_normalized());
        }
    }
}

#[test]
fn orthojump_records_jump_times_on_the_lattice() {
    let g = grid();
    let p = PhysicalParams::unit();
    let psi = gaussian_packet(&g, 0.0, 0.0, 0.7, -1.0).unwrap();
    let cfg = StepConfig::new(1e-3, 3.0, vec![3.0], 11).unwrap();
    let mut total = 0;
    for i in 0..20 {
        let r = run_trajectory(Method::Orthojump, &psi, &cfg, &p, i).unwrap();
        for w in r.jump_times.windows(2) {
            assert!(w[0] < w[1]);
        }
        for &t in &r.jump_times {
            assert!(((t / cfg.dt).round() * cfg.dt - t).abs() < 1e-9 && t > 0.0 && t <= 3.0);
        }
        total += r.n_jumps();
    }
    assert!(total > 0);
}

#[test]
fn energy_grows_at_the_momentum_diffusion_rate() {
    let g = grid();
    let p = PhysicalParams::unit();
    let psi = gaussian_packet(&g, 0.0, 0.0, 0.5f64.sqrt(), -1.0).unwrap();
    let rate = p.momentum_diffusion();
    for m in [Method::Diffusive, Method::Orthojump] {
        let step = StepConfig::new(1e-3, 1.0, vec![0.0, 1.0], 21).unwrap();
        let mut cfg = EnsembleConfig::new(2000, m, step);
        cfg.batch_sizes = vec![2000];
        let r = run_ensemble(&psi, &cfg, &p).unwrap();
        let growth = r.rho_mc[1].second_moment_p() - r.rho_mc[0].second_moment_p();
        assert!((growth - rate).abs() < 0.05 * rate, "{m}: {growth}");
    }
}
