use std::f64::consts::{PI, TAU};

use approx::assert_relative_eq;
use chimera_core::analysis::{order_parameter, psd};
use chimera_core::continuum::{oa_rhs_complex, phase_velocity_field, OAParams};
use chimera_core::model::coupling_force;
use chimera_core::phase_model::{phase_rhs, PhaseModelParams, PhaseState};
use num_complex::Complex64;
use proptest::prelude::*;

mod common;
use common::{coupling_force_direct, order_parameter_direct, phase_rhs_direct};

const W: f64 = 2.0 * PI * 133.0e6;
const G: f64 = W / 1000.0;
const M: f64 = 70.0e-15;

fn params(n: usize, omega: Vec<f64>, amp: Vec<f64>, force_phase: Vec<f64>, mu: f64) -> PhaseModelParams {
    PhaseModelParams {
        omega,
        omega_bar: W,
        gamma: G,
        f0: 3.0e-12,
        amp,
        force_phase,
        mass: M,
        mu,
        n_per_array: n,
    }
}

#[test]
fn phase_rhs_matches_triple_sum() {
    let n = 4;
    let omega: Vec<f64> = (0..2 * n).map(|k| W + (k as f64 - 3.5) * 0.7 * G).collect();
    let amp: Vec<f64> = (0..2 * n).map(|k| 1e-9 * (1.0 + 0.1 * k as f64)).collect();
    let fp: Vec<f64> = (0..2 * n).map(|k| -0.3 - 0.05 * k as f64).collect();
    let mu = 2e-3 * M * W * W;
    let p = params(n, omega, amp, fp, mu);
    let phi: Vec<f64> = (0..2 * n).map(|k| 0.9 * k as f64 - 1.1).collect();
    let t = 3.7e-7;
    let got = phase_rhs(t, &PhaseState { phi: phi.clone() }, &p);
    let want = phase_rhs_direct(t, &phi, &p);
    for (g, w) in got.iter().zip(&want) {
        // values are ~Ω̄; compare relative to that scale
        assert!((g - w).abs() <= 1e-12 * W, "{g} vs {w}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn phase_rhs_matches_triple_sum_everywhere(
        n in 1usize..5,
        seed_phi in prop::collection::vec(-10.0f64..10.0, 8),
        dw in prop::collection::vec(-5.0f64..5.0, 8),
        da in prop::collection::vec(0.5f64..2.0, 8),
        mu_rel in 0.0f64..5e-3,
        t in 0.0f64..1e-6,
    ) {
        let nn = 2 * n;
        let omega: Vec<f64> = dw[..nn].iter().map(|d| W + d * G).collect();
        let amp: Vec<f64> = da[..nn].iter().map(|a| a * 1e-9).collect();
        let fp = vec![-0.4; nn];
        let p = params(n, omega, amp, fp, mu_rel * M * W * W);
        let phi = seed_phi[..nn].to_vec();
        let got = phase_rhs(t, &PhaseState { phi: phi.clone() }, &p);
        let want = phase_rhs_direct(t, &phi, &p);
        for (g, w) in got.iter().zip(&want) {
            prop_assert!((g - w).abs() <= 1e-12 * W);
        }
    }

    #[test]
    fn coupling_force_matches_pair_sum(x in prop::collection::vec(-1e-8f64..1e-8, 2..12), mu in 0.0f64..10.0) {
        let x = if x.len() % 2 == 1 { x[1..].to_vec() } else { x };
        let n = x.len() / 2;
        let f = coupling_force(&x, mu, n);
        let k = mu / n as f64;
        let direct = coupling_force_direct(&x, mu, n);
        for i in 0..x.len() {
            let want = direct[i];
            let scale = k * x.iter().map(|v| v.abs()).sum::<f64>() * 2.0 + f64::MIN_POSITIVE;
            prop_assert!((f[i] - want).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn order_parameter_matches_direct_mean(ph in prop::collection::vec(-20.0f64..20.0, 1..64)) {
        let (r0, p0) = order_parameter_direct(&ph);
        let (rho, psi) = order_parameter(&ph);
        prop_assert!((rho - r0).abs() < 1e-12);
        if r0 > 1e-6 {
            prop_assert!((Complex64::from_polar(1.0, psi) - Complex64::from_polar(1.0, p0)).norm() < 1e-9);
        }
    }

    #[test]
    fn order_parameter_magnitude_is_shift_invariant(ph in prop::collection::vec(-20.0f64..20.0, 1..64), shift in -50.0f64..50.0) {
        let moved: Vec<f64> = ph.iter().map(|p| p + shift).collect();
        let (a, pa) = order_parameter(&ph);
        let (b, pb) = order_parameter(&moved);
        prop_assert!((a - b).abs() < 1e-12);
        if a > 1e-6 {
            let d = Complex64::from_polar(1.0, pb - pa - shift);
            prop_assert!((d - Complex64::new(1.0, 0.0)).norm() < 1e-8);
        }
    }

    #[test]
    fn welch_power_equals_variance_of_bin_centred_tones(
        amps in prop::collection::vec(0.1f64..3.0, 1..4),
        bins in prop::collection::vec(8usize..200, 3),
        phases in prop::collection::vec(0.0f64..TAU, 3),
    ) {
        let n = 1024;
        let dt = 1e-3;
        let x: Vec<f64> = (0..n)
            .map(|k| {
                amps.iter().enumerate().map(|(q, a)| {
                    let w = TAU * bins[q] as f64 / (n as f64 * dt);
                    a * (w * k as f64 * dt + phases[q]).cos()
                }).sum()
            })
            .collect();
        let mean = x.iter().sum::<f64>() / n as f64;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let s = psd(&[&x], dt, None).unwrap();
        // The periodic Hann window weights the samples; for tones on distinct
        // bins the weighted and plain variances coincide.
        let mut distinct = bins[..amps.len()].to_vec();
        distinct.sort();
        distinct.dedup();
        prop_assume!(distinct.len() == amps.len() && distinct.windows(2).all(|w| w[1] - w[0] > 2));
        prop_assert!((s.total_power(0) - var).abs() <= 1e-9 * var);
    }
}

fn oa(eps: f64, mu_rel: f64, k: f64) -> OAParams {
    let mut p = OAParams::new(eps, G, mu_rel * M * W * W, M, W);
    p.k_drive = k;
    p.drive_phase = [0.2, -0.5];
    p
}

fn z_strategy() -> impl Strategy<Value = [Complex64; 2]> {
    (0.0f64..1.0, -PI..PI, 0.0f64..1.0, -PI..PI)
        .prop_map(|(r1, p1, r2, p2)| [Complex64::from_polar(r1, p1), Complex64::from_polar(r2, p2)])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn oa_flow_does_not_leave_the_unit_disk(p1 in -PI..PI, z2 in z_strategy(), eps in 0.0f64..0.5, mu in 0.0f64..4.1e-3, k in 0.0f64..1.0) {
        let p = oa(eps * G, mu, k * G);
        let z = [Complex64::from_polar(1.0, p1), z2[1]];
        let dz = oa_rhs_complex(z, &p)[0];
        // d|Z|²/dt = 2 Re(Z̄ Ż) at |Z| = 1 equals −2ε
        let radial = (z[0].conj() * dz).re;
        prop_assert!((radial + p.epsilon).abs() <= 1e-9 * (G + p.epsilon));
    }

    #[test]
    fn oa_flow_is_exchange_symmetric(z in z_strategy(), eps in 0.0f64..0.5, mu in 0.0f64..4.1e-3, k in 0.0f64..1.0) {
        let mut p = oa(eps * G, mu, k * G);
        let a = oa_rhs_complex(z, &p);
        p.drive_phase = [p.drive_phase[1], p.drive_phase[0]];
        let b = oa_rhs_complex([z[1], z[0]], &p);
        prop_assert!((a[0] - b[1]).norm() <= 1e-9 * G);
        prop_assert!((a[1] - b[0]).norm() <= 1e-9 * G);
    }

    #[test]
    fn oa_flow_is_moment_of_the_velocity_field(z in z_strategy(), mu in 0.0f64..4.1e-3, k in 0.0f64..1.0) {
        // Identical oscillators: Ż_σ = ∫ i v(θ) e^{iθ} f_σ(θ) dθ with f_σ the
        // Poisson kernel of first moment Z_σ.
        let p = oa(0.0, mu, k * G);
        let dz = oa_rhs_complex(z, &p);
        let nq = 4096;
        for s in 0..2 {
            let zs = z[s];
            prop_assume!(zs.norm() < 0.95);
            let mut acc = Complex64::new(0.0, 0.0);
            for q in 0..nq {
                let th = TAU * q as f64 / nq as f64;
                let e = Complex64::from_polar(1.0, th);
                let f = (1.0 - zs.norm_sqr()) / (TAU * (e - zs).norm_sqr());
                let v = phase_velocity_field(s, th, W, z, &p);
                acc += Complex64::i() * v * e * f;
            }
            acc *= TAU / nq as f64;
            prop_assert!((acc - dz[s]).norm() <= 1e-9 * G, "{acc} vs {}", dz[s]);
        }
    }
}

#[test]
fn order_parameter_handles_uniform_spread() {
    let ph: Vec<f64> = (0..12).map(|k| TAU * k as f64 / 12.0).collect();
    assert!(order_parameter(&ph).0 < 1e-14);
    assert_relative_eq!(order_parameter(&[1.0]).0, 1.0, epsilon = 1e-15);
}
