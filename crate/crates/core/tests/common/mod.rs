//! Brute-force reference implementations shared by the test targets.
#![allow(dead_code)]

use chimera_core::phase_model::PhaseModelParams;
use num_complex::Complex64;

/// Phase velocities by direct summation over every pair and triple.
pub fn phase_rhs_direct(t: f64, phi: &[f64], p: &PhaseModelParams) -> Vec<f64> {
    let nn = phi.len();
    let k = p.mu / p.n_per_array as f64;
    let xi = |i: usize, j: usize| {
        if i == j {
            0.0
        } else {
            k * p.amp[j] / (p.mass * p.omega[i] * p.amp[i])
        }
    };
    (0..nn)
        .map(|i| {
            let ki = p.f0 / (2.0 * p.mass * p.omega[i] * p.amp[i]);
            let mut v = -p.omega[i] + ki * (-p.omega_bar * t + p.force_phase[i] - phi[i]).sin();
            for j in 0..nn {
                v += 0.5 * xi(i, j) * (phi[j] - phi[i]).cos();
            }
            let mut second = 0.0;
            for kk in 0..nn {
                for j in 0..nn {
                    second += xi(i, kk) * xi(i, j) * (phi[kk] + phi[j] - 2.0 * phi[i]).sin();
                    second += xi(i, kk) * xi(kk, j) * ((2.0 * phi[kk] - phi[j] - phi[i]).sin() - (phi[j] - phi[i]).sin());
                }
            }
            v + second / (4.0 * p.gamma)
        })
        .collect()
}

/// Spring force on each oscillator from every other one, pair by pair.
pub fn coupling_force_direct(x: &[f64], mu: f64, n_per_array: usize) -> Vec<f64> {
    let k = mu / n_per_array as f64;
    (0..x.len())
        .map(|i| (0..x.len()).filter(|&j| j != i).map(|j| -k * (x[i] - x[j])).sum())
        .collect()
}

/// (ρ, Ψ) from the mean unit phasor.
pub fn order_parameter_direct(phases: &[f64]) -> (f64, f64) {
    let z: Complex64 = phases.iter().map(|&p| Complex64::from_polar(1.0, p)).sum::<Complex64>() / phases.len() as f64;
    (z.norm(), z.arg())
}
