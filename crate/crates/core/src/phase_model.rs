//! Slow-phase (Kuramoto-like) reduction of the full model.
//!
//! Each oscillator is described by one unwrapped phase `φ_i` that rotates at
//! roughly `−Ω_i`. The right-hand side contains the bare drift, the
//! radiation-force locking term, the first-order mechanical coupling and the
//! two second-order coupling terms.
//!
//! The mechanical coupling is the pair network of the full model: every pair
//! of distinct oscillators has stiffness `k = μ/N`, so
//! `ξ_ij = k·Ã_j / (m Ω_i Ã_i)` for `j ≠ i` and `ξ_ii = 0`. Because `ξ`
//! factorizes as `c_i·b_j` off the diagonal, all sums are evaluated in O(N)
//! through a handful of complex moments.
//!
//! Time is in seconds and frequencies in rad/s.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{integrate_system, IntegratorConfig, Method, OdeSystem};
use crate::model::{build_system, CouplingParams, ScaledState, SystemConfig, ValidatedSystem};

/// Parameters of the phase model for both arrays (2N oscillators, flat
/// index `σ·N + i`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseModelParams {
    /// Natural frequencies Ω_i (rad/s), length 2N.
    pub omega: Vec<f64>,
    /// Frequency of the locking force Ω̄ (rad/s).
    pub omega_bar: f64,
    /// Mechanical damping Γ (rad/s).
    pub gamma: f64,
    /// Radiation force amplitude F₀ (N).
    pub f0: f64,
    /// Limit-cycle amplitudes Ã_i (m), length 2N.
    pub amp: Vec<f64>,
    /// Force phase offsets φ̃_i (rad), length 2N.
    pub force_phase: Vec<f64>,
    pub mass: f64,
    /// Global spring scale μ (N/m).
    pub mu: f64,
    pub n_per_array: usize,
}

impl PhaseModelParams {
    pub fn validate(&self) -> Result<()> {
        let nn = 2 * self.n_per_array;
        if self.n_per_array == 0 {
            return Err(Error::Config("phase model needs at least one oscillator per array".into()));
        }
        for (name, v) in [("omega", &self.omega), ("amp", &self.amp), ("force_phase", &self.force_phase)] {
            if v.len() != nn {
                return Err(Error::Config(format!("{name} must have 2N = {nn} entries (got {})", v.len())));
            }
        }
        if !self.amp.iter().all(|a| a.is_finite() && *a > 0.0) {
            return Err(Error::Config("limit-cycle amplitudes must be positive".into()));
        }
        if !(self.gamma > 0.0 && self.mass > 0.0 && self.omega_bar > 0.0) {
            return Err(Error::Config("gamma, mass and omega_bar must be positive".into()));
        }
        if !(self.f0.is_finite() && self.mu.is_finite() && self.force_phase.iter().all(|p| p.is_finite())) {
            return Err(Error::Config("phase model parameters must be finite".into()));
        }
        if !self.omega.iter().all(|w| w.is_finite() && *w > 0.0) {
            return Err(Error::Config("natural frequencies must be positive".into()));
        }
        let k = self.k_drive();
        if !k.iter().all(|v| v.is_finite()) {
            return Err(Error::Config("drive constants K_i are not finite".into()));
        }
        Ok(())
    }

    /// Pair stiffness μ/N.
    pub fn pair_stiffness(&self) -> f64 {
        self.mu / self.n_per_array as f64
    }

    /// K_i = F₀ / (2 m Ω_i Ã_i).
    pub fn k_drive(&self) -> Vec<f64> {
        self.omega
            .iter()
            .zip(&self.amp)
            .map(|(w, a)| self.f0 / (2.0 * self.mass * w * a))
            .collect()
    }

    /// ξ_ij = k_ij Ã_j / (m Ω_i Ã_i) with k_ii = 0.
    pub fn xi(&self, i: usize, j: usize) -> f64 {
        if i == j {
            0.0
        } else {
            self.pair_stiffness() * self.amp[j] / (self.mass * self.omega[i] * self.amp[i])
        }
    }

    /// Build phase-model parameters for both arrays from a calibration of
    /// one array.
    pub fn from_calibration(system: &ValidatedSystem, cal: &Calibration) -> Result<Self> {
        let n = system.n_per_array();
        if cal.amp.len() != n || cal.force_phase.len() != n {
            return Err(Error::Config("calibration does not match the system size".into()));
        }
        let cfg = system.config();
        let twice = |v: &[f64]| v.iter().chain(v).copied().collect::<Vec<_>>();
        let p = Self {
            omega: twice(system.omega()),
            omega_bar: system.omega_bar(),
            gamma: cfg.mechanical.gamma,
            f0: cal.f0,
            amp: twice(&cal.amp),
            force_phase: twice(&cal.force_phase),
            mass: cfg.mechanical.mass,
            mu: cfg.coupling.mu,
            n_per_array: n,
        };
        p.validate()?;
        Ok(p)
    }
}

/// Unwrapped phases of all 2N oscillators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub phi: Vec<f64>,
}

/// Phase velocities for the state `state` at time `t`.
pub fn phase_rhs(t: f64, state: &PhaseState, params: &PhaseModelParams) -> Vec<f64> {
    let sys = PhaseSystem::new(params);
    let mut out = vec![0.0; state.phi.len()];
    sys.rhs(t, &state.phi, &mut out);
    out
}

/// Precomputed coefficients of the phase model; implements [`OdeSystem`].
#[derive(Debug, Clone)]
pub struct PhaseSystem {
    omega: Vec<f64>,
    omega_bar: f64,
    k: Vec<f64>,
    force_phase: Vec<f64>,
    /// ξ_ij = c_i b_j for j ≠ i.
    c: Vec<f64>,
    b: Vec<f64>,
    inv_4gamma: f64,
}

impl PhaseSystem {
    pub fn new(p: &PhaseModelParams) -> Self {
        let k = p.pair_stiffness();
        Self {
            omega: p.omega.clone(),
            omega_bar: p.omega_bar,
            k: p.k_drive(),
            force_phase: p.force_phase.clone(),
            c: p.omega
                .iter()
                .zip(&p.amp)
                .map(|(w, a)| k / (p.mass * w * a))
                .collect(),
            b: p.amp.clone(),
            inv_4gamma: 0.25 / p.gamma,
        }
    }
}

impl OdeSystem for PhaseSystem {
    fn dim(&self) -> usize {
        self.omega.len()
    }

    fn rhs(&self, t: f64, phi: &[f64], dphi: &mut [f64]) {
        let zero = Complex64::new(0.0, 0.0);
        // B = Σ b e^{iφ}, P = Σ b c e^{2iφ}, Q = Σ b² c e^{iφ}, R = Σ b c
        let (mut big_b, mut p, mut q, mut r) = (zero, zero, zero, 0.0);
        let phasors: Vec<Complex64> = phi.iter().map(|&f| Complex64::from_polar(1.0, f)).collect();
        for ((e, &b), &c) in phasors.iter().zip(&self.b).zip(&self.c) {
            big_b += b * e;
            p += b * c * e * e;
            q += b * b * c * e;
            r += b * c;
        }
        for i in 0..phi.len() {
            let (b, c, e) = (self.b[i], self.c[i], phasors[i]);
            let e_conj = e.conj();
            // sums restricted to j ≠ i
            let b_other = big_b - b * e;
            let drive = self.k[i] * (-self.omega_bar * t + self.force_phase[i] - phi[i]).sin();
            let first = 0.5 * c * (b_other * e_conj).re;
            // Σ_{k≠i, j≠i} ξ_ik ξ_ij sin(φ_k + φ_j − 2φ_i)
            let second_a = c * c * (b_other * b_other * e_conj * e_conj).im;
            // Σ_{k≠i} ξ_ik Σ_{j≠k} ξ_kj [sin(2φ_k − φ_j − φ_i) − sin(φ_j − φ_i)]
            let all_k = (e_conj * (p * big_b.conj() - q)).im - (e_conj * (r * big_b - q)).im;
            let self_k = -2.0 * b * c * (big_b * e_conj).im;
            let second_b = c * (all_k - self_k);
            dphi[i] = -self.omega[i] + drive + first + (second_a + second_b) * self.inv_4gamma;
        }
    }
}

/// Phases sampled on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTrajectory {
    /// Sample times (s).
    pub times: Vec<f64>,
    /// One row of 2N phases per sample.
    pub phases: Vec<Vec<f64>>,
}

/// Integrate the phase model with fixed-step RK4, storing every step.
pub fn integrate_phase_model(
    phi0: &PhaseState,
    params: &PhaseModelParams,
    t_end: f64,
    dt: f64,
) -> Result<PhaseTrajectory> {
    integrate_phase_model_sampled(phi0, params, t_end, dt, 1)
}

/// As [`integrate_phase_model`], storing every `sample_every`-th step.
pub fn integrate_phase_model_sampled(
    phi0: &PhaseState,
    params: &PhaseModelParams,
    t_end: f64,
    dt: f64,
    sample_every: usize,
) -> Result<PhaseTrajectory> {
    params.validate()?;
    if phi0.phi.len() != params.omega.len() {
        return Err(Error::Config("initial phase vector has the wrong length".into()));
    }
    let sys = PhaseSystem::new(params);
    let cfg = IntegratorConfig {
        method: Method::Rk4Fixed,
        dt,
        sample_every,
        t_end,
        ..IntegratorConfig::default()
    };
    let s = integrate_system(&sys, &phi0.phi, &cfg)?;
    Ok(PhaseTrajectory {
        phases: s.rows().map(|r| r.to_vec()).collect(),
        times: s.times,
    })
}

/// Single-oscillator limit-cycle properties of one array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// Limit-cycle amplitude Ã_i (m), per oscillator of an array.
    pub amp: Vec<f64>,
    /// Mean of `f0_each` (N).
    pub f0: f64,
    /// Fundamental radiation force amplitude of each isolated oscillator (N).
    pub f0_each: Vec<f64>,
    /// φ̃_i (rad).
    pub force_phase: Vec<f64>,
    /// Self-oscillation frequency of each isolated oscillator (rad/s).
    pub frequency: Vec<f64>,
    /// Fraction of the AC force power carried by the fundamental.
    pub harmonic_fraction: Vec<f64>,
}

impl Calibration {
    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("calibration serializes")
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Periods integrated from the end state of the settling run for the
/// Fourier fit.
const FIT_PERIODS: f64 = 64.0;
/// Harmonics included in the least-squares fit.
const FIT_HARMONICS: usize = 4;

/// Run every oscillator of one array in isolation (μ = 0, alone in its
/// cavity) to its limit cycle and extract Ã_i, F₀ and φ̃_i from the
/// fundamental Fourier components of x_i(t) and ħG|α(t)|².
///
/// `integrator_config.t_end` is the settling horizon (scaled time).
pub fn calibrate_amplitudes(system: &ValidatedSystem, integrator_config: &IntegratorConfig) -> Result<Calibration> {
    integrator_config.validate()?;
    let n = system.n_per_array();
    let mut cal = Calibration {
        amp: Vec::with_capacity(n),
        f0: 0.0,
        f0_each: Vec::with_capacity(n),
        force_phase: Vec::with_capacity(n),
        frequency: Vec::with_capacity(n),
        harmonic_fraction: Vec::with_capacity(n),
    };
    for (i, &w) in system.omega().iter().enumerate() {
        let single = isolated_oscillator(system.config(), w)?;
        let lc = single_limit_cycle(&single, integrator_config)
            .map_err(|e| Error::Calibration(format!("oscillator {i}: {e}")))?;
        cal.amp.push(lc.amp);
        cal.f0_each.push(lc.f0);
        cal.force_phase.push(lc.force_phase);
        cal.frequency.push(lc.frequency);
        cal.harmonic_fraction.push(lc.harmonic_fraction);
    }
    cal.f0 = cal.f0_each.iter().sum::<f64>() / n as f64;
    Ok(cal)
}

fn isolated_oscillator(base: &SystemConfig, omega: f64) -> Result<ValidatedSystem> {
    let mut c = base.clone();
    c.mechanical.omega = vec![omega];
    c.coupling = CouplingParams { mu: 0.0, n_per_array: 1 };
    build_system(c)
}

struct LimitCycle {
    amp: f64,
    f0: f64,
    force_phase: f64,
    frequency: f64,
    harmonic_fraction: f64,
}

fn single_limit_cycle(sys: &ValidatedSystem, settle: &IntegratorConfig) -> Result<LimitCycle> {
    let mut y = ScaledState::zeros(1);
    // start near the expected orbit size so the settling run is short
    y.x_mut()[0] = 0.5;
    y.x_mut()[1] = 0.5;
    let a = crate::model::optical_steady_state(y.x(), sys);
    y.set_alpha(0, a[0]);
    y.set_alpha(1, a[1]);
    let settle_cfg = IntegratorConfig {
        method: settle.method,
        sample_every: settle.n_steps().max(1),
        ..settle.clone()
    };
    let s = integrate_system(sys, y.as_slice(), &settle_cfg)?;
    let fit_cfg = IntegratorConfig {
        method: Method::Rk4Fixed,
        sample_every: 1,
        t_end: FIT_PERIODS * std::f64::consts::TAU,
        ..settle.clone()
    };
    let s = integrate_system(sys, s.last(), &fit_cfg)?;
    let x: Vec<f64> = s.rows().map(|r| r[0]).collect();
    let force: Vec<f64> = s.rows().map(|r| r[4] * r[4] + r[5] * r[5]).collect();

    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let rms = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / x.len() as f64).sqrt();
    // scaled lengths are in units of κ/|G|; a limit cycle is O(1e-2) or larger
    if !(rms > 1e-6) {
        return Err(Error::Calibration("no self-sustained oscillation developed".into()));
    }
    let half = x.len() / 2;
    let part_rms = |v: &[f64]| (v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / v.len() as f64).sqrt();
    let decay = part_rms(&x[half..]) / part_rms(&x[..half]);
    if decay < 0.99 {
        return Err(Error::Calibration(format!(
            "oscillation is decaying (rms ratio {decay:.4} across the fit window)"
        )));
    }
    let w = crossing_frequency(&s.times, &x, mean)
        .ok_or_else(|| Error::Calibration("could not determine the oscillation frequency".into()))?;
    let xf = fundamental(&s.times, &x, w)?;
    let ff = fundamental(&s.times, &force, w)?;
    let f_mean = force.iter().sum::<f64>() / force.len() as f64;
    let f_var = force.iter().map(|v| (v - f_mean).powi(2)).sum::<f64>() / force.len() as f64;

    let sc = sys.scales();
    let cfg = sys.config();
    // scaled |α|² → force in N
    let force_unit = cfg.constants.hbar * cfg.optical.g_coupling * sc.field * sc.field;
    // x ≈ Re(X e^{iωt}) = Ã cos(ωt + a), F ≈ Re(F1 e^{iωt}) = F₀ sin(ωt + a + c);
    // the locking term of the phase model uses φ̃ = π − c.
    let c = ff.arg() + std::f64::consts::FRAC_PI_2 - xf.arg();
    let force_phase = wrap(std::f64::consts::PI - c);
    Ok(LimitCycle {
        amp: xf.norm() * sc.length,
        f0: ff.norm() * force_unit.abs(),
        force_phase,
        frequency: w * sys.omega_bar(),
        harmonic_fraction: if f_var > 0.0 { 0.5 * ff.norm_sqr() / f_var } else { 0.0 },
    })
}

/// Wrap an angle to (−π, π].
pub(crate) fn wrap(a: f64) -> f64 {
    let t = std::f64::consts::TAU;
    let r = a.rem_euclid(t);
    if r > std::f64::consts::PI {
        r - t
    } else {
        r
    }
}

/// Mean angular frequency from upward crossings of `level`.
fn crossing_frequency(t: &[f64], x: &[f64], level: f64) -> Option<f64> {
    let mut first = None;
    let mut last = 0.0;
    let mut count = 0usize;
    for k in 1..x.len() {
        if x[k - 1] < level && x[k] >= level {
            let f = (level - x[k - 1]) / (x[k] - x[k - 1]);
            let tc = t[k - 1] + f * (t[k] - t[k - 1]);
            if first.is_none() {
                first = Some(tc);
            } else {
                count += 1;
            }
            last = tc;
        }
    }
    let first = first?;
    (count >= 2).then(|| std::f64::consts::TAU * count as f64 / (last - first))
}

/// Complex amplitude of the fundamental at angular frequency `w` from a
/// least-squares fit with a constant and the first few harmonics.
fn fundamental(t: &[f64], y: &[f64], w: f64) -> Result<Complex64> {
    use nalgebra::{DMatrix, DVector};
    let cols = 1 + 2 * FIT_HARMONICS;
    let a = DMatrix::from_fn(t.len(), cols, |r, c| {
        if c == 0 {
            1.0
        } else {
            let h = ((c + 1) / 2) as f64;
            if c % 2 == 1 {
                (h * w * t[r]).cos()
            } else {
                (h * w * t[r]).sin()
            }
        }
    });
    let b = DVector::from_column_slice(y);
    let ata = a.transpose() * &a;
    let atb = a.transpose() * b;
    let sol = ata
        .lu()
        .solve(&atb)
        .ok_or_else(|| Error::Calibration("singular Fourier fit".into()))?;
    // a cos + b sin = Re((a − i b) e^{iωt})
    Ok(Complex64::new(sol[1], -sol[2]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn params(n: usize, mu: f64, f0: f64) -> PhaseModelParams {
        let w0 = 1.0e6;
        PhaseModelParams {
            omega: (0..2 * n).map(|k| w0 * (1.0 + 0.01 * (k % n) as f64)).collect(),
            omega_bar: w0,
            gamma: 1.0e3,
            f0,
            amp: vec![1.0e-9; 2 * n],
            force_phase: vec![0.0; 2 * n],
            mass: 1.0e-12,
            mu,
            n_per_array: n,
        }
    }

    #[test]
    fn bare_drift_without_drive_or_coupling() {
        let p = params(3, 0.0, 0.0);
        let phi = PhaseState { phi: vec![0.3, -1.0, 2.0, 0.1, 5.0, -3.0] };
        let d = phase_rhs(0.7, &phi, &p);
        for (v, w) in d.iter().zip(&p.omega) {
            assert_eq!(*v, -w);
        }
    }

    #[test]
    fn equal_phases_give_half_xi_per_partner() {
        // one oscillator per array: each sees ξ/2 from its partner
        let mut p = params(1, 2.0e-3, 0.0);
        p.omega = vec![1.0e6; 2];
        let phi = PhaseState { phi: vec![0.4, 0.4] };
        let d = phase_rhs(0.0, &phi, &p);
        let xi = p.xi(0, 1);
        for v in d {
            assert_relative_eq!(v, -1.0e6 + 0.5 * xi, max_relative = 1e-14);
        }
    }

    #[test]
    fn locked_phase_rotates_with_drive() {
        let mut p = params(1, 0.0, 0.0);
        p.omega = vec![p.omega_bar; 2];
        p.f0 = 2.0 * p.mass * p.omega_bar * p.amp[0] * 5.0e3; // K = 5e3
        let traj = integrate_phase_model(&PhaseState { phi: vec![1.0, -2.0] }, &p, 0.01, 1.0e-5).unwrap();
        let n = traj.times.len();
        let slope = (traj.phases[n - 1][0] - traj.phases[n - 2][0]) / (traj.times[n - 1] - traj.times[n - 2]);
        assert_relative_eq!(slope, -p.omega_bar, max_relative = 1e-9);
    }

    #[test]
    fn wrap_is_in_range() {
        for a in [-7.0, -PI, 0.0, PI, 3.5, 100.0] {
            let w = wrap(a);
            assert!(w > -PI && w <= PI);
            assert_relative_eq!((a - w).rem_euclid(2.0 * PI).min(2.0 * PI - (a - w).rem_euclid(2.0 * PI)), 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn fundamental_fit_recovers_tone() {
        let w = 1.3;
        let t: Vec<f64> = (0..2000).map(|k| k as f64 * 0.05).collect();
        let y: Vec<f64> = t.iter().map(|t| 0.2 + 1.5 * (w * t + 0.4).cos() + 0.3 * (2.0 * w * t).sin()).collect();
        let f = fundamental(&t, &y, w).unwrap();
        assert_relative_eq!(f.norm(), 1.5, max_relative = 1e-9);
        assert_relative_eq!(f.arg(), 0.4, max_relative = 1e-9);
    }

    #[test]
    fn validation_rejects_bad_amplitudes() {
        let mut p = params(2, 0.0, 1.0);
        p.amp[1] = 0.0;
        assert!(p.validate().is_err());
        let mut p = params(2, 0.0, 1.0);
        p.omega.pop();
        assert!(p.validate().is_err());
    }
}
