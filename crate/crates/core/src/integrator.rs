//! Deterministic time integration: classical RK4, a Dormand–Prince 5(4)
//! embedded pair with step-size control, and forward Euler for debugging.
//!
//! Every method samples on the same uniform output grid
//! `t_k = k · dt · sample_every`, so spectra can be taken from adaptive runs
//! as well.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FullState, ScaledState, ValidatedSystem};

/// A first-order autonomous or non-autonomous ODE on a flat real vector.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]);
}

impl<S: OdeSystem + ?Sized> OdeSystem for &S {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        (**self).rhs(t, y, dy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Rk4Fixed,
    AdaptiveEmbedded,
    /// Forward Euler; only meant for convergence diagnostics.
    EulerDebug,
}

/// Integration settings. `dt` and `t_end` are in scaled time units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub method: Method,
    pub dt: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub sample_every: usize,
    pub t_end: f64,
}

/// Steps per mean mechanical period used by [`IntegratorConfig::default`].
pub const STEPS_PER_PERIOD: f64 = 40.0;

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            method: Method::Rk4Fixed,
            dt: std::f64::consts::TAU / STEPS_PER_PERIOD,
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            sample_every: 4,
            t_end: 2000.0 * std::f64::consts::TAU,
        }
    }
}

impl IntegratorConfig {
    /// Default settings with a horizon of `periods` mean mechanical periods.
    pub fn for_periods(periods: f64) -> Self {
        Self {
            t_end: periods * std::f64::consts::TAU,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive (got {})", self.dt)));
        }
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if self.sample_every == 0 {
            return Err(Error::Config("sample_every must be at least 1".into()));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(Error::Config("t_end must be finite and non-negative".into()));
        }
        Ok(())
    }

    /// Number of base steps of length `dt` covering `t_end`.
    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt + 1e-9).floor() as usize
    }

    /// Scaled time between stored samples.
    pub fn sample_interval(&self) -> f64 {
        self.dt * self.sample_every as f64
    }
}

/// Scratch buffers for the fixed-step methods.
#[derive(Debug, Clone)]
pub struct Rk4Workspace {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4Workspace {
    pub fn new(dim: usize) -> Self {
        Self {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }
}

/// One classical RK4 step, in place.
pub fn rk4_step_in_place<S: OdeSystem>(
    sys: &S,
    t: f64,
    y: &mut [f64],
    dt: f64,
    ws: &mut Rk4Workspace,
) {
    let half = 0.5 * dt;
    sys.rhs(t, y, &mut ws.k1);
    for ((tmp, y), k) in ws.tmp.iter_mut().zip(y.iter()).zip(&ws.k1) {
        *tmp = y + half * k;
    }
    sys.rhs(t + half, &ws.tmp, &mut ws.k2);
    for ((tmp, y), k) in ws.tmp.iter_mut().zip(y.iter()).zip(&ws.k2) {
        *tmp = y + half * k;
    }
    sys.rhs(t + half, &ws.tmp, &mut ws.k3);
    for ((tmp, y), k) in ws.tmp.iter_mut().zip(y.iter()).zip(&ws.k3) {
        *tmp = y + dt * k;
    }
    sys.rhs(t + dt, &ws.tmp, &mut ws.k4);
    let sixth = dt / 6.0;
    for (i, y) in y.iter_mut().enumerate() {
        *y += sixth * (ws.k1[i] + 2.0 * ws.k2[i] + 2.0 * ws.k3[i] + ws.k4[i]);
    }
}

fn euler_step_in_place<S: OdeSystem>(sys: &S, t: f64, y: &mut [f64], dt: f64, ws: &mut Rk4Workspace) {
    sys.rhs(t, y, &mut ws.k1);
    for (y, k) in y.iter_mut().zip(&ws.k1) {
        *y += dt * k;
    }
}

/// One RK4 step of the optomechanical model.
pub fn step_rk4(state: &ScaledState, t: f64, dt: f64, system: &ValidatedSystem) -> Result<ScaledState> {
    let mut y = state.as_slice().to_vec();
    let mut ws = Rk4Workspace::new(y.len());
    rk4_step_in_place(system, t, &mut y, dt, &mut ws);
    if y.iter().all(|v| v.is_finite()) {
        Ok(ScaledState::from_vec(state.n(), y))
    } else {
        Err(Error::Overflow { t: t + dt })
    }
}

// Dormand–Prince 5(4) tableau.
const DP_C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_B: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
// Difference between the 5th- and 4th-order weights.
const DP_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Dormand–Prince 5(4) stepper with standard step-size control.
struct DormandPrince {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    y_new: Vec<f64>,
    rel_tol: f64,
    abs_tol: f64,
    h: f64,
}

impl DormandPrince {
    fn new(dim: usize, rel_tol: f64, abs_tol: f64, h0: f64) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; dim]),
            tmp: vec![0.0; dim],
            y_new: vec![0.0; dim],
            rel_tol,
            abs_tol,
            h: h0,
        }
    }

    /// Advance `y` from `t` to exactly `t_target`.
    fn advance<S: OdeSystem>(&mut self, sys: &S, t: &mut f64, y: &mut [f64], t_target: f64) -> Result<()> {
        const SAFETY: f64 = 0.9;
        const MAX_STEPS: usize = 10_000_000;
        let mut steps = 0;
        while *t < t_target {
            let remaining = t_target - *t;
            if remaining <= 1e-13 * t_target.abs().max(1.0) {
                *t = t_target;
                break;
            }
            let last = self.h >= remaining;
            let h = if last { remaining } else { self.h };
            if h < 1e-14 * t.abs().max(1.0) {
                return Err(Error::StepUnderflow { t: *t, h });
            }
            steps += 1;
            if steps > MAX_STEPS {
                return Err(Error::StepUnderflow { t: *t, h });
            }

            sys.rhs(*t, y, &mut self.k[0]);
            for s in 1..7 {
                for i in 0..y.len() {
                    let mut acc = y[i];
                    for j in 0..s {
                        acc += h * DP_A[s][j] * self.k[j][i];
                    }
                    self.tmp[i] = acc;
                }
                sys.rhs(*t + DP_C[s] * h, &self.tmp, &mut self.k[s]);
            }
            let mut err_sq = 0.0;
            for i in 0..y.len() {
                let mut acc = y[i];
                let mut err = 0.0;
                for s in 0..7 {
                    acc += h * DP_B[s] * self.k[s][i];
                    err += h * DP_E[s] * self.k[s][i];
                }
                self.y_new[i] = acc;
                let scale = self.abs_tol + self.rel_tol * y[i].abs().max(acc.abs());
                err_sq += (err / scale).powi(2);
            }
            let err_norm = (err_sq / y.len() as f64).sqrt();
            if !err_norm.is_finite() {
                if self.y_new.iter().any(|v| !v.is_finite()) && h < 1e-8 {
                    return Err(Error::Overflow { t: *t + h });
                }
                self.h = h * 0.1;
                continue;
            }
            let factor = if err_norm == 0.0 {
                5.0
            } else {
                (SAFETY * err_norm.powf(-0.2)).clamp(0.2, 5.0)
            };
            if err_norm <= 1.0 {
                *t = if last { t_target } else { *t + h };
                y.copy_from_slice(&self.y_new);
                // a step clipped to hit the output time says little about the next one
                if !last {
                    self.h = h * factor;
                }
            } else {
                self.h = h * factor.min(1.0);
            }
        }
        Ok(())
    }
}

/// Uniformly sampled output of a generic integration.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    pub dim: usize,
    /// Scaled sample times.
    pub times: Vec<f64>,
    /// Row-major samples, `dim` values per time.
    pub data: Vec<f64>,
}

impl Samples {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }

    pub fn last(&self) -> &[f64] {
        self.row(self.len() - 1)
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }
}

/// Integrate any [`OdeSystem`] from `t = 0`, sampling every
/// `sample_every` base steps.
pub fn integrate_system<S: OdeSystem>(sys: &S, y0: &[f64], cfg: &IntegratorConfig) -> Result<Samples> {
    integrate_system_with(sys, y0, cfg, |_| {})
}

/// Like [`integrate_system`] but lets the caller project the state after
/// each stored sample interval (used to keep bounded variables in range).
pub fn integrate_system_with<S, F>(sys: &S, y0: &[f64], cfg: &IntegratorConfig, mut project: F) -> Result<Samples>
where
    S: OdeSystem,
    F: FnMut(&mut [f64]),
{
    cfg.validate()?;
    let dim = sys.dim();
    assert_eq!(y0.len(), dim, "initial state has wrong dimension");
    if !y0.iter().all(|v| v.is_finite()) {
        return Err(Error::Overflow { t: 0.0 });
    }
    let n_steps = cfg.n_steps();
    let n_samples = n_steps / cfg.sample_every + 1;
    let mut out = Samples {
        dim,
        times: Vec::with_capacity(n_samples),
        data: Vec::with_capacity(n_samples * dim),
    };
    let mut y = y0.to_vec();
    out.times.push(0.0);
    out.data.extend_from_slice(&y);

    match cfg.method {
        Method::Rk4Fixed | Method::EulerDebug => {
            let mut ws = Rk4Workspace::new(dim);
            for step in 1..=n_steps {
                let t = (step - 1) as f64 * cfg.dt;
                if cfg.method == Method::Rk4Fixed {
                    rk4_step_in_place(sys, t, &mut y, cfg.dt, &mut ws);
                } else {
                    euler_step_in_place(sys, t, &mut y, cfg.dt, &mut ws);
                }
                if step % cfg.sample_every == 0 {
                    project(&mut y);
                    if !y.iter().all(|v| v.is_finite()) {
                        return Err(Error::Overflow { t: step as f64 * cfg.dt });
                    }
                    out.times.push(step as f64 * cfg.dt);
                    out.data.extend_from_slice(&y);
                }
            }
            // catch blow-ups between the last sample and the horizon
            if !y.iter().all(|v| v.is_finite()) {
                return Err(Error::Overflow { t: n_steps as f64 * cfg.dt });
            }
        }
        Method::AdaptiveEmbedded => {
            let mut dp = DormandPrince::new(dim, cfg.rel_tol, cfg.abs_tol, cfg.dt);
            let mut t = 0.0;
            for k in 1..n_samples {
                let target = (k * cfg.sample_every) as f64 * cfg.dt;
                dp.advance(sys, &mut t, &mut y, target)?;
                project(&mut y);
                if !y.iter().all(|v| v.is_finite()) {
                    return Err(Error::Overflow { t });
                }
                out.times.push(target);
                out.data.extend_from_slice(&y);
            }
        }
    }
    Ok(out)
}

/// Time series of the full model, stored in SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Sample times (s).
    pub times: Vec<f64>,
    pub states: Vec<FullState>,
    /// Hash of the system configuration plus integrator settings.
    pub config_hash: String,
    /// Seed used for disorder / initial conditions, when one was used.
    pub rng_seed: Option<u64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn n_per_array(&self) -> usize {
        self.states.first().map_or(0, |s| s.n)
    }

    /// Uniform sample spacing (s); zero for fewer than two samples.
    pub fn sample_dt(&self) -> f64 {
        if self.times.len() < 2 {
            0.0
        } else {
            self.times[1] - self.times[0]
        }
    }

    /// Displacement series of flat oscillator index `k`.
    pub fn displacement(&self, k: usize) -> Vec<f64> {
        self.states.iter().map(|s| s.x[k]).collect()
    }

    pub fn velocity(&self, k: usize) -> Vec<f64> {
        self.states.iter().map(|s| s.v[k]).collect()
    }

    /// Keep only samples with index ≥ `fraction · len`.
    pub fn discard_transient(&self, fraction: f64) -> Trajectory {
        let start = ((self.len() as f64) * fraction.clamp(0.0, 1.0)).floor() as usize;
        let start = start.min(self.len().saturating_sub(1));
        Trajectory {
            times: self.times[start..].to_vec(),
            states: self.states[start..].to_vec(),
            config_hash: self.config_hash.clone(),
            rng_seed: self.rng_seed,
        }
    }

    /// SHA-256 over the bit patterns of all samples.
    pub fn checksum(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for (t, s) in self.times.iter().zip(&self.states) {
            h.update(t.to_le_bytes());
            for v in s.x.iter().chain(&s.v) {
                h.update(v.to_le_bytes());
            }
            for a in s.alpha {
                h.update(a.re.to_le_bytes());
                h.update(a.im.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

/// Provenance hash of a system configuration combined with integrator settings.
pub fn run_hash(system: &ValidatedSystem, cfg: &IntegratorConfig) -> String {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    h.update(system.config().to_toml_string().as_bytes());
    h.update(toml::to_string(cfg).expect("integrator config serializes").as_bytes());
    hex::encode(h.finalize())
}

/// Integrate the full model from a physical initial state.
pub fn integrate(state0: &FullState, system: &ValidatedSystem, cfg: &IntegratorConfig) -> Result<Trajectory> {
    let y0 = system.to_scaled(state0);
    integrate_scaled(&y0, system, cfg, None)
}

/// Integrate the full model from a scaled initial state.
pub fn integrate_scaled(
    y0: &ScaledState,
    system: &ValidatedSystem,
    cfg: &IntegratorConfig,
    rng_seed: Option<u64>,
) -> Result<Trajectory> {
    let samples = integrate_system(system, y0.as_slice(), cfg)?;
    let time_unit = system.scales().time;
    Ok(Trajectory {
        times: samples.times.iter().map(|t| t * time_unit).collect(),
        states: samples.rows().map(|r| system.to_physical_slice(r)).collect(),
        config_hash: run_hash(system, cfg),
        rng_seed,
    })
}

/// Measured order of accuracy of `method` from the final-time error at each
/// step size in `dt_list`.
///
/// The error is taken against `exact` when supplied, otherwise against the
/// same method run at `min(dt_list)/16`. The order is the least-squares slope
/// of `ln(error)` versus `ln(dt)`.
pub fn estimate_convergence_order<S: OdeSystem>(
    sys: &S,
    y0: &[f64],
    t_end: f64,
    method: Method,
    dt_list: &[f64],
    exact: Option<&[f64]>,
) -> Result<f64> {
    if dt_list.len() < 3 {
        return Err(Error::InsufficientData("need at least three step sizes".into()));
    }
    let run = |dt: f64| -> Result<Vec<f64>> {
        let steps = (t_end / dt).round().max(1.0);
        let cfg = IntegratorConfig {
            method,
            dt: t_end / steps,
            sample_every: 1,
            t_end,
            ..IntegratorConfig::default()
        };
        Ok(integrate_system(sys, y0, &cfg)?.last().to_vec())
    };
    let reference = match exact {
        Some(e) => e.to_vec(),
        None => {
            let finest = dt_list.iter().cloned().fold(f64::INFINITY, f64::min);
            run(finest / 16.0)?
        }
    };
    let mut pts = Vec::with_capacity(dt_list.len());
    for &dt in dt_list {
        let y = run(dt)?;
        let err = y
            .iter()
            .zip(&reference)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        pts.push((dt.ln(), err.ln()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_system, SystemConfig};
    use approx::assert_relative_eq;
    use std::f64::consts::TAU;

    /// Undamped unit oscillator y'' = −y.
    struct Harmonic;
    impl OdeSystem for Harmonic {
        fn dim(&self) -> usize {
            2
        }
        fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
            dy[0] = y[1];
            dy[1] = -y[0];
        }
    }

    /// Exponential decay y' = −y.
    struct Decay;
    impl OdeSystem for Decay {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
            dy[0] = -y[0];
        }
    }

    #[test]
    fn zero_horizon_returns_initial_state() {
        let cfg = IntegratorConfig {
            t_end: 0.0,
            ..Default::default()
        };
        let s = integrate_system(&Harmonic, &[1.0, 0.0], &cfg).unwrap();
        assert_eq!(s.times, vec![0.0]);
        assert_eq!(s.data, vec![1.0, 0.0]);
    }

    #[test]
    fn rk4_energy_error_scales_as_dt_to_the_fourth() {
        let energy_error = |dt: f64| {
            let cfg = IntegratorConfig {
                dt,
                sample_every: 1,
                t_end: TAU,
                ..Default::default()
            };
            let y = integrate_system(&Harmonic, &[1.0, 0.0], &cfg).unwrap();
            let last = y.last();
            (0.5 * (last[0].powi(2) + last[1].powi(2)) - 0.5).abs()
        };
        let coarse = energy_error(TAU / 40.0);
        let fine = energy_error(TAU / 80.0);
        // energy drift of RK4 on the harmonic oscillator is O(dt^4) per period
        assert_relative_eq!(coarse / fine, 32.0, max_relative = 0.5);
        assert!(coarse / fine > 14.0);
    }

    #[test]
    fn convergence_orders() {
        let dts = [TAU / 20.0, TAU / 40.0, TAU / 80.0, TAU / 160.0];
        let p = estimate_convergence_order(&Harmonic, &[1.0, 0.0], TAU, Method::Rk4Fixed, &dts, None).unwrap();
        assert!((p - 4.0).abs() < 0.2, "rk4 order {p}");
        let exact = [(-2.0f64).exp()];
        let dts = [0.02, 0.01, 0.005, 0.0025];
        let p = estimate_convergence_order(&Decay, &[1.0], 2.0, Method::EulerDebug, &dts, Some(&exact)).unwrap();
        assert!((p - 1.0).abs() < 0.2, "euler order {p}");
        assert!(estimate_convergence_order(&Decay, &[1.0], 1.0, Method::Rk4Fixed, &dts[..2], None).is_err());
    }

    #[test]
    fn adaptive_respects_tolerance_on_closed_form() {
        let cfg = IntegratorConfig {
            method: Method::AdaptiveEmbedded,
            dt: 0.05,
            rel_tol: 1e-8,
            abs_tol: 1e-12,
            sample_every: 10,
            t_end: 20.0,
        };
        let s = integrate_system(&Decay, &[1.0], &cfg).unwrap();
        for (t, row) in s.times.iter().zip(s.rows()) {
            let exact = (-t).exp();
            assert!((row[0] - exact).abs() <= 10.0 * 1e-8 * exact.max(1e-12 / 1e-8));
        }
        let s = integrate_system(&Harmonic, &[1.0, 0.0], &cfg).unwrap();
        for (t, row) in s.times.iter().zip(s.rows()) {
            assert!((row[0] - t.cos()).abs() < 10.0 * 1e-8 * 20.0);
        }
    }

    #[test]
    fn sample_times_are_exact_multiples() {
        let cfg = IntegratorConfig {
            dt: 0.1,
            sample_every: 3,
            t_end: 5.0,
            ..Default::default()
        };
        let s = integrate_system(&Harmonic, &[1.0, 0.0], &cfg).unwrap();
        for (k, t) in s.times.iter().enumerate() {
            assert_eq!(*t, (k * 3) as f64 * 0.1);
        }
        assert_eq!(s.len(), 50 / 3 + 1);
    }

    #[test]
    fn overflow_is_reported() {
        struct Blow;
        impl OdeSystem for Blow {
            fn dim(&self) -> usize {
                1
            }
            fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
                dy[0] = y[0] * y[0];
            }
        }
        let cfg = IntegratorConfig {
            dt: 0.1,
            sample_every: 1,
            t_end: 100.0,
            ..Default::default()
        };
        assert!(matches!(
            integrate_system(&Blow, &[1.0], &cfg),
            Err(Error::Overflow { .. })
        ));
    }

    #[test]
    fn zero_model_state_stays_zero() {
        let sys = build_system(SystemConfig::reference(0.0, 0.0)).unwrap();
        let s = step_rk4(&ScaledState::zeros(4), 0.0, 0.1, &sys).unwrap();
        assert!(s.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn invalid_configs_rejected() {
        let bad = [
            IntegratorConfig { dt: 0.0, ..Default::default() },
            IntegratorConfig { sample_every: 0, ..Default::default() },
            IntegratorConfig { rel_tol: -1.0, ..Default::default() },
        ];
        for cfg in bad {
            assert!(integrate_system(&Decay, &[1.0], &cfg).is_err());
        }
    }
}
