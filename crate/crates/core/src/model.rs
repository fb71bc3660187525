//! Equations of motion for two identical optomechanical arrays.
//!
//! Each array σ ∈ {0, 1} holds `N` mechanical modes that share one driven
//! optical mode. Within an array every mode feels the same radiation force
//! `ħG|α|²`, and the optical resonance is pulled by the summed displacement of
//! that array. Both arrays are joined by a global spring network in which
//! every pair of distinct modes is coupled with stiffness `μ/N`.
//!
//! Configuration values are SI. Integration happens in scaled units:
//!
//! * time in units of `1/Ω̄` (Ω̄ = mean natural frequency),
//! * displacement in units of `κ/|G|`,
//! * optical amplitude in units of `α_max`.
//!
//! # State layout
//!
//! A [`ScaledState`] is a flat vector of length `4N + 4`:
//!
//! ```text
//! [ x(0,0) .. x(0,N-1) x(1,0) .. x(1,N-1) | v(0,0) .. v(1,N-1) | Re α0, Im α0, Re α1, Im α1 ]
//! ```
//!
//! so oscillator `i` of array `σ` lives at flat index `σ·N + i` inside the
//! displacement block (and `2N + σ·N + i` for its velocity).

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::integrator::OdeSystem;

/// Reduced Planck constant (J·s).
pub const HBAR: f64 = 1.054_571_817e-34;

/// Physical constants used by the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    /// Action quantum ħ (J·s).
    pub hbar: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self { hbar: HBAR }
    }
}

/// Mechanical parameters. The same frequency list is used for both arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanicalParams {
    /// Effective mass (kg).
    pub mass: f64,
    /// Energy damping rate Γ (rad/s).
    pub gamma: f64,
    /// Natural frequencies Ω_i (rad/s), one per oscillator of an array.
    pub omega: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpticalParams {
    /// Optical decay rate κ (rad/s).
    pub kappa: f64,
    /// Laser detuning Δ = ω_laser − ω_opt (rad/s).
    pub delta: f64,
    /// Frequency pull per unit displacement G (rad/s per m).
    pub g_coupling: f64,
    /// Drive amplitude α_max, real and non-negative (√photons).
    pub alpha_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingParams {
    /// Global spring scale μ (N/m); each pair is coupled with μ/N.
    pub mu: f64,
    /// Oscillators per array.
    pub n_per_array: usize,
}

/// How the SI configuration is mapped onto integration units.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NondimScheme {
    /// τ = Ω̄t, x in units of κ/|G|, α in units of α_max.
    #[default]
    MeanFrequency,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingSection {
    #[serde(default)]
    pub scheme: NondimScheme,
}

impl Default for ScalingSection {
    fn default() -> Self {
        Self {
            scheme: NondimScheme::MeanFrequency,
        }
    }
}

/// Complete physical description of the two arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    #[serde(default)]
    pub constants: PhysicalConstants,
    pub mechanical: MechanicalParams,
    pub optical: OpticalParams,
    pub coupling: CouplingParams,
    #[serde(default)]
    pub scaling: ScalingSection,
}

/// Parameter set of the reference device: Ω̄/2π = 133 MHz, Q = 1000,
/// m = 70 pg, G/2π = 49 MHz/nm, κ = Δ = Ω̄.
pub mod reference {
    use std::f64::consts::PI;

    pub const OMEGA_BAR: f64 = 2.0 * PI * 133.0e6;
    pub const QUALITY: f64 = 1000.0;
    pub const GAMMA: f64 = OMEGA_BAR / QUALITY;
    pub const MASS: f64 = 70.0e-15;
    pub const G_COUPLING: f64 = 2.0 * PI * 49.0e6 / 1.0e-9;
    pub const KAPPA: f64 = OMEGA_BAR;
    pub const DELTA: f64 = OMEGA_BAR;
    pub const N_PER_ARRAY: usize = 4;
    /// Largest explored inter-array spring, in units of mΩ̄².
    pub const MU_MAX_RELATIVE: f64 = 4.1e-3;

    /// μ_max = 4.1·10⁻³·mΩ̄² (N/m).
    pub fn mu_max() -> f64 {
        MU_MAX_RELATIVE * MASS * OMEGA_BAR * OMEGA_BAR
    }
}

impl SystemConfig {
    /// Reference device with `N = 4` identical oscillators at Ω̄.
    pub fn reference(alpha_max: f64, mu: f64) -> Self {
        use reference::*;
        Self {
            constants: PhysicalConstants::default(),
            mechanical: MechanicalParams {
                mass: MASS,
                gamma: GAMMA,
                omega: vec![OMEGA_BAR; N_PER_ARRAY],
            },
            optical: OpticalParams {
                kappa: KAPPA,
                delta: DELTA,
                g_coupling: G_COUPLING,
                alpha_max,
            },
            coupling: CouplingParams {
                mu,
                n_per_array: N_PER_ARRAY,
            },
            scaling: ScalingSection::default(),
        }
    }

    pub fn with_omega(mut self, omega: Vec<f64>) -> Self {
        self.coupling.n_per_array = omega.len();
        self.mechanical.omega = omega;
        self
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        self.coupling.mu = mu;
        self
    }

    pub fn with_alpha_max(mut self, alpha_max: f64) -> Self {
        self.optical.alpha_max = alpha_max;
        self
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_toml_string())?;
        Ok(())
    }

    /// SHA-256 of the canonical TOML serialization, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml_string().as_bytes()))
    }

    /// Mean natural frequency Ω̄.
    pub fn omega_bar(&self) -> f64 {
        let w = &self.mechanical.omega;
        w.iter().sum::<f64>() / w.len().max(1) as f64
    }
}

/// Conversion factors from integration units to SI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scales {
    /// Seconds per unit of scaled time (1/Ω̄).
    pub time: f64,
    /// Metres per unit of scaled displacement (κ/|G|).
    pub length: f64,
    /// √photons per unit of scaled optical amplitude (α_max).
    pub field: f64,
}

impl Scales {
    pub fn velocity(&self) -> f64 {
        self.length / self.time
    }
}

/// A configuration that passed validation, with every coefficient of the
/// scaled equations of motion precomputed. Immutable after construction.
#[derive(Debug, Clone)]
pub struct ValidatedSystem {
    config: SystemConfig,
    scales: Scales,
    n: usize,
    omega_bar: f64,
    /// (Ω_i/Ω̄)², indexed by oscillator within an array.
    omega_sq: Vec<f64>,
    gamma: f64,
    kappa_half: f64,
    delta: f64,
    /// Detuning change per unit scaled displacement (G·L/Ω̄).
    pull: f64,
    /// Scaled radiation force per unit |α|².
    drive: f64,
    /// Scaled optical input term (κ/2)·α_max/field.
    input: f64,
    /// Scaled pair stiffness μ/(N m Ω̄²).
    spring: f64,
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be finite (got {v})")))
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    finite(name, v)?;
    if v > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive (got {v})")))
    }
}

/// Validate a configuration and precompute the scaled coefficients.
pub fn build_system(raw_config: SystemConfig) -> Result<ValidatedSystem> {
    let c = &raw_config;
    positive("constants.hbar", c.constants.hbar)?;
    positive("mechanical.mass", c.mechanical.mass)?;
    positive("mechanical.gamma", c.mechanical.gamma)?;
    positive("optical.kappa", c.optical.kappa)?;
    finite("optical.delta", c.optical.delta)?;
    finite("optical.g_coupling", c.optical.g_coupling)?;
    finite("optical.alpha_max", c.optical.alpha_max)?;
    if c.optical.alpha_max < 0.0 {
        return Err(Error::Config("optical.alpha_max must be non-negative".into()));
    }
    finite("coupling.mu", c.coupling.mu)?;
    if c.coupling.mu < 0.0 {
        return Err(Error::Config("coupling.mu must be non-negative".into()));
    }
    let n = c.coupling.n_per_array;
    if n == 0 {
        return Err(Error::Config("coupling.n_per_array must be at least 1".into()));
    }
    if c.mechanical.omega.len() != n {
        return Err(Error::Config(format!(
            "mechanical.omega has {} entries but n_per_array = {n}",
            c.mechanical.omega.len()
        )));
    }
    for (i, &w) in c.mechanical.omega.iter().enumerate() {
        positive(&format!("mechanical.omega[{i}]"), w)?;
    }

    let omega_bar = c.omega_bar();
    let g = c.optical.g_coupling;
    let length = if g != 0.0 { c.optical.kappa / g.abs() } else { 1.0 };
    let field = if c.optical.alpha_max > 0.0 {
        c.optical.alpha_max
    } else {
        1.0
    };
    let scales = Scales {
        time: 1.0 / omega_bar,
        length,
        field,
    };
    let m_w2 = c.mechanical.mass * omega_bar * omega_bar;

    Ok(ValidatedSystem {
        n,
        omega_bar,
        omega_sq: c
            .mechanical
            .omega
            .iter()
            .map(|w| (w / omega_bar).powi(2))
            .collect(),
        gamma: c.mechanical.gamma / omega_bar,
        kappa_half: 0.5 * c.optical.kappa / omega_bar,
        delta: c.optical.delta / omega_bar,
        pull: g * length / omega_bar,
        drive: c.constants.hbar * g * field * field / (m_w2 * length),
        input: 0.5 * c.optical.kappa / omega_bar * c.optical.alpha_max / field,
        spring: c.coupling.mu / (n as f64 * m_w2),
        scales,
        config: raw_config,
    })
}

impl ValidatedSystem {
    pub fn config(&self) -> &SystemConfig {
        &self.config
    }

    pub fn scales(&self) -> Scales {
        self.scales
    }

    pub fn n_per_array(&self) -> usize {
        self.n
    }

    pub fn omega_bar(&self) -> f64 {
        self.omega_bar
    }

    /// Natural frequencies Ω_i in rad/s.
    pub fn omega(&self) -> &[f64] {
        &self.config.mechanical.omega
    }

    /// Damping rate in scaled units (Γ/Ω̄).
    pub fn gamma_scaled(&self) -> f64 {
        self.gamma
    }

    /// Length of the flat scaled state.
    pub fn state_len(&self) -> usize {
        4 * self.n + 4
    }

    /// Convert a physical state into integration units.
    pub fn to_scaled(&self, s: &FullState) -> ScaledState {
        assert_eq!(s.n, self.n, "state size does not match system");
        let sc = self.scales;
        let mut y = Vec::with_capacity(self.state_len());
        y.extend(s.x.iter().map(|x| x / sc.length));
        y.extend(s.v.iter().map(|v| v / sc.velocity()));
        for a in s.alpha {
            y.push(a.re / sc.field);
            y.push(a.im / sc.field);
        }
        ScaledState { n: self.n, data: y }
    }

    /// Convert a scaled state back to SI.
    pub fn to_physical(&self, y: &ScaledState) -> FullState {
        self.to_physical_slice(&y.data)
    }

    pub(crate) fn to_physical_slice(&self, y: &[f64]) -> FullState {
        let sc = self.scales;
        let nn = 2 * self.n;
        let vel = sc.velocity();
        FullState {
            n: self.n,
            x: y[..nn].iter().map(|x| x * sc.length).collect(),
            v: y[nn..2 * nn].iter().map(|v| v * vel).collect(),
            alpha: [
                Complex64::new(y[2 * nn] * sc.field, y[2 * nn + 1] * sc.field),
                Complex64::new(y[2 * nn + 2] * sc.field, y[2 * nn + 3] * sc.field),
            ],
        }
    }

    /// Scaled state at rest with the optical fields at their steady state.
    pub fn resting_state(&self) -> ScaledState {
        let mut s = ScaledState::zeros(self.n);
        let alpha = optical_steady_state(s.x(), self);
        s.set_alpha(0, alpha[0]);
        s.set_alpha(1, alpha[1]);
        s
    }

    /// Linear static displacement produced by the steady radiation force at
    /// zero displacement, per oscillator (m).
    pub fn static_displacement(&self) -> Vec<f64> {
        let zeros = vec![0.0; 2 * self.n];
        let a = optical_steady_state(&zeros, self)[0];
        let force = radiation_force(
            a * self.scales.field,
            self.config.constants.hbar,
            self.config.optical.g_coupling,
        );
        self.omega()
            .iter()
            .map(|w| force / (self.config.mechanical.mass * w * w))
            .collect()
    }
}

/// Physical (SI) state of both arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullState {
    pub n: usize,
    /// 2N displacements (m), flat index σ·N + i.
    pub x: Vec<f64>,
    /// 2N velocities (m/s), same layout as `x`.
    pub v: Vec<f64>,
    /// Optical amplitudes of array 0 and array 1.
    pub alpha: [Complex64; 2],
}

impl FullState {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            x: vec![0.0; 2 * n],
            v: vec![0.0; 2 * n],
            alpha: [Complex64::new(0.0, 0.0); 2],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.v).all(|v| v.is_finite())
            && self.alpha.iter().all(|a| a.re.is_finite() && a.im.is_finite())
    }
}

/// Flat index of oscillator `i` of array `sigma` within the displacement block.
#[inline]
pub fn flat_index(n: usize, sigma: usize, i: usize) -> usize {
    debug_assert!(sigma < 2 && i < n);
    sigma * n + i
}

/// Flat state in integration units; see the module docs for the layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledState {
    n: usize,
    data: Vec<f64>,
}

/// Time derivative of a [`ScaledState`], same layout.
pub type StateDerivative = ScaledState;

impl ScaledState {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; 4 * n + 4],
        }
    }

    pub fn from_vec(n: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), 4 * n + 4, "flat state has wrong length");
        Self { n, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn x(&self) -> &[f64] {
        &self.data[..2 * self.n]
    }

    pub fn x_mut(&mut self) -> &mut [f64] {
        let nn = 2 * self.n;
        &mut self.data[..nn]
    }

    pub fn v(&self) -> &[f64] {
        &self.data[2 * self.n..4 * self.n]
    }

    pub fn v_mut(&mut self) -> &mut [f64] {
        let nn = 2 * self.n;
        &mut self.data[nn..2 * nn]
    }

    pub fn alpha(&self, sigma: usize) -> Complex64 {
        let k = 4 * self.n + 2 * sigma;
        Complex64::new(self.data[k], self.data[k + 1])
    }

    pub fn set_alpha(&mut self, sigma: usize, a: Complex64) {
        let k = 4 * self.n + 2 * sigma;
        self.data[k] = a.re;
        self.data[k + 1] = a.im;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Optical resonance shift δω_opt = −G·Σ_j x_j of one array.
pub fn detuning_shift(x_of_one_array: &[f64], g_coupling: f64) -> f64 {
    -g_coupling * x_of_one_array.iter().sum::<f64>()
}

/// Radiation pressure force ħG|α|² felt by every oscillator of the array.
pub fn radiation_force(alpha: Complex64, hbar: f64, g_coupling: f64) -> f64 {
    hbar * g_coupling * alpha.norm_sqr()
}

/// Global spring forces on all 2N oscillators.
///
/// With k = μ/N for every distinct pair, the force on oscillator `i`
/// collapses to `(μ/N)(S − 2N·x_i)` where `S` is the sum of all displacements.
pub fn coupling_force(x: &[f64], mu: f64, n_per_array: usize) -> Vec<f64> {
    assert_eq!(x.len(), 2 * n_per_array, "expected 2N displacements");
    let k = mu / n_per_array as f64;
    let total: f64 = x.iter().sum();
    let nn = x.len() as f64;
    x.iter().map(|xi| k * (total - nn * xi)).collect()
}

/// Right-hand side of the equations of motion in integration units.
pub fn rhs(t: f64, state: &ScaledState, system: &ValidatedSystem) -> StateDerivative {
    let mut out = ScaledState::zeros(state.n);
    system.rhs(t, &state.data, &mut out.data);
    out
}

/// Optical amplitudes (scaled) at which the field equations are stationary
/// for the given scaled displacements.
pub fn optical_steady_state(x: &[f64], system: &ValidatedSystem) -> [Complex64; 2] {
    let n = system.n;
    assert_eq!(x.len(), 2 * n, "expected 2N displacements");
    let mut out = [Complex64::new(0.0, 0.0); 2];
    for (sigma, a) in out.iter_mut().enumerate() {
        let sum: f64 = x[sigma * n..(sigma + 1) * n].iter().sum();
        let detuning = system.delta + system.pull * sum;
        *a = Complex64::new(system.input, 0.0) / Complex64::new(system.kappa_half, -detuning);
    }
    out
}

impl OdeSystem for ValidatedSystem {
    fn dim(&self) -> usize {
        self.state_len()
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let n = self.n;
        let nn = 2 * n;
        let (x, rest) = y.split_at(nn);
        let (v, a) = rest.split_at(nn);
        let total: f64 = x.iter().sum();
        let nn_f = nn as f64;

        for sigma in 0..2 {
            let (re, im) = (a[2 * sigma], a[2 * sigma + 1]);
            let f_opt = self.drive * (re * re + im * im);
            let block = sigma * n..(sigma + 1) * n;
            let sum: f64 = x[block.clone()].iter().sum();
            // Δ − δω_opt with δω_opt = −G Σx
            let detuning = self.delta + self.pull * sum;
            dy[2 * nn + 2 * sigma] = -self.kappa_half * re - detuning * im + self.input;
            dy[2 * nn + 2 * sigma + 1] = detuning * re - self.kappa_half * im;

            for (i, k) in block.enumerate() {
                dy[k] = v[k];
                dy[nn + k] = f_opt + self.spring * (total - nn_f * x[k])
                    - self.gamma * v[k]
                    - self.omega_sq[i] * x[k];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn reference_system(alpha_max: f64, mu: f64) -> ValidatedSystem {
        build_system(SystemConfig::reference(alpha_max, mu)).unwrap()
    }

    #[test]
    fn reference_parameters_validate() {
        let sys = reference_system(3.0e4, 0.0);
        assert_eq!(sys.n_per_array(), 4);
        assert_relative_eq!(sys.gamma_scaled(), 1.0e-3, max_relative = 1e-12);
        assert_relative_eq!(sys.kappa_half, 0.5, max_relative = 1e-12);
        assert_relative_eq!(sys.delta, 1.0, max_relative = 1e-12);
        // one scaled length unit pulls the cavity by κ
        assert_relative_eq!(sys.pull, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn rejects_bad_configs() {
        let mut c = SystemConfig::reference(1.0, 0.0);
        c.mechanical.gamma = 0.0;
        assert!(matches!(build_system(c), Err(Error::Config(_))));

        let mut c = SystemConfig::reference(1.0, 0.0);
        c.mechanical.mass = -1.0;
        assert!(build_system(c).is_err());

        let mut c = SystemConfig::reference(1.0, 0.0);
        c.coupling.n_per_array = 0;
        c.mechanical.omega.clear();
        assert!(build_system(c).is_err());

        let mut c = SystemConfig::reference(1.0, 0.0);
        c.optical.kappa = f64::NAN;
        assert!(build_system(c).is_err());

        let mut c = SystemConfig::reference(1.0, 0.0);
        c.mechanical.omega[2] = f64::INFINITY;
        assert!(build_system(c).is_err());

        let mut c = SystemConfig::reference(1.0, 0.0);
        c.mechanical.omega.push(1.0);
        assert!(build_system(c).is_err());
    }

    #[test]
    fn config_round_trips_through_validation() {
        let c = SystemConfig::reference(2.5e4, 1.0e-3);
        let text = c.to_toml_string();
        let sys = build_system(SystemConfig::from_toml_str(&text).unwrap()).unwrap();
        assert_eq!(sys.config().to_toml_string(), text);
        assert_eq!(sys.config().hash(), c.hash());
    }

    #[test]
    fn detuning_shift_examples() {
        assert_eq!(detuning_shift(&[0.0; 4], 3.0), 0.0);
        let nm = 1.0e-9;
        assert_eq!(
            detuning_shift(&[1.0 * nm, -1.0 * nm, 2.0 * nm, -2.0 * nm], 7.0e17),
            0.0
        );
        let g = 2.0 * PI * 49.0e6 / nm;
        assert_relative_eq!(
            detuning_shift(&[nm, 0.0, 0.0, 0.0], g),
            -2.0 * PI * 49.0e6,
            max_relative = 1e-12
        );
    }

    #[test]
    fn radiation_force_examples() {
        let (hbar, g) = (HBAR, 3.1e17);
        assert_eq!(radiation_force(Complex64::new(0.0, 0.0), hbar, g), 0.0);
        assert_eq!(radiation_force(Complex64::new(1.0, 0.0), hbar, g), hbar * g);
        assert_relative_eq!(
            radiation_force(Complex64::new(3.0, 4.0), hbar, g),
            25.0 * hbar * g,
            max_relative = 1e-15
        );
    }

    #[test]
    fn coupling_force_trivial_cases() {
        assert!(coupling_force(&[0.3; 8], 2.0, 4).iter().all(|&f| f == 0.0));
        let x = [0.1, -0.4, 0.3, 0.9, -1.0, 0.2, 0.0, 0.5];
        assert!(coupling_force(&x, 0.0, 4).iter().all(|&f| f == 0.0));
    }

    #[test]
    fn zero_state_is_fixed_point_without_drive() {
        let sys = reference_system(0.0, 1.0e-3);
        let d = rhs(0.0, &ScaledState::zeros(4), &sys);
        assert!(d.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rhs_is_autonomous() {
        let sys = reference_system(2.0e4, 2.0e-4);
        let mut s = ScaledState::zeros(4);
        for (k, v) in s.as_mut_slice().iter_mut().enumerate() {
            *v = (k as f64 * 0.37).sin();
        }
        assert_eq!(rhs(0.0, &s, &sys), rhs(1234.5, &s, &sys));
    }

    #[test]
    fn arrays_decouple_without_spring() {
        let sys = reference_system(2.0e4, 0.0);
        let n = 4;
        let mut a = ScaledState::zeros(n);
        for (k, v) in a.as_mut_slice().iter_mut().enumerate() {
            *v = (k as f64 * 0.71).cos() * 0.1;
        }
        let mut b = a.clone();
        // perturb every array-1 entry
        for i in 0..n {
            b.x_mut()[flat_index(n, 1, i)] += 0.3;
            b.v_mut()[flat_index(n, 1, i)] -= 0.2;
        }
        b.set_alpha(1, Complex64::new(0.9, -0.4));
        let (da, db) = (rhs(0.0, &a, &sys), rhs(0.0, &b, &sys));
        for i in 0..n {
            let k = flat_index(n, 0, i);
            assert_eq!(da.x()[k].to_bits(), db.x()[k].to_bits());
            assert_eq!(da.v()[k].to_bits(), db.v()[k].to_bits());
        }
        assert_eq!(da.alpha(0), db.alpha(0));
    }

    #[test]
    fn optical_steady_state_examples() {
        let mut c = SystemConfig::reference(1.0, 0.0);
        c.optical.delta = 0.0;
        let sys = build_system(c).unwrap();
        let a = optical_steady_state(&[0.0; 8], &sys);
        assert_relative_eq!(a[0].re, 1.0, max_relative = 1e-15);
        assert_eq!(a[0].im, 0.0);

        // κ = Δ: |1/2|² / (1/4 + 1) = 0.2
        let sys = reference_system(1.0, 0.0);
        let a = optical_steady_state(&[0.0; 8], &sys);
        assert_relative_eq!(a[1].norm_sqr(), 0.2, max_relative = 1e-14);
    }

    #[test]
    fn steady_field_zeroes_optical_block() {
        let sys = reference_system(3.0e4, 1.0e-4);
        let mut s = ScaledState::zeros(4);
        for (k, x) in s.x_mut().iter_mut().enumerate() {
            *x = 0.05 * (k as f64 - 3.5);
        }
        let a = optical_steady_state(s.x(), &sys);
        s.set_alpha(0, a[0]);
        s.set_alpha(1, a[1]);
        let d = rhs(0.0, &s, &sys);
        assert!(d.alpha(0).norm() < 1e-15);
        assert!(d.alpha(1).norm() < 1e-15);
    }

    #[test]
    fn physical_conversion_round_trip() {
        let sys = reference_system(3.0e4, 0.0);
        let mut s = ScaledState::zeros(4);
        for (k, v) in s.as_mut_slice().iter_mut().enumerate() {
            *v = (k as f64).sin();
        }
        let back = sys.to_scaled(&sys.to_physical(&s));
        for (a, b) in s.as_slice().iter().zip(back.as_slice()) {
            assert_relative_eq!(a, b, max_relative = 1e-14, epsilon = 1e-300);
        }
    }
}
