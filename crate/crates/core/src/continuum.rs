//! Two-population mean-field dynamics on the Ott–Antonsen manifold.
//!
//! Phases are taken in the frame rotating with the drive, `θ = φ + Ω̄t`,
//! where the phase model reads
//!
//! ```text
//! θ̇ = (Ω̄ − Ω) + Im(H_σ e^{−iθ}) + Im(H₂ e^{−2iθ})
//! H_σ = K e^{iφ̃_σ} + i(λ/2)W + c₂(Z₁² + Z₂²)W̄ − 2c₂W
//! H₂  = c₂W²,   W = Z₁ + Z₂,   λ = μ/(mΩ̄),   c₂ = λ²/(4Γ)
//! ```
//!
//! with `Z_σ = ⟨e^{iθ}⟩ = ρ_σ e^{iΨ_σ}` (the complex conjugate of the
//! Poisson-kernel coefficient `a_σ = ρ_σ e^{−iΨ_σ}`). For a Lorentzian of
//! half-width ε the first moment obeys
//!
//! ```text
//! Ż_σ = −εZ_σ + ½(H_σ − H̄_σ Z_σ²) + ½(Z̄_σ H₂ − H̄₂ Z_σ³).
//! ```
//!
//! The second-harmonic part is exact for the first moment of a Poisson
//! kernel but does not keep the manifold invariant, so it is a closure.
//! Lab-frame mean phases are `Ψ_σ − Ω̄t`.

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{integrate_system_with, IntegratorConfig, Method, OdeSystem};
use crate::phase_model::PhaseModelParams;

/// Parameters of the mean-field flow. All rates in rad/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OAParams {
    /// Lorentzian half-width ε.
    pub epsilon: f64,
    pub gamma: f64,
    /// Global spring scale μ (N/m).
    pub mu: f64,
    pub mass: f64,
    pub omega_bar: f64,
    /// Uniform locking constant K.
    pub k_drive: f64,
    /// Force phase φ̃_σ of each population (rad).
    #[serde(default)]
    pub drive_phase: [f64; 2],
}

impl OAParams {
    /// Parameters with the locking constant of a self-sustained limit cycle,
    /// K = Γ/2, and zero drive phases.
    pub fn new(epsilon: f64, gamma: f64, mu: f64, mass: f64, omega_bar: f64) -> Self {
        Self {
            epsilon,
            gamma,
            mu,
            mass,
            omega_bar,
            k_drive: 0.5 * gamma,
            drive_phase: [0.0; 2],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::Config("epsilon must be finite and non-negative".into()));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::Config("gamma must be positive".into()));
        }
        if !(self.mass > 0.0 && self.omega_bar > 0.0) {
            return Err(Error::Config("mass and omega_bar must be positive".into()));
        }
        if !(self.mu.is_finite() && self.k_drive.is_finite() && self.drive_phase.iter().all(|p| p.is_finite())) {
            return Err(Error::Config("mu, k_drive and drive phases must be finite".into()));
        }
        Ok(())
    }

    /// First-order coupling rate λ = μ/(mΩ̄).
    pub fn lambda(&self) -> f64 {
        self.mu / (self.mass * self.omega_bar)
    }

    /// Second-order coefficient c₂ = λ²/(4Γ).
    pub fn c2(&self) -> f64 {
        let l = self.lambda();
        l * l / (4.0 * self.gamma)
    }

    /// Uniform-coupling reduction of a phase model: K is the mean of K_i,
    /// the drive phases are the circular means of φ̃ per array, and the
    /// amplitudes are assumed equal. Logs a warning when the K_i spread
    /// exceeds 10 %.
    pub fn from_phase_model(p: &PhaseModelParams, epsilon: f64) -> Result<Self> {
        p.validate()?;
        let k = p.k_drive();
        let mean = k.iter().sum::<f64>() / k.len() as f64;
        let spread = k.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
        if spread > 0.1 * mean.abs() {
            log::warn!("K_i spread {:.1}% exceeds 10%; uniform-K reduction is approximate", 100.0 * spread / mean.abs());
        }
        let n = p.n_per_array;
        let circ = |s: usize| {
            p.force_phase[s * n..(s + 1) * n]
                .iter()
                .map(|&a| Complex64::from_polar(1.0, a))
                .sum::<Complex64>()
                .arg()
        };
        Ok(Self {
            epsilon,
            gamma: p.gamma,
            mu: p.mu,
            mass: p.mass,
            omega_bar: p.omega_bar,
            k_drive: mean,
            drive_phase: [circ(0), circ(1)],
        })
    }
}

/// Magnitudes and rotating-frame mean phases of both populations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OAState {
    pub rho: [f64; 2],
    pub psi: [f64; 2],
}

impl OAState {
    pub fn from_complex(z: [Complex64; 2]) -> Self {
        Self {
            rho: [z[0].norm(), z[1].norm()],
            psi: [z[0].arg(), z[1].arg()],
        }
    }

    pub fn to_complex(&self) -> [Complex64; 2] {
        [
            Complex64::from_polar(self.rho[0], self.psi[0]),
            Complex64::from_polar(self.rho[1], self.psi[1]),
        ]
    }

    /// ΔΨ = Ψ₁ − Ψ₂ wrapped to (−π, π].
    pub fn delta_psi(&self) -> f64 {
        crate::phase_model::wrap(self.psi[0] - self.psi[1])
    }
}

fn coupling_fields(z: [Complex64; 2], p: &OAParams) -> ([Complex64; 2], Complex64) {
    let w = z[0] + z[1];
    let c2 = p.c2();
    let half_l = Complex64::new(0.0, 0.5 * p.lambda());
    let common = half_l * w + c2 * (z[0] * z[0] + z[1] * z[1]) * w.conj() - 2.0 * c2 * w;
    let h = [
        p.k_drive * Complex64::from_polar(1.0, p.drive_phase[0]) + common,
        p.k_drive * Complex64::from_polar(1.0, p.drive_phase[1]) + common,
    ];
    (h, c2 * w * w)
}

/// Time derivative of both complex order parameters (rad/s).
pub fn oa_rhs_complex(z: [Complex64; 2], p: &OAParams) -> [Complex64; 2] {
    let (h, h2) = coupling_fields(z, p);
    let mut out = [Complex64::new(0.0, 0.0); 2];
    for s in 0..2 {
        let zs = z[s];
        out[s] = -p.epsilon * zs + 0.5 * (h[s] - h[s].conj() * zs * zs) + 0.5 * (zs.conj() * h2 - h2.conj() * zs * zs * zs);
    }
    out
}

/// Time derivative of (ρ_σ, Ψ_σ). At ρ_σ = 0 the phase velocity is
/// undefined and reported as zero.
pub fn oa_rhs(state: &OAState, params: &OAParams, _t: f64) -> OAState {
    let z = state.to_complex();
    let dz = oa_rhs_complex(z, params);
    let mut d = OAState { rho: [0.0; 2], psi: [0.0; 2] };
    for s in 0..2 {
        let rot = dz[s] * Complex64::from_polar(1.0, -state.psi[s]);
        d.rho[s] = rot.re;
        d.psi[s] = if state.rho[s] > 0.0 { rot.im / state.rho[s] } else { 0.0 };
    }
    d
}

/// Rotating-frame phase velocity of an oscillator of population `sigma`
/// with natural frequency `omega` at phase `theta`, given the mean fields.
pub fn phase_velocity_field(sigma: usize, theta: f64, omega: f64, z: [Complex64; 2], params: &OAParams) -> f64 {
    let (h, h2) = coupling_fields(z, params);
    let e = Complex64::from_polar(1.0, -theta);
    (params.omega_bar - omega) + (h[sigma] * e).im + (h2 * e * e).im
}

/// ρ* = −2ε/Γ + √(1 + (2ε/Γ)²).
pub fn uncoupled_fixed_point(epsilon: f64, gamma: f64) -> f64 {
    let q = 2.0 * epsilon / gamma;
    -q + (1.0 + q * q).sqrt()
}

/// ρ₂ on the chimera branch:
/// ρ₂ = √[(1 − εΓ(2mΩ̄/μ)²)/cos(2ΔΨ)].
pub fn chimera_branch_rho2(epsilon: f64, gamma: f64, mu: f64, mass: f64, omega_bar: f64, delta_psi: f64) -> Result<f64> {
    let q = if epsilon == 0.0 {
        0.0
    } else {
        epsilon * gamma * (2.0 * mass * omega_bar / mu).powi(2)
    };
    if !(q <= 1.0) {
        return Err(Error::Domain(format!("no chimera branch: εΓ(2mΩ̄/μ)² = {q:.4} exceeds 1")));
    }
    let r = delta_psi - std::f64::consts::PI * (delta_psi / std::f64::consts::PI).round();
    if r.abs() >= std::f64::consts::FRAC_PI_4 {
        return Err(Error::Domain(format!(
            "ΔΨ = {delta_psi:.4} is outside the branch window |ΔΨ| < π/4 (mod π)"
        )));
    }
    let rho2 = ((1.0 - q) / (2.0 * r).cos()).sqrt();
    if rho2 > 1.0 + 1e-12 {
        return Err(Error::Domain(format!("branch value ρ₂ = {rho2:.6} exceeds 1")));
    }
    Ok(rho2.min(1.0))
}

/// Lorentzian quantile Ω̄ + ε·tan(π(u − ½)). Requires 0 < u < 1.
pub fn sample_lorentzian(omega_bar: f64, epsilon: f64, u: f64) -> f64 {
    assert!(u > 0.0 && u < 1.0, "uniform deviate must lie in (0, 1)");
    omega_bar + epsilon * (std::f64::consts::PI * (u - 0.5)).tan()
}

/// Stratified Lorentzian sample: the quantiles at u_k = (k − ½)/n.
pub fn lorentzian_quantiles(omega_bar: f64, epsilon: f64, n: usize) -> Vec<f64> {
    (1..=n)
        .map(|k| sample_lorentzian(omega_bar, epsilon, (k as f64 - 0.5) / n as f64))
        .collect()
}

/// `n` phases whose empirical distribution is the Poisson kernel with
/// first moment ρe^{iΨ}: stratified quantiles of the wrapped Cauchy law in
/// an order shuffled by `seed`, so that pairing them with a frequency list
/// carries no correlation.
pub fn poisson_kernel_phases(rho: f64, psi: f64, n: usize, seed: u64) -> Vec<f64> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    assert!((0.0..1.0).contains(&rho), "ρ must lie in [0, 1)");
    let r = (1.0 - rho) / (1.0 + rho);
    let mut out: Vec<f64> = (1..=n)
        .map(|k| {
            let u = (k as f64 - 0.5) / n as f64;
            psi + 2.0 * (r * (std::f64::consts::PI * (u - 0.5)).tan()).atan()
        })
        .collect();
    out.shuffle(&mut rand_chacha::ChaCha20Rng::seed_from_u64(seed));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Unstable,
    Marginal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    /// Drive-frame state; for relative equilibria the gauge is Ψ₁ = 0.
    pub state: OAState,
    /// Common rotation rate of a relative equilibrium (rad/s); zero for a
    /// drive-frame fixed point.
    pub rotation: f64,
    pub stability: Stability,
    /// Jacobian eigenvalues in units of Γ, sorted by decreasing real part.
    /// For relative equilibria the neutral gauge mode is removed.
    pub eigenvalues: Vec<Complex64>,
    /// Max-norm of the flow at the point, in units of Γ.
    pub residual: f64,
}

impl FixedPoint {
    pub fn leading_eigenvalue(&self) -> Complex64 {
        self.eigenvalues[0]
    }
}

/// Result of a multi-seed root search. Failed seeds are listed by index.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointSearch {
    pub points: Vec<FixedPoint>,
    pub failures: Vec<(usize, String)>,
}

/// Eigenvalue real parts (units of Γ) within this band are inconclusive.
pub const STABILITY_BAND: f64 = 1e-6;
/// Points closer than this (Cartesian max-norm) are merged.
pub const DEDUP_TOL: f64 = 1e-8;
/// Newton stops once the scaled residual drops below this.
const NEWTON_TOL: f64 = 1e-13;
const NEWTON_MAX_ITER: usize = 200;

fn to_vec4(z: [Complex64; 2]) -> Vector4<f64> {
    Vector4::new(z[0].re, z[0].im, z[1].re, z[1].im)
}

fn from_vec4(u: &Vector4<f64>) -> [Complex64; 2] {
    [Complex64::new(u[0], u[1]), Complex64::new(u[2], u[3])]
}

/// Flow in Cartesian coordinates, in units of Γ.
fn scaled_flow(u: &Vector4<f64>, p: &OAParams) -> Vector4<f64> {
    to_vec4(oa_rhs_complex(from_vec4(u), p)) / p.gamma
}

/// Multiplication by i on both Cartesian pairs.
fn rotation_generator() -> Matrix4<f64> {
    let mut r = Matrix4::zeros();
    r[(1, 0)] = 1.0;
    r[(0, 1)] = -1.0;
    r[(3, 2)] = 1.0;
    r[(2, 3)] = -1.0;
    r
}

fn numeric_jacobian(u: &Vector4<f64>, f: impl Fn(&Vector4<f64>) -> Vector4<f64>) -> Matrix4<f64> {
    let h = 1e-6;
    let mut j = Matrix4::zeros();
    for c in 0..4 {
        let mut up = *u;
        let mut dn = *u;
        up[c] += h;
        dn[c] -= h;
        j.set_column(c, &((f(&up) - f(&dn)) / (2.0 * h)));
    }
    j
}

/// Max-norm of the flow at `state`, in units of Γ.
pub fn flow_residual(state: &OAState, params: &OAParams) -> f64 {
    scaled_flow(&to_vec4(state.to_complex()), params).amax()
}

/// Max-norm, in units of Γ, of the flow seen from a frame rotating at
/// `rotation` rad/s.
pub fn corotating_residual(state: &OAState, rotation: f64, params: &OAParams) -> f64 {
    let u = to_vec4(state.to_complex());
    (scaled_flow(&u, params) - rotation_generator() * u * (rotation / params.gamma)).amax()
}

fn newton(mut u: Vector4<f64>, f: impl Fn(&Vector4<f64>) -> Vector4<f64>) -> Result<Vector4<f64>> {
    let mut r = f(&u);
    for _ in 0..NEWTON_MAX_ITER {
        let norm = r.amax();
        if !norm.is_finite() {
            return Err(Error::Domain("Newton iterate left the finite range".into()));
        }
        if norm < NEWTON_TOL {
            return Ok(u);
        }
        let step = numeric_jacobian(&u, &f)
            .lu()
            .solve(&(-r))
            .ok_or_else(|| Error::Domain("singular Jacobian".into()))?;
        // backtracking on the residual norm
        let mut damping = 1.0;
        loop {
            let trial = u + step * damping;
            let rt = f(&trial);
            if rt.amax() < norm || damping < 1e-6 {
                u = trial;
                r = rt;
                break;
            }
            damping *= 0.5;
        }
    }
    if r.amax() < 1e-10 {
        Ok(u)
    } else {
        Err(Error::Domain(format!("Newton did not converge (residual {:.3e})", r.amax())))
    }
}

fn sorted_eigenvalues(j: &Matrix4<f64>) -> Vec<Complex64> {
    let mut ev: Vec<Complex64> = j
        .complex_eigenvalues()
        .iter()
        .map(|c| Complex64::new(c.re, c.im))
        .collect();
    ev.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    ev
}

/// Stability and residual of a (relative) equilibrium given in the drive
/// frame together with its rotation rate.
pub fn classify_point(state: &OAState, rotation: f64, p: &OAParams) -> FixedPoint {
    classify(state.to_complex(), rotation, p)
}

fn classify(z: [Complex64; 2], rotation: f64, p: &OAParams) -> FixedPoint {
    let incoherent = z.iter().all(|z| z.norm() < 1e-9);
    let rotation = if incoherent { 0.0 } else { rotation };
    let u = to_vec4(z);
    let w = rotation / p.gamma;
    let rot = rotation_generator();
    let j = numeric_jacobian(&u, |v| scaled_flow(v, p) - rot * v * w);
    let mut ev = sorted_eigenvalues(&j);
    if !incoherent && (rotation != 0.0 || p.k_drive == 0.0) {
        // drop the neutral mode of the rotation symmetry
        let k = (0..ev.len()).min_by(|&a, &b| ev[a].norm().total_cmp(&ev[b].norm())).unwrap();
        ev.remove(k);
    }
    let stability = if ev[0].re > STABILITY_BAND {
        Stability::Unstable
    } else if ev[0].re < -STABILITY_BAND {
        Stability::Stable
    } else {
        Stability::Marginal
    };
    FixedPoint {
        state: OAState::from_complex(z),
        rotation,
        stability,
        eigenvalues: ev,
        residual: (scaled_flow(&u, p) - rot * u * w).amax(),
    }
}

/// Converge one seed. With a drive (K ≠ 0) the unknowns are the Cartesian
/// components of Z₁, Z₂. Without a drive the flow commutes with rotations,
/// so the roots are relative equilibria: the unknowns are (Re Z₁, Z₂, ω)
/// with the gauge Im Z₁ = 0, and the equations are Ż = iωZ.
fn solve_seed(seed: &OAState, p: &OAParams) -> Result<([Complex64; 2], f64)> {
    let z0 = seed.to_complex();
    if p.k_drive != 0.0 {
        let u = newton(to_vec4(z0), |u| scaled_flow(u, p))?;
        return Ok((from_vec4(&u), 0.0));
    }
    let unpack = |u: &Vector4<f64>| [Complex64::new(u[0], 0.0), Complex64::new(u[1], u[2])];
    // rotate the seed into the gauge and start from its instantaneous rate
    let g = if z0[0].norm() > 0.0 { z0[0].conj() / z0[0].norm() } else { Complex64::new(1.0, 0.0) };
    let (z1, z2) = (z0[0] * g, z0[1] * g);
    let dz = oa_rhs_complex([z1, z2], p);
    let w0 = if z1.norm() > 0.0 { (dz[0] / z1).im / p.gamma } else { 0.0 };
    let u = newton(Vector4::new(z1.re, z2.re, z2.im, w0), |u| {
        let z = unpack(u);
        let dz = oa_rhs_complex(z, p);
        let r0 = (dz[0] - Complex64::new(0.0, u[3] * p.gamma) * z[0]) / p.gamma;
        let r1 = (dz[1] - Complex64::new(0.0, u[3] * p.gamma) * z[1]) / p.gamma;
        Vector4::new(r0.re, r0.im, r1.re, r1.im)
    })?;
    let mut z = unpack(&u);
    if z[0].re < 0.0 {
        z = [-z[0], -z[1]];
    }
    Ok((z, u[3] * p.gamma))
}

/// Damped-Newton search for fixed points from every seed, in parallel.
///
/// With K ≠ 0 these are fixed points of the drive-frame flow. With K = 0
/// they are relative equilibria, i.e. fixed points of (ρ₁, ρ₂, ΔΨ), found
/// in the frame co-rotating with the populations. Roots outside the unit
/// disk are reported as failures.
pub fn find_fixed_points(params: &OAParams, seeds: &[OAState]) -> Result<FixedPointSearch> {
    params.validate()?;
    let outcomes: Vec<Result<([Complex64; 2], f64)>> = seeds.par_iter().map(|s| solve_seed(s, params)).collect();
    let mut roots: Vec<([Complex64; 2], f64)> = Vec::new();
    let mut failures = Vec::new();
    for (k, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok((z, w)) => {
                let u = to_vec4(z);
                if z.iter().any(|z| z.norm() > 1.0 + 1e-9) {
                    failures.push((k, format!("root outside the unit disk (ρ = {:.6}, {:.6})", z[0].norm(), z[1].norm())));
                } else if !roots.iter().any(|(r, _)| (to_vec4(*r) - u).amax() < DEDUP_TOL) {
                    roots.push((z, w));
                }
            }
            Err(e) => failures.push((k, e.to_string())),
        }
    }
    roots.sort_by(|(a, _), (b, _)| {
        to_vec4(*a)
            .iter()
            .zip(to_vec4(*b).iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(FixedPointSearch {
        points: roots.iter().map(|&(z, w)| classify(z, w, params)).collect(),
        failures,
    })
}

/// Seeds on a polar grid: `n_rho` magnitudes in (0, 1] per population and
/// `n_psi` phases per population.
pub fn seed_grid(n_rho: usize, n_psi: usize) -> Vec<OAState> {
    let rhos: Vec<f64> = (1..=n_rho).map(|k| k as f64 / n_rho as f64).collect();
    let psis: Vec<f64> = (0..n_psi)
        .map(|k| -std::f64::consts::PI + std::f64::consts::TAU * (k as f64 + 0.5) / n_psi as f64)
        .collect();
    let mut out = Vec::new();
    for &r1 in &rhos {
        for &r2 in &rhos {
            for &p1 in &psis {
                for &p2 in &psis {
                    out.push(OAState { rho: [r1, r2], psi: [p1, p2] });
                }
            }
        }
    }
    out
}

/// Is the point on the chimera branch, i.e. are the two populations
/// unequally coherent?
pub fn is_chimera_branch(fp: &FixedPoint) -> bool {
    (fp.state.rho[0] - fp.state.rho[1]).abs() > 1e-6
}

/// |ρ_incoherent − ρ₂(ΔΨ)| for a chimera-branch point, taking the more
/// coherent population as the synchronized one.
pub fn chimera_branch_residual(fp: &FixedPoint, p: &OAParams) -> Result<f64> {
    let lo = if fp.state.rho[0] < fp.state.rho[1] { 0 } else { 1 };
    let branch = chimera_branch_rho2(p.epsilon, p.gamma, p.mu, p.mass, p.omega_bar, fp.state.delta_psi())?;
    Ok((fp.state.rho[lo] - branch).abs())
}

/// Write a fixed-point table as CSV.
pub fn write_fixed_points_csv<W: std::io::Write>(mut w: W, p: &OAParams, points: &[FixedPoint]) -> Result<()> {
    writeln!(
        w,
        "epsilon,gamma,mu,k_drive,rho_1,rho_2,delta_psi,rotation,leading_eigenvalue_re,leading_eigenvalue_im,stability"
    )?;
    for fp in points {
        let ev = fp.leading_eigenvalue();
        let stab = match fp.stability {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
            Stability::Marginal => "marginal",
        };
        writeln!(
            w,
            "{:e},{:e},{:e},{:e},{:.12},{:.12},{:.12},{:e},{:e},{:e},{}",
            p.epsilon,
            p.gamma,
            p.mu,
            p.k_drive,
            fp.state.rho[0],
            fp.state.rho[1],
            fp.state.delta_psi(),
            fp.rotation,
            ev.re,
            ev.im,
            stab
        )?;
    }
    Ok(())
}

/// OA flow as an [`OdeSystem`] on (Re Z₁, Im Z₁, Re Z₂, Im Z₂).
#[derive(Debug, Clone)]
pub struct OaSystem<'a>(pub &'a OAParams);

impl OdeSystem for OaSystem<'_> {
    fn dim(&self) -> usize {
        4
    }
    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let z = [Complex64::new(y[0], y[1]), Complex64::new(y[2], y[3])];
        let d = oa_rhs_complex(z, self.0);
        dy[0] = d[0].re;
        dy[1] = d[0].im;
        dy[2] = d[1].re;
        dy[3] = d[1].im;
    }
}

/// Sampled OA trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct OaTrajectory {
    /// Times (s).
    pub times: Vec<f64>,
    pub states: Vec<OAState>,
}

/// Integrate the flow with RK4 from `state0` up to `t_end` seconds.
///
/// Rounding can push |Z| a few ulps past 1 at the boundary; such values are
/// projected back onto the unit circle.
pub fn integrate_oa(state0: &OAState, params: &OAParams, t_end: f64, dt: f64, sample_every: usize) -> Result<OaTrajectory> {
    params.validate()?;
    let cfg = IntegratorConfig {
        method: Method::Rk4Fixed,
        dt,
        sample_every,
        t_end,
        ..IntegratorConfig::default()
    };
    let y0 = to_vec4(state0.to_complex());
    let s = integrate_system_with(&OaSystem(params), y0.as_slice(), &cfg, |y| {
        for k in 0..2 {
            let r = y[2 * k].hypot(y[2 * k + 1]);
            if r > 1.0 {
                y[2 * k] /= r;
                y[2 * k + 1] /= r;
            }
        }
    })?;
    Ok(OaTrajectory {
        states: s
            .rows()
            .map(|r| OAState::from_complex([Complex64::new(r[0], r[1]), Complex64::new(r[2], r[3])]))
            .collect(),
        times: s.times,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(eps_g: f64, lambda_g: f64) -> OAParams {
        let gamma = 1.0e3;
        let (mass, wbar) = (1.0, 1.0e6);
        OAParams::new(eps_g * gamma, gamma, lambda_g * gamma * mass * wbar, mass, wbar)
    }

    #[test]
    fn closed_form_values() {
        assert_eq!(uncoupled_fixed_point(0.0, 1.0), 1.0);
        assert_relative_eq!(uncoupled_fixed_point(0.5, 1.0), 2f64.sqrt() - 1.0, max_relative = 1e-15);
    }

    #[test]
    fn uncoupled_flow_vanishes_at_rho_star() {
        let p = params(0.3, 0.0);
        let r = uncoupled_fixed_point(p.epsilon, p.gamma);
        let s = OAState { rho: [r, r], psi: [0.0, 0.0] };
        assert!(flow_residual(&s, &p) < 1e-14);
    }

    #[test]
    fn in_and_anti_phase_zeros_without_disorder() {
        let p = params(0.0, 0.2);
        // anti-phase: W = 0, so each population sits on its drive phase
        let anti = OAState { rho: [1.0, 1.0], psi: [0.0, std::f64::consts::PI] };
        assert!(flow_residual(&anti, &p) < 1e-12);
        // in-phase: the common phase lags the drive by asin(λ/K)
        let psi = (p.lambda() / p.k_drive).asin();
        let inphase = OAState { rho: [1.0, 1.0], psi: [psi, psi] };
        assert!(flow_residual(&inphase, &p) < 1e-12);
    }

    #[test]
    fn branch_examples() {
        let (mass, wbar, gamma) = (1.0, 1.0, 1.0);
        assert_eq!(chimera_branch_rho2(0.0, gamma, 1.0, mass, wbar, 0.0).unwrap(), 1.0);
        // εΓ(2mΩ̄/μ)² = 0.19 with μ = 2, ε = 0.19
        assert_relative_eq!(chimera_branch_rho2(0.19, gamma, 2.0, mass, wbar, 0.0).unwrap(), 0.9, max_relative = 1e-14);
        assert!(matches!(chimera_branch_rho2(2.0, gamma, 2.0, mass, wbar, 0.0), Err(Error::Domain(_))));
        assert!(chimera_branch_rho2(0.0, gamma, 1.0, mass, wbar, 1.0).is_err());
        // near π the window wraps
        let wrapped = chimera_branch_rho2(0.19, gamma, 2.0, mass, wbar, std::f64::consts::PI - 0.1).unwrap();
        let direct = chimera_branch_rho2(0.19, gamma, 2.0, mass, wbar, -0.1).unwrap();
        assert_relative_eq!(wrapped, direct, max_relative = 1e-12);
        // ρ₂ > 1 is rejected
        assert!(chimera_branch_rho2(0.0, gamma, 1.0, mass, wbar, 0.5).is_err());
    }

    #[test]
    fn lorentzian_quantiles() {
        assert_eq!(sample_lorentzian(5.0, 2.0, 0.5), 5.0);
        assert_relative_eq!(sample_lorentzian(5.0, 2.0, 0.75), 7.0, max_relative = 1e-14);
    }

    #[test]
    fn velocity_field_trivial() {
        let mut p = params(0.0, 0.0);
        p.k_drive = 0.0;
        let z = [Complex64::new(0.3, 0.2), Complex64::new(-0.1, 0.5)];
        assert_eq!(phase_velocity_field(0, 1.2, p.omega_bar + 7.0, z, &p), -7.0);
    }

    #[test]
    fn fixed_point_search_recovers_uncoupled_point() {
        let p = params(0.2, 0.0);
        let res = find_fixed_points(&p, &seed_grid(3, 4)).unwrap();
        let r = uncoupled_fixed_point(p.epsilon, p.gamma);
        let stable: Vec<_> = res.points.iter().filter(|f| f.stability == Stability::Stable).collect();
        assert_eq!(stable.len(), 1);
        assert_relative_eq!(stable[0].state.rho[0], r, max_relative = 1e-10);
        assert_relative_eq!(stable[0].state.rho[1], r, max_relative = 1e-10);
    }

    #[test]
    fn csv_export_has_header_and_rows() {
        let p = params(0.2, 0.0);
        let res = find_fixed_points(&p, &seed_grid(2, 2)).unwrap();
        let mut buf = Vec::new();
        write_fixed_points_csv(&mut buf, &p, &res.points).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), res.points.len() + 1);
        assert!(text.starts_with("epsilon,"));
    }
}
