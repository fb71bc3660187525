//! The single TOML run file read by the command-line tool.
//!
//! Relative units keep the file readable: disorder widths and OA rates are
//! in multiples of Γ, coupling strengths in multiples of mΩ̄², and
//! integration horizons in mean mechanical periods.

use std::f64::consts::TAU;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::AnalysisConfig;
use crate::continuum::OAParams;
use crate::error::{Error, Result};
use crate::integrator::{IntegratorConfig, Method};
use crate::model::{reference, SystemConfig};
use crate::sweep::{Distribution, Ensemble, InitialConditions, SweepGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorSection {
    pub method: Method,
    pub steps_per_period: f64,
    pub periods: f64,
    pub sample_every: usize,
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl Default for IntegratorSection {
    fn default() -> Self {
        let d = IntegratorConfig::default();
        Self {
            method: d.method,
            steps_per_period: crate::integrator::STEPS_PER_PERIOD,
            periods: 2000.0,
            sample_every: d.sample_every,
            rel_tol: d.rel_tol,
            abs_tol: d.abs_tol,
        }
    }
}

impl IntegratorSection {
    pub fn to_config(&self) -> IntegratorConfig {
        IntegratorConfig {
            method: self.method,
            dt: TAU / self.steps_per_period,
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            sample_every: self.sample_every,
            t_end: self.periods * TAU,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepSection {
    /// Disorder widths in units of Γ.
    pub sigma_gamma: Vec<f64>,
    /// Photon numbers |α_max|².
    pub photons: Vec<f64>,
    /// Coupling scales in units of mΩ̄².
    pub mu_relative: Vec<f64>,
    pub realizations: Vec<u64>,
    /// Initial-condition seeds 1..=seeds per point.
    pub seeds: u64,
    pub distribution: Distribution,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            sigma_gamma: vec![5.0],
            photons: vec![1e11],
            mu_relative: vec![0.0],
            realizations: vec![1],
            seeds: 8,
            distribution: Distribution::Gaussian,
            workers: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OaSection {
    /// Lorentzian half-width in units of Γ.
    pub epsilon_gamma: f64,
    /// Coupling scale in units of mΩ̄².
    pub mu_relative: f64,
    /// Locking constant in units of Γ.
    pub k_drive_gamma: f64,
    pub drive_phase: [f64; 2],
    /// Root-search seeds: magnitudes and phases per population.
    pub seed_rho: usize,
    pub seed_psi: usize,
    /// Initial state and horizon (mean periods) of `oa integrate`.
    pub rho0: [f64; 2],
    pub psi0: [f64; 2],
    pub periods: f64,
    pub steps_per_period: f64,
    pub sample_every: usize,
}

impl Default for OaSection {
    fn default() -> Self {
        Self {
            epsilon_gamma: 0.1,
            mu_relative: 1e-3,
            k_drive_gamma: 0.5,
            drive_phase: [0.0; 2],
            seed_rho: 4,
            seed_psi: 8,
            rho0: [0.3, 0.6],
            psi0: [0.0, 1.0],
            periods: 3000.0,
            steps_per_period: 4.0,
            sample_every: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub system: SystemConfig,
    #[serde(default)]
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub initial_conditions: InitialConditions,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub oa: OaSection,
}

impl RunConfig {
    /// Reference device at 10¹¹ photons with no coupling.
    pub fn reference() -> Self {
        Self {
            system: SystemConfig::reference(1e11f64.sqrt(), 0.0),
            integrator: IntegratorSection::default(),
            initial_conditions: InitialConditions::default(),
            analysis: AnalysisConfig::default(),
            sweep: SweepSection::default(),
            oa: OaSection::default(),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let c: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml_string().as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        self.integrator.to_config().validate()?;
        self.analysis.validate()?;
        if !(self.initial_conditions.amplitude.is_finite() && self.initial_conditions.amplitude >= 0.0) {
            return Err(Error::Config("initial_conditions.amplitude must be non-negative".into()));
        }
        if self.sweep.seeds == 0 {
            return Err(Error::Config("sweep.seeds must be at least 1".into()));
        }
        Ok(())
    }

    pub fn gamma(&self) -> f64 {
        self.system.mechanical.gamma
    }

    /// μ in N/m for a coupling given in units of mΩ̄².
    pub fn mu_from_relative(&self, rel: f64) -> f64 {
        let w = self.system.omega_bar();
        rel * self.system.mechanical.mass * w * w
    }

    pub fn grid(&self) -> SweepGrid {
        let g = self.gamma();
        SweepGrid {
            sigma: self.sweep.sigma_gamma.iter().map(|s| s * g).collect(),
            photons: self.sweep.photons.clone(),
            mu: self.sweep.mu_relative.iter().map(|&m| self.mu_from_relative(m)).collect(),
            realizations: self.sweep.realizations.clone(),
            distribution: self.sweep.distribution,
            base: self.system.clone(),
        }
    }

    pub fn ensemble(&self) -> Ensemble {
        Ensemble {
            integrator: self.integrator.to_config(),
            initial_conditions: self.initial_conditions,
            analysis: self.analysis.clone(),
            seeds: (1..=self.sweep.seeds).collect(),
        }
    }

    pub fn oa_params(&self) -> OAParams {
        let g = self.gamma();
        let mut p = OAParams::new(
            self.oa.epsilon_gamma * g,
            g,
            self.mu_from_relative(self.oa.mu_relative),
            self.system.mechanical.mass,
            self.system.omega_bar(),
        );
        p.k_drive = self.oa.k_drive_gamma * g;
        p.drive_phase = self.oa.drive_phase;
        p
    }
}

/// Relative coupling at the upper end of the explored range.
pub const MU_MAX_RELATIVE: f64 = reference::MU_MAX_RELATIVE;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_round_trips() {
        let c = RunConfig::reference();
        let back = RunConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(c, back);
        assert_eq!(c.hash(), back.hash());
    }

    #[test]
    fn sections_are_optional() {
        let sys = SystemConfig::reference(1.0, 0.0).to_toml_string();
        let text = format!("[system]\n{}", sys.replace("\n[", "\n[system."));
        let c = RunConfig::from_toml_str(&text).unwrap();
        assert_eq!(c.sweep, SweepSection::default());
        assert_eq!(c.integrator, IntegratorSection::default());
    }

    #[test]
    fn relative_units_convert() {
        let c = RunConfig::reference();
        let w = c.system.omega_bar();
        assert_eq!(c.mu_from_relative(1.0), c.system.mechanical.mass * w * w);
        let grid = c.grid();
        assert_eq!(grid.sigma, vec![5.0 * c.gamma()]);
        assert_eq!(c.ensemble().seeds, (1..=8).collect::<Vec<u64>>());
    }
}
