//! Parameter grids over (disorder width, optical power, coupling), disorder
//! realizations, ensemble runs and result tables.
//!
//! Random numbers come from ChaCha20 (`rand_chacha::ChaCha20Rng`) seeded
//! with `seed_from_u64`. Disorder uses the realization seed; initial
//! conditions use the run seed. Gaussian deviates are `rand_distr`'s
//! `StandardNormal`.

use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{analyze_run, classify_region, AnalysisConfig, ChimeraReport, FrequencyReference, Region, RunDiagnostics};
use crate::continuum::sample_lorentzian;
use crate::error::{Error, Result};
use crate::integrator::{integrate_scaled, IntegratorConfig, Trajectory};
use crate::model::{build_system, optical_steady_state, ScaledState, SystemConfig, ValidatedSystem};
use crate::phase_model::calibrate_amplitudes;

/// Name of the generator recorded in manifests.
pub const RNG_NAME: &str = "ChaCha20 (rand_chacha, seed_from_u64)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    #[default]
    Gaussian,
    /// Lorentzian with half-width equal to the requested width.
    Lorentzian,
}

/// Natural frequencies shared by both arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisorderRealization {
    pub seed: u64,
    pub omega: Vec<f64>,
}

/// Draw `n` natural frequencies around `omega_bar` with width `sigma`
/// (rad/s). The list is used for both arrays.
pub fn generate_disorder(sigma: f64, n: usize, omega_bar: f64, distribution: Distribution, seed: u64) -> DisorderRealization {
    assert!(sigma >= 0.0, "disorder width must be non-negative");
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let omega = (0..n)
        .map(|_| match distribution {
            Distribution::Gaussian => {
                let z: f64 = rng.sample(StandardNormal);
                omega_bar + sigma * z
            }
            Distribution::Lorentzian => {
                let mut u: f64 = rng.random();
                while u == 0.0 {
                    u = rng.random();
                }
                sample_lorentzian(omega_bar, sigma, u)
            }
        })
        .collect();
    DisorderRealization { seed, omega }
}

/// Random initial conditions: each oscillator starts on an ellipse of
/// amplitude U(0, `amplitude`)·κ/|G| at a uniform random phase, and the
/// cavities start at their steady state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InitialConditions {
    /// Upper bound of the initial amplitude, in units of κ/|G|.
    pub amplitude: f64,
}

impl Default for InitialConditions {
    fn default() -> Self {
        Self { amplitude: 1.0 }
    }
}

pub fn initial_state(system: &ValidatedSystem, seed: u64, ic: &InitialConditions) -> ScaledState {
    let n = system.n_per_array();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut y = ScaledState::zeros(n);
    for k in 0..2 * n {
        let a = ic.amplitude * rng.random::<f64>();
        let th = std::f64::consts::TAU * rng.random::<f64>();
        let w = system.omega()[k % n] / system.omega_bar();
        y.x_mut()[k] = a * th.cos();
        y.v_mut()[k] = -a * w * th.sin();
    }
    let alpha = optical_steady_state(y.x(), system);
    y.set_alpha(0, alpha[0]);
    y.set_alpha(1, alpha[1]);
    y
}

/// Integrate one ensemble member.
pub fn simulate(system: &ValidatedSystem, seed: u64, ic: &InitialConditions, integrator: &IntegratorConfig) -> Result<Trajectory> {
    integrate_scaled(&initial_state(system, seed, ic), system, integrator, Some(seed))
}

/// One grid coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    /// Disorder width (rad/s).
    pub sigma: f64,
    /// Photon number |α_max|².
    pub photons: f64,
    /// Coupling scale μ (N/m).
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub sigma: Vec<f64>,
    pub photons: Vec<f64>,
    pub mu: Vec<f64>,
    /// Disorder realization seeds evaluated at every point.
    pub realizations: Vec<u64>,
    pub distribution: Distribution,
    pub base: SystemConfig,
}

impl SweepGrid {
    pub fn validate(&self) -> Result<()> {
        for (name, axis) in [("sigma", &self.sigma), ("photons", &self.photons), ("mu", &self.mu)] {
            if axis.is_empty() {
                return Err(Error::Config(format!("sweep axis '{name}' is empty")));
            }
            if axis.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::Config(format!("sweep axis '{name}' needs finite non-negative values")));
            }
        }
        if self.realizations.is_empty() {
            return Err(Error::Config("at least one disorder realization is required".into()));
        }
        Ok(())
    }

    /// Reference mean frequency of the base configuration.
    pub fn omega_bar(&self) -> f64 {
        self.base.omega_bar()
    }

    /// All (point, realization) tasks in canonical order.
    pub fn tasks(&self) -> Vec<(GridPoint, u64)> {
        let mut out = Vec::new();
        for &sigma in &self.sigma {
            for &photons in &self.photons {
                for &mu in &self.mu {
                    for &r in &self.realizations {
                        out.push((GridPoint { sigma, photons, mu }, r));
                    }
                }
            }
        }
        out
    }
}

/// Per-run settings shared by every member of an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub integrator: IntegratorConfig,
    pub initial_conditions: InitialConditions,
    pub analysis: AnalysisConfig,
    pub seeds: Vec<u64>,
}

/// Result of one (point, realization).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub point: GridPoint,
    pub realization: DisorderRealization,
    pub seeds: Vec<u64>,
    pub region: Region,
    pub reason: String,
    /// Diagnostics per seed, in seed order.
    pub runs: Vec<RunDiagnostics>,
    /// Frequencies used for the Region-D test (rad/s).
    pub reference_frequencies: Vec<f64>,
    /// SHA-256 over the trajectory checksums of all seeds.
    pub checksum: String,
    pub wall_time: f64,
    pub error: Option<String>,
}

impl SweepRecord {
    /// (seed, report) for every run with a chimera verdict.
    pub fn chimeras(&self) -> Vec<(u64, &ChimeraReport)> {
        self.seeds
            .iter()
            .zip(&self.runs)
            .filter(|(_, r)| r.chimera.verdict)
            .map(|(&s, r)| (s, &r.chimera))
            .collect()
    }
}

/// System for one grid coordinate and realization.
pub fn point_system(base: &SystemConfig, point: &GridPoint, realization: &DisorderRealization) -> Result<ValidatedSystem> {
    build_system(
        base.clone()
            .with_omega(realization.omega.clone())
            .with_alpha_max(point.photons.sqrt())
            .with_mu(point.mu),
    )
}

/// Frequencies for the Region-D test under the configured reference.
pub fn reference_frequencies(system: &ValidatedSystem, ens: &Ensemble) -> Vec<f64> {
    match ens.analysis.frequency_reference {
        FrequencyReference::Bare => system.omega().to_vec(),
        FrequencyReference::SelfOscillation => match calibrate_amplitudes(system, &ens.integrator) {
            Ok(cal) => cal.frequency,
            Err(e) => {
                log::warn!("falling back to bare frequencies: {e}");
                system.omega().to_vec()
            }
        },
    }
}

/// Integrate and analyze every seed at one coordinate, then label it.
/// Failures are recorded in the returned record.
pub fn run_point(base: &SystemConfig, point: GridPoint, realization: &DisorderRealization, ens: &Ensemble) -> SweepRecord {
    let start = Instant::now();
    let mut record = SweepRecord {
        point,
        realization: realization.clone(),
        seeds: ens.seeds.clone(),
        region: Region::Indeterminate,
        reason: String::new(),
        runs: Vec::new(),
        reference_frequencies: Vec::new(),
        checksum: String::new(),
        wall_time: 0.0,
        error: None,
    };
    let system = match point_system(base, &point, realization) {
        Ok(s) => s,
        Err(e) => {
            record.reason = "invalid configuration".into();
            record.error = Some(e.to_string());
            return record;
        }
    };
    let outcomes: Vec<Result<(RunDiagnostics, String)>> = ens
        .seeds
        .par_iter()
        .map(|&seed| {
            let traj = simulate(&system, seed, &ens.initial_conditions, &ens.integrator)?;
            let diag = analyze_run(&traj, &system, &ens.analysis)?;
            Ok((diag, traj.checksum()))
        })
        .collect();
    let mut hasher = Sha256::new();
    for (seed, o) in ens.seeds.iter().zip(outcomes) {
        match o {
            Ok((d, sum)) => {
                hasher.update(sum.as_bytes());
                record.runs.push(d);
            }
            Err(e) => {
                record.error = Some(format!("seed {seed}: {e}"));
                break;
            }
        }
    }
    record.checksum = hex::encode(hasher.finalize());
    if record.error.is_none() {
        record.reference_frequencies = reference_frequencies(&system, ens);
        let label = classify_region(&record.runs, &record.reference_frequencies, system.config().mechanical.gamma, &ens.analysis);
        record.region = label.region;
        record.reason = label.reason;
    } else {
        record.reason = "integration failed".into();
    }
    record.wall_time = start.elapsed().as_secs_f64();
    record
}

/// Evaluate every (point, realization) with `workers` threads. The output
/// is in canonical order and does not depend on the worker count.
pub fn run_sweep(grid: &SweepGrid, ens: &Ensemble, workers: usize) -> Result<Vec<SweepRecord>> {
    grid.validate()?;
    ens.integrator.validate()?;
    ens.analysis.validate()?;
    if ens.seeds.is_empty() {
        return Err(Error::Config("at least one seed is required".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let n = grid.base.mechanical.omega.len();
    let omega_bar = grid.omega_bar();
    let mut records: Vec<SweepRecord> = pool.install(|| {
        grid.tasks()
            .par_iter()
            .map(|&(point, r)| {
                let real = generate_disorder(point.sigma, n, omega_bar, grid.distribution, r);
                run_point(&grid.base, point, &real, ens)
            })
            .collect()
    });
    records.sort_by(|a, b| {
        a.point
            .sigma
            .total_cmp(&b.point.sigma)
            .then(a.point.photons.total_cmp(&b.point.photons))
            .then(a.point.mu.total_cmp(&b.point.mu))
            .then(a.realization.seed.cmp(&b.realization.seed))
    });
    Ok(records)
}

/// One chimera verdict of a scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChimeraHit {
    pub point: GridPoint,
    pub realization: u64,
    pub seed: u64,
    pub report: ChimeraReport,
}

/// Run a sweep and collect every chimera verdict.
pub fn chimera_scan(grid: &SweepGrid, ens: &Ensemble, workers: usize) -> Result<(Vec<SweepRecord>, Vec<ChimeraHit>)> {
    let records = run_sweep(grid, ens, workers)?;
    let hits = records
        .iter()
        .flat_map(|rec| {
            rec.chimeras().into_iter().map(|(seed, rep)| ChimeraHit {
                point: rec.point,
                realization: rec.realization.seed,
                seed,
                report: rep.clone(),
            })
        })
        .collect();
    Ok((records, hits))
}

/// Maximal runs of consecutive μ values (from `mu_axis`) at which at least
/// one chimera verdict occurred, per (σ, power).
pub fn chimera_mu_windows(hits: &[ChimeraHit], mu_axis: &[f64]) -> Vec<(f64, f64, f64, f64)> {
    let mut keys: Vec<(f64, f64)> = hits.iter().map(|h| (h.point.sigma, h.point.photons)).collect();
    keys.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    keys.dedup();
    let mut out = Vec::new();
    for (s, p) in keys {
        let mut open: Option<f64> = None;
        let mut last = 0.0;
        for &mu in mu_axis {
            let hit = hits.iter().any(|h| h.point.sigma == s && h.point.photons == p && h.point.mu == mu);
            match (hit, open) {
                (true, None) => open = Some(mu),
                (false, Some(lo)) => {
                    out.push((s, p, lo, last));
                    open = None;
                }
                _ => {}
            }
            if hit {
                last = mu;
            }
        }
        if let Some(lo) = open {
            out.push((s, p, lo, last));
        }
    }
    out
}

/// Records as CSV. Wall time is left out so equal inputs give equal bytes.
pub fn write_records_csv<W: Write>(mut w: W, records: &[SweepRecord]) -> Result<()> {
    writeln!(
        w,
        "sigma,photons,mu,realization,region,seeds,rho_1_mean,rho_2_mean,chimera_seeds,max_chimera_periods,delta_psi_mean,checksum,error"
    )?;
    for r in records {
        let mean = |f: &dyn Fn(&RunDiagnostics) -> f64| {
            if r.runs.is_empty() {
                f64::NAN
            } else {
                r.runs.iter().map(f).sum::<f64>() / r.runs.len() as f64
            }
        };
        let chim = r.chimeras();
        let seeds: Vec<String> = chim.iter().map(|(s, _)| s.to_string()).collect();
        let longest = chim.iter().map(|(_, c)| c.duration).fold(0.0, f64::max);
        writeln!(
            w,
            "{:e},{:e},{:e},{},{},{},{:.6},{:.6},{},{:.1},{:.6},{},{}",
            r.point.sigma,
            r.point.photons,
            r.point.mu,
            r.realization.seed,
            r.region,
            r.seeds.len(),
            mean(&|d| d.rho[0]),
            mean(&|d| d.rho[1]),
            seeds.join(";"),
            longest,
            mean(&|d| d.delta_psi.abs()),
            r.checksum,
            r.error.as_deref().unwrap_or("").replace([',', '\n'], ";"),
        )?;
    }
    Ok(())
}

/// Wall times per record, kept apart from the reproducible table.
pub fn write_timings_csv<W: Write>(mut w: W, records: &[SweepRecord]) -> Result<()> {
    writeln!(w, "sigma,photons,mu,realization,wall_time_s")?;
    for r in records {
        writeln!(
            w,
            "{:e},{:e},{:e},{},{:.3}",
            r.point.sigma, r.point.photons, r.point.mu, r.realization.seed, r.wall_time
        )?;
    }
    Ok(())
}

/// Region labels as a matrix: one row per photon number, one column per
/// σ, for the given μ and realization. The first row is the σ axis.
pub fn write_region_matrix<W: Write>(mut w: W, records: &[SweepRecord], mu: f64, realization: u64) -> Result<()> {
    let sel: Vec<&SweepRecord> = records
        .iter()
        .filter(|r| r.point.mu == mu && r.realization.seed == realization)
        .collect();
    let mut sig: Vec<f64> = sel.iter().map(|r| r.point.sigma).collect();
    let mut pow: Vec<f64> = sel.iter().map(|r| r.point.photons).collect();
    sig.sort_by(f64::total_cmp);
    sig.dedup();
    pow.sort_by(f64::total_cmp);
    pow.dedup();
    write!(w, "photons\\sigma")?;
    for s in &sig {
        write!(w, ",{s:e}")?;
    }
    writeln!(w)?;
    for p in &pow {
        write!(w, "{p:e}")?;
        for s in &sig {
            let lab = sel
                .iter()
                .find(|r| r.point.sigma == *s && r.point.photons == *p)
                .map_or("".to_string(), |r| r.region.to_string());
            write!(w, ",{lab}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}
