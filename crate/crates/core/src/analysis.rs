//! Phases, order parameters, spectra, region labels and chimera detection.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::Trajectory;
use crate::model::ValidatedSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseMethod {
    /// Argument of x + iH[x], with H the FFT Hilbert transform.
    AnalyticSignal,
    /// atan2(−v/Ω, x − ⟨x⟩).
    Quadrature,
}

impl std::str::FromStr for PhaseMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytic_signal" | "hilbert" => Ok(Self::AnalyticSignal),
            "quadrature" => Ok(Self::Quadrature),
            _ => Err(Error::Config(format!("unknown phase method '{s}'"))),
        }
    }
}

/// Unwrapped phases of every oscillator, increasing as +Ωt.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSeries {
    pub times: Vec<f64>,
    /// `phases[k][r]` is oscillator k at sample r.
    pub phases: Vec<Vec<f64>>,
    pub method: PhaseMethod,
}

/// Remove 2π jumps in place.
pub fn unwrap(phase: &mut [f64]) {
    let mut offset = 0.0;
    let mut prev = match phase.first() {
        Some(&p) => p,
        None => return,
    };
    for p in phase.iter_mut().skip(1) {
        let raw = *p;
        let mut d = raw - prev;
        while d > PI {
            offset -= TAU;
            d -= TAU;
        }
        while d < -PI {
            offset += TAU;
            d += TAU;
        }
        prev = raw;
        *p = raw + offset;
    }
}

/// Analytic signal of a real series (mean removed) via FFT.
pub fn analytic_signal(x: &[f64]) -> Vec<Complex64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v - mean, 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    // keep DC and Nyquist, double positive, drop negative frequencies
    let half = n / 2;
    for (k, c) in buf.iter_mut().enumerate() {
        if k == 0 || (n % 2 == 0 && k == half) {
            continue;
        }
        if k <= (n - 1) / 2 {
            *c *= 2.0;
        } else {
            *c = Complex64::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.iter().map(|c| c * scale).collect()
}

/// Unwrapped phase of one oscillator from its displacement and velocity.
/// `omega` is only used by the quadrature method.
pub fn extract_phase(x: &[f64], v: &[f64], omega: f64, method: PhaseMethod) -> Vec<f64> {
    let n = x.len();
    let mean = if n > 0 { x.iter().sum::<f64>() / n as f64 } else { 0.0 };
    let rms = (x.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n.max(1) as f64).sqrt();
    if !(rms > 1e-12 * mean.abs()) || rms == 0.0 {
        log::warn!("oscillation amplitude {rms:e} is at the noise floor; phase is undefined");
    }
    let mut phase: Vec<f64> = match method {
        PhaseMethod::Quadrature => x
            .iter()
            .zip(v)
            .map(|(&xi, &vi)| (-vi / omega).atan2(xi - mean))
            .collect(),
        PhaseMethod::AnalyticSignal => analytic_signal(x).iter().map(|z| z.arg()).collect(),
    };
    unwrap(&mut phase);
    phase
}

/// Phases of all oscillators of a trajectory. `omega` lists the natural
/// frequency of each flat oscillator index (length 2N).
pub fn extract_phases(traj: &Trajectory, omega: &[f64], method: PhaseMethod) -> PhaseSeries {
    let phases = (0..omega.len())
        .map(|k| extract_phase(&traj.displacement(k), &traj.velocity(k), omega[k], method))
        .collect();
    PhaseSeries {
        times: traj.times.clone(),
        phases,
        method,
    }
}

/// ρ = |⟨e^{iφ}⟩| and Ψ = arg⟨e^{iφ}⟩.
pub fn order_parameter(phases: &[f64]) -> (f64, f64) {
    assert!(!phases.is_empty(), "order parameter of an empty set");
    let z: Complex64 = phases.iter().map(|&p| Complex64::from_polar(1.0, p)).sum::<Complex64>() / phases.len() as f64;
    (z.norm().min(1.0), z.arg())
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderParameterSeries {
    pub times: Vec<f64>,
    pub rho: [Vec<f64>; 2],
    /// Mean phases, unwrapped.
    pub psi: [Vec<f64>; 2],
}

impl OrderParameterSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Per-array order parameters at every sample. Array σ holds flat indices
/// σN..(σ+1)N.
pub fn order_parameter_series(ph: &PhaseSeries) -> OrderParameterSeries {
    let n = ph.phases.len() / 2;
    let rows = ph.times.len();
    let mut rho = [Vec::with_capacity(rows), Vec::with_capacity(rows)];
    let mut psi = [Vec::with_capacity(rows), Vec::with_capacity(rows)];
    let mut buf = vec![0.0; n];
    for r in 0..rows {
        for s in 0..2 {
            for (i, b) in buf.iter_mut().enumerate() {
                *b = ph.phases[s * n + i][r];
            }
            let (p, a) = order_parameter(&buf);
            rho[s].push(p);
            psi[s].push(a);
        }
    }
    unwrap(&mut psi[0]);
    unwrap(&mut psi[1]);
    OrderParameterSeries {
        times: ph.times.clone(),
        rho,
        psi,
    }
}

/// Phase-locking index of a group relative to its member `leader`:
/// min over j of |⟨e^{i(φ_j − φ_leader)}⟩_t|. One for a single member.
pub fn locking_index(phases: &[&[f64]], leader: usize) -> f64 {
    let lead = phases[leader];
    phases
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != leader)
        .map(|(_, p)| {
            let z: Complex64 = p.iter().zip(lead).map(|(a, b)| Complex64::from_polar(1.0, a - b)).sum();
            z.norm() / p.len().max(1) as f64
        })
        .fold(1.0, f64::min)
}

/// Mean angular frequency of an unwrapped phase (least-squares slope).
pub fn mean_frequency(times: &[f64], phase: &[f64]) -> f64 {
    let n = times.len() as f64;
    let tm = times.iter().sum::<f64>() / n;
    let pm = phase.iter().sum::<f64>() / n;
    let (mut num, mut den) = (0.0, 0.0);
    for (t, p) in times.iter().zip(phase) {
        num += (t - tm) * (p - pm);
        den += (t - tm) * (t - tm);
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// One-sided Welch spectra.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    /// Angular frequencies (rad/s).
    pub frequencies: Vec<f64>,
    /// Power density per signal, in signal units² per rad/s.
    pub density: Vec<Vec<f64>>,
    pub segment_len: usize,
    pub n_segments: usize,
    pub window: String,
    pub overlap: f64,
}

impl SpectrumResult {
    /// Frequency bin spacing (rad/s).
    pub fn resolution(&self) -> f64 {
        if self.frequencies.len() > 1 {
            self.frequencies[1] - self.frequencies[0]
        } else {
            0.0
        }
    }

    /// Integral of the density of signal `k` (equals its variance).
    pub fn total_power(&self, k: usize) -> f64 {
        self.density[k].iter().sum::<f64>() * self.resolution()
    }

    /// Interpolated location of the largest peak of signal `k` (rad/s).
    pub fn dominant_peak(&self, k: usize) -> f64 {
        dominant_peak(&self.frequencies, &self.density[k])
    }
}

/// Welch estimate with a Hann window and 50 % overlap; each segment has
/// its own mean removed. `segment_len = None` uses the whole signal.
pub fn psd(signals: &[&[f64]], dt: f64, segment_len: Option<usize>) -> Result<SpectrumResult> {
    if !(dt > 0.0) {
        return Err(Error::Config("sample interval must be positive".into()));
    }
    let len = signals.iter().map(|s| s.len()).min().unwrap_or(0);
    let seg = segment_len.unwrap_or(len);
    if seg < 4 {
        return Err(Error::InsufficientData(format!("segment length {seg} is below 4 samples")));
    }
    if len < seg {
        return Err(Error::InsufficientData(format!(
            "signal of {len} samples is shorter than the {seg}-sample window"
        )));
    }
    let hop = (seg / 2).max(1);
    let n_segments = (len - seg) / hop + 1;
    // periodic Hann window
    let window: Vec<f64> = (0..seg).map(|k| 0.5 - 0.5 * (TAU * k as f64 / seg as f64).cos()).collect();
    let w2: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::new().plan_fft_forward(seg);
    let bins = seg / 2 + 1;
    let fs = TAU / dt;
    let mut density = Vec::with_capacity(signals.len());
    let mut buf = vec![Complex64::new(0.0, 0.0); seg];
    for sig in signals {
        let mut acc = vec![0.0; bins];
        for s in 0..n_segments {
            let chunk = &sig[s * hop..s * hop + seg];
            let mean = chunk.iter().sum::<f64>() / seg as f64;
            for (b, (&x, &w)) in buf.iter_mut().zip(chunk.iter().zip(&window)) {
                *b = Complex64::new((x - mean) * w, 0.0);
            }
            fft.process(&mut buf);
            for (k, a) in acc.iter_mut().enumerate() {
                let one_sided = if k == 0 || (seg % 2 == 0 && k == seg / 2) { 1.0 } else { 2.0 };
                *a += one_sided * buf[k].norm_sqr() / (w2 * fs);
            }
        }
        acc.iter_mut().for_each(|a| *a /= n_segments as f64);
        density.push(acc);
    }
    Ok(SpectrumResult {
        frequencies: (0..bins).map(|k| k as f64 * fs / seg as f64).collect(),
        density,
        segment_len: seg,
        n_segments,
        window: "hann".into(),
        overlap: 0.5,
    })
}

/// Peak location refined by a parabola through the logarithms of the
/// three bins around the maximum (exact for a Gaussian peak shape).
pub fn dominant_peak(freqs: &[f64], density: &[f64]) -> f64 {
    let k = (1..density.len())
        .max_by(|&a, &b| density[a].total_cmp(&density[b]))
        .unwrap_or(0);
    if k == 0 || k + 1 >= density.len() {
        return freqs.get(k).copied().unwrap_or(0.0);
    }
    let (a, b, c) = (density[k - 1], density[k], density[k + 1]);
    if !(a > 0.0 && b > 0.0 && c > 0.0) {
        return freqs[k];
    }
    let (la, lb, lc) = (a.ln(), b.ln(), c.ln());
    let denom = la - 2.0 * lb + lc;
    let shift = if denom < 0.0 { 0.5 * (la - lc) / denom } else { 0.0 };
    freqs[k] + shift.clamp(-0.5, 0.5) * (freqs[k + 1] - freqs[k])
}

/// Which natural frequencies the Region-D test compares against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyReference {
    /// Bare mechanical frequencies Ω_i.
    Bare,
    /// Limit-cycle frequencies of each oscillator run in isolation.
    SelfOscillation,
}

/// Thresholds and windows of the analysis stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    pub rho_sync: f64,
    pub rho_incoherent: f64,
    /// Minimum chimera dwell, in mean mechanical periods.
    pub min_dwell_periods: f64,
    /// Width of the non-overlapping averaging windows, in mean periods.
    pub window_periods: f64,
    /// Leading fraction of each trajectory discarded as transient.
    pub transient_fraction: f64,
    /// Self-oscillation amplitude floor, in units of κ/|G|.
    pub amplitude_floor: f64,
    /// Minimum rms ratio of the last quarter of the window to the quarter
    /// before it for an oscillation to count as sustained.
    pub sustain_ratio: f64,
    /// Peak-matching tolerance, in units of Γ.
    pub peak_tolerance: f64,
    /// Minimum ensemble size for a label.
    pub min_ensemble: usize,
    pub phase_method: PhaseMethod,
    pub frequency_reference: FrequencyReference,
    /// Welch segment length in samples; whole window when absent.
    pub psd_segment: Option<usize>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            rho_sync: 0.95,
            rho_incoherent: 0.80,
            min_dwell_periods: 500.0,
            window_periods: 10.0,
            transient_fraction: 0.5,
            amplitude_floor: 1e-2,
            sustain_ratio: 0.9,
            peak_tolerance: 0.5,
            min_ensemble: 5,
            phase_method: PhaseMethod::Quadrature,
            frequency_reference: FrequencyReference::Bare,
            psd_segment: None,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !(unit(self.rho_sync) && unit(self.rho_incoherent) && self.rho_incoherent <= self.rho_sync) {
            return Err(Error::Config("need 0 ≤ rho_incoherent ≤ rho_sync ≤ 1".into()));
        }
        if !(0.0..1.0).contains(&self.transient_fraction) {
            return Err(Error::Config("transient_fraction must lie in [0, 1)".into()));
        }
        if !(self.window_periods > 0.0 && self.min_dwell_periods >= 0.0) {
            return Err(Error::Config("window_periods must be positive and min_dwell_periods non-negative".into()));
        }
        if !(self.amplitude_floor > 0.0 && self.peak_tolerance > 0.0 && self.sustain_ratio > 0.0) {
            return Err(Error::Config("amplitude_floor, peak_tolerance and sustain_ratio must be positive".into()));
        }
        Ok(())
    }

    /// Apply `key=value` overrides, e.g. `rho_sync=0.9,min_dwell_periods=300`.
    pub fn apply_overrides(&mut self, spec: &str) -> Result<()> {
        for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("threshold '{item}' is not key=value")))?;
            let num = || {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("threshold {k}: '{v}' is not a number")))
            };
            match k.trim() {
                "rho_sync" => self.rho_sync = num()?,
                "rho_incoherent" => self.rho_incoherent = num()?,
                "min_dwell_periods" => self.min_dwell_periods = num()?,
                "window_periods" => self.window_periods = num()?,
                "transient_fraction" => self.transient_fraction = num()?,
                "amplitude_floor" => self.amplitude_floor = num()?,
                "sustain_ratio" => self.sustain_ratio = num()?,
                "peak_tolerance" => self.peak_tolerance = num()?,
                other => return Err(Error::Config(format!("unknown threshold '{other}'"))),
            }
        }
        self.validate()
    }
}

/// Chimera detection thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChimeraThresholds {
    pub rho_sync: f64,
    pub rho_incoherent: f64,
    pub min_duration_periods: f64,
    pub window_periods: f64,
}

impl Default for ChimeraThresholds {
    fn default() -> Self {
        (&AnalysisConfig::default()).into()
    }
}

impl From<&AnalysisConfig> for ChimeraThresholds {
    fn from(c: &AnalysisConfig) -> Self {
        Self {
            rho_sync: c.rho_sync,
            rho_incoherent: c.rho_incoherent,
            min_duration_periods: c.min_dwell_periods,
            window_periods: c.window_periods,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChimeraReport {
    /// Start and end (s) of the longest qualifying stretch.
    pub window_start: f64,
    pub window_end: f64,
    /// Synchronized array (1 or 2) of that stretch.
    pub sync_array: Option<usize>,
    pub rho_sync_mean: f64,
    pub rho_unsync_mean: f64,
    /// Length of the stretch in mean mechanical periods.
    pub duration: f64,
    pub verdict: bool,
    /// Spread of mean frequencies (rad/s) inside the incoherent array over
    /// the stretch, when phases were supplied.
    pub phase_divergence: Option<f64>,
}

impl ChimeraReport {
    fn none() -> Self {
        Self {
            window_start: 0.0,
            window_end: 0.0,
            sync_array: None,
            rho_sync_mean: 0.0,
            rho_unsync_mean: 0.0,
            duration: 0.0,
            verdict: false,
            phase_divergence: None,
        }
    }
}

/// Longest stretch of consecutive windows in which one array's mean ρ is at
/// least `rho_sync` and the other's at most `rho_incoherent`, with the same
/// array synchronized throughout.
pub fn detect_chimera(series: &OrderParameterSeries, mean_period: f64, th: &ChimeraThresholds) -> ChimeraReport {
    let rows = series.len();
    if rows < 2 || !(mean_period > 0.0) {
        return ChimeraReport::none();
    }
    let dt = series.times[1] - series.times[0];
    let per_window = ((th.window_periods * mean_period / dt).round() as usize).max(1);
    let n_windows = rows / per_window;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let windows: Vec<(Option<usize>, f64, f64)> = (0..n_windows)
        .map(|w| {
            let r = w * per_window..(w + 1) * per_window;
            let (a, b) = (mean(&series.rho[0][r.clone()]), mean(&series.rho[1][r]));
            if a >= th.rho_sync && b <= th.rho_incoherent {
                (Some(1), a, b)
            } else if b >= th.rho_sync && a <= th.rho_incoherent {
                (Some(2), b, a)
            } else {
                (None, a, b)
            }
        })
        .collect();
    let mut best: Option<(usize, usize)> = None;
    let mut w = 0;
    while w < n_windows {
        let Some(s) = windows[w].0 else {
            w += 1;
            continue;
        };
        let start = w;
        while w < n_windows && windows[w].0 == Some(s) {
            w += 1;
        }
        if best.is_none_or(|(b0, b1)| w - start > b1 - b0) {
            best = Some((start, w));
        }
    }
    let Some((w0, w1)) = best else {
        return ChimeraReport::none();
    };
    let count = (w1 - w0) as f64;
    let window_start = series.times[w0 * per_window];
    let window_end = series.times[(w1 * per_window).min(rows) - 1] + dt;
    let duration = (window_end - window_start) / mean_period;
    ChimeraReport {
        window_start,
        window_end,
        sync_array: windows[w0].0,
        rho_sync_mean: windows[w0..w1].iter().map(|w| w.1).sum::<f64>() / count,
        rho_unsync_mean: windows[w0..w1].iter().map(|w| w.2).sum::<f64>() / count,
        duration,
        verdict: duration >= th.min_duration_periods,
        phase_divergence: None,
    }
}

/// Fill in the spread of mean frequencies of the incoherent array over the
/// reported stretch.
pub fn attach_phase_divergence(report: &mut ChimeraReport, phases: &PhaseSeries) {
    let Some(sync) = report.sync_array else {
        return;
    };
    let n = phases.phases.len() / 2;
    let other = 2 - sync;
    let idx: Vec<usize> = (0..phases.times.len())
        .filter(|&r| phases.times[r] >= report.window_start && phases.times[r] < report.window_end)
        .collect();
    if idx.len() < 2 {
        return;
    }
    let t: Vec<f64> = idx.iter().map(|&r| phases.times[r]).collect();
    let f: Vec<f64> = (0..n)
        .map(|i| {
            let p: Vec<f64> = idx.iter().map(|&r| phases.phases[other * n + i][r]).collect();
            mean_frequency(&t, &p)
        })
        .collect();
    let hi = f.iter().cloned().fold(f64::MIN, f64::max);
    let lo = f.iter().cloned().fold(f64::MAX, f64::min);
    report.phase_divergence = Some(hi - lo);
}

/// Everything the region rule needs from one run, measured on the
/// post-transient window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunDiagnostics {
    /// Steady amplitude √2·rms of each oscillator, in units of κ/|G|.
    pub amplitude: Vec<f64>,
    /// rms(last quarter) / rms(third quarter) of each oscillator.
    pub sustain: Vec<f64>,
    /// Mean phase velocity of each oscillator (rad/s).
    pub frequency: Vec<f64>,
    /// Time-averaged ρ per array.
    pub rho: [f64; 2],
    /// Locking index per array relative to its largest oscillator.
    pub locking: [f64; 2],
    /// Interpolated dominant PSD peak (rad/s) of each array's largest
    /// oscillator.
    pub dominant_peak: [f64; 2],
    /// Mean collective frequency dΨ_σ/dt (rad/s).
    pub collective_frequency: [f64; 2],
    /// Circular mean of Ψ₁ − Ψ₂ over the last quarter of the window.
    pub delta_psi: f64,
    /// Circular spread 1 − |⟨e^{i(Ψ₁−Ψ₂)}⟩| over the same stretch.
    pub delta_psi_spread: f64,
    pub chimera: ChimeraReport,
}

impl RunDiagnostics {
    /// At least one oscillator above the floor whose amplitude is not
    /// decaying.
    pub fn self_oscillating(&self, cfg: &AnalysisConfig) -> bool {
        self.amplitude
            .iter()
            .zip(&self.sustain)
            .any(|(&a, &s)| a >= cfg.amplitude_floor && s >= cfg.sustain_ratio)
    }

    /// Both arrays coherent in the order-parameter sense.
    pub fn coherent(&self, cfg: &AnalysisConfig) -> bool {
        self.rho.iter().all(|&r| r >= cfg.rho_sync)
    }

    /// Both arrays frequency- and phase-locked internally.
    pub fn locked(&self, cfg: &AnalysisConfig) -> bool {
        self.locking.iter().all(|&l| l >= cfg.rho_sync)
    }
}

/// Measure a full-model trajectory over its post-transient window.
pub fn analyze_run(traj: &Trajectory, system: &ValidatedSystem, cfg: &AnalysisConfig) -> Result<RunDiagnostics> {
    cfg.validate()?;
    let win = traj.discard_transient(cfg.transient_fraction);
    if win.len() < 16 {
        return Err(Error::InsufficientData(format!("{} post-transient samples", win.len())));
    }
    let n = system.n_per_array();
    let omega: Vec<f64> = (0..2 * n).map(|k| system.omega()[k % n]).collect();
    let length = system.scales().length;
    let xs: Vec<Vec<f64>> = (0..2 * n).map(|k| win.displacement(k)).collect();
    let rms = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        (v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
    };
    let rows = win.len();
    let q = rows / 4;
    let amplitude: Vec<f64> = xs.iter().map(|x| 2f64.sqrt() * rms(x) / length).collect();
    let sustain: Vec<f64> = xs
        .iter()
        .map(|x| {
            let prev = rms(&x[rows - 2 * q..rows - q]);
            let last = rms(&x[rows - q..]);
            if prev > 0.0 {
                last / prev
            } else if last > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        })
        .collect();

    let ph = extract_phases(&win, &omega, cfg.phase_method);
    let frequency: Vec<f64> = ph.phases.iter().map(|p| mean_frequency(&ph.times, p)).collect();
    let ops = order_parameter_series(&ph);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let rho = [mean(&ops.rho[0]), mean(&ops.rho[1])];
    let collective_frequency = [mean_frequency(&ops.times, &ops.psi[0]), mean_frequency(&ops.times, &ops.psi[1])];

    let mut leader = [0usize; 2];
    let mut locking = [0.0; 2];
    for s in 0..2 {
        let group = s * n..(s + 1) * n;
        leader[s] = group
            .clone()
            .max_by(|&a, &b| amplitude[a].total_cmp(&amplitude[b]))
            .unwrap();
        let refs: Vec<&[f64]> = group.clone().map(|k| ph.phases[k].as_slice()).collect();
        locking[s] = locking_index(&refs, leader[s] - s * n);
    }
    let spec = psd(&[&xs[leader[0]], &xs[leader[1]]], win.sample_dt(), cfg.psd_segment)?;
    let dominant_peak = [spec.dominant_peak(0), spec.dominant_peak(1)];

    let z: Complex64 = (rows - q..rows)
        .map(|r| Complex64::from_polar(1.0, ops.psi[0][r] - ops.psi[1][r]))
        .sum::<Complex64>()
        / q.max(1) as f64;
    let mean_period = TAU / system.omega_bar();
    let mut chimera = detect_chimera(&ops, mean_period, &cfg.into());
    attach_phase_divergence(&mut chimera, &ph);
    Ok(RunDiagnostics {
        amplitude,
        sustain,
        frequency,
        rho,
        locking,
        dominant_peak,
        collective_frequency,
        delta_psi: z.arg(),
        delta_psi_spread: 1.0 - z.norm(),
        chimera,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    A,
    B,
    C,
    D,
    Indeterminate,
}

impl std::fmt::Display for Region {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Region::A => "A",
            Region::B => "B",
            Region::C => "C",
            Region::D => "D",
            Region::Indeterminate => "indeterminate",
        })
    }
}

/// Inputs of the region rule, stored with the label so it can be
/// recomputed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionDiagnostics {
    pub runs: Vec<RunDiagnostics>,
    /// Reference frequencies for the Region-D test (rad/s).
    pub reference_frequencies: Vec<f64>,
    pub gamma: f64,
    pub config: AnalysisConfig,
    /// Cluster centres of all dominant peaks across the ensemble (rad/s).
    pub frequency_set: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionLabel {
    pub region: Region,
    pub reason: String,
    pub diagnostics: RegionDiagnostics,
}

/// Group sorted values whose neighbours are within `tol`; returns the
/// centre of each group.
fn clusters(values: &[f64], tol: f64) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mut out: Vec<Vec<f64>> = Vec::new();
    for x in v {
        match out.last_mut() {
            Some(g) if x - g[g.len() - 1] <= tol => g.push(x),
            _ => out.push(vec![x]),
        }
    }
    out.iter().map(|g| g.iter().sum::<f64>() / g.len() as f64).collect()
}

/// Label one parameter point from a multi-seed ensemble.
///
/// A: no run self-oscillates. B: every run has both arrays with ρ ≥
/// ρ_sync and all dominant peaks fall in one cluster of width ≤ tolerance.
/// D: every run is internally locked in both arrays, every dominant peak
/// lies within tolerance of a reference frequency, and at least two
/// distinct peaks occur across the ensemble. C: some run has an array with
/// ρ < ρ_sync and the point is neither B nor D. Anything else, including a
/// mix of oscillating and quiet runs, is indeterminate.
pub fn classify_region(
    runs: &[RunDiagnostics],
    reference_frequencies: &[f64],
    gamma: f64,
    cfg: &AnalysisConfig,
) -> RegionLabel {
    let tol = cfg.peak_tolerance * gamma;
    let peaks: Vec<f64> = runs.iter().flat_map(|r| r.dominant_peak).collect();
    let frequency_set = clusters(&peaks, tol);
    let diagnostics = RegionDiagnostics {
        runs: runs.to_vec(),
        reference_frequencies: reference_frequencies.to_vec(),
        gamma,
        config: cfg.clone(),
        frequency_set: frequency_set.clone(),
    };
    let label = |region, reason: String| RegionLabel {
        region,
        reason,
        diagnostics: diagnostics.clone(),
    };
    if runs.len() < cfg.min_ensemble.max(1) {
        return label(
            Region::Indeterminate,
            format!("ensemble of {} runs is below the minimum {}", runs.len(), cfg.min_ensemble),
        );
    }
    let oscillating = runs.iter().filter(|r| r.self_oscillating(cfg)).count();
    if oscillating == 0 {
        return label(Region::A, "no run sustains an oscillation above the floor".into());
    }
    if oscillating < runs.len() {
        return label(
            Region::Indeterminate,
            format!("{oscillating} of {} runs self-oscillate", runs.len()),
        );
    }
    let spread = peaks.iter().cloned().fold(f64::MIN, f64::max) - peaks.iter().cloned().fold(f64::MAX, f64::min);
    if runs.iter().all(|r| r.coherent(cfg)) && spread <= tol {
        return label(Region::B, format!("all arrays coherent at one frequency (peak spread {:.3} Γ)", spread / gamma));
    }
    let near = |f: f64| reference_frequencies.iter().map(|w| (f - w).abs()).fold(f64::INFINITY, f64::min);
    let worst = peaks.iter().map(|&f| near(f)).fold(0.0, f64::max);
    if runs.iter().all(|r| r.locked(cfg)) && worst <= tol && frequency_set.len() >= 2 {
        return label(
            Region::D,
            format!(
                "locked at {} distinct natural frequencies (worst offset {:.3} Γ)",
                frequency_set.len(),
                worst / gamma
            ),
        );
    }
    if runs.iter().any(|r| r.rho.iter().any(|&x| x < cfg.rho_sync)) {
        return label(Region::C, "self-oscillating without coherence in every array".into());
    }
    label(
        Region::Indeterminate,
        format!("coherent but {} distinct peaks without natural-frequency match", frequency_set.len()),
    )
}

/// Re-derive a label from its stored diagnostics.
pub fn reclassify(d: &RegionDiagnostics) -> RegionLabel {
    classify_region(&d.runs, &d.reference_frequencies, d.gamma, &d.config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn order_parameter_examples() {
        assert_relative_eq!(order_parameter(&[0.3, 0.3, 0.3]).0, 1.0, epsilon = 1e-15);
        assert!(order_parameter(&[0.0, PI / 2.0, PI, 3.0 * PI / 2.0]).0 < 1e-15);
        assert_relative_eq!(order_parameter(&[0.0, PI / 3.0, -PI / 3.0]).0, 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn quadrature_phase_of_pure_tone_increases() {
        let w = 3.0;
        let t: Vec<f64> = (0..2000).map(|k| k as f64 * 0.01).collect();
        let x: Vec<f64> = t.iter().map(|t| 2.0 * (w * t).cos()).collect();
        let v: Vec<f64> = t.iter().map(|t| -2.0 * w * (w * t).sin()).collect();
        let p = extract_phase(&x, &v, w, PhaseMethod::Quadrature);
        assert_relative_eq!(mean_frequency(&t, &p), w, max_relative = 1e-4);
        assert!(p.windows(2).all(|d| (d[1] - d[0]).abs() < PI));
    }

    #[test]
    fn unwrap_removes_jumps() {
        let mut p: Vec<f64> = (0..100).map(|k| (0.4 * k as f64).rem_euclid(TAU) - PI).collect();
        unwrap(&mut p);
        assert!(p.windows(2).all(|d| (d[1] - d[0] - 0.4).abs() < 1e-12));
    }

    #[test]
    fn psd_rejects_short_signal() {
        let x = vec![0.0; 10];
        assert!(matches!(psd(&[&x], 0.1, Some(32)), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn chimera_on_constructed_series() {
        let rows = 20_000;
        let s = OrderParameterSeries {
            times: (0..rows).map(|k| k as f64 * 0.1).collect(),
            rho: [vec![0.99; rows], vec![0.5; rows]],
            psi: [vec![0.0; rows], vec![0.0; rows]],
        };
        let r = detect_chimera(&s, 2.0, &ChimeraThresholds::default());
        assert!(r.verdict);
        assert_eq!(r.sync_array, Some(1));
        assert_relative_eq!(r.duration, 1000.0, max_relative = 1e-9);
        let both = OrderParameterSeries {
            rho: [vec![1.0; rows], vec![1.0; rows]],
            ..s
        };
        assert!(!detect_chimera(&both, 2.0, &ChimeraThresholds::default()).verdict);
    }

    #[test]
    fn clusters_merge_neighbours() {
        let c = clusters(&[1.0, 1.2, 5.0, 5.1, 1.1], 0.5);
        assert_eq!(c.len(), 2);
        assert_relative_eq!(c[0], 1.1, max_relative = 1e-12);
        assert_relative_eq!(c[1], 5.05, max_relative = 1e-12);
    }

    #[test]
    fn overrides_parse() {
        let mut c = AnalysisConfig::default();
        c.apply_overrides("rho_sync=0.9, min_dwell_periods=300").unwrap();
        assert_eq!(c.rho_sync, 0.9);
        assert_eq!(c.min_dwell_periods, 300.0);
        assert!(c.apply_overrides("bogus=1").is_err());
        assert!(c.apply_overrides("rho_sync").is_err());
    }
}
