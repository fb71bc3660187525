use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chimera_core::analysis::{
    analyze_run, classify_region, extract_phases, order_parameter_series, psd, AnalysisConfig,
};
use chimera_core::config::RunConfig;
use chimera_core::continuum::{
    chimera_branch_rho2, find_fixed_points, integrate_oa, seed_grid, write_fixed_points_csv, OAState,
};
use chimera_core::integrator::{run_hash, Method};
use chimera_core::io::{self, Manifest};
use chimera_core::model::{build_system, ValidatedSystem};
use chimera_core::phase_model::calibrate_amplitudes;
use chimera_core::sweep::{
    chimera_mu_windows, chimera_scan, generate_disorder, run_sweep, simulate, write_records_csv,
    write_region_matrix, write_timings_csv, SweepRecord, RNG_NAME,
};
use chimera_core::{Error, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "omchimera", version, about = "Optomechanical array simulations and analysis")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Global {
    /// Run configuration (TOML). The built-in reference device is used when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Initial-condition seed (simulate) or first seed of an ensemble (sweep, chimera-scan).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file or directory.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// Worker threads for sweeps; 0 uses every core.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true, value_enum)]
    method: Option<MethodArg>,
    #[arg(long, global = true)]
    transient_fraction: Option<f64>,
    /// Analysis threshold overrides, e.g. "rho_sync=0.9,min_dwell_periods=300".
    #[arg(long, global = true)]
    thresholds: Option<String>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Rk4,
    Adaptive,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate the full model once and write the trajectory (.csv or .bin).
    Simulate {
        /// Replace the natural frequencies with disorder realization R drawn at the first
        /// [sweep] width, photon number and coupling.
        #[arg(long)]
        realization: Option<u64>,
    },
    /// Classify every grid point of the [sweep] section.
    Sweep,
    /// Measure a stored trajectory.
    Analyze {
        trajectory: PathBuf,
        /// Disorder realization the trajectory was simulated with, if any.
        #[arg(long)]
        realization: Option<u64>,
    },
    /// Isolated limit cycles and the reduced-model constants.
    Calibrate,
    /// Continuum reduction of the two-population model.
    Oa {
        #[command(subcommand)]
        action: OaAction,
    },
    /// Sweep and report every chimera verdict.
    ChimeraScan,
}

#[derive(Subcommand, Debug)]
enum OaAction {
    /// Locate and classify fixed points.
    FixedPoints,
    /// Integrate the flow from [oa] rho0, psi0.
    Integrate,
    /// Closed-form ρ₂ on the branch with ρ₁ = 1.
    Branch {
        /// Comma-separated phase differences (rad).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0")]
        delta_psi: Vec<f64>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}

fn load_config(g: &Global) -> Result<RunConfig> {
    let mut cfg = match &g.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::reference(),
    };
    if let Some(m) = g.method {
        cfg.integrator.method = match m {
            MethodArg::Rk4 => Method::Rk4Fixed,
            MethodArg::Adaptive => Method::AdaptiveEmbedded,
        };
    }
    if let Some(t) = g.transient_fraction {
        cfg.analysis.transient_fraction = t;
    }
    if let Some(spec) = &g.thresholds {
        cfg.analysis.apply_overrides(spec)?;
    }
    if let Some(w) = g.workers {
        cfg.sweep.workers = w;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn command_line() -> String {
    std::env::args().collect::<Vec<_>>().join(" ")
}

fn manifest(cfg: &RunConfig, seeds: Vec<u64>, realizations: Vec<u64>, outputs: Vec<String>) -> Manifest {
    Manifest {
        tool: "omchimera".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command_line(),
        config_hash: cfg.hash(),
        rng: RNG_NAME.into(),
        seeds,
        realizations,
        outputs,
        checksum: None,
        config: toml::Value::try_from(cfg).expect("run config converts to TOML"),
    }
}

fn manifest_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".manifest.toml");
    PathBuf::from(s)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// System of the run file, optionally with disorder realization `r` and the
/// first grid values of the [sweep] section.
fn resolve_system(cfg: &RunConfig, realization: Option<u64>) -> Result<ValidatedSystem> {
    let Some(r) = realization else {
        return build_system(cfg.system.clone());
    };
    let grid = cfg.grid();
    let (Some(&sigma), Some(&photons), Some(&mu)) = (grid.sigma.first(), grid.photons.first(), grid.mu.first()) else {
        return Err(Error::Config("[sweep] needs sigma_gamma, photons and mu_relative values".into()));
    };
    let n = cfg.system.mechanical.omega.len();
    let dis = generate_disorder(sigma, n, grid.omega_bar(), grid.distribution, r);
    build_system(
        cfg.system
            .clone()
            .with_omega(dis.omega)
            .with_alpha_max(photons.sqrt())
            .with_mu(mu),
    )
}

fn run(cli: &Cli) -> Result<()> {
    let g = &cli.global;
    let cfg = load_config(g)?;
    match &cli.command {
        Command::Simulate { realization } => cmd_simulate(g, &cfg, *realization),
        Command::Sweep => cmd_sweep(g, &cfg),
        Command::Analyze { trajectory, realization } => cmd_analyze(g, &cfg, trajectory, *realization),
        Command::Calibrate => cmd_calibrate(g, &cfg),
        Command::Oa { action } => cmd_oa(g, &cfg, action),
        Command::ChimeraScan => cmd_chimera_scan(g, &cfg),
    }
}

fn cmd_simulate(g: &Global, cfg: &RunConfig, realization: Option<u64>) -> Result<()> {
    let system = resolve_system(cfg, realization)?;
    let seed = g.seed.unwrap_or(1);
    let traj = simulate(&system, seed, &cfg.initial_conditions, &cfg.integrator.to_config())?;
    let out = g.output.clone().unwrap_or_else(|| PathBuf::from("trajectory.csv"));
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    io::save_trajectory(&out, &traj)?;
    let mut m = manifest(cfg, vec![seed], realization.into_iter().collect(), vec![out.display().to_string()]);
    m.checksum = Some(traj.checksum());
    m.save(&manifest_path(&out))?;
    println!("samples={}", traj.len());
    println!("checksum={}", traj.checksum());
    println!("output={}", out.display());
    Ok(())
}

fn ensemble_for(g: &Global, cfg: &RunConfig) -> chimera_core::sweep::Ensemble {
    let mut ens = cfg.ensemble();
    if let Some(first) = g.seed {
        ens.seeds = (first..first + cfg.sweep.seeds).collect();
    }
    ens
}

fn write_sweep_tables(dir: &Path, cfg: &RunConfig, records: &[SweepRecord]) -> Result<Vec<String>> {
    let mut outputs = Vec::new();
    let mut w = create(&dir.join("records.csv"))?;
    write_records_csv(&mut w, records)?;
    w.flush()?;
    outputs.push("records.csv".to_string());
    let mut w = create(&dir.join("timings.csv"))?;
    write_timings_csv(&mut w, records)?;
    w.flush()?;
    outputs.push("timings.csv".to_string());
    let grid = cfg.grid();
    for (k, &mu) in grid.mu.iter().enumerate() {
        for &r in &grid.realizations {
            let name = format!("regions_mu{k}_r{r}.csv");
            let mut w = create(&dir.join(&name))?;
            write_region_matrix(&mut w, records, mu, r)?;
            w.flush()?;
            outputs.push(name);
        }
    }
    Ok(outputs)
}

fn cmd_sweep(g: &Global, cfg: &RunConfig) -> Result<()> {
    let ens = ensemble_for(g, cfg);
    let records = run_sweep(&cfg.grid(), &ens, cfg.sweep.workers)?;
    let dir = g.output.clone().unwrap_or_else(|| PathBuf::from("sweep"));
    let outputs = write_sweep_tables(&dir, cfg, &records)?;
    manifest(cfg, ens.seeds.clone(), cfg.sweep.realizations.clone(), outputs).save(&dir.join("manifest.toml"))?;
    let failed = records.iter().filter(|r| r.error.is_some()).count();
    println!("points={}", records.len());
    println!("failed={failed}");
    println!("output={}", dir.display());
    Ok(())
}

fn cmd_chimera_scan(g: &Global, cfg: &RunConfig) -> Result<()> {
    let ens = ensemble_for(g, cfg);
    let grid = cfg.grid();
    let (records, hits) = chimera_scan(&grid, &ens, cfg.sweep.workers)?;
    let dir = g.output.clone().unwrap_or_else(|| PathBuf::from("chimera_scan"));
    let mut outputs = write_sweep_tables(&dir, cfg, &records)?;
    let gamma = cfg.gamma();
    let mut w = create(&dir.join("chimera_hits.csv"))?;
    writeln!(
        w,
        "sigma_gamma,photons,mu_relative,realization,seed,sync_array,duration_periods,rho_sync_mean,rho_unsync_mean,phase_divergence_gamma"
    )?;
    let mu_rel = |mu: f64| mu / cfg.mu_from_relative(1.0);
    for h in &hits {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            h.point.sigma / gamma,
            h.point.photons,
            mu_rel(h.point.mu),
            h.realization,
            h.seed,
            h.report.sync_array.unwrap_or(0),
            h.report.duration,
            h.report.rho_sync_mean,
            h.report.rho_unsync_mean,
            h.report.phase_divergence.map_or(f64::NAN, |d| d / gamma),
        )?;
    }
    w.flush()?;
    outputs.push("chimera_hits.csv".into());
    let windows = chimera_mu_windows(&hits, &grid.mu);
    let mut w = create(&dir.join("mu_windows.csv"))?;
    writeln!(w, "sigma_gamma,photons,mu_relative_low,mu_relative_high")?;
    for (s, p, lo, hi) in &windows {
        writeln!(w, "{},{},{},{}", s / gamma, p, mu_rel(*lo), mu_rel(*hi))?;
    }
    w.flush()?;
    outputs.push("mu_windows.csv".into());
    manifest(cfg, ens.seeds.clone(), cfg.sweep.realizations.clone(), outputs).save(&dir.join("manifest.toml"))?;
    println!("points={}", records.len());
    println!("chimera_verdicts={}", hits.len());
    for (s, p, lo, hi) in &windows {
        println!(
            "window sigma_gamma={} photons={} mu_relative={}..{}",
            s / gamma,
            p,
            mu_rel(*lo),
            mu_rel(*hi)
        );
    }
    println!("output={}", dir.display());
    Ok(())
}

fn cmd_analyze(g: &Global, cfg: &RunConfig, path: &Path, realization: Option<u64>) -> Result<()> {
    let traj = io::load_trajectory(path)?;
    let system = resolve_system(cfg, realization)?;
    if traj.n_per_array() != system.n_per_array() {
        return Err(Error::Config(format!(
            "trajectory has {} oscillators per array, configuration has {}",
            traj.n_per_array(),
            system.n_per_array()
        )));
    }
    let expected = run_hash(&system, &cfg.integrator.to_config());
    if traj.config_hash != expected {
        log::warn!("trajectory config hash {} differs from the configuration ({expected})", traj.config_hash);
    }
    let acfg = &cfg.analysis;
    let diag = analyze_run(&traj, &system, acfg)?;
    let single = AnalysisConfig {
        min_ensemble: 1,
        ..acfg.clone()
    };
    let label = classify_region(
        std::slice::from_ref(&diag),
        system.omega(),
        system.config().mechanical.gamma,
        &single,
    );

    let dir = g.output.clone().unwrap_or_else(|| {
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        path.with_file_name(format!("{stem}_analysis"))
    });
    fs::create_dir_all(&dir)?;
    let win = traj.discard_transient(acfg.transient_fraction);
    let n = system.n_per_array();
    let omega: Vec<f64> = (0..2 * n).map(|k| system.omega()[k % n]).collect();
    let ph = extract_phases(&win, &omega, acfg.phase_method);
    let ops = order_parameter_series(&ph);
    let xs: Vec<Vec<f64>> = (0..2 * n).map(|k| win.displacement(k)).collect();
    let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
    let spec = psd(&refs, win.sample_dt(), acfg.psd_segment)?;
    let labels: Vec<String> = (0..2 * n).map(|k| format!("x_{}_{}", k / n + 1, k % n + 1)).collect();

    let mut w = create(&dir.join("psd.csv"))?;
    io::write_psd_csv(&mut w, &spec, &labels)?;
    w.flush()?;
    let mut w = create(&dir.join("phases.csv"))?;
    io::write_phases_csv(&mut w, &ph)?;
    w.flush()?;
    let mut w = create(&dir.join("order.csv"))?;
    io::write_order_csv(&mut w, &ops)?;
    w.flush()?;
    let mut m = manifest(
        cfg,
        traj.rng_seed.into_iter().collect(),
        realization.into_iter().collect(),
        vec!["psd.csv".into(), "phases.csv".into(), "order.csv".into()],
    );
    m.checksum = Some(traj.checksum());
    m.save(&dir.join("manifest.toml"))?;

    let gamma = system.config().mechanical.gamma;
    let wbar = system.omega_bar();
    let max_amp = diag.amplitude.iter().cloned().fold(0.0, f64::max);
    println!("region={}", label.region);
    println!("reason={}", label.reason);
    println!("self_oscillating={}", diag.self_oscillating(acfg));
    println!("max_amplitude_length_units={max_amp:.6}");
    for s in 0..2 {
        println!("rho_{}={:.6}", s + 1, diag.rho[s]);
        println!("locking_{}={:.6}", s + 1, diag.locking[s]);
        println!("peak_{}_rad_per_s={:.9e}", s + 1, diag.dominant_peak[s]);
        println!("peak_{}_offset_gamma={:.6}", s + 1, (diag.dominant_peak[s] - wbar) / gamma);
        println!("collective_frequency_{}_rad_per_s={:.9e}", s + 1, diag.collective_frequency[s]);
    }
    println!("delta_psi={:.6}", diag.delta_psi);
    println!("delta_psi_spread={:.6}", diag.delta_psi_spread);
    println!("chimera={}", diag.chimera.verdict);
    if let Some(a) = diag.chimera.sync_array {
        println!("chimera_sync_array={a}");
        println!("chimera_duration_periods={:.1}", diag.chimera.duration);
        println!("chimera_rho_sync={:.6}", diag.chimera.rho_sync_mean);
        println!("chimera_rho_unsync={:.6}", diag.chimera.rho_unsync_mean);
    }
    println!("output={}", dir.display());
    Ok(())
}

fn cmd_calibrate(g: &Global, cfg: &RunConfig) -> Result<()> {
    let system = build_system(cfg.system.clone())?;
    let cal = calibrate_amplitudes(&system, &cfg.integrator.to_config())?;
    let text = cal.to_toml_string();
    match &g.output {
        Some(out) => {
            let mut w = create(out)?;
            w.write_all(text.as_bytes())?;
            w.flush()?;
            manifest(cfg, vec![], vec![], vec![out.display().to_string()]).save(&manifest_path(out))?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn oa_sink(g: &Global) -> Result<Box<dyn Write>> {
    Ok(match &g.output {
        Some(p) => Box::new(create(p)?),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn cmd_oa(g: &Global, cfg: &RunConfig, action: &OaAction) -> Result<()> {
    let p = cfg.oa_params();
    p.validate()?;
    let mut w = oa_sink(g)?;
    match action {
        OaAction::FixedPoints => {
            let search = find_fixed_points(&p, &seed_grid(cfg.oa.seed_rho, cfg.oa.seed_psi))?;
            write_fixed_points_csv(&mut w, &p, &search.points)?;
            if !search.failures.is_empty() {
                log::info!("{} seeds did not converge", search.failures.len());
            }
        }
        OaAction::Integrate => {
            let s0 = OAState {
                rho: cfg.oa.rho0,
                psi: cfg.oa.psi0,
            };
            let period = std::f64::consts::TAU / p.omega_bar;
            let tr = integrate_oa(
                &s0,
                &p,
                cfg.oa.periods * period,
                period / cfg.oa.steps_per_period,
                cfg.oa.sample_every,
            )?;
            writeln!(w, "t,rho_1,rho_2,psi_1,psi_2")?;
            for (t, s) in tr.times.iter().zip(&tr.states) {
                writeln!(w, "{t:e},{:e},{:e},{:e},{:e}", s.rho[0], s.rho[1], s.psi[0], s.psi[1])?;
            }
        }
        OaAction::Branch { delta_psi } => {
            writeln!(w, "delta_psi,rho_2")?;
            for &d in delta_psi {
                let r = chimera_branch_rho2(p.epsilon, p.gamma, p.mu, p.mass, p.omega_bar, d)?;
                writeln!(w, "{d},{r:.12}")?;
            }
        }
    }
    w.flush()?;
    drop(w);
    if let Some(out) = &g.output {
        manifest(cfg, vec![], vec![], vec![out.display().to_string()]).save(&manifest_path(out))?;
    }
    Ok(())
}
