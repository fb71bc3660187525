use chimera_core::integrator::IntegratorConfig;
use chimera_core::model::{build_system, SystemConfig};
use chimera_core::phase_model::{calibrate_amplitudes, Calibration, PhaseModelParams};
use chimera_core::Error;

fn calibrate(photons: f64) -> chimera_core::Result<(chimera_core::model::ValidatedSystem, Calibration)> {
    let sys = build_system(SystemConfig::reference(photons.sqrt(), 0.0))?;
    let cal = calibrate_amplitudes(&sys, &IntegratorConfig::for_periods(2000.0))?;
    Ok((sys, cal))
}

#[test]
fn fundamental_dominates_the_force_at_moderate_drive() {
    let (_, cal) = calibrate(3e10).unwrap();
    for h in &cal.harmonic_fraction {
        assert!(*h >= 0.7, "fundamental carries {h}");
    }
}

#[test]
fn drive_constant_balances_damping_on_the_limit_cycle() {
    // On a sinusoidal limit cycle the in-phase part of the force supplies
    // exactly the power lost to damping: K cos φ̃ = Γ/2.
    for photons in [3e10, 1e11] {
        let (sys, cal) = calibrate(photons).unwrap();
        let p = PhaseModelParams::from_calibration(&sys, &cal).unwrap();
        let g = sys.config().mechanical.gamma;
        for (k, fp) in p.k_drive().iter().zip(&p.force_phase) {
            let balance = k * fp.cos() / (0.5 * g);
            assert!((balance - 1.0).abs() < 0.05, "{photons}: K cos φ̃ = {balance} Γ/2");
        }
    }
}

#[test]
fn calibration_round_trips_through_toml() {
    let (_, cal) = calibrate(3e10).unwrap();
    let back = Calibration::from_toml_str(&cal.to_toml_string()).unwrap();
    assert_eq!(cal, back);
}

#[test]
fn below_threshold_is_a_calibration_error() {
    match calibrate(1e8) {
        Err(e @ Error::Calibration(_)) => assert!(e.is_numerical()),
        other => panic!("expected a calibration error, got {other:?}"),
    }
}
