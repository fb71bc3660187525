use chimera_core::integrator::{IntegratorConfig, Trajectory};
use chimera_core::io::{load_trajectory, read_trajectory_binary, save_trajectory, write_trajectory_binary};
use chimera_core::model::{build_system, FullState, SystemConfig};
use chimera_core::sweep::{simulate, InitialConditions};
use chimera_core::Error;
use num_complex::Complex64;
use proptest::prelude::*;

fn short_run() -> Trajectory {
    let sys = build_system(SystemConfig::reference(1e11f64.sqrt(), 1e-3)).unwrap();
    simulate(&sys, 5, &InitialConditions::default(), &IntegratorConfig::for_periods(20.0)).unwrap()
}

#[test]
fn simulated_trajectory_survives_both_formats() {
    let traj = short_run();
    let dir = tempfile::tempdir().unwrap();
    for name in ["run.csv", "run.bin"] {
        let path = dir.path().join(name);
        save_trajectory(&path, &traj).unwrap();
        let back = load_trajectory(&path).unwrap();
        assert_eq!(back, traj, "{name}");
        assert_eq!(back.checksum(), traj.checksum());
    }
}

#[test]
fn truncated_binary_reports_offset() {
    let traj = short_run();
    let mut buf = Vec::new();
    write_trajectory_binary(&mut buf, &traj).unwrap();
    buf.truncate(buf.len() - 5);
    match read_trajectory_binary(&buf) {
        Err(Error::Corrupt { offset, .. }) => assert!(offset > 0 && offset <= buf.len() as u64),
        other => panic!("expected corrupt-file error, got {other:?}"),
    }
}

#[test]
fn truncated_csv_reports_a_line() {
    let traj = short_run();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cut.csv");
    save_trajectory(&path, &traj).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let keep: Vec<&str> = text.lines().take(20).collect();
    std::fs::write(&path, keep.join("\n")).unwrap();
    match load_trajectory(&path) {
        Err(Error::Parse { line, .. }) => assert!(line >= 20),
        other => panic!("expected parse error, got {other:?}"),
    }
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![-1e10f64..1e10, -1e-30f64..1e-30, Just(0.0), Just(-0.0), Just(f64::MIN_POSITIVE)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn arbitrary_states_round_trip(n in 1usize..4, rows in 1usize..6, vals in prop::collection::vec(finite(), 200), seed in prop::option::of(any::<u64>())) {
        let mut it = vals.iter().cycle().copied();
        let mut next = || it.next().unwrap();
        let states: Vec<FullState> = (0..rows)
            .map(|_| FullState {
                n,
                x: (0..2 * n).map(|_| next()).collect(),
                v: (0..2 * n).map(|_| next()).collect(),
                alpha: [Complex64::new(next(), next()), Complex64::new(next(), next())],
            })
            .collect();
        let traj = Trajectory {
            times: (0..rows).map(|k| k as f64 * 1e-9).collect(),
            states,
            config_hash: "h".into(),
            rng_seed: seed,
        };
        let dir = tempfile::tempdir().unwrap();
        for name in ["a.csv", "a.bin"] {
            let path = dir.path().join(name);
            save_trajectory(&path, &traj).unwrap();
            let back = load_trajectory(&path).unwrap();
            prop_assert_eq!(back.checksum(), traj.checksum());
        }
    }
}
