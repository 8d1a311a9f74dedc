//! Schema and values of a reference sweep, plus config-hash round trips.

use std::path::{Path, PathBuf};

use proptest::prelude::*;
use vacdec_cli::config::{canonicalize, config_hash, ScenarioFile};
use vacdec_cli::run::{execute, render, Format, RunArgs, CSV_COLUMNS};
use vacdec_core::oracle::McConfig;
use vacdec_core::scenario::{Coupling, Method, RawScenario, Vec3};
use vacdec_core::trajectories::TrajectorySpec;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests")
}

fn numeric_close(a: &str, b: &str) -> bool {
    match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) => x == y || (x - y).abs() <= 1e-9 * x.abs().max(y.abs()) || (x - y).abs() < 1e-24,
        _ => false,
    }
}

#[test]
fn z0_sweep_matches_golden_file() {
    let args = RunArgs {
        scenario: root().join("data/charge_adiabatic.scn"),
        sweep: Some("z0=0.01:10:25".parse().unwrap()),
        log_axis: true,
        ..Default::default()
    };
    let got = String::from_utf8(render(&execute(&args).unwrap().rows, Format::Csv)).unwrap();
    let want = std::fs::read_to_string(root().join("golden/charge_adiabatic_z0.csv")).unwrap();
    let (got, want): (Vec<&str>, Vec<&str>) = (got.lines().collect(), want.lines().collect());
    assert_eq!(got[0], want[0], "header changed");
    assert_eq!(got[0], CSV_COLUMNS.join(","));
    assert_eq!(got.len(), want.len());
    for (g, w) in got.iter().zip(&want).skip(1) {
        let (gs, ws): (Vec<&str>, Vec<&str>) = (g.split(',').collect(), w.split(',').collect());
        assert_eq!(gs.len(), CSV_COLUMNS.len());
        for ((col, a), b) in CSV_COLUMNS.iter().zip(&gs).zip(&ws) {
            let text_column = matches!(*col, "scenario_id" | "orientation" | "method" | "mc_verdict");
            if text_column || a.is_empty() || b.is_empty() {
                assert_eq!(a, b, "{col}");
            } else {
                assert!(numeric_close(a, b), "{col}: {a} vs {b}");
            }
        }
    }
}

fn vec3() -> impl Strategy<Value = Vec3> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn raw_scenario() -> impl Strategy<Value = RawScenario> {
    let coupling = prop_oneof![
        (1e-4..10.0f64).prop_map(|e2| Coupling::Charge { e2 }),
        (vec3(), vec3()).prop_map(|(p, m)| Coupling::Dipole { p, m }),
    ];
    let trajectory = prop_oneof![
        (0.0..0.1f64, 0.1..10.0f64).prop_map(|(amplitude, width)| TrajectorySpec::Adiabatic { amplitude, width }),
        (0.0..0.1f64, 0.5..5.0f64, 1e-4..0.1f64)
            .prop_map(|(speed, duration, ramp)| TrajectorySpec::PiecewiseTrapezoid { speed, duration, ramp }),
        (0.0..0.1f64, 0.1..2.0f64, 5.0..50.0f64, 1u32..20, proptest::option::of(0.0..20.0f64)).prop_map(
            |(amplitude, width, separation, count, carrier)| TrajectorySpec::PulseTrain { amplitude, width, separation, count, carrier }
        ),
    ];
    (
        coupling,
        trajectory,
        any::<bool>(),
        0.0..100.0f64,
        vec3(),
        any::<bool>(),
        proptest::option::of(1.0..1e4f64),
        proptest::option::of((2u64..10_000_000, any::<u64>())),
    )
        .prop_map(|(coupling, trajectory, plate, z0, j, full, k_max, mc)| {
            let mut raw = RawScenario::new(coupling, trajectory);
            raw.plate = plate;
            raw.z0 = if plate { z0 } else { 0.0 };
            raw.j_hat = j;
            raw.numerics.method = if full { Method::Full } else { Method::DipoleApprox };
            raw.numerics.quadrature.k_max = k_max;
            raw.oracle = mc.map(|(samples, seed)| McConfig { samples, seed, workers: None });
            raw
        })
}

proptest! {
    #[test]
    fn canonical_text_reparses_to_same_hash(raw in raw_scenario()) {
        let text = canonicalize(&raw);
        let back = ScenarioFile::parse(&text).unwrap();
        prop_assert_eq!(&back.raw, &raw);
        prop_assert_eq!(config_hash(&back.raw), config_hash(&raw));
    }
}
