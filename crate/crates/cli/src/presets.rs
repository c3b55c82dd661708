//! Figure presets at desk scale.
//!
//! Spin chains use 12 sites, the Fermi lattice 6 sites at half filling, and
//! the circuit the two-site chain. All other parameters follow the figures:
//! `J = 1/2` for spins, `J = 0.1` and `U = 0.4` for fermions, `h_x = 1`,
//! `|δ| = 0.1`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nhdeco::dynamics::Method;
use nhdeco::ModelSpec;

use crate::config::{Experiment, Resolved, ScanAxes, DESK_FERMI_SITES, DESK_SPINS};
use crate::CliError;

pub const PRESETS: [&str; 10] = [
    "fig1b1", "fig1b2", "fig1c1", "fig1c2", "fig2a", "fig2b", "fig3b", "figS1", "figS2", "figS3",
];

const HY_SET: [f64; 4] = [0.0, 0.5, 0.9, 0.99];
const MAG: f64 = 0.1;
const BALANCED: (f64, f64) = (MAG * FRAC_1_SQRT_2, MAG * FRAC_1_SQRT_2);
const REAL: (f64, f64) = (MAG, 0.0);

fn ising(n: usize) -> ModelSpec {
    ModelSpec::ising(n, 0.5, (1.0, 0.0), (0.0, 0.0))
}

fn heisenberg(n: usize) -> ModelSpec {
    ModelSpec::heisenberg(n, 0.5, (1.0, 0.0), (0.0, 0.0))
}

fn fermi() -> ModelSpec {
    ModelSpec::fermi(DESK_FERMI_SITES, 0.1, 0.4, (1.0, 0.0), (0.0, 0.0))
}

fn thetas(numerators: &[f64]) -> Vec<f64> {
    numerators.iter().map(|k| k * PI / 200.0).collect()
}

fn coherence(name: &str, model: ModelSpec, scan: ScanAxes) -> Resolved {
    Resolved {
        name: name.into(),
        models: vec![model],
        steps: 60,
        scan,
        ..Resolved::custom(model)
    }
}

fn hy_scan(delta: (f64, f64)) -> ScanAxes {
    ScanAxes {
        hy: HY_SET.to_vec(),
        delta: vec![delta],
        ..ScanAxes::default()
    }
}

fn grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect()
}

/// The base configuration of a preset, before overrides.
pub fn preset(name: &str) -> Result<Resolved, CliError> {
    let r = match name {
        "fig1b1" => coherence(name, ising(DESK_SPINS), hy_scan(BALANCED)),
        "fig1b2" => coherence(name, ising(DESK_SPINS), hy_scan(REAL)),
        "fig1c1" => coherence(name, heisenberg(DESK_SPINS), hy_scan(BALANCED)),
        "fig1c2" => coherence(name, heisenberg(DESK_SPINS), hy_scan(REAL)),
        "fig2a" => coherence(name, fermi(), hy_scan(BALANCED)),
        "fig2b" => coherence(name, fermi(), hy_scan(REAL)),
        "figS1" => coherence(
            name,
            ising(DESK_SPINS),
            ScanAxes {
                hy: HY_SET.to_vec(),
                theta: thetas(&[45.0, 48.0, 52.0, 55.0]),
                delta_magnitude: Some(MAG),
                ..ScanAxes::default()
            },
        ),
        "figS2" => coherence(
            name,
            ising(DESK_SPINS),
            ScanAxes {
                hy: vec![0.9],
                theta: thetas(&[45.0, 48.0, 50.0, 52.0, 55.0]),
                delta_magnitude: Some(MAG),
                ..ScanAxes::default()
            },
        ),
        "figS3" => Resolved {
            name: name.into(),
            experiment: Experiment::Susceptibility,
            models: vec![ising(8), heisenberg(4)],
            scan: ScanAxes {
                delta: vec![BALANCED, REAL],
                map_hx: grid(0.0, 2.0, 21),
                map_hy: grid(0.0, 2.0, 21),
                ..ScanAxes::default()
            },
            ..Resolved::custom(ising(8))
        },
        "fig3b" => {
            let m = ModelSpec::ising(2, 0.01, (1.0, 0.0), (0.5, 0.5));
            Resolved {
                name: name.into(),
                experiment: Experiment::Circuit,
                t_max: 2.0,
                scan: ScanAxes {
                    hy: vec![0.2, 0.5, 0.9],
                    ..ScanAxes::default()
                },
                method: Method::Dense,
                shots: 200_000,
                tolerance: 1e-2,
                ..Resolved::custom(m)
            }
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown preset `{other}`; known presets: {}",
                PRESETS.join(", ")
            )))
        }
    };
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_resolves() {
        for name in PRESETS {
            let r = preset(name).unwrap();
            assert_eq!(r.name, name);
        }
        assert!(preset("fig4").is_err());
    }

    #[test]
    fn theta_scan_values() {
        let r = preset("figS2").unwrap();
        assert_eq!(r.scan.hy, vec![0.9]);
        assert_eq!(r.scan.theta.len(), 5);
        assert!((r.scan.theta[2] - PI / 4.0).abs() < 1e-15);
    }
}
