//! Preparation of a real two-qubit state from `|00⟩` with three `RY`
//! rotations and one `CZ`.
//!
//! Amplitudes `ξ = (ξ₀, ξ₁, ξ₂, ξ₃)` are indexed by `2a + b`, where `a` is
//! qubit 1 and `b` is qubit 0. The disentangling sequence is
//! `RY(θ₁)` on qubit 0, `CZ`, then `RY(θ₂)` on qubit 1 and `RY(θ₃)` on
//! qubit 0, and it maps `ξ` to `±|00⟩`. The preparation circuit runs it
//! backwards with negated angles.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::{Circuit, GateKind};
use crate::error::{Error, Result};
use crate::operator::StateVector;

const DEGENERATE: f64 = 1e-12;

/// Rotation angles and the intermediate constants they come from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UgAngles {
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
    pub k: f64,
    pub varsigma: f64,
    pub tau: f64,
    pub a: [f64; 4],
    pub gamma: [f64; 2],
}

fn nonzero(x: f64, denominator: &'static str) -> Result<f64> {
    if x.abs() <= DEGENERATE || !x.is_finite() {
        Err(Error::DegenerateSynthesis { denominator })
    } else {
        Ok(x)
    }
}

/// Angles for a real unit vector `ξ`.
///
/// When `ξ₂ = ξ₃ = 0` the state is a product with qubit 1 in `|0⟩`; then
/// `k = 0` and only `θ₃ = 2 atan(−ξ₁/ξ₀)` is nonzero.
pub fn ug_angles(xi: [f64; 4]) -> Result<UgAngles> {
    if xi.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    let norm: f64 = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParameter(format!(
            "ξ must be unit norm, got {norm}"
        )));
    }
    let [x0, x1, x2, x3] = xi;
    let upper = x2 * x2 + x3 * x3;
    let lower = x0 * x0 + x1 * x1;

    if upper <= DEGENERATE * DEGENERATE {
        return Ok(UgAngles {
            theta1: 0.0,
            theta2: 0.0,
            theta3: 2.0 * (-x1 / x0).atan(),
            k: 0.0,
            varsigma: 0.0,
            tau: 0.0,
            a: [1.0, 0.0, 0.0, 0.0],
            gamma: [x0, x1],
        });
    }

    nonzero(lower, "ξ₀² + ξ₁²")?;
    let cross = nonzero(x0 * x2 + x1 * x3, "ξ₀ξ₂ + ξ₁ξ₃")?;
    let k = -cross.signum() * (upper / lower).sqrt();
    let theta1 = 2.0 * ((x2 - k * x0) / nonzero(x3 - k * x1, "ξ₃ − kξ₁")?).atan();
    let varsigma = nonzero(
        ((-k * x0 + x2).powi(2) + (-k * x1 + x3).powi(2)).sqrt(),
        "ς",
    )?;
    let root = (1.0 + k * k).sqrt();
    let a0 = 1.0 / root;
    let a1 = k / root;
    let a2 = root * (-x1 * x2 + x0 * x3) / varsigma;
    let a3 = root * (k * cross - upper) / (k * varsigma);
    let tau = nonzero(
        (((a0 * a3).powi(2) + (a1 * a3).powi(2)) * varsigma * varsigma).sqrt(),
        "τ",
    )?;
    let gamma0 = (a0 * a3 + k * a1 * a3) * (-x1 * x2 + x0 * x3) / tau;
    let gamma1 = (a1 * a3 * (k * x0 * x2 - x2 * x2 + k * x1 * x3 - x3 * x3)
        + a0 * a3 * (-k * x0 * x0 + x0 * x2 - k * x1 * x1 + x1 * x3))
        / tau;
    let theta2 = 2.0 * (-a1 * a3 / nonzero(a0 * a3, "a₀a₃")?).atan();
    let theta3 = 2.0 * (-gamma1 / nonzero(gamma0, "γ₀")?).atan();
    Ok(UgAngles {
        theta1,
        theta2,
        theta3,
        k,
        varsigma,
        tau,
        a: [a0, a1, a2, a3],
        gamma: [gamma0, gamma1],
    })
}

/// Two-qubit circuit with `U_G|00⟩ = ±ξ`.
pub fn synthesize_ug(xi: [f64; 4]) -> Result<Circuit> {
    let ang = ug_angles(xi)?;
    let mut c = Circuit::new(2);
    c.push(GateKind::RY(-ang.theta2), &[1])?;
    c.push(GateKind::RY(-ang.theta3), &[0])?;
    c.push(GateKind::CZ, &[0, 1])?;
    c.push(GateKind::RY(-ang.theta1), &[0])?;
    Ok(c)
}

/// [`synthesize_ug`] for a state vector, which must be real up to a global
/// phase.
pub fn synthesize_ug_state(g: &StateVector) -> Result<Circuit> {
    if g.dim() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: g.dim(),
        });
    }
    let pivot = g
        .amplitudes()
        .iter()
        .copied()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .unwrap_or(C64::new(0.0, 0.0));
    if pivot.norm() == 0.0 {
        return Err(Error::InvalidParameter("zero state".into()));
    }
    let phase = pivot.conj() / pivot.norm();
    let mut xi = [0.0; 4];
    for (x, a) in xi.iter_mut().zip(g.amplitudes()) {
        let r = a * phase;
        if r.im.abs() > 1e-12 {
            return Err(Error::InvalidParameter(
                "U_G synthesis needs real amplitudes".into(),
            ));
        }
        *x = r.re;
    }
    synthesize_ug(xi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::run_exact;
    use crate::linalg::{adjoint, max_abs_diff};
    use faer::Mat;

    fn prepared(c: &Circuit) -> StateVector {
        run_exact(c, &StateVector::basis(4, 0)).unwrap().0
    }

    fn up_to_sign(a: &StateVector, xi: [f64; 4]) -> f64 {
        let x = StateVector::from_real(&xi);
        a.distance(&x)
            .min(a.distance(&x.scaled(C64::new(-1.0, 0.0))))
    }

    #[test]
    fn trivial_state_is_identity() {
        let c = synthesize_ug([1.0, 0.0, 0.0, 0.0]).unwrap();
        let ang = ug_angles([1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!((ang.theta1, ang.theta2, ang.theta3.abs()), (0.0, 0.0, 0.0));
        assert!(prepared(&c).distance(&StateVector::basis(4, 0)) < 1e-15);
    }

    #[test]
    fn product_states_with_qubit1_zero() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for xi in [
            [0.0, 1.0, 0.0, 0.0],
            [s, -s, 0.0, 0.0],
            [-0.6, 0.8, 0.0, 0.0],
        ] {
            let c = synthesize_ug(xi).unwrap();
            assert!(up_to_sign(&prepared(&c), xi) < 1e-12);
        }
    }

    #[test]
    fn hand_checked_state() {
        let xi = [0.1, 0.3, 0.5, (1.0f64 - 0.35).sqrt()];
        let c = synthesize_ug(xi).unwrap();
        assert!(up_to_sign(&prepared(&c), xi) < 1e-12);
        let u = c.dense_unitary().unwrap();
        assert!(max_abs_diff(&(&adjoint(&u) * &u), &Mat::identity(4, 4)) < 1e-12);
    }

    #[test]
    fn degenerate_inputs_name_the_denominator() {
        // ξ₀ξ₂ + ξ₁ξ₃ = 0 with ξ₂, ξ₃ not both zero
        let s = std::f64::consts::FRAC_1_SQRT_2;
        match synthesize_ug([s, 0.0, 0.0, s]) {
            Err(Error::DegenerateSynthesis { denominator }) => {
                assert_eq!(denominator, "ξ₀ξ₂ + ξ₁ξ₃")
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(synthesize_ug([0.0, 0.0, 1.0, 0.0]).is_err());
        assert!(synthesize_ug([0.5, 0.5, 0.5, 0.6]).is_err());
    }

    #[test]
    fn complex_state_rejected() {
        let g = StateVector::new(vec![
            C64::new(0.5, 0.0),
            C64::new(0.0, 0.5),
            C64::new(0.5, 0.0),
            C64::new(0.5, 0.0),
        ]);
        assert!(synthesize_ug_state(&g).is_err());
        let real = StateVector::from_real(&[0.1, 0.3, 0.5, (1.0f64 - 0.35).sqrt()])
            .scaled(C64::new(0.0, 1.0));
        assert!(synthesize_ug_state(&real).is_ok());
    }
}
