//! Acquisition geometry: vertical wavenumber and height of ambiguity.
//!
//! All angles are radians. The height of ambiguity is handled as a positive
//! magnitude; callers holding signed baselines take the absolute value first.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};

/// Acquisition parameters of one interferometric scene.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionGeometry {
    /// Radar carrier wavelength in meters.
    pub wavelength: f64,
    /// Incidence angle in radians, in (0, π/2).
    pub incidence_angle: f64,
    /// Baseline-induced incidence-angle shift in radians.
    pub delta_incidence: f64,
    /// Free-space vertical wavenumber in rad/m.
    pub kz: f64,
    /// Height of ambiguity in meters.
    pub hoa: f64,
}

impl AcquisitionGeometry {
    pub fn from_baseline(
        wavelength: f64,
        incidence_angle: f64,
        delta_incidence: f64,
    ) -> Result<Self> {
        let kz = compute_kz(wavelength, incidence_angle, delta_incidence)?;
        Ok(Self {
            wavelength,
            incidence_angle,
            delta_incidence,
            kz,
            hoa: kz_to_hoa(kz)?,
        })
    }

    /// Builds the geometry that produces a given height of ambiguity at a
    /// known wavelength and incidence angle, solving for the angular shift.
    pub fn from_hoa(wavelength: f64, incidence_angle: f64, hoa: f64) -> Result<Self> {
        ensure_positive("wavelength", wavelength)?;
        check_incidence(incidence_angle)?;
        let kz = hoa_to_kz(hoa)?;
        let delta_incidence = kz * wavelength * incidence_angle.sin() / (4.0 * PI);
        Ok(Self {
            wavelength,
            incidence_angle,
            delta_incidence,
            kz,
            hoa,
        })
    }
}

fn check_incidence(incidence_angle: f64) -> Result<()> {
    if incidence_angle.is_finite() && incidence_angle > 0.0 && incidence_angle < FRAC_PI_2 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "incidence angle must lie in (0, π/2) rad, got {incidence_angle}"
        )))
    }
}

/// Free-space vertical wavenumber `(4π/λ)·Δθ/sin θ` in rad/m.
pub fn compute_kz(wavelength: f64, incidence_angle: f64, delta_incidence: f64) -> Result<f64> {
    ensure_positive("wavelength", wavelength)?;
    ensure_positive("delta_incidence", delta_incidence)?;
    check_incidence(incidence_angle)?;
    Ok(4.0 * PI / wavelength * delta_incidence / incidence_angle.sin())
}

/// Height of ambiguity `2π/kz`.
pub fn kz_to_hoa(kz: f64) -> Result<f64> {
    ensure_positive("kz", kz)?;
    Ok(TAU / kz)
}

/// Vertical wavenumber `2π/HoA`.
pub fn hoa_to_kz(hoa: f64) -> Result<f64> {
    ensure_positive("hoa", hoa)?;
    Ok(TAU / hoa)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_4, FRAC_PI_6};

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn kz_examples() {
        // 4π/0.031 · 1e-4 / sin(π/4)
        let kz = compute_kz(0.031, FRAC_PI_4, 1.0e-4).unwrap();
        assert!((kz - 0.057_328).abs() < 1e-5, "{kz}");
        let kz = compute_kz(0.031, FRAC_PI_6, 2.0e-4).unwrap();
        assert!((kz - 0.162_149).abs() < 1e-5, "{kz}");
        let tiny = compute_kz(0.031, FRAC_PI_4, 1.0e-15).unwrap();
        assert!(tiny > 0.0 && tiny < 1e-10);
    }

    #[test]
    fn kz_rejects_bad_inputs() {
        assert!(compute_kz(0.0, 0.5, 1e-4).is_err());
        assert!(compute_kz(0.031, 0.0, 1e-4).is_err());
        assert!(compute_kz(0.031, FRAC_PI_2, 1e-4).is_err());
        assert!(compute_kz(0.031, 0.5, -1e-4).is_err());
        assert!(compute_kz(f64::NAN, 0.5, 1e-4).is_err());
    }

    #[test]
    fn hoa_examples() {
        assert!(rel(kz_to_hoa(0.1).unwrap(), 62.831_853_071_795_86) < 1e-15);
        assert_eq!(kz_to_hoa(TAU).unwrap(), 1.0);
        assert!((kz_to_hoa(0.05733).unwrap() - 109.6).abs() < 0.05);
        assert!(rel(hoa_to_kz(62.83185).unwrap(), 0.1) < 1e-6);
        assert_eq!(hoa_to_kz(1.0).unwrap(), TAU);
        assert!(rel(hoa_to_kz(50.0).unwrap(), 0.125_663_706_143_591_7) < 1e-15);
        assert!(kz_to_hoa(0.0).is_err());
        assert!(hoa_to_kz(-50.0).is_err());
    }

    #[test]
    fn geometry_constructors_agree() {
        let g = AcquisitionGeometry::from_baseline(0.031, FRAC_PI_4, 1.0e-4).unwrap();
        assert!(rel(g.hoa * g.kz, TAU) < 1e-12);
        let h = AcquisitionGeometry::from_hoa(0.031, FRAC_PI_4, g.hoa).unwrap();
        assert!(rel(h.delta_incidence, g.delta_incidence) < 1e-12);
        assert!(rel(h.kz, g.kz) < 1e-12);
    }

    proptest! {
        #[test]
        fn hoa_round_trip(x in 1e-3f64..10.0) {
            let back = hoa_to_kz(kz_to_hoa(x).unwrap()).unwrap();
            prop_assert!(rel(back, x) < 1e-12);
        }

        #[test]
        fn kz_monotone(theta in 0.05f64..1.5, d in 1e-6f64..1e-3, bump in 1e-3f64..0.05) {
            let base = compute_kz(0.031, theta, d).unwrap();
            prop_assert!(compute_kz(0.031, theta, d * (1.0 + bump)).unwrap() > base);
            let steeper = (theta + bump).min(1.5699);
            prop_assume!(steeper > theta);
            prop_assert!(compute_kz(0.031, steeper, d).unwrap() < base);
        }
    }
}
