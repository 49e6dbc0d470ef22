//! Training-free uniform-volume inversion and DEM correction.
//!
//! Input coherence is assumed to be pure volume decorrelation: temporal,
//! range-spectral and system terms must already be compensated by whatever
//! produced the samples.

use crate::error::{ensure_positive, Error, Result};

/// Penetration bias of a uniform volume from the coherence magnitude alone:
/// `−atan(√(1/|γ|² − 1)) / kz`.
pub fn uv_bias(gamma_mag: f64, kz: f64) -> Result<f64> {
    ensure_positive("kz", kz)?;
    if !(gamma_mag > 0.0 && gamma_mag <= 1.0) {
        return Err(Error::Domain(format!(
            "coherence magnitude must lie in (0, 1], got {gamma_mag}"
        )));
    }
    Ok(-(1.0 / (gamma_mag * gamma_mag) - 1.0).sqrt().atan() / kz)
}

/// Per-sample UV biases along with how many coherences were clamped to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct UvEstimates {
    pub biases: Vec<f64>,
    pub n_clamped: usize,
}

/// [`uv_bias`] over paired slices. Coherence magnitudes slightly above one,
/// as produced by noisy estimators, are clamped to one and counted.
pub fn uv_bias_batch(gamma_mags: &[f64], kzs: &[f64]) -> Result<UvEstimates> {
    if gamma_mags.len() != kzs.len() {
        return Err(Error::Dimension(format!(
            "{} coherences vs {} wavenumbers",
            gamma_mags.len(),
            kzs.len()
        )));
    }
    let mut n_clamped = 0;
    let biases = gamma_mags
        .iter()
        .zip(kzs)
        .map(|(&g, &kz)| {
            let g = if g > 1.0 && g.is_finite() {
                n_clamped += 1;
                1.0
            } else {
                g
            };
            uv_bias(g, kz)
        })
        .collect::<Result<Vec<_>>>()?;
    if n_clamped > 0 {
        log::warn!("clamped {n_clamped} coherence magnitudes above 1");
    }
    Ok(UvEstimates { biases, n_clamped })
}

/// Removes an estimated bias from an InSAR elevation.
pub fn correct_elevation(h_insar: f64, bias_estimate: f64) -> f64 {
    h_insar - bias_estimate
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{gamma_vol_exponential, phase_to_bias, ForwardOptions};
    use crate::profiles::ExponentialProfile;
    use proptest::prelude::*;

    #[test]
    fn uv_examples() {
        assert!((uv_bias(0.97014, 0.1).unwrap() - -2.4498).abs() < 1e-3);
        assert_eq!(uv_bias(1.0, 0.23).unwrap(), 0.0);
        let b = uv_bias(0.9, 0.1).unwrap();
        assert!((b - -(0.484_322_104_837_7f64).atan() / 0.1).abs() < 1e-9);
        assert!((b - -4.510).abs() < 1e-3);
    }

    #[test]
    fn uv_domain() {
        assert!(uv_bias(0.0, 0.1).is_err());
        assert!(uv_bias(1.01, 0.1).is_err());
        assert!(uv_bias(f64::NAN, 0.1).is_err());
        assert!(uv_bias(0.9, 0.0).is_err());
    }

    #[test]
    fn batch_clamps_super_unit_coherence() {
        let est = uv_bias_batch(&[0.9, 1.02, 1.0], &[0.1, 0.1, 0.1]).unwrap();
        assert_eq!(est.n_clamped, 1);
        assert_eq!(est.biases[1], 0.0);
        assert!(uv_bias_batch(&[0.0], &[0.1]).is_err());
        assert!(uv_bias_batch(&[0.9], &[]).is_err());
    }

    #[test]
    fn correction() {
        assert_eq!(correct_elevation(100.0, -3.0), 103.0);
        assert_eq!(correct_elevation(42.5, 0.0), 42.5);
        assert_eq!(correct_elevation(2500.0, -4.2), 2504.2);
    }

    proptest! {
        #[test]
        fn uv_inverts_exponential_forward_model(ld in (0.1f64).ln()..(20.0f64).ln(), lk in (0.01f64).ln()..(0.5f64).ln()) {
            let (d, kz) = (ld.exp(), lk.exp());
            let g = gamma_vol_exponential(&ExponentialProfile::new(d).unwrap(), kz, &ForwardOptions::default()).unwrap();
            let direct = phase_to_bias(&g, kz).unwrap();
            prop_assert!((uv_bias(g.magnitude, kz).unwrap() - direct).abs() < 1e-9);
        }

        #[test]
        fn uv_more_negative_as_coherence_drops(g in 0.05f64..0.999, dg in 1e-4f64..0.04, kz in 0.01f64..0.5) {
            prop_assert!(uv_bias(g, kz).unwrap() > uv_bias(g - dg * g, kz).unwrap());
        }
    }
}
