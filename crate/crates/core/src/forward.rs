//! Forward model: complex volume decorrelation of a semi-infinite scattering
//! volume and the phase-center elevation offset it implies.
//!
//! With depth `t = −z ≥ 0` below the surface at height `z0`,
//!
//! ```text
//! γ_vol(kz) = e^{j·kz·z0} · ∫₀^∞ f(t)·e^{−j·kz·t} dt / ∫₀^∞ f(t) dt
//! ```
//!
//! so the phase is non-positive for `z0 = 0` and the resulting bias
//! `φ/kz` places the phase center below the surface.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::profiles::{weibull_density, ExponentialProfile, WeibullProfile};
use crate::quadrature::{integrate, QuadSettings};

/// Tail mass of the Weibull distribution left out of the integration range.
pub const WEIBULL_TAIL_MASS: f64 = 1e-10;

/// Relative mass below which a generic profile's tail segment ends integration.
const GENERIC_TAIL_FRACTION: f64 = 1e-13;
/// Depth of the first integration segment for generic profiles (m).
const GENERIC_FIRST_SEGMENT: f64 = 1e-6;
/// Depth beyond which non-decreasing segment masses flag a non-integrable profile (m).
const GENERIC_TAIL_CHECK_DEPTH: f64 = 1e3;
/// Depth at which integration of a generic profile gives up (m).
const GENERIC_MAX_DEPTH: f64 = 1e7;

/// Modulus and phase of the volume decorrelation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeCoherence {
    pub magnitude: f64,
    /// Phase in (−π, π].
    pub phase: f64,
}

impl VolumeCoherence {
    pub fn from_complex(z: Complex64) -> Self {
        Self {
            magnitude: z.norm(),
            phase: wrap_phase(z.arg()),
        }
    }

    pub fn to_complex(&self) -> Complex64 {
        Complex64::from_polar(self.magnitude, self.phase)
    }
}

/// Maps an angle into (−π, π].
pub fn wrap_phase(phase: f64) -> f64 {
    let mut p = phase % (2.0 * PI);
    if p <= -PI {
        p += 2.0 * PI;
    } else if p > PI {
        p -= 2.0 * PI;
    }
    p
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForwardOptions {
    /// Height of the volume surface (m).
    pub surface_height_z0: f64,
    pub quad_rel_tol: f64,
    pub quad_max_subdivisions: usize,
}

impl Default for ForwardOptions {
    fn default() -> Self {
        Self {
            surface_height_z0: 0.0,
            quad_rel_tol: 1e-9,
            quad_max_subdivisions: 200,
        }
    }
}

impl ForwardOptions {
    pub fn validate(&self) -> Result<()> {
        if !self.surface_height_z0.is_finite() {
            return Err(Error::Domain("surface height must be finite".into()));
        }
        if !(self.quad_rel_tol > 0.0 && self.quad_rel_tol <= 1e-3) {
            return Err(Error::Domain(format!(
                "quad_rel_tol must lie in (0, 1e-3], got {}",
                self.quad_rel_tol
            )));
        }
        if self.quad_max_subdivisions < 10 {
            return Err(Error::Domain(format!(
                "quad_max_subdivisions must be >= 10, got {}",
                self.quad_max_subdivisions
            )));
        }
        Ok(())
    }

    fn surface_factor(&self, kz: f64) -> Complex64 {
        Complex64::from_polar(1.0, kz * self.surface_height_z0)
    }

    fn settings(&self, abs_tol: f64, max_panel_width: f64) -> QuadSettings {
        QuadSettings {
            rel_tol: self.quad_rel_tol,
            abs_tol,
            max_panel_width: Some(max_panel_width),
            max_subdivisions: self.quad_max_subdivisions,
        }
    }
}

/// Closed-form coherence of the exponential (uniform-volume) profile:
/// `e^{j·kz·z0} / (1 + j·kz·d_pen/2)`.
pub fn gamma_vol_exponential(
    profile: &ExponentialProfile,
    kz: f64,
    opts: &ForwardOptions,
) -> Result<VolumeCoherence> {
    ensure_positive("kz", kz)?;
    ensure_positive("d_pen", profile.d_pen)?;
    let x = 0.5 * kz * profile.d_pen;
    Ok(VolumeCoherence {
        magnitude: 1.0 / x.hypot(1.0),
        phase: wrap_phase(kz * opts.surface_height_z0 - x.atan()),
    })
}

/// Elevation offset of the exponential profile's phase center for `z0 = 0`.
pub fn exponential_bias(d_pen: f64, kz: f64) -> f64 {
    -(0.5 * kz * d_pen).atan() / kz
}

/// Derivative of [`exponential_bias`] with respect to `d_pen`.
pub fn exponential_bias_derivative(d_pen: f64, kz: f64) -> f64 {
    let x = 0.5 * kz * d_pen;
    -0.5 / (1.0 + x * x)
}

/// Weibull coherence: a series near the surface and adaptive quadrature
/// below it.
pub fn gamma_vol_weibull(
    profile: &WeibullProfile,
    kz: f64,
    opts: &ForwardOptions,
) -> Result<VolumeCoherence> {
    weibull_gamma(profile.lambda_w, profile.k_w, kz, opts).map(VolumeCoherence::from_complex)
}

/// Weibull coherence without the admissible-range check on the parameters;
/// used for finite-difference stencils that step just outside the range.
pub(crate) fn weibull_gamma(
    lambda_w: f64,
    k_w: f64,
    kz: f64,
    opts: &ForwardOptions,
) -> Result<Complex64> {
    ensure_positive("kz", kz)?;
    ensure_positive("lambda_w", lambda_w)?;
    ensure_positive("k_w", k_w)?;
    opts.validate()?;

    let half_period = PI / kz;
    let inv_k = 1.0 / k_w;
    let t_max = (-WEIBULL_TAIL_MASS.ln()).powf(inv_k) / lambda_w;
    let t_split = (1.0 / lambda_w).min(half_period).min(t_max);

    let head = weibull_head(lambda_w, k_w, kz, t_split);

    let tail = integrate(
        |t: f64| {
            let w = weibull_density(lambda_w, k_w, t);
            let (sin, cos) = (kz * t).sin_cos();
            [w * cos, -w * sin, w]
        },
        t_split,
        t_max,
        &opts.settings(opts.quad_rel_tol * head.mass, half_period),
    )?;

    let mass = head.mass + tail.value[2];
    debug_assert!((mass - 1.0).abs() < 1e-6, "weibull mass {mass}");
    let num = head.transform + Complex64::new(tail.value[0], tail.value[1]);
    Ok(opts.surface_factor(kz) * num / mass)
}

struct HeadIntegral {
    transform: Complex64,
    mass: f64,
}

/// `∫₀^τ f(t)·e^{−j·kz·t} dt` for the Weibull density, by series.
///
/// With `u = (λt)^k` the integral is `∫₀^c e^{−u}·e^{−j(kz/λ)u^{1/k}} du`,
/// `c = (λτ)^k`. Expanding the phase factor gives
/// `Σₙ (−jX)ⁿ/n! · c·e^{−c} · Σₘ cᵐ/(a(a+1)…(a+m))`, `a = 1 + n/k`, `X = kz·τ`.
/// Both series converge quickly for `c ≤ 1` and `X ≤ π`.
fn weibull_head(lambda_w: f64, k_w: f64, kz: f64, tau: f64) -> HeadIntegral {
    let c = (lambda_w * tau).powf(k_w);
    let x = kz * tau;
    let prefactor = c * (-c).exp();
    let lower_gamma_series = |a: f64| {
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut m = 1.0;
        while term > f64::EPSILON * 1e-2 * sum {
            term *= c / (a + m);
            sum += term;
            m += 1.0;
        }
        sum
    };
    let mut transform = Complex64::new(0.0, 0.0);
    let mut power = Complex64::new(1.0, 0.0);
    let mut n = 0.0_f64;
    loop {
        let term = power * (prefactor * lower_gamma_series(1.0 + n / k_w));
        transform += term;
        n += 1.0;
        power *= Complex64::new(0.0, -x / n);
        if n > x && power.norm() * prefactor <= f64::EPSILON * 1e-2 * transform.norm() {
            break;
        }
    }
    HeadIntegral {
        transform,
        mass: -(-c).exp_m1(),
    }
}

/// Normalized coherence of an arbitrary non-negative profile.
///
/// Integration proceeds over geometrically growing depth segments, starting
/// at a micrometre so that very shallow profiles are resolved, until a
/// segment carries a negligible fraction of the accumulated mass.
pub fn gamma_vol_numeric<F>(
    profile_fn: F,
    kz: f64,
    opts: &ForwardOptions,
) -> Result<VolumeCoherence>
where
    F: Fn(f64) -> f64,
{
    ensure_positive("kz", kz)?;
    opts.validate()?;

    let half_period = PI / kz;
    let integrand = |t: f64| {
        let w = profile_fn(t);
        let (sin, cos) = (kz * t).sin_cos();
        [w * cos, -w * sin, w]
    };

    let mut lo = 0.0;
    let mut hi = GENERIC_FIRST_SEGMENT;
    let mut acc = [0.0f64; 3];
    let mut prev_mass = f64::INFINITY;
    let mut rising = 0;
    loop {
        let abs_tol = opts.quad_rel_tol * acc[2].abs();
        let piece = integrate(integrand, lo, hi, &opts.settings(abs_tol, half_period))?;
        for (a, v) in acc.iter_mut().zip(piece.value) {
            *a += v;
        }
        let mass = piece.value[2];
        if !mass.is_finite() || mass < 0.0 {
            return Err(Error::Domain(format!(
                "profile must be finite and non-negative, segment [{lo}, {hi}] has mass {mass}"
            )));
        }
        if acc[2] > 0.0 && mass <= GENERIC_TAIL_FRACTION * acc[2] {
            break;
        }
        if lo >= GENERIC_TAIL_CHECK_DEPTH {
            rising = if mass >= prev_mass { rising + 1 } else { 0 };
        }
        if rising >= 3 || hi > GENERIC_MAX_DEPTH {
            return Err(Error::NonIntegrable { depth: hi });
        }
        prev_mass = mass;
        lo = hi;
        hi *= 2.0;
    }

    if acc[2] <= 0.0 {
        return Err(Error::Domain("profile has zero total mass".into()));
    }
    let num = Complex64::new(acc[0], acc[1]) / acc[2];
    Ok(VolumeCoherence::from_complex(opts.surface_factor(kz) * num))
}

/// Phase-center offset `φ/kz` in meters.
pub fn phase_to_bias(coh: &VolumeCoherence, kz: f64) -> Result<f64> {
    ensure_positive("kz", kz)?;
    Ok(coh.phase / kz)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> ForwardOptions {
        ForwardOptions::default()
    }

    fn dist(a: &VolumeCoherence, b: &VolumeCoherence) -> f64 {
        (a.to_complex() - b.to_complex()).norm()
    }

    #[test]
    fn head_series_matches_quadrature() {
        for &(l, k, kz) in &[
            (0.3, 0.8, 0.2),
            (0.05, 1.15, 0.063),
            (0.6, 1.5, 0.5),
            (0.2, 1.0, 0.1),
        ] {
            let tau = (1.0_f64 / l).min(PI / kz);
            let head = weibull_head(l, k, kz, tau);
            // t = τ·s^{1/k} turns the density into c·e^{−cs} on [0, 1]
            let c = (l * tau).powf(k);
            let q = integrate(
                |s: f64| {
                    let w = c * (-c * s).exp();
                    let (sin, cos) = (kz * tau * s.powf(1.0 / k)).sin_cos();
                    [w * cos, -w * sin, w]
                },
                0.0,
                1.0,
                &QuadSettings {
                    rel_tol: 1e-12,
                    max_subdivisions: 2000,
                    ..QuadSettings::default()
                },
            )
            .unwrap();
            assert!((head.transform - Complex64::new(q.value[0], q.value[1])).norm() < 1e-11);
            assert!((head.mass - q.value[2]).abs() < 1e-12);
        }
    }

    /// Midpoint Riemann sum of the coherence integral on a dense uniform grid.
    fn riemann_oracle(f: impl Fn(f64) -> f64, kz: f64, t_max: f64, n: usize) -> Complex64 {
        let h = t_max / n as f64;
        let mut num = Complex64::new(0.0, 0.0);
        let mut den = 0.0;
        for i in 0..n {
            let t = (i as f64 + 0.5) * h;
            let w = f(t);
            num += w * Complex64::from_polar(1.0, -kz * t);
            den += w;
        }
        num / den
    }

    #[test]
    fn exponential_example() {
        let p = ExponentialProfile::new(5.0).unwrap();
        let g = gamma_vol_exponential(&p, 0.1, &opts()).unwrap();
        assert!((g.magnitude - 0.970_14).abs() < 1e-5);
        assert!((g.phase - -0.244_98).abs() < 1e-5);
        // the Riemann oracle agrees with the closed form
        let r = riemann_oracle(|t| (-2.0 * t / 5.0).exp(), 0.1, 150.0, 1_000_000);
        assert!((r - g.to_complex()).norm() < 1e-6);
        assert!(gamma_vol_exponential(&p, 0.0, &opts()).is_err());
    }

    #[test]
    fn exponential_limits() {
        let o = ForwardOptions {
            surface_height_z0: 3.0,
            ..opts()
        };
        let g = gamma_vol_exponential(&ExponentialProfile::new(1e-9).unwrap(), 0.2, &o).unwrap();
        assert!((g.magnitude - 1.0).abs() < 1e-12);
        assert!((g.phase - 0.6).abs() < 1e-9);
        let g =
            gamma_vol_exponential(&ExponentialProfile::new(5.0).unwrap(), 1e-9, &opts()).unwrap();
        assert!((g.magnitude - 1.0).abs() < 1e-12 && g.phase.abs() < 1e-8);
    }

    #[test]
    fn amplitude_cancels() {
        let a = ExponentialProfile::with_amplitude(4.0, 1.0).unwrap();
        let b = ExponentialProfile::with_amplitude(4.0, 37.5).unwrap();
        let ga = gamma_vol_numeric(|t| a.eval(t).unwrap(), 0.15, &opts()).unwrap();
        let gb = gamma_vol_numeric(|t| b.eval(t).unwrap(), 0.15, &opts()).unwrap();
        assert!(dist(&ga, &gb) < 1e-12);
    }

    #[test]
    fn numeric_matches_closed_form() {
        let p = ExponentialProfile::new(5.0).unwrap();
        let closed = gamma_vol_exponential(&p, 0.1, &opts()).unwrap();
        let quad = gamma_vol_numeric(|t| p.eval(t).unwrap(), 0.1, &opts()).unwrap();
        assert!(dist(&closed, &quad) < 1e-8 * closed.magnitude);
        let w = WeibullProfile::new(0.4, 1.0).unwrap();
        let quad = gamma_vol_numeric(|t| w.eval(t).unwrap(), 0.3, &opts()).unwrap();
        let closed =
            gamma_vol_exponential(&ExponentialProfile::new(5.0).unwrap(), 0.3, &opts()).unwrap();
        assert!(dist(&closed, &quad) < 1e-8);
    }

    #[test]
    fn numeric_narrow_profile_is_surface_like() {
        let width = 1e-6;
        let g = gamma_vol_numeric(|t| (-t / width).exp() / width, 0.2, &opts()).unwrap();
        assert!((g.magnitude - 1.0).abs() < 1e-9);
        assert!(g.phase.abs() < 1e-6);
    }

    #[test]
    fn numeric_detects_non_integrable_profile() {
        let r = gamma_vol_numeric(|_| 1.0, 0.1, &opts());
        assert!(matches!(r, Err(Error::NonIntegrable { .. })), "{r:?}");
        let r = gamma_vol_numeric(|t| 1.0 / (1.0 + t), 0.1, &opts());
        assert!(matches!(r, Err(Error::NonIntegrable { .. })), "{r:?}");
    }

    #[test]
    fn weibull_reduces_to_exponential() {
        let w = WeibullProfile::new(0.4, 1.0).unwrap();
        let gw = gamma_vol_weibull(&w, 0.1, &opts()).unwrap();
        let ge =
            gamma_vol_exponential(&ExponentialProfile::new(5.0).unwrap(), 0.1, &opts()).unwrap();
        assert!(dist(&gw, &ge) < 1e-7);
    }

    #[test]
    fn weibull_against_dense_riemann_sum() {
        let (l, k, kz) = (0.05, 1.3, 0.1);
        let w = WeibullProfile::new(l, k).unwrap();
        let g = gamma_vol_weibull(&w, kz, &opts()).unwrap();
        let t_max = 40.0f64.powf(1.0 / k) / l;
        let r = riemann_oracle(|t| weibull_density(l, k, t), kz, t_max, 1_000_000);
        assert!((g.to_complex() - r).norm() < 1e-6, "{g:?} vs {r}");
    }

    #[test]
    fn weibull_singular_shape() {
        let (l, k, kz) = (0.1, 0.8, 0.2);
        let g = gamma_vol_weibull(&WeibullProfile::new(l, k).unwrap(), kz, &opts()).unwrap();
        let n = gamma_vol_numeric(|t| weibull_density(l, k, t), kz, &opts()).unwrap();
        assert!(dist(&g, &n) < 1e-7, "{g:?} vs {n:?}");
        assert!(g.phase < 0.0 && g.magnitude < 1.0);
    }

    #[test]
    fn weibull_small_kz_limit() {
        let g = gamma_vol_weibull(&WeibullProfile::new(0.2, 1.3).unwrap(), 1e-9, &opts()).unwrap();
        assert!((g.magnitude - 1.0).abs() < 1e-9);
        assert!(g.phase.abs() < 1e-7);
    }

    #[test]
    fn weibull_mass_is_normalized() {
        for &(l, k) in &[(0.01, 0.8), (0.3, 1.15), (0.6, 1.5)] {
            let t_max = (-WEIBULL_TAIL_MASS.ln()).powf(1.0 / k) / l;
            let m = integrate(
                |t: f64| [weibull_density(l, k, t)],
                0.0,
                t_max,
                &QuadSettings {
                    rel_tol: 1e-11,
                    max_subdivisions: 2000,
                    ..Default::default()
                },
            )
            .unwrap();
            assert!(
                (m.value[0] - (1.0 - WEIBULL_TAIL_MASS)).abs() < 1e-8,
                "{l} {k}: {}",
                m.value[0]
            );
        }
    }

    #[test]
    fn phase_to_bias_examples() {
        let c = |phase| VolumeCoherence {
            magnitude: 0.9,
            phase,
        };
        assert!((phase_to_bias(&c(-0.24498), 0.1).unwrap() - -2.4498).abs() < 1e-12);
        assert_eq!(phase_to_bias(&c(0.0), 0.37).unwrap(), 0.0);
        assert!((phase_to_bias(&c(-0.451), 0.1).unwrap() - -4.51).abs() < 1e-12);
        assert!(phase_to_bias(&c(0.0), 0.0).is_err());
    }

    #[test]
    fn small_kz_bias_is_half_penetration_depth() {
        for d in [0.5, 5.0, 20.0] {
            let g =
                gamma_vol_exponential(&ExponentialProfile::new(d).unwrap(), 1e-4, &opts()).unwrap();
            let b = phase_to_bias(&g, 1e-4).unwrap();
            assert!((b - -d / 2.0).abs() < 1e-3 * d / 2.0);
        }
    }

    #[test]
    fn coherence_monotone_in_depth_and_kz() {
        let mag = |d: f64, kz: f64| {
            gamma_vol_exponential(&ExponentialProfile::new(d).unwrap(), kz, &opts())
                .unwrap()
                .magnitude
        };
        let mut prev = 1.0;
        for i in 1..50 {
            let m = mag(0.5 * i as f64, 0.1);
            assert!(m < prev);
            prev = m;
        }
        let mut prev = 1.0;
        for i in 1..50 {
            let m = mag(5.0, 0.01 * i as f64);
            assert!(m < prev);
            prev = m;
        }
    }

    #[test]
    fn bias_magnitude_decreases_with_kz() {
        let kzs: Vec<f64> = (0..=45).map(|i| 0.05 + 0.01 * i as f64).collect();
        for d in [1.0, 5.0, 10.0] {
            let p = ExponentialProfile::new(d).unwrap();
            let b: Vec<f64> = kzs
                .iter()
                .map(|&kz| {
                    phase_to_bias(&gamma_vol_exponential(&p, kz, &opts()).unwrap(), kz)
                        .unwrap()
                        .abs()
                })
                .collect();
            assert!(b.windows(2).all(|w| w[1] < w[0]), "d_pen={d}");
        }
        for k in [0.8, 1.0, 1.5] {
            let p = WeibullProfile::new(0.05, k).unwrap();
            let b: Vec<f64> = kzs
                .iter()
                .map(|&kz| {
                    phase_to_bias(&gamma_vol_weibull(&p, kz, &opts()).unwrap(), kz)
                        .unwrap()
                        .abs()
                })
                .collect();
            assert!(b.windows(2).all(|w| w[1] < w[0]), "k_w={k}: {b:?}");
        }
    }

    #[test]
    fn options_validation() {
        let bad = ForwardOptions {
            quad_rel_tol: 1e-2,
            ..opts()
        };
        assert!(bad.validate().is_err());
        let bad = ForwardOptions {
            quad_max_subdivisions: 5,
            ..opts()
        };
        assert!(bad.validate().is_err());
        let w = WeibullProfile::new(0.3, 1.0).unwrap();
        assert!(gamma_vol_weibull(&w, 0.1, &bad).is_err());
    }

    #[test]
    fn wrap_phase_range() {
        assert_eq!(wrap_phase(PI), PI);
        assert_eq!(wrap_phase(-PI), PI);
        assert!((wrap_phase(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_phase(0.5) - 0.5).abs() < 1e-15);
    }
}
