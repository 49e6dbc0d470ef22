//! Parametric vertical scattering profiles.
//!
//! Profiles are functions of the positive depth `t` below the surface. The
//! exponential profile models a uniform lossy volume; the Weibull profile is
//! a normalized density with a scale and a shape parameter.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};

/// Smallest one-way penetration depth a model may produce (m).
pub const D_PEN_MIN: f64 = 0.1;
/// Largest one-way penetration depth a model may produce (m).
pub const D_PEN_MAX: f64 = 20.0;
/// Admissible Weibull scale λ_w (1/m).
pub const WEIBULL_SCALE_RANGE: ParamRange = ParamRange { lo: 0.01, hi: 0.6 };
/// Admissible Weibull shape k_w.
pub const WEIBULL_SHAPE_RANGE: ParamRange = ParamRange { lo: 0.8, hi: 1.5 };

/// Closed interval `[lo, hi]` of one profile parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamRange {
    pub lo: f64,
    pub hi: f64,
}

impl ParamRange {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::Domain(format!(
                "invalid parameter range [{lo}, {hi}]"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    /// Clamps `x` into the range; NaN maps to the lower bound.
    pub fn clamp(&self, x: f64) -> f64 {
        if x.is_nan() {
            self.lo
        } else {
            x.clamp(self.lo, self.hi)
        }
    }

    /// Affine map of the unit interval onto the range.
    pub fn from_unit(&self, y: f64) -> f64 {
        self.lo + self.width() * y
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    Exponential,
    Weibull,
}

impl ProfileKind {
    pub fn n_params(self) -> usize {
        match self {
            ProfileKind::Exponential => 1,
            ProfileKind::Weibull => 2,
        }
    }

    pub fn default_ranges(self) -> Vec<ParamRange> {
        match self {
            ProfileKind::Exponential => vec![ParamRange {
                lo: D_PEN_MIN,
                hi: D_PEN_MAX,
            }],
            ProfileKind::Weibull => vec![WEIBULL_SCALE_RANGE, WEIBULL_SHAPE_RANGE],
        }
    }
}

impl fmt::Display for ProfileKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProfileKind::Exponential => "exponential",
            ProfileKind::Weibull => "weibull",
        })
    }
}

impl FromStr for ProfileKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exponential" | "exp" => Ok(ProfileKind::Exponential),
            "weibull" => Ok(ProfileKind::Weibull),
            other => Err(Error::Config(format!("unknown profile kind `{other}`"))),
        }
    }
}

/// Uniform-volume profile `σ·exp(−2t/d_pen)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentialProfile {
    /// One-way penetration depth (m).
    pub d_pen: f64,
    /// Nominal volume scattering coefficient. Cancels in normalized coherence.
    pub sigma_v0: f64,
}

impl ExponentialProfile {
    pub fn new(d_pen: f64) -> Result<Self> {
        Self::with_amplitude(d_pen, 1.0)
    }

    pub fn with_amplitude(d_pen: f64, sigma_v0: f64) -> Result<Self> {
        ensure_positive("d_pen", d_pen)?;
        ensure_positive("sigma_v0", sigma_v0)?;
        Ok(Self { d_pen, sigma_v0 })
    }

    /// Backscattered power density at `depth` meters below the surface.
    pub fn eval(&self, depth: f64) -> Result<f64> {
        check_depth(depth)?;
        Ok(self.sigma_v0 * (-2.0 * depth / self.d_pen).exp())
    }
}

/// Weibull density profile with scale `lambda_w` (1/m) and shape `k_w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeibullProfile {
    pub lambda_w: f64,
    pub k_w: f64,
}

impl WeibullProfile {
    /// Fails unless both parameters lie in their admissible ranges.
    pub fn new(lambda_w: f64, k_w: f64) -> Result<Self> {
        if !WEIBULL_SCALE_RANGE.contains(lambda_w) {
            return Err(Error::Domain(format!(
                "lambda_w = {lambda_w} outside [{}, {}]",
                WEIBULL_SCALE_RANGE.lo, WEIBULL_SCALE_RANGE.hi
            )));
        }
        if !WEIBULL_SHAPE_RANGE.contains(k_w) {
            return Err(Error::Domain(format!(
                "k_w = {k_w} outside [{}, {}]",
                WEIBULL_SHAPE_RANGE.lo, WEIBULL_SHAPE_RANGE.hi
            )));
        }
        Ok(Self { lambda_w, k_w })
    }

    /// Density at `depth`. For `k_w < 1` the density diverges at the surface
    /// and evaluation at exactly zero depth is rejected.
    pub fn eval(&self, depth: f64) -> Result<f64> {
        check_depth(depth)?;
        if depth == 0.0 && self.k_w < 1.0 {
            return Err(Error::Singularity {
                depth,
                shape: self.k_w,
            });
        }
        Ok(weibull_density(self.lambda_w, self.k_w, depth))
    }
}

/// Weibull density without range checks; `depth` must be ≥ 0.
pub(crate) fn weibull_density(lambda_w: f64, k_w: f64, depth: f64) -> f64 {
    let x = lambda_w * depth;
    if k_w == 1.0 {
        return lambda_w * (-x).exp();
    }
    let xk = x.powf(k_w);
    lambda_w * k_w * x.powf(k_w - 1.0) * (-xk).exp()
}

fn check_depth(depth: f64) -> Result<()> {
    if depth.is_finite() && depth >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "depth must be finite and >= 0, got {depth}"
        )))
    }
}

/// A validated profile of either family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScatteringProfile {
    Exponential(ExponentialProfile),
    Weibull(WeibullProfile),
}

impl ScatteringProfile {
    pub fn kind(&self) -> ProfileKind {
        match self {
            ScatteringProfile::Exponential(_) => ProfileKind::Exponential,
            ScatteringProfile::Weibull(_) => ProfileKind::Weibull,
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match self {
            ScatteringProfile::Exponential(p) => vec![p.d_pen],
            ScatteringProfile::Weibull(p) => vec![p.lambda_w, p.k_w],
        }
    }

    pub fn eval(&self, depth: f64) -> Result<f64> {
        match self {
            ScatteringProfile::Exponential(p) => p.eval(depth),
            ScatteringProfile::Weibull(p) => p.eval(depth),
        }
    }
}

/// Clamps a raw parameter vector into the default admissible ranges.
pub fn clamp_params(kind: ProfileKind, raw: &[f64]) -> Result<ScatteringProfile> {
    clamp_params_with(kind, raw, &kind.default_ranges())
}

/// Like [`clamp_params`] with caller-supplied ranges (e.g. a wider d_pen window).
pub fn clamp_params_with(
    kind: ProfileKind,
    raw: &[f64],
    ranges: &[ParamRange],
) -> Result<ScatteringProfile> {
    if raw.len() != kind.n_params() || ranges.len() != kind.n_params() {
        return Err(Error::Dimension(format!(
            "{kind} profile takes {} parameters, got {} values and {} ranges",
            kind.n_params(),
            raw.len(),
            ranges.len()
        )));
    }
    let p: Vec<f64> = raw.iter().zip(ranges).map(|(x, r)| r.clamp(*x)).collect();
    Ok(match kind {
        ProfileKind::Exponential => ScatteringProfile::Exponential(ExponentialProfile::new(p[0])?),
        ProfileKind::Weibull => ScatteringProfile::Weibull(WeibullProfile {
            lambda_w: p[0],
            k_w: p[1],
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exponential_examples() {
        let p = ExponentialProfile::new(5.0).unwrap();
        assert_eq!(p.eval(0.0).unwrap(), 1.0);
        assert!((p.eval(5.0).unwrap() - 0.135_335_283_236_612_7).abs() < 1e-15);
        let p2 = ExponentialProfile::with_amplitude(5.0, 2.0).unwrap();
        assert_eq!(p2.eval(0.0).unwrap(), 2.0);
        assert!(p.eval(-1.0).is_err());
        assert!(ExponentialProfile::new(0.0).is_err());
    }

    #[test]
    fn weibull_examples() {
        let p = WeibullProfile::new(0.4, 1.0).unwrap();
        assert!((p.eval(0.0).unwrap() - 0.4).abs() < 1e-15);
        assert!((p.eval(2.5).unwrap() - 0.4 * (-1.0f64).exp()).abs() < 1e-15);
        assert!((p.eval(2.5).unwrap() - 0.147_15).abs() < 1e-5);
        let q = WeibullProfile::new(0.1, 1.5).unwrap();
        assert_eq!(q.eval(0.0).unwrap(), 0.0);
        let s = WeibullProfile::new(0.1, 0.8).unwrap();
        assert!(matches!(s.eval(0.0), Err(Error::Singularity { .. })));
        assert!(s.eval(1e-3).unwrap().is_finite());
        assert!(p.eval(-0.1).is_err());
    }

    #[test]
    fn weibull_range_enforced() {
        assert!(WeibullProfile::new(0.7, 1.0).is_err());
        assert!(WeibullProfile::new(0.3, 1.6).is_err());
        assert!(WeibullProfile::new(0.005, 1.0).is_err());
        assert!(WeibullProfile::new(0.01, 0.8).is_ok());
        assert!(WeibullProfile::new(0.6, 1.5).is_ok());
    }

    #[test]
    fn clamp_examples() {
        let w = clamp_params(ProfileKind::Weibull, &[0.7, 1.6]).unwrap();
        assert_eq!(w.params(), vec![0.6, 1.5]);
        let w = clamp_params(ProfileKind::Weibull, &[0.3, 1.0]).unwrap();
        assert_eq!(w.params(), vec![0.3, 1.0]);
        let e = clamp_params(ProfileKind::Exponential, &[-1.0]).unwrap();
        assert_eq!(e.params(), vec![D_PEN_MIN]);
        let e = clamp_params(ProfileKind::Exponential, &[f64::NAN]).unwrap();
        assert_eq!(e.params(), vec![D_PEN_MIN]);
        assert!(clamp_params(ProfileKind::Weibull, &[0.3]).is_err());
    }

    #[test]
    fn weibull_integrates_to_one() {
        // composite Simpson in t; the t^{k-1} endpoint factor limits its
        // accuracy to about 1e-6 for k = 1.3
        for &(l, k) in &[(0.05, 1.3), (0.4, 1.0), (0.6, 1.5)] {
            let t_max = 40.0f64.powf(1.0 / k) / l;
            let n = 200_000;
            let h = t_max / n as f64;
            let mut s = weibull_density(l, k, 0.0) + weibull_density(l, k, t_max);
            for i in 1..n {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                s += w * weibull_density(l, k, i as f64 * h);
            }
            let mass = s * h / 3.0;
            assert!((mass - 1.0).abs() < 1e-5, "λ={l} k={k} mass={mass}");
        }
    }

    proptest! {
        #[test]
        fn weibull_k1_matches_exponential_shape(l in 0.01f64..0.6, t in 0.0f64..200.0) {
            let w = WeibullProfile::new(l, 1.0).unwrap();
            let e = ExponentialProfile::new(2.0 / l).unwrap();
            let lhs = w.eval(t).unwrap() / w.eval(0.0).unwrap();
            let rhs = e.eval(t).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(f64::MIN_POSITIVE));
        }

        #[test]
        fn exponential_log_linear(d in 0.1f64..20.0, t1 in 0.0f64..30.0, dt in 0.0f64..30.0) {
            let p = ExponentialProfile::new(d).unwrap();
            let t2 = t1 + dt;
            let lhs = p.eval(t2).unwrap().ln() - p.eval(t1).unwrap().ln();
            let rhs = -2.0 * (t2 - t1) / d;
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
        }

        #[test]
        fn clamp_is_total(a in -10.0f64..10.0, b in -10.0f64..10.0) {
            let w = clamp_params(ProfileKind::Weibull, &[a, b]).unwrap();
            let p = w.params();
            prop_assert!(WEIBULL_SCALE_RANGE.contains(p[0]));
            prop_assert!(WEIBULL_SHAPE_RANGE.contains(p[1]));
        }
    }
}
