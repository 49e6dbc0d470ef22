//! Pixel samples: CSV interchange, synthetic scenes and HoA-scenario splits.
//!
//! Sample files are UTF-8 CSV with the header
//! `scene_id,gamma_mag,phase_vol,kz,incidence,backscatter_db,h_insar,h_ref`,
//! one row per pixel. Angles are radians, `kz` is rad/m and elevations are
//! meters. `gamma_mag` must be pure volume decorrelation: the producer is
//! responsible for removing system, range and quantization decorrelation
//! beforehand. Floats are written with 17 significant digits.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{gamma_vol_exponential, gamma_vol_weibull, phase_to_bias, ForwardOptions};
use crate::geometry::hoa_to_kz;
use crate::profiles::{ExponentialProfile, ParamRange, ProfileKind, WeibullProfile};

pub const SAMPLE_HEADER: [&str; 8] = [
    "scene_id",
    "gamma_mag",
    "phase_vol",
    "kz",
    "incidence",
    "backscatter_db",
    "h_insar",
    "h_ref",
];

/// Default HoA interval left out by the interpolation scenario (m).
pub const INTERPOLATION_GAP: (f64, f64) = (50.0, 60.0);
/// HoA above which the extrapolation scenario drops scenes (m).
pub const EXTRAPOLATION_ABOVE: f64 = 70.0;
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.6;
/// Share of the training split held out for early stopping.
pub const DEFAULT_VALIDATION_FRACTION: f64 = 0.2;
const VALIDATION_SEED_OFFSET: u64 = 0x9e37_79b9_7f4a_7c15;

/// One training / evaluation record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PixelSample {
    pub scene_id: String,
    pub gamma_mag: f64,
    pub phase_vol: f64,
    pub kz: f64,
    pub incidence: f64,
    pub backscatter_db: f64,
    pub h_insar: f64,
    pub h_ref: f64,
}

impl PixelSample {
    /// Reference penetration bias `h_insar − h_ref`.
    pub fn p_ref(&self) -> f64 {
        self.h_insar - self.h_ref
    }

    pub fn hoa(&self) -> f64 {
        std::f64::consts::TAU / self.kz
    }

    /// Network inputs in fixed order: coherence magnitude, volume phase,
    /// vertical wavenumber, incidence angle, backscatter.
    pub fn features(&self) -> [f64; 5] {
        [
            self.gamma_mag,
            self.phase_vol,
            self.kz,
            self.incidence,
            self.backscatter_db,
        ]
    }

    fn check(&self) -> std::result::Result<(), (&'static str, String)> {
        let fields = [
            ("gamma_mag", self.gamma_mag),
            ("phase_vol", self.phase_vol),
            ("kz", self.kz),
            ("incidence", self.incidence),
            ("backscatter_db", self.backscatter_db),
            ("h_insar", self.h_insar),
            ("h_ref", self.h_ref),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err((name, format!("{v} is not finite")));
            }
        }
        if !(0.0..=1.0).contains(&self.gamma_mag) {
            return Err(("gamma_mag", format!("{} not in [0, 1]", self.gamma_mag)));
        }
        if self.kz <= 0.0 {
            return Err(("kz", format!("{} must be > 0", self.kz)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedSamples {
    pub samples: Vec<PixelSample>,
    /// File line numbers whose coherence magnitude was clamped to 1.
    pub clamped_lines: Vec<u64>,
}

/// Reads a sample file, rejecting any row that violates the sample invariants.
pub fn load_samples(path: impl AsRef<Path>) -> Result<Vec<PixelSample>> {
    load_samples_with(path, false).map(|l| l.samples)
}

/// Reads a sample file. With `clamp_coherence`, finite coherence magnitudes
/// above one are clamped to one and reported instead of rejected.
pub fn load_samples_with(path: impl AsRef<Path>, clamp_coherence: bool) -> Result<LoadedSamples> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file);

    let header = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    if header
        .iter()
        .map(str::trim)
        .ne(SAMPLE_HEADER.iter().copied())
    {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected header `{}`", SAMPLE_HEADER.join(",")),
        });
    }

    let mut samples = Vec::new();
    let mut clamped_lines = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::csv(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        if record.len() != SAMPLE_HEADER.len() {
            return Err(parse_err(format!(
                "expected {} fields, found {}",
                SAMPLE_HEADER.len(),
                record.len()
            )));
        }
        let num = |i: usize| -> Result<f64> {
            let raw = record[i].trim();
            raw.parse::<f64>().map_err(|_| {
                parse_err(format!(
                    "field `{}`: cannot parse `{raw}` as a number",
                    SAMPLE_HEADER[i]
                ))
            })
        };
        let mut sample = PixelSample {
            scene_id: record[0].trim().to_string(),
            gamma_mag: num(1)?,
            phase_vol: num(2)?,
            kz: num(3)?,
            incidence: num(4)?,
            backscatter_db: num(5)?,
            h_insar: num(6)?,
            h_ref: num(7)?,
        };
        if clamp_coherence && sample.gamma_mag.is_finite() && sample.gamma_mag > 1.0 {
            sample.gamma_mag = 1.0;
            clamped_lines.push(line);
        }
        if let Err((field, message)) = sample.check() {
            return Err(Error::Invariant {
                path: path.to_path_buf(),
                line,
                field,
                message,
            });
        }
        samples.push(sample);
    }
    if !clamped_lines.is_empty() {
        log::warn!(
            "{}: clamped coherence magnitude to 1 on {} rows",
            path.display(),
            clamped_lines.len()
        );
    }
    Ok(LoadedSamples {
        samples,
        clamped_lines,
    })
}

/// 17 significant digits: enough to round-trip every double.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn save_samples(samples: &[PixelSample], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(SAMPLE_HEADER)
        .map_err(|e| Error::csv(path, e))?;
    for s in samples {
        w.write_record([
            s.scene_id.clone(),
            format_f64(s.gamma_mag),
            format_f64(s.phase_vol),
            format_f64(s.kz),
            format_f64(s.incidence),
            format_f64(s.backscatter_db),
            format_f64(s.h_insar),
            format_f64(s.h_ref),
        ])
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Index of every sample within its scene, in input order.
pub fn pixel_indices(samples: &[PixelSample]) -> Vec<usize> {
    let mut counters: HashMap<&str, usize> = HashMap::new();
    samples
        .iter()
        .map(|s| {
            let c = counters.entry(s.scene_id.as_str()).or_insert(0);
            *c += 1;
            *c - 1
        })
        .collect()
}

/// Groups sample indices by scene, scenes ordered by first appearance.
pub fn group_by_scene<'a>(
    samples: &'a [PixelSample],
    indices: &[usize],
) -> Vec<(&'a str, Vec<usize>)> {
    let mut order: Vec<(&str, Vec<usize>)> = Vec::new();
    let mut lookup: HashMap<&str, usize> = HashMap::new();
    for &i in indices {
        let id = samples[i].scene_id.as_str();
        let slot = *lookup.entry(id).or_insert_with(|| {
            order.push((id, Vec::new()));
            order.len() - 1
        });
        order[slot].1.push(i);
    }
    order
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    All,
    Interpolation,
    Extrapolation,
}

impl Scenario {
    pub fn label(self) -> &'static str {
        match self {
            Scenario::All => "All",
            Scenario::Interpolation => "Interpolation",
            Scenario::Extrapolation => "Extrapolation",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::All => "all",
            Scenario::Interpolation => "interpolation",
            Scenario::Extrapolation => "extrapolation",
        })
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "all" => Ok(Scenario::All),
            "interpolation" | "interp" => Ok(Scenario::Interpolation),
            "extrapolation" | "extrap" => Ok(Scenario::Extrapolation),
            other => Err(Error::Config(format!("unknown scenario `{other}`"))),
        }
    }
}

/// HoA values (m) whose scenes are held out of training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum HoaExclusion {
    None,
    /// Closed interval `[lo, hi]`.
    Within {
        lo: f64,
        hi: f64,
    },
    /// Open half-line `(threshold, ∞)`.
    Above {
        threshold: f64,
    },
}

impl HoaExclusion {
    pub fn contains(&self, hoa: f64) -> bool {
        match *self {
            HoaExclusion::None => false,
            HoaExclusion::Within { lo, hi } => hoa >= lo && hoa <= hi,
            HoaExclusion::Above { threshold } => hoa > threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub kind: Scenario,
    pub excluded_hoa: HoaExclusion,
}

impl ScenarioSpec {
    /// Scenario with the standard thresholds: `[50, 60]` m for interpolation
    /// and `> 70` m for extrapolation.
    pub fn new(kind: Scenario) -> Self {
        Self::with_thresholds(kind, INTERPOLATION_GAP, EXTRAPOLATION_ABOVE)
    }

    pub fn with_thresholds(
        kind: Scenario,
        interpolation_gap: (f64, f64),
        extrapolation_above: f64,
    ) -> Self {
        let excluded_hoa = match kind {
            Scenario::All => HoaExclusion::None,
            Scenario::Interpolation => HoaExclusion::Within {
                lo: interpolation_gap.0,
                hi: interpolation_gap.1,
            },
            Scenario::Extrapolation => HoaExclusion::Above {
                threshold: extrapolation_above,
            },
        };
        Self { kind, excluded_hoa }
    }
}

/// Sample indices of a scenario split.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub excluded: Vec<usize>,
}

/// Splits samples for one HoA scenario.
///
/// Whole scenes whose mean HoA falls in the excluded range go to `excluded`.
/// Every remaining scene contributes `round(train_fraction · n)` randomly
/// chosen pixels to `train` and the rest to `test`.
pub fn scenario_split(
    samples: &[PixelSample],
    spec: &ScenarioSpec,
    train_fraction: f64,
    seed: u64,
) -> Result<Split> {
    if samples.is_empty() {
        return Err(Error::Empty("no samples to split".into()));
    }
    check_fraction("train_fraction", train_fraction)?;

    let all: Vec<usize> = (0..samples.len()).collect();
    let mut kept = Vec::new();
    let mut excluded = Vec::new();
    for (_, idx) in group_by_scene(samples, &all) {
        let mean_hoa = idx.iter().map(|&i| samples[i].hoa()).sum::<f64>() / idx.len() as f64;
        if spec.excluded_hoa.contains(mean_hoa) {
            excluded.extend(idx);
        } else {
            kept.extend(idx);
        }
    }
    if kept.is_empty() {
        return Err(Error::Empty(format!(
            "scenario `{}` excludes every scene; nothing left to train on",
            spec.kind
        )));
    }
    let (train, test) = stratified_partition(samples, &kept, train_fraction, seed)?;
    Ok(Split {
        train,
        test,
        excluded,
    })
}

/// Seeded per-scene partition of `indices` into a `fraction` part and the
/// remainder. Both outputs are sorted.
pub fn stratified_partition(
    samples: &[PixelSample],
    indices: &[usize],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    check_fraction("fraction", fraction)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut first = Vec::new();
    let mut rest = Vec::new();
    for (_, mut idx) in group_by_scene(samples, indices) {
        idx.shuffle(&mut rng);
        let n_first = (fraction * idx.len() as f64).round() as usize;
        first.extend_from_slice(&idx[..n_first]);
        rest.extend_from_slice(&idx[n_first..]);
    }
    first.sort_unstable();
    rest.sort_unstable();
    Ok((first, rest))
}

/// Splits training indices into a fitting part and a seeded, per-scene
/// validation part holding `fraction` of every scene.
pub fn hold_out_validation(
    samples: &[PixelSample],
    train: &[usize],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let (validation, fit) = stratified_partition(
        samples,
        train,
        fraction,
        seed.wrapping_add(VALIDATION_SEED_OFFSET),
    )?;
    Ok((fit, validation))
}

fn check_fraction(name: &str, f: f64) -> Result<()> {
    if f > 0.0 && f < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must lie in (0, 1), got {f}")))
    }
}

pub fn gather(samples: &[PixelSample], indices: &[usize]) -> Vec<PixelSample> {
    indices.iter().map(|&i| samples[i].clone()).collect()
}

/// Parameters of one synthetic scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSceneConfig {
    pub scene_id: String,
    pub seed: u64,
    pub n_pixels: usize,
    pub hoa_m: f64,
    pub incidence_deg: f64,
    pub profile: ProfileKind,
    /// Range of each ground-truth profile parameter: `[d_pen]` or `[λ_w, k_w]`.
    /// A degenerate range yields a constant parameter.
    pub param_ranges: Vec<ParamRange>,
    /// Relative noise on the coherence magnitude.
    pub coherence_noise_std: f64,
    /// Additive noise on the InSAR elevation (m).
    pub elevation_noise_std: f64,
    pub backscatter_noise_db: f64,
    pub h_ref_range: ParamRange,
}

impl SyntheticSceneConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_pixels == 0 {
            return bad("n_pixels must be >= 1".into());
        }
        if !(self.hoa_m.is_finite() && self.hoa_m > 0.0) {
            return bad(format!("hoa_m must be > 0, got {}", self.hoa_m));
        }
        if !(self.incidence_deg > 0.0 && self.incidence_deg < 90.0) {
            return bad(format!(
                "incidence_deg must lie in (0, 90), got {}",
                self.incidence_deg
            ));
        }
        for (name, v) in [
            ("coherence_noise_std", self.coherence_noise_std),
            ("elevation_noise_std", self.elevation_noise_std),
            ("backscatter_noise_db", self.backscatter_noise_db),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be >= 0, got {v}"));
            }
        }
        if self.param_ranges.len() != self.profile.n_params() {
            return bad(format!(
                "{} profile needs {} parameter ranges, got {}",
                self.profile,
                self.profile.n_params(),
                self.param_ranges.len()
            ));
        }
        let legal = match self.profile {
            ProfileKind::Exponential => vec![ParamRange {
                lo: f64::MIN_POSITIVE,
                hi: f64::MAX,
            }],
            ProfileKind::Weibull => ProfileKind::Weibull.default_ranges(),
        };
        for (r, l) in self.param_ranges.iter().zip(&legal) {
            if !(r.lo <= r.hi && l.contains(r.lo) && l.contains(r.hi)) {
                return bad(format!(
                    "parameter range [{}, {}] outside admissible [{}, {}]",
                    r.lo, r.hi, l.lo, l.hi
                ));
            }
        }
        let ParamRange { lo, hi } = self.h_ref_range;
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return bad("h_ref range must satisfy lo <= hi".into());
        }
        Ok(())
    }
}

/// Ground truth of one synthetic pixel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub scene_id: String,
    pub pixel_index: usize,
    pub params: Vec<f64>,
    /// Noise-free penetration bias (m).
    pub true_bias: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub samples: Vec<PixelSample>,
    pub truth: Vec<TruthRecord>,
}

const FIELD_BUMPS: usize = 8;

/// Smooth random field on a square pixel grid: a sum of Gaussian bumps
/// rescaled onto `range`.
fn smooth_field(rng: &mut ChaCha8Rng, n: usize, range: ParamRange) -> Vec<f64> {
    let bumps: Vec<[f64; 4]> = (0..FIELD_BUMPS)
        .map(|_| {
            [
                rng.random::<f64>(),
                rng.random::<f64>(),
                rng.random_range(0.1..0.35),
                rng.random_range(-1.0..1.0),
            ]
        })
        .collect();
    let width = (n as f64).sqrt().ceil() as usize;
    let rows = n.div_ceil(width);
    let raw: Vec<f64> = (0..n)
        .map(|i| {
            let x = ((i % width) as f64 + 0.5) / width as f64;
            let y = ((i / width) as f64 + 0.5) / rows as f64;
            bumps
                .iter()
                .map(|[cx, cy, s, a]| {
                    a * (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * s * s)).exp()
                })
                .sum()
        })
        .collect();
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    raw.iter()
        .map(|v| {
            if hi - lo > 1e-12 {
                range.from_unit((v - lo) / (hi - lo))
            } else {
                range.from_unit(0.5)
            }
        })
        .collect()
}

fn noise(rng: &mut ChaCha8Rng, std: f64) -> f64 {
    if std > 0.0 {
        Normal::new(0.0, std).expect("std validated").sample(rng)
    } else {
        0.0
    }
}

/// Generates one scene from the forward model.
///
/// Backscatter is a synthetic, monotone link to the ground truth:
/// `−5 − 0.8·d_pen` dB for exponential scenes and `−5 − 0.8·(2/λ_w)` dB for
/// Weibull scenes, plus noise.
pub fn synthesize_scene(config: &SyntheticSceneConfig) -> Result<SyntheticScene> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.n_pixels;
    let fields: Vec<Vec<f64>> = config
        .param_ranges
        .iter()
        .map(|r| smooth_field(&mut rng, n, *r))
        .collect();
    let h_ref = smooth_field(&mut rng, n, config.h_ref_range);

    let kz = hoa_to_kz(config.hoa_m)?;
    let incidence = config.incidence_deg.to_radians();
    let opts = ForwardOptions::default();

    let mut samples = Vec::with_capacity(n);
    let mut truth = Vec::with_capacity(n);
    for i in 0..n {
        let params: Vec<f64> = fields.iter().map(|f| f[i]).collect();
        let (coh, depth_proxy) = match config.profile {
            ProfileKind::Exponential => (
                gamma_vol_exponential(&ExponentialProfile::new(params[0])?, kz, &opts)?,
                params[0],
            ),
            ProfileKind::Weibull => (
                gamma_vol_weibull(&WeibullProfile::new(params[0], params[1])?, kz, &opts)?,
                2.0 / params[0],
            ),
        };
        let bias = phase_to_bias(&coh, kz)?;
        let gamma_mag =
            (coh.magnitude * (1.0 + noise(&mut rng, config.coherence_noise_std))).clamp(0.0, 1.0);
        let h_insar = h_ref[i] + bias + noise(&mut rng, config.elevation_noise_std);
        let backscatter_db =
            -5.0 - 0.8 * depth_proxy + noise(&mut rng, config.backscatter_noise_db);
        samples.push(PixelSample {
            scene_id: config.scene_id.clone(),
            gamma_mag,
            phase_vol: coh.phase,
            kz,
            incidence,
            backscatter_db,
            h_insar,
            h_ref: h_ref[i],
        });
        truth.push(TruthRecord {
            scene_id: config.scene_id.clone(),
            pixel_index: i,
            params,
            true_bias: bias,
        });
    }
    Ok(SyntheticScene { samples, truth })
}

/// Writes `scene_id,pixel_index,param1[,param2],true_bias`.
pub fn save_truth(truth: &[TruthRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let n_params = truth.first().map_or(1, |t| t.params.len());
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let mut header = vec!["scene_id".to_string(), "pixel_index".to_string()];
    header.extend((1..=n_params).map(|k| format!("param{k}")));
    header.push("true_bias".into());
    w.write_record(&header).map_err(|e| Error::csv(path, e))?;
    for t in truth {
        if t.params.len() != n_params {
            return Err(Error::Dimension(
                "truth records mix parameter counts".into(),
            ));
        }
        let mut row = vec![t.scene_id.clone(), t.pixel_index.to_string()];
        row.extend(t.params.iter().map(|p| format_f64(*p)));
        row.push(format_f64(t.true_bias));
        w.write_record(&row).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
