//! Scene configuration files for `simulate`.
//!
//! Plain `key = value` lines; `#` starts a comment. Lists are comma
//! separated.
//!
//! ```text
//! seed = 42
//! n_pixels = 10000
//! hoa_m = 30, 45, 60, 75, 90      # one scene per value
//! incidence_deg = 40
//! profile = exponential           # or weibull
//! d_pen_range = 3.5, 15           # exponential only
//! lambda_range = 0.05, 0.5        # weibull only
//! shape_range = 0.8, 1.5          # weibull only
//! coherence_noise_std = 0.01
//! elevation_noise_std = 0.3
//! h_ref_range = 200, 3000
//! backscatter_noise_db = 0.5      # optional, default 0.5
//! scene_prefix = scene            # optional
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};

use penbias_core::{ParamRange, ProfileKind, SyntheticSceneConfig};

use crate::commands::UsageError;

const KNOWN_KEYS: [&str; 13] = [
    "seed",
    "n_pixels",
    "hoa_m",
    "incidence_deg",
    "profile",
    "d_pen_range",
    "lambda_range",
    "shape_range",
    "coherence_noise_std",
    "elevation_noise_std",
    "h_ref_range",
    "backscatter_noise_db",
    "scene_prefix",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub scenes: Vec<SyntheticSceneConfig>,
}

struct Entries {
    map: BTreeMap<String, (usize, String)>,
}

fn usage(msg: String) -> anyhow::Error {
    UsageError(msg).into()
}

impl Entries {
    fn required(&self, key: &str) -> Result<(usize, &str)> {
        self.map
            .get(key)
            .map(|(l, v)| (*l, v.as_str()))
            .ok_or_else(|| usage(format!("missing required key `{key}`")))
    }

    fn number<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let (line, raw) = self.required(key)?;
        raw.parse().map_err(|_| {
            usage(format!(
                "line {line}: `{key}` expects a number, got `{raw}`"
            ))
        })
    }

    fn list(&self, key: &str) -> Result<Vec<f64>> {
        let (line, raw) = self.required(key)?;
        raw.split(',')
            .map(|v| {
                v.trim().parse::<f64>().map_err(|_| {
                    usage(format!(
                        "line {line}: `{key}` expects numbers, got `{}`",
                        v.trim()
                    ))
                })
            })
            .collect()
    }

    fn range(&self, key: &str) -> Result<ParamRange> {
        let v = self.list(key)?;
        let line = self.map[key].0;
        match v.as_slice() {
            [lo, hi] => {
                ParamRange::new(*lo, *hi).map_err(|e| usage(format!("line {line}: `{key}`: {e}")))
            }
            _ => Err(usage(format!("line {line}: `{key}` expects `lo, hi`"))),
        }
    }
}

pub fn parse(text: &str) -> Result<SimulationConfig> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| usage(format!("line {}: expected `key = value`", i + 1)))?;
        let key = key.trim().to_string();
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(usage(format!("line {}: unknown key `{key}`", i + 1)));
        }
        if map
            .insert(key.clone(), (i + 1, value.trim().to_string()))
            .is_some()
        {
            return Err(usage(format!("line {}: duplicate key `{key}`", i + 1)));
        }
    }
    let e = Entries { map };

    let seed: u64 = e.number("seed")?;
    let n_pixels: usize = e.number("n_pixels")?;
    let hoas = e.list("hoa_m")?;
    let incidence_deg: f64 = e.number("incidence_deg")?;
    let (line, profile_raw) = e.required("profile")?;
    let profile: ProfileKind = profile_raw
        .parse()
        .map_err(|err| usage(format!("line {line}: {err}")))?;
    let param_ranges = match profile {
        ProfileKind::Exponential => vec![e.range("d_pen_range")?],
        ProfileKind::Weibull => vec![e.range("lambda_range")?, e.range("shape_range")?],
    };
    let coherence_noise_std: f64 = e.number("coherence_noise_std")?;
    let elevation_noise_std: f64 = e.number("elevation_noise_std")?;
    let h_ref_range = e.range("h_ref_range")?;
    let backscatter_noise_db = if e.map.contains_key("backscatter_noise_db") {
        e.number("backscatter_noise_db")?
    } else {
        0.5
    };
    let prefix = e
        .map
        .get("scene_prefix")
        .map_or("scene", |(_, v)| v.as_str());

    let scenes: Vec<SyntheticSceneConfig> = hoas
        .iter()
        .enumerate()
        .map(|(k, hoa)| SyntheticSceneConfig {
            scene_id: format!("{prefix}{k:02}"),
            seed: seed.wrapping_add(k as u64),
            n_pixels,
            hoa_m: hoa.abs(),
            incidence_deg,
            profile,
            param_ranges: param_ranges.clone(),
            coherence_noise_std,
            elevation_noise_std,
            backscatter_noise_db,
            h_ref_range,
        })
        .collect();
    for s in &scenes {
        s.validate()
            .map_err(|err| usage(format!("scene {}: {err}", s.scene_id)))?;
    }
    Ok(SimulationConfig { scenes })
}

pub fn load(path: &Path) -> Result<SimulationConfig> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse(&text).with_context(|| format!("config {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "seed = 3\nn_pixels = 10\nhoa_m = 30, 45\nincidence_deg = 40\nprofile = exponential\n\
        d_pen_range = 3, 12\ncoherence_noise_std = 0\nelevation_noise_std = 0\nh_ref_range = 0, 100 # m\n";

    #[test]
    fn parses_scenes() {
        let c = parse(BASE).unwrap();
        assert_eq!(c.scenes.len(), 2);
        assert_eq!(c.scenes[1].scene_id, "scene01");
        assert_eq!(c.scenes[1].seed, 4);
        assert_eq!(c.scenes[0].backscatter_noise_db, 0.5);
    }

    #[test]
    fn reports_missing_and_unknown_keys() {
        let text = BASE.replace("incidence_deg = 40\n", "");
        let err = parse(&text).unwrap_err();
        assert!(err.downcast_ref::<UsageError>().is_some());
        assert!(err.to_string().contains("incidence_deg"));
        assert!(parse(&format!("{BASE}colour = red\n")).is_err());
        assert!(parse(&format!("{BASE}seed = 4\n")).is_err());
        assert!(parse(&BASE.replace("profile = exponential", "profile = weibull")).is_err());
    }
}
