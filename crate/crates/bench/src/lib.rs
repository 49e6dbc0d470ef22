//! Shared fixtures for the benchmarks.

use penbias_core::{synthesize_scene, ParamRange, PixelSample, ProfileKind, SyntheticSceneConfig};

/// A noisy exponential scene of `n` pixels at the given HoA.
pub fn scene(n: usize, hoa_m: f64) -> Vec<PixelSample> {
    synthesize_scene(&SyntheticSceneConfig {
        scene_id: format!("bench{hoa_m}"),
        seed: 1,
        n_pixels: n,
        hoa_m,
        incidence_deg: 40.0,
        profile: ProfileKind::Exponential,
        param_ranges: vec![ParamRange { lo: 3.5, hi: 15.0 }],
        coherence_noise_std: 0.01,
        elevation_noise_std: 0.3,
        backscatter_noise_db: 0.5,
        h_ref_range: ParamRange {
            lo: 200.0,
            hi: 3000.0,
        },
    })
    .expect("valid bench scene")
    .samples
}
