use anyhow::Result;

use penbias_core::dataset::save_truth;
use penbias_core::{save_samples, synthesize_scene};

use crate::{config, io, SimulateArgs};

pub fn run(args: &SimulateArgs) -> Result<()> {
    let cfg = config::load(&args.config)?;
    io::ensure_dir(&args.out_dir)?;
    println!("scene     HoA(m)    n  coh_noise  elev_noise(m)  profile");
    for scene_cfg in &cfg.scenes {
        let scene = synthesize_scene(scene_cfg)?;
        let id = &scene_cfg.scene_id;
        save_samples(&scene.samples, args.out_dir.join(format!("{id}.csv")))?;
        save_truth(
            &scene.truth,
            args.out_dir.join(format!("{id}{}", io::TRUTH_SUFFIX)),
        )?;
        println!(
            "{id:<8} {:>7.2} {:>5}  {:>9}  {:>13}  {}",
            scene_cfg.hoa_m,
            scene_cfg.n_pixels,
            scene_cfg.coherence_noise_std,
            scene_cfg.elevation_noise_std,
            scene_cfg.profile
        );
    }
    println!(
        "wrote {} scenes to {}",
        cfg.scenes.len(),
        args.out_dir.display()
    );
    Ok(())
}
