//! Regenerates the synthetic scene configs under `configs/`.
//!
//! `cargo run -p annofix --example write_configs -- configs`

use std::path::PathBuf;

use annofix::annofix_core::synth::SynthConfig;
use annofix::config::synth_config_text;

fn main() -> std::io::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "configs".into()));
    std::fs::create_dir_all(&dir)?;
    let scenes = [
        (
            "mixed_traffic.conf",
            "ten vehicles at 10-30 m/s, every box annotated 30 ms early or late",
            0.03,
        ),
        (
            "mixed_traffic_clean.conf",
            "the same traffic with correctly timed boxes",
            0.0,
        ),
    ];
    for (name, about, time_slice) in scenes {
        let cfg = SynthConfig::mixed_traffic(time_slice, 7).with_noise(0.01);
        let text = format!("# {about}\n\n{}", synth_config_text(&cfg));
        std::fs::write(dir.join(name), text)?;
    }
    Ok(())
}
