//! `softfx presets`: show the built-in atmosphere parameter ranges.

use std::process::ExitCode;

use clap::Args;
use softfx_core::atmosphere::RenderPreset;

#[derive(Args, Debug)]
pub struct PresetsArgs {
    /// Emit the full preset definitions as JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

fn range(r: [f64; 2]) -> String {
    if r[0] == r[1] {
        format!("{}", r[0])
    } else {
        format!("{}..{}", r[0], r[1])
    }
}

pub fn run(args: PresetsArgs) -> anyhow::Result<ExitCode> {
    let presets = RenderPreset::builtin();
    if args.json {
        println!("{}", serde_json::to_string_pretty(&presets)?);
        return Ok(ExitCode::SUCCESS);
    }
    for p in presets {
        println!("{}", p.kind.name());
        println!("  visibility_m      {}", range(p.visibility_m));
        println!("  albedo            {}", range(p.albedo));
        println!("  eta               {}", range(p.eta));
        println!("  scale_height_m    {}", range(p.scale_height_m));
        if p.ground_layer_p > 0.0 {
            let ground = p
                .ground_scale_height_m
                .map(range)
                .unwrap_or_else(|| "-".to_string());
            println!(
                "  ground layer      p={} scale_height_m={}",
                p.ground_layer_p, ground
            );
        }
        println!("  h_max_m           {}", range(p.h_max_m));
        println!("  d_max_m           {}", range(p.d_max_m));
        println!("  tau_base          {}", range(p.tau_base));
        let palette: Vec<String> = p
            .airlight_palette
            .iter()
            .map(|a| format!("({}, {}, {})", a[0], a[1], a[2]))
            .collect();
        println!("  airlight sRGB     {}", palette.join(" "));
        println!();
    }
    Ok(ExitCode::SUCCESS)
}
