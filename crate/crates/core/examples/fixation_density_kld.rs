//! Filter fixations, build first-fixation densities and score them against
//! each other with the KL divergence.

use salience::fixation::{filter_fixations, first_fixations, fixation_density, kld, FixationFilter, GridSpec};
use salience::synth::sample_fixations;

fn main() -> salience::Result<()> {
    let (width, height) = (24, 18);
    let fixations = sample_fixations(4, 30, width as f64, height as f64, 5);
    let filter = FixationFilter {
        image_extent: Some((width as f64, height as f64)),
        ..FixationFilter::default()
    };
    let (kept, report, stats) = filter_fixations(&fixations, &filter);
    if let Some(s) = stats {
        println!("durations: mean {:.1} ms, sd {:.1} ms", s.mean, s.sd);
    }
    println!(
        "kept {} of {}: {} short, {} long, {} off-image, {} anticipatory",
        kept.len(),
        fixations.len(),
        report.too_short,
        report.too_long,
        report.outside,
        report.anticipatory
    );

    let spec = GridSpec {
        width,
        height,
        deg_per_bin: 1.0,
    };
    let densities = (0..4)
        .map(|image| fixation_density(&first_fixations(&kept, image), spec, 1.0))
        .collect::<salience::Result<Vec<_>>>()?;

    println!("KL divergence, rows = fixation density, columns = reference map:");
    for f in &densities {
        let row: Vec<String> = densities
            .iter()
            .map(|s| kld(f, s, 1e-12).map(|d| format!("{d:7.3}")))
            .collect::<salience::Result<_>>()?;
        println!("  {}", row.join(" "));
    }
    Ok(())
}
