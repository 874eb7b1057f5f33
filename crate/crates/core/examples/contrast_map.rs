//! Local RMS contrast of a luminance image, then its pRF response profile.

use salience::prf::{predict_profile, rms_contrast_map, FeatureMap, PrfConfig, StimulusGeometry, VisualArea};
use salience::synth::sample_voxels;

fn main() -> salience::Result<()> {
    let geometry = StimulusGeometry::new(160, 5.5);
    let n = geometry.size_px;
    // vertical grating on the left half, uniform grey on the right
    let luminance: Vec<f64> = (0..n * n)
        .map(|i| {
            let col = i % n;
            if col < n / 2 {
                0.5 + 0.4 * (col as f64 * 0.6).sin()
            } else {
                0.5
            }
        })
        .collect();
    let contrast = rms_contrast_map(&FeatureMap::new(geometry, luminance)?, 5)?;
    let centre_row = n / 2;
    println!(
        "contrast at left / right of centre row: {:.3} / {:.3}",
        contrast.values[centre_row * n + n / 4],
        contrast.values[centre_row * n + 3 * n / 4]
    );

    let voxels = sample_voxels(200, VisualArea::V1, 8);
    let profile = predict_profile(&contrast.normalized()?, &voxels, &PrfConfig::default())?;
    let (left, right): (Vec<_>, Vec<_>) = voxels.iter().zip(&profile.values).partition(|(v, _)| v.x_c < 0.0);
    let mean = |xs: &[(&salience::PrfVoxel, &f64)]| xs.iter().map(|(_, p)| **p).sum::<f64>() / xs.len() as f64;
    println!(
        "mean predicted response, left-field voxels {:.3e}, right-field voxels {:.3e}",
        mean(&left),
        mean(&right)
    );
    Ok(())
}
