//! Predict voxel responses from feature maps, then identify each image from
//! noisy "measured" responses.

use salience::prf::{
    confidence, correlation_matrix, filter_voxels, identify, predict_profiles, PrfConfig, StimulusGeometry,
    VisualArea,
};
use salience::synth::{noisy_profiles, sample_feature_maps, sample_voxels};

fn main() -> salience::Result<()> {
    let geometry = StimulusGeometry::new(128, 5.5);
    let maps = sample_feature_maps(30, geometry, 1)?;
    let voxels = sample_voxels(400, VisualArea::V1, 2);
    let kept: Vec<_> = filter_voxels(&voxels)?.into_iter().map(|i| voxels[i]).collect();
    println!("{} of {} voxels pass the inclusion filter", kept.len(), voxels.len());

    let predicted = predict_profiles(&maps, &kept, &PrfConfig::default())?;
    for noise in [0.0, 0.5, 1.0, 2.0] {
        let measured = noisy_profiles(&predicted, noise, 3);
        let corr = correlation_matrix(&measured, &predicted)?;
        let result = identify(&corr);
        let conf: Vec<f64> = confidence(&corr).into_iter().flatten().collect();
        let mean_conf = conf.iter().sum::<f64>() / conf.len() as f64;
        println!(
            "noise {noise:>3.1}: identification accuracy {:.3}, mean confidence {mean_conf:.3}",
            result.accuracy
        );
    }
    Ok(())
}
