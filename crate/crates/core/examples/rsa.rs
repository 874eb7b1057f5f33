//! Representational similarity: compare measured and predicted RDMs with
//! Kendall's tau.

use salience::prf::{predict_profiles, rdm, rsa, PrfConfig, StimulusGeometry, VisualArea};
use salience::synth::{noisy_profiles, sample_feature_maps, sample_voxels};

fn main() -> salience::Result<()> {
    let geometry = StimulusGeometry::new(96, 5.5);
    let maps = sample_feature_maps(20, geometry, 11)?;
    let voxels = sample_voxels(300, VisualArea::HV4, 12);
    let predicted = predict_profiles(&maps, &voxels, &PrfConfig::default())?;
    let predicted_rdm = rdm(&predicted)?;

    for noise in [0.1, 1.0, 3.0] {
        let measured_rdm = rdm(&noisy_profiles(&predicted, noise, 13))?;
        println!("noise {noise:>3.1}: tau = {:.3}", rsa(&measured_rdm, &predicted_rdm)?);
    }
    println!(
        "dissimilarity of images 0 and 1 under the model: {:.3}",
        predicted_rdm.get(0, 1)
    );
    Ok(())
}
