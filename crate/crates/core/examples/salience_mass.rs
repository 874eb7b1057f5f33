//! Split a stimulus-wide salience map into left and right image mass and
//! correlate the mass difference with global-salience differences.

use salience::fixation::{delta_series, salience_mass, MassSplit, Rect, SalienceGrid};
use salience::pairwise::{encode_trials, fit, FitConfig};
use salience::synth::{sample_btl, BtlScenario};

/// A two-image display whose local salience follows the images' true scores.
fn display_map(w_left: f64, w_right: f64) -> salience::Result<SalienceGrid> {
    let (width, height) = (40, 15);
    let values = (0..width * height)
        .map(|i| {
            let col = i % width;
            let score = if col < width / 2 { w_left } else { w_right };
            0.05 + score.exp()
        })
        .collect();
    SalienceGrid::new(width, height, 1.0, values)?.normalized()
}

fn main() -> salience::Result<()> {
    let sample = sample_btl(&BtlScenario {
        trials: 2000,
        seed: 3,
        ..BtlScenario::default()
    })?;
    let layout = sample.layout();
    let model = fit(&encode_trials(&sample.trials, layout)?, layout, &FitConfig::default())?.into_converged()?;

    let left = Rect::new(1, 1, 19, 14);
    let right = Rect::new(21, 1, 39, 14);
    let trials = &sample.trials[..200];
    let masses: Vec<MassSplit> = trials
        .iter()
        .map(|t| {
            let map = display_map(sample.truth.w[t.left_image], sample.truth.w[t.right_image])?;
            salience_mass(&map, left, right)
        })
        .collect::<salience::Result<_>>()?;

    let first = masses[0];
    println!(
        "first trial: M_L = {:.3}, M_R = {:.3}, background {:.3}",
        first.m_left,
        first.m_right,
        1.0 - first.m_left - first.m_right
    );
    let delta = delta_series(&model, trials, &masses)?;
    println!("corr(ΔM, ΔGS) over {} trials: {:.3}", delta.pairs.len(), delta.r);
    Ok(())
}
