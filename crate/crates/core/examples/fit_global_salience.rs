//! Fit the pairwise model to synthetic trials and compare the recovered
//! image ranking with the generating one.

use salience::pairwise::{encode_trials, fit, rank_images, FitConfig};
use salience::prf::kendall_tau;
use salience::synth::{sample_btl, BtlScenario};

fn main() -> salience::Result<()> {
    let sample = sample_btl(&BtlScenario::default())?;
    let layout = sample.layout();
    let rows = encode_trials(&sample.trials, layout)?;

    let outcome = fit(&rows, layout, &FitConfig::default())?;
    println!(
        "converged={} after {} iterations, objective {:.4}",
        outcome.converged, outcome.iterations, outcome.objective
    );
    let model = outcome.model;
    println!("task bias {:+.3} (true {:+.3})", model.tau, sample.truth.tau);
    println!("familiarity bias {:+.3} (true {:+.3})", model.phi, sample.truth.phi);

    let tau = kendall_tau(&model.w, &sample.truth.w)?;
    println!("Kendall tau between fitted and true scores: {tau:.3}");

    println!("top five images:");
    for (id, score) in rank_images(&model).into_iter().take(5) {
        println!("  image {id:>2}  {score:+.3}  (true {:+.3})", sample.truth.w[id]);
    }
    Ok(())
}
