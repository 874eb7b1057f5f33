//! Nested participant-wise cross evaluation with C chosen on each training
//! split, reported against the majority-side baseline.

use salience::evaluation::{cross_evaluate, CrossEvalConfig};
use salience::synth::{sample_btl, BtlScenario};

fn main() -> salience::Result<()> {
    let sample = sample_btl(&BtlScenario {
        subjects: 12,
        trials: 4000,
        seed: 7,
        ..BtlScenario::default()
    })?;
    let result = cross_evaluate(&sample.trials, sample.layout(), &CrossEvalConfig::default())?;

    let show = |name: &str, s: Option<salience::evaluation::Summary>| match s {
        Some(s) => println!("  {name:<9} {:.4} ± {:.4}", s.mean, s.sd),
        None => println!("  {name:<9} undefined"),
    };
    println!("test ({} folds):", result.plan.folds.len());
    show("AUC", result.test.auc);
    show("Tjur R2", result.test.tjur_r2);
    show("accuracy", Some(result.test.accuracy));
    println!("train:");
    show("accuracy", Some(result.train.accuracy));
    println!("baseline:");
    show("accuracy", Some(result.baseline_summary()));
    println!("selected C: {:?}", result.selected_c);
    println!("generator Bayes rate: {:.4}", sample.bayes_rate());
    Ok(())
}
