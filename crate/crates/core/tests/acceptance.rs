//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Run with `cargo test --test acceptance`.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use salience::evaluation::{accuracy, auc};
use salience::fixation::{fixation_density, kld, Fixation, GridSpec, SalienceGrid};
use salience::io;
use salience::pairwise::{
    encode_trials, fit, gradient, objective, DesignLayout, FitConfig, GlobalSalienceModel, Outcome, Side, Trial,
};
use salience::prf::{
    correlation_matrix, filter_voxels, identify, kendall_tau, predict_profiles, PrfConfig, PrfVoxel,
    StimulusGeometry, VisualArea, STIMULUS_PX, STIMULUS_RADIUS_DEG,
};
use salience::synth::{noisy_profiles, sample_btl, sample_feature_maps, sample_voxels, BtlScenario};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn random_side(rng: &mut ChaCha8Rng) -> Side {
    [Side::None, Side::Left, Side::Right][rng.random_range(0..3)]
}

fn random_trials(rng: &mut ChaCha8Rng, images: usize, subjects: usize, count: usize) -> Vec<Trial> {
    (0..count)
        .map(|_| {
            let left = rng.random_range(0..images);
            let right = (left + rng.random_range(1..images)) % images;
            Trial {
                subject_id: rng.random_range(0..subjects),
                left_image: left,
                right_image: right,
                task_target_side: random_side(rng),
                familiar_side: random_side(rng),
                outcome: if rng.random_bool(0.5) {
                    Outcome::RightFirst
                } else {
                    Outcome::LeftFirst
                },
            }
        })
        .collect()
}

fn gradient_fidelity() -> salience::Result<Verdict> {
    let layout = DesignLayout::new(15, 4);
    let config = FitConfig::default();
    let step = 1e-5;
    let mut worst = 0.0f64;
    for draw in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + draw);
        let rows = encode_trials(&random_trials(&mut rng, 15, 4, 200), layout)?;
        let theta: Vec<f64> = (0..layout.dim()).map(|_| StandardNormal.sample(&mut rng)).collect();
        let model = GlobalSalienceModel::from_theta(layout, config.c, &theta)?;
        let analytic = gradient(&model, &rows, &config)?;
        for j in 0..theta.len() {
            let mut plus = theta.clone();
            let mut minus = theta.clone();
            plus[j] += step;
            minus[j] -= step;
            let f_plus = objective(&GlobalSalienceModel::from_theta(layout, config.c, &plus)?, &rows, &config)?;
            let f_minus = objective(&GlobalSalienceModel::from_theta(layout, config.c, &minus)?, &rows, &config)?;
            let numeric = (f_plus - f_minus) / (2.0 * step);
            let rel = (analytic[j] - numeric).abs() / numeric.abs().max(1.0);
            worst = worst.max(rel);
        }
    }
    Ok(verdict(worst < 1e-6, format!("max relative error {worst:.2e} (limit 1e-6)")))
}

fn synthetic_recovery() -> salience::Result<Verdict> {
    // Ten pre-declared generator seeds. Training uses the first 5000 trials
    // of each stream, the next 5000 are held out.
    let mut taus = Vec::new();
    let mut gaps = Vec::new();
    for seed in 0..10u64 {
        let sample = sample_btl(&BtlScenario {
            images: 20,
            subjects: 5,
            trials: 10_000,
            seed,
            ..BtlScenario::default()
        })?;
        let layout = sample.layout();
        let (train, test) = sample.trials.split_at(5000);
        let model = fit(&encode_trials(train, layout)?, layout, &FitConfig::default())?.into_converged()?;
        taus.push(kendall_tau(&model.w, &sample.truth.w)?);
        let held_out = accuracy(&model, &encode_trials(test, layout)?)?;
        let bayes = sample.right_probs[5000..].iter().map(|p| p.max(1.0 - p)).sum::<f64>() / 5000.0;
        gaps.push(held_out - bayes);
    }
    let mut sorted = taus.clone();
    sorted.sort_by(f64::total_cmp);
    let median_tau = (sorted[4] + sorted[5]) / 2.0;
    let min_tau = sorted[0];
    let passing = taus.iter().filter(|t| **t >= 0.9).count();
    let worst_gap = gaps.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    Ok(verdict(
        median_tau >= 0.9 && worst_gap <= 0.03,
        format!(
            "median tau {median_tau:.3} over seeds 0-9 ({passing}/10 seeds >= 0.9, min {min_tau:.3}, seed 0 {:.3}); \
             max |held-out acc - Bayes| {worst_gap:.4} (limit 0.03)",
            taus[0]
        ),
    ))
}

fn brute_auc(scores: &[f64], labels: &[f64]) -> f64 {
    let (mut twice, mut pos, mut neg) = (0u64, 0u64, 0u64);
    for (i, &li) in labels.iter().enumerate() {
        if li > 0.0 {
            pos += 1;
            for (j, &lj) in labels.iter().enumerate() {
                if lj < 0.0 {
                    twice += match scores[i].partial_cmp(&scores[j]).expect("finite") {
                        std::cmp::Ordering::Greater => 2,
                        std::cmp::Ordering::Equal => 1,
                        std::cmp::Ordering::Less => 0,
                    };
                }
            }
        } else {
            neg += 1;
        }
    }
    twice as f64 / (2 * pos * neg) as f64
}

fn brute_tau(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let mut score = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            let da = (a[i] - a[j]).signum() * f64::from(a[i] != a[j]);
            let db = (b[i] - b[j]).signum() * f64::from(b[i] != b[j]);
            score += (da * db) as i64;
        }
    }
    score as f64 / (n * (n - 1) / 2) as f64
}

/// Values on a coarse lattice so ties are common.
fn tied_values(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let levels = rng.random_range(2..40);
    (0..n).map(|_| f64::from(rng.random_range(0..levels)) * 0.25).collect()
}

fn metric_oracles() -> salience::Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut auc_mismatch = 0;
    for _ in 0..100 {
        let n = rng.random_range(2..=300);
        let scores = tied_values(&mut rng, n);
        let mut labels: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.4) { 1.0 } else { -1.0 }).collect();
        labels[0] = 1.0;
        labels[1] = -1.0;
        if auc(&scores, &labels)? != brute_auc(&scores, &labels) {
            auc_mismatch += 1;
        }
    }
    let mut tau_mismatch = 0;
    for _ in 0..100 {
        let n = rng.random_range(2..=300);
        let a = tied_values(&mut rng, n);
        let b = tied_values(&mut rng, n);
        if kendall_tau(&a, &b)? != brute_tau(&a, &b) {
            tau_mismatch += 1;
        }
    }
    Ok(verdict(
        auc_mismatch == 0 && tau_mismatch == 0,
        format!("AUC mismatches {auc_mismatch}/100, Kendall mismatches {tau_mismatch}/100 (exact equality)"),
    ))
}

fn random_grid(rng: &mut ChaCha8Rng, width: usize, height: usize) -> salience::Result<SalienceGrid> {
    let sparsity = rng.random_range(0.0..0.9);
    let values = (0..width * height)
        .map(|_| {
            if rng.random_bool(sparsity) {
                0.0
            } else {
                rng.random::<f64>().powi(3)
            }
        })
        .collect::<Vec<f64>>();
    let mut values = values;
    values[0] += 1e-3;
    SalienceGrid::new(width, height, 1.0, values)?.normalized()
}

fn kld_properties() -> salience::Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut max_self, mut min_cross, mut max_density_err) = (f64::MIN, f64::MAX, 0.0f64);
    for _ in 0..50 {
        let (w, h) = (rng.random_range(2..40), rng.random_range(2..40));
        let f = random_grid(&mut rng, w, h)?;
        let s = random_grid(&mut rng, w, h)?;
        max_self = max_self.max(kld(&f, &f, 1e-12)?);
        min_cross = min_cross.min(kld(&f, &s, 1e-12)?).min(kld(&s, &f, 1e-12)?);

        let fixations: Vec<Fixation> = (0..rng.random_range(1..60))
            .map(|_| Fixation {
                subject_id: 0,
                image_id: 0,
                x: rng.random_range(0.0..w as f64),
                y: rng.random_range(0.0..h as f64),
                duration_ms: 200.0,
                latency_ms: 200.0,
                ordinal: 1,
            })
            .collect();
        let spec = GridSpec {
            width: w,
            height: h,
            deg_per_bin: 1.0,
        };
        let density = fixation_density(&fixations, spec, 1.0)?;
        let total: f64 = density.values.iter().sum();
        max_density_err = max_density_err.max((total - 1.0).abs());
    }
    Ok(verdict(
        max_self <= 1e-6 && min_cross >= -1e-6 && max_density_err <= 1e-12,
        format!(
            "max kld(F,F) {max_self:.2e}, min kld(F,S) {min_cross:.3}, max |sum density - 1| {max_density_err:.1e}"
        ),
    ))
}

fn prf_closure() -> salience::Result<Verdict> {
    let geometry = StimulusGeometry::new(STIMULUS_PX, STIMULUS_RADIUS_DEG);
    let maps = sample_feature_maps(45, geometry, 5)?;
    let voxels: Vec<PrfVoxel> = sample_voxels(500, VisualArea::V1, 6);
    let kept = filter_voxels(&voxels)?;
    if kept.len() != 500 {
        return Ok(verdict(false, format!("only {} of 500 voxels pass the filter", kept.len())));
    }
    let predicted = predict_profiles(&maps, &voxels, &PrfConfig::default())?;

    let noise_levels = [0.0, 0.1, 0.5, 1.0];
    let mut means = Vec::new();
    for &noise in &noise_levels {
        let mut total = 0.0;
        for seed in 0..20 {
            let measured = noisy_profiles(&predicted, noise, 1000 + seed);
            total += identify(&correlation_matrix(&measured, &predicted)?).accuracy;
        }
        means.push(total / 20.0);
    }
    let exact = {
        let corr = correlation_matrix(&predicted, &predicted)?;
        identify(&corr).accuracy
    };
    let monotone = means.windows(2).all(|w| w[1] <= w[0]);
    Ok(verdict(
        exact == 1.0 && monotone,
        format!("noise-free accuracy {exact}; mean accuracy per noise level {means:?}"),
    ))
}

fn convex_determinism() -> salience::Result<Verdict> {
    let sample = sample_btl(&BtlScenario {
        trials: 3000,
        seed: 21,
        ..BtlScenario::default()
    })?;
    let layout = sample.layout();
    let rows = encode_trials(&sample.trials, layout)?;
    let quiet = FitConfig::default();
    let verbose = FitConfig {
        record_history: true,
        ..FitConfig::default()
    };
    let a = fit(&rows, layout, &quiet)?;
    let b = fit(&rows, layout, &quiet)?;
    let identical = a.model.theta().iter().zip(b.model.theta()).all(|(x, y)| x.to_bits() == y.to_bits())
        && a.objective.to_bits() == b.objective.to_bits();

    let v = fit(&rows, layout, &verbose)?;
    let single_thread = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("thread pool")
        .install(|| fit(&rows, layout, &quiet))?;
    let thread_identical = single_thread
        .model
        .theta()
        .iter()
        .zip(a.model.theta())
        .all(|(x, y)| x.to_bits() == y.to_bits());
    let objective_gap = (a.objective - v.objective).abs();
    Ok(verdict(
        identical && thread_identical && objective_gap <= 1e-6,
        format!(
            "repeat fit bit-identical: {identical}; single-thread pool bit-identical: {thread_identical}; \
             objective gap with history recording {objective_gap:.1e}"
        ),
    ))
}

fn awkward_float(rng: &mut ChaCha8Rng) -> f64 {
    let mantissa: f64 = StandardNormal.sample(rng);
    mantissa * 10f64.powi(rng.random_range(-300..300))
}

fn format_round_trips(dir: &Path) -> salience::Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut failures = Vec::new();
    let twice = |first: &Path, second: &Path| -> std::io::Result<bool> {
        Ok(std::fs::read(first)? == std::fs::read(second)?)
    };
    let check = |ok: std::io::Result<bool>| ok.map_err(|e| salience::Error::Io {
        path: dir.to_path_buf(),
        source: e,
    });
    for i in 0..50 {
        let (a, b) = (dir.join("a"), dir.join("b"));

        let images = rng.random_range(2..30);
        let (subjects, count) = (rng.random_range(1..10), rng.random_range(1..100));
        let trials = random_trials(&mut rng, images, subjects, count);
        io::save_trials(&a, &trials)?;
        io::save_trials(&b, &io::load_trials(&a)?)?;
        if !check(twice(&a, &b))? || io::load_trials(&b)? != trials {
            failures.push(format!("trials #{i}"));
        }

        let voxels: Vec<PrfVoxel> = (0..rng.random_range(1..50))
            .map(|_| PrfVoxel {
                area: VisualArea::ALL[rng.random_range(0..VisualArea::ALL.len())],
                x_c: awkward_float(&mut rng),
                y_c: awkward_float(&mut rng),
                sigma: awkward_float(&mut rng).abs() + f64::MIN_POSITIVE,
                t_value: awkward_float(&mut rng),
                variance_explained: rng.random(),
            })
            .collect();
        io::save_voxels(&a, &voxels)?;
        io::save_voxels(&b, &io::load_voxels(&a)?)?;
        if !check(twice(&a, &b))? || io::load_voxels(&b)? != voxels {
            failures.push(format!("voxels #{i}"));
        }

        let (w, h) = (rng.random_range(1..50), rng.random_range(1..50));
        let values = (0..w * h).map(|_| awkward_float(&mut rng).abs()).collect();
        let grid = SalienceGrid::new(w, h, rng.random_range(0.01..2.0), values)?;
        io::save_grid(&a, &grid)?;
        io::save_grid(&b, &io::load_grid(&a)?)?;
        if !check(twice(&a, &b))? || io::load_grid(&b)? != grid {
            failures.push(format!("grid #{i}"));
        }

        let layout = DesignLayout::new(rng.random_range(1..40), rng.random_range(0..10));
        let theta: Vec<f64> = (0..layout.dim()).map(|_| awkward_float(&mut rng)).collect();
        let model = GlobalSalienceModel::from_theta(layout, rng.random_range(1e-3..1e3), &theta)?;
        io::save_model(&a, &model)?;
        io::save_model(&b, &io::load_model(&a)?)?;
        if !check(twice(&a, &b))? || io::load_model(&b)? != model {
            failures.push(format!("model #{i}"));
        }
    }
    Ok(verdict(
        failures.is_empty(),
        if failures.is_empty() {
            "trials, voxels, grids and models: 50 instances each byte-identical".to_string()
        } else {
            format!("mismatches: {}", failures.join(", "))
        },
    ))
}

fn cli_pipeline(dir: &Path) -> salience::Result<Verdict> {
    let exe = env!("CARGO_BIN_EXE_salience");
    let d = |name: &str| dir.join(name).display().to_string();
    let steps: Vec<(&str, Vec<String>)> = vec![
        (
            "synthesize",
            vec!["synthesize".into(), "--out-dir".into(), d(""), "--seed".into(), "1".into()],
        ),
        (
            "fit",
            vec!["fit".into(), "--trials".into(), d("trials.csv"), "--c".into(), "1.0".into(), "--out".into(), d("model.txt")],
        ),
        ("cv", vec!["cv".into(), "--trials".into(), d("trials.csv"), "--folds".into(), "5".into()]),
        ("eval", vec!["eval".into(), "--trials".into(), d("trials.csv"), "--out".into(), d("eval.csv")]),
        (
            "identify",
            vec![
                "identify".into(), "--measured".into(), d("measured.csv"), "--voxels".into(), d("voxels.csv"),
                "--maps".into(), d("maps"), "--area".into(), "V1".into(), "--out-dir".into(), d("identify"),
            ],
        ),
        (
            "rsa",
            vec![
                "rsa".into(), "--measured".into(), d("measured.csv"), "--voxels".into(), d("voxels.csv"),
                "--maps".into(), d("maps"), "--area".into(), "V1".into(), "--out-dir".into(), d("rsa"),
            ],
        ),
    ];
    for (name, args) in steps {
        let out = Command::new(exe).args(&args).output().map_err(|e| salience::Error::Io {
            path: exe.into(),
            source: e,
        })?;
        if !out.status.success() {
            return Ok(verdict(
                false,
                format!("`{name}` exited with {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr)),
            ));
        }
    }
    let artifacts = [
        "trials.csv",
        "truth.txt",
        "fixations.csv",
        "voxels.csv",
        "measured.csv",
        "maps/0.grid",
        "model.txt",
        "eval.csv",
        "identify/correlation.csv",
        "identify/confidence.csv",
        "rsa/measured_rdm.csv",
        "rsa/predicted_rdm.csv",
    ];
    let missing: Vec<&str> = artifacts.iter().copied().filter(|a| !dir.join(a).is_file()).collect();
    Ok(verdict(
        missing.is_empty(),
        if missing.is_empty() {
            format!("all {} artifacts written", artifacts.len())
        } else {
            format!("missing {missing:?}")
        },
    ))
}

fn main() {
    let scratch = tempfile::tempdir().expect("temp dir");
    let formats_dir = scratch.path().join("formats");
    let cli_dir = scratch.path().join("cli");
    std::fs::create_dir_all(&formats_dir).expect("formats dir");

    type Check<'a> = Box<dyn Fn() -> salience::Result<Verdict> + 'a>;
    let criteria: Vec<(&str, Duration, Check)> = vec![
        ("1 gradient fidelity", Duration::from_secs(5), Box::new(gradient_fidelity)),
        ("2 synthetic BTL recovery", Duration::from_secs(30), Box::new(synthetic_recovery)),
        ("3 metric oracles", Duration::from_secs(10), Box::new(metric_oracles)),
        ("4 KLD properties", Duration::MAX, Box::new(kld_properties)),
        ("5 pRF closure", Duration::from_secs(60), Box::new(prf_closure)),
        ("6 convex determinism", Duration::MAX, Box::new(convex_determinism)),
        ("7 format round-trips", Duration::MAX, Box::new(|| format_round_trips(&formats_dir))),
        ("8 end-to-end CLI", Duration::from_secs(120), Box::new(|| cli_pipeline(&cli_dir))),
    ];

    let mut failed = 0;
    for (name, limit, check) in criteria {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok(v) => (v.pass, v.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let in_time = elapsed <= limit;
        let limit_text = if limit == Duration::MAX {
            String::new()
        } else {
            format!(" / limit {:.0} s", limit.as_secs_f64())
        };
        let status = if pass && in_time { "PASS" } else { "FAIL" };
        if status == "FAIL" {
            failed += 1;
        }
        println!(
            "{status} criterion {name}: {detail} [{:.2} s{limit_text}]",
            elapsed.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}
