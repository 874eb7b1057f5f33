//! Seeded synthetic data: pairwise trials drawn from a known model, and pRF
//! voxels, feature maps and measured responses for identification runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::Result;
use crate::fixation::Fixation;
use crate::pairwise::{encode_trial, DesignLayout, GlobalSalienceModel, Outcome, Side, Trial};
use crate::prf::{FeatureMap, PrfVoxel, ResponseProfile, StimulusGeometry, VisualArea, VoxelFilter};

#[derive(Debug, Clone)]
pub struct BtlScenario {
    pub images: usize,
    pub subjects: usize,
    pub trials: usize,
    pub seed: u64,
    /// Probability that a trial carries a task target (side chosen uniformly).
    pub task_rate: f64,
    /// Probability that exactly one image is familiar.
    pub familiar_rate: f64,
}

impl Default for BtlScenario {
    fn default() -> Self {
        Self {
            images: 20,
            subjects: 5,
            trials: 5000,
            seed: 0,
            task_rate: 0.5,
            familiar_rate: 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BtlSample {
    /// Generating coefficients, every entry standard normal.
    pub truth: GlobalSalienceModel,
    pub trials: Vec<Trial>,
    /// True `P(right first)` per trial.
    pub right_probs: Vec<f64>,
}

impl BtlSample {
    /// Expected accuracy of the generating model: mean of `max(p, 1 − p)`.
    pub fn bayes_rate(&self) -> f64 {
        self.right_probs.iter().map(|p| p.max(1.0 - p)).sum::<f64>() / self.right_probs.len() as f64
    }

    pub fn layout(&self) -> DesignLayout {
        self.truth.layout()
    }
}

fn random_side<R: Rng>(rng: &mut R, rate: f64) -> Side {
    if rng.random_bool(rate) {
        if rng.random_bool(0.5) {
            Side::Left
        } else {
            Side::Right
        }
    } else {
        Side::None
    }
}

/// Draws θ* from a standard normal and samples trials from the model:
/// uniform subject, uniform distinct image pair with random sides.
pub fn sample_btl(scenario: &BtlScenario) -> Result<BtlSample> {
    let layout = DesignLayout::new(scenario.images, scenario.subjects);
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let theta: Vec<f64> = (0..layout.dim()).map(|_| StandardNormal.sample(&mut rng)).collect();
    let truth = GlobalSalienceModel::from_theta(layout, 1.0, &theta)?;

    let mut trials = Vec::with_capacity(scenario.trials);
    let mut right_probs = Vec::with_capacity(scenario.trials);
    for _ in 0..scenario.trials {
        let left = rng.random_range(0..scenario.images);
        let right = (left + rng.random_range(1..scenario.images)) % scenario.images;
        let mut trial = Trial {
            subject_id: rng.random_range(0..scenario.subjects),
            left_image: left,
            right_image: right,
            task_target_side: random_side(&mut rng, scenario.task_rate),
            familiar_side: random_side(&mut rng, scenario.familiar_rate),
            outcome: Outcome::RightFirst,
        };
        let p = truth.predict_prob(&encode_trial(&trial, layout)?);
        if !rng.random_bool(p) {
            trial.outcome = Outcome::LeftFirst;
        }
        trials.push(trial);
        right_probs.push(p);
    }
    Ok(BtlSample {
        truth,
        trials,
        right_probs,
    })
}

/// `count` voxels that all pass the default inclusion filter, with centres
/// spread over the 0.5°–4.5° eccentricity ring and sizes growing with
/// eccentricity.
pub fn sample_voxels(count: usize, area: VisualArea, seed: u64) -> Vec<PrfVoxel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let filter = VoxelFilter::default();
    (0..count)
        .map(|_| {
            // off the interval ends: hypot rounding could push a voxel out
            let ecc = rng.random_range(filter.min_ecc + 1e-6..filter.max_ecc - 1e-6);
            let angle = rng.random_range(0.0..std::f64::consts::TAU);
            PrfVoxel {
                area,
                x_c: ecc * angle.cos(),
                y_c: ecc * angle.sin(),
                sigma: 0.2 + 0.15 * ecc + rng.random_range(0.0..0.2),
                t_value: rng.random_range(0.5..8.0),
                variance_explained: rng.random_range(0.6..0.95),
            }
        })
        .collect()
}

/// Normalised maps made of a few random Gaussian blobs inside the disc.
pub fn sample_feature_maps(count: usize, geometry: StimulusGeometry, seed: u64) -> Result<Vec<FeatureMap>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = geometry.size_px;
    (0..count)
        .map(|_| {
            let blobs: Vec<(f64, f64, f64, f64)> = (0..rng.random_range(3..7))
                .map(|_| {
                    let r = geometry.radius_deg * rng.random::<f64>().sqrt() * 0.9;
                    let a = rng.random_range(0.0..std::f64::consts::TAU);
                    (
                        r * a.cos(),
                        r * a.sin(),
                        rng.random_range(0.3..1.5),
                        rng.random_range(0.2..1.0),
                    )
                })
                .collect();
            let values: Vec<f64> = (0..n * n)
                .map(|i| {
                    let (col, row) = (i % n, i / n);
                    if !geometry.in_disc(col, row) {
                        return 0.0;
                    }
                    let (x, y) = (geometry.x_of(col), geometry.y_of(row));
                    blobs
                        .iter()
                        .map(|&(bx, by, s, amp)| {
                            amp * (-((x - bx).powi(2) + (y - by).powi(2)) / (2.0 * s * s)).exp()
                        })
                        .sum::<f64>()
                        + 1e-3
                })
                .collect();
            FeatureMap::new(geometry, values)?.normalized()
        })
        .collect()
}

/// Fixations of every subject on every image of a `width_deg × height_deg`
/// display: a few per trial, scattered around an image-specific hot spot.
/// Durations and latencies are spread wide enough that the default filter
/// discards some of them.
pub fn sample_fixations(
    images: usize,
    subjects: usize,
    width_deg: f64,
    height_deg: f64,
    seed: u64,
) -> Vec<Fixation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hot_spots: Vec<(f64, f64)> = (0..images)
        .map(|_| {
            (
                rng.random_range(0.25..0.75) * width_deg,
                rng.random_range(0.25..0.75) * height_deg,
            )
        })
        .collect();
    let scatter = Normal::new(0.0, 0.1 * width_deg.min(height_deg)).expect("positive sd");
    let duration = Normal::<f64>::new(200.0, 80.0).expect("positive sd");
    let mut out = Vec::new();
    for subject_id in 0..subjects {
        for (image_id, &(hx, hy)) in hot_spots.iter().enumerate() {
            for ordinal in 1..=3 {
                out.push(Fixation {
                    subject_id,
                    image_id,
                    x: hx + scatter.sample(&mut rng),
                    y: hy + scatter.sample(&mut rng),
                    duration_ms: duration.sample(&mut rng).max(10.0),
                    latency_ms: rng.random_range(50.0..400.0),
                    ordinal,
                });
            }
        }
    }
    out
}

/// Measured profiles as predictions plus Gaussian noise whose standard
/// deviation is `noise` times each profile's own standard deviation.
pub fn noisy_profiles(predicted: &[ResponseProfile], noise: f64, seed: u64) -> Vec<ResponseProfile> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    predicted
        .iter()
        .map(|p| {
            let sd = crate::stats::population_sd(&p.values).unwrap_or(0.0);
            if noise == 0.0 || sd == 0.0 {
                return p.clone();
            }
            let dist = Normal::new(0.0, noise * sd).expect("positive sd");
            ResponseProfile::new(p.values.iter().map(|v| v + dist.sample(&mut rng)).collect())
        })
        .collect()
}
