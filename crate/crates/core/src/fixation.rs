//! Fixation pre-filtering, first-fixation densities and their comparison
//! with salience maps.

use crate::error::{Error, Result};
use crate::pairwise::{GlobalSalienceModel, Trial};
use crate::stats::{mean, pearson, population_sd};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fixation {
    pub subject_id: usize,
    pub image_id: usize,
    /// Horizontal position in degrees of visual angle, image coordinates.
    pub x: f64,
    pub y: f64,
    pub duration_ms: f64,
    /// Fixation onset relative to stimulus onset.
    pub latency_ms: f64,
    /// 1-based index of the fixation within its trial.
    pub ordinal: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixationFilter {
    pub min_duration_ms: f64,
    /// Fixations longer than `mean + max_sd·sd` are outliers.
    pub max_sd: f64,
    /// Fixations starting earlier than this after stimulus onset follow an
    /// anticipatory saccade.
    pub anticipatory_latency_ms: f64,
    /// Image width and height in degrees; fixations outside are dropped.
    /// `None` skips the region check.
    pub image_extent: Option<(f64, f64)>,
}

impl Default for FixationFilter {
    fn default() -> Self {
        Self {
            min_duration_ms: 50.0,
            max_sd: 2.0,
            anticipatory_latency_ms: 80.0,
            image_extent: None,
        }
    }
}

impl FixationFilter {
    pub fn on_image(&self, f: &Fixation) -> bool {
        match self.image_extent {
            Some((w, h)) => f.x >= 0.0 && f.x < w && f.y >= 0.0 && f.y < h,
            None => true,
        }
    }
}

/// Duration mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DurationStats {
    pub mean: f64,
    pub sd: f64,
}

impl DurationStats {
    pub fn of(fixations: &[Fixation]) -> Option<Self> {
        let d: Vec<f64> = fixations.iter().map(|f| f.duration_ms).collect();
        Some(Self {
            mean: mean(&d)?,
            sd: population_sd(&d)?,
        })
    }
}

/// Counts per discard reason. A fixation is counted under the first reason
/// it meets, in field order.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DiscardReport {
    pub too_short: usize,
    pub too_long: usize,
    pub outside: usize,
    pub anticipatory: usize,
}

impl DiscardReport {
    pub fn total(&self) -> usize {
        self.too_short + self.too_long + self.outside + self.anticipatory
    }
}

/// Drops short, overly long, off-image and anticipatory fixations, with the
/// duration statistics taken from `fixations` itself.
pub fn filter_fixations(
    fixations: &[Fixation],
    filter: &FixationFilter,
) -> (Vec<Fixation>, DiscardReport, Option<DurationStats>) {
    let stats = DurationStats::of(fixations);
    let (kept, report) = match stats {
        Some(s) => filter_with_stats(fixations, filter, s),
        None => (Vec::new(), DiscardReport::default()),
    };
    (kept, report, stats)
}

/// As [`filter_fixations`] with externally supplied duration statistics.
/// The long-duration cut is strict: exactly `mean + max_sd·sd` is kept.
pub fn filter_with_stats(
    fixations: &[Fixation],
    filter: &FixationFilter,
    stats: DurationStats,
) -> (Vec<Fixation>, DiscardReport) {
    let max_duration = stats.mean + filter.max_sd * stats.sd;
    let mut report = DiscardReport::default();
    let kept = fixations
        .iter()
        .filter(|f| {
            if f.duration_ms < filter.min_duration_ms {
                report.too_short += 1;
            } else if f.duration_ms > max_duration {
                report.too_long += 1;
            } else if !filter.on_image(f) {
                report.outside += 1;
            } else if f.latency_ms < filter.anticipatory_latency_ms {
                report.anticipatory += 1;
            } else {
                return true;
            }
            false
        })
        .copied()
        .collect();
    (kept, report)
}

/// Fixations with ordinal 1 that landed on `image_id`.
pub fn first_fixations(fixations: &[Fixation], image_id: usize) -> Vec<Fixation> {
    fixations
        .iter()
        .filter(|f| f.image_id == image_id && f.ordinal == 1)
        .copied()
        .collect()
}

/// A non-negative map over stimulus space, row-major with `height` rows of
/// `width` bins, each bin `deg_per_bin` degrees wide.
#[derive(Debug, Clone, PartialEq)]
pub struct SalienceGrid {
    pub width: usize,
    pub height: usize,
    pub deg_per_bin: f64,
    pub values: Vec<f64>,
}

impl SalienceGrid {
    pub fn new(width: usize, height: usize, deg_per_bin: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::Dimension(format!(
                "{width}x{height} grid needs {} values, got {}",
                width * height,
                values.len()
            )));
        }
        if !(deg_per_bin > 0.0 && deg_per_bin.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "deg_per_bin must be positive, got {deg_per_bin}"
            )));
        }
        Ok(Self {
            width,
            height,
            deg_per_bin,
            values,
        })
    }

    pub fn zeros(width: usize, height: usize, deg_per_bin: f64) -> Self {
        Self {
            width,
            height,
            deg_per_bin,
            values: vec![0.0; width * height],
        }
    }

    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn set(&mut self, col: usize, row: usize, value: f64) {
        self.values[row * self.width + col] = value;
    }

    pub fn sum(&self) -> f64 {
        crate::stats::pairwise_sum(&self.values)
    }

    pub fn same_shape(&self, other: &SalienceGrid) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn check_nonnegative(&self) -> Result<()> {
        match self.values.iter().position(|v| !(*v >= 0.0 && v.is_finite())) {
            Some(i) => Err(Error::InvalidArgument(format!(
                "grid value {} at bin {} is not a finite non-negative number",
                self.values[i], i
            ))),
            None => Ok(()),
        }
    }

    /// Scales the grid to sum to one.
    pub fn normalized(&self) -> Result<Self> {
        self.check_nonnegative()?;
        let total = self.sum();
        if total <= 0.0 {
            return Err(Error::Empty("grid has no mass to normalize".into()));
        }
        Ok(Self {
            values: self.values.iter().map(|v| v / total).collect(),
            ..self.clone()
        })
    }

    /// Gaussian blur with standard deviation `sigma_deg`, truncated at
    /// three standard deviations with a unit-sum kernel. Bins outside the
    /// grid count as zero. `sigma_deg == 0` returns a copy.
    pub fn smoothed(&self, sigma_deg: f64) -> Self {
        if sigma_deg <= 0.0 {
            return self.clone();
        }
        let kernel = gaussian_kernel(sigma_deg / self.deg_per_bin);
        let r = (kernel.len() / 2) as isize;
        let (w, h) = (self.width as isize, self.height as isize);

        let mut horizontal = vec![0.0; self.values.len()];
        for row in 0..h {
            for col in 0..w {
                let mut acc = 0.0;
                for (k, kv) in kernel.iter().enumerate() {
                    let c = col + k as isize - r;
                    if (0..w).contains(&c) {
                        acc += kv * self.values[(row * w + c) as usize];
                    }
                }
                horizontal[(row * w + col) as usize] = acc;
            }
        }
        let mut out = vec![0.0; self.values.len()];
        for row in 0..h {
            for col in 0..w {
                let mut acc = 0.0;
                for (k, kv) in kernel.iter().enumerate() {
                    let rr = row + k as isize - r;
                    if (0..h).contains(&rr) {
                        acc += kv * horizontal[(rr * w + col) as usize];
                    }
                }
                out[(row * w + col) as usize] = acc;
            }
        }
        Self {
            values: out,
            ..self.clone()
        }
    }
}

/// Symmetric 1-D Gaussian of standard deviation `sigma` (in bins), radius
/// `⌈3σ⌉`, normalised to sum to one.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let raw: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Shape of a density grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
    pub deg_per_bin: f64,
}

/// Histogram of fixation positions, Gaussian-smoothed with `sigma_deg` and
/// normalised to a probability distribution. Fixations outside the grid
/// are ignored.
pub fn fixation_density(fixations: &[Fixation], spec: GridSpec, sigma_deg: f64) -> Result<SalienceGrid> {
    let mut grid = SalienceGrid::new(
        spec.width,
        spec.height,
        spec.deg_per_bin,
        vec![0.0; spec.width * spec.height],
    )?;
    let mut counted = 0usize;
    for f in fixations {
        let col = (f.x / spec.deg_per_bin).floor();
        let row = (f.y / spec.deg_per_bin).floor();
        if col >= 0.0 && row >= 0.0 && (col as usize) < spec.width && (row as usize) < spec.height {
            let i = row as usize * spec.width + col as usize;
            grid.values[i] += 1.0;
            counted += 1;
        }
    }
    if counted == 0 {
        return Err(Error::Empty("no fixations fall inside the grid".into()));
    }
    grid.smoothed(sigma_deg).normalized()
}

/// `Σ_b F(b)·ln(F(b)/(S(b)+ε) + ε)`.
pub fn kld(fixation: &SalienceGrid, salience: &SalienceGrid, eps: f64) -> Result<f64> {
    if !fixation.same_shape(salience) {
        return Err(Error::Dimension(format!(
            "fixation grid is {}x{}, salience grid is {}x{}",
            fixation.width, fixation.height, salience.width, salience.height
        )));
    }
    let terms: Vec<f64> = fixation
        .values
        .iter()
        .zip(&salience.values)
        .map(|(&f, &s)| if f == 0.0 { 0.0 } else { f * (f / (s + eps) + eps).ln() })
        .collect();
    Ok(crate::stats::pairwise_sum(&terms))
}

/// Axis-aligned block of bins, half-open: columns `[x0, x1)`, rows `[y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl Rect {
    pub fn new(x0: usize, y0: usize, x1: usize, y1: usize) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn overlaps(&self, other: &Rect) -> bool {
        self.x0 < other.x1 && other.x0 < self.x1 && self.y0 < other.y1 && other.y0 < self.y1
    }

    pub fn contains(&self, col: usize, row: usize) -> bool {
        (self.x0..self.x1).contains(&col) && (self.y0..self.y1).contains(&row)
    }

    fn fits(&self, grid: &SalienceGrid) -> bool {
        self.x0 <= self.x1 && self.y0 <= self.y1 && self.x1 <= grid.width && self.y1 <= grid.height
    }

    fn mass(&self, grid: &SalienceGrid) -> f64 {
        (self.y0..self.y1)
            .map(|row| {
                let start = row * grid.width;
                grid.values[start + self.x0..start + self.x1].iter().sum::<f64>()
            })
            .sum()
    }
}

/// Share of a normalised stimulus map inside the left and right image
/// regions; whatever remains sits on the background.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassSplit {
    pub m_left: f64,
    pub m_right: f64,
}

impl MassSplit {
    pub fn delta(&self) -> f64 {
        self.m_left - self.m_right
    }
}

pub fn salience_mass(stimulus: &SalienceGrid, left: Rect, right: Rect) -> Result<MassSplit> {
    if !left.fits(stimulus) || !right.fits(stimulus) {
        return Err(Error::Dimension("region extends outside the grid".into()));
    }
    if left.overlaps(&right) {
        return Err(Error::InvalidArgument("left and right regions overlap".into()));
    }
    stimulus.check_nonnegative()?;
    let total = stimulus.sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "stimulus map must be normalised (sums to {total})"
        )));
    }
    Ok(MassSplit {
        m_left: left.mass(stimulus),
        m_right: right.mass(stimulus),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaCorrelation {
    pub r: f64,
    /// `(Δ_M, Δ_GS)` per trial: left minus right salience mass and left
    /// minus right global salience score.
    pub pairs: Vec<(f64, f64)>,
}

/// Correlates per-trial salience-mass differences with global-salience
/// differences.
pub fn delta_series(
    model: &GlobalSalienceModel,
    trials: &[Trial],
    masses: &[MassSplit],
) -> Result<DeltaCorrelation> {
    if trials.len() != masses.len() {
        return Err(Error::Dimension(format!(
            "{} trials but {} mass splits",
            trials.len(),
            masses.len()
        )));
    }
    if trials.len() < 2 {
        return Err(Error::InvalidArgument("need at least two trials".into()));
    }
    let mut pairs = Vec::with_capacity(trials.len());
    for (t, m) in trials.iter().zip(masses) {
        let (Some(wl), Some(wr)) = (model.w.get(t.left_image), model.w.get(t.right_image)) else {
            return Err(Error::Dimension(format!(
                "trial images ({}, {}) not in model with {} images",
                t.left_image,
                t.right_image,
                model.w.len()
            )));
        };
        pairs.push((m.delta(), wl - wr));
    }
    let dm: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let dgs: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let r = pearson(&dm, &dgs)?;
    Ok(DeltaCorrelation { r, pairs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pairwise::{DesignLayout, Outcome, Side};

    fn fx(duration: f64, latency: f64) -> Fixation {
        Fixation {
            subject_id: 0,
            image_id: 0,
            x: 1.0,
            y: 1.0,
            duration_ms: duration,
            latency_ms: latency,
            ordinal: 1,
        }
    }

    #[test]
    fn short_fixations_are_dropped() {
        let (kept, report, _) = filter_fixations(
            &[fx(40.0, 200.0), fx(200.0, 200.0), fx(210.0, 200.0)],
            &FixationFilter::default(),
        );
        assert_eq!(kept.len(), 2);
        assert_eq!(report.too_short, 1);
    }

    #[test]
    fn long_cut_is_strict() {
        let stats = DurationStats { mean: 198.0, sd: 90.0 };
        let filter = FixationFilter::default();
        // cut at 198 + 2·90 = 378
        let input = [fx(377.0, 300.0), fx(378.0, 300.0), fx(379.0, 300.0), fx(380.0, 300.0)];
        let (kept, report) = filter_with_stats(&input, &filter, stats);
        assert_eq!(kept.len(), 2);
        assert_eq!(report.too_long, 2);
        assert_eq!(kept[1].duration_ms, 378.0);
    }

    #[test]
    fn outside_and_anticipatory() {
        let filter = FixationFilter {
            image_extent: Some((10.0, 8.0)),
            ..FixationFilter::default()
        };
        let mut off = fx(200.0, 300.0);
        off.x = 10.0;
        let input = [off, fx(200.0, 30.0), fx(200.0, 300.0)];
        let (kept, report) = filter_with_stats(&input, &filter, DurationStats { mean: 200.0, sd: 10.0 });
        assert_eq!(kept.len(), 1);
        assert_eq!(report.outside, 1);
        assert_eq!(report.anticipatory, 1);
    }

    #[test]
    fn clean_input_passes_untouched() {
        let input = [fx(150.0, 200.0), fx(200.0, 250.0), fx(250.0, 300.0)];
        let (kept, report, _) = filter_fixations(&input, &FixationFilter::default());
        assert_eq!(kept, input.to_vec());
        assert_eq!(report, DiscardReport::default());
    }

    fn at(x: f64, y: f64) -> Fixation {
        Fixation { x, y, ..fx(200.0, 200.0) }
    }

    const SPEC: GridSpec = GridSpec { width: 15, height: 11, deg_per_bin: 1.0 };

    #[test]
    fn single_fixation_density_peaks_at_its_bin() {
        let g = fixation_density(&[at(7.5, 5.5)], SPEC, 1.0).unwrap();
        assert!((g.sum() - 1.0).abs() < 1e-12);
        let argmax = g
            .values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(argmax, 5 * 15 + 7);
    }

    #[test]
    fn duplicate_fixations_normalise_away() {
        let a = fixation_density(&[at(3.2, 4.1)], SPEC, 1.0).unwrap();
        let b = fixation_density(&[at(3.2, 4.1), at(3.7, 4.9)], SPEC, 1.0).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn uniform_fixations_give_flat_interior() {
        let mut fixes = Vec::new();
        for row in 0..SPEC.height {
            for col in 0..SPEC.width {
                fixes.push(at(col as f64 + 0.5, row as f64 + 0.5));
            }
        }
        let g = fixation_density(&fixes, SPEC, 1.0).unwrap();
        let reference = g.get(3, 3);
        for row in 3..SPEC.height - 3 {
            for col in 3..SPEC.width - 3 {
                assert!((g.get(col, row) - reference).abs() < 1e-12);
            }
        }
        assert!(g.get(0, 0) < reference);
    }

    #[test]
    fn empty_density_is_an_error() {
        assert!(matches!(fixation_density(&[], SPEC, 1.0), Err(Error::Empty(_))));
        assert!(fixation_density(&[at(-1.0, 2.0)], SPEC, 1.0).is_err());
    }

    #[test]
    fn kernel_sums_to_one() {
        for sigma in [0.3, 1.0, 2.5, 7.0] {
            let k = gaussian_kernel(sigma);
            assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn kld_of_identical_maps_is_zero() {
        let g = fixation_density(&[at(2.0, 2.0), at(9.0, 4.0)], SPEC, 1.0).unwrap();
        let d = kld(&g, &g, 1e-12).unwrap();
        assert!(d.abs() < 1e-6, "{d}");
    }

    #[test]
    fn kld_point_mass_on_empty_salience() {
        let mut f = SalienceGrid::zeros(2, 1, 1.0);
        f.values = vec![1.0, 0.0];
        let mut s = SalienceGrid::zeros(2, 1, 1.0);
        s.values = vec![0.0, 1.0];
        let eps = 1e-6;
        let d = kld(&f, &s, eps).unwrap();
        let expected = (1.0 / eps + eps).ln();
        assert!((d - expected).abs() < 1e-9);
    }

    #[test]
    fn kld_shape_mismatch() {
        let a = SalienceGrid::zeros(2, 2, 1.0);
        let b = SalienceGrid::zeros(3, 2, 1.0);
        assert!(matches!(kld(&a, &b, 1e-12), Err(Error::Dimension(_))));
    }

    #[test]
    fn mass_left_only_and_symmetric() {
        let mut g = SalienceGrid::zeros(8, 4, 1.0);
        g.set(1, 1, 0.5);
        g.set(2, 2, 0.5);
        let left = Rect::new(0, 0, 4, 4);
        let right = Rect::new(4, 0, 8, 4);
        let m = salience_mass(&g, left, right).unwrap();
        assert_eq!((m.m_left, m.m_right), (1.0, 0.0));

        let uniform = SalienceGrid::new(8, 4, 1.0, vec![1.0 / 32.0; 32]).unwrap();
        let m = salience_mass(&uniform, Rect::new(0, 1, 3, 3), Rect::new(5, 1, 8, 3)).unwrap();
        assert_eq!(m.m_left, m.m_right);
    }

    #[test]
    fn mass_rejects_overlap() {
        let g = SalienceGrid::new(4, 4, 1.0, vec![1.0 / 16.0; 16]).unwrap();
        let err = salience_mass(&g, Rect::new(0, 0, 3, 4), Rect::new(2, 0, 4, 4)).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn delta_series_affine_and_degenerate() {
        let layout = DesignLayout::new(4, 1);
        let mut model = GlobalSalienceModel::zeros(layout, 1.0);
        model.w = vec![0.2, -0.4, 1.0, 0.6];
        let trial = |l: usize, r: usize| Trial {
            subject_id: 0,
            left_image: l,
            right_image: r,
            task_target_side: Side::None,
            familiar_side: Side::None,
            outcome: Outcome::LeftFirst,
        };
        let trials = [trial(0, 1), trial(2, 3), trial(1, 2)];
        // Δ_GS = 0.6, 0.4, -1.4 ; choose Δ_M = Δ_GS / 2 via m_right = 0
        let masses: Vec<MassSplit> = trials
            .iter()
            .map(|t| MassSplit {
                m_left: (model.w[t.left_image] - model.w[t.right_image]) / 2.0 + 0.7,
                m_right: 0.0,
            })
            .collect();
        let dc = delta_series(&model, &trials, &masses).unwrap();
        assert!((dc.r - 1.0).abs() < 1e-12);

        model.w = vec![0.0; 4];
        assert!(matches!(
            delta_series(&model, &trials, &masses),
            Err(Error::ZeroVariance(_))
        ));
        assert!(delta_series(&model, &trials[..1], &masses[..1]).is_err());
    }
}
