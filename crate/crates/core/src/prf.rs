//! Population-receptive-field response prediction and image identification.
//!
//! A voxel's predicted response to a feature map is the overlap of the map
//! with the voxel's Gaussian receptive field inside a window around its
//! centre, divided by the total receptive-field weight over the stimulus
//! disc:
//!
//! ```text
//! p = Σ_{i ∈ window} w_i S_i / Σ_{j ∈ disc} w_j,
//! w_i = exp(−((x_i − x_c)² + (y_i − y_c)²) / 2σ²)
//! ```
//!
//! Predicted profiles are compared with measured ones by Pearson
//! correlation; an image is identified when its own prediction correlates
//! best with its measurement.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fixation::SalienceGrid;
use crate::stats::pearson;

/// Stimulus width in pixels.
pub const STIMULUS_PX: usize = 538;
/// Stimulus radius in degrees of visual angle.
pub const STIMULUS_RADIUS_DEG: f64 = 5.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VisualArea {
    V1,
    V2,
    V3,
    HV4,
    LO12,
    V3AB,
}

impl VisualArea {
    pub const ALL: [VisualArea; 6] = [
        VisualArea::V1,
        VisualArea::V2,
        VisualArea::V3,
        VisualArea::HV4,
        VisualArea::LO12,
        VisualArea::V3AB,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VisualArea::V1 => "V1",
            VisualArea::V2 => "V2",
            VisualArea::V3 => "V3",
            VisualArea::HV4 => "hV4",
            VisualArea::LO12 => "LO12",
            VisualArea::V3AB => "V3AB",
        }
    }
}

impl fmt::Display for VisualArea {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VisualArea {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        VisualArea::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| "expected V1|V2|V3|hV4|LO12|V3AB".to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrfVoxel {
    pub area: VisualArea,
    /// Receptive-field centre in degrees, origin at the stimulus centre, y up.
    pub x_c: f64,
    pub y_c: f64,
    /// Receptive-field size (Gaussian standard deviation) in degrees.
    pub sigma: f64,
    pub t_value: f64,
    pub variance_explained: f64,
}

impl PrfVoxel {
    pub fn eccentricity(&self) -> f64 {
        self.x_c.hypot(self.y_c)
    }
}

/// Voxel inclusion rule: positive t-value, eccentricity in the closed
/// interval `[min_ecc, max_ecc]` and variance explained strictly above
/// `min_variance_explained`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoxelFilter {
    pub min_ecc: f64,
    pub max_ecc: f64,
    pub min_variance_explained: f64,
}

impl Default for VoxelFilter {
    fn default() -> Self {
        Self {
            min_ecc: 0.5,
            max_ecc: 4.5,
            min_variance_explained: 0.55,
        }
    }
}

impl VoxelFilter {
    pub fn accepts(&self, v: &PrfVoxel) -> bool {
        let ecc = v.eccentricity();
        v.t_value > 0.0
            && ecc >= self.min_ecc
            && ecc <= self.max_ecc
            && v.variance_explained > self.min_variance_explained
            && v.sigma > 0.0
    }
}

/// Indices of the voxels passing the default [`VoxelFilter`]. An empty
/// selection is an error since nothing can be identified from it.
pub fn filter_voxels(voxels: &[PrfVoxel]) -> Result<Vec<usize>> {
    filter_voxels_with(voxels, &VoxelFilter::default())
}

pub fn filter_voxels_with(voxels: &[PrfVoxel], filter: &VoxelFilter) -> Result<Vec<usize>> {
    let kept: Vec<usize> = voxels
        .iter()
        .enumerate()
        .filter(|(_, v)| filter.accepts(v))
        .map(|(i, _)| i)
        .collect();
    if kept.is_empty() {
        return Err(Error::Empty("no voxel passes the inclusion filter".into()));
    }
    Ok(kept)
}

pub fn prf_weight(voxel: &PrfVoxel, x_deg: f64, y_deg: f64) -> f64 {
    let dx = x_deg - voxel.x_c;
    let dy = y_deg - voxel.y_c;
    (-(dx * dx + dy * dy) / (2.0 * voxel.sigma * voxel.sigma)).exp()
}

/// Square stimulus of `size_px` pixels spanning a disc of `radius_deg`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StimulusGeometry {
    pub size_px: usize,
    pub radius_deg: f64,
}

impl Default for StimulusGeometry {
    fn default() -> Self {
        Self {
            size_px: STIMULUS_PX,
            radius_deg: STIMULUS_RADIUS_DEG,
        }
    }
}

impl StimulusGeometry {
    pub fn new(size_px: usize, radius_deg: f64) -> Self {
        Self { size_px, radius_deg }
    }

    pub fn deg_per_px(&self) -> f64 {
        2.0 * self.radius_deg / self.size_px as f64
    }

    pub fn pixel_count(&self) -> usize {
        self.size_px * self.size_px
    }

    /// Horizontal position of a column's pixel centre, in degrees.
    pub fn x_of(&self, col: usize) -> f64 {
        (col as f64 + 0.5 - self.size_px as f64 / 2.0) * self.deg_per_px()
    }

    /// Vertical position of a row's pixel centre; row 0 is the top.
    pub fn y_of(&self, row: usize) -> f64 {
        (self.size_px as f64 / 2.0 - (row as f64 + 0.5)) * self.deg_per_px()
    }

    pub fn in_disc(&self, col: usize, row: usize) -> bool {
        self.x_of(col).hypot(self.y_of(row)) <= self.radius_deg
    }

    /// Pixel indices inside the stimulus disc, row-major.
    pub fn disc_pixels(&self) -> Vec<usize> {
        let n = self.size_px;
        (0..n * n).filter(|&i| self.in_disc(i % n, i / n)).collect()
    }
}

/// Per-pixel feature values (salience or contrast) over the stimulus,
/// row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub geometry: StimulusGeometry,
    pub values: Vec<f64>,
}

impl FeatureMap {
    pub fn new(geometry: StimulusGeometry, values: Vec<f64>) -> Result<Self> {
        if values.len() != geometry.pixel_count() {
            return Err(Error::Dimension(format!(
                "feature map needs {} values, got {}",
                geometry.pixel_count(),
                values.len()
            )));
        }
        Ok(Self { geometry, values })
    }

    /// Square grid of `size` bins interpreted with the given stimulus radius.
    pub fn from_grid(grid: &SalienceGrid, radius_deg: f64) -> Result<Self> {
        if grid.width != grid.height {
            return Err(Error::Dimension(format!(
                "feature maps must be square, got {}x{}",
                grid.width, grid.height
            )));
        }
        Self::new(StimulusGeometry::new(grid.width, radius_deg), grid.values.clone())
    }

    pub fn to_grid(&self) -> SalienceGrid {
        SalienceGrid {
            width: self.geometry.size_px,
            height: self.geometry.size_px,
            deg_per_bin: self.geometry.deg_per_px(),
            values: self.values.clone(),
        }
    }

    /// Scales to a probability distribution.
    pub fn normalized(&self) -> Result<Self> {
        let grid = self.to_grid().normalized()?;
        Ok(Self {
            geometry: self.geometry,
            values: grid.values,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrfConfig {
    /// Window radius in units of the voxel's σ. `f64::INFINITY` sums over
    /// the whole disc.
    pub window_sigmas: f64,
}

impl Default for PrfConfig {
    fn default() -> Self {
        Self { window_sigmas: 2.0 }
    }
}

/// Per-voxel values for one image within one area.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseProfile {
    pub values: Vec<f64>,
}

impl ResponseProfile {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Window pixels `(index, weight)` and the normalising weight over the disc.
fn voxel_support(voxel: &PrfVoxel, geometry: &StimulusGeometry, config: &PrfConfig) -> (Vec<(usize, f64)>, f64) {
    let n = geometry.size_px;
    let two_var = 2.0 * voxel.sigma * voxel.sigma;
    let gx: Vec<f64> = (0..n)
        .map(|c| {
            let d = geometry.x_of(c) - voxel.x_c;
            (-(d * d) / two_var).exp()
        })
        .collect();
    let gy: Vec<f64> = (0..n)
        .map(|r| {
            let d = geometry.y_of(r) - voxel.y_c;
            (-(d * d) / two_var).exp()
        })
        .collect();

    let window = config.window_sigmas * voxel.sigma;
    let window_sq = window * window;
    let mut support = Vec::new();
    let mut total = 0.0;
    for (row, &wy) in gy.iter().enumerate() {
        let y = geometry.y_of(row);
        let dy = y - voxel.y_c;
        let mut row_total = 0.0;
        for (col, &wx) in gx.iter().enumerate() {
            let x = geometry.x_of(col);
            if x.hypot(y) > geometry.radius_deg {
                continue;
            }
            row_total += wx;
            let dx = x - voxel.x_c;
            if dx * dx + dy * dy <= window_sq {
                support.push((row * n + col, wx * wy));
            }
        }
        total += wy * row_total;
    }
    (support, total)
}

/// Predicted response of every voxel to one feature map.
pub fn predict_profile(map: &FeatureMap, voxels: &[PrfVoxel], config: &PrfConfig) -> Result<ResponseProfile> {
    let mut out = predict_profiles(std::slice::from_ref(map), voxels, config)?;
    Ok(out.pop().expect("one map in, one profile out"))
}

/// Predicted profiles for several maps sharing one geometry; the receptive
/// field weights of each voxel are computed once.
pub fn predict_profiles(
    maps: &[FeatureMap],
    voxels: &[PrfVoxel],
    config: &PrfConfig,
) -> Result<Vec<ResponseProfile>> {
    let Some(first) = maps.first() else {
        return Ok(Vec::new());
    };
    let geometry = first.geometry;
    if maps.iter().any(|m| m.geometry != geometry) {
        return Err(Error::Dimension("feature maps differ in geometry".into()));
    }
    if let Some(v) = voxels.iter().find(|v| !(v.sigma > 0.0)) {
        return Err(Error::InvalidArgument(format!("voxel with sigma {}", v.sigma)));
    }
    let per_voxel: Vec<Vec<f64>> = voxels
        .par_iter()
        .map(|voxel| {
            let (support, total) = voxel_support(voxel, &geometry, config);
            maps.iter()
                .map(|m| support.iter().map(|&(i, w)| w * m.values[i]).sum::<f64>() / total)
                .collect()
        })
        .collect();
    Ok((0..maps.len())
        .map(|k| ResponseProfile::new(per_voxel.iter().map(|v| v[k]).collect()))
        .collect())
}

/// `r[k][l]` = Pearson correlation of measured profile `k` with predicted
/// profile `l`. Entries involving a constant profile are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrMatrix {
    pub size: usize,
    pub cells: Vec<Option<f64>>,
}

impl CorrMatrix {
    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.cells[row * self.size + col]
    }

    pub fn row(&self, row: usize) -> &[Option<f64>] {
        &self.cells[row * self.size..(row + 1) * self.size]
    }

    /// Builds a matrix from fully defined rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let size = rows.len();
        if rows.iter().any(|r| r.len() != size) {
            return Err(Error::Dimension("correlation matrix must be square".into()));
        }
        Ok(Self {
            size,
            cells: rows.iter().flatten().map(|&v| Some(v)).collect(),
        })
    }
}

fn check_profiles(profiles: &[ResponseProfile], what: &str) -> Result<usize> {
    let len = profiles.first().map_or(0, |p| p.len());
    if profiles.iter().any(|p| p.len() != len) {
        return Err(Error::Dimension(format!("{what} profiles differ in length")));
    }
    if len < 2 {
        return Err(Error::InvalidArgument(format!(
            "{what} profiles need at least two voxels"
        )));
    }
    Ok(len)
}

pub fn correlation_matrix(measured: &[ResponseProfile], predicted: &[ResponseProfile]) -> Result<CorrMatrix> {
    if measured.len() != predicted.len() {
        return Err(Error::Dimension(format!(
            "{} measured and {} predicted profiles",
            measured.len(),
            predicted.len()
        )));
    }
    let dm = check_profiles(measured, "measured")?;
    let dp = check_profiles(predicted, "predicted")?;
    if dm != dp {
        return Err(Error::Dimension(format!(
            "measured profiles have {dm} voxels, predicted {dp}"
        )));
    }
    let size = measured.len();
    let cells: Vec<Option<f64>> = (0..size * size)
        .into_par_iter()
        .map(|i| match pearson(&measured[i / size].values, &predicted[i % size].values) {
            Ok(r) => Ok(Some(r)),
            Err(Error::ZeroVariance(_)) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    Ok(CorrMatrix { size, cells })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Identification {
    pub accuracy: f64,
    pub correct: Vec<bool>,
}

/// Image `k` is identified when `r[k][k]` is strictly larger than every
/// other defined entry of row `k`. Ties and undefined diagonals fail.
pub fn identify(corr: &CorrMatrix) -> Identification {
    let correct: Vec<bool> = (0..corr.size)
        .map(|k| match corr.get(k, k) {
            None => false,
            Some(own) => corr
                .row(k)
                .iter()
                .enumerate()
                .filter(|(l, _)| *l != k)
                .all(|(_, r)| r.is_none_or(|r| own > r)),
        })
        .collect();
    let hits = correct.iter().filter(|&&c| c).count();
    Identification {
        accuracy: if corr.size == 0 { 0.0 } else { hits as f64 / corr.size as f64 },
        correct,
    }
}

/// `c_k = r[k][k] − (1/K)·Σ_l r[k][l]`, the mean including the diagonal.
/// `None` when any entry of the row is undefined.
pub fn confidence(corr: &CorrMatrix) -> Vec<Option<f64>> {
    (0..corr.size)
        .map(|k| {
            let row: Option<Vec<f64>> = corr.row(k).iter().copied().collect();
            let row = row?;
            let mean = row.iter().sum::<f64>() / corr.size as f64;
            Some(row[k] - mean)
        })
        .collect()
}

/// Representational dissimilarity matrix, `1 − r` between profile pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Rdm {
    pub size: usize,
    pub values: Vec<f64>,
}

impl Rdm {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.size + col]
    }

    /// Entries above the diagonal, row by row.
    pub fn upper_triangle(&self) -> Vec<f64> {
        (0..self.size)
            .flat_map(|k| ((k + 1)..self.size).map(move |l| (k, l)))
            .map(|(k, l)| self.get(k, l))
            .collect()
    }
}

pub fn rdm(profiles: &[ResponseProfile]) -> Result<Rdm> {
    check_profiles(profiles, "rdm")?;
    let size = profiles.len();
    let mut values = vec![0.0; size * size];
    for k in 0..size {
        for l in (k + 1)..size {
            let d = 1.0 - pearson(&profiles[k].values, &profiles[l].values).map_err(|e| match e {
                Error::ZeroVariance(_) => Error::ZeroVariance(format!("profile {k} or {l}")),
                other => other,
            })?;
            values[k * size + l] = d;
            values[l * size + k] = d;
        }
    }
    Ok(Rdm { size, values })
}

/// Kendall's τ_a: `(concordant − discordant) / (n(n−1)/2)`; tied pairs add
/// nothing to the numerator.
///
/// Runs in O(n log n): after sorting by `(a, b)` the discordant pairs are
/// the strict inversions of `b`, counted during a merge sort.
pub fn kendall_tau(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!(
            "kendall_tau: lengths {} and {} differ",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::InvalidArgument("kendall_tau needs at least two values".into()));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::Numeric("kendall_tau: NaN input".into()));
    }
    let mut pairs: Vec<(f64, f64)> = a.iter().copied().zip(b.iter().copied()).collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.total_cmp(&q.1)));

    let tied_pairs = |run: u64| run * (run - 1) / 2;
    let (mut ties_a, mut ties_joint) = (0u64, 0u64);
    let (mut run_a, mut run_joint) = (1u64, 1u64);
    for i in 1..n {
        if pairs[i].0 == pairs[i - 1].0 {
            run_a += 1;
            if pairs[i].1 == pairs[i - 1].1 {
                run_joint += 1;
            } else {
                ties_joint += tied_pairs(run_joint);
                run_joint = 1;
            }
        } else {
            ties_a += tied_pairs(run_a);
            ties_joint += tied_pairs(run_joint);
            run_a = 1;
            run_joint = 1;
        }
    }
    ties_a += tied_pairs(run_a);
    ties_joint += tied_pairs(run_joint);

    let mut bs: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut scratch = vec![0.0; n];
    let swaps = count_inversions(&mut bs, &mut scratch);

    let mut ties_b = 0u64;
    let mut run_b = 1u64;
    for i in 1..n {
        if bs[i] == bs[i - 1] {
            run_b += 1;
        } else {
            ties_b += tied_pairs(run_b);
            run_b = 1;
        }
    }
    ties_b += tied_pairs(run_b);

    let total = tied_pairs(n as u64) as i128;
    let net = total - ties_a as i128 - ties_b as i128 + ties_joint as i128 - 2 * swaps as i128;
    Ok(net as f64 / total as f64)
}

/// Sorts `v` ascending and returns the number of pairs `i < j` with
/// `v[i] > v[j]`.
fn count_inversions(v: &mut [f64], scratch: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut count = {
        let (left, right) = v.split_at_mut(mid);
        let (sl, sr) = scratch.split_at_mut(mid);
        count_inversions(left, sl) + count_inversions(right, sr)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            scratch[k] = v[j];
            count += (mid - i) as u64;
            j += 1;
        } else {
            scratch[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    while i < mid {
        scratch[k] = v[i];
        i += 1;
        k += 1;
    }
    while j < n {
        scratch[k] = v[j];
        j += 1;
        k += 1;
    }
    v.copy_from_slice(&scratch[..n]);
    count
}

/// Kendall τ between the upper triangles of two RDMs.
pub fn rsa(measured: &Rdm, predicted: &Rdm) -> Result<f64> {
    if measured.size != predicted.size {
        return Err(Error::Dimension(format!(
            "RDMs of size {} and {}",
            measured.size, predicted.size
        )));
    }
    kendall_tau(&measured.upper_triangle(), &predicted.upper_triangle())
}

/// Local RMS contrast: for each pixel in the stimulus disc, the root mean
/// squared deviation from the mean luminance of the disc pixels inside the
/// `(2r + 1)²` square window around it. Pixels outside the disc are zero
/// and never enter a window's statistics.
pub fn rms_contrast_map(luminance: &FeatureMap, window_radius: usize) -> Result<FeatureMap> {
    let geometry = luminance.geometry;
    let n = geometry.size_px;
    if 2 * window_radius + 1 > n {
        return Err(Error::InvalidArgument(format!(
            "window of radius {window_radius} does not fit a {n}-pixel image"
        )));
    }
    if let Some(v) = luminance.values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidArgument(format!("luminance {v} outside [0, 1]")));
    }
    let inside: Vec<bool> = (0..n * n).map(|i| geometry.in_disc(i % n, i / n)).collect();
    let r = window_radius;
    let values: Vec<f64> = (0..n * n)
        .into_par_iter()
        .map(|i| {
            if !inside[i] {
                return 0.0;
            }
            let (col, row) = (i % n, i / n);
            let centre = luminance.values[i];
            let rows = row.saturating_sub(r)..(row + r + 1).min(n);
            let cols = col.saturating_sub(r)..(col + r + 1).min(n);
            // deviations are taken from the centre pixel first so a flat
            // window gives exactly zero
            let mut count = 0usize;
            let mut shift_sum = 0.0;
            for rr in rows.clone() {
                for cc in cols.clone() {
                    let j = rr * n + cc;
                    if inside[j] {
                        shift_sum += luminance.values[j] - centre;
                        count += 1;
                    }
                }
            }
            let shift_mean = shift_sum / count as f64;
            let mut ss = 0.0;
            for rr in rows.clone() {
                for cc in cols.clone() {
                    let j = rr * n + cc;
                    if inside[j] {
                        let d = luminance.values[j] - centre - shift_mean;
                        ss += d * d;
                    }
                }
            }
            (ss / count as f64).sqrt()
        })
        .collect();
    FeatureMap::new(geometry, values)
}
