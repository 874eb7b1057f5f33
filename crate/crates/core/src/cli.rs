//! The `salience` command line.
//!
//! Exit status is 0 on success, 1 on a usage error and 2 when the inputs
//! cannot be read or analysed.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::evaluation::{
    cross_evaluate, cv_select_c, default_c_grid, percentile_bootstrap, CrossEvalConfig, MetricReport,
};
use crate::fixation::{
    filter_fixations, first_fixations, fixation_density, kld, salience_mass, FixationFilter, GridSpec, Rect,
};
use crate::io::{self, fmt_num, MeasuredTable};
use crate::pairwise::{encode_trials, fit, rank_images, DesignLayout, FitConfig};
use crate::prf::{
    confidence, correlation_matrix, filter_voxels, identify, predict_profiles, rdm, rms_contrast_map,
    FeatureMap, PrfConfig, PrfVoxel, Rdm, ResponseProfile, StimulusGeometry, VisualArea,
    STIMULUS_RADIUS_DEG,
};
use crate::synth;

#[derive(Debug, Parser)]
#[command(name = "salience", version, about = "Global visual salience, fixation maps and pRF identification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the pairwise model to a trials file.
    Fit(FitArgs),
    /// Choose C by participant-wise cross validation.
    Cv(CvArgs),
    /// Nested leave-two-participants-out evaluation.
    Eval(EvalArgs),
    /// Percentile bootstrap of the mean of a column.
    Bootstrap(BootstrapArgs),
    /// First-fixation density map for one image.
    Density(DensityArgs),
    /// KL divergence of a fixation density from a salience map.
    Kld(KldArgs),
    /// Left and right salience mass of a paired stimulus.
    Mass(MassArgs),
    /// Local RMS contrast of a luminance map.
    Contrast(ContrastArgs),
    /// Predicted pRF response profiles for a directory of feature maps.
    PredictProfiles(PredictArgs),
    /// Identify images from measured responses.
    Identify(IdentifyArgs),
    /// Compare measured and predicted RDMs by Kendall tau.
    Rsa(IdentifyArgs),
    /// Images ordered by global salience score.
    Rank(RankArgs),
    /// Write a seeded synthetic dataset for every other subcommand.
    Synthesize(SynthArgs),
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    /// Stop when the largest gradient component falls below this.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iter: usize,
    /// Number of images; defaults to the largest id in the trials plus one.
    #[arg(long)]
    pub images: Option<usize>,
    /// Number of subjects; defaults to the largest id in the trials plus one.
    #[arg(long)]
    pub subjects: Option<usize>,
}

impl SolverArgs {
    fn config(&self, c: f64) -> FitConfig {
        FitConfig {
            c,
            tol: self.tol,
            max_iter: self.max_iter,
            record_history: false,
        }
    }

    fn layout(&self, trials: &[crate::pairwise::Trial]) -> DesignLayout {
        let cover = DesignLayout::covering(trials);
        DesignLayout::new(
            self.images.unwrap_or(cover.images),
            self.subjects.unwrap_or(cover.subjects),
        )
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub trials: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[arg(long)]
    pub trials: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Comma-separated C values; defaults to ten log-spaced values from 1e-3 to 1e3.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub trials: PathBuf,
    /// Outer folds; defaults to one per pair of subjects.
    #[arg(long)]
    pub outer_folds: Option<usize>,
    #[arg(long, default_value_t = 5)]
    pub inner_folds: usize,
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Per-fold metrics CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct BootstrapArgs {
    /// CSV file with a header line.
    #[arg(long)]
    pub values: PathBuf,
    /// Column to resample; defaults to the first.
    #[arg(long)]
    pub column: Option<String>,
    #[arg(long, default_value_t = 10_000)]
    pub resamples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Resampled means, one per line.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    #[arg(long)]
    pub fixations: PathBuf,
    #[arg(long)]
    pub image: usize,
    /// Grid width in bins.
    #[arg(long)]
    pub width: usize,
    /// Grid height in bins.
    #[arg(long)]
    pub height: usize,
    #[arg(long, default_value_t = 1.0)]
    pub deg_per_bin: f64,
    /// Gaussian smoothing σ in degrees.
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 50.0)]
    pub min_duration: f64,
    /// Fixations starting earlier than this after onset are anticipatory.
    #[arg(long, default_value_t = 80.0)]
    pub anticipatory_latency: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct KldArgs {
    #[arg(long)]
    pub fixation_map: PathBuf,
    #[arg(long)]
    pub salience_map: PathBuf,
    #[arg(long, default_value_t = 1e-12)]
    pub eps: f64,
}

#[derive(Debug, Args)]
pub struct MassArgs {
    #[arg(long)]
    pub map: PathBuf,
    /// Left region as `x0,y0,x1,y1` in bins, end-exclusive.
    #[arg(long, value_parser = parse_rect)]
    pub left: Rect,
    #[arg(long, value_parser = parse_rect)]
    pub right: Rect,
}

#[derive(Debug, Args)]
pub struct ContrastArgs {
    #[arg(long)]
    pub luminance: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub window_radius: usize,
    #[arg(long, default_value_t = STIMULUS_RADIUS_DEG)]
    pub radius_deg: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct VoxelArgs {
    #[arg(long)]
    pub voxels: PathBuf,
    /// Directory of `<image_id>.grid` feature maps.
    #[arg(long)]
    pub maps: PathBuf,
    #[arg(long, default_value = "V1")]
    pub area: VisualArea,
    /// pRF window radius in units of σ.
    #[arg(long, default_value_t = 2.0)]
    pub window_sigmas: f64,
    #[arg(long, default_value_t = STIMULUS_RADIUS_DEG)]
    pub radius_deg: f64,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub voxel: VoxelArgs,
    /// Profiles in the measured-responses layout.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct IdentifyArgs {
    #[arg(long)]
    pub measured: PathBuf,
    #[command(flatten)]
    pub voxel: VoxelArgs,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub images: usize,
    #[arg(long, default_value_t = 10)]
    pub subjects: usize,
    #[arg(long, default_value_t = 5000)]
    pub trials: usize,
    #[arg(long, default_value_t = 45)]
    pub maps: usize,
    #[arg(long, default_value_t = 500)]
    pub voxels: usize,
    /// Feature-map width in pixels.
    #[arg(long, default_value_t = 128)]
    pub map_size: usize,
    /// Measurement noise as a multiple of each profile's SD.
    #[arg(long, default_value_t = 0.5)]
    pub noise: f64,
    #[arg(long, default_value = "V1")]
    pub area: VisualArea,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn parse_rect(s: &str) -> std::result::Result<Rect, String> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|e| format!("`{t}`: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    match parts[..] {
        [x0, y0, x1, y1] if x0 < x1 && y0 < y1 => Ok(Rect::new(x0, y0, x1, y1)),
        [_, _, _, _] => Err("need x0 < x1 and y0 < y1".into()),
        _ => Err("expected x0,y0,x1,y1".into()),
    }
}

/// Parses `args` (program name first) and runs the chosen subcommand.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(Error::InvalidArgument(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Fit(a) => cmd_fit(a),
        Command::Cv(a) => cmd_cv(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Bootstrap(a) => cmd_bootstrap(a),
        Command::Density(a) => cmd_density(a),
        Command::Kld(a) => cmd_kld(a),
        Command::Mass(a) => cmd_mass(a),
        Command::Contrast(a) => cmd_contrast(a),
        Command::PredictProfiles(a) => cmd_predict(a),
        Command::Identify(a) => cmd_identify(a),
        Command::Rsa(a) => cmd_rsa(a),
        Command::Rank(a) => cmd_rank(a),
        Command::Synthesize(a) => cmd_synthesize(a),
    }
}

fn stdout_line(line: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{line}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Error::io("<stdout>", e)),
        _ => Ok(()),
    }
}

fn cmd_fit(a: FitArgs) -> Result<()> {
    let trials = io::load_trials(&a.trials)?;
    let layout = a.solver.layout(&trials);
    let rows = encode_trials(&trials, layout)?;
    let outcome = fit(&rows, layout, &a.solver.config(a.c))?;
    if !outcome.converged {
        eprintln!(
            "warning: not converged after {} iterations (|grad|_inf = {:e})",
            outcome.iterations, outcome.grad_inf_norm
        );
    }
    io::save_model(&a.out, &outcome.model)?;
    stdout_line(&format!(
        "images={} subjects={} trials={} iterations={} objective={} converged={}",
        layout.images,
        layout.subjects,
        trials.len(),
        outcome.iterations,
        fmt_num(outcome.objective),
        outcome.converged
    ))
}

fn cmd_cv(a: CvArgs) -> Result<()> {
    let trials = io::load_trials(&a.trials)?;
    let layout = a.solver.layout(&trials);
    let grid = a.grid.clone().unwrap_or_else(default_c_grid);
    let selection = cv_select_c(&trials, layout, &grid, a.folds, a.seed, &a.solver.config(1.0))?;
    let mut lines = vec!["c,mean_accuracy".to_string()];
    for (c, acc) in &selection.per_c {
        lines.push(format!("{},{}", fmt_num(*c), fmt_num(*acc)));
    }
    lines.push(format!("# best_c={}", fmt_num(selection.best_c)));
    stdout_line(&lines.join("\n"))
}

fn report_rows(label: &str, report: &MetricReport) -> Vec<Vec<String>> {
    report
        .per_fold
        .iter()
        .enumerate()
        .map(|(i, m)| {
            vec![
                i.to_string(),
                label.to_string(),
                m.auc.map_or("NA".into(), fmt_num),
                m.tjur_r2.map_or("NA".into(), fmt_num),
                fmt_num(m.accuracy),
            ]
        })
        .collect()
}

fn summary_cell(s: Option<crate::evaluation::Summary>) -> String {
    s.map_or("NA".into(), |s| format!("{:.4} ± {:.4}", s.mean, s.sd))
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let trials = io::load_trials(&a.trials)?;
    let layout = a.solver.layout(&trials);
    let config = CrossEvalConfig {
        outer_folds: a.outer_folds,
        inner_folds: a.inner_folds,
        grid: a.grid.clone().unwrap_or_else(default_c_grid),
        seed: a.seed,
        fit: a.solver.config(1.0),
    };
    let result = cross_evaluate(&trials, layout, &config)?;

    if let Some(path) = &a.out {
        let mut text = String::from("fold,split,auc,tjur_r2,accuracy\n");
        let mut rows = report_rows("test", &result.test);
        rows.extend(report_rows("train", &result.train));
        for (i, b) in result.baseline_accuracy.iter().enumerate() {
            rows.push(vec![i.to_string(), "baseline".into(), "NA".into(), "NA".into(), fmt_num(*b)]);
        }
        for r in rows {
            text.push_str(&r.join(","));
            text.push('\n');
        }
        std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    }

    let baseline = result.baseline_summary();
    let mut lines = vec![
        format!("{:<10} {:>18} {:>18} {:>18}", "split", "AUC", "Tjur R2", "accuracy"),
        format!(
            "{:<10} {:>18} {:>18} {:>18}",
            "test",
            summary_cell(result.test.auc),
            summary_cell(result.test.tjur_r2),
            summary_cell(Some(result.test.accuracy))
        ),
        format!(
            "{:<10} {:>18} {:>18} {:>18}",
            "train",
            summary_cell(result.train.auc),
            summary_cell(result.train.tjur_r2),
            summary_cell(Some(result.train.accuracy))
        ),
        format!("{:<10} {:>18} {:>18} {:>18}", "baseline", "NA", "NA", summary_cell(Some(baseline))),
    ];
    let cs: Vec<String> = result.selected_c.iter().map(|c| fmt_num(*c)).collect();
    lines.push(format!("selected C per fold: {}", cs.join(",")));
    stdout_line(&lines.join("\n"))
}

fn read_column(path: &Path, column: Option<&str>) -> Result<Vec<f64>> {
    let name = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().from_reader(file);
    let headers = rdr.headers()?.clone();
    let idx = match column {
        None => 0,
        Some(c) => headers.iter().position(|h| h == c).ok_or_else(|| Error::Format {
            path: name.clone(),
            message: format!("no column `{c}`"),
        })?,
    };
    let field = headers.get(idx).unwrap_or("").to_string();
    let mut values = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let raw = rec.get(idx).unwrap_or("");
        values.push(raw.trim().parse::<f64>().map_err(|e| Error::Parse {
            path: name.clone(),
            line,
            field: field.clone(),
            message: format!("cannot parse `{raw}`: {e}"),
        })?);
    }
    Ok(values)
}

fn cmd_bootstrap(a: BootstrapArgs) -> Result<()> {
    let values = read_column(&a.values, a.column.as_deref())?;
    let result = percentile_bootstrap(&values, a.resamples, a.seed)?;
    if let Some(path) = &a.out {
        let mut text = String::from("resampled_mean\n");
        for m in &result.resampled_means {
            text.push_str(&fmt_num(*m));
            text.push('\n');
        }
        std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    }
    stdout_line(&format!(
        "n={} mean={} median={} se={} ci95=[{}, {}] p={}",
        values.len(),
        fmt_num(result.mean),
        fmt_num(result.median),
        fmt_num(result.standard_error),
        fmt_num(result.ci_low),
        fmt_num(result.ci_high),
        fmt_num(result.p_value)
    ))
}

fn cmd_density(a: DensityArgs) -> Result<()> {
    let fixations = io::load_fixations(&a.fixations)?;
    let spec = GridSpec {
        width: a.width,
        height: a.height,
        deg_per_bin: a.deg_per_bin,
    };
    let filter = FixationFilter {
        min_duration_ms: a.min_duration,
        anticipatory_latency_ms: a.anticipatory_latency,
        image_extent: Some((a.width as f64 * a.deg_per_bin, a.height as f64 * a.deg_per_bin)),
        ..FixationFilter::default()
    };
    let (kept, report, _) = filter_fixations(&fixations, &filter);
    let first = first_fixations(&kept, a.image);
    let grid = fixation_density(&first, spec, a.sigma)?;
    io::save_grid(&a.out, &grid)?;
    stdout_line(&format!(
        "kept={} too_short={} too_long={} outside={} anticipatory={} first_fixations={}",
        kept.len(),
        report.too_short,
        report.too_long,
        report.outside,
        report.anticipatory,
        first.len()
    ))
}

fn cmd_kld(a: KldArgs) -> Result<()> {
    let f = io::load_grid(&a.fixation_map)?.normalized()?;
    let s = io::load_grid(&a.salience_map)?.normalized()?;
    stdout_line(&fmt_num(kld(&f, &s, a.eps)?))
}

fn cmd_mass(a: MassArgs) -> Result<()> {
    let grid = io::load_grid(&a.map)?.normalized()?;
    let split = salience_mass(&grid, a.left, a.right)?;
    stdout_line(&format!(
        "m_left={} m_right={} delta={}",
        fmt_num(split.m_left),
        fmt_num(split.m_right),
        fmt_num(split.delta())
    ))
}

fn cmd_contrast(a: ContrastArgs) -> Result<()> {
    let grid = io::parse_grid(
        std::fs::File::open(&a.luminance).map_err(|e| Error::io(&a.luminance, e))?,
        &a.luminance.display().to_string(),
    )?;
    let map = FeatureMap::from_grid(&grid, a.radius_deg)?;
    let contrast = rms_contrast_map(&map, a.window_radius)?;
    io::save_grid(&a.out, &contrast.to_grid())
}

/// Feature maps keyed by the numeric stem of `<id>.grid` files.
fn load_maps(dir: &Path, radius_deg: f64) -> Result<BTreeMap<usize, FeatureMap>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut maps = BTreeMap::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("grid") {
            continue;
        }
        let Some(id) = path.file_stem().and_then(|s| s.to_str()).and_then(|s| s.parse::<usize>().ok()) else {
            continue;
        };
        let grid = io::load_grid(&path)?;
        maps.insert(id, FeatureMap::from_grid(&grid, radius_deg)?.normalized()?);
    }
    if maps.is_empty() {
        return Err(Error::Empty(format!("no <id>.grid files in {}", dir.display())));
    }
    Ok(maps)
}

/// Voxel-file columns that belong to the area and pass the inclusion filter.
fn area_columns(voxels: &[PrfVoxel], area: VisualArea) -> Result<(Vec<usize>, Vec<PrfVoxel>)> {
    let in_area: Vec<usize> = (0..voxels.len()).filter(|&i| voxels[i].area == area).collect();
    let subset: Vec<PrfVoxel> = in_area.iter().map(|&i| voxels[i]).collect();
    let kept = filter_voxels(&subset)
        .map_err(|_| Error::Empty(format!("no {area} voxels pass the inclusion filter")))?;
    let columns = kept.iter().map(|&k| in_area[k]).collect();
    let selected = kept.iter().map(|&k| subset[k]).collect();
    Ok((columns, selected))
}

fn prf_config(v: &VoxelArgs) -> Result<PrfConfig> {
    if !(v.window_sigmas > 0.0) {
        return Err(Error::InvalidArgument("--window-sigmas must be positive".into()));
    }
    Ok(PrfConfig {
        window_sigmas: v.window_sigmas,
    })
}

fn cmd_predict(a: PredictArgs) -> Result<()> {
    let voxels = io::load_voxels(&a.voxel.voxels)?;
    let (_, selected) = area_columns(&voxels, a.voxel.area)?;
    let maps = load_maps(&a.voxel.maps, a.voxel.radius_deg)?;
    let ids: Vec<usize> = maps.keys().copied().collect();
    let maps: Vec<FeatureMap> = maps.into_values().collect();
    let profiles = predict_profiles(&maps, &selected, &prf_config(&a.voxel)?)?;
    let table = MeasuredTable {
        image_ids: ids,
        rows: profiles.into_iter().map(|p| p.values).collect(),
    };
    io::save_measured(&a.out, &table)?;
    stdout_line(&format!("images={} voxels={}", table.image_ids.len(), selected.len()))
}

/// Measured and predicted profiles of the images present in both inputs, in
/// measured-file order.
fn paired_profiles(a: &IdentifyArgs) -> Result<(Vec<usize>, Vec<ResponseProfile>, Vec<ResponseProfile>)> {
    let voxels = io::load_voxels(&a.voxel.voxels)?;
    let measured = io::load_measured(&a.measured, Some(voxels.len()))?;
    let (columns, selected) = area_columns(&voxels, a.voxel.area)?;
    let maps = load_maps(&a.voxel.maps, a.voxel.radius_deg)?;
    let mut ids = Vec::new();
    let mut ordered_maps = Vec::new();
    let mut measured_profiles = Vec::new();
    for (k, id) in measured.image_ids.iter().enumerate() {
        let map = maps.get(id).ok_or_else(|| Error::Format {
            path: a.voxel.maps.display().to_string(),
            message: format!("no feature map for image {id}"),
        })?;
        ids.push(*id);
        ordered_maps.push(map.clone());
        measured_profiles.push(measured.profile(k, &columns));
    }
    let predicted = predict_profiles(&ordered_maps, &selected, &prf_config(&a.voxel)?)?;
    Ok((ids, measured_profiles, predicted))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Square matrix CSV with one row and one column per image.
fn save_square(path: &Path, ids: &[usize], row: impl Fn(usize) -> Vec<Option<f64>>) -> Result<()> {
    let mut text = String::from("image_id");
    for id in ids {
        text.push_str(&format!(",image_{id}"));
    }
    text.push('\n');
    for (k, id) in ids.iter().enumerate() {
        text.push_str(&id.to_string());
        for cell in row(k) {
            text.push(',');
            text.push_str(&cell.map_or("NA".into(), fmt_num));
        }
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn cmd_identify(a: IdentifyArgs) -> Result<()> {
    let (ids, measured, predicted) = paired_profiles(&a)?;
    let corr = correlation_matrix(&measured, &predicted)?;
    let result = identify(&corr);
    let conf = confidence(&corr);
    create_dir(&a.out_dir)?;
    save_square(&a.out_dir.join("correlation.csv"), &ids, |k| corr.row(k).to_vec())?;

    let conf_path = a.out_dir.join("confidence.csv");
    let mut text = String::from("image_id,confidence,correct\n");
    for ((id, c), ok) in ids.iter().zip(&conf).zip(&result.correct) {
        text.push_str(&format!("{id},{},{}\n", c.map_or("NA".into(), fmt_num), u8::from(*ok)));
    }
    std::fs::write(&conf_path, text).map_err(|e| Error::io(&conf_path, e))?;
    stdout_line(&format!(
        "area={} images={} voxels={} accuracy={}",
        a.voxel.area,
        ids.len(),
        measured.first().map_or(0, |p| p.len()),
        fmt_num(result.accuracy)
    ))
}

fn save_rdm(path: &Path, ids: &[usize], m: &Rdm) -> Result<()> {
    save_square(path, ids, |k| (0..m.size).map(|l| Some(m.get(k, l))).collect())
}

fn cmd_rsa(a: IdentifyArgs) -> Result<()> {
    let (ids, measured, predicted) = paired_profiles(&a)?;
    let measured_rdm = rdm(&measured)?;
    let predicted_rdm = rdm(&predicted)?;
    let tau = crate::prf::rsa(&measured_rdm, &predicted_rdm)?;
    create_dir(&a.out_dir)?;
    save_rdm(&a.out_dir.join("measured_rdm.csv"), &ids, &measured_rdm)?;
    save_rdm(&a.out_dir.join("predicted_rdm.csv"), &ids, &predicted_rdm)?;
    stdout_line(&format!("area={} images={} kendall_tau={}", a.voxel.area, ids.len(), fmt_num(tau)))
}

fn cmd_rank(a: RankArgs) -> Result<()> {
    let model = io::load_model(&a.model)?;
    let mut text = String::from("rank,image_id,score\n");
    for (i, (id, score)) in rank_images(&model).iter().enumerate() {
        text.push_str(&format!("{},{id},{}\n", i + 1, fmt_num(*score)));
    }
    match &a.out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::io(path, e)),
        None => stdout_line(text.trim_end()),
    }
}

fn cmd_synthesize(a: SynthArgs) -> Result<()> {
    if a.images < 2 || a.subjects == 0 || a.trials == 0 {
        return Err(Error::InvalidArgument("need at least 2 images, 1 subject and 1 trial".into()));
    }
    if a.maps < 2 || a.voxels < 2 || a.map_size < 3 {
        return Err(Error::InvalidArgument("need at least 2 maps, 2 voxels and a 3-pixel map".into()));
    }
    let dir = &a.out_dir;
    create_dir(dir)?;

    let sample = synth::sample_btl(&synth::BtlScenario {
        images: a.images,
        subjects: a.subjects,
        trials: a.trials,
        seed: a.seed,
        ..synth::BtlScenario::default()
    })?;
    io::save_trials(&dir.join("trials.csv"), &sample.trials)?;
    io::save_model(&dir.join("truth.txt"), &sample.truth)?;

    let fixations = synth::sample_fixations(a.images, a.subjects, 20.0, 15.0, a.seed.wrapping_add(1));
    io::save_fixations(&dir.join("fixations.csv"), &fixations)?;

    let geometry = StimulusGeometry::new(a.map_size, STIMULUS_RADIUS_DEG);
    let voxels = synth::sample_voxels(a.voxels, a.area, a.seed.wrapping_add(2));
    let maps = synth::sample_feature_maps(a.maps, geometry, a.seed.wrapping_add(3))?;
    let maps_dir = dir.join("maps");
    create_dir(&maps_dir)?;
    for (id, map) in maps.iter().enumerate() {
        io::save_grid(&maps_dir.join(format!("{id}.grid")), &map.to_grid())?;
    }
    let predicted = predict_profiles(&maps, &voxels, &PrfConfig::default())?;
    let measured = synth::noisy_profiles(&predicted, a.noise, a.seed.wrapping_add(4));
    io::save_voxels(&dir.join("voxels.csv"), &voxels)?;
    io::save_measured(
        &dir.join("measured.csv"),
        &MeasuredTable {
            image_ids: (0..maps.len()).collect(),
            rows: measured.into_iter().map(|p| p.values).collect(),
        },
    )?;
    stdout_line(&format!(
        "wrote trials.csv truth.txt fixations.csv voxels.csv measured.csv maps/ to {}",
        dir.display()
    ))
}
