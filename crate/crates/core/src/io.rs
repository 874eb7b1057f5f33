//! File formats.
//!
//! CSV files are unquoted, comma separated, `.` decimals, LF line endings,
//! with an exact header line:
//!
//! | file      | header |
//! |-----------|--------|
//! | trials    | `subject_id,left_image,right_image,task_target_side,familiar_side,outcome` |
//! | fixations | `subject_id,image_id,x_deg,y_deg,duration_ms,latency_ms,ordinal` |
//! | voxels    | `area,x_c,y_c,sigma,t_value,variance_explained` |
//! | measured  | `image_id` then one column per voxel, in voxel-file order |
//!
//! Grids are text: a `GRID w h deg_per_bin` line, then `h` lines of `w`
//! space-separated numbers. Models are `key=value` lines with bracketed,
//! comma-separated arrays. Every number is written as the shortest decimal
//! that parses back to the same `f64`.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fixation::{Fixation, SalienceGrid};
use crate::pairwise::{DesignLayout, GlobalSalienceModel, Trial};
use crate::prf::{PrfVoxel, ResponseProfile};

pub const TRIALS_HEADER: &str = "subject_id,left_image,right_image,task_target_side,familiar_side,outcome";
pub const FIXATIONS_HEADER: &str = "subject_id,image_id,x_deg,y_deg,duration_ms,latency_ms,ordinal";
pub const VOXELS_HEADER: &str = "area,x_c,y_c,sigma,t_value,variance_explained";

/// Shortest round-trip decimal.
pub fn fmt_num(x: f64) -> String {
    format!("{x:?}")
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// Rows of a headed CSV file with their 1-based line numbers.
struct CsvTable {
    name: String,
    rows: Vec<(usize, csv::StringRecord)>,
}

impl CsvTable {
    fn read<R: Read>(reader: R, name: &str, expected_header: Option<&str>) -> Result<(Vec<String>, Self)> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::None)
            .from_reader(reader);
        let mut records = rdr.records();
        let header = match records.next() {
            Some(r) => r?,
            None => {
                return Err(Error::Format {
                    path: name.to_string(),
                    message: "file is empty".into(),
                })
            }
        };
        let header: Vec<String> = header.iter().map(str::to_string).collect();
        if let Some(expected) = expected_header {
            if header.join(",") != expected {
                return Err(Error::Parse {
                    path: name.to_string(),
                    line: 1,
                    field: "header".into(),
                    message: format!("expected `{expected}`, found `{}`", header.join(",")),
                });
            }
        }
        let mut rows = Vec::new();
        for rec in records {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            if rec.len() == 1 && rec.get(0) == Some("") {
                continue;
            }
            if rec.len() != header.len() {
                return Err(Error::Parse {
                    path: name.to_string(),
                    line,
                    field: "row".into(),
                    message: format!("expected {} fields, found {}", header.len(), rec.len()),
                });
            }
            rows.push((line, rec));
        }
        Ok((
            header,
            Self {
                name: name.to_string(),
                rows,
            },
        ))
    }

    fn field<T: FromStr>(&self, line: usize, rec: &csv::StringRecord, idx: usize, field: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = rec.get(idx).unwrap_or("");
        raw.parse::<T>().map_err(|e| Error::Parse {
            path: self.name.clone(),
            line,
            field: field.to_string(),
            message: format!("cannot parse `{raw}`: {e}"),
        })
    }
}

pub fn parse_trials<R: Read>(reader: R, name: &str) -> Result<Vec<Trial>> {
    let (_, table) = CsvTable::read(reader, name, Some(TRIALS_HEADER))?;
    table
        .rows
        .iter()
        .map(|(line, rec)| {
            let trial = Trial {
                subject_id: table.field(*line, rec, 0, "subject_id")?,
                left_image: table.field(*line, rec, 1, "left_image")?,
                right_image: table.field(*line, rec, 2, "right_image")?,
                task_target_side: table.field(*line, rec, 3, "task_target_side")?,
                familiar_side: table.field(*line, rec, 4, "familiar_side")?,
                outcome: table.field(*line, rec, 5, "outcome")?,
            };
            if trial.left_image == trial.right_image {
                return Err(Error::Parse {
                    path: table.name.clone(),
                    line: *line,
                    field: "right_image".into(),
                    message: "left and right image must differ".into(),
                });
            }
            Ok(trial)
        })
        .collect()
}

pub fn load_trials(path: &Path) -> Result<Vec<Trial>> {
    parse_trials(open(path)?, &path.display().to_string())
}

pub fn write_trials<W: Write>(mut w: W, trials: &[Trial]) -> std::io::Result<()> {
    writeln!(w, "{TRIALS_HEADER}")?;
    for t in trials {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            t.subject_id,
            t.left_image,
            t.right_image,
            t.task_target_side.as_str(),
            t.familiar_side.as_str(),
            t.outcome.as_str()
        )?;
    }
    Ok(())
}

pub fn save_trials(path: &Path, trials: &[Trial]) -> Result<()> {
    let mut w = create(path)?;
    write_trials(&mut w, trials).map_err(|e| Error::io(path, e))?;
    finish(w, path)
}

pub fn parse_fixations<R: Read>(reader: R, name: &str) -> Result<Vec<Fixation>> {
    let (_, table) = CsvTable::read(reader, name, Some(FIXATIONS_HEADER))?;
    table
        .rows
        .iter()
        .map(|(line, rec)| {
            let f = Fixation {
                subject_id: table.field(*line, rec, 0, "subject_id")?,
                image_id: table.field(*line, rec, 1, "image_id")?,
                x: table.field(*line, rec, 2, "x_deg")?,
                y: table.field(*line, rec, 3, "y_deg")?,
                duration_ms: table.field(*line, rec, 4, "duration_ms")?,
                latency_ms: table.field(*line, rec, 5, "latency_ms")?,
                ordinal: table.field(*line, rec, 6, "ordinal")?,
            };
            let bad = |field: &str, message: &str| Error::Parse {
                path: table.name.clone(),
                line: *line,
                field: field.into(),
                message: message.into(),
            };
            if !(f.duration_ms > 0.0) {
                return Err(bad("duration_ms", "duration must be positive"));
            }
            if f.ordinal < 1 {
                return Err(bad("ordinal", "ordinal starts at 1"));
            }
            Ok(f)
        })
        .collect()
}

pub fn load_fixations(path: &Path) -> Result<Vec<Fixation>> {
    parse_fixations(open(path)?, &path.display().to_string())
}

pub fn write_fixations<W: Write>(mut w: W, fixations: &[Fixation]) -> std::io::Result<()> {
    writeln!(w, "{FIXATIONS_HEADER}")?;
    for f in fixations {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            f.subject_id,
            f.image_id,
            fmt_num(f.x),
            fmt_num(f.y),
            fmt_num(f.duration_ms),
            fmt_num(f.latency_ms),
            f.ordinal
        )?;
    }
    Ok(())
}

pub fn save_fixations(path: &Path, fixations: &[Fixation]) -> Result<()> {
    let mut w = create(path)?;
    write_fixations(&mut w, fixations).map_err(|e| Error::io(path, e))?;
    finish(w, path)
}

pub fn parse_voxels<R: Read>(reader: R, name: &str) -> Result<Vec<PrfVoxel>> {
    let (_, table) = CsvTable::read(reader, name, Some(VOXELS_HEADER))?;
    table
        .rows
        .iter()
        .map(|(line, rec)| {
            let v = PrfVoxel {
                area: table.field(*line, rec, 0, "area")?,
                x_c: table.field(*line, rec, 1, "x_c")?,
                y_c: table.field(*line, rec, 2, "y_c")?,
                sigma: table.field(*line, rec, 3, "sigma")?,
                t_value: table.field(*line, rec, 4, "t_value")?,
                variance_explained: table.field(*line, rec, 5, "variance_explained")?,
            };
            if !(v.sigma > 0.0) {
                return Err(Error::Parse {
                    path: table.name.clone(),
                    line: *line,
                    field: "sigma".into(),
                    message: "sigma must be positive".into(),
                });
            }
            Ok(v)
        })
        .collect()
}

pub fn load_voxels(path: &Path) -> Result<Vec<PrfVoxel>> {
    parse_voxels(open(path)?, &path.display().to_string())
}

pub fn write_voxels<W: Write>(mut w: W, voxels: &[PrfVoxel]) -> std::io::Result<()> {
    writeln!(w, "{VOXELS_HEADER}")?;
    for v in voxels {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            v.area,
            fmt_num(v.x_c),
            fmt_num(v.y_c),
            fmt_num(v.sigma),
            fmt_num(v.t_value),
            fmt_num(v.variance_explained)
        )?;
    }
    Ok(())
}

pub fn save_voxels(path: &Path, voxels: &[PrfVoxel]) -> Result<()> {
    let mut w = create(path)?;
    write_voxels(&mut w, voxels).map_err(|e| Error::io(path, e))?;
    finish(w, path)
}

/// Measured responses: one row per image, one column per voxel.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasuredTable {
    pub image_ids: Vec<usize>,
    pub rows: Vec<Vec<f64>>,
}

impl MeasuredTable {
    /// Profile of row `k` restricted to the given voxel columns.
    pub fn profile(&self, k: usize, voxel_columns: &[usize]) -> ResponseProfile {
        ResponseProfile::new(voxel_columns.iter().map(|&c| self.rows[k][c]).collect())
    }
}

pub fn parse_measured<R: Read>(reader: R, name: &str, voxel_count: Option<usize>) -> Result<MeasuredTable> {
    let (header, table) = CsvTable::read(reader, name, None)?;
    if header.first().map(String::as_str) != Some("image_id") {
        return Err(Error::Parse {
            path: name.to_string(),
            line: 1,
            field: "header".into(),
            message: "first column must be `image_id`".into(),
        });
    }
    if let Some(n) = voxel_count {
        if header.len() != n + 1 {
            return Err(Error::Format {
                path: name.to_string(),
                message: format!("{} voxel columns but the voxel file lists {n}", header.len() - 1),
            });
        }
    }
    let mut out = MeasuredTable {
        image_ids: Vec::new(),
        rows: Vec::new(),
    };
    for (line, rec) in &table.rows {
        out.image_ids.push(table.field(*line, rec, 0, "image_id")?);
        let values = (1..header.len())
            .map(|i| table.field::<f64>(*line, rec, i, &header[i]))
            .collect::<Result<Vec<f64>>>()?;
        out.rows.push(values);
    }
    Ok(out)
}

pub fn load_measured(path: &Path, voxel_count: Option<usize>) -> Result<MeasuredTable> {
    parse_measured(open(path)?, &path.display().to_string(), voxel_count)
}

pub fn write_measured<W: Write>(mut w: W, table: &MeasuredTable) -> std::io::Result<()> {
    let width = table.rows.first().map_or(0, Vec::len);
    let mut header = String::from("image_id");
    for i in 0..width {
        let _ = write!(header, ",voxel_{i}");
    }
    writeln!(w, "{header}")?;
    for (id, row) in table.image_ids.iter().zip(&table.rows) {
        let cells: Vec<String> = row.iter().map(|v| fmt_num(*v)).collect();
        writeln!(w, "{id},{}", cells.join(","))?;
    }
    Ok(())
}

pub fn save_measured(path: &Path, table: &MeasuredTable) -> Result<()> {
    let mut w = create(path)?;
    write_measured(&mut w, table).map_err(|e| Error::io(path, e))?;
    finish(w, path)
}

pub fn parse_grid<R: Read>(reader: R, name: &str) -> Result<SalienceGrid> {
    let fail = |line: usize, message: String| Error::Parse {
        path: name.to_string(),
        line,
        field: "grid".into(),
        message,
    };
    let mut lines = BufReader::new(reader).lines();
    let header = lines
        .next()
        .transpose()
        .map_err(|e| Error::io(name, e))?
        .ok_or_else(|| fail(1, "missing GRID header".into()))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 4 || parts[0] != "GRID" {
        return Err(fail(1, format!("expected `GRID w h deg_per_bin`, found `{header}`")));
    }
    let width: usize = parts[1].parse().map_err(|e| fail(1, format!("width: {e}")))?;
    let height: usize = parts[2].parse().map_err(|e| fail(1, format!("height: {e}")))?;
    let deg: f64 = parts[3].parse().map_err(|e| fail(1, format!("deg_per_bin: {e}")))?;

    let mut values = Vec::with_capacity(width * height);
    let mut rows = 0;
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(name, e))?;
        let lineno = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        if rows == height {
            return Err(fail(lineno, format!("more than {height} data lines")));
        }
        let before = values.len();
        for tok in line.split_whitespace() {
            values.push(tok.parse::<f64>().map_err(|e| fail(lineno, format!("`{tok}`: {e}")))?);
        }
        if values.len() - before != width {
            return Err(fail(
                lineno,
                format!("expected {width} values, found {}", values.len() - before),
            ));
        }
        rows += 1;
    }
    if rows != height {
        return Err(fail(rows + 2, format!("expected {height} data lines, found {rows}")));
    }
    SalienceGrid::new(width, height, deg, values)
}

/// Reads a grid; negative or non-finite values are rejected.
pub fn load_grid(path: &Path) -> Result<SalienceGrid> {
    let grid = parse_grid(open(path)?, &path.display().to_string())?;
    grid.check_nonnegative().map_err(|e| Error::Format {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    Ok(grid)
}

pub fn write_grid<W: Write>(mut w: W, grid: &SalienceGrid) -> std::io::Result<()> {
    writeln!(w, "GRID {} {} {}", grid.width, grid.height, fmt_num(grid.deg_per_bin))?;
    for row in grid.values.chunks(grid.width.max(1)) {
        let cells: Vec<String> = row.iter().map(|v| fmt_num(*v)).collect();
        writeln!(w, "{}", cells.join(" "))?;
    }
    Ok(())
}

pub fn save_grid(path: &Path, grid: &SalienceGrid) -> Result<()> {
    let mut w = create(path)?;
    write_grid(&mut w, grid).map_err(|e| Error::io(path, e))?;
    finish(w, path)
}

fn fmt_array(values: &[f64]) -> String {
    let cells: Vec<String> = values.iter().map(|v| fmt_num(*v)).collect();
    format!("[{}]", cells.join(","))
}

pub fn model_to_string(model: &GlobalSalienceModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "M={}", model.w.len());
    let _ = writeln!(out, "K={}", model.s.len());
    let _ = writeln!(out, "C={}", fmt_num(model.c));
    let _ = writeln!(out, "w={}", fmt_array(&model.w));
    let _ = writeln!(out, "tau={}", fmt_num(model.tau));
    let _ = writeln!(out, "phi={}", fmt_num(model.phi));
    let _ = writeln!(out, "s={}", fmt_array(&model.s));
    out
}

pub fn parse_model(text: &str, name: &str) -> Result<GlobalSalienceModel> {
    let fail = |line: usize, field: &str, message: String| Error::Parse {
        path: name.to_string(),
        line,
        field: field.to_string(),
        message,
    };
    let mut fields: std::collections::BTreeMap<String, (usize, String)> = Default::default();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| fail(i + 1, "line", format!("expected key=value, found `{line}`")))?;
        if fields.insert(key.trim().to_string(), (i + 1, value.trim().to_string())).is_some() {
            return Err(fail(i + 1, key, "duplicate key".into()));
        }
    }
    let get = |key: &str| {
        fields
            .get(key)
            .cloned()
            .ok_or_else(|| fail(0, key, "missing".into()))
    };
    let scalar = |key: &str| -> Result<f64> {
        let (line, raw) = get(key)?;
        raw.parse::<f64>().map_err(|e| fail(line, key, format!("`{raw}`: {e}")))
    };
    let count = |key: &str| -> Result<usize> {
        let (line, raw) = get(key)?;
        raw.parse::<usize>().map_err(|e| fail(line, key, format!("`{raw}`: {e}")))
    };
    let array = |key: &str, len: usize| -> Result<Vec<f64>> {
        let (line, raw) = get(key)?;
        let inner = raw
            .strip_prefix('[')
            .and_then(|r| r.strip_suffix(']'))
            .ok_or_else(|| fail(line, key, "expected a bracketed array".into()))?;
        let values: Vec<f64> = if inner.trim().is_empty() {
            Vec::new()
        } else {
            inner
                .split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|e| fail(line, key, format!("`{t}`: {e}"))))
                .collect::<Result<_>>()?
        };
        if values.len() != len {
            return Err(fail(line, key, format!("expected {len} values, found {}", values.len())));
        }
        Ok(values)
    };
    let m = count("M")?;
    let k = count("K")?;
    let model = GlobalSalienceModel {
        w: array("w", m)?,
        tau: scalar("tau")?,
        phi: scalar("phi")?,
        s: array("s", k)?,
        c: scalar("C")?,
    };
    debug_assert_eq!(model.layout(), DesignLayout::new(m, k));
    model.validate().map_err(|e| Error::Format {
        path: name.to_string(),
        message: e.to_string(),
    })?;
    Ok(model)
}

pub fn load_model(path: &Path) -> Result<GlobalSalienceModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_model(&text, &path.display().to_string())
}

pub fn save_model(path: &Path, model: &GlobalSalienceModel) -> Result<()> {
    std::fs::write(path, model_to_string(model)).map_err(|e| Error::io(path, e))
}

/// Writes rows of numbers under a header; `None` cells are written as `NA`.
pub fn write_csv_rows<W: Write>(mut w: W, header: &[&str], rows: &[Vec<Option<f64>>]) -> std::io::Result<()> {
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        let cells: Vec<String> = row
            .iter()
            .map(|c| c.map_or_else(|| "NA".to_string(), fmt_num))
            .collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

pub fn save_csv_rows(path: &Path, header: &[&str], rows: &[Vec<Option<f64>>]) -> Result<()> {
    let mut w = create(path)?;
    write_csv_rows(&mut w, header, rows).map_err(|e| Error::io(path, e))?;
    finish(w, path)
}
