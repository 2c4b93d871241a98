//! Datasets with missing-at-random responses.
//!
//! A [`Dataset`] holds `n` covariate rows of dimension `d`, the responses and
//! the observation indicators `delta`. Unobserved responses are stored as NaN
//! and are never read by the estimators. On disk the CSV layout is
//! `x1,...,xd,y,delta` with the literal token `NA` for missing responses.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::{Error, Result};

/// Token written for an unobserved response.
pub const MISSING_TOKEN: &str = "NA";

#[derive(Debug, Clone)]
pub struct Dataset {
    x: Vec<f64>,
    y: Vec<f64>,
    delta: Vec<bool>,
    d: usize,
}

impl Dataset {
    /// Builds a dataset from row-major covariates.
    ///
    /// Responses at rows with `delta[i] == false` are ignored and stored as NaN.
    pub fn new(x: Vec<f64>, d: usize, y: Vec<f64>, delta: Vec<bool>) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidInput("covariate dimension must be >= 1".into()));
        }
        if !x.len().is_multiple_of(d) {
            return Err(Error::InvalidInput(format!(
                "covariate buffer of length {} is not a multiple of d={d}",
                x.len()
            )));
        }
        let n = x.len() / d;
        if y.len() != n || delta.len() != n {
            return Err(Error::InvalidInput(format!(
                "length mismatch: {n} covariate rows, {} responses, {} indicators",
                y.len(),
                delta.len()
            )));
        }
        if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite covariate in row {}", pos / d)));
        }
        let mut y = y;
        for (i, (yi, &obs)) in y.iter_mut().zip(&delta).enumerate() {
            if obs {
                if !yi.is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "observed response in row {i} is not finite"
                    )));
                }
            } else {
                *yi = f64::NAN;
            }
        }
        Ok(Self { x, y, delta, d })
    }

    /// Dataset with every response observed.
    pub fn complete(x: Vec<f64>, d: usize, y: Vec<f64>) -> Result<Self> {
        let n = y.len();
        Self::new(x, d, y, vec![true; n])
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    pub fn x_flat(&self) -> &[f64] {
        &self.x
    }

    /// Response of row `i`; NaN when unobserved.
    pub fn y(&self, i: usize) -> f64 {
        self.y[i]
    }

    pub fn responses(&self) -> &[f64] {
        &self.y
    }

    pub fn observed(&self, i: usize) -> bool {
        self.delta[i]
    }

    pub fn delta(&self) -> &[bool] {
        &self.delta
    }

    pub fn n_observed(&self) -> usize {
        self.delta.iter().filter(|&&o| o).count()
    }

    /// Indices of rows with an observed response.
    pub fn observed_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.delta.iter().enumerate().filter_map(|(i, &o)| o.then_some(i))
    }

    /// Minimum and maximum of coordinate `j` over all rows.
    pub fn coordinate_range(&self, j: usize) -> Option<(f64, f64)> {
        (0..self.n()).map(|i| self.x(i)[j]).fold(None, |acc, v| match acc {
            None => Some((v, v)),
            Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
        })
    }

    /// Same covariates and indicators with observed responses mapped through `f`.
    pub fn map_responses(&self, f: impl Fn(f64) -> f64) -> Self {
        let y = self
            .y
            .iter()
            .zip(&self.delta)
            .map(|(&v, &o)| if o { f(v) } else { f64::NAN })
            .collect();
        Self {
            x: self.x.clone(),
            y,
            delta: self.delta.clone(),
            d: self.d,
        }
    }

    /// Rows selected by `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut x = Vec::with_capacity(indices.len() * self.d);
        let mut y = Vec::with_capacity(indices.len());
        let mut delta = Vec::with_capacity(indices.len());
        for &i in indices {
            x.extend_from_slice(self.x(i));
            y.push(self.y[i]);
            delta.push(self.delta[i]);
        }
        Self { x, y, delta, d: self.d }
    }
}

impl PartialEq for Dataset {
    /// Unobserved responses compare equal regardless of their stored value.
    fn eq(&self, other: &Self) -> bool {
        self.d == other.d
            && self.x == other.x
            && self.delta == other.delta
            && self
                .y
                .iter()
                .zip(&other.y)
                .zip(&self.delta)
                .all(|((a, b), &o)| !o || a == b)
    }
}

/// Strictly increasing evaluation abscissae for component `alpha` (zero-based).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EvaluationGrid {
    pub alpha: usize,
    pub points: Vec<f64>,
}

impl EvaluationGrid {
    pub fn new(alpha: usize, points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Empty("evaluation grid"));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidInput("evaluation grid has non-finite points".into()));
        }
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(
                "evaluation grid must be strictly increasing".into(),
            ));
        }
        Ok(Self { alpha, points })
    }

    /// `count` equally spaced points covering `[lo, hi]` including both ends.
    pub fn uniform(alpha: usize, lo: f64, hi: f64, count: usize) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::InvalidInput(format!("empty grid range [{lo}, {hi}]")));
        }
        let points = match count {
            0 => return Err(Error::Empty("evaluation grid")),
            1 => vec![0.5 * (lo + hi)],
            _ => {
                let step = (hi - lo) / (count - 1) as f64;
                let mut p: Vec<f64> = (0..count).map(|k| lo + step * k as f64).collect();
                p[count - 1] = hi;
                p
            }
        };
        Self::new(alpha, points)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Formats a float so that parsing the text gives back the same bits.
pub fn format_float(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-5..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Reads a dataset whose header is `x1,...,xd,y` and, when `has_delta`,
/// a trailing `delta` column.
pub fn read_csv(path: impl AsRef<Path>, has_delta: bool) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    if header.is_empty() || header.iter().all(|h| h.is_empty()) {
        return Err(Error::Empty("CSV file"));
    }
    let d = parse_header(path, &header, has_delta)?;
    let width = header.len();

    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut delta = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let line = row + 2;
        let record = record.map_err(|e| csv_error(path, e))?;
        if record.len() != width {
            return Err(parse_err(
                path,
                line,
                format!("expected {width} fields, found {}", record.len()),
            ));
        }
        for j in 0..d {
            let field = record[j].trim();
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(path, line, format!("non-numeric covariate `{field}`")))?;
            if !v.is_finite() {
                return Err(parse_err(path, line, "non-finite covariate".into()));
            }
            x.push(v);
        }
        let y_field = record[d].trim();
        let obs = if has_delta {
            match record[d + 1].trim() {
                "1" => true,
                "0" => false,
                other => return Err(parse_err(path, line, format!("delta must be 0 or 1, got `{other}`"))),
            }
        } else {
            true
        };
        if y_field == MISSING_TOKEN {
            if obs {
                let msg = if has_delta {
                    "NA response with delta=1"
                } else {
                    "NA response without a delta column"
                };
                return Err(parse_err(path, line, msg.into()));
            }
            y.push(f64::NAN);
        } else {
            let v: f64 = y_field
                .parse()
                .map_err(|_| parse_err(path, line, format!("non-numeric response `{y_field}`")))?;
            if obs && !v.is_finite() {
                return Err(parse_err(path, line, "non-finite observed response".into()));
            }
            y.push(v);
        }
        delta.push(obs);
    }
    Dataset::new(x, d, y, delta)
}

/// Reads a dataset, detecting the `delta` column from the header.
pub fn read_csv_auto(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let has_delta = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .next_back()
        .is_some_and(|h| h.trim() == "delta");
    read_csv(path, has_delta)
}

/// Writes `x1..xd,y,delta`; missing responses are written as `NA,0`.
pub fn write_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut header: Vec<String> = (1..=data.d()).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    header.push("delta".into());
    let write =
        |out: &mut BufWriter<File>, line: String| out.write_all(line.as_bytes()).map_err(|e| Error::io(path, e));
    write(&mut out, header.join(",") + "\n")?;
    for i in 0..data.n() {
        let mut fields: Vec<String> = data.x(i).iter().map(|&v| format_float(v)).collect();
        if data.observed(i) {
            fields.push(format_float(data.y(i)));
            fields.push("1".into());
        } else {
            fields.push(MISSING_TOKEN.into());
            fields.push("0".into());
        }
        write(&mut out, fields.join(",") + "\n")?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Reads a covariate-only CSV (`x1..xd`, extra trailing columns ignored).
pub fn read_covariates(path: impl AsRef<Path>) -> Result<(Vec<f64>, usize)> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    let d = header
        .iter()
        .take_while(|h| h.strip_prefix('x').is_some_and(|k| k.parse::<usize>().is_ok()))
        .count();
    if d == 0 {
        return Err(Error::Empty("covariate columns"));
    }
    let mut x = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        for j in 0..d {
            let field = record.get(j).unwrap_or("").trim();
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(path, row + 2, format!("non-numeric covariate `{field}`")))?;
            x.push(v);
        }
    }
    Ok((x, d))
}

fn parse_header(path: &Path, header: &[String], has_delta: bool) -> Result<usize> {
    let tail = if has_delta { 2 } else { 1 };
    if header.len() < tail + 1 {
        return Err(parse_err(path, 1, format!("header too short: {}", header.join(","))));
    }
    let d = header.len() - tail;
    for (j, name) in header[..d].iter().enumerate() {
        if *name != format!("x{}", j + 1) {
            return Err(parse_err(
                path,
                1,
                format!("expected column x{}, found `{name}`", j + 1),
            ));
        }
    }
    if header[d] != "y" {
        return Err(parse_err(path, 1, format!("expected column y, found `{}`", header[d])));
    }
    if has_delta && header[d + 1] != "delta" {
        return Err(parse_err(
            path,
            1,
            format!("expected column delta, found `{}`", header[d + 1]),
        ));
    }
    Ok(d)
}

fn parse_err(path: &Path, line: usize, message: String) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{other:?}"),
        },
    }
}
