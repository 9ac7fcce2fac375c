//! Tabular data model, CSV ingestion and the splitting/windowing primitives.

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::SeededRng;

/// Feature matrix with optional target and binary protected attribute.
///
/// The protected attribute is never one of the feature columns. Rows carry a
/// stable identifier (their index in the originating dataset) that survives
/// splitting and reordering.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    x: Matrix,
    y: Option<Vec<f64>>,
    z: Option<Vec<u8>>,
    feature_names: Vec<String>,
    row_ids: Vec<usize>,
    target_name: Option<String>,
    protected_name: Option<String>,
}

impl Dataset {
    pub fn new(x: Matrix, feature_names: Vec<String>) -> Result<Self> {
        if feature_names.len() != x.ncols() {
            return Err(Error::shape(
                format!("{} feature names", x.ncols()),
                feature_names.len(),
            ));
        }
        let mut seen = BTreeSet::new();
        for name in &feature_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::Schema(format!("duplicate feature name '{name}'")));
            }
        }
        if let Some(pos) = x.as_slice().iter().position(|v| !v.is_finite()) {
            let (row, col) = (pos / x.ncols().max(1), pos % x.ncols().max(1));
            return Err(Error::Parse {
                row: row + 1,
                column: feature_names[col].clone(),
                message: "non-finite feature value".into(),
            });
        }
        let n = x.nrows();
        Ok(Self {
            x,
            y: None,
            z: None,
            feature_names,
            row_ids: (0..n).collect(),
            target_name: None,
            protected_name: None,
        })
    }

    /// Convenience constructor from feature columns named `x1..xp`.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let names = (1..=columns.len()).map(|j| format!("x{j}")).collect();
        Self::new(Matrix::from_columns(columns)?, names)
    }

    pub fn with_target(mut self, name: impl Into<String>, y: Vec<f64>) -> Result<Self> {
        if y.len() != self.n() {
            return Err(Error::shape(format!("target of length {}", self.n()), y.len()));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("target contains non-finite values".into()));
        }
        let name = name.into();
        if self.feature_names.contains(&name) {
            return Err(Error::Schema(format!("target '{name}' collides with a feature name")));
        }
        self.y = Some(y);
        self.target_name = Some(name);
        Ok(self)
    }

    pub fn with_protected(mut self, name: impl Into<String>, z: Vec<u8>) -> Result<Self> {
        if z.len() != self.n() {
            return Err(Error::shape(format!("protected attribute of length {}", self.n()), z.len()));
        }
        if z.iter().any(|&v| v > 1) {
            return Err(Error::Domain("protected attribute must take values in {0,1}".into()));
        }
        let name = name.into();
        if self.feature_names.contains(&name) {
            return Err(Error::Schema(format!(
                "protected attribute '{name}' must not be a feature column"
            )));
        }
        self.z = Some(z);
        self.protected_name = Some(name);
        Ok(self)
    }

    pub fn without_target(mut self) -> Self {
        self.y = None;
        self.target_name = None;
        self
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y(&self) -> Option<&[f64]> {
        self.y.as_deref()
    }

    pub fn z(&self) -> Option<&[u8]> {
        self.z.as_deref()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn row_ids(&self) -> &[usize] {
        &self.row_ids
    }

    pub fn target_name(&self) -> Option<&str> {
        self.target_name.as_deref()
    }

    pub fn protected_name(&self) -> Option<&str> {
        self.protected_name.as_deref()
    }

    pub fn require_target(&self) -> Result<&[f64]> {
        self.y().ok_or_else(|| Error::Schema("dataset has no target column".into()))
    }

    pub fn require_protected(&self) -> Result<&[u8]> {
        self.z()
            .ok_or_else(|| Error::Schema("dataset has no protected attribute".into()))
    }

    pub fn feature_index(&self, name: &str) -> Result<usize> {
        self.feature_names
            .iter()
            .position(|f| f == name)
            .ok_or_else(|| Error::Schema(format!("no feature column '{name}'")))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.x.column(j)
    }

    /// Rows at `idx`, in that order, keeping their identifiers.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        Self {
            x: self.x.select_rows(idx),
            y: self.y.as_ref().map(|y| idx.iter().map(|&i| y[i]).collect()),
            z: self.z.as_ref().map(|z| idx.iter().map(|&i| z[i]).collect()),
            feature_names: self.feature_names.clone(),
            row_ids: idx.iter().map(|&i| self.row_ids[i]).collect(),
            target_name: self.target_name.clone(),
            protected_name: self.protected_name.clone(),
        }
    }

    /// Rows of `self` followed by rows of `other`; schemas must agree.
    pub fn concat(&self, other: &Dataset) -> Result<Self> {
        self.check_same_features(other)?;
        let join_opt = |a: &Option<Vec<f64>>, b: &Option<Vec<f64>>| match (a, b) {
            (Some(a), Some(b)) => Some(a.iter().chain(b).copied().collect()),
            _ => None,
        };
        let z = match (&self.z, &other.z) {
            (Some(a), Some(b)) => Some(a.iter().chain(b).copied().collect()),
            _ => None,
        };
        let y = join_opt(&self.y, &other.y);
        Ok(Self {
            x: self.x.vstack(&other.x)?,
            target_name: y.as_ref().and(self.target_name.clone()),
            protected_name: z.as_ref().and(self.protected_name.clone()),
            y,
            z,
            feature_names: self.feature_names.clone(),
            row_ids: self.row_ids.iter().chain(&other.row_ids).copied().collect(),
        })
    }

    /// Copy with feature column `j` replaced.
    pub fn with_column_replaced(&self, j: usize, values: &[f64]) -> Result<Self> {
        if values.len() != self.n() {
            return Err(Error::shape(format!("column of length {}", self.n()), values.len()));
        }
        if j >= self.p() {
            return Err(Error::Schema(format!("feature index {j} out of range")));
        }
        let mut out = self.clone();
        for (i, v) in values.iter().enumerate() {
            out.x.set(i, j, *v);
        }
        Ok(out)
    }

    /// Copy with a different target vector (same target name, or "y").
    pub fn with_target_values(&self, y: Vec<f64>) -> Result<Self> {
        let name = self.target_name.clone().unwrap_or_else(|| "y".into());
        self.clone().without_target().with_target(name, y)
    }

    pub fn check_same_features(&self, other: &Dataset) -> Result<()> {
        if self.feature_names != other.feature_names {
            return Err(Error::Schema(format!(
                "feature schemas differ: [{}] vs [{}]",
                self.feature_names.join(","),
                other.feature_names.join(",")
            )));
        }
        Ok(())
    }
}

/// Which CSV columns play the target and protected roles.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub target: Option<String>,
    pub protected: Option<String>,
}

impl CsvSchema {
    pub fn new(target: Option<&str>, protected: Option<&str>) -> Self {
        Self {
            target: target.map(str::to_owned),
            protected: protected.map(str::to_owned),
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset> {
    let file = std::fs::File::open(path.as_ref())?;
    read_csv(file, schema)
}

pub fn read_csv<R: Read>(reader: R, schema: &CsvSchema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(Error::Schema("missing header row".into()));
    }
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("no column named '{name}'")))
    };
    let target_col = schema.target.as_deref().map(find).transpose()?;
    let protected_col = schema.protected.as_deref().map(find).transpose()?;
    let feature_cols: Vec<usize> = (0..headers.len())
        .filter(|&c| Some(c) != target_col && Some(c) != protected_col)
        .collect();

    let mut data = Vec::new();
    let mut y = Vec::new();
    let mut z_raw = Vec::new();
    let mut n = 0usize;
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row = r + 1;
        if record.len() != headers.len() {
            return Err(Error::Parse {
                row,
                column: String::new(),
                message: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        for &c in &feature_cols {
            data.push(parse_cell(&record[c], row, &headers[c])?);
        }
        if let Some(c) = target_col {
            y.push(parse_cell(&record[c], row, &headers[c])?);
        }
        if let Some(c) = protected_col {
            z_raw.push(record[c].to_owned());
        }
        n += 1;
    }

    let names: Vec<String> = feature_cols.iter().map(|&c| headers[c].clone()).collect();
    let mut ds = Dataset::new(Matrix::new(n, names.len(), data)?, names)?;
    if let Some(c) = target_col {
        ds = ds.with_target(headers[c].clone(), y)?;
    }
    if let Some(c) = protected_col {
        ds = ds.with_protected(headers[c].clone(), coerce_binary(&z_raw, &headers[c])?)?;
    }
    Ok(ds)
}

fn parse_cell(raw: &str, row: usize, column: &str) -> Result<f64> {
    let err = |message: &str| Error::Parse {
        row,
        column: column.to_owned(),
        message: message.to_owned(),
    };
    if raw.is_empty() {
        return Err(err("missing value"));
    }
    let v: f64 = raw
        .parse()
        .map_err(|_| err(&format!("non-numeric value '{raw}'")))?;
    if !v.is_finite() {
        return Err(err(&format!("non-finite value '{raw}'")));
    }
    Ok(v)
}

/// Maps a protected column onto {0,1}. Values already in {0,1} are kept;
/// otherwise exactly two distinct levels are required and the smaller one
/// (numerically when all levels parse as numbers, else lexicographically)
/// becomes 0.
fn coerce_binary(raw: &[String], column: &str) -> Result<Vec<u8>> {
    let numeric: Option<Vec<f64>> = raw.iter().map(|s| s.parse::<f64>().ok()).collect();
    if let Some(vals) = &numeric {
        if vals.iter().all(|&v| v == 0.0 || v == 1.0) {
            return Ok(vals.iter().map(|&v| v as u8).collect());
        }
        let mut levels: Vec<f64> = vals.clone();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        if levels.len() == 2 {
            return Ok(vals.iter().map(|&v| u8::from(v == levels[1])).collect());
        }
        return Err(binary_error(column, levels.len()));
    }
    let levels: BTreeSet<&str> = raw.iter().map(String::as_str).collect();
    if levels.len() != 2 {
        return Err(binary_error(column, levels.len()));
    }
    let high = *levels.iter().next_back().expect("two levels");
    Ok(raw.iter().map(|s| u8::from(s == high)).collect())
}

fn binary_error(column: &str, levels: usize) -> Error {
    Error::Domain(format!(
        "protected column '{column}' must have two distinct levels, found {levels}"
    ))
}

/// Writes a dataset as CSV, 17 significant digits per value.
pub fn write_csv<W: Write>(d: &Dataset, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = d.feature_names.iter().map(String::as_str).collect();
    if let Some(t) = d.target_name() {
        header.push(t);
    }
    if let Some(p) = d.protected_name() {
        header.push(p);
    }
    wtr.write_record(&header)?;
    let mut record = Vec::with_capacity(header.len());
    for i in 0..d.n() {
        record.clear();
        record.extend(d.x.row(i).iter().map(|v| format_f64(*v)));
        if let Some(y) = d.y() {
            record.push(format_f64(y[i]));
        }
        if let Some(z) = d.z() {
            record.push(z[i].to_string());
        }
        wtr.write_record(&record)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn save_csv(d: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path.as_ref())?;
    write_csv(d, std::io::BufWriter::new(file))
}

/// 17 significant digits; parses back to the identical f64.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Shuffles rows by `seed` and cuts them into three parts.
///
/// Part sizes are `floor(f_i * n)` with the leftover rows handed out one at a
/// time to the parts with the largest fractional remainders (earlier parts
/// win ties). Within each part rows keep their original relative order.
pub fn split_three_way(
    d: &Dataset,
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<(Dataset, Dataset, Dataset)> {
    let f = [fractions.0, fractions.1, fractions.2];
    if f.iter().any(|v| !(*v >= 0.0)) || (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!(
            "split fractions must be non-negative and sum to 1, got {f:?}"
        )));
    }
    let n = d.n();
    if n < 3 {
        return Err(Error::Domain(format!("need at least 3 rows to split, got {n}")));
    }
    let sizes = allocate_sizes(n, &f);
    let perm = SeededRng::new(seed).permutation(n);
    let mut parts = Vec::with_capacity(3);
    let mut start = 0;
    for size in sizes {
        let mut idx = perm[start..start + size].to_vec();
        idx.sort_unstable();
        parts.push(d.select_rows(&idx));
        start += size;
    }
    let upper = parts.pop().expect("three parts");
    let middle = parts.pop().expect("three parts");
    let lower = parts.pop().expect("three parts");
    Ok((lower, middle, upper))
}

fn allocate_sizes(n: usize, fractions: &[f64]) -> Vec<usize> {
    let exact: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut sizes: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut leftover = n - sizes.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &k in order.iter().cycle() {
        if leftover == 0 {
            break;
        }
        sizes[k] += 1;
        leftover -= 1;
    }
    sizes
}

/// Stable-sorts rows by `feature` and cuts at n/3 and 2n/3, giving any
/// remainder rows to the earlier sections. Returns (lower, middle, upper);
/// the middle section is the one a model is trained on.
pub fn sorted_third_split(d: &Dataset, feature: &str) -> Result<(Dataset, Dataset, Dataset)> {
    let j = d.feature_index(feature)?;
    d.require_target()?;
    let n = d.n();
    if n < 3 {
        return Err(Error::Domain(format!("need at least 3 rows, got {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d.x.get(a, j).total_cmp(&d.x.get(b, j)));
    let [s0, s1, _] = third_sizes(n);
    Ok((
        d.select_rows(&order[..s0]),
        d.select_rows(&order[s0..s0 + s1]),
        d.select_rows(&order[s0 + s1..]),
    ))
}

/// Section sizes used by [`sorted_third_split`].
pub fn third_sizes(n: usize) -> [usize; 3] {
    let base = n / 3;
    let rem = n % 3;
    [base + usize::from(rem > 0), base + usize::from(rem > 1), base]
}

/// Row ranges `[k*stride, k*stride + size)`; trailing partial windows are dropped.
pub fn rolling_windows(n: usize, size: usize, stride: usize) -> Result<Vec<Range<usize>>> {
    if size == 0 || stride == 0 {
        return Err(Error::Domain("window size and stride must be at least 1".into()));
    }
    if size > n {
        return Err(Error::Domain(format!("window size {size} exceeds {n} rows")));
    }
    let count = (n - size) / stride + 1;
    Ok((0..count).map(|k| k * stride..k * stride + size).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StandardizationStats {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl StandardizationStats {
    pub fn fit(v: &[f64]) -> Result<Self> {
        if v.len() < 2 {
            return Err(Error::Domain(format!(
                "standardization needs at least 2 values, got {}",
                v.len()
            )));
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        if !(std > 1e-14 * mean.abs()) || std == 0.0 {
            return Err(Error::Degenerate("series has zero variance".into()));
        }
        Ok(Self { mean, std })
    }

    pub fn apply(&self, x: f64) -> f64 {
        (x - self.mean) / self.std
    }
}

pub fn standardize_series(v: &[f64]) -> Result<(Vec<f64>, StandardizationStats)> {
    let stats = StandardizationStats::fit(v)?;
    Ok((v.iter().map(|&x| stats.apply(x)).collect(), stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small() -> Dataset {
        read_csv("x1,x2,y\n0,1,0\n1,0,1".as_bytes(), &CsvSchema::new(Some("y"), None)).unwrap()
    }

    #[test]
    fn parses_three_line_file() {
        let d = small();
        assert_eq!((d.n(), d.p()), (2, 2));
        assert_eq!(d.y().unwrap(), &[0.0, 1.0]);
        assert_eq!(d.feature_names(), &["x1", "x2"]);
    }

    #[test]
    fn missing_protected_column_is_named() {
        let err = read_csv(
            "x1,x2,y\n0,1,0\n1,0,1".as_bytes(),
            &CsvSchema::new(Some("y"), Some("zz")),
        )
        .unwrap_err();
        assert!(matches!(&err, Error::Schema(m) if m.contains("zz")), "{err}");
    }

    #[test]
    fn non_numeric_feature_reports_position() {
        let err = read_csv("a,b\n1,2\n3,x\n".as_bytes(), &CsvSchema::default()).unwrap_err();
        match err {
            Error::Parse { row, column, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, "b");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn missing_and_nan_cells_rejected() {
        assert!(read_csv("a,b\n1,\n".as_bytes(), &CsvSchema::default()).is_err());
        assert!(read_csv("a,b\n1,NaN\n".as_bytes(), &CsvSchema::default()).is_err());
    }

    #[test]
    fn protected_levels_are_coerced() {
        let d = read_csv(
            "a,g\n1,male\n2,female\n3,male\n".as_bytes(),
            &CsvSchema::new(None, Some("g")),
        )
        .unwrap();
        assert_eq!(d.z().unwrap(), &[1, 0, 1]);
        let d = read_csv("a,g\n1,3\n2,7\n".as_bytes(), &CsvSchema::new(None, Some("g"))).unwrap();
        assert_eq!(d.z().unwrap(), &[0, 1]);
        let err = read_csv("a,g\n1,1\n2,2\n3,3\n".as_bytes(), &CsvSchema::new(None, Some("g")))
            .unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn thirds_of_nine() {
        let d = Dataset::from_columns(&[(0..9).map(f64::from).collect()]).unwrap();
        let (a, b, c) = split_three_way(&d, (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0), 7).unwrap();
        assert_eq!((a.n(), b.n(), c.n()), (3, 3, 3));
        let (a2, b2, c2) = split_three_way(&d, (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0), 7).unwrap();
        assert_eq!((a.row_ids(), b.row_ids(), c.row_ids()), (a2.row_ids(), b2.row_ids(), c2.row_ids()));
    }

    #[test]
    fn ten_rows_split_four_three_three() {
        let d = Dataset::from_columns(&[(0..10).map(f64::from).collect()]).unwrap();
        let (a, b, c) = split_three_way(&d, (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0), 1).unwrap();
        let mut sizes = vec![a.n(), b.n(), c.n()];
        sizes.sort_unstable();
        assert_eq!(sizes, vec![3, 3, 4]);
        // enumeration: every id appears exactly once
        let mut ids: Vec<usize> = [a.row_ids(), b.row_ids(), c.row_ids()].concat();
        ids.sort_unstable();
        assert_eq!(ids, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn bad_fractions_rejected() {
        let d = Dataset::from_columns(&[vec![0.0; 5]]).unwrap();
        assert!(matches!(split_three_way(&d, (0.5, 0.5, 0.5), 0), Err(Error::Domain(_))));
    }

    #[test]
    fn sorted_thirds_of_one_to_nine() {
        let vals: Vec<f64> = vec![5.0, 1.0, 9.0, 3.0, 7.0, 2.0, 8.0, 4.0, 6.0];
        let d = Dataset::from_columns(&[vals.clone()]).unwrap().with_target("y", vals).unwrap();
        let (lo, mid, up) = sorted_third_split(&d, "x1").unwrap();
        assert_eq!(lo.column(0), vec![1.0, 2.0, 3.0]);
        assert_eq!(mid.column(0), vec![4.0, 5.0, 6.0]);
        assert_eq!(up.column(0), vec![7.0, 8.0, 9.0]);
    }

    #[test]
    fn constant_feature_split_is_stable() {
        let d = Dataset::from_columns(&[vec![1.0; 7]])
            .unwrap()
            .with_target("y", (0..7).map(f64::from).collect())
            .unwrap();
        let (lo, mid, up) = sorted_third_split(&d, "x1").unwrap();
        assert_eq!(lo.row_ids(), &[0, 1, 2]);
        assert_eq!(mid.row_ids(), &[3, 4]);
        assert_eq!(up.row_ids(), &[5, 6]);
    }

    #[test]
    fn sorted_thirds_are_ordered() {
        let mut rng = SeededRng::new(11);
        let v: Vec<f64> = (0..100).map(|_| rng.uniform()).collect();
        let d = Dataset::from_columns(&[v.clone()]).unwrap().with_target("y", v).unwrap();
        let (lo, mid, up) = sorted_third_split(&d, "x1").unwrap();
        let max = |d: &Dataset| d.column(0).into_iter().fold(f64::MIN, f64::max);
        let min = |d: &Dataset| d.column(0).into_iter().fold(f64::MAX, f64::min);
        assert!(max(&lo) <= min(&mid) && max(&mid) <= min(&up));
    }

    #[test]
    fn sorted_split_requires_feature() {
        assert!(matches!(sorted_third_split(&small(), "nope"), Err(Error::Schema(_))));
    }

    #[test]
    fn window_counts() {
        assert_eq!(rolling_windows(5, 2, 1).unwrap().len(), 4);
        assert_eq!(rolling_windows(50, 50, 1).unwrap().len(), 1);
        let w = rolling_windows(101, 50, 10).unwrap();
        // direct enumeration of admissible starts
        let starts: Vec<usize> = (0..=101).step_by(10).filter(|s| s + 50 <= 101).collect();
        assert_eq!(w.len(), starts.len());
        assert_eq!(w.len(), 6);
        assert!(rolling_windows(3, 4, 1).is_err());
    }

    #[test]
    fn standardize_basics() {
        let (z, stats) = standardize_series(&[0.0, 2.0]).unwrap();
        assert_eq!(z, vec![-1.0, 1.0]);
        assert_eq!(stats, StandardizationStats { mean: 1.0, std: 1.0 });
        assert!(matches!(standardize_series(&[5.0, 5.0, 5.0]), Err(Error::Degenerate(_))));
    }

    proptest! {
        #[test]
        fn splits_partition_rows(n in 3usize..400, seed in any::<u64>()) {
            let d = Dataset::from_columns(&[(0..n).map(|i| i as f64).collect()]).unwrap();
            let (a, b, c) = split_three_way(&d, (0.2, 0.5, 0.3), seed).unwrap();
            let mut ids: Vec<usize> = [a.row_ids(), b.row_ids(), c.row_ids()].concat();
            ids.sort_unstable();
            prop_assert_eq!(ids, (0..n).collect::<Vec<_>>());
        }

        #[test]
        fn standardization_moments_and_idempotence(v in proptest::collection::vec(-1e3f64..1e3, 2..200)) {
            prop_assume!(StandardizationStats::fit(&v).is_ok());
            let (z, _) = standardize_series(&v).unwrap();
            let n = z.len() as f64;
            let mean = z.iter().sum::<f64>() / n;
            let std = (z.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
            prop_assert!(mean.abs() < 1e-9);
            prop_assert!((std - 1.0).abs() < 1e-9);
            let (z2, _) = standardize_series(&z).unwrap();
            for (a, b) in z.iter().zip(&z2) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }

        #[test]
        fn csv_round_trip_is_exact(seed in any::<u64>(), n in 1usize..30, p in 1usize..5) {
            let mut rng = SeededRng::new(seed);
            let cols: Vec<Vec<f64>> = (0..p)
                .map(|_| (0..n).map(|_| rng.normal() * 10f64.powi(rng.below(12) as i32 - 6)).collect())
                .collect();
            let y: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
            let z: Vec<u8> = (0..n).map(|_| rng.below(2) as u8).collect();
            let d = Dataset::from_columns(&cols).unwrap()
                .with_target("target", y).unwrap()
                .with_protected("group", z).unwrap();
            let mut buf = Vec::new();
            write_csv(&d, &mut buf).unwrap();
            let back = read_csv(buf.as_slice(), &CsvSchema::new(Some("target"), Some("group"))).unwrap();
            prop_assert_eq!(back.x().as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                            d.x().as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
            prop_assert_eq!(back.y(), d.y());
            prop_assert_eq!(back.feature_names(), d.feature_names());
        }
    }
}
