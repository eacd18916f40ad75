//! File formats: labelled point CSVs, a binary matrix container, key=value text and report CSVs.

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};
use std::ops::Range;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::PointCloud;
use crate::gradient::GradientReport;
use crate::lowrank::{RankEntry, RankProfile};
use crate::metric::DistanceMatrix;
use crate::multiscale::{EmbedConfig, Method, MultiscaleEmbedding};

pub const MATRIX_MAGIC: &[u8; 4] = b"DEMD";
const MATRIX_HEADER: usize = 12;

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn csv_error(err: csv::Error) -> Error {
    let line = err.position().map_or(0, |p| p.line() as usize);
    match err.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        kind => parse_error(line, format!("{kind:?}")),
    }
}

fn parse_field<T: FromStr>(field: &str, line: usize, column: &str) -> Result<T> {
    field
        .trim()
        .parse()
        .map_err(|_| parse_error(line, format!("column `{column}`: cannot parse '{field}'")))
}

fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader)
}

fn csv_writer<W: Write>(writer: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().from_writer(writer)
}

fn headers<R: Read>(reader: &mut csv::Reader<R>) -> Result<Vec<String>> {
    Ok(reader.headers().map_err(csv_error)?.iter().map(str::to_string).collect())
}

fn expect_headers<R: Read>(reader: &mut csv::Reader<R>, expected: &[&str]) -> Result<()> {
    let found = headers(reader)?;
    if found != expected {
        return Err(parse_error(1, format!("expected header `{}`, found `{}`", expected.join(","), found.join(","))));
    }
    Ok(())
}

/// Reads `x0,...,x{d-1},label`. Every column other than `label` is a coordinate, in file order.
pub fn read_points<R: Read>(reader: R) -> Result<PointCloud> {
    let mut csv = csv_reader(reader);
    let names = headers(&mut csv)?;
    let label_column = names
        .iter()
        .position(|h| h == "label")
        .ok_or_else(|| parse_error(1, "missing column `label`"))?;
    let coordinate_columns: Vec<usize> = (0..names.len()).filter(|&c| c != label_column).collect();
    if coordinate_columns.is_empty() {
        return Err(parse_error(1, "no coordinate columns"));
    }
    let dim = coordinate_columns.len();
    let mut coords = Vec::new();
    let mut labels = Vec::new();
    for record in csv.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        for &c in &coordinate_columns {
            coords.push(parse_field::<f64>(&record[c], line, &names[c])?);
        }
        labels.push(parse_field::<usize>(&record[label_column], line, "label")?);
    }
    if labels.is_empty() {
        return Err(parse_error(2, "no data rows"));
    }
    PointCloud::from_row_major(dim, coords, labels)
}

pub fn write_points<W: Write>(writer: W, points: &PointCloud) -> Result<()> {
    let mut csv = csv_writer(writer);
    let mut header: Vec<String> = (0..points.dim()).map(|c| format!("x{c}")).collect();
    header.push("label".into());
    csv.write_record(&header).map_err(csv_error)?;
    for i in 0..points.len() {
        let mut row: Vec<String> = points.point(i).iter().map(f64::to_string).collect();
        row.push(points.labels()[i].to_string());
        csv.write_record(&row).map_err(csv_error)?;
    }
    csv.flush()?;
    Ok(())
}

/// Magic, little-endian `u32` rows and columns, then row-major little-endian `f64` values.
pub fn encode_matrix(matrix: &DMatrix<f64>) -> Result<Vec<u8>> {
    let rows = u32::try_from(matrix.nrows()).map_err(|_| Error::InvalidInput("too many rows".into()))?;
    let cols = u32::try_from(matrix.ncols()).map_err(|_| Error::InvalidInput("too many columns".into()))?;
    let mut out = Vec::with_capacity(MATRIX_HEADER + 8 * matrix.len());
    out.extend_from_slice(MATRIX_MAGIC);
    out.extend_from_slice(&rows.to_le_bytes());
    out.extend_from_slice(&cols.to_le_bytes());
    for r in 0..matrix.nrows() {
        for c in 0..matrix.ncols() {
            out.extend_from_slice(&matrix[(r, c)].to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_matrix(bytes: &[u8]) -> Result<DMatrix<f64>> {
    if bytes.len() < MATRIX_HEADER || &bytes[..4] != MATRIX_MAGIC {
        return Err(parse_error(0, "not a DEMD matrix: bad magic or truncated header"));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes")) as usize;
    let (rows, cols) = (word(4), word(8));
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(MATRIX_HEADER))
        .ok_or_else(|| parse_error(0, "matrix dimensions overflow"))?;
    if bytes.len() != expected {
        return Err(parse_error(0, format!("{rows}x{cols} matrix needs {expected} bytes, found {}", bytes.len())));
    }
    let mut values = Vec::with_capacity(rows * cols);
    for chunk in bytes[MATRIX_HEADER..].chunks_exact(8) {
        let v = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
        if !v.is_finite() {
            return Err(parse_error(0, format!("non-finite value at entry {}", values.len())));
        }
        values.push(v);
    }
    Ok(DMatrix::from_row_slice(rows, cols, &values))
}

/// `key = value` lines; `#` starts a comment, blank lines are skipped and keys must be unique.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (index, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| parse_error(index + 1, format!("expected key=value, found '{line}'")))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(parse_error(index + 1, "empty key"));
        }
        if out.insert(key.to_string(), value.trim().to_string()).is_some() {
            return Err(parse_error(index + 1, format!("duplicate key `{key}`")));
        }
    }
    Ok(out)
}

pub fn format_key_values<'a>(pairs: impl IntoIterator<Item = (&'a str, String)>) -> String {
    pairs.into_iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

fn take<T: FromStr>(map: &mut BTreeMap<String, String>, key: &str) -> Result<T> {
    let raw = map.remove(key).ok_or_else(|| parse_error(0, format!("missing key `{key}`")))?;
    raw.parse().map_err(|_| parse_error(0, format!("key `{key}`: cannot parse '{raw}'")))
}

fn parse_list(raw: &str, key: &str) -> Result<Vec<usize>> {
    if raw.is_empty() {
        return Ok(Vec::new());
    }
    raw.split(',').map(|s| parse_field(s, 0, key)).collect()
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

/// Everything about an embedding except its bin values.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMetadata {
    pub config: EmbedConfig,
    pub width: usize,
    pub scales: Vec<usize>,
    pub offsets: Vec<Range<usize>>,
    pub centers: Vec<Vec<usize>>,
}

impl EmbeddingMetadata {
    pub fn of(embedding: &MultiscaleEmbedding) -> Self {
        Self {
            config: embedding.config.clone(),
            width: embedding.width(),
            scales: embedding.scales.clone(),
            offsets: embedding.scale_offsets.clone(),
            centers: embedding.centers.clone(),
        }
    }

    pub fn to_text(&self) -> String {
        let c = &self.config;
        let mut pairs = vec![
            ("alpha", c.alpha.to_string()),
            ("max_scale", c.max_scale.to_string()),
            ("cheb_order", c.cheb_order.to_string()),
            ("n_scales_kept", c.n_scales_kept.to_string()),
            ("rank_delta", c.rank_delta.to_string()),
            ("method", c.method.to_string()),
            ("width", self.width.to_string()),
            ("scales", join(&self.scales)),
            ("block_sizes", join(&self.offsets.iter().map(|r| r.len()).collect::<Vec<_>>())),
        ];
        let keys: Vec<String> = (0..self.centers.len()).map(|b| format!("centers.{b}")).collect();
        let mut text = format_key_values(pairs.drain(..));
        for (key, centers) in keys.iter().zip(&self.centers) {
            text.push_str(&format!("{key}={}\n", join(centers)));
        }
        text
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut map = parse_key_values(text)?;
        let config = EmbedConfig {
            alpha: take(&mut map, "alpha")?,
            max_scale: take(&mut map, "max_scale")?,
            cheb_order: take(&mut map, "cheb_order")?,
            n_scales_kept: take(&mut map, "n_scales_kept")?,
            rank_delta: take(&mut map, "rank_delta")?,
            method: take::<String>(&mut map, "method")?.parse::<Method>()?,
        };
        let width: usize = take(&mut map, "width")?;
        let scales = parse_list(&take::<String>(&mut map, "scales")?, "scales")?;
        let sizes = parse_list(&take::<String>(&mut map, "block_sizes")?, "block_sizes")?;
        if sizes.len() != scales.len() {
            return Err(parse_error(0, "scales and block_sizes differ in length"));
        }
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut start = 0usize;
        for s in &sizes {
            let end = start.checked_add(*s).ok_or_else(|| parse_error(0, "block sizes overflow"))?;
            offsets.push(start..end);
            start = end;
        }
        if start != width {
            return Err(parse_error(0, format!("block sizes sum to {start}, width is {width}")));
        }
        let mut centers = Vec::with_capacity(sizes.len());
        for (b, size) in sizes.iter().enumerate() {
            let key = format!("centers.{b}");
            let list = parse_list(&take::<String>(&mut map, &key)?, &key)?;
            if list.len() != *size {
                return Err(parse_error(0, format!("`{key}` lists {} centers for a block of {size}", list.len())));
            }
            centers.push(list);
        }
        if let Some(key) = map.keys().next() {
            return Err(parse_error(0, format!("unknown key `{key}`")));
        }
        Ok(Self { config, width, scales, offsets, centers })
    }

    pub fn into_embedding(self, bins: DMatrix<f64>) -> Result<MultiscaleEmbedding> {
        if bins.ncols() != self.width {
            return Err(Error::InvalidInput(format!(
                "bins have {} columns, metadata says {}",
                bins.ncols(),
                self.width
            )));
        }
        Ok(MultiscaleEmbedding {
            bins,
            config: self.config,
            scale_offsets: self.offsets,
            scales: self.scales,
            centers: self.centers,
        })
    }
}

pub fn write_rank_profile<W: Write>(writer: W, profile: &RankProfile) -> Result<()> {
    let mut csv = csv_writer(writer);
    csv.write_record(["scale", "rank", "basis_size"]).map_err(csv_error)?;
    for e in &profile.entries {
        let rank = e.rank.map_or(String::new(), |r| r.to_string());
        csv.write_record([e.scale.to_string(), rank, e.basis_size.to_string()]).map_err(csv_error)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn read_rank_profile<R: Read>(reader: R) -> Result<RankProfile> {
    let mut csv = csv_reader(reader);
    expect_headers(&mut csv, &["scale", "rank", "basis_size"])?;
    let mut entries = Vec::new();
    for record in csv.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let rank = match record[1].trim() {
            "" => None,
            raw => Some(parse_field(raw, line, "rank")?),
        };
        entries.push(RankEntry {
            scale: parse_field(&record[0], line, "scale")?,
            rank,
            basis_size: parse_field(&record[2], line, "basis_size")?,
        });
    }
    Ok(RankProfile { entries })
}

/// Square CSV with header `id,0,1,...,m-1` and one row per sample.
pub fn write_distance_matrix<W: Write>(writer: W, dist: &DistanceMatrix) -> Result<()> {
    let mut csv = csv_writer(writer);
    let m = dist.m();
    let mut header = vec!["id".to_string()];
    header.extend((0..m).map(|j| j.to_string()));
    csv.write_record(&header).map_err(csv_error)?;
    for i in 0..m {
        let mut row = vec![i.to_string()];
        row.extend((0..m).map(|j| dist.values[(i, j)].to_string()));
        csv.write_record(&row).map_err(csv_error)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn read_distance_matrix<R: Read>(reader: R, method: &str) -> Result<DistanceMatrix> {
    let mut csv = csv_reader(reader);
    let names = headers(&mut csv)?;
    let m = names.len().saturating_sub(1);
    let expected: Vec<String> = std::iter::once("id".to_string()).chain((0..m).map(|j| j.to_string())).collect();
    if names != expected || m == 0 {
        return Err(parse_error(1, "distance header must be `id,0,1,...,m-1`"));
    }
    let mut values = DMatrix::zeros(m, m);
    let mut seen = HashSet::new();
    for record in csv.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let i: usize = parse_field(&record[0], line, "id")?;
        if i >= m || !seen.insert(i) {
            return Err(parse_error(line, format!("row id {i} out of range or repeated")));
        }
        for j in 0..m {
            values[(i, j)] = parse_field(&record[j + 1], line, &names[j + 1])?;
        }
    }
    if seen.len() != m {
        return Err(parse_error(0, format!("expected {m} rows, found {}", seen.len())));
    }
    DistanceMatrix::new(values, method)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairRecord {
    pub i: usize,
    pub j: usize,
    pub exact: f64,
    pub approx: f64,
}

pub fn write_pair_report<W: Write>(writer: W, pairs: &[PairRecord]) -> Result<()> {
    let mut csv = csv_writer(writer);
    csv.write_record(["pair_i", "pair_j", "exact", "approx"]).map_err(csv_error)?;
    for p in pairs {
        csv.write_record([p.i.to_string(), p.j.to_string(), p.exact.to_string(), p.approx.to_string()])
            .map_err(csv_error)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn read_pair_report<R: Read>(reader: R) -> Result<Vec<PairRecord>> {
    let mut csv = csv_reader(reader);
    expect_headers(&mut csv, &["pair_i", "pair_j", "exact", "approx"])?;
    csv.records()
        .map(|record| {
            let record = record.map_err(csv_error)?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            Ok(PairRecord {
                i: parse_field(&record[0], line, "pair_i")?,
                j: parse_field(&record[1], line, "pair_j")?,
                exact: parse_field(&record[2], line, "exact")?,
                approx: parse_field(&record[3], line, "approx")?,
            })
        })
        .collect()
}

/// Pairs of a distance matrix and its reference, upper triangle in row order.
pub fn pair_records(exact: &DistanceMatrix, approx: &DistanceMatrix) -> Result<Vec<PairRecord>> {
    if exact.m() != approx.m() {
        return Err(Error::InvalidInput("distance matrices differ in size".into()));
    }
    let m = exact.m();
    Ok((0..m)
        .flat_map(|i| (i + 1..m).map(move |j| (i, j)))
        .map(|(i, j)| PairRecord { i, j, exact: exact.values[(i, j)], approx: approx.values[(i, j)] })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborRecord {
    pub query: usize,
    pub rank: usize,
    pub neighbor: usize,
    pub distance: f64,
}

pub fn write_neighbors<W: Write>(writer: W, rows: &[NeighborRecord]) -> Result<()> {
    let mut csv = csv_writer(writer);
    csv.write_record(["query", "rank", "neighbor", "distance"]).map_err(csv_error)?;
    for r in rows {
        csv.write_record([r.query.to_string(), r.rank.to_string(), r.neighbor.to_string(), r.distance.to_string()])
            .map_err(csv_error)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn read_neighbors<R: Read>(reader: R) -> Result<Vec<NeighborRecord>> {
    let mut csv = csv_reader(reader);
    expect_headers(&mut csv, &["query", "rank", "neighbor", "distance"])?;
    csv.records()
        .map(|record| {
            let record = record.map_err(csv_error)?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            Ok(NeighborRecord {
                query: parse_field(&record[0], line, "query")?,
                rank: parse_field(&record[1], line, "rank")?,
                neighbor: parse_field(&record[2], line, "neighbor")?,
                distance: parse_field(&record[3], line, "distance")?,
            })
        })
        .collect()
}

/// One row per coordinate: `node,coordinate,analytic,numeric`.
pub fn write_gradient_report<W: Write>(writer: W, reports: &[GradientReport]) -> Result<()> {
    let mut csv = csv_writer(writer);
    csv.write_record(["node", "coordinate", "analytic", "numeric"]).map_err(csv_error)?;
    for r in reports {
        for (c, (a, n)) in r.analytic.iter().zip(&r.numeric).enumerate() {
            csv.write_record([r.node.to_string(), c.to_string(), a.to_string(), n.to_string()]).map_err(csv_error)?;
        }
    }
    csv.flush()?;
    Ok(())
}

pub fn read_gradient_report<R: Read>(reader: R) -> Result<Vec<GradientReport>> {
    let mut csv = csv_reader(reader);
    expect_headers(&mut csv, &["node", "coordinate", "analytic", "numeric"])?;
    let mut reports: Vec<(usize, Vec<f64>, Vec<f64>)> = Vec::new();
    for record in csv.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let node: usize = parse_field(&record[0], line, "node")?;
        let coordinate: usize = parse_field(&record[1], line, "coordinate")?;
        let a: f64 = parse_field(&record[2], line, "analytic")?;
        let n: f64 = parse_field(&record[3], line, "numeric")?;
        match reports.last_mut() {
            Some(last) if last.0 == node && last.1.len() == coordinate => {
                last.1.push(a);
                last.2.push(n);
            }
            _ if coordinate == 0 => reports.push((node, vec![a], vec![n])),
            _ => return Err(parse_error(line, "coordinates must start at 0 and be consecutive per node")),
        }
    }
    Ok(reports.into_iter().map(|(node, a, n)| GradientReport::new(node, a, n)).collect())
}
