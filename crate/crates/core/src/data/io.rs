//! JSON Lines datasets (`{"id": 0, "x": [...], "y": ... | null}` per line)
//! and JSON taxonomy files (`{"nodes": [{"id", "parent", "name"}]}`).
//!
//! Sequence inputs are written as one array per position; plain vectors as a
//! flat array. Either layout is accepted on read.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::model::{validate_dataset, DataPoint, Dataset, OutputSpace, Violation};
use crate::spaces::{Taxonomy, TaxonomyNode};

#[derive(Debug, Deserialize, Serialize)]
#[serde(untagged)]
enum RawInput {
    Flat(Vec<f64>),
    Rows(Vec<Vec<f64>>),
}

#[derive(Debug, Deserialize)]
struct RawRecord {
    id: usize,
    x: RawInput,
    #[serde(default)]
    y: Option<Value>,
}

#[derive(Serialize)]
struct OutRecord<'a, Y> {
    id: usize,
    x: RawInput,
    y: Option<&'a Y>,
}

fn flatten(x: RawInput, row_width: Option<usize>) -> std::result::Result<Vec<f64>, String> {
    match x {
        RawInput::Flat(v) => Ok(v),
        RawInput::Rows(rows) => {
            let width = row_width.or_else(|| rows.first().map(Vec::len)).unwrap_or(0);
            if let Some((t, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != width) {
                return Err(format!("ragged input: position {t} has {} values, expected {width}", r.len()));
            }
            Ok(rows.into_iter().flatten().collect())
        }
    }
}

/// Parses a JSON Lines dataset. With `require_labels` false, a file without
/// any labeled point is accepted (prediction inputs).
pub fn read_dataset<S: OutputSpace + ?Sized, R: BufRead>(
    reader: R,
    space: &S,
    require_labels: bool,
) -> Result<Dataset<S::Output>> {
    let mut points = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse { line: line_no, message };
        let raw: RawRecord = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        if !seen.insert(raw.id) {
            return Err(parse_err(format!("duplicate id {}", raw.id)));
        }
        let x = flatten(raw.x, space.row_width()).map_err(parse_err)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(parse_err(format!("point {}: non-finite input", raw.id)));
        }
        space.check_input(&x).map_err(|e| parse_err(format!("point {}: {e}", raw.id)))?;
        let y = match raw.y {
            None | Some(Value::Null) => None,
            Some(v) => {
                let y: S::Output = serde_json::from_value(v)
                    .map_err(|e| parse_err(format!("point {}: bad output encoding: {e}", raw.id)))?;
                space.check_output(&x, &y).map_err(|e| parse_err(format!("point {}: {e}", raw.id)))?;
                Some(y)
            }
        };
        points.push(DataPoint { id: raw.id, x, y });
    }
    points.sort_by_key(|p| p.id);
    let ds = Dataset::new(space.space_id(), points);
    validate_dataset(&ds, space).into_result(|v| !require_labels && *v == Violation::NoLabeledPoints)?;
    Ok(ds)
}

/// Loads and validates a training dataset (at least one labeled point).
pub fn load_dataset<S: OutputSpace + ?Sized>(path: impl AsRef<Path>, space: &S) -> Result<Dataset<S::Output>> {
    read_dataset(BufReader::new(File::open(path)?), space, true)
}

/// Loads a dataset that may be entirely unlabeled.
pub fn load_points<S: OutputSpace + ?Sized>(path: impl AsRef<Path>, space: &S) -> Result<Dataset<S::Output>> {
    read_dataset(BufReader::new(File::open(path)?), space, false)
}

pub fn write_dataset<S: OutputSpace + ?Sized, W: Write>(
    ds: &Dataset<S::Output>,
    space: &S,
    mut writer: W,
) -> Result<()> {
    for p in &ds.points {
        let x = match space.row_width() {
            Some(d) => RawInput::Rows(p.x.chunks(d).map(<[f64]>::to_vec).collect()),
            None => RawInput::Flat(p.x.clone()),
        };
        serde_json::to_writer(&mut writer, &OutRecord { id: p.id, x, y: p.y.as_ref() })?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn save_dataset<S: OutputSpace + ?Sized>(ds: &Dataset<S::Output>, space: &S, path: impl AsRef<Path>) -> Result<()> {
    write_dataset(ds, space, BufWriter::new(File::create(path)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxonomyFile {
    pub nodes: Vec<TaxonomyNode>,
}

pub fn load_taxonomy(path: impl AsRef<Path>) -> Result<Taxonomy> {
    let file: TaxonomyFile = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    Taxonomy::new(file.nodes)
}

pub fn write_taxonomy<W: Write>(tree: &Taxonomy, mut writer: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut writer, &TaxonomyFile { nodes: tree.nodes().to_vec() })?;
    writer.write_all(b"\n")?;
    writer.flush()?;
    Ok(())
}

pub fn save_taxonomy(tree: &Taxonomy, path: impl AsRef<Path>) -> Result<()> {
    write_taxonomy(tree, BufWriter::new(File::create(path)?))
}
