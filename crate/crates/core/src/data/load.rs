use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{BigEndian, ReadBytesExt};
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::numeric::Matrix;

const IDX_UBYTE_IMAGES: u32 = 0x0000_0803;
const IDX_UBYTE_LABELS: u32 = 0x0000_0801;

/// Where a dataset lives and how it is encoded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "format", rename_all = "kebab-case")]
pub enum DataSource {
    /// One sample per line, label in the final column, optional header row.
    Csv { path: PathBuf },
    /// Classic idx image file (`0x00000803`) plus idx label file (`0x00000801`).
    IdxPair { images: PathBuf, labels: PathBuf },
}

/// Loads a dataset. When `num_classes` is `None` it is inferred as `max label + 1`.
pub fn load_dataset(source: &DataSource, num_classes: Option<usize>) -> Result<Dataset> {
    let (features, labels) = match source {
        DataSource::Csv { path } => read_csv(path)?,
        DataSource::IdxPair { images, labels } => read_idx_pair(images, labels)?,
    };
    let inferred = labels.iter().copied().max().map_or(0, |m| m as usize + 1);
    let k = match num_classes {
        Some(k) => {
            if let Some(row) = labels.iter().position(|&y| y as usize >= k) {
                return Err(Error::format(
                    row,
                    format!("label {} not below declared class count {k}", labels[row]),
                ));
            }
            k
        }
        None => inferred.max(2),
    };
    Dataset::new(features, labels, k)
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn read_csv(path: &Path) -> Result<(Matrix, Vec<i32>)> {
    let reader = BufReader::new(open(path)?);
    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut width: Option<usize> = None;
    for (line_no, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if line_no == 0 && cells[0].parse::<f64>().is_err() {
            continue; // header
        }
        if cells.len() < 2 {
            return Err(Error::format(line_no, "need at least one feature and a label"));
        }
        match width {
            None => width = Some(cells.len()),
            Some(w) if w != cells.len() => {
                return Err(Error::format(
                    line_no,
                    format!("expected {w} columns, found {}", cells.len()),
                ))
            }
            Some(_) => {}
        }
        let (label_cell, feature_cells) = cells.split_last().expect("non-empty row");
        for cell in feature_cells {
            let v: f64 = cell
                .parse()
                .map_err(|_| Error::format(line_no, format!("bad feature value `{cell}`")))?;
            if !v.is_finite() {
                return Err(Error::format(line_no, "non-finite feature value"));
            }
            data.push(v);
        }
        let label: i32 = label_cell
            .parse()
            .map_err(|_| Error::format(line_no, format!("bad label `{label_cell}`")))?;
        if label < 0 {
            return Err(Error::format(line_no, format!("negative label {label}")));
        }
        labels.push(label);
    }
    let cols = width.map_or(0, |w| w - 1);
    Ok((Matrix::from_vec(labels.len(), cols, data)?, labels))
}

fn read_header(reader: &mut impl Read, path: &Path, magic: u32) -> Result<u32> {
    let found = reader
        .read_u32::<BigEndian>()
        .map_err(|e| Error::io(path, e))?;
    if found != magic {
        return Err(Error::format(
            0,
            format!("{}: magic {found:#010x}, expected {magic:#010x}", path.display()),
        ));
    }
    reader.read_u32::<BigEndian>().map_err(|e| Error::io(path, e))
}

fn read_idx_pair(images: &Path, labels: &Path) -> Result<(Matrix, Vec<i32>)> {
    let mut img = BufReader::new(open(images)?);
    let count = read_header(&mut img, images, IDX_UBYTE_IMAGES)? as usize;
    let rows = img.read_u32::<BigEndian>().map_err(|e| Error::io(images, e))? as usize;
    let cols = img.read_u32::<BigEndian>().map_err(|e| Error::io(images, e))? as usize;
    let mut pixels = vec![0u8; count * rows * cols];
    img.read_exact(&mut pixels)
        .map_err(|e| Error::io(images, e))?;

    let mut lab = BufReader::new(open(labels)?);
    let label_count = read_header(&mut lab, labels, IDX_UBYTE_LABELS)? as usize;
    if label_count != count {
        return Err(Error::format(
            0,
            format!("{count} images but {label_count} labels"),
        ));
    }
    let mut raw = vec![0u8; count];
    lab.read_exact(&mut raw).map_err(|e| Error::io(labels, e))?;

    let data = pixels.iter().map(|&p| f64::from(p) / 255.0).collect();
    Ok((
        Matrix::from_vec(count, rows * cols, data)?,
        raw.into_iter().map(i32::from).collect(),
    ))
}

/// Writes a dataset as CSV with a `f0,..,f{d-1},label` header.
pub fn write_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        let header: Vec<String> = (0..dataset.dim()).map(|j| format!("f{j}")).collect();
        writeln!(w, "{},label", header.join(","))?;
        for (row, label) in dataset.features().iter_rows().zip(dataset.labels()) {
            for v in row {
                write!(w, "{v},")?;
            }
            writeln!(w, "{label}")?;
        }
        w.flush()
    };
    write().map_err(|e| Error::io(path, e))
}
