//! OODB binary files and headerless CSV ingestion.
//!
//! OODB layout, all integers and floats little-endian:
//!
//! | bytes        | content                                         |
//! |--------------|-------------------------------------------------|
//! | 6            | magic `4F 4F 44 42 31 00` (`"OODB1\0"`)          |
//! | 1            | flags: bit 0 labels present, bit 1 logits       |
//! | 4            | `u32` row count `n`                             |
//! | 4            | `u32` column count `d` (class count for logits) |
//! | 4·n·d        | `f32` payload, row-major                        |
//! | 4·n + 4      | if labels: `n` `u32` labels, then `u32` classes |

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use oodkit_core::{EmbeddingMatrix, Error as CoreError, LabeledEmbeddings, LogitMatrix};
use thiserror::Error;

pub const MAGIC: [u8; 6] = *b"OODB1\0";
const FLAG_LABELS: u8 = 0b01;
const FLAG_LOGITS: u8 = 0b10;
const HEADER_LEN: usize = 6 + 1 + 4 + 4;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: bad magic, not an OODB file")]
    BadMagic { path: String },
    #[error("{path}: file is truncated ({detail})")]
    TruncatedFile { path: String, detail: String },
    #[error("{path}: invalid header ({detail})")]
    InvalidHeader { path: String, detail: String },
    #[error("{path}: {source}")]
    Invalid { path: String, source: CoreError },
    #[error("{path}: line {line}: {detail}")]
    Csv {
        path: String,
        line: u64,
        detail: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl StoreError {
    fn invalid(path: &Path, source: CoreError) -> Self {
        StoreError::Invalid {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Contents of an embedding or logit file.
#[derive(Debug, Clone, PartialEq)]
pub enum Dataset {
    Embeddings(EmbeddingMatrix),
    Labeled(LabeledEmbeddings),
    Logits(LogitMatrix),
}

impl Dataset {
    pub fn rows(&self) -> usize {
        match self {
            Dataset::Embeddings(m) => m.rows(),
            Dataset::Labeled(l) => l.rows(),
            Dataset::Logits(l) => l.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            Dataset::Embeddings(m) => m.dim(),
            Dataset::Labeled(l) => l.dim(),
            Dataset::Logits(l) => l.classes(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Dataset::Embeddings(_) => "embeddings",
            Dataset::Labeled(_) => "labeled embeddings",
            Dataset::Logits(_) => "logits",
        }
    }
}

impl From<EmbeddingMatrix> for Dataset {
    fn from(m: EmbeddingMatrix) -> Self {
        Dataset::Embeddings(m)
    }
}

impl From<LabeledEmbeddings> for Dataset {
    fn from(m: LabeledEmbeddings) -> Self {
        Dataset::Labeled(m)
    }
}

impl From<LogitMatrix> for Dataset {
    fn from(m: LogitMatrix) -> Self {
        Dataset::Logits(m)
    }
}

/// On-disk encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Oodb,
    Csv,
}

impl Format {
    /// `.csv` files are CSV, everything else is treated as OODB.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => Format::Csv,
            _ => Format::Oodb,
        }
    }
}

fn take<'a>(
    bytes: &'a [u8],
    at: &mut usize,
    len: usize,
    path: &Path,
    what: &str,
) -> Result<&'a [u8], StoreError> {
    let end = at
        .checked_add(len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| StoreError::TruncatedFile {
            path: path.display().to_string(),
            detail: format!(
                "{what} needs {len} bytes at offset {at}, file has {}",
                bytes.len()
            ),
        })?;
    let out = &bytes[*at..end];
    *at = end;
    Ok(out)
}

fn u32_at(b: &[u8]) -> u32 {
    u32::from_le_bytes(b.try_into().expect("four bytes"))
}

/// Decodes an OODB byte buffer; `path` is only used in diagnostics.
pub fn decode_oodb(bytes: &[u8], path: &Path) -> Result<Dataset, StoreError> {
    let p = || path.display().to_string();
    if bytes.len() < MAGIC.len() || bytes[..MAGIC.len()] != MAGIC {
        return Err(StoreError::BadMagic { path: p() });
    }
    let mut at = MAGIC.len();
    let flags = take(bytes, &mut at, 1, path, "flags")?[0];
    let n = u32_at(take(bytes, &mut at, 4, path, "row count")?) as usize;
    let d = u32_at(take(bytes, &mut at, 4, path, "column count")?) as usize;
    if flags & !(FLAG_LABELS | FLAG_LOGITS) != 0 {
        return Err(StoreError::InvalidHeader {
            path: p(),
            detail: format!("unknown flag bits {flags:#04x}"),
        });
    }
    if flags == FLAG_LABELS | FLAG_LOGITS {
        return Err(StoreError::InvalidHeader {
            path: p(),
            detail: "logits cannot carry labels".into(),
        });
    }
    if n == 0 || d == 0 {
        return Err(StoreError::InvalidHeader {
            path: p(),
            detail: format!("shape {n}x{d} is empty"),
        });
    }
    let payload_len = n
        .checked_mul(d)
        .and_then(|v| v.checked_mul(4))
        .ok_or_else(|| StoreError::InvalidHeader {
            path: p(),
            detail: format!("shape {n}x{d} overflows"),
        })?;
    let payload = take(bytes, &mut at, payload_len, path, "payload")?;
    let values: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("four bytes")) as f64)
        .collect();

    let labels = if flags & FLAG_LABELS != 0 {
        let raw = take(bytes, &mut at, 4 * n, path, "labels")?;
        let labels: Vec<u32> = raw.chunks_exact(4).map(u32_at).collect();
        let classes = u32_at(take(bytes, &mut at, 4, path, "class count")?);
        Some((labels, classes))
    } else {
        None
    };
    if at != bytes.len() {
        return Err(StoreError::InvalidHeader {
            path: p(),
            detail: format!("{} unexpected trailing bytes", bytes.len() - at),
        });
    }

    let inv = |e| StoreError::invalid(path, e);
    Ok(if flags & FLAG_LOGITS != 0 {
        Dataset::Logits(LogitMatrix::new(n, d, values).map_err(inv)?)
    } else {
        let m = EmbeddingMatrix::new(n, d, values).map_err(inv)?;
        match labels {
            Some((labels, classes)) => {
                Dataset::Labeled(LabeledEmbeddings::new(m, labels, classes).map_err(inv)?)
            }
            None => Dataset::Embeddings(m),
        }
    })
}

fn push_payload(
    out: &mut Vec<u8>,
    values: &[f64],
    cols: usize,
    path: &Path,
) -> Result<(), StoreError> {
    for (i, &v) in values.iter().enumerate() {
        let f = v as f32;
        if !f.is_finite() {
            return Err(StoreError::invalid(
                path,
                CoreError::NonFiniteValue {
                    row: i / cols,
                    col: i % cols,
                },
            ));
        }
        out.extend_from_slice(&f.to_le_bytes());
    }
    Ok(())
}

/// Encodes `data` as OODB. Values are rounded to `f32`.
pub fn encode_oodb(data: &Dataset, path: &Path) -> Result<Vec<u8>, StoreError> {
    let (flags, rows, cols) = match data {
        Dataset::Embeddings(m) => (0, m.rows(), m.dim()),
        Dataset::Labeled(l) => (FLAG_LABELS, l.rows(), l.dim()),
        Dataset::Logits(l) => (FLAG_LOGITS, l.rows(), l.classes()),
    };
    let too_big = |what: &str| StoreError::InvalidHeader {
        path: path.display().to_string(),
        detail: format!("{what} does not fit in u32"),
    };
    let n = u32::try_from(rows).map_err(|_| too_big("row count"))?;
    let d = u32::try_from(cols).map_err(|_| too_big("column count"))?;
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * rows * cols + 4 * rows + 4);
    out.extend_from_slice(&MAGIC);
    out.push(flags);
    out.extend_from_slice(&n.to_le_bytes());
    out.extend_from_slice(&d.to_le_bytes());
    match data {
        Dataset::Embeddings(m) => push_payload(&mut out, m.as_slice(), cols, path)?,
        Dataset::Labeled(l) => {
            push_payload(&mut out, l.embeddings().as_slice(), cols, path)?;
            for &y in l.labels() {
                out.extend_from_slice(&y.to_le_bytes());
            }
            out.extend_from_slice(&l.classes().to_le_bytes());
        }
        Dataset::Logits(l) => push_payload(&mut out, l.as_slice(), cols, path)?,
    }
    Ok(out)
}

pub fn write_oodb(data: &Dataset, path: &Path) -> Result<(), StoreError> {
    let bytes = encode_oodb(data, path)?;
    let io = |source| StoreError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut w = BufWriter::new(fs::File::create(path).map_err(io)?);
    w.write_all(&bytes).map_err(io)?;
    w.flush().map_err(io)
}

pub fn read_oodb(path: &Path) -> Result<Dataset, StoreError> {
    let bytes = fs::read(path).map_err(|source| StoreError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode_oodb(&bytes, path)
}

/// What a CSV file holds. CSV files have no header row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum CsvKind {
    Embeddings,
    /// Final column is an integer class label.
    Labeled,
    Logits,
}

pub fn read_csv(path: &Path, kind: CsvKind) -> Result<Dataset, StoreError> {
    let p = || path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| StoreError::Csv {
            path: p(),
            line: 0,
            detail: e.to_string(),
        })?;
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut cols = None;
    let mut n = 0;
    for (i, record) in reader.records().enumerate() {
        let line = i as u64 + 1;
        let record = record.map_err(|e| StoreError::Csv {
            path: p(),
            line,
            detail: e.to_string(),
        })?;
        let mut fields: Vec<&str> = record.iter().collect();
        if kind == CsvKind::Labeled {
            let raw = fields.pop().unwrap_or_default();
            let y = raw.parse::<u32>().map_err(|_| StoreError::Csv {
                path: p(),
                line,
                detail: format!("label `{raw}` is not a non-negative integer"),
            })?;
            labels.push(y);
        }
        match cols {
            None => cols = Some(fields.len()),
            Some(c) if c != fields.len() => {
                return Err(StoreError::Csv {
                    path: p(),
                    line,
                    detail: format!("expected {c} values, found {}", fields.len()),
                })
            }
            _ => {}
        }
        for f in fields {
            let v = f.parse::<f64>().map_err(|_| StoreError::Csv {
                path: p(),
                line,
                detail: format!("`{f}` is not a number"),
            })?;
            values.push(v);
        }
        n += 1;
    }
    let d = cols.unwrap_or(0);
    let inv = |e| StoreError::invalid(path, e);
    Ok(match kind {
        CsvKind::Embeddings => {
            Dataset::Embeddings(EmbeddingMatrix::new(n, d, values).map_err(inv)?)
        }
        CsvKind::Labeled => {
            let m = EmbeddingMatrix::new(n, d, values).map_err(inv)?;
            Dataset::Labeled(LabeledEmbeddings::infer_classes(m, labels).map_err(inv)?)
        }
        CsvKind::Logits => Dataset::Logits(LogitMatrix::new(n, d, values).map_err(inv)?),
    })
}

/// Reads an OODB or CSV file. `csv_kind` is only consulted for CSV input.
pub fn read_dataset(
    path: &Path,
    format: Option<Format>,
    csv_kind: CsvKind,
) -> Result<Dataset, StoreError> {
    match format.unwrap_or_else(|| Format::from_path(path)) {
        Format::Oodb => read_oodb(path),
        Format::Csv => read_csv(path, csv_kind),
    }
}
