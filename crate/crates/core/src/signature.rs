//! Minutiae, signatures and the `x;y;theta;type` signature file format.

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};

/// One minutia: pixel position, orientation in radians and the raw type code.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minutia {
    pub x: u32,
    pub y: u32,
    /// Always in `[0, 2π)`.
    pub theta: f64,
    /// Passed through untouched; the file format does not say which code
    /// denotes a ridge ending and which a bifurcation.
    pub type_code: i32,
}

impl Minutia {
    pub fn new(x: u32, y: u32, theta: f64, type_code: i32) -> Self {
        Minutia {
            x,
            y,
            theta: normalize_angle(theta),
            type_code,
        }
    }
}

/// Wraps an angle into `[0, 2π)`.
pub fn normalize_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if t >= TAU {
        0.0
    } else {
        t
    }
}

/// The minutiae of one fingerprint record.
#[derive(Debug, Clone, PartialEq)]
pub struct Signature {
    pub record_id: String,
    pub minutiae: Vec<Minutia>,
}

impl Signature {
    /// Builds a signature, checking the record id and that at least one minutia is present.
    pub fn new(record_id: impl Into<String>, minutiae: Vec<Minutia>) -> Result<Self> {
        let record_id = record_id.into();
        validate_record_id(&record_id)?;
        if minutiae.is_empty() {
            return Err(Error::EmptySignature(record_id));
        }
        Ok(Signature {
            record_id,
            minutiae,
        })
    }

    pub fn len(&self) -> usize {
        self.minutiae.len()
    }

    pub fn is_empty(&self) -> bool {
        self.minutiae.is_empty()
    }

    pub(crate) fn ensure_non_empty(&self) -> Result<()> {
        if self.minutiae.is_empty() {
            Err(Error::EmptySignature(self.record_id.clone()))
        } else {
            Ok(())
        }
    }
}

/// Record ids end up in tab/comma separated files, so those characters are refused.
pub fn validate_record_id(id: &str) -> Result<()> {
    if id.is_empty() || id.chars().any(|c| matches!(c, '\t' | '\n' | '\r' | ',')) {
        return Err(Error::InvalidRecordId(id.to_string()));
    }
    Ok(())
}

/// Parses a signature file body. The angle accepts either `,` or `.` as decimal separator.
pub fn parse_signature(text: &str, record_id: &str) -> Result<Signature> {
    validate_record_id(record_id)?;
    let mut minutiae = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        minutiae.push(parse_line(line, idx + 1)?);
    }
    if minutiae.is_empty() {
        return Err(Error::EmptySignature(record_id.to_string()));
    }
    Ok(Signature {
        record_id: record_id.to_string(),
        minutiae,
    })
}

fn parse_line(line: &str, line_no: usize) -> Result<Minutia> {
    let fields: Vec<&str> = line.split(';').map(str::trim).collect();
    if fields.len() != 4 {
        return Err(Error::Parse {
            line: line_no,
            message: format!("expected 4 ';'-separated fields, found {}", fields.len()),
        });
    }
    let coord = |s: &str, name: &str| {
        s.parse::<u32>().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("{name} is not a non-negative integer: {s:?}"),
        })
    };
    let x = coord(fields[0], "x")?;
    let y = coord(fields[1], "y")?;
    let theta = fields[2]
        .replace(',', ".")
        .parse::<f64>()
        .ok()
        .filter(|t| t.is_finite())
        .ok_or_else(|| Error::Parse {
            line: line_no,
            message: format!("angle is not a finite number: {:?}", fields[2]),
        })?;
    let type_code = fields[3].parse::<i32>().map_err(|_| Error::Parse {
        line: line_no,
        message: format!("type is not an integer: {:?}", fields[3]),
    })?;
    Ok(Minutia::new(x, y, theta, type_code))
}

/// Writes one `x;y;theta;type` line per minutia, dot decimal separator.
pub fn serialize_signature(s: &Signature) -> Result<String> {
    s.ensure_non_empty()?;
    let mut out = String::with_capacity(s.minutiae.len() * 28);
    for m in &s.minutiae {
        // `{}` on f64 prints the shortest representation that parses back exactly
        out.push_str(&format!("{};{};{};{}\n", m.x, m.y, m.theta, m.type_code));
    }
    Ok(out)
}

pub fn read_signature_file(path: &Path, record_id: &str) -> Result<Signature> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_signature(&text, record_id).map_err(|e| match e {
        Error::Parse { line, message } => {
            Error::format(path, format!("line {line}: {message}"))
        }
        other => other,
    })
}

/// An in-memory set of signatures addressable by record id.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    signatures: Vec<Signature>,
    by_id: HashMap<String, usize>,
}

impl Corpus {
    pub fn new(signatures: Vec<Signature>) -> Result<Self> {
        let mut by_id = HashMap::with_capacity(signatures.len());
        for (i, s) in signatures.iter().enumerate() {
            s.ensure_non_empty()?;
            if by_id.insert(s.record_id.clone(), i).is_some() {
                return Err(Error::DuplicateRecord(s.record_id.clone()));
            }
        }
        Ok(Corpus { signatures, by_id })
    }

    pub fn get(&self, id: &str) -> Option<&Signature> {
        self.by_id.get(id).map(|&i| &self.signatures[i])
    }

    pub fn signatures(&self) -> &[Signature] {
        &self.signatures
    }

    pub fn len(&self) -> usize {
        self.signatures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signatures.is_empty()
    }

    pub fn into_signatures(self) -> Vec<Signature> {
        self.signatures
    }
}

/// Resolves record ids to signatures.
pub trait SignatureStore {
    fn signature(&self, id: &str) -> Option<&Signature>;
}

impl SignatureStore for Corpus {
    fn signature(&self, id: &str) -> Option<&Signature> {
        self.get(id)
    }
}

impl SignatureStore for HashMap<String, Signature> {
    fn signature(&self, id: &str) -> Option<&Signature> {
        self.get(id)
    }
}

/// Loads a corpus from a directory (one file per record, file stem = record id,
/// hidden files skipped) or from a manifest of `record_id<TAB>path` lines.
/// Manifest paths are relative to the manifest's directory.
pub fn load_corpus(path: &Path) -> Result<Corpus> {
    let meta = fs::metadata(path).map_err(|e| Error::io(path, e))?;
    let entries = if meta.is_dir() {
        directory_entries(path)?
    } else {
        manifest_entries(path)?
    };
    let signatures = entries
        .par_iter()
        .map(|(id, file)| read_signature_file(file, id))
        .collect::<Result<Vec<_>>>()?;
    Corpus::new(signatures)
}

fn directory_entries(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut entries = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        let name = entry.file_name();
        if name.to_string_lossy().starts_with('.') || !path.is_file() {
            continue;
        }
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Error::format(&path, "file name is not valid UTF-8"))?
            .to_string();
        entries.push((stem, path));
    }
    entries.sort();
    Ok(entries)
}

fn manifest_entries(manifest: &Path) -> Result<Vec<(String, PathBuf)>> {
    let text = fs::read_to_string(manifest).map_err(|e| Error::io(manifest, e))?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (id, file) = line.split_once('\t').ok_or_else(|| {
            Error::format(manifest, format!("line {}: expected record_id<TAB>path", i + 1))
        })?;
        entries.push((id.to_string(), base.join(file)));
    }
    Ok(entries)
}

/// Writes each signature to `<dir>/<record_id>.sig`, creating `dir` if needed.
pub fn write_corpus_dir(dir: &Path, signatures: &[Signature]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for s in signatures {
        let path = dir.join(format!("{}.sig", s.record_id));
        fs::write(&path, serialize_signature(s)?).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
