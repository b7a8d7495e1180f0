//! On-disk dataset format: a line-oriented `records.jsonl` plus a versioned
//! `manifest.json`. Every float is written as a decimal with 17 significant
//! digits, which round-trips f64 bit-exactly and keeps the files
//! byte-stable across save/load/save.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, Part, Rotation6D};

use super::{Category, Dataset, Manifest, ObjectRecord};

pub const DATASET_FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const RECORDS_FILE: &str = "records.jsonl";

/// serde_json formatter that renders every f64 with 17 significant digits.
struct SigFig17<F>(F);

impl<F: serde_json::ser::Formatter> serde_json::ser::Formatter for SigFig17<F> {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        write!(writer, "{value:.16e}")
    }

    fn begin_array<W>(&mut self, writer: &mut W) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        self.0.begin_array(writer)
    }

    fn end_array<W>(&mut self, writer: &mut W) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        self.0.end_array(writer)
    }

    fn begin_array_value<W>(&mut self, writer: &mut W, first: bool) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        self.0.begin_array_value(writer, first)
    }

    fn end_array_value<W>(&mut self, writer: &mut W) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        self.0.end_array_value(writer)
    }

    fn begin_object<W>(&mut self, writer: &mut W) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        self.0.begin_object(writer)
    }

    fn end_object<W>(&mut self, writer: &mut W) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        self.0.end_object(writer)
    }

    fn begin_object_key<W>(&mut self, writer: &mut W, first: bool) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        self.0.begin_object_key(writer, first)
    }

    fn end_object_key<W>(&mut self, writer: &mut W) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        self.0.end_object_key(writer)
    }

    fn begin_object_value<W>(&mut self, writer: &mut W) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        self.0.begin_object_value(writer)
    }

    fn end_object_value<W>(&mut self, writer: &mut W) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        self.0.end_object_value(writer)
    }
}

/// Serialize with 17-significant-digit floats, compact layout.
pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut out = Vec::new();
    let formatter = SigFig17(serde_json::ser::CompactFormatter);
    let mut ser = serde_json::Serializer::with_formatter(&mut out, formatter);
    value.serialize(&mut ser).expect("in-memory serialization");
    String::from_utf8(out).expect("json is utf-8")
}

/// Serialize with 17-significant-digit floats, pretty layout (manifest).
pub fn to_json_pretty<T: Serialize>(value: &T) -> String {
    let mut out = Vec::new();
    let formatter = SigFig17(serde_json::ser::PrettyFormatter::new());
    let mut ser = serde_json::Serializer::with_formatter(&mut out, formatter);
    value.serialize(&mut ser).expect("in-memory serialization");
    let mut s = String::from_utf8(out).expect("json is utf-8");
    s.push('\n');
    s
}

#[derive(Serialize, Deserialize)]
struct CuboidJson {
    size: [f64; 3],
    translation: [f64; 3],
    rotation6d: [f64; 6],
}

#[derive(Serialize, Deserialize)]
struct PartJson {
    label: usize,
    size: [f64; 3],
    translation: [f64; 3],
    rotation6d: [f64; 6],
}

#[derive(Serialize, Deserialize)]
struct RecordJson {
    id: String,
    category: Category,
    bbox: CuboidJson,
    parts: Vec<PartJson>,
    description: String,
    #[serde(default, skip_serializing_if = "is_false")]
    truncated: bool,
}

fn is_false(b: &bool) -> bool {
    !*b
}

impl From<&ObjectRecord> for RecordJson {
    fn from(r: &ObjectRecord) -> Self {
        RecordJson {
            id: r.id.clone(),
            category: r.category,
            bbox: CuboidJson {
                size: r.bbox.size,
                translation: r.bbox.translation,
                rotation6d: r.bbox.rotation.0,
            },
            parts: r
                .parts
                .iter()
                .map(|p| PartJson {
                    label: p.label,
                    size: p.size,
                    translation: p.translation,
                    rotation6d: p.rotation.0,
                })
                .collect(),
            description: r.description.clone(),
            truncated: r.truncated,
        }
    }
}

impl From<RecordJson> for ObjectRecord {
    fn from(r: RecordJson) -> Self {
        ObjectRecord {
            id: r.id,
            category: r.category,
            bbox: BoundingBox {
                size: r.bbox.size,
                translation: r.bbox.translation,
                rotation: Rotation6D(r.bbox.rotation6d),
            },
            parts: r
                .parts
                .into_iter()
                .map(|p| Part {
                    label: p.label,
                    size: p.size,
                    translation: p.translation,
                    rotation: Rotation6D(p.rotation6d),
                })
                .collect(),
            description: r.description,
            truncated: r.truncated,
        }
    }
}

/// One record as a single JSON line.
pub fn record_to_line(record: &ObjectRecord) -> String {
    to_json_string(&RecordJson::from(record))
}

pub fn record_from_line(line: &str, path: &Path, line_no: usize) -> Result<ObjectRecord> {
    let parsed: RecordJson = serde_json::from_str(line).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: line_no,
        message: e.to_string(),
    })?;
    Ok(parsed.into())
}

pub fn manifest_hash(manifest: &Manifest) -> String {
    let bytes = to_json_pretty(manifest);
    let digest = Sha256::digest(bytes.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Write `manifest.json` and `records.jsonl` into `dir` (created if absent).
pub fn save_dataset(dataset: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest_path = dir.join(MANIFEST_FILE);
    fs::write(&manifest_path, to_json_pretty(&dataset.manifest))
        .map_err(|e| Error::io(&manifest_path, e))?;

    let records_path = dir.join(RECORDS_FILE);
    let mut out = Vec::new();
    for record in &dataset.records {
        out.extend_from_slice(record_to_line(record).as_bytes());
        out.push(b'\n');
    }
    fs::write(&records_path, out).map_err(|e| Error::io(&records_path, e))?;
    Ok(())
}

/// Load a dataset directory, verifying the format version and rebuilding
/// the id index. Malformed record lines report their line number.
pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest_text =
        fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let value: serde_json::Value =
        serde_json::from_str(&manifest_text).map_err(|e| Error::Parse {
            path: manifest_path.clone(),
            line: 1,
            message: e.to_string(),
        })?;
    let version = value.get("version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
    if version != DATASET_FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            path: manifest_path,
            expected: DATASET_FORMAT_VERSION,
            found: version,
        });
    }
    let manifest: Manifest = serde_json::from_value(value).map_err(|e| Error::Parse {
        path: manifest_path.clone(),
        line: 1,
        message: e.to_string(),
    })?;

    let records_path = dir.join(RECORDS_FILE);
    let file = fs::File::open(&records_path).map_err(|e| Error::io(&records_path, e))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(&records_path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(record_from_line(&line, &records_path, i + 1)?);
    }
    Dataset::new(manifest, records)
}

/// Load bare records from a JSONL file (used for generated outputs).
pub fn load_records(path: &Path) -> Result<Vec<ObjectRecord>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(record_from_line(&line, path, i + 1)?);
    }
    Ok(records)
}

/// Write bare records to a JSONL file.
pub fn save_records(records: &[ObjectRecord], path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent.to_path_buf(), e))?;
        }
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for record in records {
        writeln!(file, "{}", record_to_line(record)).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

#[allow(dead_code)]
fn unused(_p: PathBuf) {}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{build_dataset, Category, DatasetConfig};

    fn tiny() -> Dataset {
        build_dataset(&DatasetConfig {
            seed: 3,
            categories: vec![Category::Table, Category::Lamp],
            train_per_category: 25,
            val_per_category: 3,
            test_per_category: 3,
            clusters: 6,
            ..DatasetConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let ds = tiny();
        let dir = tempfile::tempdir().unwrap();
        let d1 = dir.path().join("one");
        let d2 = dir.path().join("two");
        save_dataset(&ds, &d1).unwrap();
        let loaded = load_dataset(&d1).unwrap();
        save_dataset(&loaded, &d2).unwrap();
        let r1 = fs::read(d1.join(RECORDS_FILE)).unwrap();
        let r2 = fs::read(d2.join(RECORDS_FILE)).unwrap();
        assert_eq!(r1, r2);
        let m1 = fs::read(d1.join(MANIFEST_FILE)).unwrap();
        let m2 = fs::read(d2.join(MANIFEST_FILE)).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(loaded.manifest_hash, ds.manifest_hash);
    }

    #[test]
    fn floats_round_trip_bit_exactly() {
        let ds = tiny();
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&ds, dir.path()).unwrap();
        let loaded = load_dataset(dir.path()).unwrap();
        for (a, b) in ds.records.iter().zip(&loaded.records) {
            assert_eq!(a, b);
            for (pa, pb) in a.parts.iter().zip(&b.parts) {
                for k in 0..3 {
                    assert_eq!(pa.translation[k].to_bits(), pb.translation[k].to_bits());
                    assert_eq!(pa.size[k].to_bits(), pb.size[k].to_bits());
                }
            }
        }
    }

    #[test]
    fn truncated_file_reports_line_number() {
        let ds = tiny();
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&ds, dir.path()).unwrap();
        let path = dir.path().join(RECORDS_FILE);
        let content = fs::read_to_string(&path).unwrap();
        let cut = content.len() - 40;
        fs::write(&path, &content[..cut]).unwrap();
        match load_dataset(dir.path()) {
            Err(Error::Parse { line, .. }) => {
                assert_eq!(line, ds.records.len(), "expected the last line to fail");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn version_mismatch_is_detected() {
        let ds = tiny();
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&ds, dir.path()).unwrap();
        let path = dir.path().join(MANIFEST_FILE);
        let text = fs::read_to_string(&path)
            .unwrap()
            .replacen("\"version\": 1", "\"version\": 99", 1);
        fs::write(&path, text).unwrap();
        assert!(matches!(
            load_dataset(dir.path()),
            Err(Error::VersionMismatch { found: 99, .. })
        ));
    }

    #[test]
    fn empty_dataset_round_trips() {
        let mut ds = tiny();
        ds.records.clear();
        let mut manifest = ds.manifest.clone();
        manifest.train_ids.clear();
        manifest.val_ids.clear();
        manifest.test_ids.clear();
        let empty = Dataset::new(manifest, Vec::new()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&empty, dir.path()).unwrap();
        let loaded = load_dataset(dir.path()).unwrap();
        assert!(loaded.records.is_empty());
    }

    #[test]
    fn truncated_flag_round_trips_only_when_set() {
        let ds = tiny();
        let mut rec = ds.records[0].clone();
        assert!(!record_to_line(&rec).contains("truncated"));
        rec.truncated = true;
        let line = record_to_line(&rec);
        assert!(line.contains("\"truncated\":true"));
        let back = record_from_line(&line, Path::new("x"), 1).unwrap();
        assert!(back.truncated);
    }
}
