//! On-disk formats: dataset manifests, binary feature files, label files,
//! and trial lists.
//!
//! All readers are pure functions of file contents and either return a
//! value satisfying the type invariants or a structured error — never a
//! partial state. The feature file format is bit-exact by contract:
//! magic `FEAT`, `u32` rows, `u32` cols, then `rows*cols` `f32` values,
//! all little-endian.

use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Magic bytes opening every feature file.
pub const FEATURE_MAGIC: &[u8; 4] = b"FEAT";

/// Frames-by-dims feature representation of one utterance segment.
///
/// Row-major `f32` storage; every value finite; at least one frame and one
/// dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f32>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f32>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid(format!(
                "feature matrix must have rows >= 1 and cols >= 1, got {rows}x{cols}"
            )));
        }
        if values.len() != rows * cols {
            return Err(Error::invalid(format!(
                "feature matrix {rows}x{cols} expects {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature matrix".into()));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn row(&self, r: usize) -> &[f32] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f32] {
        &mut self.values[r * self.cols..(r + 1) * self.cols]
    }

    /// Contiguous crop of `len` frames starting at `start`.
    pub fn crop(&self, start: usize, len: usize) -> Result<FeatureMatrix> {
        if len == 0 || start + len > self.rows {
            return Err(Error::invalid(format!(
                "crop [{start}, {start}+{len}) out of range for {} frames",
                self.rows
            )));
        }
        let values = self.values[start * self.cols..(start + len) * self.cols].to_vec();
        FeatureMatrix::new(len, self.cols, values)
    }

    /// Mean of squared entries; the signal power used by SNR computations.
    pub fn mean_power(&self) -> f64 {
        let sum: f64 = self.values.iter().map(|&v| (v as f64) * (v as f64)).sum();
        sum / self.values.len() as f64
    }
}

/// One manifest row: an utterance, the group it belongs to, where its
/// features live, and (optionally) its true speaker.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub utterance_id: String,
    pub group_id: String,
    pub feature_path: PathBuf,
    /// `None` when the manifest row carries `-` or omits the column.
    pub true_speaker_id: Option<String>,
}

/// The dataset roster: unique utterances with resolvable feature paths.
#[derive(Debug, Clone, Default)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Map utterance id -> position in `entries`.
    pub fn index_by_id(&self) -> HashMap<&str, usize> {
        self.entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.utterance_id.as_str(), i))
            .collect()
    }
}

/// Verification trial label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrialLabel {
    Target,
    Nontarget,
}

/// One scored comparison between an enrollment and a test utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub label: TrialLabel,
    pub enroll_id: String,
    pub test_id: String,
}

#[derive(Debug, Clone, Default)]
pub struct TrialList {
    pub trials: Vec<Trial>,
}

/// Read a tab-separated manifest: `utt_id \t group_id \t feature_path
/// [\t speaker_id]`, `-` meaning unlabeled.
///
/// Relative feature paths resolve against the manifest's directory; every
/// path must exist at load time.
pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    let mut entries = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 3 || fields.len() > 4 {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected 3 or 4 tab-separated fields, got {}", fields.len()),
            ));
        }
        let utterance_id = fields[0].to_string();
        let group_id = fields[1].to_string();
        if utterance_id.is_empty() {
            return Err(Error::parse(path, lineno, "empty utterance id"));
        }
        if group_id.is_empty() {
            return Err(Error::parse(path, lineno, "empty group id"));
        }
        if let Some(first) = seen.insert(utterance_id.clone(), lineno) {
            return Err(Error::parse(
                path,
                lineno,
                format!("duplicate utterance id {utterance_id:?} (first seen at line {first})"),
            ));
        }
        let raw_path = Path::new(fields[2]);
        let feature_path = if raw_path.is_absolute() {
            raw_path.to_path_buf()
        } else {
            base.join(raw_path)
        };
        if !feature_path.exists() {
            return Err(Error::parse(
                path,
                lineno,
                format!("feature file not found: {}", feature_path.display()),
            ));
        }
        let true_speaker_id = match fields.get(3) {
            None => None,
            Some(&"-") => None,
            Some(s) if s.is_empty() => {
                return Err(Error::parse(path, lineno, "empty speaker field (use `-`)"))
            }
            Some(s) => Some(s.to_string()),
        };
        entries.push(ManifestEntry {
            utterance_id,
            group_id,
            feature_path,
            true_speaker_id,
        });
    }
    if entries.is_empty() {
        return Err(Error::format(path, "empty manifest"));
    }
    Ok(Manifest { entries })
}

/// Write a manifest as TSV. Feature paths are written as given.
pub fn write_manifest(manifest: &Manifest, path: &Path) -> Result<()> {
    let mut out = String::new();
    for e in &manifest.entries {
        let spk = e.true_speaker_id.as_deref().unwrap_or("-");
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            e.utterance_id,
            e.group_id,
            e.feature_path.display(),
            spk
        ));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Read a binary feature file (see [`FEATURE_MAGIC`] format).
pub fn read_features(path: &Path) -> Result<FeatureMatrix> {
    let mut file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut header = [0u8; 12];
    file.read_exact(&mut header)
        .map_err(|_| Error::format(path, "truncated header"))?;
    if &header[..4] != FEATURE_MAGIC {
        return Err(Error::format(path, "bad magic (expected FEAT)"));
    }
    let rows = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    if rows == 0 || cols == 0 {
        return Err(Error::format(path, format!("invalid shape {rows}x{cols}")));
    }
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::format(path, "shape overflow"))?;
    let mut payload = Vec::with_capacity(expected);
    file.read_to_end(&mut payload).map_err(|e| Error::io(path, e))?;
    if payload.len() != expected {
        return Err(Error::format(
            path,
            format!("truncated payload: expected {expected} bytes, got {}", payload.len()),
        ));
    }
    let values: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::format(path, "non-finite feature value"));
    }
    FeatureMatrix::new(rows, cols, values)
}

/// Write a feature file; `read_features` recovers it bit-exactly.
pub fn write_features(matrix: &FeatureMatrix, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    w.write_all(FEATURE_MAGIC).map_err(io)?;
    w.write_all(&(matrix.rows as u32).to_le_bytes()).map_err(io)?;
    w.write_all(&(matrix.cols as u32).to_le_bytes()).map_err(io)?;
    for v in &matrix.values {
        w.write_all(&v.to_le_bytes()).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Read a trial list: lines `1|0 <enroll_id> <test_id>`, space-separated.
/// Label 1 is a target (same-speaker) trial, 0 a nontarget.
///
/// Ids are checked against the manifest at scoring time, not here.
pub fn read_trials(path: &Path) -> Result<TrialList> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut trials = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected 3 space-separated fields, got {}", fields.len()),
            ));
        }
        let label = match fields[0] {
            "1" => TrialLabel::Target,
            "0" => TrialLabel::Nontarget,
            other => {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("label must be 0 or 1, got {other:?}"),
                ))
            }
        };
        trials.push(Trial {
            label,
            enroll_id: fields[1].to_string(),
            test_id: fields[2].to_string(),
        });
    }
    Ok(TrialList { trials })
}

pub fn write_trials(trials: &TrialList, path: &Path) -> Result<()> {
    let mut out = String::new();
    for t in &trials.trials {
        let label = match t.label {
            TrialLabel::Target => 1,
            TrialLabel::Nontarget => 0,
        };
        out.push_str(&format!("{} {} {}\n", label, t.enroll_id, t.test_id));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Read a two-column label TSV `utt_id \t label`, used for both the true
/// speaker map and persisted pseudo labels.
pub fn read_label_tsv(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected 2 tab-separated fields, got {}", fields.len()),
            ));
        }
        rows.push((fields[0].to_string(), fields[1].to_string()));
    }
    Ok(rows)
}

pub fn write_label_tsv(rows: &[(String, String)], path: &Path) -> Result<()> {
    let mut out = String::new();
    for (id, label) in rows {
        out.push_str(&format!("{id}\t{label}\n"));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// A manifest with all feature matrices resident in memory, aligned by
/// index so iteration order is fixed.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: Manifest,
    pub features: Vec<FeatureMatrix>,
}

impl Dataset {
    /// Load every feature file referenced by the manifest.
    pub fn load(manifest: Manifest) -> Result<Self> {
        let features = manifest
            .entries
            .iter()
            .map(|e| read_features(&e.feature_path))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { manifest, features })
    }

    pub fn len(&self) -> usize {
        self.manifest.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.is_empty()
    }

    /// Feature dimensionality, from the first utterance.
    pub fn feature_dim(&self) -> usize {
        self.features.first().map(|m| m.cols()).unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use tempfile::TempDir;

    fn touch_feature(dir: &Path, name: &str) -> PathBuf {
        let p = dir.join(name);
        let m = FeatureMatrix::new(1, 1, vec![0.0]).unwrap();
        write_features(&m, &p).unwrap();
        p
    }

    #[test]
    fn manifest_roundtrip_three_lines() {
        let dir = TempDir::new().unwrap();
        for n in ["a.feat", "b.feat", "c.feat"] {
            touch_feature(dir.path(), n);
        }
        let mpath = dir.path().join("manifest.tsv");
        fs::write(
            &mpath,
            "u1\tg1\ta.feat\t-\nu2\tg1\tb.feat\tspk1\nu3\tg2\tc.feat\n",
        )
        .unwrap();
        let m = read_manifest(&mpath).unwrap();
        assert_eq!(m.len(), 3);
        assert_eq!(m.entries[0].true_speaker_id, None);
        assert_eq!(m.entries[1].true_speaker_id.as_deref(), Some("spk1"));
        assert_eq!(m.entries[2].true_speaker_id, None);
        assert_eq!(m.entries[0].group_id, "g1");
    }

    #[test]
    fn manifest_empty_file_errors() {
        let dir = TempDir::new().unwrap();
        let mpath = dir.path().join("manifest.tsv");
        fs::write(&mpath, "").unwrap();
        let err = read_manifest(&mpath).unwrap_err();
        assert!(err.to_string().contains("empty manifest"), "{err}");
    }

    #[test]
    fn manifest_two_fields_names_line() {
        let dir = TempDir::new().unwrap();
        touch_feature(dir.path(), "a.feat");
        let mpath = dir.path().join("manifest.tsv");
        fs::write(&mpath, "u1\tg1\ta.feat\nu2\tg2\n").unwrap();
        let err = read_manifest(&mpath).unwrap_err();
        assert!(err.to_string().contains(":2:"), "{err}");
    }

    #[test]
    fn manifest_duplicate_id_errors() {
        let dir = TempDir::new().unwrap();
        touch_feature(dir.path(), "a.feat");
        let mpath = dir.path().join("manifest.tsv");
        fs::write(&mpath, "u1\tg1\ta.feat\nu1\tg2\ta.feat\n").unwrap();
        let err = read_manifest(&mpath).unwrap_err();
        assert!(err.to_string().contains("duplicate utterance id"), "{err}");
    }

    #[test]
    fn manifest_missing_feature_file_errors() {
        let dir = TempDir::new().unwrap();
        let mpath = dir.path().join("manifest.tsv");
        fs::write(&mpath, "u1\tg1\tnope.feat\n").unwrap();
        let err = read_manifest(&mpath).unwrap_err();
        assert!(err.to_string().contains("not found"), "{err}");
    }

    #[test]
    fn features_minimal_file_is_16_bytes() {
        let dir = TempDir::new().unwrap();
        let p = dir.path().join("one.feat");
        let m = FeatureMatrix::new(1, 1, vec![0.0]).unwrap();
        write_features(&m, &p).unwrap();
        assert_eq!(fs::metadata(&p).unwrap().len(), 16);
        assert_eq!(read_features(&p).unwrap(), m);
    }

    #[test]
    fn features_zero_rows_rejected() {
        assert!(FeatureMatrix::new(0, 3, vec![]).is_err());
        assert!(FeatureMatrix::new(3, 0, vec![]).is_err());
    }

    #[test]
    fn features_truncated_header() {
        let dir = TempDir::new().unwrap();
        let p = dir.path().join("short.feat");
        fs::write(&p, vec![0u8; 11]).unwrap();
        let err = read_features(&p).unwrap_err();
        assert!(err.to_string().contains("truncated header"), "{err}");
    }

    #[test]
    fn features_truncated_payload() {
        let dir = TempDir::new().unwrap();
        let p = dir.path().join("trunc.feat");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"FEAT");
        bytes.extend_from_slice(&2u32.to_le_bytes());
        bytes.extend_from_slice(&3u32.to_le_bytes());
        for v in [1.0f32, 2.0, 3.0, 4.0, 5.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(&p, bytes).unwrap();
        let err = read_features(&p).unwrap_err();
        assert!(err.to_string().contains("truncated payload"), "{err}");
    }

    #[test]
    fn features_bad_magic() {
        let dir = TempDir::new().unwrap();
        let p = dir.path().join("bad.feat");
        let mut bytes = b"FEET".to_vec();
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&0f32.to_le_bytes());
        fs::write(&p, bytes).unwrap();
        let err = read_features(&p).unwrap_err();
        assert!(err.to_string().contains("bad magic"), "{err}");
    }

    #[test]
    fn features_nonfinite_rejected() {
        let dir = TempDir::new().unwrap();
        let p = dir.path().join("nan.feat");
        let mut bytes = b"FEAT".to_vec();
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&f32::NAN.to_le_bytes());
        fs::write(&p, bytes).unwrap();
        assert!(read_features(&p).is_err());
    }

    #[test]
    fn trials_parse() {
        let dir = TempDir::new().unwrap();
        let p = dir.path().join("trials.txt");
        fs::write(&p, "1 a b\n0 a c\n").unwrap();
        let t = read_trials(&p).unwrap();
        assert_eq!(t.trials.len(), 2);
        assert_eq!(t.trials[0].label, TrialLabel::Target);
        assert_eq!(t.trials[0].enroll_id, "a");
        assert_eq!(t.trials[0].test_id, "b");
        assert_eq!(t.trials[1].label, TrialLabel::Nontarget);
    }

    #[test]
    fn trials_bad_label() {
        let dir = TempDir::new().unwrap();
        let p = dir.path().join("trials.txt");
        fs::write(&p, "2 a b\n").unwrap();
        let err = read_trials(&p).unwrap_err();
        assert!(err.to_string().contains("label must be 0 or 1"), "{err}");
    }

    proptest! {
        /// write_features then read_features is the identity, bit-exact.
        #[test]
        fn feature_roundtrip(rows in 1usize..20, cols in 1usize..20, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let values: Vec<f32> = (0..rows * cols)
                .map(|_| rng.random_range(-1000.0f32..1000.0))
                .collect();
            let m = FeatureMatrix::new(rows, cols, values).unwrap();
            let dir = TempDir::new().unwrap();
            let p = dir.path().join("rt.feat");
            write_features(&m, &p).unwrap();
            let back = read_features(&p).unwrap();
            prop_assert_eq!(back.values().len(), m.values().len());
            for (a, b) in back.values().iter().zip(m.values()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
