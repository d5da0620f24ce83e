//! Meta-dataset persistence: line-delimited records with a schema
//! header, plus the append-only cache that makes assembly resumable.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write as _};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::fingerprint_hex;

use super::{
    AssemblyConfig, MetaDataset, MetaRecord, Standardization, TaskFailure, TaskSpec,
    SCHEMA_VERSION,
};

#[derive(Debug, Serialize, Deserialize)]
struct MetaHeader {
    schema_version: u32,
    epsilon: f64,
    algorithms: Vec<String>,
    standardization: Option<Standardization>,
    record_count: usize,
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::io(path.display().to_string(), e)
}

fn parse_err(path: &Path, line: usize, e: impl std::fmt::Display) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: e.to_string(),
    }
}

/// Write a meta-dataset: one header line, then one record per line.
/// The write goes through a sibling temp file and a rename, so an
/// interrupted save never corrupts an existing artifact.
pub fn save_meta(path: &Path, meta: &MetaDataset) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let file = File::create(&tmp).map_err(io_err(&tmp))?;
        let mut w = BufWriter::new(file);
        let header = MetaHeader {
            schema_version: meta.schema_version,
            epsilon: meta.epsilon,
            algorithms: meta.algorithms.clone(),
            standardization: meta.standardization.clone(),
            record_count: meta.records.len(),
        };
        serde_json::to_writer(&mut w, &header).map_err(|e| parse_err(&tmp, 1, e))?;
        w.write_all(b"\n").map_err(io_err(&tmp))?;
        for (i, rec) in meta.records.iter().enumerate() {
            serde_json::to_writer(&mut w, rec).map_err(|e| parse_err(&tmp, i + 2, e))?;
            w.write_all(b"\n").map_err(io_err(&tmp))?;
        }
        w.flush().map_err(io_err(&tmp))?;
    }
    std::fs::rename(&tmp, path).map_err(io_err(path))
}

/// Load and validate a meta-dataset file.
pub fn load_meta(path: &Path) -> Result<MetaDataset> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let (_, first) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "empty file (missing header)"))?;
    let header: MetaHeader =
        serde_json::from_str(&first.map_err(io_err(path))?).map_err(|e| parse_err(path, 1, e))?;
    if header.schema_version != SCHEMA_VERSION {
        return Err(Error::DegenerateInput(format!(
            "meta file {} has schema version {}, this build reads {SCHEMA_VERSION}",
            path.display(),
            header.schema_version
        )));
    }
    let mut records = Vec::with_capacity(header.record_count);
    for (idx, line) in lines {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: MetaRecord =
            serde_json::from_str(&line).map_err(|e| parse_err(path, idx + 1, e))?;
        records.push(rec);
    }
    if records.len() != header.record_count {
        return Err(parse_err(
            path,
            records.len() + 2,
            format!(
                "truncated file: header promises {} records, found {}",
                header.record_count,
                records.len()
            ),
        ));
    }
    let meta = MetaDataset {
        schema_version: header.schema_version,
        epsilon: header.epsilon,
        algorithms: header.algorithms,
        standardization: header.standardization,
        records,
    };
    meta.validate()?;
    Ok(meta)
}

/// Write a task-spec file: one spec per line, atomically.
pub fn save_specs(path: &Path, specs: &[TaskSpec]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let file = File::create(&tmp).map_err(io_err(&tmp))?;
        let mut w = BufWriter::new(file);
        for (i, spec) in specs.iter().enumerate() {
            serde_json::to_writer(&mut w, spec).map_err(|e| parse_err(&tmp, i + 1, e))?;
            w.write_all(b"\n").map_err(io_err(&tmp))?;
        }
        w.flush().map_err(io_err(&tmp))?;
    }
    std::fs::rename(&tmp, path).map_err(io_err(path))
}

/// Load a task-spec file written by [`save_specs`].
pub fn load_specs(path: &Path) -> Result<Vec<TaskSpec>> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut specs = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let spec: TaskSpec =
            serde_json::from_str(&line).map_err(|e| parse_err(path, idx + 1, e))?;
        specs.push(spec);
    }
    if specs.is_empty() {
        return Err(parse_err(path, 1, "spec file holds no tasks"));
    }
    Ok(specs)
}

/// Persist the failure log next to a meta file.
pub fn save_failures(path: &Path, failures: &[TaskFailure]) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for f in failures {
        serde_json::to_writer(&mut w, f).map_err(|e| parse_err(path, 1, e))?;
        w.write_all(b"\n").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheHeader {
    schema_version: u32,
    /// Binds the cache to (specs, config); resuming under anything else
    /// is refused.
    fingerprint: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheLine {
    task_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    record: Option<MetaRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

/// Append-only journal of completed per-task results. Records land in
/// completion order; the final dataset is reordered by spec, so an
/// interrupted-and-resumed sweep produces byte-identical output.
pub struct ResumeCache {
    writer: BufWriter<File>,
    entries: HashMap<String, std::result::Result<MetaRecord, String>>,
}

fn cache_fingerprint(specs: &[TaskSpec], cfg: &AssemblyConfig) -> String {
    let payload =
        serde_json::to_vec(&(specs, cfg)).expect("specs and config serialize");
    fingerprint_hex(&payload)
}

impl ResumeCache {
    /// Open (or create) a cache bound to this exact sweep. An existing
    /// cache written under a different grid or config is rejected. A
    /// torn final line — the signature of a crash mid-append — is
    /// dropped; torn interior lines are corruption and error out.
    pub fn open(path: &Path, specs: &[TaskSpec], cfg: &AssemblyConfig) -> Result<ResumeCache> {
        let fingerprint = cache_fingerprint(specs, cfg);
        let mut entries = HashMap::new();
        if path.exists() {
            let file = File::open(path).map_err(io_err(path))?;
            let all: Vec<String> = BufReader::new(file)
                .lines()
                .collect::<std::io::Result<_>>()
                .map_err(io_err(path))?;
            if all.is_empty() {
                return Err(parse_err(path, 1, "cache exists but has no header"));
            }
            let header: CacheHeader =
                serde_json::from_str(&all[0]).map_err(|e| parse_err(path, 1, e))?;
            if header.fingerprint != fingerprint {
                return Err(Error::FingerprintMismatch {
                    context: format!("resume cache {}", path.display()),
                    expected: fingerprint,
                    got: header.fingerprint,
                });
            }
            let last = all.len() - 1;
            for (i, line) in all.iter().enumerate().skip(1) {
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<CacheLine>(line) {
                    Ok(entry) => {
                        let value = match (entry.record, entry.error) {
                            (Some(rec), _) => Ok(rec),
                            (None, Some(msg)) => Err(msg),
                            (None, None) => {
                                return Err(parse_err(path, i + 1, "entry has no payload"))
                            }
                        };
                        entries.entry(entry.task_id).or_insert(value);
                    }
                    Err(e) if i == last => {
                        // Torn tail from a crash mid-write; recompute it.
                        let _ = e;
                    }
                    Err(e) => return Err(parse_err(path, i + 1, e)),
                }
            }
            let file = OpenOptions::new()
                .append(true)
                .open(path)
                .map_err(io_err(path))?;
            Ok(ResumeCache {
                writer: BufWriter::new(file),
                entries,
            })
        } else {
            let file = File::create(path).map_err(io_err(path))?;
            let mut writer = BufWriter::new(file);
            let header = CacheHeader {
                schema_version: SCHEMA_VERSION,
                fingerprint,
            };
            serde_json::to_writer(&mut writer, &header).map_err(|e| parse_err(path, 1, e))?;
            writer.write_all(b"\n").map_err(io_err(path))?;
            writer.flush().map_err(io_err(path))?;
            Ok(ResumeCache { writer, entries })
        }
    }

    /// Results already on disk, keyed by task id.
    pub fn completed(&self) -> HashMap<String, std::result::Result<MetaRecord, String>> {
        self.entries.clone()
    }

    /// Journal one finished task and flush it to disk immediately.
    pub fn append(
        &mut self,
        task_id: &str,
        result: &std::result::Result<MetaRecord, String>,
    ) -> Result<()> {
        let line = CacheLine {
            task_id: task_id.to_string(),
            record: result.as_ref().ok().cloned(),
            error: result.as_ref().err().cloned(),
        };
        let io = |e: std::io::Error| Error::io("resume cache", e);
        serde_json::to_writer(&mut self.writer, &line)
            .map_err(|e| Error::io("resume cache", std::io::Error::other(e)))?;
        self.writer.write_all(b"\n").map_err(io)?;
        self.writer.flush().map_err(io)?;
        self.entries
            .entry(task_id.to_string())
            .or_insert_with(|| result.clone());
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::super::{
        assemble_meta_dataset, assemble_with_resume, build_task_specs, GridSpec,
    };
    use super::*;
    use crate::algorithms::TrainConfig;
    use crate::shiftgen::ShiftDegrees;
    use std::io::Read as _;

    fn specs_and_cfg() -> (Vec<TaskSpec>, AssemblyConfig) {
        let grid = GridSpec {
            sizes: vec![40],
            dims: vec![2],
            availabilities: vec![10.0],
            triples_per_combo: 0,
            singles: vec![
                ShiftDegrees::new(0.9, 0.5, 0.5),
                ShiftDegrees::new(0.5, 0.9, 0.5),
                ShiftDegrees::new(0.5, 0.5, 0.5),
                ShiftDegrees::new(0.7, 0.6, 0.55),
            ],
        };
        let specs = build_task_specs(&grid, 5).unwrap();
        let cfg = AssemblyConfig {
            seed: 3,
            train: TrainConfig {
                epochs: 40,
                ..TrainConfig::default()
            },
            ..AssemblyConfig::default()
        };
        (specs, cfg)
    }

    #[test]
    fn save_load_round_trip() {
        let (specs, cfg) = specs_and_cfg();
        let out = assemble_meta_dataset(&specs, &cfg);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("meta.jsonl");
        save_meta(&path, &out.meta).unwrap();
        let loaded = load_meta(&path).unwrap();
        assert_eq!(loaded, out.meta);
    }

    #[test]
    fn empty_meta_is_a_valid_file() {
        let meta = MetaDataset {
            schema_version: SCHEMA_VERSION,
            epsilon: 0.05,
            algorithms: vec!["erm".into()],
            standardization: None,
            records: vec![],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        save_meta(&path, &meta).unwrap();
        assert_eq!(load_meta(&path).unwrap().records.len(), 0);
    }

    #[test]
    fn truncated_file_names_the_line() {
        let (specs, cfg) = specs_and_cfg();
        let out = assemble_meta_dataset(&specs, &cfg);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("meta.jsonl");
        save_meta(&path, &out.meta).unwrap();
        let mut text = String::new();
        File::open(&path)
            .unwrap()
            .read_to_string(&mut text)
            .unwrap();
        let keep: Vec<&str> = text.lines().take(3).collect();
        std::fs::write(&path, keep.join("\n")).unwrap();
        match load_meta(&path) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 4);
                assert!(message.contains("truncated"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn schema_version_is_enforced() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("meta.jsonl");
        std::fs::write(
            &path,
            "{\"schema_version\":99,\"epsilon\":0.05,\"algorithms\":[],\"standardization\":null,\"record_count\":0}\n",
        )
        .unwrap();
        match load_meta(&path) {
            Err(Error::DegenerateInput(msg)) => assert!(msg.contains("schema version 99")),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn resume_matches_uninterrupted_run() {
        let (specs, cfg) = specs_and_cfg();
        let direct = assemble_meta_dataset(&specs, &cfg);
        let dir = tempfile::tempdir().unwrap();
        let cache = dir.path().join("cache.jsonl");
        // Simulate a run killed after two tasks: the cache holds their
        // records, the rest never ran.
        {
            let mut partial = ResumeCache::open(&cache, &specs, &cfg).unwrap();
            for spec in &specs[..2] {
                let rec = super::super::build_record(spec, &cfg).map_err(|e| e.to_string());
                partial.append(&spec.id, &rec).unwrap();
            }
        }
        let cached_len = std::fs::metadata(&cache).unwrap().len();
        let resumed = assemble_with_resume(&specs, &cfg, &cache).unwrap();
        assert_eq!(resumed.meta, direct.meta);
        assert!(std::fs::metadata(&cache).unwrap().len() > cached_len);
        // Resuming again does no new work and still agrees.
        let again = assemble_with_resume(&specs, &cfg, &cache).unwrap();
        assert_eq!(again.meta, direct.meta);
    }

    #[test]
    fn resume_recovers_from_a_torn_final_line() {
        let (specs, cfg) = specs_and_cfg();
        let dir = tempfile::tempdir().unwrap();
        let cache = dir.path().join("cache.jsonl");
        let direct = assemble_meta_dataset(&specs, &cfg);
        assemble_with_resume(&specs, &cfg, &cache).unwrap();
        // Tear the last line in half, as a crash mid-append would.
        let text = std::fs::read_to_string(&cache).unwrap();
        let torn = &text[..text.len() - 40];
        std::fs::write(&cache, torn).unwrap();
        let recovered = assemble_with_resume(&specs, &cfg, &cache).unwrap();
        assert_eq!(recovered.meta, direct.meta);
    }

    #[test]
    fn cache_refuses_a_different_sweep() {
        let (specs, cfg) = specs_and_cfg();
        let dir = tempfile::tempdir().unwrap();
        let cache = dir.path().join("cache.jsonl");
        assemble_with_resume(&specs[..2], &cfg, &cache).unwrap();
        let other_cfg = AssemblyConfig { seed: 99, ..cfg };
        match assemble_with_resume(&specs[..2], &other_cfg, &cache) {
            Err(Error::FingerprintMismatch { context, .. }) => {
                assert!(context.contains("resume cache"))
            }
            other => panic!("expected fingerprint mismatch, got {other:?}"),
        }
    }

    /// Cached floats must come back bit-identical, or a resumed sweep
    /// would not byte-match a fresh one. Exercised with values whose
    /// shortest decimal form is exactly one ULP wide (e.g. 7/60), which
    /// best-effort float parsing gets wrong.
    #[test]
    fn cache_round_trip_preserves_float_bits() {
        let awkward = [
            7.0 / 60.0,
            1.0 / 3.0,
            0.1 + 0.2,
            2.0 / 3.0,
            (0.1 + 0.7) / 6.0,
        ];
        let record = MetaRecord {
            task_id: "ulp".into(),
            descriptor: crate::metadataset::Descriptor {
                d_sc: awkward[0],
                d_ls: awkward[1],
                d_cs: awkward[2],
                r: 10.0,
                n: 60,
                d: 2,
            },
            perf: awkward.to_vec(),
            avg_perf: awkward.to_vec(),
            ensemble_wg: awkward[4],
            labels: vec![1, 0, 0, 0, 0],
        };
        let (specs, cfg) = specs_and_cfg();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        {
            let mut cache = ResumeCache::open(&path, &specs, &cfg).unwrap();
            cache.append("ulp", &Ok(record.clone())).unwrap();
        }
        let cache = ResumeCache::open(&path, &specs, &cfg).unwrap();
        let loaded = cache.completed().remove("ulp").unwrap().unwrap();
        for (orig, back) in record.perf.iter().zip(&loaded.perf) {
            assert_eq!(orig.to_bits(), back.to_bits(), "{orig} came back as {back}");
        }
        assert_eq!(loaded, record);
        // Re-serializing the loaded record reproduces the original text.
        assert_eq!(
            serde_json::to_string(&loaded).unwrap(),
            serde_json::to_string(&record).unwrap()
        );
    }
}
