//! On-disk layout: `<root>/<scene_id>/tl_<k>.png` plus `<root>/manifest.json`.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{build_ladder, synth_sequence, Gamma, Image, SceneConfig, TemporalLadder, NATIVE_TLS};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the dataset root.
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneRecord {
    pub scene_id: String,
    pub native_tl: u32,
    pub split: Split,
    pub seed: u64,
    pub files: BTreeMap<u32, FileEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub global_seed: u64,
    #[serde(default)]
    pub gamma: Gamma,
    pub records: Vec<SceneRecord>,
}

impl DatasetManifest {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &SceneRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }

    pub fn split_counts(&self) -> BTreeMap<Split, usize> {
        let mut counts = BTreeMap::new();
        for r in &self.records {
            *counts.entry(r.split).or_insert(0) += 1;
        }
        counts
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// A ladder to be written, with its split and generating seed.
pub struct SceneEntry<'a> {
    pub ladder: &'a TemporalLadder,
    pub split: Split,
    pub seed: u64,
}

/// Writes every ladder as 16-bit PNGs and the manifest describing them.
pub fn write_dataset(dir: impl AsRef<Path>, global_seed: u64, scenes: &[SceneEntry<'_>]) -> Result<DatasetManifest> {
    let dir = dir.as_ref();
    let mut records = Vec::with_capacity(scenes.len());
    let mut seen = std::collections::HashSet::new();
    for entry in scenes {
        let ladder = entry.ladder;
        if !seen.insert(ladder.scene_id.as_str()) {
            return Err(Error::Argument(format!("duplicate scene id `{}`", ladder.scene_id)));
        }
        let scene_dir = dir.join(&ladder.scene_id);
        fs::create_dir_all(&scene_dir).map_err(|e| Error::io(&scene_dir, e))?;
        let mut files = BTreeMap::new();
        for (&tl, img) in &ladder.images {
            let rel = format!("{}/tl_{tl}.png", ladder.scene_id);
            let path = dir.join(&rel);
            img.save_png16(&path)?;
            let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            files.insert(tl, FileEntry { path: rel, sha256: sha256_hex(&bytes) });
        }
        records.push(SceneRecord {
            scene_id: ladder.scene_id.clone(),
            native_tl: ladder.native_tl,
            split: entry.split,
            seed: entry.seed,
            files,
        });
    }
    let manifest = DatasetManifest { format_version: MANIFEST_VERSION, global_seed, gamma: Gamma::None, records };
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, serde_json::to_vec_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

/// Reads and validates the manifest, checking every file's checksum.
pub fn read_dataset(dir: impl AsRef<Path>) -> Result<DatasetManifest> {
    let dir = dir.as_ref();
    let path = dir.join(MANIFEST_FILE);
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: DatasetManifest = serde_json::from_slice(&bytes)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    if manifest.format_version != MANIFEST_VERSION {
        return Err(Error::Version { expected: MANIFEST_VERSION, found: manifest.format_version });
    }
    let mut ids = std::collections::HashSet::new();
    for r in &manifest.records {
        if !ids.insert(&r.scene_id) {
            return Err(Error::Format(format!("scene `{}` listed twice", r.scene_id)));
        }
        if !r.files.contains_key(&r.native_tl) || !r.files.contains_key(&1) {
            return Err(Error::Format(format!("scene `{}` lacks TL 1 or its native TL", r.scene_id)));
        }
        for f in r.files.values() {
            let p = dir.join(&f.path);
            let bytes = fs::read(&p).map_err(|e| Error::io(&p, e))?;
            if sha256_hex(&bytes) != f.sha256 {
                return Err(Error::Integrity { path: p, reason: "sha256 mismatch".into() });
            }
        }
    }
    Ok(manifest)
}

pub fn load_ladder(dir: impl AsRef<Path>, record: &SceneRecord) -> Result<TemporalLadder> {
    let dir = dir.as_ref();
    let images = record
        .files
        .iter()
        .map(|(&tl, f)| Ok((tl, Image::load_png(dir.join(&f.path))?)))
        .collect::<Result<_>>()?;
    Ok(TemporalLadder { scene_id: record.scene_id.clone(), native_tl: record.native_tl, images })
}

/// An opened dataset with every ladder decoded.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub root: PathBuf,
    pub manifest: DatasetManifest,
    ladders: Vec<(Split, TemporalLadder)>,
}

impl Dataset {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let root = dir.as_ref().to_path_buf();
        let manifest = read_dataset(&root)?;
        let ladders = manifest
            .records
            .iter()
            .map(|r| Ok((r.split, load_ladder(&root, r)?)))
            .collect::<Result<_>>()?;
        Ok(Self { root, manifest, ladders })
    }

    pub fn ladders(&self, split: Split) -> Vec<&TemporalLadder> {
        self.ladders.iter().filter(|(s, _)| *s == split).map(|(_, l)| l).collect()
    }
}

/// Sizes and native levels of a synthetic dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub scene: SceneConfig,
    pub train: usize,
    pub val: usize,
    pub test: usize,
    /// Each scene's native level is drawn uniformly from this list.
    pub native_tls: Vec<u32>,
    pub global_seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { scene: SceneConfig::default(), train: 40, val: 8, test: 16, native_tls: NATIVE_TLS.to_vec(), global_seed: 0 }
    }
}

/// Seed of scene `index`, a function of the global seed and index only.
pub fn scene_seed(global_seed: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(global_seed);
    rng.set_stream(index as u64 + 1);
    rng.gen()
}

/// Generates quantized ladders for every split, in train/val/test order.
pub fn synthesize_ladders(config: &SynthConfig) -> Result<Vec<(Split, u64, TemporalLadder)>> {
    if config.native_tls.is_empty() {
        return Err(Error::Config("native_tls is empty".into()));
    }
    let splits = [(Split::Train, config.train), (Split::Val, config.val), (Split::Test, config.test)];
    let mut out = Vec::new();
    let mut index = 0;
    for (split, count) in splits {
        for _ in 0..count {
            let seed = scene_seed(config.global_seed, index);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
            let native = config.native_tls[rng.gen_range(0..config.native_tls.len())];
            let seq = synth_sequence(&config.scene, seed)?;
            let ladder = build_ladder(format!("scene_{index:04}"), &seq, native)?.quantized();
            out.push((split, seed, ladder));
            index += 1;
        }
    }
    Ok(out)
}

/// Synthesizes and writes a dataset in one go.
pub fn synthesize_dataset(dir: impl AsRef<Path>, config: &SynthConfig) -> Result<DatasetManifest> {
    let scenes = synthesize_ladders(config)?;
    let entries: Vec<SceneEntry<'_>> =
        scenes.iter().map(|(split, seed, ladder)| SceneEntry { ladder, split: *split, seed: *seed }).collect();
    write_dataset(dir, config.global_seed, &entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            scene: SceneConfig { height: 16, width: 16, ..Default::default() },
            train: 2,
            val: 1,
            test: 1,
            native_tls: vec![7, 9],
            global_seed: 5,
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small();
        let manifest = synthesize_dataset(dir.path(), &cfg).unwrap();
        let read = read_dataset(dir.path()).unwrap();
        assert_eq!(read, manifest);
        assert_eq!(read.split_counts()[&Split::Train], 2);
        let ds = Dataset::open(dir.path()).unwrap();
        let expected = synthesize_ladders(&cfg).unwrap();
        for (split, _, ladder) in &expected {
            assert!(ds.ladders(*split).contains(&ladder));
        }
    }

    #[test]
    fn corrupted_file_names_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = synthesize_dataset(dir.path(), &small()).unwrap();
        let victim = dir.path().join(&manifest.records[1].files[&3].path);
        let mut bytes = fs::read(&victim).unwrap();
        let n = bytes.len();
        bytes[n / 2] ^= 0xff;
        fs::write(&victim, bytes).unwrap();
        match read_dataset(dir.path()) {
            Err(Error::Integrity { path, .. }) => assert_eq!(path, victim),
            other => panic!("expected integrity error, got {other:?}"),
        }
    }

    #[test]
    fn version_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let mut manifest = synthesize_dataset(dir.path(), &small()).unwrap();
        manifest.format_version = 9;
        fs::write(dir.path().join(MANIFEST_FILE), serde_json::to_vec(&manifest).unwrap()).unwrap();
        assert!(matches!(read_dataset(dir.path()), Err(Error::Version { found: 9, .. })));
    }
}
