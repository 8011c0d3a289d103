//! On-disk dataset layout.
//!
//! ```text
//! root/spec.json
//! root/saliency/{train,val,test}.txt
//! root/saliency/<id>/{frames,saliency,fixations}.bin, meta.json
//! root/quality/labels.csv            video_id,mos
//! root/quality/{train,val,test}.txt
//! root/quality/<id>/frames.bin, meta.json
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use dagr_tensor::io::{decode, encode};
use dagr_tensor::{RngState, Tensor};
use serde::{Deserialize, Serialize};

use super::synthetic::{SaliencySample, SyntheticData, SyntheticSpec};
use super::VideoClip;
use crate::error::{config_err, Error, Result};

pub const SALIENCY_DIR: &str = "saliency";
pub const QUALITY_DIR: &str = "quality";
pub const LABELS: &str = "labels.csv";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClipMeta {
    pub source_id: String,
    pub frame_indices: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Splits {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|x| x.name() == s)
    }

    pub fn file(self) -> &'static str {
        match self {
            Split::Train => "train.txt",
            Split::Val => "val.txt",
            Split::Test => "test.txt",
        }
    }
}

impl Splits {
    pub fn get(&self, split: Split) -> &[String] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }
}

/// Seeded 80:10:10 partition.
pub fn split_ids(ids: &[String], seed: u64) -> Splits {
    let mut order = ids.to_vec();
    RngState::new(seed).shuffle(&mut order);
    let n = order.len();
    let n_train = ((n as f64) * 0.8).round() as usize;
    let n_val = (((n as f64) * 0.1).round() as usize).min(n - n_train);
    let test = order.split_off(n_train + n_val);
    let val = order.split_off(n_train);
    Splits {
        train: order,
        val,
        test,
    }
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_tensor(path: &Path, name: &str, t: &Tensor) -> Result<()> {
    write(path, &encode(name, t))
}

fn read_tensor(path: &Path) -> Result<Tensor> {
    Ok(decode(&read(path)?)?.1)
}

fn write_meta(dir: &Path, clip: &VideoClip) -> Result<()> {
    let meta = ClipMeta {
        source_id: clip.source_id.clone(),
        frame_indices: clip.frame_indices.clone(),
    };
    let json = serde_json::to_vec_pretty(&meta).map_err(|e| Error::format("meta", e))?;
    write(&dir.join("meta.json"), &json)
}

fn read_meta(dir: &Path) -> Result<ClipMeta> {
    serde_json::from_slice(&read(&dir.join("meta.json"))?).map_err(|e| Error::format("meta.json", e))
}

fn write_splits(dir: &Path, splits: &Splits) -> Result<()> {
    for split in [Split::Train, Split::Val, Split::Test] {
        let mut text = splits.get(split).join("\n");
        if !text.is_empty() {
            text.push('\n');
        }
        write(&dir.join(split.file()), text.as_bytes())?;
    }
    Ok(())
}

pub fn read_split(dir: &Path, split: Split) -> Result<Vec<String>> {
    let text = String::from_utf8(read(&dir.join(split.file()))?).map_err(|e| Error::format(split.file(), e))?;
    Ok(text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect())
}

pub fn read_splits(dir: &Path) -> Result<Splits> {
    Ok(Splits {
        train: read_split(dir, Split::Train)?,
        val: read_split(dir, Split::Val)?,
        test: read_split(dir, Split::Test)?,
    })
}

/// Materializes a synthetic dataset under `root`, which must not exist yet
/// or be empty.
pub fn write_dataset(root: &Path, spec: &SyntheticSpec, data: &SyntheticData) -> Result<()> {
    if root.exists() && fs::read_dir(root).map_err(|e| Error::io(root, e))?.next().is_some() {
        return config_err(format!("dataset directory {} is not empty", root.display()));
    }
    let json = serde_json::to_vec_pretty(spec).map_err(|e| Error::format("spec", e))?;
    write(&root.join("spec.json"), &json)?;

    let sal_root = root.join(SALIENCY_DIR);
    for s in &data.saliency {
        let dir = sal_root.join(&s.clip.source_id);
        write_tensor(&dir.join("frames.bin"), "frames", &s.clip.frames)?;
        write_tensor(&dir.join("saliency.bin"), "saliency", &s.saliency)?;
        write_tensor(&dir.join("fixations.bin"), "fixations", &s.fixations)?;
        write_meta(&dir, &s.clip)?;
    }
    let ids: Vec<String> = data.saliency.iter().map(|s| s.clip.source_id.clone()).collect();
    write_splits(&sal_root, &split_ids(&ids, spec.seed))?;

    let q_root = root.join(QUALITY_DIR);
    let mut labels = csv::Writer::from_writer(Vec::new());
    labels.write_record(["video_id", "mos"]).map_err(|e| Error::format(LABELS, e))?;
    for c in &data.quality {
        let dir = q_root.join(&c.source_id);
        write_tensor(&dir.join("frames.bin"), "frames", &c.frames)?;
        write_meta(&dir, c)?;
        let mos = c.mos.ok_or_else(|| Error::format("quality clip", "missing MOS"))?;
        labels
            .write_record([c.source_id.clone(), format!("{mos}")])
            .map_err(|e| Error::format(LABELS, e))?;
    }
    let bytes = labels.into_inner().map_err(|e| Error::format(LABELS, e))?;
    write(&q_root.join(LABELS), &bytes)?;
    let ids: Vec<String> = data.quality.iter().map(|c| c.source_id.clone()).collect();
    write_splits(&q_root, &split_ids(&ids, spec.seed.wrapping_add(1)))
}

pub fn read_spec(root: &Path) -> Result<SyntheticSpec> {
    serde_json::from_slice(&read(&root.join("spec.json"))?).map_err(|e| Error::format("spec.json", e))
}

pub fn read_labels(root: &Path) -> Result<Vec<(String, f64)>> {
    let path = root.join(QUALITY_DIR).join(LABELS);
    let bytes = read(&path)?;
    let mut r = csv::Reader::from_reader(bytes.as_slice());
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::format(LABELS, e))?;
        let id = rec.get(0).ok_or_else(|| Error::format(LABELS, "missing video_id"))?;
        let mos: f64 = rec
            .get(1)
            .ok_or_else(|| Error::format(LABELS, "missing mos"))?
            .parse()
            .map_err(|e| Error::format(LABELS, e))?;
        out.push((id.to_string(), mos));
    }
    Ok(out)
}

fn clip_dir(root: &Path, kind: &str, id: &str) -> PathBuf {
    root.join(kind).join(id)
}

pub fn load_saliency_sample(root: &Path, id: &str) -> Result<SaliencySample> {
    let dir = clip_dir(root, SALIENCY_DIR, id);
    let meta = read_meta(&dir)?;
    Ok(SaliencySample {
        clip: VideoClip {
            frames: read_tensor(&dir.join("frames.bin"))?,
            source_id: meta.source_id,
            frame_indices: meta.frame_indices,
            mos: None,
        },
        saliency: read_tensor(&dir.join("saliency.bin"))?,
        fixations: read_tensor(&dir.join("fixations.bin"))?,
    })
}

/// Saliency samples of one split, in split-file order.
pub fn load_saliency_split(root: &Path, split: Split) -> Result<Vec<SaliencySample>> {
    read_split(&root.join(SALIENCY_DIR), split)?
        .iter()
        .map(|id| load_saliency_sample(root, id))
        .collect()
}

/// Labelled clips of one split, in split-file order.
pub fn load_quality_split(root: &Path, split: Split) -> Result<Vec<VideoClip>> {
    let labels = read_labels(root)?;
    read_split(&root.join(QUALITY_DIR), split)?
        .iter()
        .map(|id| {
            let mos = labels
                .iter()
                .find(|(l, _)| l == id)
                .map(|(_, m)| *m)
                .ok_or_else(|| Error::format(LABELS, format!("no label for {id}")))?;
            let dir = clip_dir(root, QUALITY_DIR, id);
            let meta = read_meta(&dir)?;
            Ok(VideoClip {
                frames: read_tensor(&dir.join("frames.bin"))?,
                source_id: meta.source_id,
                frame_indices: meta.frame_indices,
                mos: Some(mos),
            })
        })
        .collect()
}

/// Items of one kind partitioned into train, validation and test.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitData<T> {
    pub train: Vec<T>,
    pub val: Vec<T>,
    pub test: Vec<T>,
}

impl<T: Clone> SplitData<T> {
    pub fn get(&self, split: Split) -> &[T] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    /// Validation followed by test items.
    pub fn held_out(&self) -> Vec<T> {
        self.val.iter().chain(&self.test).cloned().collect()
    }

    pub fn all(&self) -> Vec<T> {
        self.train.iter().chain(&self.val).chain(&self.test).cloned().collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSplits {
    pub saliency: SplitData<SaliencySample>,
    pub quality: SplitData<VideoClip>,
}

fn pick<T: Clone>(items: &[T], ids: &[String], id_of: impl Fn(&T) -> &str) -> Vec<T> {
    ids.iter()
        .filter_map(|id| items.iter().find(|x| id_of(x) == id).cloned())
        .collect()
}

/// The same partition [`write_dataset`] stores, computed in memory.
pub fn split_synthetic(spec: &SyntheticSpec, data: &SyntheticData) -> DatasetSplits {
    let part = |ids: Vec<String>, seed| split_ids(&ids, seed);
    let s = part(data.saliency.iter().map(|s| s.clip.source_id.clone()).collect(), spec.seed);
    let q = part(data.quality.iter().map(|c| c.source_id.clone()).collect(), spec.seed.wrapping_add(1));
    fn sid(x: &SaliencySample) -> &str {
        &x.clip.source_id
    }
    fn qid(x: &VideoClip) -> &str {
        &x.source_id
    }
    DatasetSplits {
        saliency: SplitData {
            train: pick(&data.saliency, &s.train, sid),
            val: pick(&data.saliency, &s.val, sid),
            test: pick(&data.saliency, &s.test, sid),
        },
        quality: SplitData {
            train: pick(&data.quality, &q.train, qid),
            val: pick(&data.quality, &q.val, qid),
            test: pick(&data.quality, &q.test, qid),
        },
    }
}

pub fn load_dataset(root: &Path) -> Result<DatasetSplits> {
    Ok(DatasetSplits {
        saliency: SplitData {
            train: load_saliency_split(root, Split::Train)?,
            val: load_saliency_split(root, Split::Val)?,
            test: load_saliency_split(root, Split::Test)?,
        },
        quality: SplitData {
            train: load_quality_split(root, Split::Train)?,
            val: load_quality_split(root, Split::Val)?,
            test: load_quality_split(root, Split::Test)?,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthetic::generate_synthetic;

    #[test]
    fn split_proportions() {
        let ids: Vec<String> = (0..20).map(|i| format!("v{i}")).collect();
        let s = split_ids(&ids, 3);
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (16, 2, 2));
        let mut all: Vec<String> = [s.train.clone(), s.val.clone(), s.test.clone()].concat();
        all.sort();
        let mut want = ids.clone();
        want.sort();
        assert_eq!(all, want);
        assert_eq!(split_ids(&ids, 3), s);
    }

    #[test]
    fn write_then_load() {
        let spec = SyntheticSpec {
            num_videos: 10,
            frames_per_video: 2,
            ..SyntheticSpec::default()
        };
        let data = generate_synthetic(&spec).unwrap();
        let tmp = tempfile::tempdir().unwrap();
        let root = tmp.path().join("ds");
        write_dataset(&root, &spec, &data).unwrap();
        assert_eq!(read_spec(&root).unwrap(), spec);
        let splits = read_splits(&root.join(QUALITY_DIR)).unwrap();
        let train = load_quality_split(&root, Split::Train).unwrap();
        assert_eq!(train.len(), splits.train.len());
        for (clip, id) in train.iter().zip(&splits.train) {
            assert_eq!(&clip.source_id, id);
            let orig = data.quality.iter().find(|c| &c.source_id == id).unwrap();
            assert_eq!(clip, orig);
        }
        let sal = load_saliency_split(&root, Split::Test).unwrap();
        for s in &sal {
            let orig = data.saliency.iter().find(|o| o.clip.source_id == s.clip.source_id).unwrap();
            assert_eq!(s, orig);
        }
        assert!(write_dataset(&root, &spec, &data).is_err());
        assert_eq!(load_dataset(&root).unwrap(), split_synthetic(&spec, &data));
    }
}
