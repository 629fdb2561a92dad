//! Dataset directory index and per-domain manifests.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hierarchy::NodeId;
use crate::tasks::{Domain, TaskDefinition};

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("missing split directory {0}")]
    MissingSplitDir(PathBuf),
    #[error("no images found under {0}")]
    EmptyDataset(PathBuf),
    #[error("class {0} is not in the dataset index")]
    MissingClass(NodeId),
    #[error("class {0} has no {1} images")]
    EmptyClass(NodeId, Split),
    #[error("row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("two images map to {0}")]
    Collision(PathBuf),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ManifestError + '_ {
    move |source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
}

impl Split {
    fn dir(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
        }
    }
}

impl FromStr for Split {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            _ => Err(format!("unknown split {s:?}")),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.dir())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ClassImages {
    pub train_paths: Vec<String>,
    pub val_paths: Vec<String>,
}

impl ClassImages {
    pub fn paths(&self, split: Split) -> &[String] {
        match split {
            Split::Train => &self.train_paths,
            Split::Val => &self.val_paths,
        }
    }
}

/// Image paths, relative to the dataset root and `/`-separated, per synset.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DatasetIndex {
    pub classes: BTreeMap<NodeId, ClassImages>,
}

impl DatasetIndex {
    pub fn get(&self, n: &str) -> Option<&ClassImages> {
        self.classes.get(n)
    }

    pub fn image_count(&self) -> usize {
        self.classes
            .values()
            .map(|c| c.train_paths.len() + c.val_paths.len())
            .sum()
    }
}

fn list_split(root: &Path, split: Split) -> Result<Vec<(NodeId, Vec<String>)>, ManifestError> {
    let dir = root.join(split.dir());
    if !dir.is_dir() {
        return Err(ManifestError::MissingSplitDir(dir));
    }
    let mut synsets = Vec::new();
    for ent in fs::read_dir(&dir).map_err(io_err(&dir))? {
        let ent = ent.map_err(io_err(&dir))?;
        if ent.file_type().map_err(io_err(&dir))?.is_dir() {
            if let Some(name) = ent.file_name().to_str() {
                if let Ok(id) = NodeId::new(name) {
                    synsets.push(id);
                }
            }
        }
    }
    synsets
        .into_par_iter()
        .map(|id| {
            let sdir = dir.join(id.as_str());
            let mut files = Vec::new();
            for ent in fs::read_dir(&sdir).map_err(io_err(&sdir))? {
                let ent = ent.map_err(io_err(&sdir))?;
                if ent.file_type().map_err(io_err(&sdir))?.is_file() {
                    if let Some(f) = ent.file_name().to_str() {
                        files.push(format!("{}/{}/{}", split.dir(), id, f));
                    }
                }
            }
            files.sort();
            Ok((id, files))
        })
        .collect()
}

/// Index `<root>/{train,val}/<synset>/<image>`. Non-directory entries at the
/// synset level and nested directories are ignored.
pub fn scan_dataset(root: &Path) -> Result<DatasetIndex, ManifestError> {
    let train = list_split(root, Split::Train)?;
    let val = list_split(root, Split::Val)?;
    let mut classes: BTreeMap<NodeId, ClassImages> = BTreeMap::new();
    for (id, files) in train {
        classes.entry(id).or_default().train_paths = files;
    }
    for (id, files) in val {
        classes.entry(id).or_default().val_paths = files;
    }
    let index = DatasetIndex { classes };
    if index.image_count() == 0 {
        return Err(ManifestError::EmptyDataset(root.to_path_buf()));
    }
    Ok(index)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub image_path: String,
    pub superclass_index: usize,
    pub superclass_node: NodeId,
    pub subclass_node: NodeId,
    pub domain: Domain,
    pub split: Split,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Manifest {
    pub records: Vec<ManifestRecord>,
}

/// One record per image of each subclass in `domain`, ordered by
/// (superclass index, subclass position in the task, path).
pub fn emit_manifest(
    task: &TaskDefinition,
    index: &DatasetIndex,
    domain: Domain,
    split: Split,
) -> Result<Manifest, ManifestError> {
    let mut records = Vec::new();
    for (i, sc) in task.superclasses.iter().enumerate() {
        for sub in sc.subpops(domain) {
            let imgs = index
                .get(sub.as_str())
                .ok_or_else(|| ManifestError::MissingClass(sub.clone()))?;
            let paths = imgs.paths(split);
            if paths.is_empty() {
                return Err(ManifestError::EmptyClass(sub.clone(), split));
            }
            records.extend(paths.iter().map(|p| ManifestRecord {
                image_path: p.clone(),
                superclass_index: i,
                superclass_node: sc.node.clone(),
                subclass_node: sub.clone(),
                domain,
                split,
            }));
        }
    }
    Ok(Manifest { records })
}

pub fn write_manifest<W: io::Write>(m: &Manifest, w: W) -> Result<(), ManifestError> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wtr.write_record([
        "image_path",
        "superclass_index",
        "superclass_node",
        "subclass_node",
        "domain",
        "split",
    ])?;
    for r in &m.records {
        wtr.serialize(r)?;
    }
    wtr.flush().map_err(io_err(Path::new("<manifest>")))?;
    Ok(())
}

pub fn read_manifest<R: io::Read>(r: R) -> Result<Manifest, ManifestError> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut records = Vec::new();
    for (i, row) in rdr.deserialize::<ManifestRecord>().enumerate() {
        records.push(row.map_err(|e| ManifestError::MalformedRow {
            row: i + 2,
            reason: e.to_string(),
        })?);
    }
    Ok(Manifest { records })
}

/// Symlink tree `<out>/<domain>/<split>/<superclass_index>/<file name>`.
#[cfg(unix)]
pub fn materialize(m: &Manifest, data_root: &Path, out: &Path) -> Result<(), ManifestError> {
    let mut seen = BTreeSet::new();
    for r in &m.records {
        let file = Path::new(&r.image_path)
            .file_name()
            .ok_or_else(|| ManifestError::MalformedRow {
                row: 0,
                reason: format!("no file name in {}", r.image_path),
            })?;
        let dir = out
            .join(r.domain.to_string())
            .join(r.split.to_string())
            .join(r.superclass_index.to_string());
        let link = dir.join(file);
        if !seen.insert(link.clone()) {
            return Err(ManifestError::Collision(link));
        }
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let target = fs::canonicalize(data_root.join(&r.image_path))
            .map_err(io_err(&data_root.join(&r.image_path)))?;
        if link.symlink_metadata().is_ok() {
            fs::remove_file(&link).map_err(io_err(&link))?;
        }
        std::os::unix::fs::symlink(&target, &link).map_err(io_err(&link))?;
    }
    Ok(())
}
