//! Dataset manifests: one clip per line, tab separated.
//!
//! ```text
//! # comment
//! tags	guitar,piano,drums
//! clip_0001	audio/clip_0001.wav	train	101
//! clip_0002	audio/clip_0002.wav	valid	010
//! ```
//!
//! Audio paths are relative to the manifest's directory unless absolute.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::Array2;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "train" => Ok(Split::Train),
            "valid" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub clip_id: String,
    pub audio_path: PathBuf,
    pub split: Split,
    pub tags: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub tag_vocabulary: Vec<String>,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut vocabulary: Option<Vec<String>> = None;
        let mut entries = Vec::new();
        let mut seen = HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| Error::ManifestParse { line: line_no, message };
            let fields: Vec<&str> = line.split('\t').collect();
            let Some(vocab) = &vocabulary else {
                if fields.len() != 2 || fields[0] != "tags" {
                    return Err(err("expected a 'tags<TAB>name,name,...' header".into()));
                }
                let names: Vec<String> = fields[1].split(',').map(|s| s.trim().to_string()).collect();
                if names.iter().any(String::is_empty) {
                    return Err(err("empty tag name".into()));
                }
                vocabulary = Some(names);
                continue;
            };
            if fields.len() != 4 {
                return Err(err(format!("expected 4 tab-separated fields, found {}", fields.len())));
            }
            let clip_id = fields[0].to_string();
            if clip_id.is_empty() {
                return Err(err("empty clip id".into()));
            }
            let split = fields[2].parse().map_err(err)?;
            let tags: Vec<bool> = fields[3]
                .chars()
                .map(|c| match c {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    other => Err(err(format!("tag vector holds '{other}'"))),
                })
                .collect::<Result<_>>()?;
            if tags.len() != vocab.len() {
                return Err(err(format!(
                    "tag vector has {} entries, vocabulary has {}",
                    tags.len(),
                    vocab.len()
                )));
            }
            if !seen.insert(clip_id.clone()) {
                return Err(Error::DuplicateClip(clip_id));
            }
            let path = Path::new(fields[1]);
            let audio_path = if path.is_absolute() {
                path.to_path_buf()
            } else {
                base_dir.join(path)
            };
            entries.push(ManifestEntry {
                clip_id,
                audio_path,
                split,
                tags,
            });
        }
        Ok(Self {
            tag_vocabulary: vocabulary.ok_or(Error::ManifestParse {
                line: 0,
                message: "no tags header".into(),
            })?,
            entries,
        })
    }

    pub fn to_text(&self, base_dir: &Path) -> String {
        let mut out = format!("tags\t{}\n", self.tag_vocabulary.join(","));
        for e in &self.entries {
            let path = e.audio_path.strip_prefix(base_dir).unwrap_or(&e.audio_path);
            let bits: String = e.tags.iter().map(|&b| if b { '1' } else { '0' }).collect();
            out.push_str(&format!("{}\t{}\t{}\t{}\n", e.clip_id, path.display(), e.split, bits));
        }
        out
    }

    pub fn n_tags(&self) -> usize {
        self.tag_vocabulary.len()
    }

    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.entries.len()).filter(|&i| self.entries[i].split == split).collect()
    }

    pub fn labels(&self, rows: &[usize]) -> Array2<f64> {
        Array2::from_shape_fn((rows.len(), self.n_tags()), |(i, j)| {
            if self.entries[rows[i]].tags[j] {
                1.0
            } else {
                0.0
            }
        })
    }

    /// Every split must have at least one clip for a training run.
    pub fn check_splits(&self) -> Result<()> {
        for split in [Split::Train, Split::Valid, Split::Test] {
            if self.indices(split).is_empty() {
                return Err(Error::Config(format!("manifest has no '{split}' clips")));
            }
        }
        Ok(())
    }
}

/// Reads and validates a manifest, checking that every audio file exists.
pub fn ingest(path: &Path) -> Result<DatasetManifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::ManifestParse {
        line: 0,
        message: format!("{}: {e}", path.display()),
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    let manifest = DatasetManifest::parse(&text, base)?;
    for e in &manifest.entries {
        if !e.audio_path.is_file() {
            return Err(Error::MissingAudio {
                clip: e.clip_id.clone(),
                path: e.audio_path.clone(),
            });
        }
    }
    Ok(manifest)
}
