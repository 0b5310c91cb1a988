//! Configuration, dataset ingestion and stage orchestration.
//!
//! Every stage writes into `<out>/<stage>/<key>/`, where `key` hashes the
//! stage's own config section together with the key of the stage before
//! it. Changing one parameter therefore moves that stage and everything
//! downstream to fresh directories and leaves older results in place.
//! A directory is complete once its `stage.txt` exists.

pub mod audio;
pub mod config;
pub mod manifest;
pub mod synth;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::{Array1, Array2, Axis};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub use config::{wc_inc_schedules, PipelineConfig};
pub use manifest::{ingest, DatasetManifest, ManifestEntry, Split};
pub use synth::{make_synthetic_corpus, SynthOptions};

use crate::bof::bag_of_features;
use crate::dsp::{self, MelSpectrogram, OnsetFunction, HOP, SAMPLE_RATE};
use crate::error::{Error, Result};
use crate::eval::{self, Report};
use crate::net::{finetune, pretrain_stack, DeepNet};
use crate::rbm::{train_rbm, RbmModel};
use crate::sampling::build_training_set;
use crate::whitening::{fit_whitening, WhiteningModel};
use crate::{dbof, header, rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Featurize,
    Sample,
    TrainRbm,
    ExtractBof,
    Pretrain,
    Finetune,
    Evaluate,
    Predict,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Featurize,
        Stage::Sample,
        Stage::TrainRbm,
        Stage::ExtractBof,
        Stage::Pretrain,
        Stage::Finetune,
        Stage::Evaluate,
        Stage::Predict,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Featurize => "featurize",
            Stage::Sample => "sample",
            Stage::TrainRbm => "train-rbm",
            Stage::ExtractBof => "extract-bof",
            Stage::Pretrain => "pretrain",
            Stage::Finetune => "finetune",
            Stage::Evaluate => "evaluate",
            Stage::Predict => "predict",
        }
    }

    pub fn upstream(self) -> Option<Stage> {
        match self {
            Stage::Featurize => None,
            Stage::Sample => Some(Stage::Featurize),
            Stage::TrainRbm => Some(Stage::Sample),
            Stage::ExtractBof => Some(Stage::TrainRbm),
            Stage::Pretrain => Some(Stage::ExtractBof),
            Stage::Finetune => Some(Stage::Pretrain),
            Stage::Evaluate | Stage::Predict => Some(Stage::Finetune),
        }
    }

    /// What the stage produces, for error messages.
    fn product(self) -> &'static str {
        match self {
            Stage::Featurize => "features",
            Stage::Sample => "training blocks",
            Stage::TrainRbm => "feature RBM",
            Stage::ExtractBof => "bag-of-features",
            Stage::Pretrain => "pretrained stack",
            Stage::Finetune => "model",
            Stage::Evaluate => "report",
            Stage::Predict => "predictions",
        }
    }

    fn index(self) -> u64 {
        Stage::ALL.iter().position(|&s| s == self).expect("listed") as u64
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown stage '{s}'")))
    }
}

const MARKER: &str = "stage.txt";

fn sha_hex(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex::encode(h.finalize())
}

fn section_json<T: Serialize>(section: &T) -> String {
    serde_json::to_string(section).expect("config sections serialize")
}

fn format_row(values: impl IntoIterator<Item = f64>) -> String {
    values.into_iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>().join("\t")
}

/// One stage that finished, or was found finished.
#[derive(Debug, Clone, PartialEq)]
pub struct StageOutcome {
    pub stage: Stage,
    pub dir: PathBuf,
    pub reused: bool,
}

pub struct Pipeline {
    pub config: PipelineConfig,
    pub out: PathBuf,
    manifest: DatasetManifest,
    corpus_digest: String,
}

impl Pipeline {
    /// Validates the config and ingests the manifest it points at.
    pub fn new(config: PipelineConfig, out: impl Into<PathBuf>) -> Result<Self> {
        config.validate()?;
        let manifest = ingest(&config.data.manifest)?;
        let mut h = Sha256::new();
        h.update(manifest.to_text(Path::new("")).as_bytes());
        for e in &manifest.entries {
            h.update(fs::read(&e.audio_path)?);
        }
        Ok(Self {
            config,
            out: out.into(),
            manifest,
            corpus_digest: hex::encode(h.finalize()),
        })
    }

    pub fn manifest(&self) -> &DatasetManifest {
        &self.manifest
    }

    pub fn stage_seed(&self, stage: Stage) -> u64 {
        rng::derive(self.config.seed, stage.index())
    }

    /// Hash of the stage's own config section (and seed, when it uses one).
    pub fn section_hash(&self, stage: Stage) -> String {
        let c = &self.config;
        let body = match stage {
            Stage::Featurize => format!("{}|{}", self.corpus_digest, section_json(&c.dsp)),
            Stage::Sample => format!("{}|{}", section_json(&c.sampling), self.stage_seed(stage)),
            Stage::TrainRbm => format!(
                "{}|{}|{}",
                section_json(&c.whitening),
                section_json(&c.rbm),
                self.stage_seed(stage)
            ),
            Stage::ExtractBof => section_json(&c.bof),
            Stage::Pretrain => format!("{}|{}", section_json(&c.pretrain), self.stage_seed(stage)),
            Stage::Finetune => format!("{}|{}", section_json(&c.finetune), self.stage_seed(stage)),
            Stage::Evaluate | Stage::Predict => String::new(),
        };
        sha_hex(&[stage.name().as_bytes(), body.as_bytes()])
    }

    /// Chained key: the section hash folded with every upstream key.
    pub fn key(&self, stage: Stage) -> String {
        let upstream = stage.upstream().map(|u| self.key(u)).unwrap_or_default();
        sha_hex(&[upstream.as_bytes(), self.section_hash(stage).as_bytes()])[..16].to_string()
    }

    pub fn artifact_dir(&self, stage: Stage) -> PathBuf {
        self.out.join(stage.name()).join(self.key(stage))
    }

    pub fn is_complete(&self, stage: Stage) -> bool {
        self.artifact_dir(stage).join(MARKER).is_file()
    }

    fn require(&self, stage: Stage) -> Result<PathBuf> {
        if self.is_complete(stage) {
            Ok(self.artifact_dir(stage))
        } else {
            Err(Error::MissingArtifact(format!(
                "{} (run `{}` first)",
                stage.product(),
                stage.name()
            )))
        }
    }

    /// Runs one stage from scratch; upstream stages must already be complete.
    pub fn run_stage(&self, stage: Stage) -> Result<PathBuf> {
        if let Some(up) = stage.upstream() {
            self.require(up)?;
        }
        let dir = self.artifact_dir(stage);
        if dir.exists() {
            fs::remove_dir_all(&dir)?;
        }
        fs::create_dir_all(&dir)?;
        let mut info = match stage {
            Stage::Featurize => self.featurize(&dir)?,
            Stage::Sample => self.sample(&dir)?,
            Stage::TrainRbm => self.train_rbm(&dir)?,
            Stage::ExtractBof => self.extract_bof(&dir)?,
            Stage::Pretrain => self.pretrain(&dir)?,
            Stage::Finetune => self.finetune(&dir)?,
            Stage::Evaluate => self.evaluate(&dir)?,
            Stage::Predict => self.predict(&dir)?,
        };
        let mut entries = vec![
            ("stage", stage.name().to_string()),
            ("key", self.key(stage)),
            ("config_hash", self.section_hash(stage)),
            (
                "upstream",
                stage.upstream().map(|u| self.key(u)).unwrap_or_else(|| "-".into()),
            ),
        ];
        entries.append(&mut info);
        header::write(&dir.join(MARKER), &entries)?;
        Ok(dir)
    }

    /// Runs featurize through evaluate, skipping complete stages when
    /// `reuse` is set, and returns the test report.
    pub fn run_all(&self, reuse: bool) -> Result<(Report, Vec<StageOutcome>)> {
        let mut outcomes = Vec::new();
        for stage in &Stage::ALL[..7] {
            let reused = reuse && self.is_complete(*stage);
            let dir = if reused {
                self.artifact_dir(*stage)
            } else {
                self.run_stage(*stage)?
            };
            outcomes.push(StageOutcome {
                stage: *stage,
                dir,
                reused,
            });
        }
        Ok((self.load_report()?, outcomes))
    }

    fn featurize(&self, dir: &Path) -> Result<Vec<(&'static str, String)>> {
        fs::create_dir_all(dir.join("mel"))?;
        fs::create_dir_all(dir.join("odf"))?;
        let compression = self.config.dsp.compression;
        self.manifest
            .entries
            .par_iter()
            .map(|e| -> Result<()> {
                let clip = audio::load_clip(&e.audio_path)?;
                let (mel, odf) = dsp::featurize(&clip, compression)?;
                dbof::write(&dir.join("mel").join(format!("{}.dbof", e.clip_id)), &mel.values)?;
                dbof::write_vector(
                    &dir.join("odf").join(format!("{}.dbof", e.clip_id)),
                    &Array1::from(odf.strength),
                )
            })
            .collect::<Result<Vec<()>>>()?;
        Ok(vec![
            ("clips", self.manifest.entries.len().to_string()),
            ("compression", compression.to_string()),
            ("frame_rate", (SAMPLE_RATE as f64 / HOP as f64).to_string()),
        ])
    }

    /// Mel spectrograms and onset functions for the given manifest rows.
    pub fn load_features(&self, rows: &[usize]) -> Result<Vec<(MelSpectrogram, OnsetFunction)>> {
        let dir = self.require(Stage::Featurize)?;
        rows.par_iter()
            .map(|&i| {
                let id = &self.manifest.entries[i].clip_id;
                let values = dbof::read(&dir.join("mel").join(format!("{id}.dbof")))?;
                let strength = dbof::read_vector(&dir.join("odf").join(format!("{id}.dbof")))?.to_vec();
                Ok((
                    MelSpectrogram {
                        values,
                        frame_rate: SAMPLE_RATE as f64 / HOP as f64,
                        compression: self.config.dsp.compression,
                    },
                    OnsetFunction { strength },
                ))
            })
            .collect()
    }

    fn sample(&self, dir: &Path) -> Result<Vec<(&'static str, String)>> {
        let corpus = self.load_features(&self.manifest.indices(Split::Train))?;
        let x = build_training_set(
            &corpus,
            &self.config.sampling_policy(),
            self.config.sampling.target_count,
            self.stage_seed(Stage::Sample),
        )?;
        dbof::write(&dir.join("blocks.dbof"), &x)?;
        Ok(vec![("rows", x.nrows().to_string()), ("cols", x.ncols().to_string())])
    }

    fn train_rbm(&self, dir: &Path) -> Result<Vec<(&'static str, String)>> {
        let x = dbof::read(&self.require(Stage::Sample)?.join("blocks.dbof"))?;
        let whitening = fit_whitening(x.view(), self.config.whitening.retain)?;
        let white = whitening.apply(x.view())?;
        drop(x);
        let trained = train_rbm(white.view(), &self.config.rbm_config(self.stage_seed(Stage::TrainRbm)))?;
        whitening.save(&dir.join("whitening"))?;
        trained.model.save(&dir.join("rbm"))?;
        let mut trace = String::from("epoch\treconstruction_error\tmean_activation\n");
        for (e, (r, a)) in trained
            .reconstruction_error
            .iter()
            .zip(&trained.mean_activation)
            .enumerate()
        {
            trace.push_str(&format!("{e}\t{r:.6}\t{a:.6}\n"));
        }
        fs::write(dir.join("trace.tsv"), trace)?;
        Ok(vec![
            ("whitened_dim", whitening.output_dim().to_string()),
            (
                "final_mean_activation",
                format!("{:.6}", trained.mean_activation.last().copied().unwrap_or(0.0)),
            ),
        ])
    }

    pub fn load_feature_models(&self) -> Result<(WhiteningModel, RbmModel)> {
        let dir = self.require(Stage::TrainRbm)?;
        Ok((WhiteningModel::load(&dir.join("whitening"))?, RbmModel::load(&dir.join("rbm"))?))
    }

    fn extract_bof(&self, dir: &Path) -> Result<Vec<(&'static str, String)>> {
        let (whitening, rbm) = self.load_feature_models()?;
        let all: Vec<usize> = (0..self.manifest.entries.len()).collect();
        let features = self.load_features(&all)?;
        let rows: Vec<Array1<f64>> = features
            .par_iter()
            .map(|(mel, _)| {
                bag_of_features(
                    mel,
                    &whitening,
                    &rbm,
                    self.config.sampling.n_frames,
                    self.config.bof.pool_seconds,
                )
                .map(|b| b.values)
            })
            .collect::<Result<_>>()?;
        let mut table = Array2::zeros((rows.len(), rbm.n_hidden()));
        for (mut dst, src) in table.rows_mut().into_iter().zip(&rows) {
            dst.assign(src);
        }
        dbof::write(&dir.join("bof.dbof"), &table)?;
        let mut index = String::from("row\tclip_id\tsplit\n");
        for (i, e) in self.manifest.entries.iter().enumerate() {
            index.push_str(&format!("{i}\t{}\t{}\n", e.clip_id, e.split));
        }
        fs::write(dir.join("rows.tsv"), index)?;
        Ok(vec![("rows", table.nrows().to_string()), ("cols", table.ncols().to_string())])
    }

    /// Bag-of-features table, one row per manifest entry.
    pub fn load_bof(&self) -> Result<Array2<f64>> {
        dbof::read(&self.require(Stage::ExtractBof)?.join("bof.dbof"))
    }

    fn pretrain(&self, dir: &Path) -> Result<Vec<(&'static str, String)>> {
        if !self.config.pretrain.enabled {
            return Ok(vec![("enabled", "false".into())]);
        }
        let bof = self.load_bof()?;
        let train = bof.select(Axis(0), &self.manifest.indices(Split::Train));
        let stack = pretrain_stack(train.view(), &self.config.pretrain_config(self.stage_seed(Stage::Pretrain)))?;
        for (l, rbm) in stack.iter().enumerate() {
            rbm.save(&dir.join(format!("layer{l}")))?;
        }
        Ok(vec![("enabled", "true".into()), ("layers", stack.len().to_string())])
    }

    fn finetune(&self, dir: &Path) -> Result<Vec<(&'static str, String)>> {
        self.manifest.check_splits()?;
        let bof = self.load_bof()?;
        let (train, valid) = (self.manifest.indices(Split::Train), self.manifest.indices(Split::Valid));
        let mut rng = rng::seeded(rng::derive(self.stage_seed(Stage::Finetune), u64::MAX));
        let n_tags = self.manifest.n_tags();
        let init = if self.config.pretrain.enabled {
            let pre = self.require(Stage::Pretrain)?;
            let stack = (0..self.config.pretrain.hidden_sizes.len())
                .map(|l| RbmModel::load(&pre.join(format!("layer{l}"))))
                .collect::<Result<Vec<_>>>()?;
            DeepNet::from_stack(&stack, n_tags, &mut rng)?
        } else {
            DeepNet::random(
                bof.ncols(),
                &self.config.pretrain.hidden_sizes,
                n_tags,
                self.config.finetune.init_std,
                &mut rng,
            )
        };
        let result = finetune(
            init,
            bof.select(Axis(0), &train).view(),
            self.manifest.labels(&train).view(),
            bof.select(Axis(0), &valid).view(),
            self.manifest.labels(&valid).view(),
            &self.config.finetune_config(self.stage_seed(Stage::Finetune)),
        )?;
        result.net.save(&dir.join("net"))?;
        let mut history = String::from("epoch\ttrain_loss\tvalid_auc_t\n");
        for r in &result.history {
            history.push_str(&format!("{}\t{:.6}\t{:.6}\n", r.epoch, r.train_loss, r.valid_auc_tag));
        }
        fs::write(dir.join("history.tsv"), history)?;
        Ok(vec![
            ("init", if self.config.pretrain.enabled { "pretrained" } else { "random" }.into()),
            ("best_epoch", result.best_epoch.to_string()),
            ("epochs_run", result.history.len().to_string()),
        ])
    }

    pub fn load_net(&self) -> Result<DeepNet> {
        DeepNet::load(&self.require(Stage::Finetune)?.join("net"))
    }

    fn evaluate(&self, dir: &Path) -> Result<Vec<(&'static str, String)>> {
        let net = self.load_net()?;
        let test = self.manifest.indices(Split::Test);
        let bof = self.load_bof()?;
        let scores = net.predict(bof.select(Axis(0), &test).view());
        let report = eval::evaluate(scores.view(), self.manifest.labels(&test).view())?;
        fs::write(dir.join("report.tsv"), report.to_delimited())?;
        fs::write(dir.join("report.txt"), report.to_table())?;
        Ok(vec![("test_clips", test.len().to_string())])
    }

    /// Reads the delimited report written by `evaluate`.
    pub fn load_report(&self) -> Result<Report> {
        let path = self.require(Stage::Evaluate)?.join("report.tsv");
        let text = fs::read_to_string(&path)?;
        parse_report(&text).ok_or(Error::Format {
            path,
            message: "malformed report".into(),
        })
    }

    fn predict(&self, dir: &Path) -> Result<Vec<(&'static str, String)>> {
        let net = self.load_net()?;
        let scores = net.predict(self.load_bof()?.view());
        let mut text = format!("clip_id\tsplit\t{}\n", self.manifest.tag_vocabulary.join("\t"));
        for (e, row) in self.manifest.entries.iter().zip(scores.rows()) {
            text.push_str(&format!("{}\t{}\t{}\n", e.clip_id, e.split, format_row(row.iter().copied())));
        }
        fs::write(dir.join("predictions.tsv"), text)?;
        Ok(vec![("clips", scores.nrows().to_string())])
    }

    /// Tag probabilities for audio files outside the manifest, one row each.
    pub fn predict_files(&self, paths: &[PathBuf]) -> Result<Array2<f64>> {
        let (whitening, rbm) = self.load_feature_models()?;
        let net = self.load_net()?;
        let rows: Vec<Array1<f64>> = paths
            .par_iter()
            .map(|p| {
                let clip = audio::load_clip(p)?;
                let (mel, _) = dsp::featurize(&clip, self.config.dsp.compression)?;
                bag_of_features(
                    &mel,
                    &whitening,
                    &rbm,
                    self.config.sampling.n_frames,
                    self.config.bof.pool_seconds,
                )
                .map(|b| b.values)
            })
            .collect::<Result<_>>()?;
        let mut x = Array2::zeros((rows.len(), net.input_dim()));
        for (mut dst, src) in x.rows_mut().into_iter().zip(&rows) {
            dst.assign(src);
        }
        Ok(net.predict(x.view()))
    }
}

fn parse_report(text: &str) -> Option<Report> {
    let mut lines = text.lines();
    let head: Vec<&str> = lines.next()?.split('\t').collect();
    let vals: Vec<f64> = lines.next()?.split('\t').map(|v| v.parse().ok()).collect::<Option<_>>()?;
    if head.len() != vals.len() || head.len() < 2 {
        return None;
    }
    let summary = |mean| eval::AucSummary {
        mean,
        evaluated: 0,
        skipped: 0,
    };
    let precision = head[2..]
        .iter()
        .zip(&vals[2..])
        .map(|(h, &v)| Some((h.strip_prefix('p')?.parse().ok()?, v)))
        .collect::<Option<_>>()?;
    Some(Report {
        auc_tag: summary(vals[0]),
        auc_clip: summary(vals[1]),
        precision,
    })
}
