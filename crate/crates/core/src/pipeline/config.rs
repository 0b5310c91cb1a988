//! TOML run configuration, one section per stage.
//!
//! ```toml
//! seed = 7
//!
//! [data]
//! manifest = "corpus/manifest.tsv"
//!
//! [sampling]
//! mode = "onset"
//! n_frames = 8
//!
//! [rbm]
//! n_hidden = 256
//! target_sparsity = 0.02
//!
//! [grid]
//! target_sparsity = [0.007, 0.01, 0.02, 0.03]
//! pool_seconds = [0.25, 0.5, 1.0, 2.0, 4.0]
//! weight_costs = "wc_inc"
//! ```
//!
//! Missing keys take their defaults. Relative paths resolve against the
//! config file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bof::POOL_SECONDS_GRID;
use crate::error::{Error, Result};
use crate::net::{FinetuneConfig, PretrainConfig};
use crate::rbm::RbmTrainConfig;
use crate::sampling::{SamplingMode, SamplingPolicy};
use crate::whitening::DEFAULT_RETAIN;

pub const RHO_GRID: [f64; 4] = [0.007, 0.01, 0.02, 0.03];
pub const WEIGHT_COST_GRID: [f64; 3] = [0.001, 0.01, 0.1];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Root seed; every stage derives its own.
    pub seed: u64,
    pub data: DataSection,
    pub dsp: DspSection,
    pub sampling: SamplingSection,
    pub whitening: WhiteningSection,
    pub rbm: RbmSection,
    pub bof: BofSection,
    pub pretrain: PretrainSection,
    pub finetune: FinetuneSection,
    pub grid: GridSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub manifest: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DspSection {
    pub compression: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingSection {
    pub mode: SamplingMode,
    pub blocks_per_second: f64,
    pub n_frames: usize,
    pub target_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WhiteningSection {
    pub retain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RbmSection {
    pub n_hidden: usize,
    pub target_sparsity: f64,
    pub sparsity_strength: f64,
    pub learning_rate: f64,
    pub weight_cost: f64,
    pub minibatch_size: usize,
    pub epochs: usize,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    pub momentum_switch_epoch: usize,
    pub initial_hidden_bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BofSection {
    pub pool_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PretrainSection {
    /// When false, fine-tuning starts from random weights.
    pub enabled: bool,
    pub hidden_sizes: Vec<usize>,
    pub weight_costs: Vec<f64>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub minibatch_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FinetuneSection {
    pub dropout_input: f64,
    pub dropout_hidden: f64,
    pub adadelta_decay: f64,
    pub adadelta_epsilon: f64,
    pub minibatch_size: usize,
    pub epochs: usize,
    pub early_stop_patience: usize,
    /// Weight std for random initialization.
    pub init_std: f64,
}

/// Sweep axes. Empty lists leave the base value alone.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub target_sparsity: Vec<f64>,
    pub pool_seconds: Vec<f64>,
    pub n_frames: Vec<usize>,
    pub sampling_mode: Vec<SamplingMode>,
    pub n_layers: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weight_costs: Option<WeightCostGrid>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightCostGrid {
    /// `"wc_inc"` or `"all"`.
    Named(String),
    Explicit(Vec<Vec<f64>>),
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            data: DataSection::default(),
            dsp: DspSection::default(),
            sampling: SamplingSection::default(),
            whitening: WhiteningSection::default(),
            rbm: RbmSection::default(),
            bof: BofSection::default(),
            pretrain: PretrainSection::default(),
            finetune: FinetuneSection::default(),
            grid: GridSection::default(),
        }
    }
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            manifest: PathBuf::from("manifest.tsv"),
        }
    }
}

impl Default for DspSection {
    fn default() -> Self {
        Self {
            compression: crate::dsp::DEFAULT_COMPRESSION,
        }
    }
}

impl Default for SamplingSection {
    fn default() -> Self {
        let p = SamplingPolicy::default();
        Self {
            mode: p.mode,
            blocks_per_second: p.blocks_per_second,
            n_frames: p.n_frames,
            target_count: 200_000,
        }
    }
}

impl Default for WhiteningSection {
    fn default() -> Self {
        Self { retain: DEFAULT_RETAIN }
    }
}

impl Default for RbmSection {
    fn default() -> Self {
        let c = RbmTrainConfig::default();
        Self {
            n_hidden: c.n_hidden,
            target_sparsity: c.target_sparsity,
            sparsity_strength: c.sparsity_strength,
            learning_rate: c.learning_rate,
            weight_cost: c.weight_cost,
            minibatch_size: c.minibatch_size,
            epochs: c.epochs,
            initial_momentum: c.initial_momentum,
            final_momentum: c.final_momentum,
            momentum_switch_epoch: c.momentum_switch_epoch,
            initial_hidden_bias: c.initial_hidden_bias,
        }
    }
}

impl Default for BofSection {
    fn default() -> Self {
        Self { pool_seconds: 1.0 }
    }
}

impl Default for PretrainSection {
    fn default() -> Self {
        let c = PretrainConfig::default();
        Self {
            enabled: true,
            hidden_sizes: c.hidden_sizes,
            weight_costs: c.weight_costs,
            learning_rate: c.learning_rate,
            epochs: c.epochs,
            minibatch_size: c.minibatch_size,
        }
    }
}

impl Default for FinetuneSection {
    fn default() -> Self {
        let c = FinetuneConfig::default();
        Self {
            dropout_input: c.dropout_input,
            dropout_hidden: c.dropout_hidden,
            adadelta_decay: c.adadelta_decay,
            adadelta_epsilon: c.adadelta_epsilon,
            minibatch_size: c.minibatch_size,
            epochs: c.epochs,
            early_stop_patience: c.early_stop_patience,
            init_std: 0.01,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Parses a config file and anchors `data.manifest` at its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut config = Self::from_toml(&text)?;
        if config.data.manifest.is_relative() {
            if let Some(dir) = path.parent() {
                config.data.manifest = dir.join(&config.data.manifest);
            }
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.dsp.compression > 0.0) {
            return bad(format!("dsp.compression must be positive, got {}", self.dsp.compression));
        }
        self.sampling_policy().validate()?;
        if self.sampling.target_count == 0 {
            return bad("sampling.target_count must be positive".into());
        }
        if !(self.whitening.retain > 0.0 && self.whitening.retain <= 1.0) {
            return bad(format!("whitening.retain must be in (0, 1], got {}", self.whitening.retain));
        }
        self.rbm_config(0).validate()?;
        if !POOL_SECONDS_GRID.contains(&self.bof.pool_seconds) {
            return bad(format!(
                "bof.pool_seconds must be one of {POOL_SECONDS_GRID:?}, got {}",
                self.bof.pool_seconds
            ));
        }
        let layers = self.pretrain.hidden_sizes.len();
        if !(1..=3).contains(&layers) || self.pretrain.hidden_sizes.contains(&0) {
            return bad("pretrain.hidden_sizes must list 1 to 3 positive sizes".into());
        }
        if self.pretrain.weight_costs.len() != layers {
            return Err(Error::WeightCostCount {
                layers,
                got: self.pretrain.weight_costs.len(),
            });
        }
        if self.pretrain.weight_costs.iter().any(|&w| !(w >= 0.0)) {
            return bad("pretrain.weight_costs must be non-negative".into());
        }
        if !(self.pretrain.learning_rate > 0.0) || self.pretrain.minibatch_size == 0 {
            return bad("pretrain.learning_rate and minibatch_size must be positive".into());
        }
        if !(self.finetune.init_std > 0.0) {
            return bad("finetune.init_std must be positive".into());
        }
        self.finetune_config(0).validate()
    }

    pub fn sampling_policy(&self) -> SamplingPolicy {
        SamplingPolicy {
            mode: self.sampling.mode,
            blocks_per_second: self.sampling.blocks_per_second,
            n_frames: self.sampling.n_frames,
        }
    }

    pub fn rbm_config(&self, seed: u64) -> RbmTrainConfig {
        let r = &self.rbm;
        RbmTrainConfig {
            learning_rate: r.learning_rate,
            weight_cost: r.weight_cost,
            sparsity_strength: r.sparsity_strength,
            minibatch_size: r.minibatch_size,
            epochs: r.epochs,
            initial_momentum: r.initial_momentum,
            final_momentum: r.final_momentum,
            momentum_switch_epoch: r.momentum_switch_epoch,
            initial_hidden_bias: r.initial_hidden_bias,
            seed,
            ..RbmTrainConfig::sparse_gaussian(r.n_hidden, r.target_sparsity)
        }
    }

    pub fn pretrain_config(&self, seed: u64) -> PretrainConfig {
        let p = &self.pretrain;
        PretrainConfig {
            hidden_sizes: p.hidden_sizes.clone(),
            weight_costs: p.weight_costs.clone(),
            learning_rate: p.learning_rate,
            epochs: p.epochs,
            minibatch_size: p.minibatch_size,
            seed,
        }
    }

    pub fn finetune_config(&self, seed: u64) -> FinetuneConfig {
        let f = &self.finetune;
        FinetuneConfig {
            dropout_input: f.dropout_input,
            dropout_hidden: f.dropout_hidden,
            adadelta_decay: f.adadelta_decay,
            adadelta_epsilon: f.adadelta_epsilon,
            minibatch_size: f.minibatch_size,
            epochs: f.epochs,
            early_stop_patience: f.early_stop_patience,
            seed,
        }
    }

    /// Cartesian product of every non-empty grid axis, in a fixed order.
    /// The returned configs have an empty grid.
    pub fn expand_grid(&self) -> Result<Vec<PipelineConfig>> {
        let mut base = self.clone();
        base.grid = GridSection::default();
        let mut out = vec![base];
        let g = &self.grid;
        fn axis<T: Clone>(
            out: Vec<PipelineConfig>,
            values: &[T],
            set: impl Fn(&mut PipelineConfig, &T),
        ) -> Vec<PipelineConfig> {
            if values.is_empty() {
                return out;
            }
            let mut expanded = Vec::with_capacity(out.len() * values.len());
            for c in out {
                for v in values {
                    let mut c = c.clone();
                    set(&mut c, v);
                    expanded.push(c);
                }
            }
            expanded
        }
        out = axis(out, &g.sampling_mode, |c, v| c.sampling.mode = *v);
        out = axis(out, &g.n_frames, |c, v| c.sampling.n_frames = *v);
        out = axis(out, &g.target_sparsity, |c, v| c.rbm.target_sparsity = *v);
        out = axis(out, &g.pool_seconds, |c, v| c.bof.pool_seconds = *v);
        out = axis(out, &g.n_layers, |c, v| {
            let size = c.pretrain.hidden_sizes.first().copied().unwrap_or(512);
            c.pretrain.hidden_sizes = vec![size; *v];
            c.pretrain.weight_costs.resize(*v, *c.pretrain.weight_costs.last().unwrap_or(&0.001));
        });
        out = match &g.weight_costs {
            None => out,
            Some(WeightCostGrid::Explicit(list)) => axis(out, list, |c, v| c.pretrain.weight_costs = v.clone()),
            Some(WeightCostGrid::Named(name)) => {
                let full = name == "all";
                if !full && name != "wc_inc" {
                    return Err(Error::Config(format!(
                        "grid.weight_costs must be \"wc_inc\", \"all\" or a list, got \"{name}\""
                    )));
                }
                out.into_iter()
                    .flat_map(|c| {
                        let n = c.pretrain.hidden_sizes.len();
                        let schedules = if full { all_schedules(n) } else { wc_inc_schedules(n) };
                        schedules.into_iter().map(move |s| {
                            let mut c = c.clone();
                            c.pretrain.weight_costs = s;
                            c
                        })
                    })
                    .collect()
            }
        };
        for c in &out {
            c.validate()?;
        }
        Ok(out)
    }
}

/// Every weight-cost tuple over the grid, bottom layer first.
pub fn all_schedules(n_layers: usize) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n_layers {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<f64>| {
                WEIGHT_COST_GRID.iter().map(move |&w| {
                    let mut p = prefix.clone();
                    p.push(w);
                    p
                })
            })
            .collect();
    }
    out
}

/// Weight-cost tuples that start at the smallest grid value and never
/// decrease going up the stack.
pub fn wc_inc_schedules(n_layers: usize) -> Vec<Vec<f64>> {
    all_schedules(n_layers)
        .into_iter()
        .filter(|s| s.first() == Some(&WEIGHT_COST_GRID[0]) && s.windows(2).all(|w| w[0] <= w[1]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = PipelineConfig::default();
        c.validate().unwrap();
        assert_eq!(PipelineConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn partial_sections_fill_defaults() {
        let c = PipelineConfig::from_toml("seed = 3\n[rbm]\nn_hidden = 64\n[sampling]\nmode = \"random\"\n").unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.rbm.n_hidden, 64);
        assert_eq!(c.rbm.target_sparsity, 0.02);
        assert_eq!(c.sampling.mode, SamplingMode::Random);
    }

    #[test]
    fn out_of_domain_values_are_rejected() {
        for text in [
            "[sampling]\nn_frames = 7\n",
            "[bof]\npool_seconds = 3.0\n",
            "[whitening]\nretain = 1.5\n",
            "[pretrain]\nhidden_sizes = [8, 8]\nweight_costs = [0.001]\n",
            "[finetune]\ndropout_hidden = 1.0\n",
            "[rbm]\nbogus = 1\n",
        ] {
            assert!(PipelineConfig::from_toml(text).is_err(), "{text}");
        }
    }

    #[test]
    fn wc_inc_counts() {
        assert_eq!(wc_inc_schedules(1), vec![vec![0.001]]);
        assert_eq!(wc_inc_schedules(2).len(), 3);
        assert_eq!(wc_inc_schedules(3).len(), 6);
        assert_eq!(all_schedules(3).len(), 27);
        for s in wc_inc_schedules(3) {
            assert!(s.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn grid_expands_as_cartesian_product() {
        let text = "[grid]\ntarget_sparsity = [0.007, 0.01, 0.02, 0.03]\npool_seconds = [0.25, 0.5, 1.0, 2.0, 4.0]\nweight_costs = \"wc_inc\"\n";
        let c = PipelineConfig::from_toml(text).unwrap();
        let all = c.expand_grid().unwrap();
        assert_eq!(all.len(), 4 * 5 * 6);
        assert!(all.iter().all(|c| c.grid == GridSection::default()));
        assert_eq!(all[0].rbm.target_sparsity, 0.007);
        assert_eq!(all[0].pretrain.weight_costs, vec![0.001, 0.001, 0.001]);
    }

    #[test]
    fn explicit_weight_cost_grid_and_layer_axis() {
        let text = "[grid]\nn_layers = [1, 2]\nweight_costs = [[0.1, 0.001]]\n";
        let err = PipelineConfig::from_toml(text).unwrap().expand_grid();
        // the 1-layer variant cannot take a 2-entry schedule
        assert!(matches!(err, Err(Error::WeightCostCount { .. })));
        let ok = PipelineConfig::from_toml("[grid]\nn_layers = [1, 2, 3]\nweight_costs = \"all\"\n")
            .unwrap()
            .expand_grid()
            .unwrap();
        assert_eq!(ok.len(), 3 + 9 + 27);
    }
}
