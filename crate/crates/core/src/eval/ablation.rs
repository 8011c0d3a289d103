//! Ablation sweeps over token count, fusion weight and pipeline components.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::saliency::SaliencyNet;
use crate::train::{correlations, predict_clips, prepare_clips, train_saliency, train_vqa, SaliencyTrainConfig, VqaTrainConfig};
use crate::data::{SaliencySample, VideoClip};
use crate::vqa::{Readout, VqaConfig};

pub const TOKEN_GRID: [usize; 4] = [2, 4, 8, 16];
pub const ALPHA_GRID: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    SpatialOnly,
    TemporalOnly,
    SpatialSaliency,
    Full,
}

impl Component {
    pub const ALL: [Component; 4] = [
        Component::SpatialOnly,
        Component::TemporalOnly,
        Component::SpatialSaliency,
        Component::Full,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Component::SpatialOnly => "spatial-only",
            Component::TemporalOnly => "temporal-only",
            Component::SpatialSaliency => "spatial+saliency",
            Component::Full => "full",
        }
    }

    /// Saliency fusion and readout for this component set.
    pub fn apply(self, cfg: &mut VqaConfig) {
        let (sal, readout) = match self {
            Component::SpatialOnly => (false, Readout::SpatialOnly),
            Component::TemporalOnly => (false, Readout::TemporalOnly),
            Component::SpatialSaliency => (true, Readout::SpatialOnly),
            Component::Full => (true, Readout::Both),
        };
        cfg.use_saliency = sal;
        cfg.readout = readout;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationAxis {
    Tokens(Vec<usize>),
    Alpha(Vec<f64>),
    Components,
}

impl AblationAxis {
    pub fn tokens() -> Self {
        AblationAxis::Tokens(TOKEN_GRID.to_vec())
    }

    pub fn alpha() -> Self {
        AblationAxis::Alpha(ALPHA_GRID.to_vec())
    }

    pub fn name(&self) -> &'static str {
        match self {
            AblationAxis::Tokens(_) => "tokens",
            AblationAxis::Alpha(_) => "alpha",
            AblationAxis::Components => "components",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "tokens" => Some(Self::tokens()),
            "alpha" => Some(Self::alpha()),
            "components" => Some(Self::Components),
            _ => None,
        }
    }

    pub fn settings(&self) -> Vec<AblationSetting> {
        match self {
            AblationAxis::Tokens(ns) => ns.iter().map(|&n| AblationSetting::Tokens(n)).collect(),
            AblationAxis::Alpha(a) => a.iter().map(|&a| AblationSetting::Alpha(a)).collect(),
            AblationAxis::Components => Component::ALL.into_iter().map(AblationSetting::Component).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationSetting {
    Tokens(usize),
    Alpha(f64),
    Component(Component),
}

impl AblationSetting {
    pub fn label(&self) -> String {
        match self {
            AblationSetting::Tokens(n) => format!("tokens={n}"),
            AblationSetting::Alpha(a) => format!("alpha={a}"),
            AblationSetting::Component(c) => c.label().to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub axis: String,
    pub config: String,
    pub srcc: f64,
    pub plcc: f64,
}

/// Trains and scores one configuration, returning `(SRCC, PLCC)`.
pub trait AblationRunner {
    fn run(&mut self, setting: &AblationSetting) -> Result<(f64, f64)>;
}

impl<F: FnMut(&AblationSetting) -> Result<(f64, f64)>> AblationRunner for F {
    fn run(&mut self, setting: &AblationSetting) -> Result<(f64, f64)> {
        self(setting)
    }
}

/// One row per setting, in axis order. A failing run aborts the sweep with
/// the failing configuration attached.
pub fn sweep_ablation(axis: &AblationAxis, runner: &mut dyn AblationRunner) -> Result<Vec<AblationRow>> {
    axis.settings()
        .iter()
        .map(|s| {
            let (srcc, plcc) = runner.run(s).map_err(|e| Error::Ablation {
                config: s.label(),
                source: Box::new(e),
            })?;
            log::info!("{}: srcc {srcc:.4} plcc {plcc:.4}", s.label());
            Ok(AblationRow {
                axis: axis.name().to_string(),
                config: s.label(),
                srcc,
                plcc,
            })
        })
        .collect()
}

pub fn ablation_csv(rows: &[AblationRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::format("ablation csv", e))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::format("ablation csv", e))?;
    String::from_utf8(bytes).map_err(|e| Error::format("ablation csv", e))
}

/// Runs the real two-stage pipeline on in-memory data. Saliency networks are
/// trained once per token count and reused.
pub struct PipelineRunner {
    pub saliency_samples: Vec<SaliencySample>,
    pub train_clips: Vec<VideoClip>,
    pub eval_clips: Vec<VideoClip>,
    pub saliency: SaliencyTrainConfig,
    pub vqa: VqaTrainConfig,
    nets: BTreeMap<usize, SaliencyNet>,
}

impl PipelineRunner {
    pub fn new(
        saliency_samples: Vec<SaliencySample>,
        train_clips: Vec<VideoClip>,
        eval_clips: Vec<VideoClip>,
        saliency: SaliencyTrainConfig,
        vqa: VqaTrainConfig,
    ) -> Self {
        Self {
            saliency_samples,
            train_clips,
            eval_clips,
            saliency,
            vqa,
            nets: BTreeMap::new(),
        }
    }

    fn net(&mut self, tokens: usize) -> Result<&SaliencyNet> {
        if !self.nets.contains_key(&tokens) {
            let mut cfg = self.saliency.clone();
            cfg.model.tokens = tokens;
            let trained = train_saliency(&self.saliency_samples, &cfg)?;
            self.nets.insert(tokens, trained.net);
        }
        Ok(&self.nets[&tokens])
    }

    /// Trains the quality model under `vqa` with saliency from a `tokens`
    /// network, then scores the evaluation clips.
    pub fn score(&mut self, tokens: usize, vqa: &VqaTrainConfig) -> Result<(f64, f64)> {
        let net = if vqa.model.use_saliency {
            Some(self.net(tokens)?.clone())
        } else {
            None
        };
        let train = prepare_clips(&self.train_clips, net.as_ref())?;
        let eval = prepare_clips(&self.eval_clips, net.as_ref())?;
        let trained = train_vqa(&train, vqa)?;
        correlations(&predict_clips(&trained.model, &eval)?)
    }
}

impl AblationRunner for PipelineRunner {
    fn run(&mut self, setting: &AblationSetting) -> Result<(f64, f64)> {
        let mut vqa = self.vqa.clone();
        let mut tokens = self.saliency.model.tokens;
        match *setting {
            AblationSetting::Tokens(n) => tokens = n,
            AblationSetting::Alpha(a) => vqa.model.alpha = a,
            AblationSetting::Component(c) => c.apply(&mut vqa.model),
        }
        self.score(tokens, &vqa)
    }
}
