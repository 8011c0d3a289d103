use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{create_run_dir, load_config, write_file, write_json, CommonArgs, Outcome, Report, CONFIG_FILE, EXIT_OK,
    EXIT_VERIFICATION, REPORT_FILE};
use crate::data::checkpoint::{load_saliency_net, load_vqa_model, save_saliency_net, save_vqa_model};
use crate::data::dataset::{load_dataset, split_synthetic, write_dataset, DatasetSplits, Split};
use crate::data::{generate_synthetic, SaliencySample, SyntheticSpec};
use crate::error::{config_err, Error, Result};
use crate::eval::ablation::{ablation_csv, sweep_ablation, AblationAxis, PipelineRunner};
use crate::eval::embeddings::{embeddings_csv, export_register_embeddings, token_rows_csv};
use crate::eval::flops::{flops_estimate, vivit_dagr_ratio, CostModel, CostModelConfig, FlopsRow};
use crate::eval::stats::{paired_t_test, plcc, srcc, wilcoxon_signed_rank};
use crate::objectives::{auc_judd, cc_metric, nss};
use crate::saliency::SaliencyNet;
use crate::train::{correlations, predict_clips, prepare_clips, train_saliency, train_vqa, Prediction,
    SaliencyTrainConfig, VqaTrainConfig};
use crate::verify::{op_checks, pipeline_checks, CheckResult};

fn to_value(v: &impl Serialize) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::format("config", e))
}

fn csv_string<R: Serialize>(rows: &[R]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::format("csv", e))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::format("csv", e))?;
    String::from_utf8(bytes).map_err(|e| Error::format("csv", e))
}

/// Echoes the config, then runs `body` in the new run directory and writes
/// its report.
fn run_command<C: Serialize>(
    name: &str,
    common: &CommonArgs,
    seed: u64,
    cfg: &C,
    body: impl FnOnce(&Path, &mut Report) -> Result<i32>,
) -> Result<Outcome> {
    let config = to_value(cfg)?;
    let run_dir = create_run_dir(common, seed)?;
    write_json(&run_dir.join(CONFIG_FILE), &config)?;
    log::info!("{name}: run directory {}", run_dir.display());
    let mut report = Report::new(name, config, seed);
    let exit = body(&run_dir, &mut report)?;
    write_json(&run_dir.join(REPORT_FILE), &report)?;
    Ok(Outcome { report, run_dir, exit })
}

/// Either a dataset directory or an in-memory synthetic spec.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub dataset: Option<PathBuf>,
    pub synthetic: SyntheticSpec,
}

impl DataConfig {
    pub fn load(&self) -> Result<DatasetSplits> {
        match &self.dataset {
            Some(root) => load_dataset(root),
            None => {
                let data = generate_synthetic(&self.synthetic)?;
                Ok(split_synthetic(&self.synthetic, &data))
            }
        }
    }
}

fn non_empty<T>(items: &[T], what: &str) -> Result<()> {
    if items.is_empty() {
        return config_err(format!("{what} is empty"));
    }
    Ok(())
}

/// Mean NSS, CC and AUC-Judd of `net` over `samples`.
pub fn saliency_metrics(net: &SaliencyNet, samples: &[SaliencySample]) -> Result<(f64, f64, f64)> {
    non_empty(samples, "saliency evaluation set")?;
    let (mut n, mut c, mut a) = (0.0, 0.0, 0.0);
    for s in samples {
        let map = net.predict(&s.clip.frames)?.values.reshape(s.saliency.shape().to_vec())?;
        n += nss(&map, &s.fixations)?;
        c += cc_metric(&s.saliency, &map)?;
        a += auc_judd(&map, &s.fixations)?;
    }
    let k = samples.len() as f64;
    Ok((n / k, c / k, a / k))
}

// ---- train-saliency ----

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSaliencyConfig {
    pub seed: u64,
    pub data: DataConfig,
    pub train: SaliencyTrainConfig,
}

#[derive(Debug, Clone, Args)]
pub struct TrainSaliencyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub tokens: Option<usize>,
    #[arg(long)]
    pub token_dim: Option<usize>,
}

pub fn resolve_train_saliency(a: &TrainSaliencyArgs) -> Result<TrainSaliencyConfig> {
    let mut c: TrainSaliencyConfig = load_config(a.common.config.as_deref())?;
    c.seed = a.common.seed.unwrap_or(c.seed);
    if a.dataset.is_some() {
        c.data.dataset = a.dataset.clone();
    }
    let t = &mut c.train;
    t.lr = a.lr.unwrap_or(t.lr);
    t.batch_size = a.batch_size.unwrap_or(t.batch_size);
    t.epochs = a.epochs.unwrap_or(t.epochs);
    t.loss.gamma = a.gamma.unwrap_or(t.loss.gamma);
    t.model.tokens = a.tokens.unwrap_or(t.model.tokens);
    t.model.token_dim = a.token_dim.unwrap_or(t.model.token_dim);
    t.seed = c.seed;
    t.validate()?;
    Ok(c)
}

pub fn cmd_train_saliency(a: &TrainSaliencyArgs) -> Result<Outcome> {
    let cfg = resolve_train_saliency(a)?;
    run_command("train-saliency", &a.common, cfg.seed, &cfg, |dir, report| {
        let data = cfg.data.load()?;
        non_empty(&data.saliency.train, "saliency training split")?;
        let trained = train_saliency(&data.saliency.train, &cfg.train)?;
        save_saliency_net(&dir.join("checkpoint"), &trained.net, Value::Null)?;
        write_file(&dir.join("loss_curve.csv"), csv_string(&trained.history)?)?;
        let last = trained.history.last().copied().ok_or_else(|| Error::Degenerate("no epochs".into()))?;
        report.metric("final_kl", last.kl).metric("final_cc", last.cc).metric("final_total", last.total);
        if !data.saliency.val.is_empty() {
            let (n, c, auc) = saliency_metrics(&trained.net, &data.saliency.val)?;
            report.metric("val_nss", n).metric("val_cc", c).metric("val_auc_judd", auc);
        }
        Ok(EXIT_OK)
    })
}

// ---- train-vqa ----

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainVqaConfig {
    pub seed: u64,
    pub data: DataConfig,
    pub saliency_checkpoint: Option<PathBuf>,
    pub train: VqaTrainConfig,
}

#[derive(Debug, Clone, Args)]
pub struct TrainVqaArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub saliency_checkpoint: Option<PathBuf>,
    /// Train without saliency fusion.
    #[arg(long)]
    pub no_saliency: bool,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub min_lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub temperature: Option<f64>,
}

pub fn resolve_train_vqa(a: &TrainVqaArgs) -> Result<TrainVqaConfig> {
    let mut c: TrainVqaConfig = load_config(a.common.config.as_deref())?;
    c.seed = a.common.seed.unwrap_or(c.seed);
    if a.dataset.is_some() {
        c.data.dataset = a.dataset.clone();
    }
    if a.saliency_checkpoint.is_some() {
        c.saliency_checkpoint = a.saliency_checkpoint.clone();
    }
    let t = &mut c.train;
    if a.no_saliency {
        t.model.use_saliency = false;
    }
    t.lr = a.lr.unwrap_or(t.lr);
    t.min_lr = a.min_lr.unwrap_or(t.min_lr);
    t.batch_size = a.batch_size.unwrap_or(t.batch_size);
    t.epochs = a.epochs.unwrap_or(t.epochs);
    t.model.alpha = a.alpha.unwrap_or(t.model.alpha);
    t.loss.beta = a.beta.unwrap_or(t.loss.beta);
    t.loss.rank_temperature = a.temperature.unwrap_or(t.loss.rank_temperature);
    t.seed = c.seed;
    t.validate()?;
    if t.model.use_saliency && c.saliency_checkpoint.is_none() {
        return config_err("saliency fusion needs --saliency-checkpoint (or pass --no-saliency)");
    }
    Ok(c)
}

fn frozen_saliency(path: &Option<PathBuf>, wanted: bool) -> Result<Option<SaliencyNet>> {
    match (wanted, path) {
        (false, _) => Ok(None),
        (true, Some(p)) => Ok(Some(load_saliency_net(p)?)),
        (true, None) => config_err("model fuses saliency but no saliency checkpoint was given"),
    }
}

#[derive(Serialize)]
struct SplitPrediction<'a> {
    split: &'a str,
    video_id: &'a str,
    mos: f64,
    predicted: f64,
}

fn split_rows<'a>(split: &'a str, preds: &'a [Prediction]) -> impl Iterator<Item = SplitPrediction<'a>> {
    preds.iter().map(move |p| SplitPrediction { split, video_id: &p.video_id, mos: p.mos, predicted: p.predicted })
}

pub fn cmd_train_vqa(a: &TrainVqaArgs) -> Result<Outcome> {
    let cfg = resolve_train_vqa(a)?;
    run_command("train-vqa", &a.common, cfg.seed, &cfg, |dir, report| {
        let net = frozen_saliency(&cfg.saliency_checkpoint, cfg.train.model.use_saliency)?;
        let data = cfg.data.load()?;
        non_empty(&data.quality.train, "quality training split")?;
        let train = prepare_clips(&data.quality.train, net.as_ref())?;
        let val = prepare_clips(&data.quality.val, net.as_ref())?;
        let trained = train_vqa(&train, &cfg.train)?;
        save_vqa_model(&dir.join("checkpoint"), &trained.model, Value::Null)?;
        write_file(&dir.join("loss_curve.csv"), csv_string(&trained.history)?)?;

        let train_preds = predict_clips(&trained.model, &train)?;
        let val_preds = predict_clips(&trained.model, &val)?;
        let rows: Vec<SplitPrediction> =
            split_rows("train", &train_preds).chain(split_rows("val", &val_preds)).collect();
        write_file(&dir.join("predictions.csv"), csv_string(&rows)?)?;

        let last = trained.history.last().copied().ok_or_else(|| Error::Degenerate("no epochs".into()))?;
        report.metric("final_loss", last.loss).metric("final_l1", last.l1);
        let (s, p) = correlations(&train_preds)?;
        report.metric("train_srcc", s).metric("train_plcc", p);
        let vp: Vec<f64> = val_preds.iter().map(|r| r.predicted).collect();
        let vy: Vec<f64> = val_preds.iter().map(|r| r.mos).collect();
        report.metric_or_note("val_srcc", srcc(&vp, &vy));
        report.metric_or_note("val_plcc", plcc(&vp, &vy));
        Ok(EXIT_OK)
    })
}

// ---- eval ----

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub seed: u64,
    pub data: DataConfig,
    pub vqa_checkpoint: Option<PathBuf>,
    pub saliency_checkpoint: Option<PathBuf>,
    /// Second quality model for the paired tests; defaults to the first.
    pub compare_checkpoint: Option<PathBuf>,
    pub split: Split,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            data: DataConfig::default(),
            vqa_checkpoint: None,
            saliency_checkpoint: None,
            compare_checkpoint: None,
            split: Split::Test,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub vqa_checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub saliency_checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub compare_checkpoint: Option<PathBuf>,
    /// train, val or test.
    #[arg(long)]
    pub split: Option<String>,
}

pub fn resolve_eval(a: &EvalArgs) -> Result<EvalConfig> {
    let mut c: EvalConfig = load_config(a.common.config.as_deref())?;
    c.seed = a.common.seed.unwrap_or(c.seed);
    if a.dataset.is_some() {
        c.data.dataset = a.dataset.clone();
    }
    for (flag, slot) in [
        (&a.vqa_checkpoint, &mut c.vqa_checkpoint),
        (&a.saliency_checkpoint, &mut c.saliency_checkpoint),
        (&a.compare_checkpoint, &mut c.compare_checkpoint),
    ] {
        if flag.is_some() {
            *slot = flag.clone();
        }
    }
    if let Some(s) = &a.split {
        c.split = Split::parse(s).ok_or_else(|| Error::Config(format!("unknown split {s:?}")))?;
    }
    if c.vqa_checkpoint.is_none() {
        return config_err("eval needs --vqa-checkpoint");
    }
    Ok(c)
}

#[derive(Serialize)]
struct EvalRow<'a> {
    video_id: &'a str,
    mos: f64,
    predicted: f64,
    compared: f64,
}

/// Per-video absolute errors of two prediction sets.
fn abs_errors(p: &[Prediction]) -> Vec<f64> {
    p.iter().map(|r| (r.predicted - r.mos).abs()).collect()
}

/// Paired p-value where identical samples mean no evidence of a difference.
fn paired_p(a: &[f64], b: &[f64], test: fn(&[f64], &[f64]) -> Result<f64>) -> Result<f64> {
    if a == b {
        return Ok(1.0);
    }
    test(a, b)
}

pub fn cmd_eval(a: &EvalArgs) -> Result<Outcome> {
    let cfg = resolve_eval(a)?;
    run_command("eval", &a.common, cfg.seed, &cfg, |dir, report| {
        let vqa_path = cfg.vqa_checkpoint.as_ref().expect("resolved");
        let model = load_vqa_model(vqa_path)?;
        let compare = match &cfg.compare_checkpoint {
            Some(p) => load_vqa_model(p)?,
            None => model.clone(),
        };
        let wants_saliency = model.cfg.use_saliency || compare.cfg.use_saliency;
        let net = frozen_saliency(&cfg.saliency_checkpoint, wants_saliency)?;
        let net = match (net, &cfg.saliency_checkpoint) {
            (None, Some(p)) => Some(load_saliency_net(p)?),
            (n, _) => n,
        };
        let data = cfg.data.load()?;
        let clips = data.quality.get(cfg.split);
        if clips.len() < 2 {
            return config_err(format!("{} split has {} labelled clips, need 2", cfg.split.name(), clips.len()));
        }
        let prepared = prepare_clips(clips, net.as_ref())?;
        let preds = predict_clips(&model, &prepared)?;
        let other = predict_clips(&compare, &prepared)?;
        let rows: Vec<EvalRow> = preds
            .iter()
            .zip(&other)
            .map(|(p, o)| EvalRow {
                video_id: &p.video_id,
                mos: p.mos,
                predicted: p.predicted,
                compared: o.predicted,
            })
            .collect();
        write_file(&dir.join("predictions.csv"), csv_string(&rows)?)?;

        let p: Vec<f64> = preds.iter().map(|r| r.predicted).collect();
        let y: Vec<f64> = preds.iter().map(|r| r.mos).collect();
        report.metric("n", preds.len());
        report.metric_or_note("srcc", srcc(&p, &y));
        report.metric_or_note("plcc", plcc(&p, &y));
        let (ea, eb) = (abs_errors(&preds), abs_errors(&other));
        report.metric_or_note("paired_t_p", paired_p(&ea, &eb, paired_t_test));
        report.metric_or_note("wilcoxon_p", paired_p(&ea, &eb, wilcoxon_signed_rank));
        if let Some(net) = &net {
            let samples = data.saliency.get(cfg.split);
            if !samples.is_empty() {
                let (n, c, auc) = saliency_metrics(net, samples)?;
                report.metric("nss", n).metric("cc", c).metric("auc_judd", auc);
            }
        }
        Ok(EXIT_OK)
    })
}

// ---- flops ----

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlopsConfig {
    pub seed: u64,
    pub models: Vec<CostModel>,
    pub frames: Option<usize>,
    pub height: Option<usize>,
    pub width: Option<usize>,
    pub d: Option<usize>,
    pub g_f: Option<usize>,
}

impl Default for FlopsConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            models: CostModel::ALL.to_vec(),
            frames: None,
            height: None,
            width: None,
            d: None,
            g_f: None,
        }
    }
}

impl FlopsConfig {
    pub fn config_for(&self, m: CostModel) -> CostModelConfig {
        let c = m.default_config();
        CostModelConfig {
            frames: self.frames.unwrap_or(c.frames),
            height: self.height.unwrap_or(c.height),
            width: self.width.unwrap_or(c.width),
            d: self.d.unwrap_or(c.d),
            g_f: self.g_f.unwrap_or(c.g_f),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct FlopsArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// dagr, vivit, fastvqa or fastvqa_m; repeatable. Defaults to all four.
    #[arg(long = "model")]
    pub models: Vec<String>,
    #[arg(long)]
    pub frames: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub g_f: Option<usize>,
}

pub fn resolve_flops(a: &FlopsArgs) -> Result<FlopsConfig> {
    let mut c: FlopsConfig = load_config(a.common.config.as_deref())?;
    c.seed = a.common.seed.unwrap_or(c.seed);
    if !a.models.is_empty() {
        c.models = a
            .models
            .iter()
            .map(|m| CostModel::parse(m).ok_or_else(|| Error::Config(format!("unknown model {m:?}"))))
            .collect::<Result<_>>()?;
    }
    c.frames = a.frames.or(c.frames);
    c.height = a.height.or(c.height);
    c.width = a.width.or(c.width);
    c.d = a.d.or(c.d);
    c.g_f = a.g_f.or(c.g_f);
    for &m in &c.models {
        c.config_for(m).validate()?;
    }
    Ok(c)
}

pub fn cmd_flops(a: &FlopsArgs) -> Result<Outcome> {
    let cfg = resolve_flops(a)?;
    run_command("flops", &a.common, cfg.seed, &cfg, |dir, report| {
        let mut rows = Vec::new();
        for &m in &cfg.models {
            let c = cfg.config_for(m);
            let gflops = flops_estimate(m, &c)?;
            log::info!("{:<10} {:>8.1} GFLOPs", m.name(), gflops);
            report.metric(m.name(), gflops);
            rows.push(FlopsRow {
                model: m.name().to_string(),
                frames: c.frames,
                height: c.height,
                width: c.width,
                d: c.d,
                g_f: c.g_f,
                gflops,
            });
        }
        let defaults = [cfg.frames, cfg.height, cfg.width, cfg.d, cfg.g_f].iter().all(Option::is_none);
        if defaults {
            report.metric("vivit_dagr_ratio", vivit_dagr_ratio());
        }
        write_file(&dir.join("flops.csv"), csv_string(&rows)?)?;
        Ok(EXIT_OK)
    })
}

// ---- gradcheck ----

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckConfig {
    pub seed: u64,
    /// Number of randomized instances per check.
    pub seeds: u64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self { seed: 0, seeds: 5 }
    }
}

#[derive(Debug, Clone, Args)]
pub struct GradcheckArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub seeds: Option<u64>,
}

pub fn cmd_gradcheck(a: &GradcheckArgs) -> Result<Outcome> {
    let mut cfg: GradcheckConfig = load_config(a.common.config.as_deref())?;
    cfg.seed = a.common.seed.unwrap_or(cfg.seed);
    cfg.seeds = a.seeds.unwrap_or(cfg.seeds);
    if cfg.seeds == 0 {
        return config_err("--seeds must be at least 1");
    }
    run_command("gradcheck", &a.common, cfg.seed, &cfg, |dir, report| {
        let mut results = Vec::new();
        for s in 0..cfg.seeds {
            results.extend(run_suite_at(cfg.seed.wrapping_add(s))?);
        }
        write_file(&dir.join("gradcheck.csv"), csv_string(&results)?)?;
        let failed: Vec<String> =
            results.iter().filter(|r| !r.passed).map(|r| format!("{}@{}", r.name, r.seed)).collect();
        let worst = results.iter().map(|r| r.max_relative_error).fold(0.0, f64::max);
        report
            .metric("checks", results.len())
            .metric("failed", failed.len())
            .metric("worst_relative_error", worst)
            .metric("failures", failed.clone());
        if failed.is_empty() {
            Ok(EXIT_OK)
        } else {
            log::error!("gradient check failed: {}", failed.join(", "));
            Ok(EXIT_VERIFICATION)
        }
    })
}

fn run_suite_at(seed: u64) -> Result<Vec<CheckResult>> {
    let mut out = op_checks(seed)?;
    out.extend(pipeline_checks(seed)?);
    Ok(out)
}

// ---- synth ----

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub spec: SyntheticSpec,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Dataset directory; defaults to `dataset/` inside the run directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub num_videos: Option<usize>,
    #[arg(long)]
    pub frames: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
    #[arg(long)]
    pub width: Option<usize>,
}

pub fn resolve_synth(a: &SynthArgs) -> Result<SynthConfig> {
    let mut c: SynthConfig = load_config(a.common.config.as_deref())?;
    c.seed = a.common.seed.unwrap_or(c.seed);
    c.spec.seed = c.seed;
    c.spec.num_videos = a.num_videos.unwrap_or(c.spec.num_videos);
    c.spec.frames_per_video = a.frames.unwrap_or(c.spec.frames_per_video);
    c.spec.height = a.height.unwrap_or(c.spec.height);
    c.spec.width = a.width.unwrap_or(c.spec.width);
    c.spec.validate()?;
    Ok(c)
}

pub fn cmd_synth(a: &SynthArgs) -> Result<Outcome> {
    let cfg = resolve_synth(a)?;
    run_command("synth", &a.common, cfg.seed, &cfg, |dir, report| {
        let out = a.out.clone().unwrap_or_else(|| dir.join("dataset"));
        let data = generate_synthetic(&cfg.spec)?;
        write_dataset(&out, &cfg.spec, &data)?;
        report
            .metric("saliency_clips", data.saliency.len())
            .metric("quality_clips", data.quality.len());
        Ok(EXIT_OK)
    })
}

// ---- sweep ----

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub seed: u64,
    pub data: DataConfig,
    pub axis: AblationAxis,
    pub saliency: SaliencyTrainConfig,
    pub vqa: VqaTrainConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            data: DataConfig::default(),
            axis: AblationAxis::tokens(),
            saliency: SaliencyTrainConfig::default(),
            vqa: VqaTrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// tokens, alpha or components.
    #[arg(long)]
    pub axis: Option<String>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub saliency_epochs: Option<usize>,
    #[arg(long)]
    pub vqa_epochs: Option<usize>,
}

pub fn resolve_sweep(a: &SweepArgs) -> Result<SweepConfig> {
    let mut c: SweepConfig = load_config(a.common.config.as_deref())?;
    c.seed = a.common.seed.unwrap_or(c.seed);
    if let Some(axis) = &a.axis {
        c.axis = AblationAxis::parse(axis).ok_or_else(|| Error::Config(format!("unknown axis {axis:?}")))?;
    }
    if a.dataset.is_some() {
        c.data.dataset = a.dataset.clone();
    }
    c.saliency.epochs = a.saliency_epochs.unwrap_or(c.saliency.epochs);
    c.vqa.epochs = a.vqa_epochs.unwrap_or(c.vqa.epochs);
    c.saliency.seed = c.seed;
    c.vqa.seed = c.seed;
    c.saliency.validate()?;
    c.vqa.validate()?;
    Ok(c)
}

pub fn cmd_sweep(a: &SweepArgs) -> Result<Outcome> {
    let cfg = resolve_sweep(a)?;
    run_command("sweep", &a.common, cfg.seed, &cfg, |dir, report| {
        let data = cfg.data.load()?;
        let eval = data.quality.held_out();
        if eval.len() < 2 {
            return config_err("sweep needs at least two held-out labelled clips");
        }
        let mut runner = PipelineRunner::new(
            data.saliency.train.clone(),
            data.quality.train.clone(),
            eval,
            cfg.saliency.clone(),
            cfg.vqa.clone(),
        );
        let rows = sweep_ablation(&cfg.axis, &mut runner)?;
        write_file(&dir.join("ablation.csv"), ablation_csv(&rows)?)?;
        report.metric("rows", to_value(&rows)?);
        Ok(EXIT_OK)
    })
}

// ---- export-embeddings ----

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExportEmbeddingsConfig {
    pub seed: u64,
    pub data: DataConfig,
    pub saliency_checkpoint: Option<PathBuf>,
    /// One split, or every labelled clip when absent.
    pub split: Option<Split>,
}

#[derive(Debug, Clone, Args)]
pub struct ExportEmbeddingsArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub saliency_checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub split: Option<String>,
}

pub fn cmd_export_embeddings(a: &ExportEmbeddingsArgs) -> Result<Outcome> {
    let mut cfg: ExportEmbeddingsConfig = load_config(a.common.config.as_deref())?;
    cfg.seed = a.common.seed.unwrap_or(cfg.seed);
    if a.dataset.is_some() {
        cfg.data.dataset = a.dataset.clone();
    }
    if a.saliency_checkpoint.is_some() {
        cfg.saliency_checkpoint = a.saliency_checkpoint.clone();
    }
    if let Some(s) = &a.split {
        cfg.split = Some(Split::parse(s).ok_or_else(|| Error::Config(format!("unknown split {s:?}")))?);
    }
    let Some(ck) = cfg.saliency_checkpoint.clone() else {
        return config_err("export-embeddings needs --saliency-checkpoint");
    };
    run_command("export-embeddings", &a.common, cfg.seed, &cfg, |dir, report| {
        let net = load_saliency_net(&ck)?;
        let data = cfg.data.load()?;
        let clips = match cfg.split {
            Some(s) => data.quality.get(s).to_vec(),
            None => data.quality.all(),
        };
        let rows = export_register_embeddings(&net, &clips)?;
        write_file(&dir.join("embeddings.csv"), embeddings_csv(&rows)?)?;
        write_file(&dir.join("token_embeddings.csv"), token_rows_csv(&rows)?)?;
        report
            .metric("videos", rows.len())
            .metric("dim", net.cfg.token_dim)
            .metric("tokens", net.cfg.tokens);
        Ok(EXIT_OK)
    })
}
