use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::encoder::EncoderConfig;
use crate::error::{Error, Result};
use crate::scan::ScanConfig;
use crate::seed::derive_seed;

/// Every tunable of a run, read from a flat `key = value` TOML file.
///
/// `out` is where artifacts go; it is left out of the serialized form so
/// manifests do not depend on the directory a run happens to live in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Event log read by `ingest`.
    pub dataset: Option<PathBuf>,
    /// Name used for label unification tables, layouts and sessions.
    pub dataset_id: String,
    #[serde(skip)]
    pub out: PathBuf,
    pub seed: u64,

    pub l: usize,
    pub stride: usize,
    pub sample_fraction: f64,
    pub train_ratio: f64,
    pub temperature_bin_width: f64,

    pub embed_dim: usize,
    pub num_layers: usize,
    pub num_heads: usize,
    /// 0 means four times `embed_dim`.
    pub feedforward_dim: usize,
    pub mask_fraction: f64,
    pub pretrain_epochs: usize,
    pub pretrain_learning_rate: f64,
    pub pretrain_momentum: f64,
    /// 0 disables clipping.
    pub pretrain_grad_clip: f64,
    pub pretrain_batch_size: usize,

    pub h: usize,

    pub k: usize,
    pub lambda: f64,
    pub scan_epochs: usize,
    pub scan_learning_rate: f64,
    pub scan_encoder_learning_rate: f64,
    pub scan_update_encoder: bool,
    pub scan_warmup_epochs: usize,
    pub scan_heads: usize,
    pub scan_momentum: f64,
    /// 0 disables clipping.
    pub scan_grad_clip: f64,
    pub scan_batch_size: usize,

    pub kmeans_max_iters: usize,

    pub m: usize,
    pub raters: usize,
    pub session_id: String,
    /// Label hierarchy JSON; the bundled tree when unset.
    pub hierarchy: Option<PathBuf>,
    /// House layout JSON copied next to the session; `synth` writes its own.
    pub layout: Option<PathBuf>,
    /// Native-to-unified label table; the bundled table for known datasets when unset.
    pub label_map: Option<PathBuf>,

    /// Keep windows whose truth is "No Label" in evaluation and trends.
    pub include_unlabeled: bool,
    pub bootstrap_replicates: usize,
    pub sweep_k: Vec<usize>,

    pub trend_period1_start: Option<NaiveDate>,
    pub trend_period1_end: Option<NaiveDate>,
    pub trend_period2_start: Option<NaiveDate>,
    pub trend_period2_end: Option<NaiveDate>,

    /// Generator settings for `synth`; the bundled household when unset.
    pub synth_config: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let scan = ScanConfig::default();
        Self {
            dataset: None,
            dataset_id: "synthetic".into(),
            out: PathBuf::from("out"),
            seed: 0,
            l: 20,
            stride: 1,
            sample_fraction: 0.1,
            train_ratio: 0.8,
            temperature_bin_width: crate::corpus::DEFAULT_TEMPERATURE_BIN_WIDTH,
            embed_dim: 64,
            num_layers: 2,
            num_heads: 4,
            feedforward_dim: 0,
            mask_fraction: 0.15,
            pretrain_epochs: 10,
            pretrain_learning_rate: 0.05,
            pretrain_momentum: 0.0,
            pretrain_grad_clip: 1.0,
            pretrain_batch_size: 32,
            h: 20,
            k: scan.k,
            lambda: scan.lambda,
            scan_epochs: scan.epochs,
            scan_learning_rate: scan.learning_rate,
            scan_encoder_learning_rate: scan.encoder_learning_rate,
            scan_update_encoder: scan.update_encoder,
            scan_warmup_epochs: scan.head_warmup_epochs,
            scan_heads: scan.heads,
            scan_momentum: scan.momentum,
            scan_grad_clip: scan.grad_clip.unwrap_or(0.0),
            scan_batch_size: scan.batch_size,
            kmeans_max_iters: 100,
            m: 5,
            raters: 2,
            session_id: "session".into(),
            hierarchy: None,
            layout: None,
            label_map: None,
            include_unlabeled: false,
            bootstrap_replicates: crate::evalmap::DEFAULT_REPLICATES,
            sweep_k: vec![10, 15, 20, 30, 40, 50, 60, 100],
            trend_period1_start: None,
            trend_period1_end: None,
            trend_period2_start: None,
            trend_period2_end: None,
            synth_config: None,
        }
    }
}

/// Seed streams handed to the individual stages.
#[derive(Debug, Clone, Copy)]
pub(crate) enum SeedStream {
    Split = 1,
    Sample,
    Encoder,
    Scan,
    KMeans,
    Session,
    Bootstrap,
}

fn clip(v: f64) -> Option<f64> {
    (v > 0.0).then_some(v)
}

fn parse_override(raw: &str) -> Result<(String, toml::Value)> {
    let (key, value) = raw
        .split_once('=')
        .ok_or_else(|| Error::invalid(format!("override `{raw}` is not key=value")))?;
    let key = key.trim().to_string();
    let value = value.trim();
    let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    Ok((key, parsed))
}

impl PipelineConfig {
    /// Parses a TOML document and applies `key=value` overrides on top.
    pub fn from_toml_with(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::Format {
            what: "config",
            detail: e.to_string(),
        })?;
        for raw in overrides {
            let (key, value) = parse_override(raw)?;
            table.insert(key, value);
        }
        let config: Self = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| Error::Format {
            what: "config",
            detail: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    /// Reads `path` (if any), applies overrides and sets the output directory.
    pub fn load(path: Option<&Path>, overrides: &[String], out: &Path) -> Result<Self> {
        let text = match path {
            Some(p) => crate::io::read_string(p)?,
            None => String::new(),
        };
        let mut config = Self::from_toml_with(&text, overrides)?;
        config.out = out.to_path_buf();
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::invalid(msg));
        if self.l == 0 || self.stride == 0 {
            return fail("l and stride must be positive".into());
        }
        if !(self.sample_fraction > 0.0 && self.sample_fraction <= 1.0) {
            return fail(format!("sample_fraction must lie in (0, 1], got {}", self.sample_fraction));
        }
        if !(self.train_ratio > 0.0 && self.train_ratio < 1.0) {
            return fail(format!("train_ratio must lie in (0, 1), got {}", self.train_ratio));
        }
        if self.h == 0 || self.m == 0 || self.raters == 0 {
            return fail("h, m and raters must be positive".into());
        }
        if self.sweep_k.iter().any(|&k| k < 2) {
            return fail("every sweep_k entry must be at least 2".into());
        }
        if self.session_id.is_empty() || !self.session_id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
            return fail(format!("session_id `{}` must be non-empty [A-Za-z0-9_-]", self.session_id));
        }
        self.encoder_config(1).architecture().validate()?;
        self.encoder_config(1).validate()?;
        self.scan_config(self.k).validate()
    }

    pub(crate) fn seed_for(&self, stream: SeedStream) -> u64 {
        derive_seed(self.seed, &[stream as u64])
    }

    pub fn encoder_config(&self, vocab_size: usize) -> EncoderConfig {
        let mut c = EncoderConfig::new(vocab_size, self.l);
        c.embed_dim = self.embed_dim;
        c.num_layers = self.num_layers;
        c.num_heads = self.num_heads;
        c.feedforward_dim = if self.feedforward_dim == 0 { 4 * self.embed_dim } else { self.feedforward_dim };
        c.mask_fraction = self.mask_fraction;
        c.learning_rate = self.pretrain_learning_rate;
        c.momentum = self.pretrain_momentum;
        c.grad_clip = clip(self.pretrain_grad_clip);
        c.epochs = self.pretrain_epochs;
        c.batch_size = self.pretrain_batch_size;
        c.seed = self.seed_for(SeedStream::Encoder);
        c
    }

    pub fn scan_config(&self, k: usize) -> ScanConfig {
        ScanConfig {
            k,
            lambda: self.lambda,
            epochs: self.scan_epochs,
            learning_rate: self.scan_learning_rate,
            encoder_learning_rate: self.scan_encoder_learning_rate,
            update_encoder: self.scan_update_encoder,
            head_warmup_epochs: self.scan_warmup_epochs,
            heads: self.scan_heads,
            momentum: self.scan_momentum,
            grad_clip: clip(self.scan_grad_clip),
            batch_size: self.scan_batch_size,
            neighbors_per_anchor: 1,
            seed: derive_seed(self.seed_for(SeedStream::Scan), &[k as u64]),
        }
    }
}
