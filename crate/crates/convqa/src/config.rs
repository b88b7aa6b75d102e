//! Run configuration: defaults, a TOML file, then `--set key=value`
//! overrides, in increasing precedence.

use std::path::{Path, PathBuf};

use convqa_core::analysis::{AnalysisConfig, DEFAULT_BIN_WIDTH, DEFAULT_RETRIEVAL_THRESHOLD};
use convqa_core::generate::DEFAULT_USED_FRACTION;
use convqa_core::index::DEFAULT_TOP_K;
use convqa_core::rewrite::HistorySource;
use convqa_core::text::DEFAULT_BUDGET;
use convqa_core::{Bm25Params, GenerateMode, PipelineConfig, RewriteMode};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::client::{Endpoint, MODEL_URL_ENV};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    pub passages: PathBuf,
    pub conversations: PathBuf,
    pub index: PathBuf,
    pub output_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            passages: "passages.jsonl".into(),
            conversations: "conversations.jsonl".into(),
            index: "out/index.bin".into(),
            output_dir: "out".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewriteModeKey {
    None,
    Oracle,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewriteSection {
    pub mode: RewriteModeKey,
    pub history_source: HistorySource,
    /// Utterance window for mode `none`.
    pub h: usize,
    pub budget: usize,
}

impl Default for RewriteSection {
    fn default() -> Self {
        Self {
            mode: RewriteModeKey::None,
            history_source: HistorySource::QuestionsAndAnswers,
            h: 1,
            budget: DEFAULT_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerateSection {
    pub mode: GenerateMode,
    pub budget: usize,
    /// Passages retrieved per turn and offered to the generator.
    pub top_k: usize,
    pub used_fraction: f64,
}

impl Default for GenerateSection {
    fn default() -> Self {
        Self {
            mode: GenerateMode::Extractive,
            budget: DEFAULT_BUDGET,
            top_k: DEFAULT_TOP_K,
            used_fraction: DEFAULT_USED_FRACTION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    /// Base URL shared by `/rewrite` and `/generate`.
    pub url: Option<String>,
    pub timeout_ms: u64,
    pub retries: u32,
    pub backoff_ms: u64,
    pub concurrency: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        let e = Endpoint::new("");
        Self {
            url: None,
            timeout_ms: e.timeout_ms,
            retries: e.retries,
            backoff_ms: e.backoff_ms,
            concurrency: e.concurrency,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    /// Fixed rewrite-success threshold; the third quartile when unset.
    pub rewrite_threshold: Option<f64>,
    pub retrieval_threshold: f64,
    pub bin_width: f64,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            rewrite_threshold: None,
            retrieval_threshold: DEFAULT_RETRIEVAL_THRESHOLD,
            bin_width: DEFAULT_BIN_WIDTH,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Reserved; every stage is deterministic.
    pub seed: u64,
    pub paths: Paths,
    pub bm25: Bm25Params,
    pub rewrite: RewriteSection,
    pub generate: GenerateSection,
    pub model: ModelSection,
    pub analysis: AnalysisSection,
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl RunConfig {
    /// Loads `file` (if any) over the defaults, then applies `overrides` of
    /// the form `section.key=value`. Values parse as TOML and fall back to
    /// plain strings, so `rewrite.mode=oracle` needs no quoting.
    pub fn load(file: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table = toml::Table::try_from(RunConfig::default()).expect("defaults serialize");
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let from_file = text
                .parse::<toml::Table>()
                .map_err(|e| cfg_err(format!("{}: {e}", path.display())))?;
            merge(&mut table, from_file);
        }
        for item in overrides {
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| cfg_err(format!("--set expects key=value, got {item:?}")))?;
            set_path(&mut table, key.trim(), parse_value(raw.trim()))?;
        }
        let config: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| cfg_err(e.message().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.bm25.is_valid() {
            return Err(cfg_err("bm25.k1 must be >= 0 and bm25.b within [0, 1]"));
        }
        if self.rewrite.h == 0 {
            return Err(cfg_err("rewrite.h must be at least 1"));
        }
        if self.rewrite.budget == 0 || self.generate.budget == 0 {
            return Err(cfg_err("token budgets must be positive"));
        }
        if self.generate.top_k == 0 {
            return Err(cfg_err("generate.top_k must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.generate.used_fraction) {
            return Err(cfg_err("generate.used_fraction must be within [0, 1]"));
        }
        if self.model.timeout_ms == 0 {
            return Err(cfg_err("model.timeout_ms must be positive"));
        }
        if self.model.concurrency == 0 {
            return Err(cfg_err("model.concurrency must be at least 1"));
        }
        let a = &self.analysis;
        if !(a.retrieval_threshold.is_finite() && a.rewrite_threshold.is_none_or(f64::is_finite)) {
            return Err(cfg_err("analysis thresholds must be finite"));
        }
        let bins = 1.0 / a.bin_width;
        if !(a.bin_width > 0.0 && a.bin_width <= 1.0 && (bins - bins.round()).abs() < 1e-9) {
            return Err(cfg_err("analysis.bin_width must divide 1 evenly"));
        }
        Ok(())
    }

    pub fn pipeline(&self) -> PipelineConfig {
        let rewrite = match self.rewrite.mode {
            RewriteModeKey::None => RewriteMode::None { h: self.rewrite.h },
            RewriteModeKey::Oracle => RewriteMode::Oracle,
            RewriteModeKey::External => RewriteMode::External {
                source: self.rewrite.history_source,
            },
        };
        PipelineConfig {
            bm25: self.bm25,
            top_k: self.generate.top_k,
            rewrite,
            rewrite_budget: self.rewrite.budget,
            generate: self.generate.mode,
            generate_budget: self.generate.budget,
            used_fraction: self.generate.used_fraction,
        }
    }

    pub fn analysis_config(&self) -> AnalysisConfig {
        AnalysisConfig {
            rewrite_threshold: self.analysis.rewrite_threshold,
            retrieval_threshold: self.analysis.retrieval_threshold,
            bin_width: self.analysis.bin_width,
            ..AnalysisConfig::default()
        }
    }

    pub fn needs_model(&self) -> bool {
        self.rewrite.mode == RewriteModeKey::External || self.generate.mode == GenerateMode::External
    }

    /// The model endpoint, with `CONVQA_MODEL_URL` taking precedence over
    /// `model.url`.
    pub fn endpoint(&self) -> Result<Endpoint> {
        let url = std::env::var(MODEL_URL_ENV)
            .ok()
            .filter(|u| !u.is_empty())
            .or_else(|| self.model.url.clone())
            .ok_or_else(|| cfg_err(format!("external mode needs model.url or {MODEL_URL_ENV}")))?;
        Ok(Endpoint {
            url,
            timeout_ms: self.model.timeout_ms,
            retries: self.model.retries,
            backoff_ms: self.model.backoff_ms,
            concurrency: self.model.concurrency,
        })
    }

    /// SHA-256 over the settings that affect results. File locations and
    /// the model URL are left out so moving a run does not change it.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        let obj = v.as_object_mut().expect("config is an object");
        obj.remove("paths");
        if let Some(model) = obj.get_mut("model").and_then(|m| m.as_object_mut()) {
            model.remove("url");
        }
        // serde_json maps are ordered by key, so this is canonical.
        let digest = Sha256::digest(v.to_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Recursively overlays `top` onto `base`.
fn merge(base: &mut toml::Table, top: toml::Table) {
    for (key, value) in top {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|k| !k.is_empty()).ok_or_else(|| cfg_err(format!("empty key in --set {key:?}")))?;
    let mut cur = table;
    for part in parts {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| cfg_err(format!("--set {key}: {part:?} is not a section")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(file: Option<&str>, sets: &[&str]) -> Result<RunConfig> {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        if let Some(text) = file {
            std::fs::write(&path, text).unwrap();
        }
        let sets: Vec<String> = sets.iter().map(|s| s.to_string()).collect();
        RunConfig::load(file.map(|_| path.as_path()), &sets)
    }

    #[test]
    fn defaults_are_valid() {
        let c = load(None, &[]).unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.pipeline(), PipelineConfig::default());
    }

    #[test]
    fn cli_overrides_file() {
        let c = load(
            Some("[rewrite]\nmode = \"oracle\"\nh = 7\n[bm25]\nk1 = 1.2\n"),
            &["rewrite.h=3", "rewrite.mode=none", "generate.top_k=5"],
        )
        .unwrap();
        assert_eq!(c.pipeline().rewrite, RewriteMode::None { h: 3 });
        assert_eq!(c.bm25.k1, 1.2);
        assert_eq!(c.bm25.b, 0.68);
        assert_eq!(c.pipeline().top_k, 5);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(load(Some("[rewrite]\nwindow = 3\n"), &[]), Err(Error::Config(_))));
        assert!(matches!(load(None, &["bm25.k3=1"]), Err(Error::Config(_))));
        assert!(matches!(load(None, &["nonsense"]), Err(Error::Config(_))));
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(load(None, &["bm25.b=1.5"]).is_err());
        assert!(load(None, &["rewrite.h=0"]).is_err());
        assert!(load(None, &["analysis.bin_width=0.3"]).is_err());
        assert!(load(None, &["rewrite.history_source=\"x\""]).is_err());
    }

    #[test]
    fn hash_ignores_paths_only() {
        let a = load(None, &[]).unwrap();
        let b = load(None, &["paths.output_dir=elsewhere"]).unwrap();
        let c = load(None, &["rewrite.h=2"]).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
