//! Application configuration: defaults, then a TOML file, then
//! `EXPLAINREC_*` environment variables, then command-line flags.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aspects::{self, AspectExample};
use crate::embedding::{EmbeddingProvider, HashEmbedder, HttpEmbedder, DEFAULT_EMBEDDING_MODEL, DEFAULT_K};
use crate::evaluation::CriterionSet;
use crate::llm::{
    AuditLog, Gateway, GenerationParams, HttpProvider, ScriptedProvider, TextProvider, DEFAULT_MODEL_ID,
    DEFAULT_TEMPERATURE, DEFAULT_TOP_P,
};
use crate::prompts::TemplateSet;

const ENV_PREFIX: &str = "EXPLAINREC_";
const REDACTED: &str = "***";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config file {path}: {message}")]
    File { path: String, message: String },
    #[error("environment variable {var}: {message}")]
    Env { var: String, message: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AppConfig {
    pub llm_endpoint: Option<String>,
    pub llm_api_key: Option<String>,
    /// JSON script for the offline provider; takes precedence over the endpoint.
    pub llm_script: Option<PathBuf>,
    pub model_id: String,
    pub embedding_backend: String,
    pub embedding_endpoint: Option<String>,
    pub embedding_api_key: Option<String>,
    pub temperature: f64,
    pub top_p: f64,
    pub k: usize,
    pub template_version: String,
    pub template_dir: Option<PathBuf>,
    pub priming_examples: Option<PathBuf>,
    pub criteria: Vec<String>,
    pub data_dir: PathBuf,
    pub catalog_path: Option<PathBuf>,
    pub history_path: Option<PathBuf>,
    pub index_path: Option<PathBuf>,
    pub aspect_cache_path: Option<PathBuf>,
    pub explanations_path: Option<PathBuf>,
    pub ratings_path: Option<PathBuf>,
    pub audit_path: Option<PathBuf>,
    pub listen: String,
    pub request_timeout_secs: u64,
}

impl Default for AppConfig {
    fn default() -> Self {
        Self {
            llm_endpoint: None,
            llm_api_key: None,
            llm_script: None,
            model_id: DEFAULT_MODEL_ID.into(),
            embedding_backend: DEFAULT_EMBEDDING_MODEL.into(),
            embedding_endpoint: None,
            embedding_api_key: None,
            temperature: DEFAULT_TEMPERATURE,
            top_p: DEFAULT_TOP_P,
            k: DEFAULT_K,
            template_version: "v1".into(),
            template_dir: None,
            priming_examples: None,
            criteria: CriterionSet::default().names().to_vec(),
            data_dir: PathBuf::from("data"),
            catalog_path: None,
            history_path: None,
            index_path: None,
            aspect_cache_path: None,
            explanations_path: None,
            ratings_path: None,
            audit_path: None,
            listen: "127.0.0.1:8080".into(),
            request_timeout_secs: 60,
        }
    }
}

/// Command-line overrides; each flag mirrors an [`AppConfig`] field.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct ConfigFlags {
    #[arg(long, global = true)]
    pub llm_endpoint: Option<String>,
    #[arg(long, global = true)]
    pub llm_script: Option<PathBuf>,
    #[arg(long, global = true)]
    pub model_id: Option<String>,
    #[arg(long, global = true)]
    pub embedding_backend: Option<String>,
    #[arg(long, global = true)]
    pub embedding_endpoint: Option<String>,
    #[arg(long, global = true)]
    pub temperature: Option<f64>,
    #[arg(long, global = true)]
    pub top_p: Option<f64>,
    #[arg(long, global = true)]
    pub k: Option<usize>,
    #[arg(long, global = true)]
    pub template_version: Option<String>,
    #[arg(long, global = true)]
    pub template_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub priming_examples: Option<PathBuf>,
    #[arg(long, global = true)]
    pub data_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub catalog_path: Option<PathBuf>,
    #[arg(long, global = true)]
    pub history_path: Option<PathBuf>,
    #[arg(long, global = true)]
    pub index_path: Option<PathBuf>,
    #[arg(long, global = true)]
    pub aspect_cache_path: Option<PathBuf>,
    #[arg(long, global = true)]
    pub explanations_path: Option<PathBuf>,
    #[arg(long, global = true)]
    pub ratings_path: Option<PathBuf>,
    #[arg(long, global = true)]
    pub audit_path: Option<PathBuf>,
    #[arg(long, global = true)]
    pub listen: Option<String>,
}

macro_rules! override_fields {
    ($cfg:expr, $src:expr, plain: [$($p:ident),*], optional: [$($o:ident),*]) => {{
        $(if let Some(v) = $src.$p.clone() { $cfg.$p = v; })*
        $(if let Some(v) = $src.$o.clone() { $cfg.$o = Some(v); })*
    }};
}

impl AppConfig {
    /// Defaults, then `file` (if any), then the process environment.
    pub fn load(file: Option<&Path>) -> Result<Self, ConfigError> {
        let mut cfg = match file {
            Some(path) => Self::from_toml_file(path)?,
            None => Self::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok())?;
        Ok(cfg)
    }

    pub fn from_toml_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::File {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        toml::from_str(&text).map_err(|e| ConfigError::File {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    /// Applies `EXPLAINREC_<FIELD>` variables found through `lookup`.
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        fn parse<T: std::str::FromStr>(var: &str, raw: &str) -> Result<T, ConfigError>
        where
            T::Err: std::fmt::Display,
        {
            raw.parse().map_err(|e: T::Err| ConfigError::Env {
                var: var.to_string(),
                message: e.to_string(),
            })
        }
        let get = |name: &str| {
            let var = format!("{ENV_PREFIX}{}", name.to_ascii_uppercase());
            lookup(&var).map(|v| (var, v))
        };
        macro_rules! env_str {
            ($($f:ident),*) => {$( if let Some((_, v)) = get(stringify!($f)) { self.$f = v.into(); } )*};
        }
        macro_rules! env_opt {
            ($($f:ident),*) => {$( if let Some((_, v)) = get(stringify!($f)) { self.$f = Some(v.into()); } )*};
        }
        macro_rules! env_parse {
            ($($f:ident),*) => {$( if let Some((var, v)) = get(stringify!($f)) { self.$f = parse(&var, &v)?; } )*};
        }
        env_str!(model_id, embedding_backend, template_version, data_dir, listen);
        env_opt!(
            llm_endpoint, llm_api_key, llm_script, embedding_endpoint, embedding_api_key, template_dir,
            priming_examples, catalog_path, history_path, index_path, aspect_cache_path, explanations_path,
            ratings_path, audit_path
        );
        env_parse!(temperature, top_p, k, request_timeout_secs);
        if let Some((_, v)) = get("criteria") {
            self.criteria = v.split(',').map(|s| s.trim().to_string()).collect();
        }
        Ok(())
    }

    pub fn apply_flags(&mut self, flags: &ConfigFlags) {
        override_fields!(self, flags,
            plain: [model_id, embedding_backend, temperature, top_p, k, template_version, data_dir, listen],
            optional: [llm_endpoint, llm_script, embedding_endpoint, template_dir, priming_examples,
                catalog_path, history_path, index_path, aspect_cache_path, explanations_path,
                ratings_path, audit_path]);
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.generation_params()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.k == 0 {
            return Err(ConfigError::Invalid("k must be positive".into()));
        }
        self.criterion_set()?;
        Ok(())
    }

    /// Copy safe to print: credentials replaced.
    pub fn redacted(&self) -> Self {
        let mut c = self.clone();
        for key in [&mut c.llm_api_key, &mut c.embedding_api_key] {
            if key.is_some() {
                *key = Some(REDACTED.into());
            }
        }
        c
    }

    fn data_file(&self, explicit: &Option<PathBuf>, default_name: &str) -> PathBuf {
        explicit.clone().unwrap_or_else(|| self.data_dir.join(default_name))
    }

    pub fn catalog_file(&self) -> PathBuf {
        self.data_file(&self.catalog_path, "catalog.jsonl")
    }
    pub fn history_file(&self) -> PathBuf {
        self.data_file(&self.history_path, "history.dat")
    }
    pub fn index_file(&self) -> PathBuf {
        self.data_file(&self.index_path, "index.jsonl")
    }
    pub fn aspect_cache_file(&self) -> PathBuf {
        self.data_file(&self.aspect_cache_path, "aspects.jsonl")
    }
    pub fn explanations_file(&self) -> PathBuf {
        self.data_file(&self.explanations_path, "explanations.jsonl")
    }
    pub fn ratings_file(&self) -> PathBuf {
        self.data_file(&self.ratings_path, "ratings.jsonl")
    }
    pub fn audit_file(&self) -> PathBuf {
        self.data_file(&self.audit_path, "audit.jsonl")
    }

    pub fn generation_params(&self) -> GenerationParams {
        GenerationParams {
            temperature: self.temperature,
            top_p: self.top_p,
            ..GenerationParams::default()
        }
    }

    pub fn criterion_set(&self) -> Result<CriterionSet, ConfigError> {
        CriterionSet::new(self.criteria.clone()).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn templates(&self) -> Result<TemplateSet, ConfigError> {
        match &self.template_dir {
            Some(dir) => TemplateSet::load(dir, &self.template_version).map_err(|e| ConfigError::Invalid(e.to_string())),
            None if self.template_version == "v1" => Ok(TemplateSet::builtin()),
            None => Err(ConfigError::Invalid(format!(
                "template version `{}` needs a template_dir",
                self.template_version
            ))),
        }
    }

    pub fn examples(&self) -> Result<Vec<AspectExample>, ConfigError> {
        match &self.priming_examples {
            Some(p) => aspects::load_examples(p).map_err(|e| ConfigError::Invalid(e.to_string())),
            None => Ok(aspects::default_examples()),
        }
    }

    pub fn text_provider(&self) -> Result<Arc<dyn TextProvider>, ConfigError> {
        if let Some(path) = &self.llm_script {
            let text = std::fs::read_to_string(path).map_err(|e| ConfigError::File {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            let provider = ScriptedProvider::from_json(&text).map_err(|e| ConfigError::File {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            return Ok(Arc::new(provider));
        }
        if let Some(endpoint) = &self.llm_endpoint {
            let provider = HttpProvider::new(
                endpoint,
                self.llm_api_key.clone(),
                Duration::from_secs(self.request_timeout_secs),
            )
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
            return Ok(Arc::new(provider));
        }
        Err(ConfigError::Invalid(
            "no text backend configured: set llm_endpoint or llm_script".into(),
        ))
    }

    /// Gateway writing its audit trail to [`Self::audit_file`].
    pub fn gateway(&self) -> Result<Gateway, ConfigError> {
        let audit_path = self.audit_file();
        if let Some(dir) = audit_path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        let audit = AuditLog::append_to(&audit_path).map_err(|e| ConfigError::File {
            path: audit_path.display().to_string(),
            message: e.to_string(),
        })?;
        Ok(Gateway::new(self.text_provider()?, self.model_id.clone()).with_audit(Arc::new(audit)))
    }

    /// HTTP backend when an endpoint is configured, otherwise the offline
    /// hashed-bag-of-words embedder.
    pub fn embedding_provider(&self) -> Result<Box<dyn EmbeddingProvider>, ConfigError> {
        match &self.embedding_endpoint {
            Some(endpoint) => Ok(Box::new(
                HttpEmbedder::new(
                    endpoint,
                    self.embedding_backend.clone(),
                    self.embedding_api_key.clone(),
                    Duration::from_secs(self.request_timeout_secs),
                )
                .map_err(|e| ConfigError::Invalid(e.to_string()))?,
            )),
            None => Ok(Box::new(HashEmbedder::default())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn defaults() {
        let c = AppConfig::default();
        assert_eq!(c.model_id, "Falcon-40b");
        assert_eq!(c.embedding_backend, "all-MiniLM-L6-v2");
        assert_eq!((c.temperature, c.top_p, c.k), (0.7, 0.6, 5));
        c.validate().unwrap();
    }

    #[test]
    fn precedence_flags_over_env_over_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "k = 3\ntop_p = 0.9\nmodel_id = \"file-model\"\n").unwrap();
        let mut c = AppConfig::from_toml_file(&path).unwrap();
        assert_eq!((c.k, c.top_p, c.temperature), (3, 0.9, 0.7));

        let env: HashMap<String, String> = [("EXPLAINREC_K", "4"), ("EXPLAINREC_MODEL_ID", "env-model")]
            .into_iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        c.apply_env(|k| env.get(k).cloned()).unwrap();
        assert_eq!((c.k, c.model_id.as_str()), (4, "env-model"));

        c.apply_flags(&ConfigFlags {
            k: Some(7),
            ..Default::default()
        });
        assert_eq!((c.k, c.model_id.as_str(), c.top_p), (7, "env-model", 0.9));
    }

    #[test]
    fn bad_env_value() {
        let mut c = AppConfig::default();
        let err = c
            .apply_env(|k| (k == "EXPLAINREC_TEMPERATURE").then(|| "hot".to_string()))
            .unwrap_err();
        assert!(matches!(err, ConfigError::Env { .. }));
    }

    #[test]
    fn secrets_redacted() {
        let c = AppConfig {
            llm_api_key: Some("sk-123".into()),
            ..Default::default()
        };
        let echoed = serde_json::to_string(&c.redacted()).unwrap();
        assert!(!echoed.contains("sk-123"));
        assert!(echoed.contains(REDACTED));
    }

    #[test]
    fn no_backend_is_an_error() {
        assert!(AppConfig::default().text_provider().is_err());
    }
}
