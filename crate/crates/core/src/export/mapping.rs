use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::markup::{title_to_path, WikiLink};
use crate::profile::ConfigError;

const BUNDLED: &str = include_str!("../../config/lode.toml");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Predicates {
    pub event_class: String,
    pub description: String,
    pub at_time: String,
    pub involved: String,
    pub depiction: String,
}

/// IRIs used by the linked-data export.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LodeMapping {
    pub base_uri: String,
    pub predicates: Predicates,
    #[serde(default)]
    pub prefixes: BTreeMap<String, String>,
    #[serde(default)]
    pub lang_to_dbpedia: BTreeMap<String, String>,
}

impl LodeMapping {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let m: LodeMapping = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        if !m.base_uri.ends_with('/') {
            return Err(ConfigError::Mapping("base_uri must end with '/'".into()));
        }
        Ok(m)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }

    pub fn bundled() -> Self {
        Self::from_toml(BUNDLED).expect("bundled mapping is valid")
    }

    pub fn dbpedia_prefix(&self, lang: &str) -> String {
        self.lang_to_dbpedia
            .get(lang)
            .cloned()
            .unwrap_or_else(|| format!("http://{lang}.dbpedia.org/resource/"))
    }

    pub fn event_uri(&self, id: &str) -> String {
        format!("{}event/{id}", self.base_uri)
    }
}

impl Default for LodeMapping {
    fn default() -> Self {
        Self::bundled()
    }
}

/// Resource URI for a linked article in the given language's DBpedia.
pub fn dbpedia_uri(link: &WikiLink, lang: &str, mapping: &LodeMapping) -> String {
    format!("{}{}", mapping.dbpedia_prefix(lang), title_to_path(&link.target))
}
