//! Per-language parsing configuration.
//!
//! Profiles are loaded from a TOML document holding one `[[profile]]` block
//! per language. Every regular expression in a profile is restricted to a
//! portable subset (see [`check_dialect`]) so the same file can drive other
//! regex engines.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("language {lang}: field {field}: pattern {pattern:?}: {message}")]
    Pattern {
        lang: String,
        field: &'static str,
        pattern: String,
        message: String,
    },
    #[error("language {lang}: {message}")]
    Invalid { lang: String, message: String },
    #[error("language {0} is defined more than once")]
    Duplicate(String),
    #[error("no profile for language {0}")]
    UnknownLanguage(String),
    #[error("year 0 has no article")]
    YearZero,
    #[error("linked-data mapping: {0}")]
    Mapping(String),
}

/// Article title template for year pages. `{year}` is replaced with the
/// absolute year number.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct YearTitleTemplate {
    pub ce: String,
    pub bce: String,
}

/// The serialized form of a profile. Field names are the config file keys.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    pub lang: String,
    pub events_entry_patterns: Vec<String>,
    #[serde(default)]
    pub events_exit_patterns: Vec<String>,
    pub event_line_patterns: Vec<String>,
    pub date_patterns: Vec<String>,
    pub separators: Vec<String>,
    pub year_title_template: YearTitleTemplate,
    #[serde(default)]
    pub standard_image_blocklist: Vec<String>,
    pub month_names: BTreeMap<String, u8>,
    #[serde(default)]
    pub category_headings: BTreeMap<String, String>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct ProfileFile {
    #[serde(default)]
    profile: Vec<ProfileSpec>,
}

/// A validated profile with its patterns compiled. Immutable after load.
#[derive(Debug, Clone)]
pub struct LanguageProfile {
    spec: ProfileSpec,
    entry: Vec<Regex>,
    exit: Vec<Regex>,
    lines: Vec<Regex>,
    dates: Vec<Regex>,
    months: HashMap<String, u8>,
    categories: HashMap<String, String>,
    title_ce: (String, String),
    title_bce: (String, String),
}

impl PartialEq for LanguageProfile {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

pub type Profiles = BTreeMap<String, LanguageProfile>;

const BUNDLED: &str = include_str!("../config/profiles.toml");

/// Loads every profile in a TOML document.
pub fn load_profiles(source: &str) -> Result<Profiles, ConfigError> {
    let file: ProfileFile = toml::from_str(source).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let mut out = Profiles::new();
    for spec in file.profile {
        let lang = spec.lang.clone();
        let profile = LanguageProfile::compile(spec)?;
        if out.insert(lang.clone(), profile).is_some() {
            return Err(ConfigError::Duplicate(lang));
        }
    }
    Ok(out)
}

pub fn load_profiles_file(path: &Path) -> Result<Profiles, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_profiles(&text)
}

/// The profiles shipped in `config/profiles.toml`.
pub fn bundled_profiles() -> Profiles {
    load_profiles(BUNDLED).expect("bundled profiles are valid")
}

/// Serializes profiles back into the config format.
pub fn profiles_to_toml(profiles: &Profiles) -> String {
    let file = ProfileFile {
        profile: profiles.values().map(|p| p.spec.clone()).collect(),
    };
    toml::to_string(&file).expect("profile specs serialize")
}

/// Rejects regex constructs outside the portable subset: lookaround,
/// backreferences, Unicode property classes, POSIX bracket classes, inline
/// flags, `(?<name>` groups and engine-specific escapes. Named groups use
/// the `(?P<name>...)` form.
pub fn check_dialect(pattern: &str) -> Result<(), String> {
    let chars: Vec<char> = pattern.chars().collect();
    let mut i = 0;
    let mut in_class = false;
    while i < chars.len() {
        let c = chars[i];
        match c {
            '\\' => {
                let Some(&next) = chars.get(i + 1) else {
                    return Err("trailing backslash".into());
                };
                if next.is_ascii_alphanumeric() && !"dDwWsSbBntr".contains(next) {
                    return Err(format!("escape \\{next} is not portable"));
                }
                i += 2;
                continue;
            }
            '[' if in_class && chars.get(i + 1) == Some(&':') => {
                return Err("POSIX bracket classes are not portable".into());
            }
            '[' if !in_class => {
                in_class = true;
                // a leading ']' or '^]' is literal
                if chars.get(i + 1) == Some(&'^') {
                    i += 1;
                }
                if chars.get(i + 1) == Some(&']') {
                    i += 1;
                }
            }
            ']' if in_class => in_class = false,
            '(' if !in_class && chars.get(i + 1) == Some(&'?') => {
                let rest: String = chars[i + 2..].iter().take(2).collect();
                if !(rest.starts_with(':') || rest == "P<") {
                    return Err("only (?:...) and (?P<name>...) groups are portable".into());
                }
            }
            _ => {}
        }
        i += 1;
    }
    if in_class {
        return Err("unterminated character class".into());
    }
    Ok(())
}

fn compile_all(
    lang: &str,
    field: &'static str,
    patterns: &[String],
    wrap: fn(&str) -> String,
) -> Result<Vec<Regex>, ConfigError> {
    patterns
        .iter()
        .map(|p| {
            let err = |message: String| ConfigError::Pattern {
                lang: lang.to_string(),
                field,
                pattern: p.clone(),
                message,
            };
            check_dialect(p).map_err(err)?;
            Regex::new(&wrap(p)).map_err(|e| err(e.to_string()))
        })
        .collect()
}

fn split_template(lang: &str, t: &str) -> Result<(String, String), ConfigError> {
    match t.split_once("{year}") {
        Some((pre, post)) if !post.contains("{year}") => Ok((pre.to_string(), post.to_string())),
        _ => Err(ConfigError::Invalid {
            lang: lang.to_string(),
            message: format!("year_title_template {t:?} must contain {{year}} exactly once"),
        }),
    }
}

impl LanguageProfile {
    pub fn compile(spec: ProfileSpec) -> Result<Self, ConfigError> {
        let lang = spec.lang.clone();
        let invalid = |message: String| ConfigError::Invalid { lang: lang.clone(), message };
        if lang.is_empty() || !lang.chars().all(|c| c.is_ascii_lowercase() || c == '-') {
            return Err(invalid("lang must be a lowercase ISO language code".into()));
        }
        for (name, list) in [
            ("events_entry_patterns", &spec.events_entry_patterns),
            ("event_line_patterns", &spec.event_line_patterns),
            ("date_patterns", &spec.date_patterns),
            ("separators", &spec.separators),
        ] {
            if list.is_empty() {
                return Err(invalid(format!("{name} must not be empty")));
            }
        }
        if spec.separators.iter().any(|s| s.is_empty()) {
            return Err(invalid("separators must not contain empty strings".into()));
        }
        let mut months = HashMap::new();
        for (name, &n) in &spec.month_names {
            if !(1..=12).contains(&n) {
                return Err(invalid(format!("month name {name:?} maps to {n}, outside 1-12")));
            }
            months.insert(name.to_lowercase(), n);
        }
        for m in 1..=12u8 {
            if !spec.month_names.values().any(|&v| v == m) {
                return Err(invalid(format!("month {m} has no name")));
            }
        }
        let categories = spec
            .category_headings
            .iter()
            .map(|(k, v)| (k.to_lowercase(), v.clone()))
            .collect();

        let ident = |p: &str| p.to_string();
        let full = |p: &str| format!("^(?:{p})$");
        let entry = compile_all(&lang, "events_entry_patterns", &spec.events_entry_patterns, ident)?;
        let exit = compile_all(&lang, "events_exit_patterns", &spec.events_exit_patterns, ident)?;
        let lines = compile_all(&lang, "event_line_patterns", &spec.event_line_patterns, ident)?;
        let dates = compile_all(&lang, "date_patterns", &spec.date_patterns, full)?;
        for (re, src) in dates.iter().zip(&spec.date_patterns) {
            let names: Vec<&str> = re.capture_names().flatten().collect();
            if let Some(bad) = names
                .iter()
                .find(|n| !["month", "day", "end_month", "end_day"].contains(n))
            {
                return Err(ConfigError::Pattern {
                    lang: lang.clone(),
                    field: "date_patterns",
                    pattern: src.clone(),
                    message: format!("unknown capture name {bad:?}"),
                });
            }
        }
        let title_ce = split_template(&lang, &spec.year_title_template.ce)?;
        let title_bce = split_template(&lang, &spec.year_title_template.bce)?;

        Ok(LanguageProfile {
            spec,
            entry,
            exit,
            lines,
            dates,
            months,
            categories,
            title_ce,
            title_bce,
        })
    }

    pub fn spec(&self) -> &ProfileSpec {
        &self.spec
    }

    pub fn lang(&self) -> &str {
        &self.spec.lang
    }

    pub fn entry_patterns(&self) -> &[Regex] {
        &self.entry
    }

    pub fn exit_patterns(&self) -> &[Regex] {
        &self.exit
    }

    pub fn line_patterns(&self) -> &[Regex] {
        &self.lines
    }

    /// Date patterns, anchored to match a whole date field.
    pub fn date_patterns(&self) -> &[Regex] {
        &self.dates
    }

    pub fn separators(&self) -> &[String] {
        &self.spec.separators
    }

    pub fn image_blocklist(&self) -> &[String] {
        &self.spec.standard_image_blocklist
    }

    /// Case-insensitive month-name lookup.
    pub fn month_number(&self, name: &str) -> Option<u8> {
        self.months.get(&name.trim().to_lowercase()).copied()
    }

    /// Canonical category key for a localized heading, if the profile knows it.
    pub fn canonical_category(&self, heading: &str) -> Option<&str> {
        self.spec
            .category_headings
            .get(heading)
            .or_else(|| self.categories.get(&heading.to_lowercase()))
            .map(String::as_str)
    }

    pub fn year_title(&self, year: i32) -> Result<String, ConfigError> {
        if year == 0 {
            return Err(ConfigError::YearZero);
        }
        let (pre, post) = if year > 0 { &self.title_ce } else { &self.title_bce };
        Ok(format!("{pre}{}{post}", (year as i64).abs()))
    }

    /// Inverse of [`LanguageProfile::year_title`].
    pub fn parse_year_title(&self, title: &str) -> Option<i32> {
        let title = title.replace('_', " ");
        let try_form = |(pre, post): &(String, String)| -> Option<i32> {
            let digits = title.strip_prefix(pre.as_str())?.strip_suffix(post.as_str())?;
            if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) || digits.starts_with('0') {
                return None;
            }
            digits.parse().ok()
        };
        // the BCE form is usually the more specific one, so try it first
        if let Some(y) = try_form(&self.title_bce) {
            if self.title_bce != self.title_ce {
                return Some(-y);
            }
        }
        try_form(&self.title_ce)
    }
}
