//! Run configuration. Values are layered: built-in defaults, then a named
//! preset, then a `key = value` file, then command-line flags.

use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

use crate::metrics::DEFAULT_MATCH_THRESHOLD;
use crate::tracking::ManagerParams;

/// Per-site blob thresholds `(name, T_r, T_c)`.
pub const PRESETS: [(&str, u64, f64); 4] = [
    ("sherbrooke", 23, 44.0),
    ("rouen", 41, 63.0),
    ("st-marc", 35, 55.0),
    ("rene-levesque", 20, 24.0),
];

/// Every key accepted in a config file, spelled as in the parameter types.
pub const KEYS: [&str; 18] = [
    "T_r",
    "T_c",
    "ratio_min",
    "ratio_max",
    "median_radius",
    "close_radius",
    "T_ol",
    "T_oh",
    "invisible_max",
    "min_lifetime",
    "redundancy_frames",
    "sigma_kernel",
    "lambda",
    "learning_rate",
    "output_sigma_factor",
    "padding",
    "cell",
    "match_threshold",
];

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("unknown preset {0:?}; available: {list}", list = preset_names().join(", "))]
    UnknownPreset(String),
    #[error("unknown parameter {0:?}")]
    UnknownKey(String),
    #[error("bad value {value:?} for {key}: {reason}")]
    BadValue { key: String, value: String, reason: String },
    #[error("config line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("config line {line}: {source}")]
    AtLine { line: usize, source: Box<ConfigError> },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|p| p.0).collect()
}

/// Everything one `track` run needs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub frames: String,
    pub masks: Option<String>,
    pub output: PathBuf,
    pub render: Option<PathBuf>,
    pub gt: Option<PathBuf>,
    pub preset: Option<String>,
    pub match_threshold: f64,
    pub params: ManagerParams,
}

impl RunConfig {
    pub fn new(frames: impl Into<String>, output: impl Into<PathBuf>) -> Self {
        RunConfig {
            frames: frames.into(),
            masks: None,
            output: output.into(),
            render: None,
            gt: None,
            preset: None,
            match_threshold: DEFAULT_MATCH_THRESHOLD,
            params: ManagerParams::default(),
        }
    }

    pub fn apply_preset(&mut self, name: &str) -> Result<(), ConfigError> {
        let (_, t_r, t_c) = PRESETS
            .iter()
            .find(|p| p.0.eq_ignore_ascii_case(name))
            .ok_or_else(|| ConfigError::UnknownPreset(name.to_string()))?;
        self.params.blob.t_r = *t_r;
        self.params.blob.t_c = *t_c;
        self.preset = Some(name.to_ascii_lowercase());
        Ok(())
    }

    /// Set one parameter from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let p = &mut self.params;
        match key {
            "T_r" => p.blob.t_r = parse(key, value)?,
            "T_c" => p.blob.t_c = parse(key, value)?,
            "ratio_min" => p.blob.ratio_min = parse(key, value)?,
            "ratio_max" => p.blob.ratio_max = parse(key, value)?,
            "median_radius" => p.blob.median_radius = parse(key, value)?,
            "close_radius" => p.blob.close_radius = parse(key, value)?,
            "T_ol" => p.t_ol = parse(key, value)?,
            "T_oh" => p.t_oh = parse(key, value)?,
            "invisible_max" => p.invisible_max = parse(key, value)?,
            "min_lifetime" => p.min_lifetime = parse(key, value)?,
            "redundancy_frames" => p.redundancy_frames = parse(key, value)?,
            "sigma_kernel" => p.kcf.sigma_kernel = parse(key, value)?,
            "lambda" => p.kcf.lambda = parse(key, value)?,
            "learning_rate" => p.kcf.learning_rate = parse(key, value)?,
            "output_sigma_factor" => p.kcf.output_sigma_factor = parse(key, value)?,
            "padding" => p.kcf.padding = parse(key, value)?,
            "cell" => p.kcf.cell = parse(key, value)?,
            "match_threshold" => self.match_threshold = parse(key, value)?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Layer `preset`, then the config `file` text, then `flags` over the defaults.
    ///
    /// A `preset` key inside the file is honored unless a preset was also
    /// given on the command line.
    pub fn layer(
        &mut self,
        preset: Option<&str>,
        file: Option<&str>,
        flags: &[(&str, String)],
    ) -> Result<(), ConfigError> {
        let entries = file.map(parse_file).transpose()?.unwrap_or_default();
        let file_preset = entries.iter().find(|e| e.1 == "preset").map(|e| e.2.as_str());
        if let Some(name) = preset.or(file_preset) {
            self.apply_preset(name)?;
        }
        for (line, key, value) in entries.iter().filter(|e| e.1 != "preset") {
            self.set(key, value).map_err(|e| ConfigError::AtLine {
                line: *line,
                source: Box::new(e),
            })?;
        }
        for (key, value) in flags {
            self.set(key, value)?;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.params
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(self.match_threshold > 0.0) {
            return Err(ConfigError::Invalid("match_threshold must be > 0".into()));
        }
        Ok(())
    }

    /// The effective parameters in config-file syntax.
    pub fn to_file(&self) -> String {
        let p = &self.params;
        let values: [String; 18] = [
            p.blob.t_r.to_string(),
            p.blob.t_c.to_string(),
            p.blob.ratio_min.to_string(),
            p.blob.ratio_max.to_string(),
            p.blob.median_radius.to_string(),
            p.blob.close_radius.to_string(),
            p.t_ol.to_string(),
            p.t_oh.to_string(),
            p.invisible_max.to_string(),
            p.min_lifetime.to_string(),
            p.redundancy_frames.to_string(),
            p.kcf.sigma_kernel.to_string(),
            p.kcf.lambda.to_string(),
            p.kcf.learning_rate.to_string(),
            p.kcf.output_sigma_factor.to_string(),
            p.kcf.padding.to_string(),
            p.kcf.cell.to_string(),
            self.match_threshold.to_string(),
        ];
        KEYS.iter()
            .zip(values)
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.trim().parse().map_err(|e: T::Err| ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
        reason: e.to_string(),
    })
}

/// Split config text into `(line, key, value)`; `#` starts a comment.
pub fn parse_file(text: &str) -> Result<Vec<(usize, String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(ConfigError::Syntax { line: i + 1 });
        }
        out.push((i + 1, k.to_string(), v.to_string()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> RunConfig {
        RunConfig::new("f/%06d.png", "out.csv")
    }

    #[test]
    fn defaults_are_the_sherbrooke_thresholds() {
        let c = cfg();
        assert_eq!((c.params.blob.t_r, c.params.blob.t_c), (23, 44.0));
        assert_eq!((c.params.t_ol, c.params.t_oh), (1.4, 1.8));
        assert_eq!(c.match_threshold, 50.0);
        c.validate().unwrap();
    }

    #[test]
    fn presets_set_blob_thresholds() {
        for (name, t_r, t_c) in PRESETS {
            let mut c = cfg();
            c.apply_preset(name).unwrap();
            assert_eq!((c.params.blob.t_r, c.params.blob.t_c), (t_r, t_c));
        }
        assert!(matches!(cfg().apply_preset("paris"), Err(ConfigError::UnknownPreset(_))));
    }

    #[test]
    fn later_layers_win() {
        let mut c = cfg();
        let file = "# site tuning\npreset = rouen\nT_c = 70   # wider\nT_ol=1.5\n";
        c.layer(None, Some(file), &[("T_ol", "1.45".into())]).unwrap();
        assert_eq!(c.params.blob.t_r, 41); // preset
        assert_eq!(c.params.blob.t_c, 70.0); // file over preset
        assert_eq!(c.params.t_ol, 1.45); // flag over file
        assert_eq!(c.preset.as_deref(), Some("rouen"));

        // a command-line preset replaces the file's, but file values still apply on top
        let mut c = cfg();
        c.layer(Some("st-marc"), Some(file), &[]).unwrap();
        assert_eq!((c.params.blob.t_r, c.params.blob.t_c), (35, 70.0));
    }

    #[test]
    fn every_key_round_trips_through_the_file_format() {
        let mut c = cfg();
        c.layer(Some("rene-levesque"), None, &[("cell", "2".into()), ("lambda", "0.001".into())])
            .unwrap();
        let text = c.to_file();
        assert_eq!(parse_file(&text).unwrap().len(), KEYS.len());
        let mut d = cfg();
        d.layer(None, Some(&text), &[]).unwrap();
        assert_eq!(d.params, c.params);
        assert_eq!(d.match_threshold, c.match_threshold);
    }

    #[test]
    fn bad_input_is_reported() {
        let mut c = cfg();
        assert!(matches!(
            c.layer(None, Some("T_r = 5\nT_q = 3\n"), &[]),
            Err(ConfigError::AtLine { line: 2, .. })
        ));
        assert_eq!(
            parse_file("T_r 5").unwrap_err(),
            ConfigError::Syntax { line: 1 }
        );
        assert!(matches!(
            cfg().layer(None, None, &[("T_r", "-3".into())]),
            Err(ConfigError::BadValue { .. })
        ));
        // ranges are checked after layering
        assert!(matches!(
            cfg().layer(None, None, &[("T_ol", "1.9".into())]),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(
            cfg().layer(None, None, &[("match_threshold", "0".into())]),
            Err(ConfigError::Invalid(_))
        ));
    }
}
