//! Pipeline configuration: a flat `key = value` text format with documented
//! keys, strict validation, and a canonical serialization used for
//! reproducibility hashing. Unknown keys are rejected.

use crate::beta_elliptic::FitOptions;
use crate::envelope::EnvelopeParams;
use crate::error::{Error, Result};
use crate::imaging::BinarizeMethod;
use crate::matcher::MiddlePointSource;
use crate::recovery::RecoveryParams;
use crate::synth::SynthConfig;

/// Every knob of the pipeline. Field defaults are the tuned values frozen
/// against the synthetic generator.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Worker count for batch stages; 0 picks the pool default.
    pub jobs: usize,
    binarize_fixed: bool,
    binarize_threshold: u8,
    /// Diacritic smallness threshold relative to the largest component.
    pub diacritic_ratio: f64,
    pub envelope: EnvelopeParams,
    pub recovery: RecoveryParams,
    pub fit: FitOptions,
    pub middle_points: MiddlePointSource,
    /// Average the graph distance over both directions.
    pub symmetrize: bool,
    pub synth: SynthConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 42,
            jobs: 0,
            binarize_fixed: false,
            binarize_threshold: 128,
            diacritic_ratio: 0.15,
            envelope: EnvelopeParams::default(),
            recovery: RecoveryParams::default(),
            fit: FitOptions::default(),
            middle_points: MiddlePointSource::ArcMidpoint,
            symmetrize: false,
            synth: SynthConfig::default(),
        }
    }
}

macro_rules! parse_as {
    ($value:expr, $key:expr, $ty:ty) => {
        $value
            .parse::<$ty>()
            .map_err(|_| Error::config(format!("bad value for {}: {:?}", $key, $value)))?
    };
}

impl PipelineConfig {
    /// Parse the flat text format. Later lines override earlier ones.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::config(format!(
                    "line {}: expected key = value, got {raw:?}",
                    lineno + 1
                )));
            };
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Apply one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "seed" => self.seed = parse_as!(value, key, u64),
            "jobs" => self.jobs = parse_as!(value, key, usize),
            "binarize.method" => {
                self.binarize_fixed = match value {
                    "otsu" => false,
                    "fixed" => true,
                    other => {
                        return Err(Error::config(format!(
                            "binarize.method must be otsu or fixed, got {other:?}"
                        )))
                    }
                }
            }
            "binarize.threshold" => self.binarize_threshold = parse_as!(value, key, u8),
            "imaging.diacritic_ratio" => self.diacritic_ratio = parse_as!(value, key, f64),
            "envelope.border_max" => self.envelope.border_max = parse_as!(value, key, u32),
            "envelope.margin_band" => self.envelope.margin_band = parse_as!(value, key, f64),
            "envelope.density_max" => self.envelope.density_max = parse_as!(value, key, f64),
            "envelope.top_band" => self.envelope.top_band = parse_as!(value, key, f64),
            "envelope.line_gap_factor" => {
                self.envelope.line_gap_factor = parse_as!(value, key, f64)
            }
            "envelope.word_gap_factor" => {
                self.envelope.word_gap_factor = parse_as!(value, key, f64)
            }
            "envelope.width_cv_max" => self.envelope.width_cv_max = parse_as!(value, key, f64),
            "envelope.ecc_split" => self.envelope.ecc_split = parse_as!(value, key, f64),
            "envelope.cluster_gap_factor" => {
                self.envelope.cluster_gap_factor = parse_as!(value, key, f64)
            }
            "recovery.window" => self.recovery.window = parse_as!(value, key, usize),
            "recovery.lambda" => self.recovery.lambda = parse_as!(value, key, f64),
            "recovery.base_step" => self.recovery.base_step = parse_as!(value, key, f64),
            "recovery.end_curvature" => self.recovery.end_curvature = parse_as!(value, key, f64),
            "recovery.smooth_points" => self.recovery.smooth_points = parse_as!(value, key, usize),
            "fit.max_iter" => self.fit.max_iter = parse_as!(value, key, usize),
            "fit.tol" => self.fit.tol = parse_as!(value, key, f64),
            "fit.pin_k" => self.fit.pin_k = parse_as!(value, key, bool),
            "fit.smooth_window" => self.fit.smooth_window = parse_as!(value, key, usize),
            "fit.valley_frac" => self.fit.valley_frac = parse_as!(value, key, f64),
            "matcher.middle_points" => {
                self.middle_points = match value {
                    "arc" => MiddlePointSource::ArcMidpoint,
                    "raw" => MiddlePointSource::RawSpan,
                    other => {
                        return Err(Error::config(format!(
                            "matcher.middle_points must be arc or raw, got {other:?}"
                        )))
                    }
                }
            }
            "matcher.symmetrize" => self.symmetrize = parse_as!(value, key, bool),
            "synth.stroke_width" => self.synth.stroke_width = parse_as!(value, key, u32),
            "synth.resolution" => self.synth.resolution = parse_as!(value, key, u32),
            "synth.noise_sigma" => self.synth.noise_sigma = parse_as!(value, key, f64),
            "synth.n_templates" => self.synth.n_templates = parse_as!(value, key, usize),
            "synth.n_instances" => self.synth.n_instances = parse_as!(value, key, usize),
            "synth.n_envelopes" => self.synth.n_envelopes = parse_as!(value, key, usize),
            other => return Err(Error::config(format!("unknown configuration key {other:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        fn in_range(name: &str, v: f64, lo: f64, hi: f64) -> Result<()> {
            if !(lo..=hi).contains(&v) {
                return Err(Error::config(format!(
                    "{name} = {v} outside [{lo}, {hi}]"
                )));
            }
            Ok(())
        }
        in_range("imaging.diacritic_ratio", self.diacritic_ratio, 0.0, 1.0)?;
        in_range("envelope.margin_band", self.envelope.margin_band, 0.0, 0.5)?;
        in_range("envelope.density_max", self.envelope.density_max, 0.0, 1.0)?;
        in_range("envelope.top_band", self.envelope.top_band, 0.0, 1.0)?;
        in_range(
            "envelope.line_gap_factor",
            self.envelope.line_gap_factor,
            0.0,
            5.0,
        )?;
        in_range(
            "envelope.word_gap_factor",
            self.envelope.word_gap_factor,
            0.0,
            5.0,
        )?;
        in_range("envelope.width_cv_max", self.envelope.width_cv_max, 0.0, 2.0)?;
        in_range("envelope.ecc_split", self.envelope.ecc_split, 1.0, 100.0)?;
        in_range(
            "envelope.cluster_gap_factor",
            self.envelope.cluster_gap_factor,
            0.0,
            10.0,
        )?;
        in_range("recovery.lambda", self.recovery.lambda, 0.0, 100.0)?;
        in_range("recovery.base_step", self.recovery.base_step, 0.05, 10.0)?;
        in_range(
            "recovery.end_curvature",
            self.recovery.end_curvature,
            0.0,
            10.0,
        )?;
        if self.recovery.window == 0 {
            return Err(Error::config("recovery.window must be >= 1"));
        }
        if self.fit.max_iter == 0 {
            return Err(Error::config("fit.max_iter must be >= 1"));
        }
        in_range("fit.tol", self.fit.tol, 0.0, 1.0)?;
        in_range("fit.valley_frac", self.fit.valley_frac, 0.0, 1.0)?;
        self.synth.validate()?;
        Ok(())
    }

    /// Canonical serialization: every key, sorted, one per line. Hashing
    /// this string identifies the effective configuration.
    pub fn canonical_string(&self) -> String {
        let binarize_method = (
            if self.binarize_fixed { "fixed" } else { "otsu" },
            self.binarize_threshold,
        );
        let middle = match self.middle_points {
            MiddlePointSource::ArcMidpoint => "arc",
            MiddlePointSource::RawSpan => "raw",
        };
        let mut pairs: Vec<(String, String)> = vec![
            ("seed".into(), self.seed.to_string()),
            ("jobs".into(), self.jobs.to_string()),
            ("binarize.method".into(), binarize_method.0.to_string()),
            ("binarize.threshold".into(), binarize_method.1.to_string()),
            (
                "imaging.diacritic_ratio".into(),
                self.diacritic_ratio.to_string(),
            ),
            (
                "envelope.border_max".into(),
                self.envelope.border_max.to_string(),
            ),
            (
                "envelope.margin_band".into(),
                self.envelope.margin_band.to_string(),
            ),
            (
                "envelope.density_max".into(),
                self.envelope.density_max.to_string(),
            ),
            ("envelope.top_band".into(), self.envelope.top_band.to_string()),
            (
                "envelope.line_gap_factor".into(),
                self.envelope.line_gap_factor.to_string(),
            ),
            (
                "envelope.word_gap_factor".into(),
                self.envelope.word_gap_factor.to_string(),
            ),
            (
                "envelope.width_cv_max".into(),
                self.envelope.width_cv_max.to_string(),
            ),
            ("envelope.ecc_split".into(), self.envelope.ecc_split.to_string()),
            (
                "envelope.cluster_gap_factor".into(),
                self.envelope.cluster_gap_factor.to_string(),
            ),
            ("recovery.window".into(), self.recovery.window.to_string()),
            ("recovery.lambda".into(), self.recovery.lambda.to_string()),
            ("recovery.base_step".into(), self.recovery.base_step.to_string()),
            (
                "recovery.end_curvature".into(),
                self.recovery.end_curvature.to_string(),
            ),
            (
                "recovery.smooth_points".into(),
                self.recovery.smooth_points.to_string(),
            ),
            ("fit.max_iter".into(), self.fit.max_iter.to_string()),
            ("fit.tol".into(), self.fit.tol.to_string()),
            ("fit.pin_k".into(), self.fit.pin_k.to_string()),
            ("fit.smooth_window".into(), self.fit.smooth_window.to_string()),
            ("fit.valley_frac".into(), self.fit.valley_frac.to_string()),
            ("matcher.middle_points".into(), middle.to_string()),
            ("matcher.symmetrize".into(), self.symmetrize.to_string()),
            (
                "synth.stroke_width".into(),
                self.synth.stroke_width.to_string(),
            ),
            ("synth.resolution".into(), self.synth.resolution.to_string()),
            ("synth.noise_sigma".into(), self.synth.noise_sigma.to_string()),
            ("synth.n_templates".into(), self.synth.n_templates.to_string()),
            ("synth.n_instances".into(), self.synth.n_instances.to_string()),
            ("synth.n_envelopes".into(), self.synth.n_envelopes.to_string()),
        ];
        pairs.sort();
        let mut out = String::new();
        for (k, v) in pairs {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }

    /// Effective binarization method.
    pub fn binarize(&self) -> BinarizeMethod {
        if self.binarize_fixed {
            BinarizeMethod::Fixed(self.binarize_threshold)
        } else {
            BinarizeMethod::Otsu
        }
    }

    /// Synth configuration with the top-level seed threaded through.
    pub fn synth_with_seed(&self) -> SynthConfig {
        SynthConfig {
            seed: self.seed,
            ..self.synth.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_and_roundtrip() {
        let cfg = PipelineConfig::default();
        let text = cfg.canonical_string();
        let parsed = PipelineConfig::parse(&text).unwrap();
        assert_eq!(parsed.canonical_string(), text);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let err = PipelineConfig::parse("nonsense.key = 3\n").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn out_of_range_value_is_rejected() {
        assert!(PipelineConfig::parse("envelope.density_max = 1.5\n").is_err());
        assert!(PipelineConfig::parse("recovery.base_step = 0\n").is_err());
    }

    #[test]
    fn comments_and_blanks_are_ignored() {
        let cfg = PipelineConfig::parse("# heading\n\nseed = 7 # trailing\n").unwrap();
        assert_eq!(cfg.seed, 7);
    }

    #[test]
    fn overrides_apply_in_order() {
        let cfg = PipelineConfig::parse("seed = 1\nseed = 2\n").unwrap();
        assert_eq!(cfg.seed, 2);
    }

    #[test]
    fn binarize_fixed_method_uses_threshold() {
        let cfg =
            PipelineConfig::parse("binarize.method = fixed\nbinarize.threshold = 90\n").unwrap();
        assert_eq!(cfg.binarize(), BinarizeMethod::Fixed(90));
        let otsu = PipelineConfig::parse("binarize.threshold = 90\n").unwrap();
        assert_eq!(otsu.binarize(), BinarizeMethod::Otsu);
    }
}
