//! Flat `key = value` pipeline configuration. Unknown keys are rejected;
//! `#` starts a comment.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Duration;

use kinetext::classifier::ClsTrainConfig;
use kinetext::language::LlmConfig;
use kinetext::metrics::BleuMode;
use kinetext::vq::{DilationSchedule, VqArch, VqTrainConfig};
use kinetext::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Root seed; every random stream of a run derives from it.
    pub seed: u64,
    pub vq_arch: VqArch,
    pub vq: VqTrainConfig,
    /// Train the tokenizer on the first N sequences of the manifest (0 = all).
    pub vq_sequences: usize,
    pub cls: ClsTrainConfig,
    pub bleu_mode: BleuMode,
    pub llm: LlmConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            vq_arch: VqArch::desk(),
            vq: VqTrainConfig::desk(),
            vq_sequences: 0,
            cls: ClsTrainConfig::default(),
            bleu_mode: BleuMode::Corpus,
            llm: LlmConfig::default(),
        }
    }
}

/// Every accepted key.
pub const KEYS: [&str; 33] = [
    "seed",
    "vq.preset",
    "vq.width",
    "vq.code_dim",
    "vq.codebook_size",
    "vq.res_blocks",
    "vq.dilation",
    "vq.batch",
    "vq.steps",
    "vq.lr",
    "vq.lr_decay_step",
    "vq.lr_decay",
    "vq.beta",
    "vq.alpha",
    "vq.ema_decay",
    "vq.window",
    "vq.reset_every",
    "vq.reset_threshold",
    "vq.weight_decay",
    "vq.sequences",
    "cls.batch",
    "cls.lr",
    "cls.steps",
    "cls.crop",
    "cls.weight_decay",
    "cls.split",
    "metrics.bleu_mode",
    "llm.base_url",
    "llm.model",
    "llm.api_key_env",
    "llm.timeout",
    "llm.max_in_flight",
    "llm.mock",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| Error::Validation(format!("{key}: cannot parse '{value}': {e}")))
}

impl PipelineConfig {
    /// Apply one `key`/`value` pair.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "seed" => self.seed = parse(key, v)?,
            "vq.preset" => match v {
                "desk" => {
                    self.vq_arch = VqArch::desk();
                    self.vq = VqTrainConfig::desk();
                }
                "paper" => {
                    self.vq_arch = VqArch::paper();
                    self.vq = VqTrainConfig::paper();
                }
                other => return Err(Error::Validation(format!("vq.preset: unknown preset '{other}' (desk|paper)"))),
            },
            "vq.width" => self.vq_arch.width = parse(key, v)?,
            "vq.code_dim" => self.vq_arch.code_dim = parse(key, v)?,
            "vq.codebook_size" => self.vq_arch.codebook_size = parse(key, v)?,
            "vq.res_blocks" => self.vq_arch.res_blocks = parse(key, v)?,
            "vq.dilation" => {
                self.vq_arch.dilation = match v {
                    "constant" => DilationSchedule::Constant9,
                    "descending" => DilationSchedule::Descending,
                    other => {
                        return Err(Error::Validation(format!("vq.dilation: '{other}' (constant|descending)")))
                    }
                }
            }
            "vq.batch" => self.vq.batch = parse(key, v)?,
            "vq.steps" => self.vq.steps = parse(key, v)?,
            "vq.lr" => self.vq.lr = parse(key, v)?,
            "vq.lr_decay_step" => self.vq.lr_decay_step = parse(key, v)?,
            "vq.lr_decay" => self.vq.lr_decay = parse(key, v)?,
            "vq.beta" => self.vq.beta = parse(key, v)?,
            "vq.alpha" => self.vq.alpha = parse(key, v)?,
            "vq.ema_decay" => self.vq.ema_decay = parse(key, v)?,
            "vq.window" => self.vq.window = parse(key, v)?,
            "vq.reset_every" => self.vq.reset_every = parse(key, v)?,
            "vq.reset_threshold" => self.vq.reset_threshold = parse(key, v)?,
            "vq.weight_decay" => self.vq.weight_decay = parse(key, v)?,
            "vq.sequences" => self.vq_sequences = parse(key, v)?,
            "cls.batch" => self.cls.batch = parse(key, v)?,
            "cls.lr" => self.cls.lr = parse(key, v)?,
            "cls.steps" => self.cls.steps = parse(key, v)?,
            "cls.crop" => self.cls.crop = parse(key, v)?,
            "cls.weight_decay" => self.cls.weight_decay = parse(key, v)?,
            "cls.split" => {
                let parts: Vec<f64> = v.split(',').map(|p| parse(key, p.trim())).collect::<Result<_>>()?;
                self.cls.split = parts
                    .try_into()
                    .map_err(|_| Error::Validation("cls.split: expected three fractions 'train,val,test'".into()))?;
            }
            "metrics.bleu_mode" => {
                self.bleu_mode = match v {
                    "corpus" => BleuMode::Corpus,
                    "sentence" => BleuMode::SentenceMean,
                    other => return Err(Error::Validation(format!("metrics.bleu_mode: '{other}' (corpus|sentence)"))),
                }
            }
            "llm.base_url" => self.llm.base_url = v.to_string(),
            "llm.model" => self.llm.model = v.to_string(),
            "llm.api_key_env" => self.llm.api_key_env = v.to_string(),
            "llm.timeout" => {
                let secs: f64 = parse(key, v)?;
                self.llm.timeout = Duration::try_from_secs_f64(secs)
                    .map_err(|e| Error::Validation(format!("llm.timeout: {e}")))?;
            }
            "llm.max_in_flight" => self.llm.max_in_flight = parse(key, v)?,
            "llm.mock" => self.llm.mock = parse(key, v)?,
            other => return Err(Error::Validation(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    /// Parse a config file's text on top of the defaults.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Validation(format!("config line {}: expected 'key = value'", n + 1)))?;
            self.set(k, v).map_err(|e| Error::Validation(format!("config line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    /// Apply a `key=value` override.
    pub fn apply_override(&mut self, kv: &str) -> Result<()> {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Validation(format!("override '{kv}' is not key=value")))?;
        self.set(k, v)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    /// Seeds of the individual stages derive from the root seed.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        c.vq.seed = self.seed;
        c.cls.seed = self.seed;
        c
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.resolved();
        c.vq.validate()?;
        c.cls.validate()?;
        if c.llm.max_in_flight == 0 {
            return Err(Error::Validation("llm.max_in_flight must be at least 1".into()));
        }
        Ok(())
    }

    /// Every key with its effective value, in a form [`Self::from_text`] reads back.
    pub fn to_text(&self) -> String {
        let c = self.resolved();
        let a = &c.vq_arch;
        let v = &c.vq;
        let k = &c.cls;
        let dilation = match a.dilation {
            DilationSchedule::Constant9 => "constant",
            DilationSchedule::Descending => "descending",
        };
        let bleu = match c.bleu_mode {
            BleuMode::Corpus => "corpus",
            BleuMode::SentenceMean => "sentence",
        };
        let mut out = String::new();
        let mut put = |key: &str, value: String| {
            let _ = writeln!(out, "{key} = {value}");
        };
        put("seed", c.seed.to_string());
        put("vq.width", a.width.to_string());
        put("vq.code_dim", a.code_dim.to_string());
        put("vq.codebook_size", a.codebook_size.to_string());
        put("vq.res_blocks", a.res_blocks.to_string());
        put("vq.dilation", dilation.to_string());
        put("vq.batch", v.batch.to_string());
        put("vq.steps", v.steps.to_string());
        put("vq.lr", v.lr.to_string());
        put("vq.lr_decay_step", v.lr_decay_step.to_string());
        put("vq.lr_decay", v.lr_decay.to_string());
        put("vq.beta", v.beta.to_string());
        put("vq.alpha", v.alpha.to_string());
        put("vq.ema_decay", v.ema_decay.to_string());
        put("vq.window", v.window.to_string());
        put("vq.reset_every", v.reset_every.to_string());
        put("vq.reset_threshold", v.reset_threshold.to_string());
        put("vq.weight_decay", v.weight_decay.to_string());
        put("vq.sequences", c.vq_sequences.to_string());
        put("cls.batch", k.batch.to_string());
        put("cls.lr", k.lr.to_string());
        put("cls.steps", k.steps.to_string());
        put("cls.crop", k.crop.to_string());
        put("cls.weight_decay", k.weight_decay.to_string());
        put("cls.split", format!("{},{},{}", k.split[0], k.split[1], k.split[2]));
        put("metrics.bleu_mode", bleu.to_string());
        put("llm.base_url", c.llm.base_url.clone());
        put("llm.model", c.llm.model.clone());
        put("llm.api_key_env", c.llm.api_key_env.clone());
        put("llm.timeout", c.llm.timeout.as_secs_f64().to_string());
        put("llm.max_in_flight", c.llm.max_in_flight.to_string());
        put("llm.mock", c.llm.mock.to_string());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_key_rejected() {
        let err = PipelineConfig::from_text("vq.stepz = 3\n").unwrap_err();
        assert!(err.to_string().contains("unknown config key 'vq.stepz'"), "{err}");
        assert!(PipelineConfig::from_text("no equals sign").is_err());
    }

    #[test]
    fn comments_blank_lines_and_overrides() {
        let mut c = PipelineConfig::from_text("# desk run\n\nseed = 7  # root\nvq.steps=100\ncls.split = 0.8, 0.1, 0.1\n").unwrap();
        assert_eq!((c.seed, c.vq.steps, c.cls.split), (7, 100, [0.8, 0.1, 0.1]));
        c.apply_override("vq.lr=0.001").unwrap();
        assert_eq!(c.vq.lr, 0.001);
        assert_eq!(c.resolved().cls.seed, 7);
    }

    #[test]
    fn echo_round_trips() {
        let mut c = PipelineConfig::default();
        for kv in ["seed=3", "vq.dilation=descending", "llm.timeout=2.5", "llm.mock=true", "metrics.bleu_mode=sentence"] {
            c.apply_override(kv).unwrap();
        }
        let back = PipelineConfig::from_text(&c.to_text()).unwrap();
        assert_eq!(back.resolved(), c.resolved());
    }

    #[test]
    fn every_documented_key_is_accepted() {
        let text = PipelineConfig::default().to_text();
        let echoed: Vec<&str> = text.lines().map(|l| l.split(" = ").next().unwrap()).collect();
        for k in KEYS {
            assert!(k == "vq.preset" || echoed.contains(&k), "{k} missing from echo");
        }
        assert!(PipelineConfig::from_text("vq.preset = paper").unwrap().vq.steps == 150_000);
    }

    #[test]
    fn invalid_values_fail_validation() {
        assert!(PipelineConfig::from_text("vq.batch = 0").unwrap().validate().is_err());
        assert!(PipelineConfig::from_text("cls.split = 0.5,0.5").is_err());
        assert!(PipelineConfig::from_text("vq.lr = fast").is_err());
    }
}
