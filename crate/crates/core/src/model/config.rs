use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which objective and decoder input layout a model uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    /// Plain encoder-decoder; the decoder has no external context slot.
    #[serde(rename = "vanilla")]
    Vanilla,
    /// Full objective `L1 + lambda2 L2 + lambda3 L3`.
    #[serde(rename = "ext_ed")]
    ExtEd,
    /// External context slot and `L2`, but no divergence term.
    #[serde(rename = "ext_ed_minus_L3")]
    ExtEdMinusL3,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Vanilla => "vanilla",
            Mode::ExtEd => "ext_ed",
            Mode::ExtEdMinusL3 => "ext_ed_minus_L3",
        }
    }

    pub fn uses_external_context(self) -> bool {
        self != Mode::Vanilla
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vanilla" => Ok(Mode::Vanilla),
            "ext_ed" => Ok(Mode::ExtEd),
            "ext_ed_minus_L3" => Ok(Mode::ExtEdMinusL3),
            other => Err(Error::Input(format!("unknown mode {other:?}"))),
        }
    }
}

/// External context fed to the decoder during training.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainEcFeed {
    /// The predictor's output, so `L1` also trains the predictor.
    Predicted,
    /// The knowledge-derived vector.
    True,
}

/// External context fed to the decoder at evaluation and generation time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalEcMode {
    Predicted,
    Oracle,
    Zero,
}

impl EvalEcMode {
    pub fn as_str(self) -> &'static str {
        match self {
            EvalEcMode::Predicted => "predicted",
            EvalEcMode::Oracle => "oracle",
            EvalEcMode::Zero => "zero",
        }
    }
}

impl std::str::FromStr for EvalEcMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "predicted" => Ok(EvalEcMode::Predicted),
            "oracle" => Ok(EvalEcMode::Oracle),
            "zero" => Ok(EvalEcMode::Zero),
            other => Err(Error::Input(format!("unknown ec mode {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub ec_dim: usize,
    pub lambda2: f64,
    pub lambda3: f64,
    pub mode: Mode,
    pub train_ec_feed: TrainEcFeed,
    pub eval_ec_mode: EvalEcMode,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            vocab_size: 5000,
            embed_dim: 100,
            hidden_dim: 128,
            ec_dim: 100,
            lambda2: 1.0,
            lambda3: 1.0,
            mode: Mode::ExtEd,
            train_ec_feed: TrainEcFeed::Predicted,
            eval_ec_mode: EvalEcMode::Predicted,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.vocab_size < 5 {
            return Err(Error::Input(format!("vocab_size must be at least 5, got {}", self.vocab_size)));
        }
        if self.embed_dim == 0 || self.hidden_dim == 0 {
            return Err(Error::Input("embed_dim and hidden_dim must be positive".into()));
        }
        if self.mode.uses_external_context() && self.ec_dim == 0 {
            return Err(Error::Input("ec_dim must be positive outside vanilla mode".into()));
        }
        if !(self.lambda2 >= 0.0 && self.lambda3 >= 0.0) || !self.lambda2.is_finite() || !self.lambda3.is_finite() {
            return Err(Error::Input("lambda2 and lambda3 must be finite and nonnegative".into()));
        }
        Ok(())
    }

    /// Width of the decoder's external context slot.
    pub fn slot_dim(&self) -> usize {
        if self.mode.uses_external_context() {
            self.ec_dim
        } else {
            0
        }
    }

    pub fn decoder_input_dim(&self) -> usize {
        self.embed_dim + self.hidden_dim + self.slot_dim()
    }

    /// Weight actually applied to `L2`.
    pub fn effective_lambda2(&self) -> f64 {
        if self.mode.uses_external_context() {
            self.lambda2
        } else {
            0.0
        }
    }

    /// Weight actually applied to `L3`.
    pub fn effective_lambda3(&self) -> f64 {
        if self.mode == Mode::ExtEd {
            self.lambda3
        } else {
            0.0
        }
    }
}
