use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which adapter an [`super::AdaptedLinear`] carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AdapterKind {
    #[serde(rename = "none")]
    None,
    #[serde(rename = "lora")]
    Lora,
    #[serde(rename = "dora")]
    Dora,
    #[serde(rename = "temporal-dora")]
    TemporalDora,
    #[serde(rename = "st-adapter")]
    StAdapter,
    #[serde(rename = "lora+mha")]
    LoraMha,
    #[serde(rename = "dora+mha")]
    DoraMha,
}

impl AdapterKind {
    pub const ALL: [AdapterKind; 7] = [
        AdapterKind::None,
        AdapterKind::Lora,
        AdapterKind::Dora,
        AdapterKind::TemporalDora,
        AdapterKind::StAdapter,
        AdapterKind::LoraMha,
        AdapterKind::DoraMha,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AdapterKind::None => "none",
            AdapterKind::Lora => "lora",
            AdapterKind::Dora => "dora",
            AdapterKind::TemporalDora => "temporal-dora",
            AdapterKind::StAdapter => "st-adapter",
            AdapterKind::LoraMha => "lora+mha",
            AdapterKind::DoraMha => "dora+mha",
        }
    }

    /// True when the adapter can mix information across frames.
    pub fn is_temporal(self) -> bool {
        matches!(
            self,
            AdapterKind::TemporalDora
                | AdapterKind::StAdapter
                | AdapterKind::LoraMha
                | AdapterKind::DoraMha
        )
    }
}

impl fmt::Display for AdapterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AdapterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        Ok(match norm.as_str() {
            "none" | "frozen" => AdapterKind::None,
            "lora" => AdapterKind::Lora,
            "dora" => AdapterKind::Dora,
            "temporal-dora" | "temporaldora" | "tdora" => AdapterKind::TemporalDora,
            "st-adapter" | "stadapter" | "st" => AdapterKind::StAdapter,
            "lora+mha" | "lora-mha" => AdapterKind::LoraMha,
            "dora+mha" | "dora-mha" => AdapterKind::DoraMha,
            _ => return Err(Error::Config(format!("unknown adapter kind `{s}`"))),
        })
    }
}

/// Sequence transform applied over the frame axis inside the bottleneck.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OperatorKind {
    #[serde(rename = "mha")]
    Mha,
    #[serde(rename = "self-attention")]
    SelfAttention,
    #[serde(rename = "lstm")]
    Lstm,
    #[serde(rename = "temporal-conv")]
    TemporalConv,
    #[serde(rename = "identity")]
    Identity,
}

impl OperatorKind {
    pub const ALL: [OperatorKind; 5] = [
        OperatorKind::TemporalConv,
        OperatorKind::Lstm,
        OperatorKind::SelfAttention,
        OperatorKind::Mha,
        OperatorKind::Identity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OperatorKind::Mha => "mha",
            OperatorKind::SelfAttention => "self-attention",
            OperatorKind::Lstm => "lstm",
            OperatorKind::TemporalConv => "temporal-conv",
            OperatorKind::Identity => "identity",
        }
    }
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OperatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        Ok(match norm.as_str() {
            "mha" => OperatorKind::Mha,
            "self-attention" | "selfattention" | "sa" => OperatorKind::SelfAttention,
            "lstm" => OperatorKind::Lstm,
            "temporal-conv" | "conv" | "conv3d" | "3d-conv" => OperatorKind::TemporalConv,
            "identity" | "none" => OperatorKind::Identity,
            _ => return Err(Error::Config(format!("unknown temporal operator `{s}`"))),
        })
    }
}

/// Plain key-value adapter description, as stored in experiment configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdapterConfig {
    pub kind: AdapterKind,
    pub rank: usize,
    /// Defaults to `2 * rank`, i.e. a residual multiplier of 2.
    pub alpha: Option<f64>,
    pub operator: OperatorKind,
    pub heads: usize,
    pub pos_embed: bool,
    pub t_max: usize,
    /// ST-Adapter bottleneck width; defaults to half the input width.
    pub d_st: Option<usize>,
    pub k_t: usize,
    pub epsilon: f64,
}

impl Default for AdapterConfig {
    fn default() -> Self {
        Self {
            kind: AdapterKind::TemporalDora,
            rank: 8,
            alpha: None,
            operator: OperatorKind::Mha,
            heads: 4,
            pos_embed: true,
            t_max: 8,
            d_st: None,
            k_t: 3,
            epsilon: 1e-8,
        }
    }
}

impl AdapterConfig {
    pub fn of_kind(kind: AdapterKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn uses_operator(&self) -> bool {
        matches!(
            self.kind,
            AdapterKind::TemporalDora | AdapterKind::LoraMha | AdapterKind::DoraMha
        )
    }

    /// Short name such as `lora`, `temporal-dora/lstm` or
    /// `temporal-dora/mha-nopos`.
    pub fn label(&self) -> String {
        if !self.uses_operator() {
            return self.kind.name().to_string();
        }
        let pos = if self.operator == OperatorKind::Mha && !self.pos_embed {
            "-nopos"
        } else {
            ""
        };
        format!("{}/{}{pos}", self.kind.name(), self.operator.name())
    }

    /// Every adapter kind at `rank`, each operator-bearing kind under every
    /// operator, and temporal DoRA without positional embeddings.
    pub fn variant_grid(rank: usize, heads: usize, t_max: usize) -> Vec<AdapterConfig> {
        let base = |kind, operator| AdapterConfig {
            kind,
            rank,
            operator,
            heads,
            t_max,
            ..AdapterConfig::default()
        };
        let mut out: Vec<AdapterConfig> =
            [AdapterKind::Lora, AdapterKind::Dora, AdapterKind::StAdapter]
                .into_iter()
                .map(|k| base(k, OperatorKind::Mha))
                .collect();
        for kind in [
            AdapterKind::TemporalDora,
            AdapterKind::LoraMha,
            AdapterKind::DoraMha,
        ] {
            out.extend(OperatorKind::ALL.into_iter().map(|op| base(kind, op)));
        }
        out.push(AdapterConfig {
            pos_embed: false,
            ..base(AdapterKind::TemporalDora, OperatorKind::Mha)
        });
        out
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(2.0 * self.rank as f64)
    }

    /// The `alpha / r` residual multiplier.
    pub fn scaling(&self) -> f64 {
        self.alpha() / self.rank as f64
    }

    pub fn d_st(&self, c_in: usize) -> usize {
        self.d_st.unwrap_or((c_in / 2).max(1))
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == AdapterKind::None {
            return Ok(());
        }
        if self.rank == 0 {
            return Err(Error::Config("adapter rank must be positive".into()));
        }
        if self.alpha() <= 0.0 {
            return Err(Error::Config("adapter alpha must be positive".into()));
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::Config("epsilon must be non-negative".into()));
        }
        let uses_operator = self.uses_operator();
        if uses_operator && self.operator == OperatorKind::Mha {
            if self.heads == 0 || self.rank % self.heads != 0 {
                return Err(Error::Config(format!(
                    "MHA needs rank divisible by heads (rank {}, heads {})",
                    self.rank, self.heads
                )));
            }
            if self.pos_embed && self.t_max == 0 {
                return Err(Error::Config(
                    "t_max must be positive with pos_embed".into(),
                ));
            }
        }
        if (uses_operator && self.operator == OperatorKind::TemporalConv)
            || self.kind == AdapterKind::StAdapter
        {
            if self.k_t % 2 == 0 {
                return Err(Error::Config(format!("k_t must be odd, got {}", self.k_t)));
            }
        }
        Ok(())
    }
}
