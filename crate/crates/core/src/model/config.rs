use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Non-linear map applied after the Hadamard merge in each block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    /// `LN(ReLU(M W1 + b1) W2 + b2 + M)`
    Pffn,
    /// `LN(M W1)`, no bias
    Sffn,
}

/// How contextual-embedding tensors are shared across blocks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sharing {
    ShareNothing,
    /// One aggregation layer for all blocks.
    ShareA,
    /// Aggregation and projection layers both shared across blocks.
    ShareAP,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Ablations {
    pub no_tce: bool,
    pub no_ffn: bool,
    pub no_ln: bool,
    pub no_rc: bool,
}

impl Ablations {
    pub const NONE: Ablations = Ablations {
        no_tce: false,
        no_ffn: false,
        no_ln: false,
        no_rc: false,
    };

    pub fn bits(self) -> u8 {
        (self.no_tce as u8) | (self.no_ffn as u8) << 1 | (self.no_ln as u8) << 2 | (self.no_rc as u8) << 3
    }

    pub fn from_bits(bits: u8) -> Result<Self> {
        if bits & !0b1111 != 0 {
            return Err(Error::config(format!("unknown ablation bits {bits:#b}")));
        }
        Ok(Self {
            no_tce: bits & 1 != 0,
            no_ffn: bits & 2 != 0,
            no_ln: bits & 4 != 0,
            no_rc: bits & 8 != 0,
        })
    }

    /// Every setting with at most one flag raised.
    pub fn singles() -> [Ablations; 5] {
        let mut out = [Ablations::NONE; 5];
        out[1].no_tce = true;
        out[2].no_ffn = true;
        out[3].no_ln = true;
        out[4].no_rc = true;
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    /// Number of fields `f`.
    pub fields: usize,
    /// Embedding size `k`.
    pub embedding_size: usize,
    /// Aggregation-layer width `t`.
    pub aggregation_width: usize,
    /// Number of stacked blocks; 0 reduces the model to logistic regression over embeddings.
    pub blocks: usize,
    pub variant: Variant,
    pub sharing: Sharing,
    pub ablations: Ablations,
    /// Coefficient of the squared-L2 penalty on weight tensors.
    pub l2: f64,
}

impl ModelConfig {
    pub fn new(fields: usize) -> Self {
        Self {
            fields,
            embedding_size: 10,
            aggregation_width: 20,
            blocks: 3,
            variant: Variant::Sffn,
            sharing: Sharing::ShareNothing,
            ablations: Ablations::NONE,
            l2: 0.0,
        }
    }

    /// Width of the concatenated embedding layer, `f * k`.
    pub fn embedding_width(&self) -> usize {
        self.fields * self.embedding_size
    }

    pub fn validate(&self) -> Result<()> {
        if self.fields == 0 {
            return Err(Error::config("model needs at least one field"));
        }
        if self.embedding_size == 0 {
            return Err(Error::config("embedding size must be >= 1"));
        }
        if self.aggregation_width == 0 {
            return Err(Error::config("aggregation width must be >= 1"));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::config(format!("l2 must be finite and >= 0, got {}", self.l2)));
        }
        if self.ablations.no_rc && self.variant == Variant::Sffn {
            return Err(Error::config("no_rc only applies to the PFFN variant (SFFN has no residual)"));
        }
        Ok(())
    }

    pub(crate) fn uses_tce(&self) -> bool {
        self.blocks > 0 && !self.ablations.no_tce
    }

    pub(crate) fn uses_ffn(&self) -> bool {
        !self.ablations.no_ffn
    }

    /// Layer norm wraps the FFN, so it disappears along with it.
    pub(crate) fn uses_ln(&self) -> bool {
        !self.ablations.no_ffn && !self.ablations.no_ln
    }

    pub(crate) fn aggregation_slots(&self) -> usize {
        match (self.uses_tce(), self.sharing) {
            (false, _) => 0,
            (true, Sharing::ShareNothing) => self.blocks,
            (true, Sharing::ShareA | Sharing::ShareAP) => 1,
        }
    }

    pub(crate) fn projection_slots(&self) -> usize {
        match (self.uses_tce(), self.sharing) {
            (false, _) => 0,
            (true, Sharing::ShareNothing | Sharing::ShareA) => self.blocks,
            (true, Sharing::ShareAP) => 1,
        }
    }

    pub(crate) fn aggregation_slot(&self, block: usize) -> usize {
        match self.sharing {
            Sharing::ShareNothing => block,
            _ => 0,
        }
    }

    pub(crate) fn projection_slot(&self, block: usize) -> usize {
        match self.sharing {
            Sharing::ShareAP => 0,
            _ => block,
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pffn" => Ok(Variant::Pffn),
            "sffn" => Ok(Variant::Sffn),
            _ => Err(Error::config(format!("unknown variant `{s}` (pffn|sffn)"))),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Pffn => "pffn",
            Variant::Sffn => "sffn",
        })
    }
}

impl FromStr for Sharing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_', '&'], "").as_str() {
            "sharenothing" | "none" => Ok(Sharing::ShareNothing),
            "sharea" | "a" => Ok(Sharing::ShareA),
            "shareap" | "ap" => Ok(Sharing::ShareAP),
            _ => Err(Error::config(format!(
                "unknown sharing `{s}` (share-nothing|share-a|share-ap)"
            ))),
        }
    }
}

impl fmt::Display for Sharing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sharing::ShareNothing => "share-nothing",
            Sharing::ShareA => "share-a",
            Sharing::ShareAP => "share-ap",
        })
    }
}

impl FromStr for Ablations {
    type Err = Error;

    /// Comma-separated subset of `no_tce,no_ffn,no_ln,no_rc`; empty or `none` for no ablation.
    fn from_str(s: &str) -> Result<Self> {
        let mut out = Ablations::NONE;
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part.to_ascii_lowercase().replace('-', "_").as_str() {
                "none" => {}
                "no_tce" => out.no_tce = true,
                "no_ffn" => out.no_ffn = true,
                "no_ln" => out.no_ln = true,
                "no_rc" => out.no_rc = true,
                _ => return Err(Error::config(format!("unknown ablation `{part}`"))),
            }
        }
        Ok(out)
    }
}

impl fmt::Display for Ablations {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if self.no_tce {
            parts.push("no_tce");
        }
        if self.no_ffn {
            parts.push("no_ffn");
        }
        if self.no_ln {
            parts.push("no_ln");
        }
        if self.no_rc {
            parts.push("no_rc");
        }
        if parts.is_empty() {
            f.write_str("none")
        } else {
            f.write_str(&parts.join(","))
        }
    }
}
