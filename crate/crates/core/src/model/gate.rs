use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::tensor::Activation;

/// How the convolution output is gated.
///
/// | kind      | main `f` | gate `g` |
/// |-----------|----------|----------|
/// | `Glu`     | identity | sigmoid  |
/// | `Gtu`     | tanh     | sigmoid  |
/// | `Gtru`    | tanh     | relu     |
/// | `Ungated` | relu     | —        |
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GateKind {
    #[serde(rename = "glu")]
    Glu,
    #[serde(rename = "gtu")]
    Gtu,
    #[serde(rename = "gtru")]
    Gtru,
    /// Plain CNN with relu feature maps.
    #[serde(rename = "none")]
    Ungated,
}

impl GateKind {
    pub const ALL: [GateKind; 4] = [GateKind::Glu, GateKind::Gtu, GateKind::Gtru, GateKind::Ungated];

    pub fn main_activation(self) -> Activation {
        match self {
            GateKind::Glu => Activation::Identity,
            GateKind::Gtu | GateKind::Gtru => Activation::Tanh,
            GateKind::Ungated => Activation::Relu,
        }
    }

    pub fn gate_activation(self) -> Option<Activation> {
        match self {
            GateKind::Glu | GateKind::Gtu => Some(Activation::Sigmoid),
            GateKind::Gtru => Some(Activation::Relu),
            GateKind::Ungated => None,
        }
    }

    pub fn is_gated(self) -> bool {
        self != GateKind::Ungated
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::Glu => "glu",
            GateKind::Gtu => "gtu",
            GateKind::Gtru => "gtru",
            GateKind::Ungated => "none",
        }
    }

}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "glu" => Ok(GateKind::Glu),
            "gtu" => Ok(GateKind::Gtu),
            "gtru" => Ok(GateKind::Gtru),
            "none" | "cnn" => Ok(GateKind::Ungated),
            other => Err(Error::invalid(format!(
                "unknown gate {other:?} (expected glu, gtu, gtru or none)"
            ))),
        }
    }
}
