use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Letter of Glaisher's notation. `pq = p/q`, with `n` standing for 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Letter {
    S,
    C,
    D,
    N,
}

impl Letter {
    pub(crate) fn index(self) -> usize {
        self as usize
    }
}

/// The twelve Jacobi elliptic functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EllipticKind {
    Sn,
    Cn,
    Dn,
    Ns,
    Nc,
    Nd,
    Sc,
    Sd,
    Cd,
    Cs,
    Ds,
    Dc,
}

impl EllipticKind {
    pub const ALL: [EllipticKind; 12] = [
        EllipticKind::Sn,
        EllipticKind::Cn,
        EllipticKind::Dn,
        EllipticKind::Ns,
        EllipticKind::Nc,
        EllipticKind::Nd,
        EllipticKind::Sc,
        EllipticKind::Sd,
        EllipticKind::Cd,
        EllipticKind::Cs,
        EllipticKind::Ds,
        EllipticKind::Dc,
    ];

    /// Numerator and denominator letters.
    pub fn letters(self) -> (Letter, Letter) {
        use EllipticKind::*;
        use Letter::*;
        match self {
            Sn => (S, N),
            Cn => (C, N),
            Dn => (D, N),
            Ns => (N, S),
            Nc => (N, C),
            Nd => (N, D),
            Sc => (S, C),
            Sd => (S, D),
            Cd => (C, D),
            Cs => (C, S),
            Ds => (D, S),
            Dc => (D, C),
        }
    }

    pub fn is_base(self) -> bool {
        matches!(self, EllipticKind::Sn | EllipticKind::Cn | EllipticKind::Dn)
    }

    pub fn name(self) -> &'static str {
        use EllipticKind::*;
        match self {
            Sn => "sn",
            Cn => "cn",
            Dn => "dn",
            Ns => "ns",
            Nc => "nc",
            Nd => "nd",
            Sc => "sc",
            Sd => "sd",
            Cd => "cd",
            Cs => "cs",
            Ds => "ds",
            Dc => "dc",
        }
    }
}

impl fmt::Display for EllipticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown elliptic function `{0}`")]
pub struct UnknownKind(pub String);

impl FromStr for EllipticKind {
    type Err = UnknownKind;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EllipticKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| UnknownKind(s.to_string()))
    }
}
