use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

/// Logarithm base used by the polylogarithmic thresholds (`log³ n`, `log⁵ n`,
/// `log⁸ n / n`, ...). Natural logarithm unless configured otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum LogBase {
    #[default]
    Natural,
    Two,
    Ten,
    Custom(f64),
}

impl LogBase {
    pub fn log(self, x: f64) -> f64 {
        match self {
            LogBase::Natural => x.ln(),
            LogBase::Two => x.log2(),
            LogBase::Ten => x.log10(),
            LogBase::Custom(b) => x.ln() / b.ln(),
        }
    }

    /// `⌈log^k n⌉`, at least 1.
    pub fn ceil_log_pow(self, n: usize, k: i32) -> usize {
        (self.log(n as f64).powi(k).ceil() as usize).max(1)
    }
}

impl fmt::Display for LogBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LogBase::Natural => f.write_str("e"),
            LogBase::Two => f.write_str("2"),
            LogBase::Ten => f.write_str("10"),
            LogBase::Custom(b) => write!(f, "{b}"),
        }
    }
}

impl FromStr for LogBase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "e" | "ln" | "natural" => Ok(LogBase::Natural),
            "2" => Ok(LogBase::Two),
            "10" => Ok(LogBase::Ten),
            other => match other.parse::<f64>() {
                Ok(b) if b > 1.0 => Ok(LogBase::Custom(b)),
                _ => Err(format!("invalid log base `{other}`")),
            },
        }
    }
}

impl Serialize for LogBase {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}
