use std::fmt;

use serde::{Deserialize, Serialize};

/// A money amount in integer minor units (cents for USD).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Money {
    pub minor: i64,
    #[serde(default = "default_currency")]
    pub currency: String,
}

fn default_currency() -> String {
    "USD".to_string()
}

impl Money {
    pub fn new(minor: i64, currency: impl Into<String>) -> Self {
        Self {
            minor,
            currency: currency.into(),
        }
    }

    pub fn usd_whole(dollars: i64) -> Self {
        Self::new(dollars * 100, "USD")
    }

    pub fn is_positive(&self) -> bool {
        self.minor > 0
    }

    pub fn as_major(&self) -> f64 {
        self.minor as f64 / 100.0
    }
}

fn group_thousands(mut n: u64) -> String {
    let mut parts = Vec::new();
    loop {
        if n < 1000 {
            parts.push(n.to_string());
            break;
        }
        parts.push(format!("{:03}", n % 1000));
        n /= 1000;
    }
    parts.reverse();
    parts.join(",")
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.minor < 0 { "-" } else { "" };
        let abs = self.minor.unsigned_abs();
        let whole = group_thousands(abs / 100);
        let cents = abs % 100;
        let amount = if cents == 0 {
            whole
        } else {
            format!("{whole}.{cents:02}")
        };
        if self.currency == "USD" {
            write!(f, "{sign}${amount}")
        } else {
            write!(f, "{sign}{amount} {}", self.currency)
        }
    }
}
