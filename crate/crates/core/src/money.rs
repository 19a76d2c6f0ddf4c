//! Exact monetary amounts held as integer minor units.

use std::fmt;
use std::iter::Sum;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Number of fractional decimal digits carried by [`Money`].
pub const MONEY_DECIMALS: u32 = 4;

const SCALE: i64 = 10_i64.pow(MONEY_DECIMALS);

/// A decimal money amount with four fractional digits, stored as an integer
/// count of 1/10000 units. Totals never drift.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Money(i64);

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MoneyParseError {
    Empty,
    Negative,
    Malformed(String),
    TooPrecise(String),
    Overflow(String),
}

impl fmt::Display for MoneyParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MoneyParseError::Empty => write!(f, "empty value"),
            MoneyParseError::Negative => write!(f, "negative value"),
            MoneyParseError::Malformed(s) => write!(f, "`{s}` is not a plain decimal number"),
            MoneyParseError::TooPrecise(s) => {
                write!(f, "`{s}` has more than {MONEY_DECIMALS} fractional digits")
            }
            MoneyParseError::Overflow(s) => write!(f, "`{s}` is out of range"),
        }
    }
}

impl std::error::Error for MoneyParseError {}

impl Money {
    pub const ZERO: Money = Money(0);

    pub const fn from_minor_units(units: i64) -> Self {
        Money(units)
    }

    /// Whole currency units, e.g. `Money::from_units(550)` is $550.
    pub fn from_units(units: i64) -> Self {
        Money(units.checked_mul(SCALE).expect("money amount out of range"))
    }

    pub const fn minor_units(self) -> i64 {
        self.0
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / SCALE as f64
    }

    /// Multiplies by a nonnegative integer factor, returning `None` on overflow.
    pub fn checked_scale(self, factor: i64) -> Option<Money> {
        self.0.checked_mul(factor).map(Money)
    }
}

impl FromStr for Money {
    type Err = MoneyParseError;

    fn from_str(raw: &str) -> Result<Self, Self::Err> {
        let s = raw.trim();
        if s.is_empty() {
            return Err(MoneyParseError::Empty);
        }
        let (negative, digits) = match s.as_bytes()[0] {
            b'-' => (true, &s[1..]),
            b'+' => (false, &s[1..]),
            _ => (false, s),
        };
        let (int_part, frac_part) = match digits.split_once('.') {
            Some((i, f)) => (i, f),
            None => (digits, ""),
        };
        let well_formed = !(int_part.is_empty() && frac_part.is_empty())
            && int_part.bytes().all(|b| b.is_ascii_digit())
            && frac_part.bytes().all(|b| b.is_ascii_digit())
            && !(digits.ends_with('.') && frac_part.is_empty() && int_part.is_empty());
        if !well_formed {
            return Err(MoneyParseError::Malformed(raw.to_string()));
        }
        let frac_trimmed = frac_part.trim_end_matches('0');
        if frac_trimmed.len() > MONEY_DECIMALS as usize {
            return Err(MoneyParseError::TooPrecise(raw.to_string()));
        }
        let overflow = || MoneyParseError::Overflow(raw.to_string());
        let int_value: i64 = if int_part.is_empty() {
            0
        } else {
            int_part.parse().map_err(|_| overflow())?
        };
        let mut frac_value: i64 = 0;
        for (i, b) in frac_trimmed.bytes().enumerate() {
            frac_value += i64::from(b - b'0') * 10_i64.pow(MONEY_DECIMALS - 1 - i as u32);
        }
        let units = int_value
            .checked_mul(SCALE)
            .and_then(|v| v.checked_add(frac_value))
            .ok_or_else(overflow)?;
        if negative && units != 0 {
            return Err(MoneyParseError::Negative);
        }
        Ok(Money(units))
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let int = abs / SCALE as u64;
        let frac = abs % SCALE as u64;
        if frac == 0 {
            write!(f, "{sign}{int}")
        } else {
            let digits = format!("{:0width$}", frac, width = MONEY_DECIMALS as usize);
            write!(f, "{sign}{int}.{}", digits.trim_end_matches('0'))
        }
    }
}

impl Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Self {
        Money(iter.map(|m| m.0).sum())
    }
}

impl Serialize for Money {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Money {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Text(String),
            Int(u64),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Text(s) => s.parse().map_err(serde::de::Error::custom),
            Repr::Int(n) => i64::try_from(n)
                .ok()
                .and_then(|n| n.checked_mul(SCALE))
                .map(Money)
                .ok_or_else(|| serde::de::Error::custom("money amount out of range")),
        }
    }
}

/// Sum of item values in minor units; wide enough for any portfolio.
pub(crate) fn total_minor(values: impl Iterator<Item = Money>) -> u128 {
    values.map(|m| m.0 as u128).sum()
}

/// Renders a whole-portfolio total held in minor units.
pub fn format_total(minor: u128) -> String {
    let scale = SCALE as u128;
    let int = minor / scale;
    let frac = minor % scale;
    if frac == 0 {
        int.to_string()
    } else {
        let digits = format!("{:0width$}", frac, width = MONEY_DECIMALS as usize);
        format!("{int}.{}", digits.trim_end_matches('0'))
    }
}
