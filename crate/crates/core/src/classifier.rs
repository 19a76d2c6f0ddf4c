//! Single-slice ABCD classification on cumulative value shares.
//!
//! Item `k` of a value-descending slice has cumulative share `C_k`, the
//! fraction of slice value held by items `1..=k` (with `C_0 = 0`). An item
//! takes the first class whose threshold `t` satisfies either `C_k <= t`
//! (containment) or `C_{k-1} < t < C_k` (the item straddles `t` and is pulled
//! up). Since `C_0 = 0 < t_a`, the first item is always A.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ClassLabel, PortfolioSnapshot, Thresholds};
use crate::money::Money;

/// Absolute tolerance for share-versus-threshold comparisons. A share within
/// this distance of a threshold counts as equal to it.
pub const SHARE_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct CumulativeShares {
    shares: Vec<f64>,
}

impl CumulativeShares {
    /// Shares from values already in descending order.
    pub fn from_values(values: impl IntoIterator<Item = Money>) -> Result<Self> {
        let values: Vec<Money> = values.into_iter().collect();
        if values.is_empty() {
            return Err(Error::EmptyPortfolio);
        }
        let total: u128 = values.iter().map(|v| v.minor_units() as u128).sum();
        if total == 0 {
            return Err(Error::ZeroTotal);
        }
        let denom = total as f64;
        let mut running: u128 = 0;
        let shares = values
            .iter()
            .map(|v| {
                running += v.minor_units() as u128;
                running as f64 / denom
            })
            .collect();
        Ok(CumulativeShares { shares })
    }

    /// Shares given directly, e.g. read off a published table. They must lie
    /// in `(0, 1]`, be non-decreasing, and end at 1.
    pub fn from_shares(shares: Vec<f64>) -> Result<Self> {
        let Some(&last) = shares.last() else {
            return Err(Error::EmptyPortfolio);
        };
        if shares
            .iter()
            .any(|c| !(*c > 0.0 && *c <= 1.0 + SHARE_TOLERANCE))
        {
            return Err(Error::InvalidConfig("shares must lie in (0, 1]".into()));
        }
        if shares.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidConfig("shares must be non-decreasing".into()));
        }
        if (last - 1.0).abs() > SHARE_TOLERANCE {
            return Err(Error::InvalidConfig(format!("last share is {last}, not 1")));
        }
        Ok(CumulativeShares { shares })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.shares
    }

    pub fn len(&self) -> usize {
        self.shares.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shares.is_empty()
    }

    /// `C_k` for 1-based `k`; `C_0` is 0.
    pub fn at(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.shares[k - 1]
        }
    }

    /// Shares rounded half-away-from-zero to `decimals` places, as when a
    /// classification is computed from a tabulated share column.
    pub fn quantized(&self, decimals: u32) -> CumulativeShares {
        CumulativeShares {
            shares: self.shares.iter().map(|&c| round_to(c, decimals)).collect(),
        }
    }
}

pub(crate) fn round_to(x: f64, decimals: u32) -> f64 {
    let scale = 10_f64.powi(decimals as i32);
    (x * scale).round() / scale
}

pub fn cumulative_shares(snapshot: &PortfolioSnapshot) -> Result<CumulativeShares> {
    CumulativeShares::from_values(snapshot.values())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassAssignment {
    labels: Vec<ClassLabel>,
}

impl ClassAssignment {
    pub(crate) fn from_labels(labels: Vec<ClassLabel>) -> Self {
        ClassAssignment { labels }
    }

    pub fn labels(&self) -> &[ClassLabel] {
        &self.labels
    }

    pub fn into_labels(self) -> Vec<ClassLabel> {
        self.labels
    }

    pub fn count(&self, label: ClassLabel) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    /// Length of the leading run of A labels.
    pub fn a_count(&self) -> usize {
        self.labels
            .iter()
            .take_while(|&&l| l == ClassLabel::A)
            .count()
    }
}

/// Classifies every item of a slice against `t`.
pub fn classify(shares: &CumulativeShares, t: &Thresholds) -> ClassAssignment {
    let bands = [
        (t.t_a(), ClassLabel::A),
        (t.t_b(), ClassLabel::B),
        (t.t_c(), ClassLabel::C),
    ];
    ClassAssignment::from_labels(classify_bands(shares.as_slice(), &bands, ClassLabel::D))
}

/// [`classify`] with shares and thresholds both rounded to `decimals`
/// places before comparing, as when working from a tabulated share column.
pub fn classify_at_precision(
    shares: &CumulativeShares,
    t: &Thresholds,
    decimals: Option<u32>,
) -> ClassAssignment {
    let Some(d) = decimals else {
        return classify(shares, t);
    };
    let bands = [
        (round_to(t.t_a(), d), ClassLabel::A),
        (round_to(t.t_b(), d), ClassLabel::B),
        (round_to(t.t_c(), d), ClassLabel::C),
    ];
    let quantized = shares.quantized(d);
    ClassAssignment::from_labels(classify_bands(quantized.as_slice(), &bands, ClassLabel::D))
}

/// Whether item `k` (with previous share `prev`, own share `cur`) belongs to
/// the band bounded above by `t`.
#[inline]
pub(crate) fn within_band(prev: f64, cur: f64, t: f64) -> bool {
    cur <= t + SHARE_TOLERANCE || (prev < t - SHARE_TOLERANCE && cur > t + SHARE_TOLERANCE)
}

/// First-match banding over increasing thresholds; items past every band get `fallback`.
pub(crate) fn classify_bands(
    shares: &[f64],
    bands: &[(f64, ClassLabel)],
    fallback: ClassLabel,
) -> Vec<ClassLabel> {
    let mut prev = 0.0;
    shares
        .iter()
        .map(|&cur| {
            let label = bands
                .iter()
                .find(|&&(t, _)| within_band(prev, cur, t))
                .map_or(fallback, |&(_, l)| l);
            prev = cur;
            label
        })
        .collect()
}

/// B/C boundaries for the items that remain after A items are removed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageTwoThresholds {
    pub t_b: f64,
    pub t_c: f64,
}

/// Maps `t_b` and `t_c` onto the remainder left after removing
/// `removed_share` of total value: `t' = (t - removed) / (1 - removed)`.
///
/// Fails with [`Error::DegenerateRenormalization`] when the removed share
/// already reaches `t_b`; see [`remainder_bands`] for how that case is
/// classified.
pub fn renormalize_thresholds(t: &Thresholds, removed_share: f64) -> Result<StageTwoThresholds> {
    check_removed_share(removed_share)?;
    if removed_share >= t.t_b() - SHARE_TOLERANCE {
        return Err(Error::DegenerateRenormalization {
            removed_share,
            t_b: t.t_b(),
        });
    }
    Ok(StageTwoThresholds {
        t_b: rescale(t.t_b(), removed_share),
        t_c: rescale(t.t_c(), removed_share),
    })
}

fn check_removed_share(removed_share: f64) -> Result<()> {
    if !(0.0..1.0).contains(&removed_share) {
        return Err(Error::InvalidThresholds(format!(
            "removed share must lie in [0, 1), got {removed_share}"
        )));
    }
    Ok(())
}

fn rescale(t: f64, removed: f64) -> f64 {
    ((t - removed) / (1.0 - removed)).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON)
}

/// How the remainder is banded for a given removed share.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RemainderBands {
    /// Regular B, C and D banding.
    Full(StageTwoThresholds),
    /// Removed share reached `t_b`: only C (up to the rescaled `t_c`) and D.
    CdOnly { t_c: f64 },
    /// Removed share reached `t_c` (or everything was removed): all D.
    AllD,
}

pub fn remainder_bands(t: &Thresholds, removed_share: f64) -> Result<RemainderBands> {
    if removed_share >= 1.0 {
        return Ok(RemainderBands::AllD);
    }
    match renormalize_thresholds(t, removed_share) {
        Ok(st) => Ok(RemainderBands::Full(st)),
        Err(Error::DegenerateRenormalization { .. }) => {
            if removed_share >= t.t_c() - SHARE_TOLERANCE {
                Ok(RemainderBands::AllD)
            } else {
                Ok(RemainderBands::CdOnly {
                    t_c: rescale(t.t_c(), removed_share),
                })
            }
        }
        Err(e) => Err(e),
    }
}

impl RemainderBands {
    pub(crate) fn classify(&self, shares: &[f64], decimals: Option<u32>) -> Vec<ClassLabel> {
        let q = |t: f64| decimals.map_or(t, |d| round_to(t, d));
        match *self {
            RemainderBands::Full(st) => classify_bands(
                shares,
                &[(q(st.t_b), ClassLabel::B), (q(st.t_c), ClassLabel::C)],
                ClassLabel::D,
            ),
            RemainderBands::CdOnly { t_c } => {
                classify_bands(shares, &[(q(t_c), ClassLabel::C)], ClassLabel::D)
            }
            RemainderBands::AllD => vec![ClassLabel::D; shares.len()],
        }
    }
}
