//! Prefix productivity and the blended-productivity optimum.
//!
//! `S_p` is the mean value of the top `p` items. Blending the top `p` items
//! with a fixed second group of `j` items worth `J` gives
//! `T_p = (p * S_p + J) / (p + j)`. Since `T_p - T_{p-1}` has the sign of
//! `r_p - T_{p-1}` and `r` is non-increasing, `T` rises while the next item
//! beats the running blend and never rises again once it stops.

use serde::{Deserialize, Serialize};

use crate::classifier::cumulative_shares;
use crate::error::{Error, Result};
use crate::model::PortfolioSnapshot;
use crate::money::Money;

#[derive(Clone, Debug, PartialEq)]
pub struct ProductivityCurve {
    values: Vec<Money>,
    s: Vec<f64>,
}

impl ProductivityCurve {
    /// `S_1..S_n`.
    pub fn s(&self) -> &[f64] {
        &self.s
    }

    pub fn values(&self) -> &[Money] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }
}

/// Builds `S_p` in one pass with `S_{p+1} = (p * S_p + r_{p+1}) / (p + 1)`.
pub fn productivity_curve(snapshot: &PortfolioSnapshot) -> Result<ProductivityCurve> {
    curve_from_values(snapshot.values().collect())
}

pub fn curve_from_values(values: Vec<Money>) -> Result<ProductivityCurve> {
    if values.is_empty() {
        return Err(Error::EmptyPortfolio);
    }
    let mut s = Vec::with_capacity(values.len());
    let mut current = 0.0;
    for (p, r) in values.iter().enumerate() {
        let p = p as f64;
        current = (p * current + r.to_f64()) / (p + 1.0);
        s.push(current);
    }
    Ok(ProductivityCurve { values, s })
}

/// The fixed second group: `j` items holding `J` in total.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlendSpec {
    j: u64,
    total: Money,
}

impl BlendSpec {
    pub fn new(j: u64, total: Money) -> Result<Self> {
        if j == 0 {
            return Err(Error::InvalidConfig(
                "blend item count must be at least 1".into(),
            ));
        }
        if total.is_negative() {
            return Err(Error::InvalidConfig(
                "blend value must be nonnegative".into(),
            ));
        }
        Ok(BlendSpec { j, total })
    }

    pub fn item_count(&self) -> u64 {
        self.j
    }

    pub fn total(&self) -> Money {
        self.total
    }

    /// `J / j`.
    pub fn productivity(&self) -> f64 {
        self.total.to_f64() / self.j as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlendCurve {
    /// `T_1..T_n`.
    pub t: Vec<f64>,
    /// `T_0 = J / j`.
    pub t0: f64,
    pub p_star: usize,
    /// Cumulative share of the top `p_star` items; `None` for a zero-value portfolio.
    pub t_a_star: Option<f64>,
}

pub fn blend_curve(curve: &ProductivityCurve, blend: &BlendSpec) -> BlendCurve {
    let j = blend.j as f64;
    let big_j = blend.total.to_f64();
    let t = curve
        .s
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let p = (i + 1) as f64;
            (p * s + big_j) / (p + j)
        })
        .collect();
    let optimum = optimal_blend_point(curve, blend);
    let total: u128 = curve.values.iter().map(|v| v.minor_units() as u128).sum();
    let t_a_star = (total > 0).then(|| {
        let prefix: u128 = curve.values[..optimum.p_star]
            .iter()
            .map(|v| v.minor_units() as u128)
            .sum();
        prefix as f64 / total as f64
    });
    BlendCurve {
        t,
        t0: blend.productivity(),
        p_star: optimum.p_star,
        t_a_star,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BlendOptimum {
    pub p_star: usize,
    /// `r_{p*} - T_{p*}`; zero in the continuous limit.
    pub residual: f64,
}

/// Smallest `p` maximizing `T_p`, found as the last `p` whose item value
/// exceeds the blend of everything before it (`r_p > T_{p-1}`), or 1 when
/// no item does. Comparisons are exact on minor units.
pub fn optimal_blend_point(curve: &ProductivityCurve, blend: &BlendSpec) -> BlendOptimum {
    let big_j = blend.total.minor_units() as u128;
    let j = blend.j as u128;
    let mut prefix: u128 = 0;
    let mut p_star = 1;
    for (i, r) in curve.values.iter().enumerate() {
        let r = r.minor_units() as u128;
        // r_p * (p - 1 + j) > prefix_{p-1} + J
        let lhs = r.checked_mul(i as u128 + j);
        let rhs = prefix + big_j;
        if lhs.is_none_or(|lhs| lhs > rhs) {
            p_star = i + 1;
        }
        prefix += r;
    }
    let p = p_star as f64;
    let t_star = (p * curve.s[p_star - 1] + blend.total.to_f64()) / (p + blend.j as f64);
    BlendOptimum {
        p_star,
        residual: curve.values[p_star - 1].to_f64() - t_star,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TaSolution {
    pub p_star: usize,
    /// `C_{p*}`: the first-pass `t_a` that selects exactly the top `p*` items.
    pub t_a_star: f64,
    pub residual: f64,
}

/// The first-pass `t_a` maximizing the productivity of the A class when the
/// later passes contribute a fixed `blend`.
pub fn solve_t_a(snapshot: &PortfolioSnapshot, blend: &BlendSpec) -> Result<TaSolution> {
    let shares = cumulative_shares(snapshot)?;
    let curve = productivity_curve(snapshot)?;
    let optimum = optimal_blend_point(&curve, blend);
    Ok(TaSolution {
        p_star: optimum.p_star,
        t_a_star: shares.at(optimum.p_star),
        residual: optimum.residual,
    })
}
