//! Herfindahl-Hirschman concentration of portfolio slices, and the policy
//! that raises `t_a` for concentrated slices.
//!
//! For a slice with value shares `s_i`, `H = 10^4 * sum(s_i^2)`, ranging from
//! `10^4 / n` (all values equal) to `10^4` (one item holds everything).

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{classify, cumulative_shares};
use crate::error::{Error, Result};
use crate::model::{PortfolioSnapshot, SliceKey, Thresholds};
use crate::money::{format_total, Money};

pub const H_MAX: f64 = 10_000.0;

/// Margin kept between an adjusted `t_a` and `t_b`.
pub const T_A_CEILING_MARGIN: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationIndex {
    pub h: f64,
    pub n: usize,
    /// `sum(s_i^2)` as a reduced fraction, when the integer sums fit.
    #[serde(skip)]
    exact: Option<(u128, u128)>,
}

impl ConcentrationIndex {
    /// Sum of squared shares as a reduced fraction `(numerator, denominator)`.
    pub fn exact_ratio(&self) -> Option<(u128, u128)> {
        self.exact
    }

    /// `10^4 / n`, the lowest `H` any slice of this size can have.
    pub fn floor(&self) -> f64 {
        H_MAX / self.n as f64
    }
}

pub fn hhi(slice: &PortfolioSnapshot) -> Result<ConcentrationIndex> {
    hhi_of_values(slice.values())
}

pub(crate) fn hhi_of_values(
    values: impl ExactSizeIterator<Item = Money>,
) -> Result<ConcentrationIndex> {
    let n = values.len();
    if n == 0 {
        return Err(Error::EmptyPortfolio);
    }
    let mut total: u128 = 0;
    let mut sum_sq: Option<u128> = Some(0);
    let mut minor = Vec::with_capacity(n);
    for v in values {
        let r = v.minor_units() as u128;
        total += r;
        sum_sq = sum_sq.and_then(|acc| r.checked_mul(r).and_then(|sq| acc.checked_add(sq)));
        minor.push(r);
    }
    if total == 0 {
        return Err(Error::ZeroTotal);
    }
    let exact = sum_sq.zip(total.checked_mul(total)).map(|(num, den)| {
        let g = gcd(num, den);
        (num / g, den / g)
    });
    let h = match exact {
        Some((num, den)) => H_MAX * num as f64 / den as f64,
        None => {
            let t = total as f64;
            H_MAX * minor.iter().map(|&r| (r as f64 / t).powi(2)).sum::<f64>()
        }
    };
    Ok(ConcentrationIndex { h, n, exact })
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

/// `(10^4 / n, 10^4)`.
pub fn hhi_bounds(n: usize) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::EmptyPortfolio);
    }
    Ok((H_MAX / n as f64, H_MAX))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConcentrationRow {
    pub key: SliceKey,
    pub index: ConcentrationIndex,
    pub total_value: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConcentrationReport {
    /// Sorted by `H` descending; equal `H` keeps lexicographic slice order.
    pub rows: Vec<ConcentrationRow>,
    /// `H` values compare directly only between slices of equal size.
    pub uniform_item_count: bool,
    /// Slices left out because they hold no value.
    pub zero_total_slices: usize,
}

/// `H` for every member combination of `dimensions` within `snapshot`.
pub fn hhi_report(
    snapshot: &PortfolioSnapshot,
    dimensions: &[String],
) -> Result<ConcentrationReport> {
    let groups = snapshot.group_by(dimensions)?;
    let scored: Vec<Option<ConcentrationRow>> = groups
        .par_iter()
        .map(|(key, group)| match hhi(group) {
            Ok(index) => Ok(Some(ConcentrationRow {
                key: key.clone(),
                index,
                total_value: format_total(group.total_minor()),
            })),
            Err(Error::ZeroTotal) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    let zero_total_slices = scored.iter().filter(|r| r.is_none()).count();
    let mut rows: Vec<ConcentrationRow> = scored.into_iter().flatten().collect();
    rows.sort_by(|a, b| b.index.h.total_cmp(&a.index.h));
    let uniform_item_count = rows.windows(2).all(|w| w[0].index.n == w[1].index.n);
    Ok(ConcentrationReport {
        rows,
        uniform_item_count,
        zero_total_slices,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyMode {
    /// Step value replaces `t_a` (never lowering it).
    #[default]
    Override,
    /// Step value is added to `t_a`.
    Add,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HStep {
    pub h_min: f64,
    pub value: f64,
}

/// Step table from concentration to an adjusted `t_a`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HPolicy {
    #[serde(default)]
    pub mode: PolicyMode,
    #[serde(default)]
    pub steps: Vec<HStep>,
}

impl HPolicy {
    /// Example table shipped for exploration only: `+0.10` from `H >= 2500`,
    /// `+0.20` from `H >= 5000`. Not a recommendation.
    pub fn illustrative() -> Self {
        HPolicy {
            mode: PolicyMode::Add,
            steps: vec![
                HStep {
                    h_min: 2500.0,
                    value: 0.10,
                },
                HStep {
                    h_min: 5000.0,
                    value: 0.20,
                },
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidPolicy(msg));
        for step in &self.steps {
            if !(0.0..=H_MAX).contains(&step.h_min) {
                return bad(format!("h_min {} outside [0, 10000]", step.h_min));
            }
            match self.mode {
                PolicyMode::Override if !(step.value > 0.0 && step.value < 1.0) => {
                    return bad(format!("override {} outside (0, 1)", step.value));
                }
                PolicyMode::Add if !(step.value >= 0.0 && step.value < 1.0) => {
                    return bad(format!("delta {} outside [0, 1)", step.value));
                }
                _ => {}
            }
        }
        for w in self.steps.windows(2) {
            if w[1].h_min <= w[0].h_min {
                return bad("h_min must be strictly increasing".into());
            }
            if w[1].value < w[0].value {
                return bad("step values must be non-decreasing in h_min".into());
            }
        }
        Ok(())
    }
}

/// `t_a` for a slice of concentration `h`: the base value below the first
/// step, otherwise the last step with `h_min <= h` applied to it. The result
/// never drops below the base and stays strictly below `t_b`.
pub fn effective_t_a(base: &Thresholds, h: f64, policy: &HPolicy) -> Result<f64> {
    policy.validate()?;
    let Some(step) = policy.steps.iter().rev().find(|s| s.h_min <= h) else {
        return Ok(base.t_a());
    };
    let raised = match policy.mode {
        PolicyMode::Override => step.value.max(base.t_a()),
        PolicyMode::Add => base.t_a() + step.value,
    };
    let ceiling = (base.t_b() - T_A_CEILING_MARGIN).max(base.t_a());
    Ok(raised.min(ceiling))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ImpactRow {
    pub t_a: f64,
    pub a_count: usize,
    pub a_value: String,
    pub a_share: f64,
    /// Ids that are A at this candidate but not at the baseline `t_a`.
    pub entering: Vec<String>,
    /// Ids that are A at the baseline but not at this candidate.
    pub leaving: Vec<String>,
}

/// Classifies `slice` once per candidate `t_a` (keeping `baseline`'s `t_b`
/// and `t_c`) and reports the A set each produces against the baseline.
pub fn simulate_threshold_impact(
    slice: &PortfolioSnapshot,
    baseline: &Thresholds,
    candidates: &[f64],
) -> Result<Vec<ImpactRow>> {
    let candidate_thresholds = candidates
        .iter()
        .map(|&c| baseline.with_t_a(c))
        .collect::<Result<Vec<_>>>()?;
    if candidates.is_empty() {
        return Ok(Vec::new());
    }
    let shares = cumulative_shares(slice)?;
    let a_set = |t: &Thresholds| -> BTreeSet<usize> {
        let labels = classify(&shares, t);
        labels
            .labels()
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == crate::model::ClassLabel::A)
            .map(|(i, _)| i)
            .collect()
    };
    let base = a_set(baseline);
    let values: Vec<Money> = slice.values().collect();
    let ids = |set: &mut dyn Iterator<Item = &usize>| -> Vec<String> {
        set.map(|&i| slice.item(i).id().to_string()).collect()
    };
    Ok(candidate_thresholds
        .iter()
        .map(|t| {
            let a = a_set(t);
            let a_minor: u128 = a.iter().map(|&i| values[i].minor_units() as u128).sum();
            ImpactRow {
                t_a: t.t_a(),
                a_count: a.len(),
                a_value: format_total(a_minor),
                a_share: a_minor as f64 / slice.total_minor() as f64,
                entering: ids(&mut a.difference(&base)),
                leaving: ids(&mut base.difference(&a)),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_snapshot, Item};

    fn snapshot(values: &[i64]) -> PortfolioSnapshot {
        build_snapshot(
            values
                .iter()
                .enumerate()
                .map(|(i, &v)| Item::new(format!("i{i:03}"), Money::from_units(v))),
        )
        .unwrap()
    }

    #[test]
    fn skewed_and_even_slices() {
        let h3 = hhi(&snapshot(&[180, 90, 50, 20])).unwrap();
        assert!((h3.h - 3754.0).abs() <= 1.0, "{}", h3.h);
        assert_eq!(h3.exact_ratio(), Some((217, 578)));
        let h4 = hhi(&snapshot(&[85, 85, 85, 85])).unwrap();
        assert_eq!(h4.h, 2500.0);
        assert_eq!(h4.exact_ratio(), Some((1, 4)));
    }

    #[test]
    fn single_item_is_maximal() {
        assert_eq!(hhi(&snapshot(&[42])).unwrap().h, H_MAX);
        assert!(matches!(hhi(&snapshot(&[0, 0])), Err(Error::ZeroTotal)));
    }

    #[test]
    fn bounds() {
        assert_eq!(hhi_bounds(4).unwrap(), (2500.0, 10_000.0));
        assert_eq!(hhi_bounds(1).unwrap(), (10_000.0, 10_000.0));
        assert_eq!(hhi_bounds(2).unwrap(), (5000.0, 10_000.0));
        assert!(hhi_bounds(0).is_err());
    }

    #[test]
    fn report_on_two_category_items() {
        let rows = [
            ("Item 1", "P", 1000),
            ("Item 2", "P", 950),
            ("Item 3", "P", 900),
            ("Item 4", "P", 850),
            ("Item 5", "Q", 800),
            ("Item 6", "R", 750),
        ];
        let s = build_snapshot(
            rows.iter()
                .map(|&(id, c, v)| Item::new(id, Money::from_units(v)).with_member("category", c)),
        )
        .unwrap();
        let report = hhi_report(&s, &["category".to_string()]).unwrap();
        let labels: Vec<_> = report
            .rows
            .iter()
            .map(|r| (r.key.label(), r.index.n))
            .collect();
        assert_eq!(
            labels,
            [
                ("category=Q".to_string(), 1),
                ("category=R".to_string(), 1),
                ("category=P".to_string(), 4)
            ]
        );
        assert_eq!(report.rows[0].index.h, H_MAX);
        assert!(!report.uniform_item_count);
        let p = &report.rows[2].index;
        let expected = 1e4
            * [1000.0f64, 950.0, 900.0, 850.0]
                .iter()
                .map(|v| (v / 3700.0).powi(2))
                .sum::<f64>();
        assert!((p.h - expected).abs() < 1e-9);

        let whole = hhi_report(&s, &[]).unwrap();
        assert_eq!(whole.rows.len(), 1);
        assert_eq!(whole.rows[0].index, hhi(&s).unwrap());
    }

    #[test]
    fn flat_brand_sits_near_floor() {
        // 600 items with the largest under 1% of value.
        let values: Vec<i64> = (0..600).map(|i| 150 - (i % 100)).collect();
        let s = snapshot(&values);
        let top = s.item(0).value().to_f64() / s.total_f64();
        assert!(top < 0.01);
        let h = hhi(&s).unwrap();
        assert!(h.h >= h.floor() && h.h < 2.0 * h.floor(), "{}", h.h);
    }

    #[test]
    fn policy_steps() {
        let base = Thresholds::default();
        assert_eq!(
            effective_t_a(&base, 9000.0, &HPolicy::default()).unwrap(),
            0.25
        );
        let policy = HPolicy {
            mode: PolicyMode::Override,
            steps: vec![HStep {
                h_min: 800.0,
                value: 0.40,
            }],
        };
        assert_eq!(effective_t_a(&base, 875.0, &policy).unwrap(), 0.40);
        assert_eq!(effective_t_a(&base, 18.0, &policy).unwrap(), 0.25);

        let add = HPolicy::illustrative();
        assert!((effective_t_a(&base, 3000.0, &add).unwrap() - 0.35).abs() < 1e-12);
        assert!((effective_t_a(&base, 6000.0, &add).unwrap() - 0.45).abs() < 1e-12);

        let huge = HPolicy {
            mode: PolicyMode::Add,
            steps: vec![HStep {
                h_min: 0.0,
                value: 0.9,
            }],
        };
        let t = effective_t_a(&base, 1.0, &huge).unwrap();
        assert!(t < base.t_b());
    }

    #[test]
    fn invalid_policies() {
        let decreasing = HPolicy {
            mode: PolicyMode::Override,
            steps: vec![
                HStep {
                    h_min: 900.0,
                    value: 0.3,
                },
                HStep {
                    h_min: 800.0,
                    value: 0.4,
                },
            ],
        };
        assert!(matches!(
            decreasing.validate(),
            Err(Error::InvalidPolicy(_))
        ));
        let lowering = HPolicy {
            mode: PolicyMode::Override,
            steps: vec![
                HStep {
                    h_min: 100.0,
                    value: 0.4,
                },
                HStep {
                    h_min: 800.0,
                    value: 0.3,
                },
            ],
        };
        assert!(lowering.validate().is_err());
        let out_of_range = HPolicy {
            mode: PolicyMode::Override,
            steps: vec![HStep {
                h_min: 100.0,
                value: 1.5,
            }],
        };
        assert!(effective_t_a(&Thresholds::default(), 200.0, &out_of_range).is_err());
    }

    #[test]
    fn concentrated_brand_gains_a_items_under_raised_t_a() {
        // Top item holds 28% of value, 57 items share the rest: H ~ 875.
        let mut values = vec![1596];
        values.extend(std::iter::repeat_n(72, 57));
        let s = snapshot(&values);
        let h = hhi(&s).unwrap();
        assert!((h.h - 875.0).abs() < 0.1, "{}", h.h);
        let policy = HPolicy {
            mode: PolicyMode::Override,
            steps: vec![HStep {
                h_min: 800.0,
                value: 0.40,
            }],
        };
        let base = Thresholds::default();
        let raised = effective_t_a(&base, h.h, &policy).unwrap();
        let rows = simulate_threshold_impact(&s, &base, &[base.t_a(), raised]).unwrap();
        assert_eq!(rows[0].a_count, 1);
        assert_eq!(rows[1].a_count, 11);
    }

    #[test]
    fn simulate_ten_items() {
        let s = snapshot(&[100, 90, 80, 70, 60, 50, 40, 30, 20, 10]);
        let rows = simulate_threshold_impact(&s, &Thresholds::default(), &[0.25, 0.5]).unwrap();
        assert_eq!(rows[0].a_count, 2);
        assert_eq!(rows[1].a_count, 4);
        assert!((rows[0].a_share - 190.0 / 550.0).abs() < 1e-12);
        assert!((rows[1].a_share - 340.0 / 550.0).abs() < 1e-12);
        assert!(rows[0].entering.is_empty() && rows[0].leaving.is_empty());
        assert_eq!(rows[1].entering, ["i002", "i003"]);
        assert!(rows[1].leaving.is_empty());
        assert_eq!(rows[1].a_value, "340");
    }

    #[test]
    fn simulate_edge_cases() {
        let one = snapshot(&[5]);
        let rows =
            simulate_threshold_impact(&one, &Thresholds::default(), &[0.1, 0.3, 0.6]).unwrap();
        assert!(rows.iter().all(|r| r.a_count == 1));
        assert!(simulate_threshold_impact(&one, &Thresholds::default(), &[])
            .unwrap()
            .is_empty());
        assert!(simulate_threshold_impact(&one, &Thresholds::default(), &[0.7]).is_err());
    }
}
