//! Two-stage stratification.
//!
//! Stage A runs an ordered list of passes. Each pass partitions its scope by
//! a set of hierarchy dimensions and, for every group whose existing A items
//! cover less than `t_a` of the group's value, classifies the group and adds
//! its A items. Passes only ever add. Stage BCD then classifies everything
//! that is not A as one pool against `t_b` and `t_c` rescaled onto the
//! remaining value.

use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{
    cumulative_shares, remainder_bands, round_to, within_band, RemainderBands, StageTwoThresholds,
    SHARE_TOLERANCE,
};
use crate::concentration::{effective_t_a, hhi, HPolicy};
use crate::error::{Error, Result};
use crate::model::{
    ClassLabel, PortfolioSnapshot, Scope, SliceKey, Thresholds, DEFAULT_NEW_CUTOFF_MONTHS,
};
use crate::money::format_total;

/// Pass name recorded for items labeled in the second stage.
pub const STAGE_TWO: &str = "stage-2";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PassSpec {
    pub name: String,
    #[serde(default)]
    pub scope: Scope,
    /// Empty means one group covering the whole scope.
    #[serde(default)]
    pub group_by: Vec<String>,
    #[serde(default)]
    pub thresholds: Option<Thresholds>,
    /// Name of an entry in [`StratifyConfig::policies`].
    #[serde(default)]
    pub concentration_policy: Option<String>,
}

impl PassSpec {
    pub fn unconstrained(name: impl Into<String>) -> Self {
        PassSpec {
            name: name.into(),
            scope: Scope::All,
            group_by: Vec::new(),
            thresholds: None,
            concentration_policy: None,
        }
    }

    pub fn grouped(name: impl Into<String>, group_by: &[&str]) -> Self {
        PassSpec {
            group_by: group_by.iter().map(|d| d.to_string()).collect(),
            ..PassSpec::unconstrained(name)
        }
    }

    pub fn in_scope(mut self, scope: Scope) -> Self {
        self.scope = scope;
        self
    }
}

/// What share of value the stage-two rescaling treats as removed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RenormalizeMode {
    /// The value share actually labeled A in stage A.
    #[default]
    Actual,
    /// The base `t_a`, whatever stage A produced.
    Nominal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StratifyConfig {
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default = "default_passes")]
    pub passes: Vec<PassSpec>,
    #[serde(default)]
    pub renormalize: RenormalizeMode,
    #[serde(default = "default_cutoff")]
    pub new_cutoff_months: u32,
    #[serde(default)]
    pub policies: BTreeMap<String, HPolicy>,
    /// Stop adding A items in later passes once A holds more than this
    /// share of total value.
    #[serde(default)]
    pub max_a_share: Option<f64>,
    /// Compare shares and thresholds rounded to this many decimals
    /// (tabulated precision). `None` compares at full precision.
    #[serde(default)]
    pub share_decimals: Option<u32>,
}

fn default_passes() -> Vec<PassSpec> {
    vec![PassSpec::unconstrained("unconstrained")]
}

fn default_cutoff() -> u32 {
    DEFAULT_NEW_CUTOFF_MONTHS
}

impl Default for StratifyConfig {
    fn default() -> Self {
        StratifyConfig {
            thresholds: Thresholds::default(),
            passes: default_passes(),
            renormalize: RenormalizeMode::default(),
            new_cutoff_months: DEFAULT_NEW_CUTOFF_MONTHS,
            policies: BTreeMap::new(),
            max_a_share: None,
            share_decimals: None,
        }
    }
}

const MAX_SHARE_DECIMALS: u32 = 12;

impl StratifyConfig {
    pub fn with_passes(passes: Vec<PassSpec>) -> Self {
        StratifyConfig {
            passes,
            ..StratifyConfig::default()
        }
    }

    /// Checks everything that does not depend on the portfolio.
    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(Error::InvalidConfig(msg));
        if self.passes.is_empty() {
            return invalid("at least one pass is required".into());
        }
        let mut names = HashSet::new();
        for pass in &self.passes {
            if pass.name.is_empty() || pass.name == STAGE_TWO {
                return invalid(format!("pass name `{}` is reserved or empty", pass.name));
            }
            if !names.insert(pass.name.as_str()) {
                return invalid(format!("duplicate pass name `{}`", pass.name));
            }
            let mut dims = HashSet::new();
            if let Some(d) = pass.group_by.iter().find(|d| !dims.insert(d.as_str())) {
                return invalid(format!("pass `{}` groups by `{d}` twice", pass.name));
            }
            if let Some(policy) = &pass.concentration_policy {
                if !self.policies.contains_key(policy) {
                    return invalid(format!(
                        "pass `{}` references unknown policy `{policy}`",
                        pass.name
                    ));
                }
            }
        }
        for (name, policy) in &self.policies {
            policy
                .validate()
                .map_err(|e| Error::InvalidConfig(format!("policy `{name}`: {e}")))?;
        }
        if let Some(cap) = self.max_a_share {
            if !(cap > 0.0 && cap <= 1.0) {
                return invalid(format!("max_a_share {cap} outside (0, 1]"));
            }
        }
        if let Some(d) = self.share_decimals {
            if d > MAX_SHARE_DECIMALS {
                return invalid(format!("share_decimals {d} exceeds {MAX_SHARE_DECIMALS}"));
            }
        }
        Ok(())
    }

    /// [`StratifyConfig::validate`] plus checks against the portfolio's dimensions.
    pub fn validate_for(&self, snapshot: &PortfolioSnapshot) -> Result<()> {
        self.validate()?;
        for pass in &self.passes {
            for dim in &pass.group_by {
                snapshot.dimension_index(dim)?;
            }
        }
        Ok(())
    }

    fn quantize(&self, x: f64) -> f64 {
        self.share_decimals.map_or(x, |d| round_to(x, d))
    }
}

/// Membership of root-snapshot positions in class A.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ASet {
    member: Vec<bool>,
    len: usize,
}

impl ASet {
    pub fn empty_for(snapshot: &PortfolioSnapshot) -> Self {
        ASet {
            member: vec![false; snapshot.root_len()],
            len: 0,
        }
    }

    pub fn from_ids<'a>(
        snapshot: &PortfolioSnapshot,
        ids: impl IntoIterator<Item = &'a str>,
    ) -> Result<Self> {
        let mut set = ASet::empty_for(snapshot);
        for id in ids {
            let pos = snapshot
                .position_of(id)
                .ok_or_else(|| Error::InvalidConfig(format!("unknown item id `{id}`")))?;
            set.insert(pos);
        }
        Ok(set)
    }

    pub fn contains(&self, position: u32) -> bool {
        self.member[position as usize]
    }

    /// Returns `true` if the position was not already present.
    pub fn insert(&mut self, position: u32) -> bool {
        let slot = &mut self.member[position as usize];
        let fresh = !*slot;
        *slot = true;
        self.len += usize::from(fresh);
        fresh
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn value_in(&self, slice: &PortfolioSnapshot) -> u128 {
        slice
            .iter()
            .filter(|it| self.contains(it.position()))
            .map(|it| it.value().minor_units() as u128)
            .sum()
    }
}

/// Share of the slice's value already held by A items.
pub fn a_coverage(slice: &PortfolioSnapshot, current_a: &ASet) -> Option<f64> {
    if slice.is_empty() || slice.total_minor() == 0 {
        return None;
    }
    Some(current_a.value_in(slice) as f64 / slice.total_minor() as f64)
}

/// A slice is under-represented when its A items cover less than `t_a` of
/// its value. Empty and zero-value slices never are.
pub fn is_underrepresented(slice: &PortfolioSnapshot, current_a: &ASet, t_a: f64) -> bool {
    a_coverage(slice, current_a).is_some_and(|c| c < t_a - SHARE_TOLERANCE)
}

/// An item newly labeled A by a pass.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewA {
    pub position: u32,
    /// The item's cumulative share within the group that selected it.
    pub slice_share: f64,
}

/// Audit record for one group visited by a pass.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroupTrace {
    pub pass: String,
    pub key: SliceKey,
    pub n: usize,
    pub total_value: String,
    /// Concentration of the group; `None` when it holds no value.
    pub h: Option<f64>,
    pub t_a: f64,
    pub coverage_before: Option<f64>,
    pub underrepresented: bool,
    pub added: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PassOutcome {
    /// In group order, then sorted order within each group.
    pub added: Vec<NewA>,
    pub groups: Vec<GroupTrace>,
}

impl PassOutcome {
    pub fn apply(&self, current_a: &mut ASet) {
        for a in &self.added {
            current_a.insert(a.position);
        }
    }
}

/// Runs one stage-A pass against the current A set without modifying it.
pub fn run_pass(
    snapshot: &PortfolioSnapshot,
    pass: &PassSpec,
    current_a: &ASet,
    config: &StratifyConfig,
) -> Result<PassOutcome> {
    let scoped = snapshot.slice_with_cutoff(
        &SliceKey::whole().scoped(pass.scope),
        config.new_cutoff_months,
    )?;
    if scoped.is_empty() {
        return Ok(PassOutcome {
            added: Vec::new(),
            groups: Vec::new(),
        });
    }
    let thresholds = pass.thresholds.unwrap_or(config.thresholds);
    let policy = match &pass.concentration_policy {
        Some(name) => Some(
            config
                .policies
                .get(name)
                .ok_or_else(|| Error::InvalidConfig(format!("unknown policy `{name}`")))?,
        ),
        None => None,
    };
    let groups = scoped.group_by(&pass.group_by)?;
    let per_group: Vec<(Vec<NewA>, GroupTrace)> = groups
        .into_par_iter()
        .map(|(mut key, group)| {
            key.scope = pass.scope;
            visit_group(pass, key, &group, current_a, &thresholds, policy, config)
        })
        .collect::<Result<_>>()?;

    let mut added = Vec::new();
    let mut traces = Vec::with_capacity(per_group.len());
    for (new_a, trace) in per_group {
        added.extend(new_a);
        traces.push(trace);
    }
    Ok(PassOutcome {
        added,
        groups: traces,
    })
}

fn visit_group(
    pass: &PassSpec,
    key: SliceKey,
    group: &PortfolioSnapshot,
    current_a: &ASet,
    thresholds: &Thresholds,
    policy: Option<&HPolicy>,
    config: &StratifyConfig,
) -> Result<(Vec<NewA>, GroupTrace)> {
    let mut trace = GroupTrace {
        pass: pass.name.clone(),
        key,
        n: group.len(),
        total_value: format_total(group.total_minor()),
        h: None,
        t_a: thresholds.t_a(),
        coverage_before: a_coverage(group, current_a),
        underrepresented: false,
        added: 0,
    };
    if group.total_minor() == 0 {
        return Ok((Vec::new(), trace));
    }
    let index = hhi(group)?;
    trace.h = Some(index.h);
    if let Some(policy) = policy {
        trace.t_a = effective_t_a(thresholds, index.h, policy)?;
    }
    trace.underrepresented = is_underrepresented(group, current_a, trace.t_a);
    if !trace.underrepresented {
        return Ok((Vec::new(), trace));
    }
    let shares = cumulative_shares(group)?;
    let t_a = config.quantize(trace.t_a);
    let mut prev = 0.0;
    let mut new_a = Vec::new();
    for (i, &raw) in shares.as_slice().iter().enumerate() {
        let cur = config.quantize(raw);
        if !within_band(prev, cur, t_a) {
            break;
        }
        let position = group.item(i).position();
        if !current_a.contains(position) {
            new_a.push(NewA {
                position,
                slice_share: raw,
            });
        }
        prev = cur;
    }
    trace.added = new_a.len();
    Ok((new_a, trace))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ItemAssignment {
    pub id: String,
    pub class: ClassLabel,
    /// Index into [`StratificationResult::pass_names`]; `None` for stage two.
    pub pass: Option<usize>,
    /// Cumulative share within the slice the item was classified in.
    pub slice_share: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PassSummary {
    pub name: String,
    pub scope: Scope,
    pub group_by: Vec<String>,
    pub groups: usize,
    pub groups_underrepresented: usize,
    pub a_added: usize,
    pub a_value: String,
    /// The A-share cap was already exceeded when this pass was reached.
    pub skipped_by_cap: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StageTwoBands {
    Full { t_b: f64, t_c: f64 },
    CdOnly { t_c: f64 },
    AllD,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StageTwoSummary {
    pub mode: RenormalizeMode,
    pub removed_share: f64,
    pub bands: StageTwoBands,
    pub remainder_items: usize,
    pub remainder_value: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassCounts {
    #[serde(rename = "A")]
    pub a: usize,
    #[serde(rename = "B")]
    pub b: usize,
    #[serde(rename = "C")]
    pub c: usize,
    #[serde(rename = "D")]
    pub d: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StratificationResult {
    /// One entry per portfolio item, in snapshot order.
    pub items: Vec<ItemAssignment>,
    pub pass_names: Vec<String>,
    pub passes: Vec<PassSummary>,
    pub stage_two: StageTwoSummary,
    pub groups: Vec<GroupTrace>,
    pub class_counts: ClassCounts,
    pub a_value: String,
    /// A value over total value; `None` for a zero-value portfolio.
    pub a_coverage: Option<f64>,
    pub total_value: String,
}

impl StratificationResult {
    pub fn assigning_pass(&self, item: &ItemAssignment) -> &str {
        item.pass.map_or(STAGE_TWO, |i| self.pass_names[i].as_str())
    }

    pub fn labels(&self) -> Vec<ClassLabel> {
        self.items.iter().map(|i| i.class).collect()
    }
}

/// Runs stage A (every pass, in order) and then stage BCD over the remainder.
pub fn stratify(
    snapshot: &PortfolioSnapshot,
    config: &StratifyConfig,
) -> Result<StratificationResult> {
    config.validate_for(snapshot)?;
    let total = snapshot.total_minor();
    let mut a_set = ASet::empty_for(snapshot);
    // root position -> (pass index, slice share)
    let mut provenance: Vec<Option<(usize, f64)>> = vec![None; snapshot.root_len()];
    let mut a_minor: u128 = 0;
    let mut passes = Vec::with_capacity(config.passes.len());
    let mut groups = Vec::new();
    let mut capped = false;

    for (pass_index, pass) in config.passes.iter().enumerate() {
        if let Some(cap) = config.max_a_share {
            capped = capped || (total > 0 && a_minor as f64 / total as f64 > cap + SHARE_TOLERANCE);
        }
        let mut summary = PassSummary {
            name: pass.name.clone(),
            scope: pass.scope,
            group_by: pass.group_by.clone(),
            groups: 0,
            groups_underrepresented: 0,
            a_added: 0,
            a_value: "0".into(),
            skipped_by_cap: capped,
        };
        if capped {
            passes.push(summary);
            continue;
        }
        let outcome = run_pass(snapshot, pass, &a_set, config)?;
        outcome.apply(&mut a_set);
        let mut pass_minor: u128 = 0;
        for new_a in &outcome.added {
            provenance[new_a.position as usize] = Some((pass_index, new_a.slice_share));
            pass_minor += snapshot
                .get_by_position(new_a.position)
                .value()
                .minor_units() as u128;
        }
        a_minor += pass_minor;
        summary.groups = outcome.groups.len();
        summary.groups_underrepresented =
            outcome.groups.iter().filter(|g| g.underrepresented).count();
        summary.a_added = outcome.added.len();
        summary.a_value = format_total(pass_minor);
        passes.push(summary);
        groups.extend(outcome.groups);
    }

    let remainder_positions: Vec<u32> = snapshot
        .positions()
        .iter()
        .copied()
        .filter(|&p| !a_set.contains(p))
        .collect();
    let remainder = snapshot.subset(remainder_positions);

    let removed_share = match config.renormalize {
        RenormalizeMode::Actual if total > 0 => a_minor as f64 / total as f64,
        RenormalizeMode::Actual => 0.0,
        RenormalizeMode::Nominal => config.thresholds.t_a(),
    };
    let bands = if remainder.total_minor() == 0 {
        RemainderBands::AllD
    } else {
        remainder_bands(&config.thresholds, removed_share)?
    };
    let (remainder_labels, remainder_shares): (Vec<ClassLabel>, Vec<f64>) =
        if remainder.total_minor() == 0 {
            (
                vec![ClassLabel::D; remainder.len()],
                vec![0.0; remainder.len()],
            )
        } else {
            let shares = cumulative_shares(&remainder)?;
            let compared: Vec<f64> = shares
                .as_slice()
                .iter()
                .map(|&c| config.quantize(c))
                .collect();
            (
                bands.classify(&compared, config.share_decimals),
                shares.as_slice().to_vec(),
            )
        };

    let mut stage_two: Vec<Option<(ClassLabel, f64)>> = vec![None; snapshot.root_len()];
    for (i, item) in remainder.iter().enumerate() {
        stage_two[item.position() as usize] = Some((remainder_labels[i], remainder_shares[i]));
    }

    let mut counts = [0usize; 4];
    let items: Vec<ItemAssignment> = snapshot
        .iter()
        .map(|it| {
            let pos = it.position() as usize;
            let (class, pass, slice_share) = match (provenance[pos], stage_two[pos]) {
                (Some((pass, share)), _) => (ClassLabel::A, Some(pass), share),
                (None, Some((label, share))) => (label, None, share),
                (None, None) => unreachable!("every item is in stage A or the remainder"),
            };
            counts[class as usize] += 1;
            ItemAssignment {
                id: it.id().to_string(),
                class,
                pass,
                slice_share,
            }
        })
        .collect();

    let stage_two = StageTwoSummary {
        mode: config.renormalize,
        removed_share,
        bands: match bands {
            RemainderBands::Full(StageTwoThresholds { t_b, t_c }) => {
                StageTwoBands::Full { t_b, t_c }
            }
            RemainderBands::CdOnly { t_c } => StageTwoBands::CdOnly { t_c },
            RemainderBands::AllD => StageTwoBands::AllD,
        },
        remainder_items: remainder.len(),
        remainder_value: format_total(remainder.total_minor()),
    };

    Ok(StratificationResult {
        items,
        pass_names: config.passes.iter().map(|p| p.name.clone()).collect(),
        passes,
        stage_two,
        groups,
        class_counts: ClassCounts {
            a: counts[0],
            b: counts[1],
            c: counts[2],
            d: counts[3],
        },
        a_value: format_total(a_minor),
        a_coverage: (total > 0).then(|| a_minor as f64 / total as f64),
        total_value: format_total(total),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::classify;
    use crate::model::{build_snapshot, Item};
    use crate::money::Money;
    use ClassLabel::*;

    fn ten_items() -> PortfolioSnapshot {
        build_snapshot(
            (1..=10).map(|k| Item::new(format!("Item {k:02}"), Money::from_units(110 - 10 * k))),
        )
        .unwrap()
    }

    /// The six named items plus 59 fillers of 250 (13 in Q, 46 in S).
    fn two_category_portfolio() -> PortfolioSnapshot {
        let listed = [
            ("Item 1", "P", 1000),
            ("Item 2", "P", 950),
            ("Item 3", "P", 900),
            ("Item 4", "P", 850),
            ("Item 5", "Q", 800),
            ("Item 6", "R", 750),
        ];
        let mut items: Vec<Item> = listed
            .iter()
            .map(|&(id, c, v)| Item::new(id, Money::from_units(v)).with_member("category", c))
            .collect();
        for i in 1..=59 {
            let cat = if i <= 13 { "Q" } else { "S" };
            items.push(
                Item::new(format!("Filler {i:02}"), Money::from_units(250))
                    .with_member("category", cat),
            );
        }
        build_snapshot(items).unwrap()
    }

    #[test]
    fn underrepresentation_examples() {
        // Category Q with total 4000 and one A item of 800: coverage 0.2.
        let mut items = vec![Item::new("Item 5", Money::from_units(800))];
        items.extend((0..16).map(|i| Item::new(format!("q{i}"), Money::from_units(200))));
        let q = build_snapshot(items).unwrap();
        assert_eq!(q.total_display(), "4000");
        let a = ASet::from_ids(&q, ["Item 5"]).unwrap();
        assert!((a_coverage(&q, &a).unwrap() - 0.2).abs() < 1e-15);
        assert!(is_underrepresented(&q, &a, 0.25));

        let all = ASet::from_ids(&q, q.iter().map(|i| i.id()).collect::<Vec<_>>()).unwrap();
        assert!(!is_underrepresented(&q, &all, 0.25));
        assert!(is_underrepresented(&q, &ASet::empty_for(&q), 0.25));

        let zero = build_snapshot(vec![Item::new("z", Money::ZERO)]).unwrap();
        assert!(!is_underrepresented(&zero, &ASet::empty_for(&zero), 0.25));
    }

    #[test]
    fn two_category_first_pass() {
        let s = two_category_portfolio();
        assert_eq!(s.total_display(), "20000");
        let config = StratifyConfig::default();
        let out = run_pass(&s, &config.passes[0], &ASet::empty_for(&s), &config).unwrap();
        let ids: Vec<_> = out
            .added
            .iter()
            .map(|a| s.get_by_position(a.position).id())
            .collect();
        assert_eq!(
            ids,
            ["Item 1", "Item 2", "Item 3", "Item 4", "Item 5", "Item 6"]
        );
        assert!((out.added[4].slice_share - 0.225).abs() < 1e-12);
        assert!((out.added[5].slice_share - 0.2625).abs() < 1e-12);
    }

    #[test]
    fn two_category_category_pass() {
        let s = two_category_portfolio();
        let config = StratifyConfig::with_passes(vec![
            PassSpec::unconstrained("unconstrained"),
            PassSpec::grouped("category", &["category"]),
        ]);
        let mut a = ASet::empty_for(&s);
        run_pass(&s, &config.passes[0], &a, &config)
            .unwrap()
            .apply(&mut a);
        let out = run_pass(&s, &config.passes[1], &a, &config).unwrap();
        let by_key: BTreeMap<String, &GroupTrace> =
            out.groups.iter().map(|g| (g.key.label(), g)).collect();
        assert!(!by_key["category=P"].underrepresented);
        assert_eq!(by_key["category=P"].coverage_before, Some(1.0));
        assert!(by_key["category=Q"].underrepresented);
        assert!((by_key["category=Q"].coverage_before.unwrap() - 800.0 / 4050.0).abs() < 1e-12);
        assert_eq!(by_key["category=Q"].added, 1);
        assert!(!by_key["category=R"].underrepresented);
        assert_eq!(by_key["category=S"].added, 12);

        let q_new: Vec<_> = out
            .added
            .iter()
            .map(|n| s.get_by_position(n.position).id())
            .filter(|id| id.starts_with("Filler"))
            .take(1)
            .collect();
        assert_eq!(q_new, ["Filler 01"]);

        // Idempotence.
        out.apply(&mut a);
        let again = run_pass(&s, &config.passes[1], &a, &config).unwrap();
        assert!(again.added.is_empty());
    }

    #[test]
    fn single_pass_reduces_to_classify() {
        let s = ten_items();
        let result = stratify(&s, &StratifyConfig::default()).unwrap();
        let expected = classify(&cumulative_shares(&s).unwrap(), &Thresholds::default());
        assert_eq!(result.labels(), expected.labels());
        assert_eq!(result.assigning_pass(&result.items[0]), "unconstrained");
        assert_eq!(result.assigning_pass(&result.items[2]), STAGE_TWO);
    }

    #[test]
    fn tabulated_precision_reproduces_ten_items() {
        let config = StratifyConfig {
            share_decimals: Some(2),
            ..StratifyConfig::default()
        };
        let result = stratify(&ten_items(), &config).unwrap();
        assert_eq!(result.labels(), [A, A, B, B, B, C, C, C, D, D]);
    }

    #[test]
    fn nominal_mode_rescales_with_t_a() {
        let config = StratifyConfig {
            renormalize: RenormalizeMode::Nominal,
            ..StratifyConfig::default()
        };
        let result = stratify(&ten_items(), &config).unwrap();
        assert_eq!(result.stage_two.removed_share, 0.25);
        match result.stage_two.bands {
            StageTwoBands::Full { t_b, t_c } => {
                assert!((t_b - 0.4 / 0.75).abs() < 1e-12);
                assert!((t_c - 0.7 / 0.75).abs() < 1e-12);
            }
            ref other => panic!("unexpected {other:?}"),
        }
        assert_eq!(result.class_counts.a, 2);
    }

    #[test]
    fn empty_scope_pass_contributes_nothing() {
        let s = ten_items();
        let config =
            StratifyConfig::with_passes(vec![PassSpec::unconstrained("new").in_scope(Scope::New)]);
        let result = stratify(&s, &config).unwrap();
        assert_eq!(result.items.len(), 10);
        assert_eq!(result.passes[0].a_added, 0);
        assert_eq!(result.class_counts.a, 0);
        // Nothing removed, so stage two bands the whole portfolio at t_b, t_c.
        assert_eq!(result.items[0].class, B);
    }

    #[test]
    fn multi_pass_grows_the_a_set() {
        let s = two_category_portfolio();
        let one = stratify(&s, &StratifyConfig::default()).unwrap();
        let two = stratify(
            &s,
            &StratifyConfig::with_passes(vec![
                PassSpec::unconstrained("unconstrained"),
                PassSpec::grouped("category", &["category"]),
            ]),
        )
        .unwrap();
        let a = |r: &StratificationResult| -> HashSet<String> {
            r.items
                .iter()
                .filter(|i| i.class == A)
                .map(|i| i.id.clone())
                .collect()
        };
        assert!(a(&one).is_subset(&a(&two)));
        assert!(a(&two).len() > a(&one).len());
        assert_eq!(two.passes[1].a_added, 13);
    }

    #[test]
    fn cap_stops_later_passes() {
        let s = two_category_portfolio();
        let config = StratifyConfig {
            max_a_share: Some(0.2),
            ..StratifyConfig::with_passes(vec![
                PassSpec::unconstrained("unconstrained"),
                PassSpec::grouped("category", &["category"]),
            ])
        };
        let result = stratify(&s, &config).unwrap();
        assert!(!result.passes[0].skipped_by_cap);
        assert!(result.passes[1].skipped_by_cap);
        assert_eq!(result.class_counts.a, 6);
    }

    #[test]
    fn concentration_policy_raises_t_a_per_group() {
        let mut items: Vec<Item> =
            vec![Item::new("top", Money::from_units(1596)).with_member("brand", "x")];
        items.extend((0..57).map(|i| {
            Item::new(format!("x{i:02}"), Money::from_units(72)).with_member("brand", "x")
        }));
        let s = build_snapshot(items).unwrap();
        let mut config = StratifyConfig::with_passes(vec![PassSpec {
            concentration_policy: Some("h".into()),
            ..PassSpec::grouped("brand", &["brand"])
        }]);
        config.policies.insert(
            "h".into(),
            HPolicy {
                mode: crate::concentration::PolicyMode::Override,
                steps: vec![crate::concentration::HStep {
                    h_min: 800.0,
                    value: 0.40,
                }],
            },
        );
        let result = stratify(&s, &config).unwrap();
        assert_eq!(result.class_counts.a, 11);
        assert!(result.groups[0].h.unwrap() > 800.0);
        assert_eq!(result.groups[0].t_a, 0.40);
    }

    #[test]
    fn zero_value_portfolio_is_all_d() {
        let s = build_snapshot(vec![
            Item::new("a", Money::ZERO),
            Item::new("b", Money::ZERO),
        ])
        .unwrap();
        let result = stratify(&s, &StratifyConfig::default()).unwrap();
        assert_eq!(result.labels(), [D, D]);
        assert_eq!(result.a_coverage, None);
    }

    #[test]
    fn everything_a_leaves_zero_value_remainder_as_d() {
        let s = build_snapshot(vec![
            Item::new("a", Money::from_units(10)),
            Item::new("b", Money::ZERO),
        ])
        .unwrap();
        let result = stratify(&s, &StratifyConfig::default()).unwrap();
        assert_eq!(result.labels(), [A, D]);
    }

    #[test]
    fn config_validation() {
        let s = ten_items();
        let dup = StratifyConfig::with_passes(vec![
            PassSpec::unconstrained("p"),
            PassSpec::unconstrained("p"),
        ]);
        assert!(matches!(stratify(&s, &dup), Err(Error::InvalidConfig(_))));
        let unknown_dim = StratifyConfig::with_passes(vec![PassSpec::grouped("b", &["brand"])]);
        assert!(matches!(
            stratify(&s, &unknown_dim),
            Err(Error::UnknownDimension(_))
        ));
        let missing_policy = StratifyConfig::with_passes(vec![PassSpec {
            concentration_policy: Some("nope".into()),
            ..PassSpec::unconstrained("p")
        }]);
        assert!(stratify(&s, &missing_policy).is_err());
        assert!(stratify(&s, &StratifyConfig::with_passes(vec![])).is_err());
    }
}
