//! Shared domain types and the immutable, value-sorted portfolio snapshot.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::money::{self, Money};

/// Months of sales history below which an item counts as new.
pub const DEFAULT_NEW_CUTOFF_MONTHS: u32 = 12;

/// A sellable unit as supplied by the caller.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Item {
    pub id: String,
    pub value: Money,
    /// Ordered `(dimension, member)` pairs, e.g. division, brand, category.
    #[serde(default)]
    pub hierarchy: Vec<(String, String)>,
    #[serde(default)]
    pub age_months: Option<u32>,
}

impl Item {
    pub fn new(id: impl Into<String>, value: Money) -> Self {
        Item {
            id: id.into(),
            value,
            hierarchy: Vec::new(),
            age_months: None,
        }
    }

    pub fn with_member(mut self, dimension: impl Into<String>, member: impl Into<String>) -> Self {
        self.hierarchy.push((dimension.into(), member.into()));
        self
    }

    pub fn with_age(mut self, months: u32) -> Self {
        self.age_months = Some(months);
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ClassLabel {
    A,
    B,
    C,
    D,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 4] = [ClassLabel::A, ClassLabel::B, ClassLabel::C, ClassLabel::D];

    pub fn as_str(self) -> &'static str {
        match self {
            ClassLabel::A => "A",
            ClassLabel::B => "B",
            ClassLabel::C => "C",
            ClassLabel::D => "D",
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassLabel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "A" => Ok(ClassLabel::A),
            "B" => Ok(ClassLabel::B),
            "C" => Ok(ClassLabel::C),
            "D" => Ok(ClassLabel::D),
            other => Err(format!("unknown class label `{other}`")),
        }
    }
}

/// Cumulative-share boundaries with `0 < t_a < t_b < t_c < 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawThresholds")]
pub struct Thresholds {
    t_a: f64,
    t_b: f64,
    t_c: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawThresholds {
    t_a: f64,
    t_b: f64,
    t_c: f64,
}

impl TryFrom<RawThresholds> for Thresholds {
    type Error = Error;

    fn try_from(raw: RawThresholds) -> Result<Self> {
        Thresholds::new(raw.t_a, raw.t_b, raw.t_c)
    }
}

impl Thresholds {
    pub fn new(t_a: f64, t_b: f64, t_c: f64) -> Result<Self> {
        let ordered = 0.0 < t_a && t_a < t_b && t_b < t_c && t_c < 1.0;
        if !ordered || !(t_a.is_finite() && t_b.is_finite() && t_c.is_finite()) {
            return Err(Error::InvalidThresholds(format!(
                "require 0 < t_a < t_b < t_c < 1, got ({t_a}, {t_b}, {t_c})"
            )));
        }
        Ok(Thresholds { t_a, t_b, t_c })
    }

    pub fn t_a(&self) -> f64 {
        self.t_a
    }

    pub fn t_b(&self) -> f64 {
        self.t_b
    }

    pub fn t_c(&self) -> f64 {
        self.t_c
    }

    pub fn with_t_a(&self, t_a: f64) -> Result<Self> {
        Thresholds::new(t_a, self.t_b, self.t_c)
    }
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            t_a: 0.25,
            t_b: 0.65,
            t_c: 0.95,
        }
    }
}

/// Which items a slice admits by sales history.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    #[default]
    All,
    /// `age_months < cutoff`.
    New,
    /// `age_months >= cutoff`; items without a recorded age count as in-line.
    Inline,
}

impl Scope {
    pub fn admits(self, age_months: Option<u32>, cutoff: u32) -> bool {
        match self {
            Scope::All => true,
            Scope::New => matches!(age_months, Some(a) if a < cutoff),
            Scope::Inline => age_months.is_none_or(|a| a >= cutoff),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Scope::All => "all",
            Scope::New => "new",
            Scope::Inline => "inline",
        }
    }
}

impl FromStr for Scope {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "all" => Ok(Scope::All),
            "new" => Ok(Scope::New),
            "inline" => Ok(Scope::Inline),
            other => Err(format!(
                "unknown scope `{other}` (expected all, new or inline)"
            )),
        }
    }
}

/// A path through the hierarchy (at most one member per dimension) plus a scope.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SliceKey {
    #[serde(default)]
    pub filter: BTreeMap<String, String>,
    #[serde(default)]
    pub scope: Scope,
}

impl SliceKey {
    pub fn whole() -> Self {
        SliceKey::default()
    }

    pub fn with(mut self, dimension: impl Into<String>, member: impl Into<String>) -> Self {
        self.filter.insert(dimension.into(), member.into());
        self
    }

    pub fn scoped(mut self, scope: Scope) -> Self {
        self.scope = scope;
        self
    }

    /// `brand=X;category=Y`, or `*` for the empty filter.
    pub fn label(&self) -> String {
        if self.filter.is_empty() {
            return "*".to_string();
        }
        self.filter
            .iter()
            .map(|(d, m)| format!("{d}={m}"))
            .collect::<Vec<_>>()
            .join(";")
    }
}

struct Row {
    id: Box<str>,
    value: Money,
    members: Box<[u32]>,
    age_months: Option<u32>,
}

/// Row storage shared by a snapshot and every slice taken from it.
struct PortfolioData {
    dimensions: Vec<String>,
    /// Per dimension, member code -> member name.
    member_names: Vec<Vec<String>>,
    /// Per dimension, member name -> member code.
    member_codes: Vec<HashMap<String, u32>>,
    rows: Vec<Row>,
    positions_by_id: HashMap<Box<str>, u32>,
}

/// An immutable, value-descending view over a portfolio.
///
/// Rows are ordered by value descending with ties broken by id ascending.
/// Slices share row storage with their parent and keep the parent's order.
#[derive(Clone)]
pub struct PortfolioSnapshot {
    data: Arc<PortfolioData>,
    positions: Arc<[u32]>,
    total: u128,
}

/// Borrowed view of one item in a snapshot.
#[derive(Clone, Copy)]
pub struct ItemRef<'a> {
    data: &'a PortfolioData,
    position: u32,
}

impl<'a> ItemRef<'a> {
    fn row(&self) -> &'a Row {
        &self.data.rows[self.position as usize]
    }

    pub fn id(&self) -> &'a str {
        &self.row().id
    }

    pub fn value(&self) -> Money {
        self.row().value
    }

    pub fn age_months(&self) -> Option<u32> {
        self.row().age_months
    }

    /// Position in the root snapshot's sorted order.
    pub fn position(&self) -> u32 {
        self.position
    }

    pub fn member(&self, dimension: usize) -> &'a str {
        let code = self.row().members[dimension];
        &self.data.member_names[dimension][code as usize]
    }

    pub(crate) fn member_code(&self, dimension: usize) -> u32 {
        self.row().members[dimension]
    }

    pub fn hierarchy(&self) -> impl Iterator<Item = (&'a str, &'a str)> + 'a {
        let data = self.data;
        let row = self.row();
        data.dimensions
            .iter()
            .zip(row.members.iter())
            .enumerate()
            .map(move |(d, (name, &code))| {
                (name.as_str(), data.member_names[d][code as usize].as_str())
            })
    }

    pub fn to_item(&self) -> Item {
        Item {
            id: self.id().to_string(),
            value: self.value(),
            hierarchy: self
                .hierarchy()
                .map(|(d, m)| (d.to_string(), m.to_string()))
                .collect(),
            age_months: self.age_months(),
        }
    }
}

impl fmt::Debug for ItemRef<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Item")
            .field("id", &self.id())
            .field("value", &self.value())
            .finish()
    }
}

/// Builds a sorted portfolio snapshot from items.
pub fn build_snapshot(items: impl IntoIterator<Item = Item>) -> Result<PortfolioSnapshot> {
    let mut builder = SnapshotBuilder::new();
    for item in items {
        builder.push(item)?;
    }
    builder.build()
}

/// Incremental snapshot construction with member interning.
///
/// Used directly by the streaming file loader so that only the compact row
/// table is held in memory.
#[derive(Default)]
pub struct SnapshotBuilder {
    dimensions: Option<Vec<String>>,
    member_names: Vec<Vec<String>>,
    member_codes: Vec<HashMap<String, u32>>,
    rows: Vec<Row>,
    positions_by_id: HashMap<Box<str>, u32>,
}

impl SnapshotBuilder {
    pub fn new() -> Self {
        SnapshotBuilder::default()
    }

    /// Fixes the dimension names up front (e.g. from a file header).
    pub fn with_dimensions(dimensions: Vec<String>) -> Self {
        let n = dimensions.len();
        SnapshotBuilder {
            dimensions: Some(dimensions),
            member_names: vec![Vec::new(); n],
            member_codes: vec![HashMap::new(); n],
            ..SnapshotBuilder::default()
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push(&mut self, item: Item) -> Result<()> {
        match &self.dimensions {
            None => {
                let dims: Vec<String> = item.hierarchy.iter().map(|(d, _)| d.clone()).collect();
                let mut seen = std::collections::HashSet::new();
                if let Some(dup) = dims.iter().find(|d| !seen.insert(d.as_str())) {
                    return Err(Error::InconsistentHierarchy {
                        id: item.id.clone(),
                        detail: format!("dimension `{dup}` appears twice"),
                    });
                }
                *self = SnapshotBuilder::with_dimensions(dims);
            }
            Some(dims) => {
                let matches = dims.len() == item.hierarchy.len()
                    && dims.iter().zip(&item.hierarchy).all(|(d, (h, _))| d == h);
                if !matches {
                    return Err(Error::InconsistentHierarchy {
                        id: item.id.clone(),
                        detail: format!(
                            "expected dimensions [{}], got [{}]",
                            dims.join(", "),
                            item.hierarchy
                                .iter()
                                .map(|(d, _)| d.as_str())
                                .collect::<Vec<_>>()
                                .join(", ")
                        ),
                    });
                }
            }
        }
        let members: Vec<&str> = item.hierarchy.iter().map(|(_, m)| m.as_str()).collect();
        self.push_row(&item.id, item.value, &members, item.age_months)
    }

    /// Adds one row whose members are given in dimension order.
    pub fn push_row(
        &mut self,
        id: &str,
        value: Money,
        members: &[&str],
        age_months: Option<u32>,
    ) -> Result<()> {
        if self.dimensions.is_none() {
            self.dimensions = Some(Vec::new());
        }
        let dims = self.dimensions.as_ref().map_or(0, Vec::len);
        if members.len() != dims {
            return Err(Error::InconsistentHierarchy {
                id: id.to_string(),
                detail: format!("expected {dims} hierarchy members, got {}", members.len()),
            });
        }
        if id.is_empty() {
            return Err(Error::EmptyItemId { line: None });
        }
        if value.is_negative() {
            return Err(Error::NegativeValue {
                id: id.to_string(),
                line: None,
            });
        }
        if self.positions_by_id.contains_key(id) {
            return Err(Error::DuplicateItem {
                id: id.to_string(),
                line: None,
            });
        }
        let codes: Box<[u32]> = members
            .iter()
            .enumerate()
            .map(|(d, m)| self.intern(d, m))
            .collect();
        let next = self.rows.len() as u32;
        self.positions_by_id.insert(id.into(), next);
        self.rows.push(Row {
            id: id.into(),
            value,
            members: codes,
            age_months,
        });
        Ok(())
    }

    fn intern(&mut self, dimension: usize, member: &str) -> u32 {
        if let Some(&code) = self.member_codes[dimension].get(member) {
            return code;
        }
        let code = self.member_names[dimension].len() as u32;
        self.member_names[dimension].push(member.to_string());
        self.member_codes[dimension].insert(member.to_string(), code);
        code
    }

    pub fn build(self) -> Result<PortfolioSnapshot> {
        if self.rows.is_empty() {
            return Err(Error::EmptyPortfolio);
        }
        let SnapshotBuilder {
            dimensions,
            member_names,
            member_codes,
            rows,
            mut positions_by_id,
        } = self;

        let mut order: Vec<u32> = (0..rows.len() as u32).collect();
        order.par_sort_unstable_by(|&a, &b| {
            let (ra, rb) = (&rows[a as usize], &rows[b as usize]);
            compare_rows(ra, rb)
        });
        let mut new_position = vec![0u32; rows.len()];
        for (pos, &old) in order.iter().enumerate() {
            new_position[old as usize] = pos as u32;
        }
        let mut slots: Vec<Option<Row>> = rows.into_iter().map(Some).collect();
        let sorted: Vec<Row> = order
            .iter()
            .map(|&old| slots[old as usize].take().expect("each row moved once"))
            .collect();
        for pos in positions_by_id.values_mut() {
            *pos = new_position[*pos as usize];
        }

        let total = money::total_minor(sorted.iter().map(|r| r.value));
        let positions: Arc<[u32]> = (0..sorted.len() as u32).collect();
        Ok(PortfolioSnapshot {
            data: Arc::new(PortfolioData {
                dimensions: dimensions.unwrap_or_default(),
                member_names,
                member_codes,
                rows: sorted,
                positions_by_id,
            }),
            positions,
            total,
        })
    }
}

fn compare_rows(a: &Row, b: &Row) -> Ordering {
    b.value.cmp(&a.value).then_with(|| a.id.cmp(&b.id))
}

impl PortfolioSnapshot {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Exact total in minor units (1/10000 of a currency unit).
    pub fn total_minor(&self) -> u128 {
        self.total
    }

    pub fn total_display(&self) -> String {
        money::format_total(self.total)
    }

    pub fn total_f64(&self) -> f64 {
        self.total as f64 / 10_f64.powi(money::MONEY_DECIMALS as i32)
    }

    pub fn dimensions(&self) -> &[String] {
        &self.data.dimensions
    }

    pub fn dimension_index(&self, name: &str) -> Result<usize> {
        self.data
            .dimensions
            .iter()
            .position(|d| d == name)
            .ok_or_else(|| Error::UnknownDimension(name.to_string()))
    }

    pub fn item(&self, index: usize) -> ItemRef<'_> {
        ItemRef {
            data: &self.data,
            position: self.positions[index],
        }
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = ItemRef<'_>> + '_ {
        let data = &*self.data;
        self.positions
            .iter()
            .map(move |&position| ItemRef { data, position })
    }

    pub fn values(&self) -> impl ExactSizeIterator<Item = Money> + '_ {
        let rows = &self.data.rows;
        self.positions.iter().map(move |&p| rows[p as usize].value)
    }

    /// Root-snapshot positions of this view's items, in sorted order.
    pub fn positions(&self) -> &[u32] {
        &self.positions
    }

    /// Number of rows in the underlying root snapshot.
    pub fn root_len(&self) -> usize {
        self.data.rows.len()
    }

    pub fn root(&self) -> PortfolioSnapshot {
        PortfolioSnapshot {
            data: Arc::clone(&self.data),
            positions: (0..self.data.rows.len() as u32).collect(),
            total: money::total_minor(self.data.rows.iter().map(|r| r.value)),
        }
    }

    /// Root position of the item with this id, if it is in the root snapshot.
    pub fn position_of(&self, id: &str) -> Option<u32> {
        self.data.positions_by_id.get(id).copied()
    }

    pub fn get_by_position(&self, position: u32) -> ItemRef<'_> {
        ItemRef {
            data: &self.data,
            position,
        }
    }

    /// Builds a view over the given root positions, which must be in sorted order.
    pub(crate) fn subset(&self, positions: Vec<u32>) -> PortfolioSnapshot {
        debug_assert!(positions.windows(2).all(|w| w[0] < w[1]));
        let rows = &self.data.rows;
        let total = money::total_minor(positions.iter().map(|&p| rows[p as usize].value));
        PortfolioSnapshot {
            data: Arc::clone(&self.data),
            positions: positions.into(),
            total,
        }
    }

    pub(crate) fn member_code(&self, dimension: usize, member: &str) -> Option<u32> {
        self.data.member_codes[dimension].get(member).copied()
    }

    pub(crate) fn member_name(&self, dimension: usize, code: u32) -> &str {
        &self.data.member_names[dimension][code as usize]
    }

    /// Sub-snapshot matching every filter pair and the scope, using the
    /// default new/in-line cutoff. An empty result is returned as an empty
    /// snapshot; check [`PortfolioSnapshot::is_empty`].
    pub fn slice(&self, key: &SliceKey) -> Result<PortfolioSnapshot> {
        self.slice_with_cutoff(key, DEFAULT_NEW_CUTOFF_MONTHS)
    }

    pub fn slice_with_cutoff(
        &self,
        key: &SliceKey,
        cutoff_months: u32,
    ) -> Result<PortfolioSnapshot> {
        let mut wanted: Vec<(usize, Option<u32>)> = Vec::with_capacity(key.filter.len());
        for (dim, member) in &key.filter {
            let d = self.dimension_index(dim)?;
            wanted.push((d, self.member_code(d, member)));
        }
        if key.filter.is_empty() && key.scope == Scope::All {
            return Ok(self.clone());
        }
        if wanted.iter().any(|(_, code)| code.is_none()) {
            return Ok(self.subset(Vec::new()));
        }
        let positions = self
            .iter()
            .filter(|it| {
                key.scope.admits(it.age_months(), cutoff_months)
                    && wanted
                        .iter()
                        .all(|&(d, code)| Some(it.member_code(d)) == code)
            })
            .map(|it| it.position())
            .collect();
        Ok(self.subset(positions))
    }

    /// Partitions the view by the members of `dimensions`, returning one
    /// sub-snapshot per member combination that occurs, ordered
    /// lexicographically by member names (in `dimensions` order). With no
    /// dimensions the whole view is a single group.
    pub fn group_by(&self, dimensions: &[String]) -> Result<Vec<(SliceKey, PortfolioSnapshot)>> {
        let mut dims = Vec::with_capacity(dimensions.len());
        for name in dimensions {
            let d = self.dimension_index(name)?;
            if dims.contains(&d) {
                return Err(Error::InvalidConfig(format!(
                    "dimension `{name}` listed twice in a grouping"
                )));
            }
            dims.push(d);
        }
        if dims.is_empty() {
            return Ok(vec![(SliceKey::whole(), self.clone())]);
        }
        let mut groups: HashMap<Vec<u32>, Vec<u32>> = HashMap::new();
        for it in self.iter() {
            let key: Vec<u32> = dims.iter().map(|&d| it.member_code(d)).collect();
            groups.entry(key).or_default().push(it.position());
        }
        let mut named: Vec<(Vec<&str>, Vec<u32>, Vec<u32>)> = groups
            .into_iter()
            .map(|(codes, positions)| {
                let names = dims
                    .iter()
                    .zip(&codes)
                    .map(|(&d, &c)| self.member_name(d, c))
                    .collect();
                (names, codes, positions)
            })
            .collect();
        named.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(named
            .into_iter()
            .map(|(names, _, positions)| {
                let filter = dims
                    .iter()
                    .zip(names)
                    .map(|(&d, m)| (self.data.dimensions[d].clone(), m.to_string()))
                    .collect();
                (
                    SliceKey {
                        filter,
                        scope: Scope::All,
                    },
                    self.subset(positions),
                )
            })
            .collect())
    }

    pub fn to_items(&self) -> Vec<Item> {
        self.iter().map(|it| it.to_item()).collect()
    }
}

impl PartialEq for PortfolioSnapshot {
    fn eq(&self, other: &Self) -> bool {
        self.total == other.total
            && self.len() == other.len()
            && self.dimensions() == other.dimensions()
            && self.iter().zip(other.iter()).all(|(a, b)| {
                a.id() == b.id()
                    && a.value() == b.value()
                    && a.age_months() == b.age_months()
                    && a.hierarchy().eq(b.hierarchy())
            })
    }
}

impl fmt::Debug for PortfolioSnapshot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PortfolioSnapshot")
            .field("n", &self.len())
            .field("total", &self.total_display())
            .field("dimensions", &self.dimensions())
            .finish()
    }
}
