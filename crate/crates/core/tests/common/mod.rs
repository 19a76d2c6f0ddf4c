//! Independent oracles and fixtures shared by the property and acceptance suites.
//! Oracles use exact integer arithmetic and recompute everything from scratch.

#![allow(dead_code)]

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use stratos_core::{build_snapshot, ClassLabel, Item, Money, PortfolioSnapshot};

/// Evaluates the four label clauses literally, item by item, on exact
/// fractions. `values` must be sorted descending; thresholds are in
/// thousandths.
pub fn oracle_classify(values: &[u64], t_permille: [u64; 3]) -> Vec<ClassLabel> {
    let total: u128 = values.iter().map(|&v| v as u128).sum();
    assert!(total > 0);
    // C_k <= t  <=>  prefix * 1000 <= t * total
    let le = |prefix: u128, t: u64| prefix * 1000 <= t as u128 * total;
    let lt = |prefix: u128, t: u64| prefix * 1000 < t as u128 * total;
    let gt = |prefix: u128, t: u64| prefix * 1000 > t as u128 * total;
    let [ta, tb, tc] = t_permille;
    let mut prev: u128 = 0;
    let mut labels = Vec::with_capacity(values.len());
    for &v in values {
        let cur = prev + v as u128;
        let straddles = |t| lt(prev, t) && gt(cur, t);
        let a = le(cur, ta) || straddles(ta);
        let b = !a && (le(cur, tb) || straddles(tb));
        let c = !a && !b && (le(cur, tc) || straddles(tc));
        labels.push(if a {
            ClassLabel::A
        } else if b {
            ClassLabel::B
        } else if c {
            ClassLabel::C
        } else {
            ClassLabel::D
        });
        prev = cur;
    }
    labels
}

/// Smallest `p` maximizing `(r_1 + ... + r_p + big_j) / (p + j)`, each prefix
/// summed from scratch and compared as exact fractions.
pub fn oracle_optimal_blend(values: &[u64], j: u64, big_j: u64) -> usize {
    let mut best = (0u128, 1u128);
    let mut best_p = 0;
    for p in 1..=values.len() {
        let sum: u128 = values[..p].iter().map(|&v| v as u128).sum();
        let num = sum + big_j as u128;
        let den = p as u128 + j as u128;
        if best_p == 0 || num * best.1 > best.0 * den {
            best = (num, den);
            best_p = p;
        }
    }
    best_p
}

pub fn snapshot_of(values: &[u64]) -> PortfolioSnapshot {
    build_snapshot(
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| Item::new(format!("i{i:05}"), Money::from_units(v as i64))),
    )
    .unwrap()
}

pub fn sorted_desc(mut values: Vec<u64>) -> Vec<u64> {
    values.sort_unstable_by(|a, b| b.cmp(a));
    values
}

pub fn ten_item_values() -> Vec<u64> {
    (1..=10).map(|k| 110 - 10 * k).collect()
}

pub fn ten_items() -> PortfolioSnapshot {
    build_snapshot(
        ten_item_values()
            .into_iter()
            .enumerate()
            .map(|(i, v)| Item::new(format!("Item {}", i + 1), Money::from_units(v as i64))),
    )
    .unwrap()
}

/// Items over two dimensions with small member sets and mixed ages.
pub fn random_hierarchy(rng: &mut StdRng, n: usize) -> Vec<Item> {
    (0..n)
        .map(|i| {
            let value = if rng.gen_bool(0.1) {
                0
            } else {
                rng.gen_range(1..5_000)
            };
            let mut item = Item::new(format!("sku{i:04}"), Money::from_units(value))
                .with_member("brand", format!("b{}", rng.gen_range(0..4)))
                .with_member("region", format!("r{}", rng.gen_range(0..3)));
            if rng.gen_bool(0.8) {
                item = item.with_age(rng.gen_range(0..36));
            }
            item
        })
        .collect()
}

/// Power-law portfolio over a four-level hierarchy.
pub fn power_law_portfolio(seed: u64, n: usize) -> Vec<Item> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let u: f64 = rng.gen_range(1e-9..1.0);
            // Pareto tail, alpha = 1.2, in cents.
            let cents = (100.0 * u.powf(-1.0 / 1.2)).min(1e12) as i64;
            let division = rng.gen_range(0..8);
            let category = division * 10 + rng.gen_range(0..10);
            let brand = category * 10 + rng.gen_range(0..25);
            Item::new(format!("P{i:07}"), Money::from_minor_units(cents * 100))
                .with_member("division", format!("D{division:02}"))
                .with_member("category", format!("C{category:03}"))
                .with_member("brand", format!("B{brand:04}"))
                .with_member("region", format!("R{}", rng.gen_range(0..6)))
                .with_age(rng.gen_range(0..60))
        })
        .collect()
}
