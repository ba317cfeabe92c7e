//! Exact dataset-wide range percentiles in bounded memory.
//!
//! Values are 32-bit floats, so an order statistic is pinned down by two
//! 16-bit radix passes over the stream: the first histograms the high half
//! of every value's order-preserving key, the second histograms the low half
//! inside the few buckets holding the ranks we need. Memory stays at a
//! handful of 65536-entry tables whatever the dataset size, and the result
//! does not depend on the order or chunking of the stream.

use std::borrow::Borrow;
use std::collections::BTreeMap;

use super::range_map::RangeMap;
use crate::error::{Error, Result};

pub const LOWER_PERCENTILE: f64 = 2.0;
pub const UPPER_PERCENTILE: f64 = 98.0;

const BUCKETS: usize = 1 << 16;

fn key(v: f32) -> u32 {
    let b = v.to_bits();
    if b & 0x8000_0000 != 0 {
        !b
    } else {
        b | 0x8000_0000
    }
}

fn from_key(k: u32) -> f32 {
    let b = if k & 0x8000_0000 != 0 {
        k & 0x7fff_ffff
    } else {
        !k
    };
    f32::from_bits(b)
}

/// Linear-interpolation percentile position: value at fractional index
/// `(n - 1) · p / 100` of the sorted data.
fn rank(n: u64, p: f64) -> (u64, f64) {
    let h = (n - 1) as f64 * p / 100.0;
    let lo = h.floor();
    (lo as u64, h - lo)
}

/// Percentiles `ps` (in percent) over the valid ranges of every map the
/// stream yields. `stream` is called once per pass and must yield the same
/// maps each time.
pub fn compute_percentiles_with<F, I, R>(mut stream: F, ps: &[f64]) -> Result<Vec<f64>>
where
    F: FnMut() -> I,
    I: IntoIterator<Item = R>,
    R: Borrow<RangeMap>,
{
    if ps.iter().any(|p| !(0.0..=100.0).contains(p)) {
        return Err(Error::InvalidInput("percentiles must lie in [0, 100]".into()));
    }
    // Pass 1: count and high-half histogram.
    let mut high = vec![0u64; BUCKETS];
    let mut n = 0u64;
    for m in stream() {
        for r in m.borrow().valid_ranges() {
            high[(key(r) >> 16) as usize] += 1;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::Precondition("no valid range cells in stream".into()));
    }

    // Ranks needed, in sorted order.
    let mut wanted: Vec<u64> = Vec::new();
    for &p in ps {
        let (lo, _) = rank(n, p);
        wanted.push(lo);
        if lo + 1 < n {
            wanted.push(lo + 1);
        }
    }
    wanted.sort_unstable();
    wanted.dedup();

    // Locate the bucket of each rank and its offset inside the bucket.
    let mut cumulative = Vec::with_capacity(BUCKETS + 1);
    let mut acc = 0u64;
    cumulative.push(0);
    for c in &high {
        acc += c;
        cumulative.push(acc);
    }
    let mut bucket_of_rank = BTreeMap::new();
    for &k in &wanted {
        let b = cumulative.partition_point(|&c| c <= k) - 1;
        bucket_of_rank.insert(k, (b, k - cumulative[b]));
    }

    // Pass 2: low-half histograms for the touched buckets.
    let mut low: BTreeMap<usize, Vec<u64>> = bucket_of_rank
        .values()
        .map(|&(b, _)| (b, vec![0u64; BUCKETS]))
        .collect();
    for m in stream() {
        for r in m.borrow().valid_ranges() {
            let k = key(r);
            if let Some(h) = low.get_mut(&((k >> 16) as usize)) {
                h[(k & 0xffff) as usize] += 1;
            }
        }
    }
    let mut second_total = 0u64;
    for (b, h) in &low {
        let s: u64 = h.iter().sum();
        if s != high[*b] {
            return Err(Error::InvalidInput(
                "stream changed between percentile passes".into(),
            ));
        }
        second_total += s;
    }
    debug_assert!(second_total > 0);

    let value_at = |k: u64| -> f64 {
        let (b, mut offset) = bucket_of_rank[&k];
        let h = &low[&b];
        for (lowbits, &c) in h.iter().enumerate() {
            if offset < c {
                return from_key(((b as u32) << 16) | lowbits as u32) as f64;
            }
            offset -= c;
        }
        unreachable!("rank inside bucket")
    };

    Ok(ps
        .iter()
        .map(|&p| {
            let (lo, frac) = rank(n, p);
            let a = value_at(lo);
            if lo + 1 < n && frac > 0.0 {
                a + frac * (value_at(lo + 1) - a)
            } else {
                a
            }
        })
        .collect())
}

/// The 2nd and 98th percentiles of valid ranges across a dataset.
pub fn compute_percentiles<F, I, R>(stream: F) -> Result<(f64, f64)>
where
    F: FnMut() -> I,
    I: IntoIterator<Item = R>,
    R: Borrow<RangeMap>,
{
    let v = compute_percentiles_with(stream, &[LOWER_PERCENTILE, UPPER_PERCENTILE])?;
    Ok((v[0], v[1]))
}
