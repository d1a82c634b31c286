//! Minority oversampling by same-class neighbor interpolation with one-hot
//! re-projection.

use rand::Rng as _;
use rayon::prelude::*;

use crate::dataset::{EncodedMatrix, SeverityLevel};
use crate::error::{Error, Result};
use crate::rng;
use crate::NUM_CLASSES;

pub fn class_counts(labels: &[SeverityLevel]) -> [usize; NUM_CLASSES] {
    let mut counts = [0; NUM_CLASSES];
    for l in labels {
        counts[l.index()] += 1;
    }
    counts
}

/// Position of the active column within each group, per member row. For
/// one-hot rows the squared distance is twice the number of groups whose
/// positions differ, so comparing these is enough to rank neighbors.
fn active_positions(train: &EncodedMatrix, members: &[usize]) -> Vec<u16> {
    let mut out = Vec::with_capacity(members.len() * train.groups().len());
    for &i in members {
        let row = train.row(i);
        for g in train.groups() {
            let hot = row[g.start..g.start + g.len].iter().position(|&v| v == 1).unwrap_or(0);
            out.push(hot as u16);
        }
    }
    out
}

/// Positions (within the member list) of the `k` nearest other members of
/// member `at`; distance ties go to the lower row index.
fn nearest_members(active: &[u16], n_groups: usize, at: usize, k: usize) -> Vec<usize> {
    let anchor = &active[at * n_groups..(at + 1) * n_groups];
    let mut scored: Vec<(u32, usize)> = active
        .chunks_exact(n_groups)
        .enumerate()
        .filter(|&(pos, _)| pos != at)
        .map(|(pos, other)| (anchor.iter().zip(other).filter(|(a, b)| a != b).count() as u32, pos))
        .collect();
    let k = k.min(scored.len());
    if k < scored.len() {
        scored.select_nth_unstable(k);
        scored.truncate(k);
    }
    scored.sort_unstable();
    scored.into_iter().map(|(_, pos)| pos).collect()
}

/// Interpolates `a + λ(b − a)`, rounds each coordinate at 0.5 and keeps a
/// single 1 per column group (argmax of the rounded values, ties to the
/// lower code).
fn interpolate(train: &EncodedMatrix, a: &[u8], b: &[u8], lambda: f64) -> Vec<u8> {
    let rounded: Vec<u8> = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| {
            let v = f64::from(x) + lambda * (f64::from(y) - f64::from(x));
            u8::from(v >= 0.5)
        })
        .collect();
    let mut out = vec![0u8; rounded.len()];
    for g in train.groups() {
        let slice = &rounded[g.start..g.start + g.len];
        let mut best = 0;
        for (i, &v) in slice.iter().enumerate() {
            if v > slice[best] {
                best = i;
            }
        }
        out[g.start + best] = 1;
    }
    out
}

/// Raises every present minority class to the majority count with
/// synthetic rows. Original rows are kept in order; synthetic rows follow,
/// grouped by class. Absent classes stay absent.
pub fn oversample(train: &EncodedMatrix, k: usize, seed: u64) -> Result<EncodedMatrix> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let counts = train.class_counts();
    for (class, &count) in counts.iter().enumerate() {
        if count == 1 {
            return Err(Error::TinyClass { class, count });
        }
    }
    let target = counts.iter().copied().max().unwrap_or(0);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); NUM_CLASSES];
    for (i, l) in train.labels().iter().enumerate() {
        members[l.index()].push(i);
    }

    // Each class draws from its own stream, so the parallel result equals
    // the sequential one.
    let synthetic: Vec<Vec<Vec<u8>>> = (0..NUM_CLASSES)
        .into_par_iter()
        .map(|class| {
            let rows = &members[class];
            let needed = if rows.is_empty() { 0 } else { target - rows.len() };
            if needed == 0 {
                return Vec::new();
            }
            let mut rng = rng::seeded(rng::derive_seed_index(rng::derive_seed(seed, "oversample"), class as u64));
            let n_groups = train.groups().len();
            let active = active_positions(train, rows);
            let mut neighbors: Vec<Option<Vec<usize>>> = vec![None; rows.len()];
            (0..needed)
                .map(|_| {
                    let at = rng.random_range(0..rows.len());
                    let near = neighbors[at].get_or_insert_with(|| nearest_members(&active, n_groups, at, k));
                    let other = near[rng.random_range(0..near.len())];
                    let lambda: f64 = rng.random();
                    interpolate(train, train.row(rows[at]), train.row(rows[other]), lambda)
                })
                .collect()
        })
        .collect();

    let mut out = train.clone();
    for (class, rows) in synthetic.into_iter().enumerate() {
        let label = SeverityLevel::from_index(class).unwrap();
        for row in rows {
            out.push_row(&row, label);
        }
    }
    Ok(out)
}
