//! Optimal 1:k assignment of controls to treated units.

use serde::Serialize;

use super::distance::DistanceMatrix;
use crate::error::{Error, Result};

/// Every treated unit with its `controls_per_treated` distinct controls.
///
/// Indices are positions among the treated units and among the controls of
/// the sample (the rows and columns of the [`DistanceMatrix`]).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairAssignment {
    /// `(treated_index, control_indices)` in increasing treated order; each
    /// control list is sorted.
    pub pairs: Vec<(usize, Vec<usize>)>,
    pub total_distance: f64,
    pub controls_per_treated: usize,
}

impl PairAssignment {
    pub fn empty(controls_per_treated: usize) -> Self {
        Self {
            pairs: Vec::new(),
            total_distance: 0.0,
            controls_per_treated,
        }
    }

    /// `(treated_index, control_index)` for 1:1 assignments.
    pub fn one_to_one(&self) -> Result<Vec<(usize, usize)>> {
        if self.controls_per_treated != 1 {
            return Err(Error::Invalid(format!(
                "expected a 1:1 assignment, got 1:{}",
                self.controls_per_treated
            )));
        }
        Ok(self.pairs.iter().map(|(t, c)| (*t, c[0])).collect())
    }

    fn from_columns(assigned: &[usize], k: usize, distance: impl Fn(usize, usize) -> f64) -> Self {
        let n_treated = assigned.len() / k;
        let mut pairs = Vec::with_capacity(n_treated);
        let mut total = 0.0;
        for t in 0..n_treated {
            let mut controls = assigned[t * k..(t + 1) * k].to_vec();
            controls.sort_unstable();
            for &c in &controls {
                total += distance(t, c);
            }
            pairs.push((t, controls));
        }
        Self {
            pairs,
            total_distance: total,
            controls_per_treated: k,
        }
    }
}

fn check_sizes(n_treated: usize, n_control: usize, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Domain(
            "need at least one control per treated unit".into(),
        ));
    }
    if n_control < k * n_treated {
        return Err(Error::Infeasible(format!(
            "{n_treated} treated units need {} controls for 1:{k} matching, only {n_control} available",
            k * n_treated
        )));
    }
    Ok(())
}

/// Minimum-total-distance assignment of `k` distinct controls to each treated
/// unit.
///
/// Each treated row is replicated `k` times and the resulting rectangular
/// assignment problem is solved by successive shortest augmenting paths with
/// dual potentials (Hungarian method), `O(rows^2 * cols)`. Ties are resolved
/// by scan order, so results are reproducible.
pub fn optimal_match(dist: &DistanceMatrix, k: usize) -> Result<PairAssignment> {
    let n_t = dist.n_treated();
    let m = dist.n_control();
    check_sizes(n_t, m, k)?;
    let n = n_t * k;
    let cost = |row: usize, col: usize| dist.get(row / k, col);

    // 1-based arrays; index 0 is the virtual source column.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    let mut minv = vec![0.0f64; m + 1];
    let mut used = vec![false; m + 1];

    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|x| *x = f64::INFINITY);
        used.iter_mut().for_each(|x| *x = false);
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assigned = vec![usize::MAX; n];
    for j in 1..=m {
        if owner[j] != 0 {
            assigned[owner[j] - 1] = j - 1;
        }
    }
    debug_assert!(assigned.iter().all(|&c| c != usize::MAX));
    Ok(PairAssignment::from_columns(&assigned, k, |t, c| {
        dist.get(t, c)
    }))
}

/// Optimal assignment when the cost of a pair depends only on the gap between
/// two scalar scores, `cost(treated_score - control_score)`, with `cost`
/// convex and nonnegative (absolute differences, with or without a soft
/// caliper).
///
/// Such problems always have an optimal solution that never crosses: with
/// both sides sorted, treated units take controls in increasing order. A
/// dynamic program over the sorted lists finds it in `O(rows * cols)`, which
/// is what makes large propensity or outcome matches cheap.
pub fn optimal_match_sorted(
    treated_scores: &[f64],
    control_scores: &[f64],
    k: usize,
    cost: impl Fn(f64) -> f64,
) -> Result<PairAssignment> {
    let n_t = treated_scores.len();
    let m = control_scores.len();
    if n_t == 0 {
        return Ok(PairAssignment::empty(k.max(1)));
    }
    check_sizes(n_t, m, k)?;
    if treated_scores
        .iter()
        .chain(control_scores)
        .any(|v| !v.is_finite())
    {
        return Err(Error::Domain("scores must be finite".into()));
    }

    let mut t_order: Vec<usize> = (0..n_t).collect();
    t_order.sort_by(|&a, &b| {
        treated_scores[a]
            .total_cmp(&treated_scores[b])
            .then(a.cmp(&b))
    });
    let rows: Vec<usize> = t_order
        .iter()
        .flat_map(|&t| std::iter::repeat_n(t, k))
        .collect();
    let mut c_order: Vec<usize> = (0..m).collect();
    c_order.sort_by(|&a, &b| {
        control_scores[a]
            .total_cmp(&control_scores[b])
            .then(a.cmp(&b))
    });

    let n = rows.len();
    let width = m + 1;
    // best[i * width + j]: cheapest way to place the first i rows among the
    // first j sorted controls.
    let mut best = vec![f64::INFINITY; (n + 1) * width];
    best[..width].iter_mut().for_each(|x| *x = 0.0);
    for i in 1..=n {
        let score = treated_scores[rows[i - 1]];
        // row i needs j >= i and leaves n - i controls for the rest
        for j in i..=(m - (n - i)) {
            let skip = best[i * width + j - 1];
            let take = best[(i - 1) * width + j - 1] + cost(score - control_scores[c_order[j - 1]]);
            best[i * width + j] = if take < skip { take } else { skip };
        }
    }

    let mut assigned = vec![usize::MAX; n_t * k];
    let mut slot = vec![0usize; n_t];
    let (mut i, mut j) = (n, m);
    while i > 0 {
        if j > i && best[i * width + j] == best[i * width + j - 1] {
            j -= 1;
            continue;
        }
        let t = rows[i - 1];
        assigned[t * k + slot[t]] = c_order[j - 1];
        slot[t] += 1;
        i -= 1;
        j -= 1;
    }
    Ok(PairAssignment::from_columns(&assigned, k, |t, c| {
        cost(treated_scores[t] - control_scores[c])
    }))
}
