//! Exact optimal transport between uniform clouds of equal size.
//!
//! With uniform weights and equal cardinality the optimal coupling is a
//! permutation, so `W_p^p` is the value of a linear assignment problem on the
//! ground-cost matrix. The solver follows Jonker and Volgenant: column
//! reduction, reduction transfer and augmenting row reduction, then
//! shortest augmenting paths with lazy price updates.

use super::SampleCloud;
use crate::{Error, Result};

/// Ground cost between points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroundCost {
    /// `|x - y|`, giving `W1`.
    Euclidean,
    /// `|x - y|^2`, giving `W2^2`.
    SquaredEuclidean,
}

/// A solved assignment: `row_to_col[i]` is the column matched with row `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub row_to_col: Vec<usize>,
    pub total_cost: f64,
}

/// Dense linear assignment solver with an explicit size cap.
#[derive(Debug, Clone, Copy)]
pub struct AssignmentSolver {
    capacity: usize,
}

impl Default for AssignmentSolver {
    fn default() -> Self {
        Self {
            capacity: Self::DEFAULT_CAPACITY,
        }
    }
}

const NONE: usize = usize::MAX;

impl AssignmentSolver {
    pub const DEFAULT_CAPACITY: usize = 4096;

    pub fn with_capacity(capacity: usize) -> Self {
        Self { capacity }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Minimum-cost perfect matching for the row-major `n x n` matrix `cost`.
    pub fn solve(&self, cost: &[f64], n: usize) -> Result<Assignment> {
        if n > self.capacity {
            return Err(Error::Capacity {
                n,
                capacity: self.capacity,
            });
        }
        if cost.len() != n * n {
            return Err(Error::invalid(format!(
                "cost matrix has {} entries, expected {}",
                cost.len(),
                n * n
            )));
        }
        if cost.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("cost matrix has non-finite entries"));
        }
        if n == 0 {
            return Ok(Assignment {
                row_to_col: vec![],
                total_cost: 0.0,
            });
        }
        let row = |i: usize| &cost[i * n..(i + 1) * n];

        // Column prices `v`; row `i` holds column `row_col[i]`.
        let mut v = vec![0.0f64; n];
        let mut col_owner = vec![NONE; n];
        let mut row_col = vec![NONE; n];
        let mut matches = vec![0usize; n];

        // Column reduction: each column goes to its cheapest row if free.
        for j in (0..n).rev() {
            let (mut best, mut arg) = (f64::INFINITY, 0);
            for i in 0..n {
                let c = cost[i * n + j];
                if c < best {
                    best = c;
                    arg = i;
                }
            }
            v[j] = best;
            matches[arg] += 1;
            if matches[arg] == 1 {
                row_col[arg] = j;
                col_owner[j] = arg;
            }
        }

        // Reduction transfer from singly matched rows; collect free rows.
        let mut free: Vec<usize> = Vec::with_capacity(n);
        for i in 0..n {
            match matches[i] {
                0 => free.push(i),
                1 => {
                    let j1 = row_col[i];
                    let r = row(i);
                    let min = (0..n)
                        .filter(|&j| j != j1)
                        .map(|j| r[j] - v[j])
                        .fold(f64::INFINITY, f64::min);
                    if min.is_finite() {
                        v[j1] -= min;
                    }
                }
                _ => {}
            }
        }

        // Augmenting row reduction, two passes. Rows may bounce back to the
        // front of the queue; the step cap guards against float ties.
        for _ in 0..2 {
            let pending = std::mem::take(&mut free);
            let mut queue: std::collections::VecDeque<usize> = pending.into();
            let mut steps = 0usize;
            while let Some(i) = queue.pop_front() {
                steps += 1;
                if steps > 8 * n + 16 {
                    free.push(i);
                    free.extend(queue.drain(..));
                    break;
                }
                let r = row(i);
                let (mut umin, mut j1) = (r[0] - v[0], 0usize);
                let (mut usub, mut j2) = (f64::INFINITY, NONE);
                for j in 1..n {
                    let h = r[j] - v[j];
                    if h < usub {
                        if h >= umin {
                            usub = h;
                            j2 = j;
                        } else {
                            usub = umin;
                            j2 = j1;
                            umin = h;
                            j1 = j;
                        }
                    }
                }
                let mut i0 = col_owner[j1];
                let strict = umin < usub;
                if strict {
                    v[j1] -= usub - umin;
                } else if i0 != NONE && j2 != NONE {
                    j1 = j2;
                    i0 = col_owner[j1];
                }
                if i0 != NONE {
                    row_col[i0] = NONE;
                }
                row_col[i] = j1;
                col_owner[j1] = i;
                if i0 != NONE {
                    if strict {
                        queue.push_front(i0);
                    } else {
                        free.push(i0);
                    }
                }
            }
        }

        // Shortest augmenting paths for the remaining free rows. `cols`
        // is split into scanned [0, low), current minimum [low, up) and
        // the rest [up, n).
        let mut dist = vec![0.0f64; n];
        let mut pred = vec![0usize; n];
        let mut cols: Vec<usize> = (0..n).collect();
        for &f in &free {
            let rf = row(f);
            for j in 0..n {
                dist[j] = rf[j] - v[j];
                pred[j] = f;
                cols[j] = j;
            }
            let (mut low, mut up) = (0usize, 0usize);
            let mut scanned = 0usize;
            let mut min = 0.0f64;
            let end = 'search: loop {
                if up == low {
                    scanned = low;
                    min = dist[cols[up]];
                    up += 1;
                    for k in up..n {
                        let j = cols[k];
                        let h = dist[j];
                        if h <= min {
                            if h < min {
                                up = low;
                                min = h;
                            }
                            cols[k] = cols[up];
                            cols[up] = j;
                            up += 1;
                        }
                    }
                    for &j in &cols[low..up] {
                        if col_owner[j] == NONE {
                            break 'search j;
                        }
                    }
                }
                let j1 = cols[low];
                low += 1;
                let i = col_owner[j1];
                let ri = row(i);
                let h = ri[j1] - v[j1] - min;
                let mut k = up;
                while k < n {
                    let j = cols[k];
                    let v2 = ri[j] - v[j] - h;
                    if v2 < dist[j] {
                        pred[j] = i;
                        if v2 == min {
                            if col_owner[j] == NONE {
                                break 'search j;
                            }
                            cols[k] = cols[up];
                            cols[up] = j;
                            up += 1;
                        }
                        dist[j] = v2;
                    }
                    k += 1;
                }
            };
            for &j in &cols[..scanned] {
                v[j] += dist[j] - min;
            }
            let mut j = end;
            loop {
                let i = pred[j];
                col_owner[j] = i;
                let next = row_col[i];
                row_col[i] = j;
                if i == f {
                    break;
                }
                j = next;
            }
        }

        let total_cost = (0..n).map(|i| cost[i * n + row_col[i]]).sum();
        Ok(Assignment {
            row_to_col: row_col,
            total_cost,
        })
    }

    /// `W_p^p` style transport cost between two equally sized clouds, averaged
    /// over the `n` matched pairs.
    pub fn transport_cost(
        &self,
        a: &SampleCloud,
        b: &SampleCloud,
        ground: GroundCost,
    ) -> Result<f64> {
        if a.dim() != b.dim() {
            return Err(Error::DimensionMismatch {
                expected: a.dim(),
                found: b.dim(),
            });
        }
        if a.len() != b.len() {
            return Err(Error::SizeMismatch {
                left: a.len(),
                right: b.len(),
            });
        }
        let n = a.len();
        if n > self.capacity {
            return Err(Error::Capacity {
                n,
                capacity: self.capacity,
            });
        }
        let mut cost = Vec::with_capacity(n * n);
        for x in a.points() {
            for y in b.points() {
                let sq = (x - y).norm_squared();
                cost.push(match ground {
                    GroundCost::Euclidean => sq.sqrt(),
                    GroundCost::SquaredEuclidean => sq,
                });
            }
        }
        Ok(self.solve(&cost, n)?.total_cost / n as f64)
    }
}

/// Exact 1-Wasserstein distance between two uniform clouds of equal size.
pub fn empirical_w1(a: &SampleCloud, b: &SampleCloud) -> Result<f64> {
    AssignmentSolver::default().transport_cost(a, b, GroundCost::Euclidean)
}

/// Exact 2-Wasserstein distance between two uniform clouds of equal size.
pub fn empirical_w2(a: &SampleCloud, b: &SampleCloud) -> Result<f64> {
    Ok(AssignmentSolver::default()
        .transport_cost(a, b, GroundCost::SquaredEuclidean)?
        .max(0.0)
        .sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn cloud(rows: &[&[f64]]) -> SampleCloud {
        SampleCloud::new(rows.iter().map(|r| DVector::from_row_slice(r)).collect()).unwrap()
    }

    #[test]
    fn identical_clouds_have_zero_distance() {
        let a = cloud(&[&[0.0, 1.0], &[2.0, -1.0], &[0.5, 0.5]]);
        assert_eq!(empirical_w1(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn single_pair() {
        let a = cloud(&[&[0.0, 0.0]]);
        let b = cloud(&[&[3.0, 4.0]]);
        assert!((empirical_w1(&a, &b).unwrap() - 5.0).abs() < 1e-15);
    }

    #[test]
    fn two_point_line() {
        // assignments: {0->2, 1->10} costs 11, {0->10, 1->2} costs 11; both /2
        let a = cloud(&[&[0.0], &[1.0]]);
        let b = cloud(&[&[2.0], &[10.0]]);
        assert!((empirical_w1(&a, &b).unwrap() - 5.5).abs() < 1e-15);
    }

    #[test]
    fn known_three_by_three() {
        let cost = [4.0, 1.0, 3.0, 2.0, 0.0, 5.0, 3.0, 2.0, 2.0];
        let sol = AssignmentSolver::default().solve(&cost, 3).unwrap();
        assert_eq!(sol.total_cost, 5.0);
        assert_eq!(sol.row_to_col, vec![1, 0, 2]);
    }

    #[test]
    fn capacity_is_enforced() {
        let solver = AssignmentSolver::with_capacity(2);
        let a = cloud(&[&[0.0], &[1.0], &[2.0]]);
        assert!(matches!(
            solver.transport_cost(&a, &a, GroundCost::Euclidean),
            Err(Error::Capacity { n: 3, capacity: 2 })
        ));
    }

    #[test]
    fn size_and_dimension_mismatch() {
        let a = cloud(&[&[0.0], &[1.0]]);
        let b = cloud(&[&[0.0]]);
        assert!(matches!(empirical_w1(&a, &b), Err(Error::SizeMismatch { .. })));
        let c = cloud(&[&[0.0, 0.0], &[1.0, 1.0]]);
        assert!(matches!(
            empirical_w1(&a, &c),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn ties_are_handled() {
        let cost = vec![1.0; 16];
        let sol = AssignmentSolver::default().solve(&cost, 4).unwrap();
        assert_eq!(sol.total_cost, 4.0);
        let mut cols = sol.row_to_col.clone();
        cols.sort();
        assert_eq!(cols, vec![0, 1, 2, 3]);
    }

    fn brute_force(cost: &[f64], n: usize) -> f64 {
        fn rec(cost: &[f64], n: usize, i: usize, used: &mut [bool], acc: f64, best: &mut f64) {
            if i == n {
                *best = best.min(acc);
                return;
            }
            for j in 0..n {
                if !used[j] {
                    used[j] = true;
                    rec(cost, n, i + 1, used, acc + cost[i * n + j], best);
                    used[j] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        rec(cost, n, 0, &mut vec![false; n], 0.0, &mut best);
        best
    }

    proptest::proptest! {
        #[test]
        fn matches_brute_force(n in 1usize..=6, seed in 0u64..10_000) {
            use rand::Rng;
            let mut rng = crate::rng_stream(seed);
            let cost: Vec<f64> = (0..n * n)
                .map(|_| if rng.random_bool(0.2) { 1.0 } else { rng.random_range(-3.0..5.0) })
                .collect();
            let sol = AssignmentSolver::default().solve(&cost, n).unwrap();
            let mut cols = sol.row_to_col.clone();
            cols.sort();
            proptest::prop_assert_eq!(cols, (0..n).collect::<Vec<_>>());
            let direct: f64 = (0..n).map(|i| cost[i * n + sol.row_to_col[i]]).sum();
            proptest::prop_assert!((direct - sol.total_cost).abs() < 1e-12);
            proptest::prop_assert!((sol.total_cost - brute_force(&cost, n)).abs() < 1e-9);
        }
    }

    #[test]
    #[ignore]
    fn timing_large() {
        use rand::Rng;
        for n in [1024usize, 2000] {
            let mut rng = crate::rng_stream(n as u64);
            let cost: Vec<f64> = (0..n * n).map(|_| rng.random::<f64>()).collect();
            let t = std::time::Instant::now();
            AssignmentSolver::default().solve(&cost, n).unwrap();
            eprintln!("n={n}: {:?}", t.elapsed());
        }
    }
}
