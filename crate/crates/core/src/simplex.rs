//! Dense two-phase primal simplex with Bland's anti-cycling rule.
//!
//! Built for the Jensen-measure programs: a few thousand variables against a
//! few hundred constraints, solved to machine accuracy with deterministic
//! pivoting.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstraintOp {
    Le,
    Eq,
    Ge,
}

/// min c.x  subject to  rows (a.x op b),  x >= 0.
#[derive(Clone, Debug)]
pub struct LinearProgram<T: Scalar> {
    pub objective: Vec<T>,
    pub rows: Vec<(Vec<T>, ConstraintOp, T)>,
}

#[derive(Clone, Debug)]
pub struct LpSolution<T: Scalar> {
    pub x: Vec<T>,
    pub value: T,
    pub iterations: usize,
}

struct Tableau<T: Scalar> {
    /// (rows+1) x (cols+1), last row = objective, last column = rhs.
    data: Vec<T>,
    rows: usize,
    cols: usize,
    basis: Vec<usize>,
}

impl<T: Scalar> Tableau<T> {
    #[inline]
    fn at(&self, r: usize, c: usize) -> T {
        self.data[r * (self.cols + 1) + c]
    }

    #[inline]
    fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * (self.cols + 1) + c] = v;
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.cols + 1;
        let piv = self.at(pr, pc);
        let inv = T::one() / piv;
        for c in 0..w {
            let v = self.at(pr, c) * inv;
            self.set(pr, c, v);
        }
        self.set(pr, pc, T::one());
        for r in 0..=self.rows {
            if r == pr {
                continue;
            }
            let f = self.at(r, pc);
            if f == T::zero() {
                continue;
            }
            let (head, tail) = self.data.split_at_mut(pr * w);
            let (prow, rest) = tail.split_at_mut(w);
            let rrow: &mut [T] = if r < pr {
                &mut head[r * w..(r + 1) * w]
            } else {
                &mut rest[(r - pr - 1) * w..(r - pr) * w]
            };
            for c in 0..w {
                rrow[c] = rrow[c] - f * prow[c];
            }
            // keep the pivot column exactly zero off the pivot row
            rrow[pc] = T::zero();
        }
        self.basis[pr] = pc;
    }

    /// Bland's rule: entering = lowest-index improving column, leaving =
    /// lowest-index row among the minimum ratios. Never cycles.
    fn run(&mut self, eps: T, max_iters: usize) -> Result<usize> {
        let mut iters = 0usize;
        loop {
            if iters >= max_iters {
                return Err(Error::Lp(format!(
                    "simplex iteration cap {max_iters} reached"
                )));
            }
            // entering column
            let mut enter = None;
            for c in 0..self.cols {
                if self.at(self.rows, c) < -eps {
                    enter = Some(c);
                    break;
                }
            }
            let Some(pc) = enter else {
                return Ok(iters);
            };
            // leaving row: min ratio, ties to the lowest basis index
            let mut leave: Option<(usize, T)> = None;
            for r in 0..self.rows {
                let a = self.at(r, pc);
                if a > eps {
                    let ratio = self.at(r, self.cols) / a;
                    let better = match &leave {
                        None => true,
                        Some((lr, lratio)) => {
                            ratio < *lratio - eps
                                || (ratio < *lratio + eps && self.basis[r] < self.basis[*lr])
                        }
                    };
                    if better {
                        leave = Some((r, ratio));
                    }
                }
            }
            let Some((pr, _)) = leave else {
                return Err(Error::Lp("objective unbounded below".into()));
            };
            self.pivot(pr, pc);
            iters += 1;
        }
    }
}

/// Solves the program; `max_iters` caps the total pivot count.
pub fn solve_lp<T: Scalar>(lp: &LinearProgram<T>, max_iters: usize) -> Result<LpSolution<T>> {
    let n = lp.objective.len();
    let m = lp.rows.len();
    let eps = T::of(1e-9);

    // normalize rows to nonnegative rhs
    let mut rows: Vec<(Vec<T>, ConstraintOp, T)> = Vec::with_capacity(m);
    for (a, op, b) in &lp.rows {
        if a.len() != n {
            return Err(Error::Lp("row length mismatch".into()));
        }
        if *b < T::zero() {
            let flipped = match op {
                ConstraintOp::Le => ConstraintOp::Ge,
                ConstraintOp::Eq => ConstraintOp::Eq,
                ConstraintOp::Ge => ConstraintOp::Le,
            };
            rows.push((a.iter().map(|&v| -v).collect(), flipped, -*b));
        } else {
            rows.push((a.clone(), *op, *b));
        }
    }

    // columns: x (n), slacks/surplus, artificials
    let n_slack = rows
        .iter()
        .filter(|(_, op, _)| *op != ConstraintOp::Eq)
        .count();
    let n_art = rows
        .iter()
        .filter(|(_, op, _)| *op != ConstraintOp::Le)
        .count();
    let cols = n + n_slack + n_art;
    let w = cols + 1;
    let mut t = Tableau {
        data: vec![T::zero(); (m + 1) * w],
        rows: m,
        cols,
        basis: vec![usize::MAX; m],
    };
    let mut slack_idx = n;
    let mut art_idx = n + n_slack;
    let mut artificials = Vec::new();
    for (r, (a, op, b)) in rows.iter().enumerate() {
        for (c, &v) in a.iter().enumerate() {
            t.set(r, c, v);
        }
        t.set(r, cols, *b);
        match op {
            ConstraintOp::Le => {
                t.set(r, slack_idx, T::one());
                t.basis[r] = slack_idx;
                slack_idx += 1;
            }
            ConstraintOp::Ge => {
                t.set(r, slack_idx, -T::one());
                slack_idx += 1;
                t.set(r, art_idx, T::one());
                t.basis[r] = art_idx;
                artificials.push(art_idx);
                art_idx += 1;
            }
            ConstraintOp::Eq => {
                t.set(r, art_idx, T::one());
                t.basis[r] = art_idx;
                artificials.push(art_idx);
                art_idx += 1;
            }
        }
    }

    let mut total_iters = 0usize;
    if !artificials.is_empty() {
        // phase 1: minimize the artificial sum
        for &c in &artificials {
            t.set(m, c, T::one());
        }
        // price out the artificial basis
        for r in 0..m {
            if artificials.contains(&t.basis[r]) {
                for c in 0..w {
                    let v = t.at(m, c) - t.at(r, c);
                    t.set(m, c, v);
                }
            }
        }
        total_iters += t.run(eps, max_iters)?;
        let phase1 = -t.at(m, cols);
        if phase1 > T::of(1e-7) {
            return Err(Error::Lp(format!(
                "infeasible program (phase-1 value {:.3e})",
                phase1.to_f64_lossy()
            )));
        }
        // pivot lingering artificials out of the basis where possible
        for r in 0..m {
            if t.basis[r] >= n + n_slack {
                let mut pc = None;
                for c in 0..(n + n_slack) {
                    if t.at(r, c).abs() > eps {
                        pc = Some(c);
                        break;
                    }
                }
                if let Some(pc) = pc {
                    t.pivot(r, pc);
                }
            }
        }
    }

    // phase 2 objective
    for c in 0..w {
        t.set(m, c, T::zero());
    }
    for (c, &v) in lp.objective.iter().enumerate() {
        t.set(m, c, v);
    }
    // forbid artificial re-entry
    for &c in &artificials {
        t.set(m, c, T::of(1e30));
    }
    // price out the current basis
    for r in 0..m {
        let b = t.basis[r];
        let f = t.at(m, b);
        if f != T::zero() {
            for c in 0..w {
                let v = t.at(m, c) - f * t.at(r, c);
                t.set(m, c, v);
            }
            t.set(m, b, T::zero());
        }
    }
    total_iters += t.run(eps, max_iters)?;

    let mut x = vec![T::zero(); n];
    for r in 0..m {
        if t.basis[r] < n {
            x[t.basis[r]] = t.at(r, cols);
        }
    }
    let mut value = T::zero();
    for (c, &v) in lp.objective.iter().enumerate() {
        value = value + v * x[c];
    }
    Ok(LpSolution {
        x,
        value,
        iterations: total_iters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_bounded_min() {
        // min -x - y  s.t. x + y <= 1, x,y >= 0  ->  value -1
        let lp: LinearProgram<f64> = LinearProgram {
            objective: vec![-1.0, -1.0],
            rows: vec![(vec![1.0, 1.0], ConstraintOp::Le, 1.0)],
        };
        let s = solve_lp(&lp, 1000).unwrap();
        assert!((s.value + 1.0).abs() < 1e-12);
        assert!((s.x[0] + s.x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn equality_and_ge_rows() {
        // min x1 + 2 x2  s.t. x1 + x2 = 1, x1 >= 0.25 -> x = (1, 0)
        let lp: LinearProgram<f64> = LinearProgram {
            objective: vec![1.0, 2.0],
            rows: vec![
                (vec![1.0, 1.0], ConstraintOp::Eq, 1.0),
                (vec![1.0, 0.0], ConstraintOp::Ge, 0.25),
            ],
        };
        let s = solve_lp(&lp, 1000).unwrap();
        assert!((s.value - 1.0).abs() < 1e-10);
        assert!((s.x[0] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn infeasible_detected() {
        let lp: LinearProgram<f64> = LinearProgram {
            objective: vec![1.0],
            rows: vec![
                (vec![1.0], ConstraintOp::Le, 1.0),
                (vec![1.0], ConstraintOp::Ge, 2.0),
            ],
        };
        assert!(matches!(solve_lp(&lp, 1000), Err(Error::Lp(_))));
    }

    #[test]
    fn unbounded_detected() {
        let lp: LinearProgram<f64> = LinearProgram {
            objective: vec![-1.0],
            rows: vec![(vec![0.0], ConstraintOp::Le, 1.0)],
        };
        assert!(matches!(solve_lp(&lp, 1000), Err(Error::Lp(_))));
    }

    #[test]
    fn degenerate_cycling_guard() {
        // classic degeneracy-prone instance; Bland must terminate
        let lp: LinearProgram<f64> = LinearProgram {
            objective: vec![-0.75, 150.0, -0.02, 6.0],
            rows: vec![
                (vec![0.25, -60.0, -0.04, 9.0], ConstraintOp::Le, 0.0),
                (vec![0.5, -90.0, -0.02, 3.0], ConstraintOp::Le, 0.0),
                (vec![0.0, 0.0, 1.0, 0.0], ConstraintOp::Le, 1.0),
            ],
        };
        let s = solve_lp(&lp, 10_000).unwrap();
        assert!((s.value + 0.05).abs() < 1e-9, "value {}", s.value);
    }

    #[test]
    fn probability_simplex_min() {
        // min g.mu over the probability simplex: the smallest entry of g
        let g = [3.0, -1.0, 2.0, 0.5];
        let lp: LinearProgram<f64> = LinearProgram {
            objective: g.to_vec(),
            rows: vec![(vec![1.0; 4], ConstraintOp::Eq, 1.0)],
        };
        let s = solve_lp(&lp, 1000).unwrap();
        assert!((s.value + 1.0).abs() < 1e-12);
        assert!((s.x[1] - 1.0).abs() < 1e-12);
    }
}
