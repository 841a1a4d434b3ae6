//! Dense two-phase tableau simplex with Bland's rule.
//!
//! Solves `min c^T x  s.t.  A x <= b`, with each variable either free or
//! constrained to `x >= 0`. Intended for the small piecewise-linear infima
//! that arise from structured hinge losses, not for large programs.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

const EPS: f64 = 1e-11;

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub value: f64,
}

/// Minimizes `c^T x` subject to `rows[i] . x <= b[i]`; `free[j]` marks
/// variables without a sign constraint.
pub fn minimize(c: &[f64], rows: &[Vec<f64>], b: &[f64], free: &[bool]) -> Result<LpSolution> {
    let n = c.len();
    if free.len() != n || rows.len() != b.len() || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Lp("malformed"));
    }
    // split free variables into x+ - x-
    let mut cols: Vec<(usize, f64)> = Vec::new();
    for (j, f) in free.iter().enumerate() {
        cols.push((j, 1.0));
        if *f {
            cols.push((j, -1.0));
        }
    }
    let nv = cols.len();
    let m = rows.len();
    let n_art = b.iter().filter(|v| **v < 0.0).count();
    let width = nv + m + n_art + 1;
    let rhs = width - 1;
    let mut t = vec![vec![0.0; width]; m + 1];
    let mut basis = vec![0usize; m];
    let mut art = nv + m;
    for i in 0..m {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for (cj, (j, s)) in cols.iter().enumerate() {
            t[i][cj] = sign * s * rows[i][*j];
        }
        t[i][nv + i] = sign;
        t[i][rhs] = sign * b[i];
        if b[i] < 0.0 {
            t[i][art] = 1.0;
            basis[i] = art;
            art += 1;
        } else {
            basis[i] = nv + i;
        }
    }
    if n_art > 0 {
        // phase I objective: sum of artificials, expressed in non-basic terms
        let obj = m;
        for v in t[obj].iter_mut() {
            *v = 0.0;
        }
        for a in (nv + m)..(nv + m + n_art) {
            t[obj][a] = 1.0;
        }
        for i in 0..m {
            if basis[i] >= nv + m {
                for col in 0..width {
                    t[obj][col] -= t[i][col];
                }
            }
        }
        run(&mut t, &mut basis, nv + m + n_art)?;
        if -t[obj][rhs] > 1e-8 {
            return Err(Error::Lp("infeasible"));
        }
        // drive artificials out of the basis where possible
        for i in 0..m {
            if basis[i] >= nv + m {
                if let Some(col) = (0..nv + m).find(|&c| t[i][c].abs() > EPS) {
                    pivot(&mut t, &mut basis, i, col);
                }
            }
        }
    }
    // phase II: artificials are barred from entering
    let obj = m;
    for v in t[obj].iter_mut() {
        *v = 0.0;
    }
    for (cj, (j, s)) in cols.iter().enumerate() {
        t[obj][cj] = s * c[*j];
    }
    for i in 0..m {
        let bc = t[obj][basis[i]];
        if bc != 0.0 {
            for col in 0..width {
                t[obj][col] -= bc * t[i][col];
            }
        }
    }
    run(&mut t, &mut basis, nv + m)?;
    let mut split = vec![0.0; width];
    for i in 0..m {
        split[basis[i]] = t[i][rhs];
    }
    let mut x = vec![0.0; n];
    for (cj, (j, s)) in cols.iter().enumerate() {
        x[*j] += s * split[cj];
    }
    let value = c.iter().zip(&x).map(|(a, b)| a * b).sum();
    Ok(LpSolution { x, value })
}

fn pivot(t: &mut [Vec<f64>], basis: &mut [usize], r: usize, col: usize) {
    let p = t[r][col];
    for v in t[r].iter_mut() {
        *v /= p;
    }
    let prow = t[r].clone();
    for (i, row) in t.iter_mut().enumerate() {
        if i != r {
            let f = row[col];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&prow) {
                    *v -= f * pv;
                }
            }
        }
    }
    basis[r] = col;
}

/// Simplex iterations on the objective in the last row, entering columns
/// limited to `0..enter_limit`.
fn run(t: &mut [Vec<f64>], basis: &mut [usize], enter_limit: usize) -> Result<()> {
    let m = basis.len();
    let rhs = t[0].len() - 1;
    for _ in 0..50_000 {
        let Some(col) = (0..enter_limit).find(|&c| t[m][c] < -EPS) else {
            return Ok(());
        };
        let mut best: Option<(f64, usize)> = None;
        for i in 0..m {
            if t[i][col] > EPS {
                let ratio = t[i][rhs] / t[i][col];
                best = match best {
                    None => Some((ratio, i)),
                    Some((br, bi)) => {
                        if ratio < br - EPS || (ratio <= br + EPS && basis[i] < basis[bi]) {
                            Some((ratio, i))
                        } else {
                            Some((br, bi))
                        }
                    }
                };
            }
        }
        let Some((_, r)) = best else {
            return Err(Error::Lp("unbounded"));
        };
        pivot(t, basis, r, col);
    }
    Err(Error::Lp("not converging"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::vec;

    #[test]
    fn textbook_program() {
        // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18
        let sol = minimize(&[-3.0, -5.0], &[vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 2.0]], &[4.0, 12.0, 18.0], &[false, false]).unwrap();
        assert!((sol.value + 36.0).abs() < 1e-9);
        assert!((sol.x[0] - 2.0).abs() < 1e-9 && (sol.x[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn needs_phase_one_and_free_vars() {
        // min |x - 3| via t >= x - 3, t >= 3 - x, x free
        let sol = minimize(&[0.0, 1.0], &[vec![1.0, -1.0], vec![-1.0, -1.0]], &[3.0, -3.0], &[true, false]).unwrap();
        assert!(sol.value.abs() < 1e-9);
        assert!((sol.x[0] - 3.0).abs() < 1e-9);
        let sol = minimize(&[1.0, 0.0], &[vec![1.0, 0.0]], &[5.0], &[true, false]).unwrap_err();
        assert_eq!(sol, Error::Lp("unbounded"));
        assert_eq!(minimize(&[1.0], &[vec![1.0], vec![-1.0]], &[1.0, -2.0], &[false]).unwrap_err(), Error::Lp("infeasible"));
    }

    #[test]
    fn agrees_with_reference_solver() {
        use minilp::{ComparisonOp, OptimizationDirection, Problem};
        let mut state = 12345u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        for _ in 0..200 {
            let n = 3;
            let m = 5;
            let c: Vec<f64> = (0..n).map(|_| next()).collect();
            let rows: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| next()).collect()).collect();
            let b: Vec<f64> = (0..m).map(|_| next() + 0.3).collect();
            // bounding box keeps both solvers finite
            let mut rows_box = rows.clone();
            let mut b_box = b.clone();
            for j in 0..n {
                let mut r = vec![0.0; n];
                r[j] = 1.0;
                rows_box.push(r.clone());
                b_box.push(10.0);
                r[j] = -1.0;
                rows_box.push(r);
                b_box.push(10.0);
            }
            let ours = minimize(&c, &rows_box, &b_box, &[true; 3]);
            let mut p = Problem::new(OptimizationDirection::Minimize);
            let vars: Vec<_> = c.iter().map(|ci| p.add_var(*ci, (f64::NEG_INFINITY, f64::INFINITY))).collect();
            for (r, bi) in rows_box.iter().zip(&b_box) {
                let expr: Vec<_> = vars.iter().zip(r).map(|(v, a)| (*v, *a)).collect();
                p.add_constraint(&expr[..], ComparisonOp::Le, *bi);
            }
            match (ours, p.solve()) {
                (Ok(a), Ok(b)) => assert!((a.value - b.objective()).abs() < 1e-7, "{} vs {}", a.value, b.objective()),
                (Err(Error::Lp("infeasible")), Err(minilp::Error::Infeasible)) => {}
                (a, b) => panic!("disagreement: {a:?} vs {b:?}"),
            }
        }
    }
}
