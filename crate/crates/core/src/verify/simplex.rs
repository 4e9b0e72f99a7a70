//! Dense two-phase simplex with Bland's rule for
//! `min cᵀx subject to Ax = b, x ≥ 0`.

const PIVOT_EPS: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal { value: f64, x: Vec<f64> },
    Infeasible,
    Unbounded,
}

struct Tableau {
    /// `m` constraint rows of `cols + 1` entries, the last being the
    /// right-hand side.
    rows: Vec<Vec<f64>>,
    /// Reduced costs, last entry `−z`.
    obj: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        self.rows[r].iter_mut().for_each(|v| *v /= p);
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i != r {
                let f = row[c];
                if f != 0.0 {
                    row.iter_mut().zip(&pivot_row).for_each(|(v, pv)| *v -= f * pv);
                }
            }
        }
        let f = self.obj[c];
        if f != 0.0 {
            self.obj.iter_mut().zip(&pivot_row).for_each(|(v, pv)| *v -= f * pv);
        }
        self.basis[r] = c;
    }

    /// Runs Bland's rule over columns `0..allowed`. Returns `false` when
    /// the problem is unbounded.
    fn optimize(&mut self, allowed: usize) -> bool {
        loop {
            let Some(c) = (0..allowed).find(|&j| self.obj[j] < -PIVOT_EPS) else {
                return true;
            };
            let rhs = self.rows.first().map_or(0, |r| r.len() - 1);
            let mut best: Option<(f64, usize, usize)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if row[c] > PIVOT_EPS {
                    let ratio = row[rhs] / row[c];
                    let better = match best {
                        None => true,
                        Some((br, _, bb)) => ratio < br - 1e-15 || (ratio <= br + 1e-15 && self.basis[i] < bb),
                    };
                    if better {
                        best = Some((ratio, i, self.basis[i]));
                    }
                }
            }
            match best {
                Some((_, r, _)) => self.pivot(r, c),
                None => return false,
            }
        }
    }
}

/// Solves `min cᵀx, Ax = b, x ≥ 0`.
pub fn solve(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> LpOutcome {
    let m = a.len();
    let n = c.len();
    // rows with b ≥ 0, artificial identity appended
    let mut rows = Vec::with_capacity(m);
    for (i, ai) in a.iter().enumerate() {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        let mut row = vec![0.0; n + m + 1];
        for (j, &v) in ai.iter().enumerate() {
            row[j] = sign * v;
        }
        row[n + i] = 1.0;
        row[n + m] = sign * b[i];
        rows.push(row);
    }
    let mut obj = vec![0.0; n + m + 1];
    for row in &rows {
        for j in 0..n {
            obj[j] -= row[j];
        }
        obj[n + m] -= row[n + m];
    }
    let mut t = Tableau {
        rows,
        obj,
        basis: (n..n + m).collect(),
    };
    t.optimize(n + m);
    let infeasibility = -t.obj[n + m];
    let scale = b.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
    if infeasibility > 1e-9 * scale {
        return LpOutcome::Infeasible;
    }

    // drive artificials out of the basis, dropping redundant rows
    let mut i = 0;
    while i < t.rows.len() {
        if t.basis[i] >= n {
            match (0..n).find(|&j| t.rows[i][j].abs() > 1e-9) {
                Some(j) => {
                    t.pivot(i, j);
                    i += 1;
                }
                None => {
                    t.rows.remove(i);
                    t.basis.remove(i);
                }
            }
        } else {
            i += 1;
        }
    }
    // drop artificial columns
    for row in &mut t.rows {
        let rhs = row[n + m];
        row.truncate(n);
        row.push(rhs);
    }
    let mut obj = vec![0.0; n + 1];
    obj[..n].copy_from_slice(c);
    for (row, &bv) in t.rows.iter().zip(&t.basis) {
        let cb = c[bv];
        if cb != 0.0 {
            for j in 0..=n {
                obj[j] -= cb * row[j];
            }
        }
    }
    t.obj = obj;
    if !t.optimize(n) {
        return LpOutcome::Unbounded;
    }
    let mut x = vec![0.0; n];
    for (row, &bv) in t.rows.iter().zip(&t.basis) {
        x[bv] = row[n];
    }
    let value = c.iter().zip(&x).map(|(c, x)| c * x).sum();
    LpOutcome::Optimal { value, x }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_transport_problem() {
        // two sources (1, 1), two sinks (1, 1), costs [[1, 3], [2, 1]]
        let a = vec![
            vec![1.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 1.0],
            vec![1.0, 0.0, 1.0, 0.0],
            vec![0.0, 1.0, 0.0, 1.0],
        ];
        let b = [1.0, 1.0, 1.0, 1.0];
        let c = [1.0, 3.0, 2.0, 1.0];
        match solve(&a, &b, &c) {
            LpOutcome::Optimal { value, x } => {
                assert!((value - 2.0).abs() < 1e-12);
                assert!((x[0] - 1.0).abs() < 1e-12 && (x[3] - 1.0).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn infeasible() {
        let a = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        assert_eq!(solve(&a, &[1.0, 2.0], &[1.0, 1.0]), LpOutcome::Infeasible);
    }

    #[test]
    fn unbounded() {
        // x0 − x1 = 1, minimize −x0
        let a = vec![vec![1.0, -1.0]];
        assert_eq!(solve(&a, &[1.0], &[-1.0, 0.0]), LpOutcome::Unbounded);
    }
}
