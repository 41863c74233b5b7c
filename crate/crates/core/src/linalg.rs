//! Packed lower-triangular Cholesky factor with row appends.

use crate::real::Real;

#[derive(Clone, Debug)]
pub struct Cholesky<R> {
    n: usize,
    /// Row `i` occupies `data[i(i+1)/2 .. i(i+1)/2 + i + 1]`.
    data: Vec<R>,
}

impl<R: Real> Cholesky<R> {
    pub fn empty() -> Self {
        Cholesky {
            n: 0,
            data: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn row(&self, i: usize) -> &[R] {
        let s = i * (i + 1) / 2;
        &self.data[s..s + i + 1]
    }

    pub fn get(&self, i: usize, j: usize) -> R {
        if j > i {
            R::zero()
        } else {
            self.row(i)[j].clone()
        }
    }

    pub fn diag(&self, i: usize) -> &R {
        &self.row(i)[i]
    }

    /// Factors a symmetric matrix; `None` when a pivot is not positive.
    pub fn factor(a: &[Vec<R>]) -> Option<Self> {
        let mut c = Cholesky::empty();
        for (i, row) in a.iter().enumerate() {
            let w = c.solve_lower(&row[..i]);
            let d2 = row[i].clone() - dot(&w, &w);
            if !(d2 > R::zero()) || !d2.is_finite() {
                return None;
            }
            c.push_row(w, d2.sqrt());
        }
        Some(c)
    }

    /// Appends `[w, d]` as the new last row.
    pub fn push_row(&mut self, w: Vec<R>, d: R) {
        debug_assert_eq!(w.len(), self.n);
        self.data.extend(w);
        self.data.push(d);
        self.n += 1;
    }

    /// Solves `L y = b`.
    pub fn solve_lower(&self, b: &[R]) -> Vec<R> {
        let mut y: Vec<R> = Vec::with_capacity(b.len());
        for i in 0..b.len() {
            let row = self.row(i);
            let mut acc = b[i].clone();
            for j in 0..i {
                acc -= row[j].mul_ref(&y[j]);
            }
            y.push(acc / &row[i]);
        }
        y
    }

    /// Solves `Lᵀ y = b`.
    pub fn solve_upper(&self, b: &[R]) -> Vec<R> {
        let n = b.len();
        let mut y: Vec<R> = b.to_vec();
        for i in (0..n).rev() {
            let v = y[i].clone() / self.diag(i);
            y[i] = v.clone();
            let row = self.row(i);
            for j in 0..i {
                y[j] -= row[j].mul_ref(&v);
            }
        }
        y
    }

    /// `L Lᵀ` as a dense matrix.
    pub fn reconstruct(&self) -> Vec<Vec<R>> {
        let n = self.n;
        let mut out = vec![vec![R::zero(); n]; n];
        for i in 0..n {
            for j in 0..=i {
                let mut acc = R::zero();
                for k in 0..=j {
                    acc += self.get(i, k) * self.get(j, k);
                }
                out[i][j] = acc.clone();
                out[j][i] = acc;
            }
        }
        out
    }
}

pub fn dot<R: Real>(a: &[R], b: &[R]) -> R {
    let mut acc = R::zero();
    for (x, y) in a.iter().zip(b) {
        acc += x.mul_ref(y);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_solve_round_trip() {
        let a = vec![
            vec![4.0, 2.0, 0.4],
            vec![2.0, 3.0, 0.5],
            vec![0.4, 0.5, 2.0],
        ];
        let c = Cholesky::factor(&a).unwrap();
        let back = c.reconstruct();
        for i in 0..3 {
            for j in 0..3 {
                assert!((back[i][j] - a[i][j]).abs() < 1e-14);
            }
        }
        let b = [1.0, -2.0, 0.5];
        let x = c.solve_upper(&c.solve_lower(&b));
        for i in 0..3 {
            let r: f64 = (0..3).map(|j| a[i][j] * x[j]).sum();
            assert!((r - b[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn rejects_indefinite() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 1.0]];
        assert!(Cholesky::factor(&a).is_none());
    }
}
