//! Dense vector and symmetric-matrix helpers over a generic [`Scalar`].
//!
//! Dimensions here are tiny (the model problems live in R^d for small d), so
//! everything is plain `Vec<S>` and O(n^3) Jacobi sweeps.

use crate::error::{Error, Result};
use crate::numeric::{Scalar, ScalarContext};

pub fn dot<C: ScalarContext>(ctx: &C, x: &[C::Scalar], y: &[C::Scalar]) -> C::Scalar {
    crate::numeric::dot(ctx.zero(), x, y)
}

pub fn norm<C: ScalarContext>(ctx: &C, x: &[C::Scalar]) -> C::Scalar {
    dot(ctx, x, x).sqrt()
}

pub fn sub<S: Scalar>(x: &[S], y: &[S]) -> Vec<S> {
    x.iter().zip(y).map(|(a, b)| a.clone() - b).collect()
}

pub fn add<S: Scalar>(x: &[S], y: &[S]) -> Vec<S> {
    x.iter().zip(y).map(|(a, b)| a.clone() + b).collect()
}

pub fn scale<S: Scalar>(a: &S, x: &[S]) -> Vec<S> {
    x.iter().map(|v| v.clone() * a).collect()
}

/// `(1 - gamma) x + gamma v`
pub fn convex_step<C: ScalarContext>(ctx: &C, x: &[C::Scalar], v: &[C::Scalar], gamma: &C::Scalar) -> Vec<C::Scalar> {
    let keep = ctx.one() - gamma;
    x.iter()
        .zip(v)
        .map(|(a, b)| keep.clone() * a + gamma.clone() * b)
        .collect()
}

/// Square symmetric matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix<S> {
    n: usize,
    data: Vec<S>,
}

impl<S: Scalar> SymMatrix<S> {
    /// Builds from rows; the lower triangle is mirrored from the upper one
    /// after checking the two agree to within `tol` (relative to the largest entry).
    pub fn from_rows<C: ScalarContext<Scalar = S>>(ctx: &C, rows: Vec<Vec<S>>, tol: &S) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Instance("empty matrix".into()));
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::Dimension {
                expected: n,
                got: bad.len(),
            });
        }
        let data: Vec<S> = rows.into_iter().flatten().collect();
        let scale = data.iter().fold(ctx.zero(), |m, v| m.max_of(v.abs())).max_of(ctx.one());
        let mut m = Self { n, data };
        for i in 0..n {
            for j in i + 1..n {
                let diff = (m.get(i, j).clone() - m.get(j, i)).abs();
                if diff > tol.clone() * &scale {
                    return Err(Error::Instance(format!("matrix not symmetric at ({i}, {j})")));
                }
                let upper = m.get(i, j).clone();
                m.set(j, i, upper);
            }
        }
        Ok(m)
    }

    pub fn identity<C: ScalarContext<Scalar = S>>(ctx: &C, n: usize) -> Self {
        Self::diagonal(ctx, vec![ctx.one(); n])
    }

    pub fn diagonal<C: ScalarContext<Scalar = S>>(ctx: &C, diag: Vec<S>) -> Self {
        let n = diag.len();
        let mut data = vec![ctx.zero(); n * n];
        for (i, d) in diag.into_iter().enumerate() {
            data[i * n + i] = d;
        }
        Self { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> &S {
        &self.data[i * self.n + j]
    }

    fn set(&mut self, i: usize, j: usize, v: S) {
        self.data[i * self.n + j] = v;
    }

    pub fn rows(&self) -> impl Iterator<Item = &[S]> {
        self.data.chunks(self.n)
    }

    pub fn mul_vec<C: ScalarContext<Scalar = S>>(&self, ctx: &C, x: &[S]) -> Vec<S> {
        self.rows().map(|row| dot(ctx, row, x)).collect()
    }

    /// `x^T M x`
    pub fn quad_form<C: ScalarContext<Scalar = S>>(&self, ctx: &C, x: &[S]) -> S {
        dot(ctx, x, &self.mul_vec(ctx, x))
    }

    pub fn matmul<C: ScalarContext<Scalar = S>>(&self, ctx: &C, other: &Self) -> Self {
        let n = self.n;
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = ctx.zero();
                for k in 0..n {
                    acc = acc + self.get(i, k).clone() * other.get(k, j);
                }
                data.push(acc);
            }
        }
        Self { n, data }
    }
}

/// Eigen-decomposition `A = V diag(values) V^T`; column `k` of `vectors` pairs with `values[k]`.
#[derive(Debug, Clone)]
pub struct SymEigen<S> {
    pub values: Vec<S>,
    pub vectors: SymMatrix<S>,
}

impl<S: Scalar> SymEigen<S> {
    /// `V diag(f(values)) V^T`
    pub fn map_spectrum<C, F>(&self, ctx: &C, f: F) -> SymMatrix<S>
    where
        C: ScalarContext<Scalar = S>,
        F: Fn(&S) -> S,
    {
        let n = self.values.len();
        let mapped: Vec<S> = self.values.iter().map(&f).collect();
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = ctx.zero();
                for (k, fk) in mapped.iter().enumerate() {
                    acc = acc + self.vectors.get(i, k).clone() * self.vectors.get(j, k) * fk;
                }
                data.push(acc);
            }
        }
        SymMatrix { n, data }
    }

    pub fn min_value(&self) -> &S {
        self.values
            .iter()
            .fold(&self.values[0], |m, v| if v < m { v } else { m })
    }

    pub fn max_value(&self) -> &S {
        self.values
            .iter()
            .fold(&self.values[0], |m, v| if v > m { v } else { m })
    }
}

/// Cyclic Jacobi eigenvalue iteration. Converges quadratically, so the sweep
/// count grows only logarithmically with the mantissa width.
pub fn jacobi_eigen<C: ScalarContext>(ctx: &C, m: &SymMatrix<C::Scalar>) -> SymEigen<C::Scalar> {
    let n = m.dim();
    let mut a = m.clone();
    let mut v = SymMatrix::identity(ctx, n);
    let eps2 = ctx.epsilon().square();
    let frob = a.data.iter().fold(ctx.zero(), |acc, x| acc + x.square());
    let max_sweeps = 16 + 2 * ctx.mantissa_bits().ilog2() as usize;

    for _ in 0..max_sweeps {
        let mut off = ctx.zero();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off = off + a.get(i, j).square();
                }
            }
        }
        if off <= eps2.clone() * &frob {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a.get(p, q).clone();
                if apq.is_zero() {
                    continue;
                }
                let theta = (a.get(q, q).clone() - a.get(p, p)) / (ctx.from_i64(2) * &apq);
                let root = (theta.square() + ctx.one()).sqrt();
                let t = if theta >= ctx.zero() {
                    ctx.one() / (theta.clone() + root)
                } else {
                    -(ctx.one() / (root - theta))
                };
                let c = ctx.one() / (t.square() + ctx.one()).sqrt();
                let s = t.clone() * &c;
                rotate(&mut a, p, q, &c, &s);
                for k in 0..n {
                    let vkp = v.get(k, p).clone();
                    let vkq = v.get(k, q).clone();
                    v.set(k, p, c.clone() * &vkp - s.clone() * &vkq);
                    v.set(k, q, s.clone() * &vkp + c.clone() * &vkq);
                }
            }
        }
    }
    let values = (0..n).map(|i| a.get(i, i).clone()).collect();
    SymEigen { values, vectors: v }
}

/// `A <- J^T A J` for the Givens rotation in the (p, q) plane.
fn rotate<S: Scalar>(a: &mut SymMatrix<S>, p: usize, q: usize, c: &S, s: &S) {
    let n = a.dim();
    for k in 0..n {
        let akp = a.get(k, p).clone();
        let akq = a.get(k, q).clone();
        a.set(k, p, c.clone() * &akp - s.clone() * &akq);
        a.set(k, q, s.clone() * &akp + c.clone() * &akq);
    }
    for k in 0..n {
        let apk = a.get(p, k).clone();
        let aqk = a.get(q, k).clone();
        a.set(p, k, c.clone() * &apk - s.clone() * &aqk);
        a.set(q, k, s.clone() * &apk + c.clone() * &aqk);
    }
}
