//! Sparse matrices and the linear solvers behind the finite element code.
//!
//! Symmetric positive definite systems below the direct-solve limit use an
//! envelope Cholesky factorization (the mesh is RCM-ordered, so envelopes
//! stay narrow); larger ones use conjugate gradients with an incomplete
//! Cholesky preconditioner. Nonsymmetric systems use a banded LU without
//! pivoting or ILU(0)-preconditioned BiCGSTAB.

use crate::error::{Error, Result};

/// Compressed sparse row matrix with sorted column indices.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl CsrMatrix {
    /// Duplicate entries are summed in their input order, so identical
    /// triplet lists give bit-identical matrices.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *vals.last_mut().expect("entry exists") += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix { n, row_ptr, cols, vals }
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.cols[a..b], &self.vals[a..b])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (c, v) = self.row(i);
        c.binary_search(&j).map_or(0.0, |k| v[k])
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let (c, v) = self.row(i);
            *yi = c.iter().zip(v).map(|(&j, &a)| a * x[j]).sum();
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec(x, &mut y);
        y
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| {
            let (c, v) = self.row(i);
            c.iter().zip(v).all(|(&j, &a)| j <= i || (a - self.get(j, i)).abs() <= tol)
        })
    }

    /// Largest `|i - j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        (0..self.n)
            .map(|i| {
                let (c, _) = self.row(i);
                match (c.first(), c.last()) {
                    (Some(&lo), Some(&hi)) => (i - lo.min(i)).max(hi.max(i) - i),
                    _ => 0,
                }
            })
            .max()
            .unwrap_or(0)
    }

    /// `‖b - Ax‖ / ‖b‖`, or `‖Ax‖` when `b = 0`.
    pub fn relative_residual(&self, x: &[f64], b: &[f64]) -> f64 {
        let ax = self.apply(x);
        let r = ax.iter().zip(b).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt();
        let nb = norm2(b);
        if nb > 0.0 {
            r / nb
        } else {
            r
        }
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    EnvelopeCholesky,
    BandedLu,
    Pcg,
    BiCgStab,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::EnvelopeCholesky => "envelope-cholesky",
            Method::BandedLu => "banded-lu",
            Method::Pcg => "ic0-pcg",
            Method::BiCgStab => "ilu0-bicgstab",
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolverOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Systems with fewer unknowns are factorized directly.
    pub direct_limit: usize,
    pub force: Option<Method>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tolerance: 1e-10,
            max_iterations: 20_000,
            direct_limit: 100_000,
            force: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveStats {
    pub method: Method,
    pub iterations: usize,
    pub residual: f64,
}

pub fn solve(a: &CsrMatrix, b: &[f64], opts: &SolverOptions) -> Result<(Vec<f64>, SolveStats)> {
    if a.n == 0 {
        return Ok((
            Vec::new(),
            SolveStats {
                method: Method::EnvelopeCholesky,
                iterations: 0,
                residual: 0.0,
            },
        ));
    }
    let symmetric = a.is_symmetric(1e-13 * a.max_abs());
    let method = opts.force.unwrap_or(match (symmetric, a.n < opts.direct_limit) {
        (true, true) => Method::EnvelopeCholesky,
        (true, false) => Method::Pcg,
        (false, true) if (a.n as f64) * (a.bandwidth() as f64).powi(2) < 4e9 => Method::BandedLu,
        (false, _) => Method::BiCgStab,
    });
    let (x, iterations) = match method {
        Method::EnvelopeCholesky => (EnvelopeCholesky::factor(a)?.solve(b), 0),
        Method::BandedLu => (banded_lu_solve(a, b)?, 0),
        Method::Pcg => pcg(a, b, opts)?,
        Method::BiCgStab => bicgstab(a, b, opts)?,
    };
    let residual = a.relative_residual(&x, b);
    if residual > opts.tolerance || !residual.is_finite() {
        return Err(Error::NonConvergence {
            iterations,
            residual,
            history: vec![residual],
        });
    }
    Ok((
        x,
        SolveStats {
            method,
            iterations,
            residual,
        },
    ))
}

/// Row-oriented envelope (skyline) Cholesky factor `A = L Lᵀ`.
pub struct EnvelopeCholesky {
    first: Vec<usize>,
    offset: Vec<usize>,
    data: Vec<f64>,
}

impl EnvelopeCholesky {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.n;
        let mut first = vec![0usize; n];
        let mut offset = vec![0usize; n + 1];
        for i in 0..n {
            let (c, _) = a.row(i);
            first[i] = c.first().map_or(i, |&j| j.min(i));
            offset[i + 1] = offset[i] + (i - first[i] + 1);
        }
        let mut data = vec![0.0; offset[n]];
        for i in 0..n {
            let (c, v) = a.row(i);
            for (&j, &x) in c.iter().zip(v) {
                if j <= i {
                    data[offset[i] + j - first[i]] = x;
                }
            }
        }
        let scale = a.max_abs();
        for i in 0..n {
            let fi = first[i];
            for j in fi..=i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let (row_i, row_j) = (offset[i], offset[j]);
                let mut s = data[row_i + j - fi];
                for k in k0..j {
                    s -= data[row_i + k - fi] * data[row_j + k - fj];
                }
                if j < i {
                    data[row_i + j - fi] = s / data[row_j + j - fj];
                } else {
                    if !(s > 1e-14 * scale) {
                        return Err(Error::Indefinite { row: i, pivot: s });
                    }
                    data[row_i + i - fi] = s.sqrt();
                }
            }
        }
        Ok(EnvelopeCholesky { first, offset, data })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut y = b.to_vec();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.data[self.offset[i]..self.offset[i + 1]];
            let mut s = y[i];
            for k in fi..i {
                s -= row[k - fi] * y[k];
            }
            y[i] = s / row[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.data[self.offset[i]..self.offset[i + 1]];
            y[i] /= row[i - fi];
            let yi = y[i];
            for k in fi..i {
                y[k] -= row[k - fi] * yi;
            }
        }
        y
    }
}

/// Dense-band LU without pivoting; adequate for the diagonally dominant
/// systems produced by small lower-order perturbations.
pub fn banded_lu_solve(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.n;
    let w = a.bandwidth();
    let width = 2 * w + 1;
    let mut band = vec![0.0; n * width];
    let at = |i: usize, j: usize| i * width + (j + w - i);
    for i in 0..n {
        let (c, v) = a.row(i);
        for (&j, &x) in c.iter().zip(v) {
            band[at(i, j)] = x;
        }
    }
    let mut x = b.to_vec();
    let scale = a.max_abs();
    for k in 0..n {
        let pivot = band[at(k, k)];
        if !(pivot.abs() > 1e-14 * scale) {
            return Err(Error::Indefinite { row: k, pivot });
        }
        let end = (k + w + 1).min(n);
        for i in k + 1..end {
            let f = band[at(i, k)] / pivot;
            if f == 0.0 {
                continue;
            }
            band[at(i, k)] = f;
            for j in k + 1..end {
                band[at(i, j)] -= f * band[at(k, j)];
            }
            x[i] -= f * x[k];
        }
    }
    for i in (0..n).rev() {
        let end = (i + w + 1).min(n);
        let mut s = x[i];
        for j in i + 1..end {
            s -= band[at(i, j)] * x[j];
        }
        x[i] = s / band[at(i, i)];
    }
    Ok(x)
}

/// Incomplete factorization restricted to the sparsity pattern of `A`.
/// Holds `L` (unit diagonal implied for ILU) and `U`, or `L` alone for IC.
struct IncompleteFactor {
    lower: CsrMatrix,
    upper: Option<CsrMatrix>,
}

impl IncompleteFactor {
    /// IC(0), retried with a growing diagonal shift if a pivot breaks down.
    fn ic0(a: &CsrMatrix) -> Self {
        let mut shift = 0.0;
        loop {
            if let Some(l) = Self::try_ic0(a, shift) {
                return IncompleteFactor { lower: l, upper: None };
            }
            shift = if shift == 0.0 { 1e-3 } else { shift * 4.0 };
        }
    }

    fn try_ic0(a: &CsrMatrix, shift: f64) -> Option<CsrMatrix> {
        let n = a.n;
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::new();
        for i in 0..n {
            let (c, _) = a.row(i);
            cols.extend(c.iter().copied().filter(|&j| j <= i));
            row_ptr[i + 1] = cols.len();
        }
        let mut vals = vec![0.0; cols.len()];
        for i in 0..n {
            let (c, v) = a.row(i);
            let mut k = row_ptr[i];
            for (&j, &x) in c.iter().zip(v) {
                if j <= i {
                    vals[k] = if j == i { x * (1.0 + shift) } else { x };
                    k += 1;
                }
            }
        }
        for i in 0..n {
            let (ri0, ri1) = (row_ptr[i], row_ptr[i + 1]);
            for p in ri0..ri1 {
                let j = cols[p];
                // sparse dot of rows i and j over columns < j
                let (rj0, rj1) = (row_ptr[j], row_ptr[j + 1]);
                let (mut a_idx, mut b_idx) = (ri0, rj0);
                let mut s = vals[p];
                while a_idx < p && b_idx < rj1 - 1 {
                    let (ca, cb) = (cols[a_idx], cols[b_idx]);
                    if ca == cb {
                        s -= vals[a_idx] * vals[b_idx];
                        a_idx += 1;
                        b_idx += 1;
                    } else if ca < cb {
                        a_idx += 1;
                    } else {
                        b_idx += 1;
                    }
                }
                if j < i {
                    vals[p] = s / vals[rj1 - 1];
                } else {
                    if !(s > 0.0) {
                        return None;
                    }
                    vals[p] = s.sqrt();
                }
            }
        }
        Some(CsrMatrix { n, row_ptr, cols, vals })
    }

    /// ILU(0) in IKJ order; `lower` has an implied unit diagonal.
    fn ilu0(a: &CsrMatrix) -> Result<Self> {
        let n = a.n;
        let mut lu = a.clone();
        let diag: Vec<usize> = (0..n)
            .map(|i| {
                let (c, _) = a.row(i);
                c.binary_search(&i)
                    .map(|k| a.row_ptr[i] + k)
                    .map_err(|_| Error::Indefinite { row: i, pivot: 0.0 })
            })
            .collect::<Result<_>>()?;
        for i in 1..n {
            let (r0, r1) = (lu.row_ptr[i], lu.row_ptr[i + 1]);
            for p in r0..r1 {
                let k = lu.cols[p];
                if k >= i {
                    break;
                }
                let pivot = lu.vals[diag[k]];
                if pivot == 0.0 {
                    return Err(Error::Indefinite { row: k, pivot });
                }
                let f = lu.vals[p] / pivot;
                lu.vals[p] = f;
                let (k0, k1) = (diag[k] + 1, lu.row_ptr[k + 1]);
                let mut q = p + 1;
                for kk in k0..k1 {
                    let j = lu.cols[kk];
                    while q < r1 && lu.cols[q] < j {
                        q += 1;
                    }
                    if q < r1 && lu.cols[q] == j {
                        lu.vals[q] -= f * lu.vals[kk];
                    }
                }
            }
        }
        let split = |keep: &dyn Fn(usize, usize) -> bool| {
            let mut row_ptr = vec![0usize; n + 1];
            let mut cols = Vec::new();
            let mut vals = Vec::new();
            for i in 0..n {
                let (c, v) = lu.row(i);
                for (&j, &x) in c.iter().zip(v) {
                    if keep(i, j) {
                        cols.push(j);
                        vals.push(x);
                    }
                }
                row_ptr[i + 1] = cols.len();
            }
            CsrMatrix { n, row_ptr, cols, vals }
        };
        Ok(IncompleteFactor {
            lower: split(&|i, j| j < i),
            upper: Some(split(&|i, j| j >= i)),
        })
    }

    fn apply(&self, r: &[f64]) -> Vec<f64> {
        let n = r.len();
        let mut y = r.to_vec();
        match &self.upper {
            None => {
                // L y = r, then Lᵀ z = y; the diagonal is the last entry per row
                for i in 0..n {
                    let (c, v) = self.lower.row(i);
                    let last = c.len() - 1;
                    let s: f64 = c[..last].iter().zip(&v[..last]).map(|(&j, &l)| l * y[j]).sum();
                    y[i] = (y[i] - s) / v[last];
                }
                for i in (0..n).rev() {
                    let (c, v) = self.lower.row(i);
                    let last = c.len() - 1;
                    y[i] /= v[last];
                    let yi = y[i];
                    for (&j, &l) in c[..last].iter().zip(&v[..last]) {
                        y[j] -= l * yi;
                    }
                }
            }
            Some(u) => {
                for i in 0..n {
                    let (c, v) = self.lower.row(i);
                    let s: f64 = c.iter().zip(v).map(|(&j, &l)| l * y[j]).sum();
                    y[i] -= s;
                }
                for i in (0..n).rev() {
                    let (c, v) = u.row(i);
                    let s: f64 = c[1..].iter().zip(&v[1..]).map(|(&j, &x)| x * y[j]).sum();
                    y[i] = (y[i] - s) / v[0];
                }
            }
        }
        y
    }
}

fn pcg(a: &CsrMatrix, b: &[f64], opts: &SolverOptions) -> Result<(Vec<f64>, usize)> {
    let n = a.n;
    let nb = norm2(b);
    let mut x = vec![0.0; n];
    if nb == 0.0 {
        return Ok((x, 0));
    }
    let m = IncompleteFactor::ic0(a);
    let mut r = b.to_vec();
    let mut z = m.apply(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut history = Vec::new();
    // iterate slightly past the target so the true residual meets it
    let target = 0.5 * opts.tolerance;
    for it in 1..=opts.max_iterations {
        a.mul_vec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Indefinite { row: it, pivot: pap });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rel = norm2(&r) / nb;
        history.push(rel);
        if rel <= target {
            return Ok((x, it));
        }
        z = m.apply(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iterations,
        residual: history.last().copied().unwrap_or(f64::NAN),
        history,
    })
}

fn bicgstab(a: &CsrMatrix, b: &[f64], opts: &SolverOptions) -> Result<(Vec<f64>, usize)> {
    let n = a.n;
    let nb = norm2(b);
    let mut x = vec![0.0; n];
    if nb == 0.0 {
        return Ok((x, 0));
    }
    let m = IncompleteFactor::ilu0(a)?;
    let mut r = b.to_vec();
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut history = Vec::new();
    let target = 0.5 * opts.tolerance;
    for it in 1..=opts.max_iterations {
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        let y = m.apply(&p);
        a.mul_vec(&y, &mut v);
        alpha = rho / dot(&r_hat, &v);
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm2(&s) / nb <= target {
            for i in 0..n {
                x[i] += alpha * y[i];
            }
            history.push(norm2(&s) / nb);
            return Ok((x, it));
        }
        let zs = m.apply(&s);
        a.mul_vec(&zs, &mut t);
        omega = dot(&t, &s) / dot(&t, &t);
        for i in 0..n {
            x[i] += alpha * y[i] + omega * zs[i];
            r[i] = s[i] - omega * t[i];
        }
        let rel = norm2(&r) / nb;
        history.push(rel);
        if rel <= target {
            return Ok((x, it));
        }
        if omega == 0.0 || !rel.is_finite() {
            break;
        }
    }
    Err(Error::NonConvergence {
        iterations: history.len(),
        residual: history.last().copied().unwrap_or(f64::NAN),
        history,
    })
}
