//! Symmetric positive-definite band matrices with in-place Cholesky.

/// Lower band of a symmetric matrix. Row `i` stores `A[i][i-bw..=i]`,
/// left-padded with zeros for the first `bw` rows.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn offset(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + self.bw + j - i
    }

    /// Adds `v` to `A[i][j]` (and implicitly `A[j][i]`).
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let o = self.offset(i, j);
        self.data[o] += v;
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            0.0
        } else {
            self.data[self.offset(i, j)]
        }
    }

    pub fn diagonal(&self, i: usize) -> f64 {
        self.data[self.offset(i, i)]
    }

    /// y = A x
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.n {
            let j0 = i.saturating_sub(self.bw);
            let row = &self.data[self.offset(i, j0)..=self.offset(i, i)];
            let mut acc = row[row.len() - 1] * x[i];
            for (k, a) in row[..row.len() - 1].iter().enumerate() {
                let j = j0 + k;
                acc += a * x[j];
                y[j] += a * x[i];
            }
            y[i] += acc;
        }
    }

    /// Cholesky factorization `A = L L^T` in place.
    ///
    /// Fails with the offending row when a pivot is not positive relative to
    /// the original diagonal (singular or indefinite input).
    pub fn factorize(mut self) -> Result<BandCholesky, usize> {
        let bw = self.bw;
        let w = bw + 1;
        for i in 0..self.n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let k0 = j0.max(j.saturating_sub(bw));
                let ri = i * w + bw - i;
                let rj = j * w + bw - j;
                let li = &self.data[ri + k0..ri + j];
                let lj = &self.data[rj + k0..rj + j];
                let dot: f64 = li.iter().zip(lj).map(|(a, b)| a * b).sum();
                let o = ri + j;
                let s = self.data[o] - dot;
                if i == j {
                    let orig = self.data[o];
                    if !(s > orig.abs() * 1e-13) || !s.is_finite() {
                        return Err(i);
                    }
                    self.data[o] = s.sqrt();
                } else {
                    self.data[o] = s / self.data[rj + j];
                }
            }
        }
        Ok(BandCholesky { l: self })
    }
}

#[derive(Debug, Clone)]
pub struct BandCholesky {
    l: BandMatrix,
}

impl BandCholesky {
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let l = &self.l;
        let n = l.n;
        let bw = l.bw;
        let w = bw + 1;
        // L y = b
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            let ri = i * w + bw - i;
            let row = &l.data[ri + j0..ri + i];
            let dot: f64 = row.iter().zip(&b[j0..i]).map(|(a, x)| a * x).sum();
            b[i] = (b[i] - dot) / l.data[ri + i];
        }
        // L^T x = y
        for i in (0..n).rev() {
            let ri = i * w + bw - i;
            b[i] /= l.data[ri + i];
            let xi = b[i];
            let j0 = i.saturating_sub(bw);
            for j in j0..i {
                b[j] -= l.data[ri + j] * xi;
            }
        }
    }
}

/// Jacobi-preconditioned conjugate gradients on a band matrix.
///
/// Returns the iteration count and the final relative residual.
pub fn pcg(
    a: &BandMatrix,
    b: &[f64],
    x: &mut [f64],
    rel_tol: f64,
    max_iter: usize,
) -> (usize, f64) {
    let n = a.n();
    let inv_diag: Vec<f64> = (0..n).map(|i| 1.0 / a.diagonal(i)).collect();
    let b_norm = b
        .iter()
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
        .max(f64::MIN_POSITIVE);
    let mut r = vec![0.0; n];
    a.mul_vec(x, &mut r);
    r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, b)| a * b).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; n];
    let mut rel = r.iter().map(|v| v * v).sum::<f64>().sqrt() / b_norm;
    for it in 0..max_iter {
        if rel <= rel_tol {
            return (it, rel);
        }
        a.mul_vec(&p, &mut ap);
        let alpha = rz / p.iter().zip(&ap).map(|(a, b)| a * b).sum::<f64>();
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rel = r.iter().map(|v| v * v).sum::<f64>().sqrt() / b_norm;
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    (max_iter, rel)
}
