//! Banded LU with partial pivoting and a solver for band matrices bordered by
//! one extra row and column (the charge unknown).

use crate::error::{Error, Result};

/// Square band matrix in LAPACK `gb` layout, with `kl` extra rows of
/// headroom for pivoting fill-in.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ld: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ld = 2 * kl + ku + 1;
        Self { n, kl, ku, ld, data: vec![0.0; ld * n] }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        self.kl + self.ku + i - j + j * self.ld
    }

    #[inline]
    fn in_band(&self, i: usize, j: usize) -> bool {
        i + self.ku >= j && j + self.kl >= i
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.data[self.idx(i, j)]
        } else {
            0.0
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "entry ({i}, {j}) outside band");
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for (i, yi) in y.iter_mut().enumerate() {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            *yi = (lo..=hi).map(|j| self.data[self.idx(i, j)] * x[j]).sum();
        }
        y
    }

    pub fn factor(mut self) -> Result<BandLu> {
        let n = self.n;
        let kl = self.kl;
        let kv = self.ku + self.kl;
        let mut piv = vec![0usize; n];
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut p = 0;
            let mut best = self.data[self.idx(j, j)].abs();
            for i in 1..=km {
                let v = self.data[self.idx(j + i, j)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > 1e-300 + f64::EPSILON * 1e-6 * scale) {
                return Err(Error::Singular);
            }
            piv[j] = j + p;
            ju = ju.max((j + kv.min(self.ku + p)).min(n - 1));
            if p != 0 {
                for c in j..=ju {
                    let a = self.idx(j, c);
                    let b = self.idx(j + p, c);
                    self.data.swap(a, b);
                }
            }
            let d = self.data[self.idx(j, j)];
            for i in 1..=km {
                let k = self.idx(j + i, j);
                self.data[k] /= d;
            }
            for c in j + 1..=ju {
                let ujc = self.data[self.idx(j, c)];
                if ujc != 0.0 {
                    for i in 1..=km {
                        let l = self.data[self.idx(j + i, j)];
                        let k = self.idx(j + i, c);
                        self.data[k] -= l * ujc;
                    }
                }
            }
        }
        Ok(BandLu { m: self, piv })
    }
}

/// LU factors of a [`BandMatrix`].
#[derive(Debug, Clone)]
pub struct BandLu {
    m: BandMatrix,
    piv: Vec<usize>,
}

impl BandLu {
    pub fn size(&self) -> usize {
        self.m.n
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let a = &self.m;
        let n = a.n;
        for j in 0..n {
            let p = self.piv[j];
            if p != j {
                b.swap(j, p);
            }
            let km = a.kl.min(n - 1 - j);
            let bj = b[j];
            for i in 1..=km {
                b[j + i] -= a.data[a.idx(j + i, j)] * bj;
            }
        }
        let kv = a.kl + a.ku;
        for j in (0..n).rev() {
            b[j] /= a.data[a.idx(j, j)];
            let bj = b[j];
            for i in j.saturating_sub(kv)..j {
                b[i] -= a.data[a.idx(i, j)] * bj;
            }
        }
    }
}

/// `[[A, c], [rᵀ, d]]` with `A` banded: the profile block plus one charge row/column.
#[derive(Debug, Clone)]
pub struct BorderedMatrix {
    pub band: BandMatrix,
    pub col: Vec<f64>,
    pub row: Vec<f64>,
    pub corner: f64,
}

impl BorderedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self { band: BandMatrix::zeros(n, kl, ku), col: vec![0.0; n], row: vec![0.0; n], corner: 0.0 }
    }

    /// Total number of unknowns (band size + 1).
    pub fn size(&self) -> usize {
        self.band.n + 1
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.band.n;
        let mut y = self.band.matvec(&x[..n]);
        for (yi, ci) in y.iter_mut().zip(&self.col) {
            *yi += ci * x[n];
        }
        let last = self.row.iter().zip(&x[..n]).map(|(r, v)| r * v).sum::<f64>() + self.corner * x[n];
        y.push(last);
        y
    }

    pub fn factor(self) -> Result<BorderedLu> {
        let lu = self.band.factor()?;
        let mut w = self.col.clone();
        lu.solve_in_place(&mut w);
        let schur = self.corner - self.row.iter().zip(&w).map(|(r, v)| r * v).sum::<f64>();
        if !schur.is_finite() || schur == 0.0 {
            return Err(Error::Singular);
        }
        Ok(BorderedLu { lu, w, row: self.row, schur })
    }
}

#[derive(Debug, Clone)]
pub struct BorderedLu {
    lu: BandLu,
    w: Vec<f64>,
    row: Vec<f64>,
    schur: f64,
}

impl BorderedLu {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.lu.size();
        let mut x = rhs[..n].to_vec();
        self.lu.solve_in_place(&mut x);
        let last = (rhs[n] - self.row.iter().zip(&x).map(|(r, v)| r * v).sum::<f64>()) / self.schur;
        for (xi, wi) in x.iter_mut().zip(&self.w) {
            *xi -= wi * last;
        }
        x.push(last);
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
            a.swap(k, p);
            b.swap(k, p);
            for i in k + 1..n {
                let f = a[i][k] / a[k][k];
                for j in k..n {
                    a[i][j] -= f * a[k][j];
                }
                b[i] -= f * b[k];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
            x[i] = (b[i] - s) / a[i][i];
        }
        x
    }

    #[test]
    fn band_lu_matches_dense_elimination_with_pivoting() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (n, kl, ku) = (40, 2, 2);
        let mut band = BandMatrix::zeros(n, kl, ku);
        let mut dense = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                // Small diagonal forces pivoting.
                let v = if i == j { 1e-3 * rng.gen::<f64>() } else { rng.gen_range(-1.0..1.0) };
                band.add(i, j, v);
                dense[i][j] = v;
            }
        }
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let want = dense_solve(dense, b.clone());
        let lu = band.factor().unwrap();
        let mut got = b;
        lu.solve_in_place(&mut got);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-9 * (1.0 + w.abs()));
        }
    }

    #[test]
    fn bordered_solve_inverts_matvec() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 30;
        let mut m = BorderedMatrix::zeros(n, 2, 2);
        for i in 0..n {
            for j in i.saturating_sub(2)..=(i + 2).min(n - 1) {
                m.band.add(i, j, if i == j { 4.0 } else { rng.gen_range(-1.0..1.0) });
            }
            m.col[i] = rng.gen_range(-1.0..1.0);
            m.row[i] = rng.gen_range(-1.0..1.0);
        }
        m.corner = 3.0;
        let x: Vec<f64> = (0..=n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b = m.matvec(&x);
        let got = m.factor().unwrap().solve(&b);
        for (g, w) in got.iter().zip(&x) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let m = BandMatrix::zeros(5, 1, 1);
        assert!(matches!(m.factor(), Err(Error::Singular)));
    }
}
