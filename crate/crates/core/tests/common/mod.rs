//! Test-side reference implementations, kept independent of the library's
//! linear algebra and integrators.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub type Dense = Vec<Vec<f64>>;

pub fn random_dense(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Dense {
    (0..rows)
        .map(|_| (0..cols).map(|_| rng.gen_range(-scale..scale)).collect())
        .collect()
}

/// Gaussian elimination with full pivoting.
pub fn gauss_full_pivot(mut a: Dense, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let mut perm: Vec<usize> = (0..n).collect();
    for col in 0..n {
        let (mut pr, mut pc, mut best) = (col, col, 0.0);
        for (r, row) in a.iter().enumerate().skip(col) {
            for (c, v) in row.iter().enumerate().skip(col) {
                if v.abs() > best {
                    best = v.abs();
                    pr = r;
                    pc = c;
                }
            }
        }
        if best < 1e-300 {
            return None;
        }
        a.swap(col, pr);
        b.swap(col, pr);
        for row in a.iter_mut() {
            row.swap(col, pc);
        }
        perm.swap(col, pc);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut y = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * y[c]).sum();
        y[r] = (b[r] - s) / a[r][r];
    }
    let mut x = vec![0.0; n];
    for (k, &p) in perm.iter().enumerate() {
        x[p] = y[k];
    }
    Some(x)
}

/// `X·A − B·X = C` by assembling the Kronecker operator entry by entry.
/// `X` is m×n, unknown `X[i][j]` sits at index `i·n + j`.
pub fn sylvester_oracle(a: &Dense, b: &Dense, c: &Dense) -> Option<Dense> {
    let n = a.len();
    let m = b.len();
    let idx = |i: usize, j: usize| i * n + j;
    let mut k = vec![vec![0.0; m * n]; m * n];
    let mut rhs = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            let row = idx(i, j);
            rhs[row] = c[i][j];
            for l in 0..n {
                k[row][idx(i, l)] += a[l][j];
            }
            for l in 0..m {
                k[row][idx(l, j)] -= b[i][l];
            }
        }
    }
    let x = gauss_full_pivot(k, rhs)?;
    Some((0..m).map(|i| x[i * n..(i + 1) * n].to_vec()).collect())
}

pub fn dense_mul(a: &Dense, b: &Dense) -> Dense {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    (0..n)
        .map(|i| (0..m).map(|j| (0..k).map(|l| a[i][l] * b[l][j]).sum()).collect())
        .collect()
}

pub fn max_abs_diff(a: &Dense, b: &Dense) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Classical RK4 with `n` equal steps over `[0, t]`.
pub fn rk4_fixed(f: impl Fn(&[f64]) -> Vec<f64>, y0: &[f64], t: f64, n: usize) -> Vec<f64> {
    let h = t / n as f64;
    let mut y = y0.to_vec();
    let axpy = |y: &[f64], k: &[f64], s: f64| y.iter().zip(k).map(|(a, b)| a + s * b).collect::<Vec<_>>();
    for _ in 0..n {
        let k1 = f(&y);
        let k2 = f(&axpy(&y, &k1, h / 2.0));
        let k3 = f(&axpy(&y, &k2, h / 2.0));
        let k4 = f(&axpy(&y, &k3, h));
        for i in 0..y.len() {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    y
}
