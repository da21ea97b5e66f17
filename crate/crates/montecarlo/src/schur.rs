//! Real Schur block structure of a dense matrix: Householder reduction to
//! upper Hessenberg form followed by Francis double-shift QR.

use crate::{Matrix, McError};

/// Relative deflation threshold used by [`count_real_eigs`] by default.
pub const DEFAULT_DEFLATION: f64 = 1e-8;

/// Block census of a converged quasi-triangular form.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BlockCount {
    pub one_by_one: usize,
    /// 2×2 blocks with nonnegative discriminant (a real pair).
    pub real_pairs: usize,
    pub complex_pairs: usize,
    /// Complex blocks whose discriminant lies in `(-1e-10 × scale², 0)`.
    pub near_degenerate: usize,
}

impl BlockCount {
    /// Number of real eigenvalues.
    pub fn real(&self) -> usize {
        self.one_by_one + 2 * self.real_pairs
    }

    pub fn total(&self) -> usize {
        self.one_by_one + 2 * (self.real_pairs + self.complex_pairs)
    }
}

/// Counts real eigenvalues of `m`. Subdiagonal entries are deflated when
/// `|h[i+1][i]| ≤ tol_rel × (|h[i][i]| + |h[i+1][i+1]|)`.
pub fn count_real_eigs(m: &Matrix, tol_rel: f64) -> Result<BlockCount, McError> {
    let mut h = m.to_rows();
    hessenberg(&mut h);
    francis_blocks(&mut h, tol_rel)
}

/// In-place Householder reduction to upper Hessenberg form.
pub fn hessenberg(a: &mut [Vec<f64>]) {
    let n = a.len();
    if n < 3 {
        return;
    }
    let mut v = vec![0.0; n];
    for k in 0..n - 2 {
        let norm = (k + 1..n).map(|i| a[i][k] * a[i][k]).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if a[k + 1][k] > 0.0 { -norm } else { norm };
        for i in k + 1..n {
            v[i] = a[i][k];
        }
        v[k + 1] -= alpha;
        let vv: f64 = (k + 1..n).map(|i| v[i] * v[i]).sum();
        if vv == 0.0 {
            continue;
        }
        // rows k+1.. : A ← (I - 2vvᵀ/vᵀv) A
        for j in k..n {
            let dot: f64 = (k + 1..n).map(|i| v[i] * a[i][j]).sum();
            let f = 2.0 * dot / vv;
            for i in k + 1..n {
                a[i][j] -= f * v[i];
            }
        }
        // columns k+1.. : A ← A (I - 2vvᵀ/vᵀv)
        for row in a.iter_mut() {
            let dot: f64 = (k + 1..n).map(|j| row[j] * v[j]).sum();
            let f = 2.0 * dot / vv;
            for j in k + 1..n {
                row[j] -= f * v[j];
            }
        }
        a[k + 1][k] = alpha;
        for row in a.iter_mut().skip(k + 2) {
            row[k] = 0.0;
        }
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix, eigenvalues only.
/// Returns the block census once the active window has fully deflated.
pub fn francis_blocks(a: &mut [Vec<f64>], tol_rel: f64) -> Result<BlockCount, McError> {
    let n = a.len();
    let mut count = BlockCount::default();
    if n == 0 {
        return Ok(count);
    }
    let max_its = 30 * n.max(1);
    let mut anorm = 0.0;
    for (i, row) in a.iter().enumerate() {
        for x in &row[i.saturating_sub(1)..] {
            anorm += x.abs();
        }
    }
    let mut nn = n as isize - 1;
    let mut t = 0.0;
    while nn >= 0 {
        let mut its = 0;
        loop {
            let hi = nn as usize;
            let mut l = hi;
            while l >= 1 {
                let mut s = a[l - 1][l - 1].abs() + a[l][l].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[l][l - 1].abs() <= tol_rel * s {
                    a[l][l - 1] = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = a[hi][hi];
            if l == hi {
                a[hi][hi] = x + t;
                count.one_by_one += 1;
                nn -= 1;
                break;
            }
            let mut y = a[hi - 1][hi - 1];
            let mut w = a[hi][hi - 1] * a[hi - 1][hi];
            if l == hi - 1 {
                // eigenvalues of [[y, b], [c, x]]: discriminant ((y-x)/2)² + bc
                let p = 0.5 * (y - x);
                let disc = p * p + w;
                if disc >= 0.0 {
                    count.real_pairs += 1;
                } else {
                    count.complex_pairs += 1;
                    let scale = x.abs() + y.abs() + a[hi][hi - 1].abs() + a[hi - 1][hi].abs();
                    if disc > -1e-10 * scale * scale {
                        count.near_degenerate += 1;
                    }
                }
                nn -= 2;
                break;
            }
            if its == max_its {
                return Err(McError::Convergence { iterations: its });
            }
            if its == 10 || its == 20 {
                // exceptional shift
                t += x;
                for (i, row) in a.iter_mut().enumerate().take(hi + 1) {
                    row[i] -= x;
                }
                let s = a[hi][hi - 1].abs() + a[hi - 1][hi - 2].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;

            let (mut p, mut q, mut r);
            let mut m = hi - 2;
            loop {
                let z = a[m][m];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / a[m + 1][m] + a[m][m + 1];
                q = a[m + 1][m + 1] - z - rr - ss;
                r = a[m + 2][m + 1];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a[m][m - 1].abs() * (q.abs() + r.abs());
                let v = p.abs() * (a[m - 1][m - 1].abs() + z.abs() + a[m + 1][m + 1].abs());
                if u <= f64::EPSILON * v {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=hi {
                a[i][i - 2] = 0.0;
                if i != m + 2 {
                    a[i][i - 3] = 0.0;
                }
            }

            let mut k = m;
            while k < hi {
                let mut scale = 0.0;
                if k != m {
                    p = a[k][k - 1];
                    q = a[k + 1][k - 1];
                    r = if k != hi - 1 { a[k + 2][k - 1] } else { 0.0 };
                    scale = p.abs() + q.abs() + r.abs();
                    if scale != 0.0 {
                        p /= scale;
                        q /= scale;
                        r /= scale;
                    }
                }
                let s = (p * p + q * q + r * r).sqrt().copysign(p);
                if s != 0.0 {
                    if k == m {
                        if l != m {
                            a[k][k - 1] = -a[k][k - 1];
                        }
                    } else {
                        a[k][k - 1] = -s * scale;
                    }
                    p += s;
                    let xx = p / s;
                    let yy = q / s;
                    let zz = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=hi {
                        let mut pp = a[k][j] + q * a[k + 1][j];
                        if k != hi - 1 {
                            pp += r * a[k + 2][j];
                            a[k + 2][j] -= pp * zz;
                        }
                        a[k + 1][j] -= pp * yy;
                        a[k][j] -= pp * xx;
                    }
                    let top = hi.min(k + 3);
                    for row in a.iter_mut().take(top + 1).skip(l) {
                        let mut pp = xx * row[k] + yy * row[k + 1];
                        if k != hi - 1 {
                            pp += zz * row[k + 2];
                            row[k + 2] -= pp * r;
                        }
                        row[k + 1] -= pp * q;
                        row[k] -= pp;
                    }
                }
                k += 1;
            }
        }
    }
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows.iter().map(|r| r.to_vec()).collect())
    }

    #[test]
    fn diagonal_is_all_real() {
        let m = matrix(&[&[1.0, 0.0, 0.0], &[0.0, -2.0, 0.0], &[0.0, 0.0, 3.0]]);
        assert_eq!(count_real_eigs(&m, DEFAULT_DEFLATION).unwrap().real(), 3);
    }

    #[test]
    fn rotation_has_no_real_eigenvalues() {
        let m = matrix(&[&[0.0, 1.0], &[-1.0, 0.0]]);
        let c = count_real_eigs(&m, DEFAULT_DEFLATION).unwrap();
        assert_eq!(c.real(), 0);
        assert_eq!(c.complex_pairs, 1);
    }

    #[test]
    fn companion_matrix_of_known_polynomial() {
        // (x-1)(x-2)(x²+1) = x⁴ - 3x³ + 3x² - 3x + 2
        let m = matrix(&[
            &[3.0, -3.0, 3.0, -2.0],
            &[1.0, 0.0, 0.0, 0.0],
            &[0.0, 1.0, 0.0, 0.0],
            &[0.0, 0.0, 1.0, 0.0],
        ]);
        let c = count_real_eigs(&m, DEFAULT_DEFLATION).unwrap();
        assert_eq!(c.real(), 2);
        assert_eq!(c.total(), 4);
    }

    #[test]
    fn hessenberg_preserves_trace_and_shape() {
        let rows: Vec<Vec<f64>> = (0..6)
            .map(|i| {
                (0..6)
                    .map(|j| ((i * 7 + j * 3) % 11) as f64 - 5.0)
                    .collect()
            })
            .collect();
        let trace: f64 = (0..6).map(|i| rows[i][i]).sum();
        let mut h = rows.clone();
        hessenberg(&mut h);
        for (i, row) in h.iter().enumerate() {
            for x in row.iter().take(i.saturating_sub(1)) {
                assert_eq!(*x, 0.0);
            }
        }
        let htrace: f64 = (0..6).map(|i| h[i][i]).sum();
        assert!((trace - htrace).abs() < 1e-12);
        let frob = |m: &Vec<Vec<f64>>| m.iter().flatten().map(|x| x * x).sum::<f64>();
        assert!((frob(&rows) - frob(&h)).abs() < 1e-10 * frob(&rows));
    }
}
