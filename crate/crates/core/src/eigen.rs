//! Dense and tridiagonal real symmetric eigensolvers, plus a Hermitian
//! solver built on the real embedding `[[A, −B], [B, A]]`.
//!
//! The Householder reduction and the implicit QL iteration follow the
//! classic EISPACK `tred2`/`tql2` pair.

use crate::error::{numeric, Result};
use crate::num::{Complex, Real};

/// Maximum QL sweeps per eigenvalue before giving up.
const MAX_QL_ITERATIONS: usize = 60;

/// Eigenpairs sorted by ascending eigenvalue. `vectors[k]` is a unit vector.
#[derive(Clone, Debug)]
pub struct RealEigen<T> {
    pub values: Vec<T>,
    pub vectors: Vec<Vec<T>>,
}

#[derive(Clone, Debug)]
pub struct HermitianEigen<T> {
    pub values: Vec<T>,
    pub vectors: Vec<Vec<Complex<T>>>,
}

/// Eigendecomposition of the symmetric tridiagonal matrix with diagonal `diag`
/// and off-diagonal `off` (`off[i]` couples `i` and `i + 1`).
pub fn tridiagonal_eigen<T: Real>(diag: &[T], off: &[T]) -> Result<RealEigen<T>> {
    let n = diag.len();
    assert!(off.len() + 1 == n || (n == 0 && off.is_empty()), "off-diagonal length mismatch");
    let mut d = diag.to_vec();
    let mut e = off.to_vec();
    e.push(T::zero());
    let mut vt = vec![T::zero(); n * n];
    for i in 0..n {
        vt[i * n + i] = T::one();
    }
    tql2(&mut d, &mut e, &mut vt, n)?;
    Ok(sorted(d, vt, n))
}

/// Eigendecomposition of a dense real symmetric matrix given row-major.
pub fn symmetric_eigen<T: Real>(a: &[T], n: usize) -> Result<RealEigen<T>> {
    assert_eq!(a.len(), n * n);
    let mut v = a.to_vec();
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    tred2(&mut v, &mut d, &mut e, n);
    for i in 1..n {
        e[i - 1] = e[i];
    }
    if n > 0 {
        e[n - 1] = T::zero();
    }
    // tql2 rotates rows of the transposed transformation.
    let mut vt = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..n {
            vt[j * n + i] = v[i * n + j];
        }
    }
    tql2(&mut d, &mut e, &mut vt, n)?;
    Ok(sorted(d, vt, n))
}

/// Eigendecomposition of a dense Hermitian matrix given row-major.
pub fn hermitian_eigen<T: Real>(a: &[Complex<T>], n: usize) -> Result<HermitianEigen<T>> {
    assert_eq!(a.len(), n * n);
    if a.iter().all(|z| z.im == T::zero()) {
        let re: Vec<T> = a.iter().map(|z| z.re).collect();
        let eig = symmetric_eigen(&re, n)?;
        return Ok(HermitianEigen {
            values: eig.values,
            vectors: eig
                .vectors
                .into_iter()
                .map(|v| v.into_iter().map(|x| Complex::new(x, T::zero())).collect())
                .collect(),
        });
    }
    // H = A + iB  ->  [[A, -B], [B, A]] has every eigenvalue of H twice,
    // with eigenvectors (x; y) and (-y; x) both mapping to x + iy up to a phase.
    let m = 2 * n;
    let mut big = vec![T::zero(); m * m];
    for i in 0..n {
        for j in 0..n {
            let z = a[i * n + j];
            big[i * m + j] = z.re;
            big[(i + n) * m + j + n] = z.re;
            big[i * m + j + n] = -z.im;
            big[(i + n) * m + j] = z.im;
        }
    }
    let eig = symmetric_eigen(&big, m)?;
    let scale = eig.values.iter().fold(T::zero(), |acc, v| acc.max(v.abs())).max(T::min_positive_value());
    let cluster_tol = T::lit(1e-9) * scale;

    let mut values = Vec::with_capacity(n);
    let mut vectors: Vec<Vec<Complex<T>>> = Vec::with_capacity(n);
    let mut cluster_start = 0;
    for k in 0..m {
        if k > 0 && eig.values[k] - eig.values[k - 1] > cluster_tol {
            cluster_start = values.len();
        }
        let v = &eig.vectors[k];
        let mut z: Vec<Complex<T>> = (0..n).map(|i| Complex::new(v[i], v[i + n])).collect();
        // Gram-Schmidt against accepted vectors of the current cluster, twice for stability.
        for _ in 0..2 {
            for w in &vectors[cluster_start..] {
                let overlap: Complex<T> = w.iter().zip(&z).map(|(a, b)| a.conj() * b).sum();
                for (zi, wi) in z.iter_mut().zip(w) {
                    *zi -= *wi * overlap;
                }
            }
        }
        let norm = z.iter().map(|c| c.norm_sqr()).sum::<T>().sqrt();
        if norm > T::lit(0.5) && values.len() < n {
            for c in z.iter_mut() {
                *c /= norm;
            }
            values.push(eig.values[k]);
            vectors.push(z);
        }
    }
    if values.len() != n {
        return Err(numeric(format!(
            "hermitian embedding produced {} independent vectors for dimension {n}",
            values.len()
        )));
    }
    Ok(HermitianEigen { values, vectors })
}

fn sorted<T: Real>(d: Vec<T>, vt: Vec<T>, n: usize) -> RealEigen<T> {
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    RealEigen {
        values: order.iter().map(|&k| d[k]).collect(),
        vectors: order.iter().map(|&k| vt[k * n..(k + 1) * n].to_vec()).collect(),
    }
}

/// Householder reduction of the row-major symmetric matrix `v` to tridiagonal
/// form. On return `v` holds the orthogonal transformation, `d` the diagonal and
/// `e[1..]` the sub-diagonal.
fn tred2<T: Real>(v: &mut [T], d: &mut [T], e: &mut [T], n: usize) {
    if n == 0 {
        return;
    }
    let at = |i: usize, j: usize| i * n + j;
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = T::zero();
        let mut h = T::zero();
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == T::zero() {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = T::zero();
                v[at(j, i)] = T::zero();
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > T::zero() {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = T::zero();
            }
            for j in 0..i {
                f = d[j];
                v[at(j, i)] = f;
                g = e[j] + v[at(j, j)] * f;
                for k in (j + 1)..i {
                    g += v[at(k, j)] * d[k];
                    e[k] += v[at(k, j)] * f;
                }
                e[j] = g;
            }
            f = T::zero();
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[at(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = T::zero();
            }
        }
        d[i] = h;
    }
    for i in 0..n - 1 {
        v[at(n - 1, i)] = v[at(i, i)];
        v[at(i, i)] = T::one();
        let h = d[i + 1];
        if h != T::zero() {
            for k in 0..=i {
                d[k] = v[at(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = T::zero();
                for k in 0..=i {
                    g += v[at(k, i + 1)] * v[at(k, j)];
                }
                for k in 0..=i {
                    v[at(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[at(k, i + 1)] = T::zero();
        }
    }
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
        v[at(n - 1, j)] = T::zero();
    }
    v[at(n - 1, n - 1)] = T::one();
    e[0] = T::zero();
}

/// Implicit QL iteration on the tridiagonal (`d`, `e` with `e[i]` coupling
/// `i`, `i + 1` and `e[n-1] = 0`). Row `k` of `vt` is rotated along with
/// eigenvector `k`.
fn tql2<T: Real>(d: &mut [T], e: &mut [T], vt: &mut [T], n: usize) -> Result<()> {
    if n <= 1 {
        return Ok(());
    }
    let eps = T::epsilon();
    let mut f = T::zero();
    let mut tst1 = T::zero();
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_QL_ITERATIONS {
                    return Err(numeric(format!(
                        "tridiagonal QL failed to converge for eigenvalue {l} of {n} after {MAX_QL_ITERATIONS} iterations (residual coupling {})",
                        e[l]
                    )));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (T::lit(2.0) * e[l]);
                let mut r = p.hypot(T::one());
                if p < T::zero() {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = T::one();
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = T::zero();
                let mut s2 = T::zero();
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    let (head, tail) = vt.split_at_mut((i + 1) * n);
                    let row_i = &mut head[i * n..];
                    let row_j = &mut tail[..n];
                    for (a, b) in row_i.iter_mut().zip(row_j.iter_mut()) {
                        let hv = *b;
                        *b = s * *a + c * hv;
                        *a = c * *a - s * hv;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = T::zero();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_real(a: &[f64], n: usize, eig: &RealEigen<f64>, tol: f64) {
        for k in 0..n {
            let v = &eig.vectors[k];
            for i in 0..n {
                let av: f64 = (0..n).map(|j| a[i * n + j] * v[j]).sum();
                assert!((av - eig.values[k] * v[i]).abs() < tol, "residual {k} {i}");
            }
            for l in 0..n {
                let dot: f64 = v.iter().zip(&eig.vectors[l]).map(|(x, y)| x * y).sum();
                let want = if k == l { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < tol);
            }
        }
        assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn tridiagonal_laplacian_spectrum() {
        // Dirichlet Laplacian: eigenvalues 2 - 2 cos(kπ/(n+1)).
        let n = 40;
        let eig = tridiagonal_eigen(&vec![2.0; n], &vec![-1.0; n - 1]).unwrap();
        for (k, &e) in eig.values.iter().enumerate() {
            let exact = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((e - exact).abs() < 1e-13);
        }
        let mut dense = vec![0.0; n * n];
        for i in 0..n {
            dense[i * n + i] = 2.0;
            if i + 1 < n {
                dense[i * n + i + 1] = -1.0;
                dense[(i + 1) * n + i] = -1.0;
            }
        }
        check_real(&dense, n, &eig, 1e-12);
    }

    #[test]
    fn dense_symmetric_random_matrix() {
        let n = 23;
        let mut a = vec![0.0; n * n];
        let mut state = 12345u64;
        for i in 0..n {
            for j in 0..=i {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let x = (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
                a[i * n + j] = x;
                a[j * n + i] = x;
            }
        }
        let eig = symmetric_eigen(&a, n).unwrap();
        check_real(&a, n, &eig, 1e-12);
        let trace: f64 = (0..n).map(|i| a[i * n + i]).sum();
        assert!((eig.values.iter().sum::<f64>() - trace).abs() < 1e-12);
    }

    #[test]
    fn degenerate_dense_matrix() {
        let n = 6;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            a[i * n + i] = if i < 3 { 1.0 } else { 2.0 };
        }
        let eig = symmetric_eigen(&a, n).unwrap();
        assert_eq!(eig.values, vec![1.0, 1.0, 1.0, 2.0, 2.0, 2.0]);
        check_real(&a, n, &eig, 1e-14);
    }

    #[test]
    fn hermitian_with_degeneracy() {
        // Circulant hopping on a 6-ring with a flux: complex, non-degenerate;
        // and a block-diagonal copy of it to force doubly degenerate levels.
        let n = 6;
        let phase = Complex::from_polar(1.0, 0.3);
        let mut h = vec![Complex::new(0.0, 0.0); n * n];
        for i in 0..n {
            let j = (i + 1) % n;
            h[i * n + j] += -phase;
            h[j * n + i] += -phase.conj();
            h[i * n + i] = Complex::new(0.1 * i as f64, 0.0);
        }
        for (mat, dim) in [(h.clone(), n), (block_double(&h, n), 2 * n)] {
            let eig = hermitian_eigen(&mat, dim).unwrap();
            for k in 0..dim {
                let v = &eig.vectors[k];
                for i in 0..dim {
                    let hv: Complex<f64> = (0..dim).map(|j| mat[i * dim + j] * v[j]).sum();
                    assert!((hv - v[i] * eig.values[k]).norm() < 1e-12);
                }
                for l in 0..dim {
                    let dot: Complex<f64> = eig.vectors[l].iter().zip(v).map(|(a, b)| a.conj() * b).sum();
                    let want = if k == l { 1.0 } else { 0.0 };
                    assert!((dot - want).norm() < 1e-12);
                }
            }
        }
    }

    fn block_double(h: &[Complex<f64>], n: usize) -> Vec<Complex<f64>> {
        let m = 2 * n;
        let mut out = vec![Complex::new(0.0, 0.0); m * m];
        for i in 0..n {
            for j in 0..n {
                out[i * m + j] = h[i * n + j];
                out[(i + n) * m + j + n] = h[i * n + j];
            }
        }
        out
    }

    #[test]
    fn single_precision_solver() {
        let n = 12;
        let eig = tridiagonal_eigen(&vec![2.0_f32; n], &vec![-1.0_f32; n - 1]).unwrap();
        let exact = 2.0 - 2.0 * (std::f32::consts::PI / (n + 1) as f32).cos();
        assert!((eig.values[0] - exact).abs() < 1e-5);
    }
}
