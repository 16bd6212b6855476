//! Dense complex matrices and the handful of factorizations the simulator needs.
//!
//! Everything here is sequential and allocation-light. Accumulation order is
//! fixed (row-major, ascending inner index) so results are bit-reproducible
//! for a given build.

use std::ops::{Index, IndexMut};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative tolerance used when asserting that an input is Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Eigenvalues of whitened PSD products below `-PSD_CLAMP * max(1, λ_max)`
/// are treated as a contract failure; those above are clamped to zero.
pub const PSD_CLAMP: f64 = 1e-10;

const JACOBI_MAX_SWEEPS: usize = 100;

/// Dense row-major complex matrix with finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape {
                op: "ComplexMatrix::new",
                detail: format!("{} entries for a {rows}x{cols} matrix", data.len()),
            });
        }
        if let Some(pos) = data
            .iter()
            .position(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::NonFinite {
                row: pos / cols.max(1),
                col: pos % cols.max(1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = Complex64::new(d, 0.0);
        }
        m
    }

    /// Builds a matrix from a generator. Panics if the generator yields a
    /// non-finite value, since that is a programming error at the call site.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::new(rows, cols, data).expect("generator produced a non-finite entry")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * factor).collect(),
        }
    }

    /// `self += factor * other`.
    pub fn add_scaled(&mut self, other: &ComplexMatrix, factor: f64) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Shape {
                op: "add_scaled",
                detail: format!(
                    "{}x{} vs {}x{}",
                    self.rows, self.cols, other.rows, other.cols
                ),
            });
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * factor;
        }
        Ok(())
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entrywise gap `|a_ij - conj(a_ji)|`; infinite for non-square input.
    pub fn hermitian_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut dev = 0.0f64;
        for i in 0..self.rows {
            for j in i..self.cols {
                dev = dev.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        dev
    }

    /// `(M + Mᴴ)/2`, with an exactly real diagonal.
    pub fn symmetrized(&self) -> Self {
        let n = self.rows;
        let mut out = self.clone();
        for i in 0..n {
            out[(i, i)] = Complex64::new(self[(i, i)].re, 0.0);
            for j in (i + 1)..n {
                let v = (self[(i, j)] + self[(j, i)].conj()) * 0.5;
                out[(i, j)] = v;
                out[(j, i)] = v.conj();
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() != self.cols {
            return Err(Error::Shape {
                op: "mul_vec",
                detail: format!(
                    "{}x{} times vector of length {}",
                    self.rows,
                    self.cols,
                    x.len()
                ),
            });
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    fn check_hermitian(&self) -> Result<()> {
        if !self.is_square() {
            return Err(Error::Shape {
                op: "hermitian check",
                detail: format!("{}x{} is not square", self.rows, self.cols),
            });
        }
        let dev = self.hermitian_deviation();
        if dev > HERMITIAN_TOL * self.frobenius_norm().max(f64::MIN_POSITIVE) {
            return Err(Error::NotHermitian { deviation: dev });
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn matmul(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    if a.cols != b.rows {
        return Err(Error::Shape {
            op: "matmul",
            detail: format!("{}x{} times {}x{}", a.rows, a.cols, b.rows, b.cols),
        });
    }
    let mut out = ComplexMatrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        let out_row = &mut out.data[i * b.cols..(i + 1) * b.cols];
        for (k, &aik) in a.row(i).iter().enumerate() {
            if aik == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (o, &bkj) in out_row.iter_mut().zip(b.row(k)) {
                *o += aik * bkj;
            }
        }
    }
    Ok(out)
}

/// `scale · A·Aᴴ`, symmetrized to remove rounding asymmetry.
pub fn scaled_gram(a: &ComplexMatrix, scale: f64) -> Result<ComplexMatrix> {
    if !(scale >= 0.0) || !scale.is_finite() {
        return Err(Error::Domain(format!(
            "gram scale must be finite and >= 0, got {scale}"
        )));
    }
    let n = a.rows;
    let mut out = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        let ri = a.row(i);
        for j in i..n {
            let rj = a.row(j);
            let v: Complex64 = ri
                .iter()
                .zip(rj)
                .map(|(x, y)| x * y.conj())
                .sum::<Complex64>()
                * scale;
            out[(i, j)] = v;
            out[(j, i)] = v.conj();
        }
        out[(i, i)].im = 0.0;
    }
    Ok(out)
}

/// Lower Cholesky factor `L` with `L·Lᴴ = a` and positive real diagonal.
pub fn cholesky(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    a.check_hermitian()?;
    let n = a.rows;
    let max_diag = (0..n).map(|i| a[(i, i)].re.abs()).fold(0.0, f64::max);
    let floor = n as f64 * 1e-14 * max_diag;
    let mut l = ComplexMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > floor) {
            return Err(Error::NotPositiveDefinite { index: j, pivot: d });
        }
        let ljj = d.sqrt();
        l[(j, j)] = Complex64::new(ljj, 0.0);
        for i in (j + 1)..n {
            let mut v = a[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = v / ljj;
        }
    }
    Ok(l)
}

/// `log det a` for Hermitian positive definite `a`, via the Cholesky diagonal.
pub fn log_det_hpd(a: &ComplexMatrix) -> Result<f64> {
    let l = cholesky(a)?;
    Ok((0..l.rows).map(|i| 2.0 * l[(i, i)].re.ln()).sum())
}

/// Solves `L·X = B` for lower-triangular `L`.
fn forward_substitute(l: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let n = l.rows;
    let mut x = b.clone();
    for c in 0..b.cols {
        for i in 0..n {
            let mut v = x[(i, c)];
            for k in 0..i {
                v -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = v / l[(i, i)];
        }
    }
    x
}

/// Cyclic complex Jacobi. Returns ascending eigenvalues and, when requested,
/// the matching unit eigenvectors as columns.
fn jacobi_eigen(
    a: &ComplexMatrix,
    want_vectors: bool,
) -> Result<(Vec<f64>, Option<ComplexMatrix>)> {
    a.check_hermitian()?;
    let n = a.rows;
    let mut m = a.symmetrized();
    let mut z = want_vectors.then(|| ComplexMatrix::identity(n));
    let norm = m.frobenius_norm();
    if norm == 0.0 || n <= 1 {
        let vals = (0..n).map(|i| m[(i, i)].re).collect();
        return Ok((vals, z));
    }
    let target = f64::EPSILON * norm * 1e-2;

    let off_norm = |m: &ComplexMatrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                s += m[(i, j)].norm_sqr();
            }
        }
        (2.0 * s).sqrt()
    };

    let mut sweeps = 0;
    while off_norm(&m) > target {
        sweeps += 1;
        if sweeps > JACOBI_MAX_SWEEPS {
            return Err(Error::NoConvergence {
                op: "hermitian_eigenvalues",
                detail: format!(
                    "off-diagonal norm {:e} after {JACOBI_MAX_SWEEPS} sweeps",
                    off_norm(&m)
                ),
            });
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                let b = apq.norm();
                if b <= target * 1e-3 {
                    continue;
                }
                let u = apq / b;
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                let theta = (aqq - app) / (2.0 * b);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let su = u * s;
                let su_conj = su.conj();
                let cu_conj = u.conj() * c;
                let cu = u * c;

                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = mkp * c - su_conj * mkq;
                    m[(k, q)] = mkp * s + cu_conj * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = mpk * c - su * mqk;
                    m[(q, k)] = mpk * s + cu * mqk;
                }
                m[(p, p)] = Complex64::new(app - t * b, 0.0);
                m[(q, q)] = Complex64::new(aqq + t * b, 0.0);
                m[(p, q)] = Complex64::new(0.0, 0.0);
                m[(q, p)] = Complex64::new(0.0, 0.0);

                if let Some(z) = z.as_mut() {
                    for k in 0..n {
                        let zkp = z[(k, p)];
                        let zkq = z[(k, q)];
                        z[(k, p)] = zkp * c - su_conj * zkq;
                        z[(k, q)] = zkp * s + cu_conj * zkq;
                    }
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].re.total_cmp(&m[(j, j)].re));
    let vals = order.iter().map(|&i| m[(i, i)].re).collect();
    let z = z.map(|z| ComplexMatrix::from_fn(n, n, |r, c| z[(r, order[c])]));
    Ok((vals, z))
}

/// Ascending eigenvalues of a Hermitian matrix.
pub fn hermitian_eigenvalues(a: &ComplexMatrix) -> Result<Vec<f64>> {
    jacobi_eigen(a, false).map(|(v, _)| v)
}

/// Eigenvalues plus eigenvectors (columns). Kept crate-internal.
pub(crate) fn hermitian_eigen(a: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    jacobi_eigen(a, true).map(|(v, z)| (v, z.expect("vectors requested")))
}

/// Eigenvalues of `r_s · r_n⁻¹`, computed as the Hermitian spectrum of
/// `L⁻¹·r_s·L⁻ᴴ` where `r_n = L·Lᴴ`.
pub fn whiten_eigenvalues(r_s: &ComplexMatrix, r_n: &ComplexMatrix) -> Result<Vec<f64>> {
    if r_s.rows != r_n.rows || !r_s.is_square() || !r_n.is_square() {
        return Err(Error::Shape {
            op: "whiten_eigenvalues",
            detail: format!(
                "{}x{} signal vs {}x{} noise",
                r_s.rows, r_s.cols, r_n.rows, r_n.cols
            ),
        });
    }
    r_s.check_hermitian()?;
    let l = cholesky(r_n)?;
    // X = L⁻¹ r_s, then L⁻¹ Xᴴ = L⁻¹ r_s L⁻ᴴ since r_s is Hermitian.
    let x = forward_substitute(&l, r_s);
    let whitened = forward_substitute(&l, &x.adjoint()).symmetrized();
    clamp_psd(hermitian_eigenvalues(&whitened)?)
}

pub(crate) fn clamp_psd(mut vals: Vec<f64>) -> Result<Vec<f64>> {
    let top = vals.last().copied().unwrap_or(0.0).max(1.0);
    for v in vals.iter_mut() {
        if *v < 0.0 {
            if *v < -PSD_CLAMP * top {
                return Err(Error::NegativeEigenvalue { value: *v });
            }
            *v = 0.0;
        }
    }
    Ok(vals)
}

/// `(1/n)·‖c·I − a‖_Tr` for Hermitian `a`.
pub fn trace_norm_distance(a: &ComplexMatrix, c: f64) -> Result<f64> {
    let eig = hermitian_eigenvalues(a)?;
    if eig.is_empty() {
        return Ok(0.0);
    }
    Ok(eig.iter().map(|l| (c - l).abs()).sum::<f64>() / eig.len() as f64)
}

/// Empirical Stieltjes transform `(1/n)·Tr((sI + a)⁻¹)`, by LU with partial
/// pivoting and one solve per unit vector.
pub fn resolvent_trace(a: &ComplexMatrix, s: Complex64) -> Result<Complex64> {
    a.check_hermitian()?;
    let n = a.rows;
    if n == 0 {
        return Err(Error::Shape {
            op: "resolvent_trace",
            detail: "empty matrix".into(),
        });
    }
    let mut lu = a.clone();
    for i in 0..n {
        lu[(i, i)] += s;
    }
    let scale = lu.data.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut perm: Vec<usize> = (0..n).collect();
    for col in 0..n {
        let (piv, mag) = (col..n)
            .map(|r| (r, lu[(r, col)].norm()))
            .fold((col, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if mag <= 1e-14 * scale {
            return Err(Error::NearSingular {
                op: "resolvent_trace",
            });
        }
        if piv != col {
            for j in 0..n {
                let tmp = lu[(col, j)];
                lu[(col, j)] = lu[(piv, j)];
                lu[(piv, j)] = tmp;
            }
            perm.swap(col, piv);
        }
        let d = lu[(col, col)];
        for r in (col + 1)..n {
            let f = lu[(r, col)] / d;
            lu[(r, col)] = f;
            if f == Complex64::new(0.0, 0.0) {
                continue;
            }
            for j in (col + 1)..n {
                let v = lu[(col, j)];
                lu[(r, j)] -= f * v;
            }
        }
    }

    let mut total = Complex64::new(0.0, 0.0);
    let mut y = vec![Complex64::new(0.0, 0.0); n];
    for j in 0..n {
        // P·M = L·U, so M·x = e_j becomes L·U·x = P·e_j.
        for i in 0..n {
            let mut v = if perm[i] == j {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            };
            for k in 0..i {
                v -= lu[(i, k)] * y[k];
            }
            y[i] = v;
        }
        for i in (0..n).rev() {
            let mut v = y[i];
            for k in (i + 1)..n {
                v -= lu[(i, k)] * y[k];
            }
            y[i] = v / lu[(i, i)];
        }
        total += y[j];
    }
    Ok(total / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
        ComplexMatrix::from_fn(rows, cols, |_, _| {
            c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
        random(n, n, rng).symmetrized()
    }

    fn max_rel_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
        let scale = a.frobenius_norm().max(b.frobenius_norm()).max(1e-300);
        a.as_slice()
            .iter()
            .zip(b.as_slice())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
            / scale
    }

    #[test]
    fn construction_rejects_bad_input() {
        assert!(matches!(
            ComplexMatrix::new(2, 2, vec![c(0.0, 0.0); 3]),
            Err(Error::Shape { .. })
        ));
        assert!(matches!(
            ComplexMatrix::new(1, 2, vec![c(0.0, 0.0), c(f64::NAN, 0.0)]),
            Err(Error::NonFinite { row: 0, col: 1 })
        ));
    }

    #[test]
    fn matmul_identity_zero_and_naive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random(3, 3, &mut rng);
        assert_eq!(matmul(&ComplexMatrix::identity(3), &a).unwrap(), a);
        let z = matmul(&a, &ComplexMatrix::zeros(3, 3)).unwrap();
        assert!(z.as_slice().iter().all(|v| *v == c(0.0, 0.0)));

        let a = random(4, 3, &mut rng);
        let b = random(3, 5, &mut rng);
        let p = matmul(&a, &b).unwrap();
        for i in 0..4 {
            for j in 0..5 {
                let mut naive = c(0.0, 0.0);
                for k in 0..3 {
                    naive += a[(i, k)] * b[(k, j)];
                }
                assert!((p[(i, j)] - naive).norm() <= 1e-12 * naive.norm().max(1.0));
            }
        }
        assert!(matches!(matmul(&a, &a), Err(Error::Shape { .. })));
    }

    #[test]
    fn matmul_is_associative() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let a = random(5, 6, &mut rng);
            let b = random(6, 4, &mut rng);
            let d = random(4, 7, &mut rng);
            let left = matmul(&matmul(&a, &b).unwrap(), &d).unwrap();
            let right = matmul(&a, &matmul(&b, &d).unwrap()).unwrap();
            assert!(max_rel_diff(&left, &right) <= 1e-10);
        }
    }

    #[test]
    fn scaled_gram_cases() {
        assert_eq!(
            scaled_gram(&ComplexMatrix::identity(2), 1.0).unwrap(),
            ComplexMatrix::identity(2)
        );
        let row = ComplexMatrix::new(1, 2, vec![c(1.0, 1.0), c(0.0, 0.0)]).unwrap();
        let g = scaled_gram(&row, 0.5).unwrap();
        assert!((g[(0, 0)] - c(1.0, 0.0)).norm() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random(3, 5, &mut rng);
        let g = scaled_gram(&a, 0.2).unwrap();
        let direct: f64 = a.as_slice().iter().map(|z| z.norm_sqr()).sum::<f64>() * 0.2;
        assert!((g.trace().re - direct).abs() <= 1e-12 * direct);
        assert_eq!(g.hermitian_deviation(), 0.0);
        assert!(hermitian_eigenvalues(&g).unwrap()[0] >= -1e-12);
        assert!(matches!(scaled_gram(&a, -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn cholesky_cases() {
        assert_eq!(
            cholesky(&ComplexMatrix::identity(4)).unwrap(),
            ComplexMatrix::identity(4)
        );
        let l = cholesky(&ComplexMatrix::from_diagonal(&[4.0, 9.0])).unwrap();
        assert_eq!(l, ComplexMatrix::from_diagonal(&[2.0, 3.0]));

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random(8, 20, &mut rng);
        let mut pd = scaled_gram(&a, 1.0 / 20.0).unwrap();
        pd.add_scaled(&ComplexMatrix::identity(8), 1.0).unwrap();
        let l = cholesky(&pd).unwrap();
        let back = matmul(&l, &l.adjoint()).unwrap();
        let mut diff = back.clone();
        diff.add_scaled(&pd, -1.0).unwrap();
        assert!(diff.frobenius_norm() <= 1e-10 * pd.frobenius_norm());
        for i in 0..8 {
            assert!(l[(i, i)].re > 0.0 && l[(i, i)].im == 0.0);
            for j in (i + 1)..8 {
                assert_eq!(l[(i, j)], c(0.0, 0.0));
            }
        }

        let singular = ComplexMatrix::from_diagonal(&[1.0, 0.0]);
        assert!(matches!(
            cholesky(&singular),
            Err(Error::NotPositiveDefinite { index: 1, .. })
        ));
    }

    #[test]
    fn eigenvalue_small_cases() {
        let e = hermitian_eigenvalues(&ComplexMatrix::from_diagonal(&[3.0, 1.0, 2.0])).unwrap();
        assert_eq!(e, vec![1.0, 2.0, 3.0]);
        let swap = ComplexMatrix::new(
            2,
            2,
            vec![c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
        )
        .unwrap();
        let e = hermitian_eigenvalues(&swap).unwrap();
        assert!((e[0] + 1.0).abs() < 1e-14 && (e[1] - 1.0).abs() < 1e-14);

        let skew = ComplexMatrix::new(
            2,
            2,
            vec![c(0.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0)],
        )
        .unwrap();
        assert!(matches!(
            hermitian_eigenvalues(&skew),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn eigenvalues_match_trace_and_determinant_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_hermitian(16, &mut rng);
        let e = hermitian_eigenvalues(&a).unwrap();
        assert!(e.windows(2).all(|w| w[0] <= w[1]));

        let tr = a.trace().re;
        let tr2 = matmul(&a, &a).unwrap().trace().re;
        assert!((e.iter().sum::<f64>() - tr).abs() <= 1e-8 * tr.abs().max(1.0));
        assert!((e.iter().map(|x| x * x).sum::<f64>() - tr2).abs() <= 1e-8 * tr2);

        // det via the log-det of a shifted PD copy: det(a + sI) = Π(λ + s).
        let shift = e[0].abs() + 1.0;
        let mut shifted = a.clone();
        shifted
            .add_scaled(&ComplexMatrix::identity(16), shift)
            .unwrap();
        let logdet = log_det_hpd(&shifted).unwrap();
        let from_eigs: f64 = e.iter().map(|x| (x + shift).ln()).sum();
        assert!((logdet - from_eigs).abs() <= 1e-8 * logdet.abs().max(1.0));
    }

    #[test]
    fn eigenpair_residuals() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for n in [2, 7, 24] {
            let a = random_hermitian(n, &mut rng);
            let (vals, vecs) = hermitian_eigen(&a).unwrap();
            let norm = a.frobenius_norm();
            for (j, &lambda) in vals.iter().enumerate() {
                let v: Vec<Complex64> = (0..n).map(|i| vecs[(i, j)]).collect();
                let av = a.mul_vec(&v).unwrap();
                let res: f64 = av
                    .iter()
                    .zip(&v)
                    .map(|(x, y)| (x - y * lambda).norm_sqr())
                    .sum::<f64>()
                    .sqrt();
                assert!(res <= 1e-8 * norm, "n={n} residual {res}");
            }
        }
    }

    #[test]
    fn whiten_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = random(6, 12, &mut rng);
        let mut pd = scaled_gram(&x, 1.0 / 12.0).unwrap();
        pd.add_scaled(&ComplexMatrix::identity(6), 0.5).unwrap();
        let e = whiten_eigenvalues(&pd, &pd).unwrap();
        assert!(e.iter().all(|v| (v - 1.0).abs() < 1e-10));

        let y = random(6, 3, &mut rng);
        let psd = scaled_gram(&y, 1.0).unwrap();
        let plain = hermitian_eigenvalues(&psd).unwrap();
        let whitened = whiten_eigenvalues(&psd, &ComplexMatrix::identity(6)).unwrap();
        for (a, b) in plain.iter().zip(&whitened) {
            assert!((a.max(0.0) - b).abs() < 1e-12);
        }
    }

    #[test]
    fn whiten_matches_explicit_inverse() {
        // Explicit inverse by Gauss-Jordan.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 6;
        let r_s = scaled_gram(&random(n, 4, &mut rng), 1.0).unwrap();
        let mut r_n = scaled_gram(&random(n, 9, &mut rng), 0.3).unwrap();
        r_n.add_scaled(&ComplexMatrix::identity(n), 1.0).unwrap();

        let mut aug = ComplexMatrix::zeros(n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                aug[(i, j)] = r_n[(i, j)];
            }
            aug[(i, n + i)] = c(1.0, 0.0);
        }
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&a, &b| aug[(a, col)].norm().total_cmp(&aug[(b, col)].norm()))
                .unwrap();
            for j in 0..2 * n {
                let t = aug[(col, j)];
                aug[(col, j)] = aug[(piv, j)];
                aug[(piv, j)] = t;
            }
            let d = aug[(col, col)];
            for j in 0..2 * n {
                aug[(col, j)] /= d;
            }
            for r in 0..n {
                if r != col {
                    let f = aug[(r, col)];
                    for j in 0..2 * n {
                        let v = aug[(col, j)];
                        aug[(r, j)] -= f * v;
                    }
                }
            }
        }
        let inv = ComplexMatrix::from_fn(n, n, |i, j| aug[(i, n + j)]).symmetrized();
        let prod = matmul(&r_s, &inv).unwrap();

        // Symmetric square root of the explicit inverse, then the Hermitian
        // similarity transform of the product.
        let (d, v) = hermitian_eigen(&inv).unwrap();
        let root_diag =
            ComplexMatrix::from_diagonal(&d.iter().map(|x| x.sqrt()).collect::<Vec<_>>());
        let root = matmul(&matmul(&v, &root_diag).unwrap(), &v.adjoint()).unwrap();
        let sim = matmul(&matmul(&root, &r_s).unwrap(), &root)
            .unwrap()
            .symmetrized();
        let oracle = hermitian_eigenvalues(&sim).unwrap();

        let e = whiten_eigenvalues(&r_s, &r_n).unwrap();
        let top = oracle.last().unwrap().abs();
        for (a, b) in e.iter().zip(&oracle) {
            assert!((a - b.max(0.0)).abs() <= 1e-8 * top, "{a} vs {b}");
        }
        let s1: f64 = e.iter().sum();
        assert!((s1 - prod.trace().re).abs() <= 1e-8 * s1.max(1.0));
        // rank-4 signal in dimension 6
        assert!(e[0] < 1e-10 && e[1] < 1e-10 && e[2] > 1e-6);
    }

    #[test]
    fn whiten_log_det_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..5 {
            let n = 8;
            let r_s = scaled_gram(&random(n, 10, &mut rng), 2.0).unwrap();
            let mut r_n = scaled_gram(&random(n, 5, &mut rng), 0.7).unwrap();
            r_n.add_scaled(&ComplexMatrix::identity(n), 1.0).unwrap();
            let e = whiten_eigenvalues(&r_s, &r_n).unwrap();
            let lhs: f64 = e.iter().map(|x| x.ln_1p()).sum();
            let mut total = r_n.clone();
            total.add_scaled(&r_s, 1.0).unwrap();
            let rhs = log_det_hpd(&total).unwrap() - log_det_hpd(&r_n).unwrap();
            assert!((lhs - rhs).abs() <= 1e-8 * rhs.abs());
        }
    }

    #[test]
    fn trace_norm_cases() {
        assert_eq!(
            trace_norm_distance(&ComplexMatrix::identity(3), 1.0).unwrap(),
            0.0
        );
        let d = trace_norm_distance(&ComplexMatrix::from_diagonal(&[0.5, 1.5]), 1.0).unwrap();
        assert!((d - 0.5).abs() < 1e-15);
        let d = trace_norm_distance(&ComplexMatrix::from_diagonal(&[2.0, 2.0, 2.0]), 2.0).unwrap();
        assert!(d < 1e-15);
        assert!(
            trace_norm_distance(&ComplexMatrix::from_diagonal(&[2.0, 2.1]), 2.0).unwrap() > 0.0
        );
    }

    #[test]
    fn resolvent_trace_cases() {
        let r = resolvent_trace(&ComplexMatrix::identity(5), c(1.0, 0.0)).unwrap();
        assert!((r - c(0.5, 0.0)).norm() < 1e-15);
        let s = c(0.3, -0.7);
        let r = resolvent_trace(&ComplexMatrix::from_diagonal(&[2.0; 4]), s).unwrap();
        assert!((r - (s + 2.0).inv()).norm() < 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let a = random_hermitian(10, &mut rng);
        let e = hermitian_eigenvalues(&a).unwrap();
        let s = c(0.4, 0.9);
        let expect: Complex64 = e.iter().map(|l| (s + l).inv()).sum::<Complex64>() / 10.0;
        let got = resolvent_trace(&a, s).unwrap();
        assert!((got - expect).norm() <= 1e-9 * expect.norm());

        let sing = ComplexMatrix::from_diagonal(&[-1.0, 2.0]);
        assert!(matches!(
            resolvent_trace(&sing, c(1.0, 0.0)),
            Err(Error::NearSingular { .. })
        ));
    }
}
