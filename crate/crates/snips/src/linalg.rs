//! Small dense-linear-algebra helpers shared by the estimators, the detector,
//! and their tests.

use num_complex::Complex64;

use crate::CMat;

/// `scale * A * A^H`, computed on the lower triangle and mirrored so the
/// result is Hermitian to the last bit (real diagonal included).
///
/// This is the hot covariance/Gram kernel: for a `B x n` input it does half
/// the multiplies of a general product and walks both operands column-major.
pub fn hermitian_gram(a: &CMat, scale: f64) -> CMat {
    let (rows, cols) = a.shape();
    let mut out = CMat::zeros(rows, rows);
    {
        let data = a.as_slice();
        let acc = out.as_mut_slice();
        for k in 0..cols {
            let col = &data[k * rows..(k + 1) * rows];
            for j in 0..rows {
                let cj = col[j].conj();
                if cj.re == 0.0 && cj.im == 0.0 {
                    continue;
                }
                let out_col = &mut acc[j * rows..(j + 1) * rows];
                for (o, &v) in out_col[j..].iter_mut().zip(&col[j..]) {
                    *o += v * cj;
                }
            }
        }
    }
    for j in 0..rows {
        let d = out[(j, j)].re * scale;
        out[(j, j)] = Complex64::new(d, 0.0);
        for i in (j + 1)..rows {
            let v = out[(i, j)] * scale;
            out[(i, j)] = v;
            out[(j, i)] = v.conj();
        }
    }
    out
}

/// Largest absolute entry of `M - M^H`; zero for an exactly Hermitian matrix.
pub fn hermitian_residual(m: &CMat) -> f64 {
    let n = m.nrows().min(m.ncols());
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            let r = (m[(i, j)] - m[(j, i)].conj()).norm();
            worst = worst.max(r);
        }
    }
    worst
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.partial_cmp(b).expect("eigenvalues are finite"));
    vals
}
