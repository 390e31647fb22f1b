use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::Real;

pub(crate) type CMatrix<T> = DMatrix<Complex<T>>;
pub(crate) type CVector<T> = DVector<Complex<T>>;

/// i.i.d. `CN(0, 1)` entries.
pub(crate) fn gaussian<T: Real, R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix<T> {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    DMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex::new(T::lit(re * scale), T::lit(im * scale))
    })
}

/// Singular values in descending order with the matching right singular
/// vectors (as columns). Always returns all `cols` right vectors; missing
/// rows are padded with zeros so the trailing ones span the nullspace.
pub(crate) fn right_svd<T: Real>(m: &CMatrix<T>) -> (Vec<T>, Vec<CVector<T>>) {
    let cols = m.ncols();
    if cols == 0 {
        return (Vec::new(), Vec::new());
    }
    let rows = m.nrows().max(cols);
    let mut padded = CMatrix::<T>::zeros(rows, cols);
    padded.view_mut((0, 0), (m.nrows(), cols)).copy_from(m);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = order.iter().map(|&i| svd.singular_values[i]).collect();
    let vectors = order.iter().map(|&i| v_t.row(i).adjoint()).collect();
    (values, vectors)
}

/// Orthonormal basis of `{x : m x = 0}`, using `rtol · σ_max` as the zero
/// threshold. A matrix without rows has the full space as its nullspace.
pub(crate) fn nullspace<T: Real>(m: &CMatrix<T>, rtol: T) -> Vec<CVector<T>> {
    let cols = m.ncols();
    if m.nrows() == 0 {
        return (0..cols)
            .map(|i| {
                let mut e = CVector::<T>::zeros(cols);
                e[i] = Complex::new(T::one(), T::zero());
                e
            })
            .collect();
    }
    let (values, vectors) = right_svd(m);
    let cutoff = values[0] * rtol;
    values
        .iter()
        .zip(vectors)
        .filter(|(s, _)| **s <= cutoff)
        .map(|(_, v)| v)
        .collect()
}

pub(crate) fn min_singular_value<T: Real>(m: &CMatrix<T>) -> T {
    if m.nrows() == 0 || m.ncols() == 0 {
        return T::zero();
    }
    m.clone()
        .singular_values()
        .iter()
        .copied()
        .fold(T::max_value().expect("bounded real"), |a, b| if b < a { b } else { a })
}

/// First `k` columns of the unitary factor of a QR decomposition.
pub(crate) fn orthonormalize<T: Real>(m: CMatrix<T>, k: usize) -> CMatrix<T> {
    let q = m.qr().q();
    q.columns(0, k).into_owned()
}

/// Leading `k` left singular vectors.
pub(crate) fn top_left_singular<T: Real>(m: &CMatrix<T>, k: usize) -> CMatrix<T> {
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("requested left singular vectors");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut out = CMatrix::<T>::zeros(m.nrows(), k);
    for (j, &i) in order.iter().take(k).enumerate() {
        out.set_column(j, &u.column(i));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    #[test]
    fn nullspace_of_wide_gaussian() {
        let mut rng = seed::rng(1, "linalg");
        for rows in 0..=4 {
            let m: CMatrix<f64> = gaussian(rows, 4, &mut rng);
            let null = nullspace(&m, 1e-8);
            assert_eq!(null.len(), 4 - rows);
            for v in &null {
                assert!((&m * v).norm() < 1e-10);
                assert!((v.norm() - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn tall_matrix_has_trivial_nullspace() {
        let mut rng = seed::rng(2, "linalg");
        let m: CMatrix<f64> = gaussian(6, 4, &mut rng);
        assert!(nullspace(&m, 1e-8).is_empty());
    }

    #[test]
    fn orthonormal_and_aligned_columns() {
        let mut rng = seed::rng(3, "linalg");
        let g: CMatrix<f64> = gaussian(3, 2, &mut rng);
        let q = orthonormalize(g, 2);
        let gram = q.adjoint() * &q;
        assert!((gram - CMatrix::<f64>::identity(2, 2)).norm() < 1e-12);

        let h: CMatrix<f64> = gaussian(3, 10, &mut rng);
        let u = top_left_singular(&h, 2);
        let gram = u.adjoint() * &u;
        assert!((gram - CMatrix::<f64>::identity(2, 2)).norm() < 1e-12);
        let sv = h.clone().singular_values();
        let top = sv.iter().cloned().fold(0.0, f64::max);
        assert!(((u.column(0).adjoint() * &h).norm() - top).abs() < 1e-9);
    }
}
