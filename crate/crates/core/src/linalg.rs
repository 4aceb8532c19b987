//! Dense complex linear algebra on top of nalgebra.
//!
//! Everything in the crate works with `DMatrix<Complex64>`. Hermitian
//! eigendecomposition comes from nalgebra's `SymmetricEigen`; unitary
//! eigendecomposition is built on top of it in two stages (see
//! [`eig_unitary`]), which keeps results real-arithmetic deterministic and
//! avoids a general nonsymmetric eigensolver.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{CoreError, Result};

/// Dense complex matrix used for every operator in the crate.
pub type CMatrix = DMatrix<Complex64>;
/// Dense complex vector (pure states, eigenvector columns).
pub type CVector = DVector<Complex64>;

/// Complex number from real and imaginary parts.
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Complex number from a real value.
pub fn cr(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Identity matrix of the given dimension.
pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

/// Kronecker product.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Largest entry-wise absolute difference between two matrices.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch in max_abs_diff");
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest absolute entry of `H - H^dagger`; zero for Hermitian matrices.
pub fn hermiticity_error(h: &CMatrix) -> f64 {
    max_abs_diff(h, &h.adjoint())
}

/// Largest absolute entry of `U^dagger U - 1`; zero for unitary matrices.
pub fn unitarity_error(u: &CMatrix) -> f64 {
    let dim = u.nrows();
    max_abs_diff(&(u.adjoint() * u), &identity(dim))
}

/// Largest absolute entry of `V^dagger V - 1` for a column set `V`.
pub fn gram_error(v: &CMatrix) -> f64 {
    unitarity_error(v)
}

/// Determinant via LU decomposition.
pub fn determinant(m: &CMatrix) -> Complex64 {
    m.clone().lu().determinant()
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Returns `(eigenvalues, eigenvectors)` with eigenvalues sorted ascending
/// and eigenvector columns permuted to match. The input must be Hermitian
/// within `1e-12` relative to its largest entry; this is asserted.
///
/// The fast QL-based solver is used first and its result verified against
/// the invariance residual `max |H v - lambda v|`: on matrices with
/// degenerate eigenvalues it can return orthonormal columns that are far
/// from eigenvectors (correct values, mixed vectors). When verification
/// fails, a cyclic Jacobi solve — unconditionally stable under degeneracy —
/// replaces it.
pub fn hermitian_eigen(h: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let scale = h.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let herm_err = hermiticity_error(h);
    if herm_err > 1e-12 * scale {
        return Err(CoreError::invariant(format!(
            "hermitian_eigen input non-Hermitian: max |H - H^dag| = {herm_err:.3e}"
        )));
    }
    let n = h.nrows();
    let eig = h.clone().symmetric_eigen();
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let mut vectors = eig.eigenvectors;
    if eigen_residual(h, &values, &vectors) > 1e-11 * scale {
        let (jv, jw) = jacobi_hermitian(h);
        values = jv;
        vectors = jw;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).expect("NaN eigenvalue"));
    let sorted_values: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    let mut sorted = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        sorted.set_column(dst, &vectors.column(src));
    }
    Ok((sorted_values, sorted))
}

/// Largest entry of `H V - V diag(values)`: zero when the columns of `V`
/// are eigenvectors with the given eigenvalues.
pub fn eigen_residual(h: &CMatrix, values: &[f64], vectors: &CMatrix) -> f64 {
    let mut r = h * vectors;
    for (j, &lam) in values.iter().enumerate() {
        for i in 0..r.nrows() {
            r[(i, j)] -= vectors[(i, j)] * cr(lam);
        }
    }
    r.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Maximum cyclic sweeps for the Jacobi eigensolver.
const JACOBI_MAX_SWEEPS: usize = 60;

/// Cyclic complex Jacobi eigendecomposition of a Hermitian matrix. Each
/// step applies an exactly unitary plane rotation zeroing one off-diagonal
/// entry, so eigenvectors stay orthonormal and invariant-subspace mixing
/// cannot occur, degenerate spectra included. Returns unsorted
/// `(values, vectors)`.
fn jacobi_hermitian(h: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = h.nrows();
    let mut a = h.clone();
    let mut v = identity(n);
    let scale = a.iter().map(|z| z.norm()).fold(f64::MIN_POSITIVE, f64::max);
    let stop = 1e-15 * scale;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off: f64 = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(a[(p, q)].norm());
            }
        }
        if off <= stop {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let beta = a[(p, q)];
                let b = beta.norm();
                if b <= stop {
                    continue;
                }
                // Absorb the phase of the pivot so the 2x2 block is real,
                // then rotate by the stable small-angle root of
                // t^2 - t (d - a)/b - 1 = 0.
                let phase = beta / cr(b);
                let alpha = a[(p, p)].re;
                let delta = a[(q, q)].re;
                let xi = (delta - alpha) / b;
                let t = if xi >= 0.0 {
                    -2.0 / (xi + (xi * xi + 4.0).sqrt())
                } else {
                    2.0 / (-xi + (xi * xi + 4.0).sqrt())
                };
                let co = 1.0 / (1.0 + t * t).sqrt();
                let sigma = t * co;
                // Plane rotation V: V_pp = co, V_pq = -sigma e^{i phi},
                // V_qp = sigma e^{-i phi}, V_qq = co. Apply A <- V^H A V.
                let vpq = -phase * cr(sigma);
                let vqp = phase.conj() * cr(sigma);
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * cr(co) + akq * vqp;
                    a[(k, q)] = akp * vpq + akq * cr(co);
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = apk * cr(co) + aqk * vqp.conj();
                    a[(q, k)] = apk * vpq.conj() + aqk * cr(co);
                }
                a[(p, q)] = c(0.0, 0.0);
                a[(q, p)] = c(0.0, 0.0);
                a[(p, p)] = cr(a[(p, p)].re);
                a[(q, q)] = cr(a[(q, q)].re);
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * cr(co) + vkq * vqp;
                    v[(k, q)] = vkp * vpq + vkq * cr(co);
                }
            }
        }
    }
    let values: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    (values, v)
}

/// Exact exponential `exp(-i H t)` of a Hermitian matrix, via
/// eigendecomposition. The result is unitary up to roundoff.
pub fn expm_hermitian(h: &CMatrix, t: f64) -> Result<CMatrix> {
    let (values, vectors) = hermitian_eigen(h)?;
    let n = h.nrows();
    let mut phased = vectors.clone();
    for (j, &lam) in values.iter().enumerate() {
        let phase = Complex64::from_polar(1.0, -lam * t);
        for i in 0..n {
            phased[(i, j)] *= phase;
        }
    }
    Ok(phased * vectors.adjoint())
}

/// `U^n` by repeated squaring. `n = 0` gives the identity.
pub fn unitary_power(u: &CMatrix, n: u64) -> CMatrix {
    let dim = u.nrows();
    let mut result = identity(dim);
    let mut base = u.clone();
    let mut k = n;
    while k > 0 {
        if k & 1 == 1 {
            result = &result * &base;
        }
        k >>= 1;
        if k > 0 {
            base = &base * &base;
        }
    }
    result
}

/// Tolerance below which two cosine/sine eigenvalues are treated as one
/// cluster during unitary eigendecomposition.
const CLUSTER_TOL: f64 = 1e-8;

/// Eigendecomposition of a unitary matrix: `U v_l = exp(i E_l) v_l`.
///
/// Returns `(eigenphases, eigenvectors)` with `E_l = arg(lambda_l)` in
/// `(-pi, pi]`, eigenvector columns unit norm and orthonormal, each gauge
/// fixed so its largest-magnitude component is real positive. Phases are
/// sorted ascending.
///
/// Method: `C = (U + U^dag)/2` and `S = (U - U^dag)/(2i)` are commuting
/// Hermitian matrices with eigenvalues `cos E` and `sin E`. `C` is
/// diagonalized first; clusters of equal cosine (which merge `+E` with `-E`)
/// are then split by diagonalizing `S` restricted to the cluster subspace.
/// Phases are read off Rayleigh quotients as `atan2(sin, cos)`.
pub fn eig_unitary(u: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let n = u.nrows();
    let uerr = unitarity_error(u);
    if uerr > 1e-10 {
        return Err(CoreError::invariant(format!(
            "eig_unitary input not unitary: max |U^dag U - 1| = {uerr:.3e}"
        )));
    }
    let udag = u.adjoint();
    let cmat = (u + &udag).map(|z| z * 0.5);
    let smat = (u - &udag).map(|z| z * c(0.0, -0.5));

    let (cvals, mut vectors) = hermitian_eigen(&cmat)?;

    // Split clusters of (near-)equal cosine using S restricted to the cluster.
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && cvals[end] - cvals[end - 1] < CLUSTER_TOL {
            end += 1;
        }
        let m = end - start;
        if m > 1 {
            let sub = vectors.columns(start, m).into_owned();
            let s_sub = sub.adjoint() * &smat * &sub;
            // Symmetrize to clean up roundoff before the inner eigensolve.
            let s_sub = (&s_sub + s_sub.adjoint()).map(|z| z * 0.5);
            let (_, w) = hermitian_eigen(&s_sub)?;
            let rotated = sub * w;
            for j in 0..m {
                vectors.set_column(start + j, &rotated.column(j));
            }
        }
        start = end;
    }

    // Phases from Rayleigh quotients; exact for true eigenvectors.
    let mut pairs: Vec<(f64, usize)> = (0..n)
        .map(|j| {
            let v = vectors.column(j);
            let cq = (v.adjoint() * &cmat * v)[(0, 0)].re;
            let sq = (v.adjoint() * &smat * v)[(0, 0)].re;
            (sq.atan2(cq), j)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("NaN eigenphase"));

    let phases: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let mut sorted = CMatrix::zeros(n, n);
    for (dst, &(_, src)) in pairs.iter().enumerate() {
        sorted.set_column(dst, &vectors.column(src));
    }
    gauge_fix_columns(&mut sorted);

    let gerr = gram_error(&sorted);
    if gerr > 1e-8 {
        return Err(CoreError::EigenFailure {
            context: format!("eigenvector set not orthonormal: gram error {gerr:.3e}"),
        });
    }
    Ok((phases, sorted))
}

/// Fix the gauge of each column: the largest-magnitude component is made
/// real positive. Makes stored eigenvectors reproducible across runs and
/// eigensolver backends.
pub fn gauge_fix_columns(v: &mut CMatrix) {
    let (rows, cols) = v.shape();
    for j in 0..cols {
        let mut best = 0;
        let mut best_norm = 0.0;
        for i in 0..rows {
            let nrm = v[(i, j)].norm();
            if nrm > best_norm {
                best_norm = nrm;
                best = i;
            }
        }
        if best_norm > 0.0 {
            let phase = v[(best, j)] / best_norm;
            let correction = phase.conj();
            for i in 0..rows {
                v[(i, j)] *= correction;
            }
        }
        // Renormalize to absorb accumulated roundoff.
        let norm = v.column(j).norm();
        if norm > 0.0 {
            for i in 0..rows {
                v[(i, j)] /= cr(norm);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, rng: &mut impl Rng) -> CMatrix {
        let a = CMatrix::from_fn(n, n, |_, _| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
        (&a + a.adjoint()).map(|z| z * 0.5)
    }

    #[test]
    fn hermitian_eigen_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [2, 3, 8] {
            let h = random_hermitian(n, &mut rng);
            let (vals, vecs) = hermitian_eigen(&h).unwrap();
            let lam = CMatrix::from_fn(n, n, |i, j| if i == j { cr(vals[i]) } else { cr(0.0) });
            let rebuilt = &vecs * lam * vecs.adjoint();
            assert!(max_abs_diff(&rebuilt, &h) < 1e-12);
            assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn degenerate_spectrum_eigenvectors_are_invariant() {
        // Hermitian matrices with exactly paired eigenvalues are the case
        // where a QL-based solver can hand back orthonormal columns that are
        // not actually eigenvectors.  Conjugate diag(-s, -s, s, s) by a fixed
        // unitary and require a true invariant-subspace decomposition.
        let s = 1.368;
        let n = 4;
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for trial in 0..25 {
            let w = expm_hermitian(&random_hermitian(n, &mut rng), 1.0 + 0.1 * trial as f64)
                .unwrap();
            let d = CMatrix::from_fn(n, n, |i, j| {
                if i == j {
                    cr(if i < 2 { -s } else { s })
                } else {
                    cr(0.0)
                }
            });
            let h = &w * d * w.adjoint();
            let (vals, vecs) = hermitian_eigen(&h).unwrap();
            assert!(eigen_residual(&h, &vals, &vecs) < 1e-12 * s);
            assert!(gram_error(&vecs) < 1e-12);
            assert_relative_eq!(vals[0], -s, max_relative = 1e-12);
            assert_relative_eq!(vals[1], -s, max_relative = 1e-12);
            assert_relative_eq!(vals[2], s, max_relative = 1e-12);
            assert_relative_eq!(vals[3], s, max_relative = 1e-12);
        }
    }

    #[test]
    fn expm_hermitian_is_unitary_and_correct() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = random_hermitian(6, &mut rng);
        let u = expm_hermitian(&h, 0.37).unwrap();
        assert!(unitarity_error(&u) < 1e-12);
        // exp(-iH t1) exp(-iH t2) = exp(-iH (t1+t2))
        let u2 = expm_hermitian(&h, 0.63).unwrap();
        let u3 = expm_hermitian(&h, 1.0).unwrap();
        assert!(max_abs_diff(&(&u2 * &u), &u3) < 1e-12);
    }

    #[test]
    fn eig_unitary_recovers_known_phases() {
        // Diagonal unitary with prescribed phases, conjugated by a random
        // unitary built from a Hermitian exponential.
        let phases = [-2.9, -1.0, 0.0, 0.4, 1.3, 3.0];
        let n = phases.len();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = expm_hermitian(&random_hermitian(n, &mut rng), 1.0).unwrap();
        let d = CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::from_polar(1.0, phases[i])
            } else {
                cr(0.0)
            }
        });
        let u = &w * d * w.adjoint();
        let (found, vecs) = eig_unitary(&u).unwrap();
        let mut expected = phases.to_vec();
        expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (f, e) in found.iter().zip(expected.iter()) {
            assert_relative_eq!(f, e, epsilon = 1e-10);
        }
        // Eigenvalue equation holds per column.
        for (j, &ph) in found.iter().enumerate() {
            let v = vecs.column(j).into_owned();
            let lhs = &u * &v;
            let rhs = v.map(|z| z * Complex64::from_polar(1.0, ph));
            assert!((lhs - rhs).norm() < 1e-9);
        }
    }

    #[test]
    fn eig_unitary_splits_plus_minus_phase_pairs() {
        // cos(+E) = cos(-E): the two-stage split must separate them.
        let e = 0.8;
        let d = CMatrix::from_fn(2, 2, |i, j| {
            if i == j {
                Complex64::from_polar(1.0, if i == 0 { e } else { -e })
            } else {
                cr(0.0)
            }
        });
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = expm_hermitian(&random_hermitian(2, &mut rng), 1.0).unwrap();
        let u = &w * d * w.adjoint();
        let (found, _) = eig_unitary(&u).unwrap();
        assert_relative_eq!(found[0], -e, epsilon = 1e-10);
        assert_relative_eq!(found[1], e, epsilon = 1e-10);
    }

    #[test]
    fn eig_unitary_identity_gives_zero_phases() {
        let (phases, _) = eig_unitary(&identity(4)).unwrap();
        for p in phases {
            assert!(p.abs() < 1e-12);
        }
    }

    #[test]
    fn eig_unitary_phase_sum_matches_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..4 {
            let u = expm_hermitian(&random_hermitian(5, &mut rng), 1.0).unwrap();
            let (phases, _) = eig_unitary(&u).unwrap();
            let total: f64 = phases.iter().sum();
            let det_arg = determinant(&u).arg();
            let diff = (total - det_arg).rem_euclid(TWO_PI);
            let dist = diff.min(TWO_PI - diff);
            assert!(dist < 1e-8, "phase sum vs det arg distance {dist}");
        }
    }

    use crate::units::TWO_PI;

    #[test]
    fn unitary_power_matches_repeated_multiplication() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let u = expm_hermitian(&random_hermitian(4, &mut rng), 0.1).unwrap();
        let mut direct = identity(4);
        for _ in 0..13 {
            direct = &direct * &u;
        }
        assert!(max_abs_diff(&unitary_power(&u, 13), &direct) < 1e-12);
        assert!(max_abs_diff(&unitary_power(&u, 0), &identity(4)) < 1e-15);
    }

    #[test]
    fn gauge_fixing_makes_largest_component_real_positive() {
        let mut v = CMatrix::from_fn(3, 1, |i, _| match i {
            0 => c(0.1, 0.2),
            1 => c(-0.3, 0.8),
            _ => c(0.05, -0.1),
        });
        gauge_fix_columns(&mut v);
        let col = v.column(0);
        let largest = (0..3).max_by(|&i, &j| col[i].norm().total_cmp(&col[j].norm())).unwrap();
        assert!(col[largest].im.abs() < 1e-14);
        assert!(col[largest].re > 0.0);
        assert_relative_eq!(col.norm(), 1.0, epsilon = 1e-14);
    }
}
