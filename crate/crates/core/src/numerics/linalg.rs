use super::{CMat, CVec, C64};
use crate::error::{Error, Result};

/// Absolute tolerance on `|A - A^H|` for matrices treated as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;

fn check_hermitian(a: &CMat) -> Result<CMat> {
    let defect = a.hermitian_defect();
    if defect > HERMITIAN_TOL * a.frobenius_norm().max(1.0) {
        return Err(Error::NotHermitian(defect));
    }
    Ok(a.symmetrized())
}

/// Cyclic Jacobi sweep on a dense real symmetric matrix stored row-major.
/// Returns eigenvalues and the eigenvector matrix (columns).
fn jacobi_symmetric(mut m: Vec<f64>, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let scale: f64 = m.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[i * n + j] * m[i * n + j];
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let eig = (0..n).map(|i| m[i * n + i]).collect();
    (eig, v)
}

/// Largest eigenvalue of a Hermitian matrix and a unit eigenvector.
///
/// The Hermitian `n x n` problem is embedded as the real symmetric
/// `2n x 2n` matrix `[[Re A, -Im A], [Im A, Re A]]`, whose spectrum is that
/// of `A` with every eigenvalue doubled.
pub fn hermitian_largest_eigenpair(a: &CMat) -> Result<(f64, CVec)> {
    let a = check_hermitian(a)?;
    let n = a.rows();
    let m = 2 * n;
    let mut real = vec![0.0; m * m];
    for i in 0..n {
        for j in 0..n {
            let z = a.get(i, j);
            real[i * m + j] = z.re;
            real[i * m + j + n] = -z.im;
            real[(i + n) * m + j] = z.im;
            real[(i + n) * m + j + n] = z.re;
        }
    }
    let (eig, vecs) = jacobi_symmetric(real, m);
    let mut best = 0;
    for k in 1..m {
        if eig[k] > eig[best] {
            best = k;
        }
    }
    let entries: Vec<C64> = (0..n).map(|i| C64::new(vecs[i * m + best], vecs[(i + n) * m + best])).collect();
    let v = CVec::from_vec_unchecked(entries);
    let v = v.normalized().ok_or(Error::Singular)?.phase_normalized();
    Ok((eig[best], v))
}

/// Lower-triangular `L` with `B = L L^H` for Hermitian positive definite `B`.
pub fn cholesky(b: &CMat) -> Result<CMat> {
    let b = check_hermitian(b)?;
    let n = b.rows();
    let max_diag = (0..n).map(|i| b.get(i, i).re.abs()).fold(0.0, f64::max);
    let mut l = CMat::zeros(n, n);
    for j in 0..n {
        let mut d = b.get(j, j).re;
        for k in 0..j {
            d -= l.get(j, k).norm_sqr();
        }
        if !(d > 1e-13 * max_diag.max(f64::MIN_POSITIVE)) {
            return Err(Error::Singular);
        }
        let d = d.sqrt();
        l.set(j, j, C64::new(d, 0.0));
        for i in (j + 1)..n {
            let mut s = b.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k).conj();
            }
            l.set(i, j, s / d);
        }
    }
    Ok(l)
}

fn forward_solve(l: &CMat, rhs: &[C64]) -> Vec<C64> {
    let n = l.rows();
    let mut y = vec![C64::new(0.0, 0.0); n];
    for i in 0..n {
        let mut s = rhs[i];
        for k in 0..i {
            s -= l.get(i, k) * y[k];
        }
        y[i] = s / l.get(i, i);
    }
    y
}

/// Solves `L^H x = rhs`.
fn backward_solve_adjoint(l: &CMat, rhs: &[C64]) -> Vec<C64> {
    let n = l.rows();
    let mut x = vec![C64::new(0.0, 0.0); n];
    for i in (0..n).rev() {
        let mut s = rhs[i];
        for k in (i + 1)..n {
            s -= l.get(k, i).conj() * x[k];
        }
        x[i] = s / l.get(i, i).conj();
    }
    x
}

/// Solves `B x = rhs` for Hermitian positive definite `B`.
pub fn cholesky_solve(b: &CMat, rhs: &CVec) -> Result<CVec> {
    super::check_dims(b.rows(), rhs.dim())?;
    let l = cholesky(b)?;
    let y = forward_solve(&l, rhs.as_slice());
    Ok(CVec::from_vec_unchecked(backward_solve_adjoint(&l, &y)))
}

/// `max_{u != 0} (u^H A u) / (u^H B u)` and a unit maximiser.
///
/// Reduces to a standard Hermitian problem through the Cholesky factor of
/// `B`: with `B = L L^H` the maximiser is `L^{-H} y` where `y` is the
/// dominant eigenvector of `L^{-1} A L^{-H}`.
pub fn generalized_rayleigh_max(a: &CMat, b: &CMat) -> Result<(f64, CVec)> {
    super::check_dims(a.rows(), b.rows())?;
    let a = check_hermitian(a)?;
    let l = cholesky(b)?;
    let n = a.rows();
    // Z = L^{-1} A, column by column.
    let mut z = CMat::zeros(n, n);
    for j in 0..n {
        let col: Vec<C64> = (0..n).map(|i| a.get(i, j)).collect();
        for (i, v) in forward_solve(&l, &col).into_iter().enumerate() {
            z.set(i, j, v);
        }
    }
    // C = (L^{-1} Z^H)^H = L^{-1} A L^{-H}.
    let zh = z.adjoint();
    let mut c = CMat::zeros(n, n);
    for j in 0..n {
        let col: Vec<C64> = (0..n).map(|i| zh.get(i, j)).collect();
        for (i, v) in forward_solve(&l, &col).into_iter().enumerate() {
            c.set(j, i, v.conj());
        }
    }
    let (value, y) = hermitian_largest_eigenpair(&c.symmetrized())?;
    let u = CVec::from_vec_unchecked(backward_solve_adjoint(&l, y.as_slice()));
    let u = u.normalized().ok_or(Error::Singular)?.phase_normalized();
    Ok((value, u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{inner, sample_complex_gaussian, SeedSpec};

    fn quotient(a: &CMat, b: &CMat, u: &CVec) -> f64 {
        let num = inner(u, &a.mul_vec(u).unwrap()).unwrap().re;
        let den = inner(u, &b.mul_vec(u).unwrap()).unwrap().re;
        num / den
    }

    fn random_psd(n: usize, seed: u64) -> CMat {
        let g: Vec<CVec> = (0..n).map(|i| sample_complex_gaussian(n, SeedSpec::new(seed, i as u64))).collect();
        let g = CMat::from_rows(&g).unwrap();
        g.mul(&g.adjoint()).unwrap()
    }

    #[test]
    fn diagonal_pair() {
        let (v, u) = generalized_rayleigh_max(&CMat::diag(&[2.0, 1.0]), &CMat::identity(2)).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
        assert!((u[0].norm() - 1.0).abs() < 1e-12);
        assert!(u[1].norm() < 1e-12);
    }

    #[test]
    fn identity_pair() {
        let (v, u) = generalized_rayleigh_max(&CMat::identity(3), &CMat::identity(3)).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        assert!((u.norm2() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_hermitian_and_singular() {
        let a = CMat::from_real_rows(&[&[1.0, 2.0], &[0.0, 1.0]]).unwrap();
        assert!(matches!(generalized_rayleigh_max(&a, &CMat::identity(2)), Err(Error::NotHermitian(_))));
        let b = CMat::diag(&[1.0, 0.0]);
        assert!(matches!(generalized_rayleigh_max(&CMat::identity(2), &b), Err(Error::Singular)));
    }

    #[test]
    fn largest_eigenvalue_matches_characteristic_polynomial() {
        for seed in 0..50 {
            let a = random_psd(2, seed);
            let (p, q, s) = (a.get(0, 0).re, a.get(1, 1).re, a.get(0, 1).norm_sqr());
            let closed = 0.5 * (p + q) + (0.25 * (p - q) * (p - q) + s).sqrt();
            let (v, _) = generalized_rayleigh_max(&a, &CMat::identity(2)).unwrap();
            assert!((v - closed).abs() < 1e-10 * closed.max(1.0), "{v} vs {closed}");
        }
    }

    #[test]
    fn attained_quotient_equals_value() {
        for seed in 0..30 {
            let a = random_psd(4, seed);
            let b = random_psd(4, seed + 1000).add(&CMat::identity(4)).unwrap();
            let (v, u) = generalized_rayleigh_max(&a, &b).unwrap();
            assert!((quotient(&a, &b, &u) - v).abs() < 1e-9 * v.max(1.0));
        }
    }

    /// Dense grid over the unit sphere of C^2 (up to global phase):
    /// u = (cos t, e^{ip} sin t).
    #[test]
    fn matches_grid_search_on_two_dimensional_sphere() {
        for seed in 0..5 {
            let a = random_psd(2, 100 + seed);
            let b = random_psd(2, 200 + seed).add(&CMat::identity(2).scale_real(0.5)).unwrap();
            let (v, _) = generalized_rayleigh_max(&a, &b).unwrap();
            let mut best = f64::NEG_INFINITY;
            let steps = 400;
            for i in 0..=steps {
                let t = std::f64::consts::FRAC_PI_2 * i as f64 / steps as f64;
                for j in 0..steps {
                    let p = 2.0 * std::f64::consts::PI * j as f64 / steps as f64;
                    let u = CVec::new(vec![C64::new(t.cos(), 0.0), C64::from_polar(t.sin(), p)]).unwrap();
                    best = best.max(quotient(&a, &b, &u));
                }
            }
            assert!(v >= best - 1e-12);
            assert!((v - best).abs() < 1e-3 * v.max(1.0), "value {v} grid {best}");
        }
    }

    #[test]
    fn cholesky_solve_round_trip() {
        let b = random_psd(3, 7).add(&CMat::identity(3)).unwrap();
        let x = sample_complex_gaussian(3, SeedSpec::new(9, 9));
        let rhs = b.mul_vec(&x).unwrap();
        let back = cholesky_solve(&b, &rhs).unwrap();
        assert!(back.sub(&x).unwrap().norm2() < 1e-10);
    }
}
