//! Matrix-free preconditioned conjugate gradients.

/// Outcome of a CG solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOutcome {
    pub iterations: usize,
    /// `‖b − Ax‖₂ / ‖b‖₂` at exit (0 when `b = 0`).
    pub relative_residual: f64,
    pub converged: bool,
}

/// Settings shared by every call of [`pcg`].
#[derive(Debug, Clone, Copy)]
pub struct CgSettings<'a> {
    pub tol: f64,
    pub max_iter: usize,
    /// Inverse diagonal for Jacobi preconditioning.
    pub inv_diag: Option<&'a [f64]>,
    /// Restrict the iteration to vectors with zero Euclidean sum, for
    /// operators whose null space is the constants.
    pub deflate_constants: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn remove_mean(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

/// Solves `A x = b` for symmetric positive (semi-)definite `A`, starting from
/// the contents of `x`. `apply(v, out)` must write `A v` into `out`.
pub fn pcg<F>(mut apply: F, b: &[f64], x: &mut [f64], settings: CgSettings<'_>) -> CgOutcome
where
    F: FnMut(&[f64], &mut [f64]),
{
    let n = b.len();
    debug_assert_eq!(x.len(), n);
    let mut rhs = b.to_vec();
    if settings.deflate_constants {
        remove_mean(&mut rhs);
        remove_mean(x);
    }
    let b_norm = dot(&rhs, &rhs).sqrt();
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return CgOutcome {
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        };
    }

    let mut r = vec![0.0; n];
    let mut ap = vec![0.0; n];
    apply(x, &mut ap);
    for k in 0..n {
        r[k] = rhs[k] - ap[k];
    }
    let precondition = |r: &[f64], z: &mut [f64]| {
        match settings.inv_diag {
            Some(d) => z
                .iter_mut()
                .zip(r)
                .zip(d)
                .for_each(|((z, r), d)| *z = r * d),
            None => z.copy_from_slice(r),
        }
        if settings.deflate_constants {
            remove_mean(z);
        }
    };
    if settings.deflate_constants {
        remove_mean(&mut r);
    }
    let mut z = vec![0.0; n];
    precondition(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut res = dot(&r, &r).sqrt() / b_norm;

    let mut it = 0;
    while res > settings.tol && it < settings.max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let alpha = rz / pap;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        if settings.deflate_constants {
            remove_mean(&mut r);
        }
        precondition(&r, &mut z);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
        res = dot(&r, &r).sqrt() / b_norm;
        it += 1;
    }
    CgOutcome {
        iterations: it,
        relative_residual: res,
        converged: res <= settings.tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 1-D Dirichlet Laplacian tridiag(-1, 2, -1).
    fn lap1d(v: &[f64], out: &mut [f64]) {
        let n = v.len();
        for i in 0..n {
            let left = if i > 0 { v[i - 1] } else { 0.0 };
            let right = if i + 1 < n { v[i + 1] } else { 0.0 };
            out[i] = 2.0 * v[i] - left - right;
        }
    }

    #[test]
    fn solves_tridiagonal_system() {
        let n = 50;
        let exact: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let mut b = vec![0.0; n];
        lap1d(&exact, &mut b);
        let mut x = vec![0.0; n];
        let out = pcg(
            lap1d,
            &b,
            &mut x,
            CgSettings {
                tol: 1e-12,
                max_iter: 200,
                inv_diag: None,
                deflate_constants: false,
            },
        );
        assert!(out.converged);
        for (a, e) in x.iter().zip(&exact) {
            assert!((a - e).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let mut x = vec![1.0; 5];
        let out = pcg(
            lap1d,
            &[0.0; 5],
            &mut x,
            CgSettings {
                tol: 1e-12,
                max_iter: 10,
                inv_diag: None,
                deflate_constants: false,
            },
        );
        assert_eq!(out.iterations, 0);
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn singular_neumann_chain_with_deflation() {
        // 1-D Neumann Laplacian: null space = constants
        let apply = |v: &[f64], out: &mut [f64]| {
            let n = v.len();
            for i in 0..n {
                let mut s = 0.0;
                if i > 0 {
                    s += v[i] - v[i - 1];
                }
                if i + 1 < n {
                    s += v[i] - v[i + 1];
                }
                out[i] = s;
            }
        };
        let n = 40;
        let mut b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.2).cos()).collect();
        remove_mean(&mut b);
        let mut x = vec![0.0; n];
        let out = pcg(
            apply,
            &b,
            &mut x,
            CgSettings {
                tol: 1e-12,
                max_iter: 400,
                inv_diag: None,
                deflate_constants: true,
            },
        );
        assert!(out.converged);
        let mut check = vec![0.0; n];
        apply(&x, &mut check);
        for (c, bb) in check.iter().zip(&b) {
            assert!((c - bb).abs() < 1e-9);
        }
        assert!(x.iter().sum::<f64>().abs() < 1e-10);
    }
}
