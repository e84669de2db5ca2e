//! Restarted GMRES for matrix-free complex operators.

use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovOutcome {
    pub iterations: usize,
    /// Final `|b - A x| / |b|` (true residual, recomputed at the end).
    pub relative_residual: f64,
    pub converged: bool,
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    // conj(a) . b
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Solves `A x = b` starting from `x`, stopping at relative residual `tol`
/// or after `max_iter` inner iterations in total.
pub fn gmres<A: Fn(&[Complex64], &mut [Complex64])>(
    apply: A,
    b: &[Complex64],
    x: &mut [Complex64],
    restart: usize,
    tol: f64,
    max_iter: usize,
) -> KrylovOutcome {
    let n = b.len();
    let b_norm = norm(b);
    let zero = Complex64::new(0.0, 0.0);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = zero);
        return KrylovOutcome {
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        };
    }
    let restart = restart.max(1);
    let mut total = 0;
    let mut r = vec![zero; n];
    let mut ax = vec![zero; n];
    loop {
        apply(x, &mut ax);
        for i in 0..n {
            r[i] = b[i] - ax[i];
        }
        let beta = norm(&r);
        let rel = beta / b_norm;
        if rel <= tol || total >= max_iter {
            return KrylovOutcome {
                iterations: total,
                relative_residual: rel,
                converged: rel <= tol,
            };
        }
        let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(restart + 1);
        basis.push(r.iter().map(|v| v / beta).collect());
        // Hessenberg columns, Givens rotations, rotated rhs
        let mut hess: Vec<Vec<Complex64>> = Vec::with_capacity(restart);
        let mut cs: Vec<f64> = Vec::with_capacity(restart);
        let mut sn: Vec<Complex64> = Vec::with_capacity(restart);
        let mut g = vec![zero; restart + 1];
        g[0] = Complex64::new(beta, 0.0);
        let mut steps = 0;
        for j in 0..restart {
            let mut w = vec![zero; n];
            apply(&basis[j], &mut w);
            total += 1;
            let mut col = vec![zero; j + 2];
            // modified Gram-Schmidt, applied twice for stability
            for _ in 0..2 {
                for (i, v) in basis.iter().enumerate() {
                    let hij = dot(v, &w);
                    col[i] += hij;
                    for (wk, vk) in w.iter_mut().zip(v) {
                        *wk -= hij * vk;
                    }
                }
            }
            let wn = norm(&w);
            col[j + 1] = Complex64::new(wn, 0.0);
            for i in 0..j {
                let t = cs[i] * col[i] + sn[i] * col[i + 1];
                col[i + 1] = -sn[i].conj() * col[i] + cs[i] * col[i + 1];
                col[i] = t;
            }
            // new rotation eliminating col[j+1]
            let a = col[j];
            let bb = col[j + 1];
            let denom = (a.norm_sqr() + bb.norm_sqr()).sqrt();
            let (c, s) = if denom == 0.0 {
                (1.0, zero)
            } else if a.norm() == 0.0 {
                (0.0, Complex64::new(1.0, 0.0))
            } else {
                let c = a.norm() / denom;
                (c, (a / a.norm()) * bb.conj() / denom)
            };
            col[j] = c * a + s * bb;
            col[j + 1] = zero;
            g[j + 1] = -s.conj() * g[j];
            g[j] *= c;
            cs.push(c);
            sn.push(s);
            hess.push(col);
            steps = j + 1;
            let est = g[j + 1].norm() / b_norm;
            if est <= tol || total >= max_iter || wn == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / wn).collect());
        }
        // back substitution for the update coefficients
        let mut yv = vec![zero; steps];
        for i in (0..steps).rev() {
            let mut s = g[i];
            for l in i + 1..steps {
                s -= hess[l][i] * yv[l];
            }
            yv[i] = s / hess[i][i];
        }
        for (l, coef) in yv.iter().enumerate() {
            for (xi, vi) in x.iter_mut().zip(&basis[l]) {
                *xi += coef * vi;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn solves_dense_nonsymmetric_system() {
        let n = 40;
        let a: Vec<Vec<Complex64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let base = c(((i * 7 + j * 3) % 11) as f64 / 50.0, ((i + 2 * j) % 5) as f64 / 40.0);
                        if i == j {
                            base + c(2.0, 0.5)
                        } else {
                            base
                        }
                    })
                    .collect()
            })
            .collect();
        let truth: Vec<Complex64> = (0..n).map(|i| c(i as f64, 1.0 - i as f64 * 0.1)).collect();
        let b: Vec<Complex64> = a
            .iter()
            .map(|row| row.iter().zip(&truth).map(|(p, q)| p * q).sum())
            .collect();
        let op = |v: &[Complex64], out: &mut [Complex64]| {
            for (o, row) in out.iter_mut().zip(&a) {
                *o = row.iter().zip(v).map(|(p, q)| p * q).sum();
            }
        };
        for restart in [5, 50] {
            let mut x = vec![c(0.0, 0.0); n];
            let out = gmres(op, &b, &mut x, restart, 1e-12, 2000);
            assert!(out.converged, "restart {restart}");
            let err: f64 = x.iter().zip(&truth).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
            assert!(err < 1e-9, "restart {restart}: {err}");
        }
    }

    #[test]
    fn zero_rhs_and_cap() {
        let id = |v: &[Complex64], out: &mut [Complex64]| out.copy_from_slice(v);
        let mut x = vec![c(1.0, 1.0); 3];
        let out = gmres(id, &[c(0.0, 0.0); 3], &mut x, 10, 1e-10, 10);
        assert_eq!(out.iterations, 0);
        assert!(x.iter().all(|v| *v == c(0.0, 0.0)));
        // a rotation needs n steps; cap at 1 does not converge
        let shift = |v: &[Complex64], out: &mut [Complex64]| {
            let n = v.len();
            for i in 0..n {
                out[i] = v[(i + 1) % n];
            }
        };
        let mut x = vec![c(0.0, 0.0); 6];
        let mut b = vec![c(0.0, 0.0); 6];
        b[0] = c(1.0, 0.0);
        let out = gmres(shift, &b, &mut x, 50, 1e-10, 1);
        assert!(!out.converged);
    }
}
