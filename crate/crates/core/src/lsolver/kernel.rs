//! Cell-integrated Helmholtz kernel and its FFT-based Toeplitz convolution.
//!
//! `W(m) = int_{cell m} Phi(0, y) dy` for the cell offset `m h` from a
//! collocation centre. Writing `Phi = div(y g(|y|))` turns each cell integral
//! into a sum of smooth edge/face integrals, which handles the singular and
//! nearly singular cells; distant cells use a tensor Gauss rule.

use crate::quad::gauss_legendre;
use crate::specfun::{green_2d, green_3d, hankel1_over_arg_regular};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

/// Cells with `max |m_i|` up to this use the boundary formula.
const NEAR_RANGE: usize = 3;
const EDGE_NODES: usize = 24;
const FACE_NODES: usize = 16;
const FAR_NODES: usize = 3;

/// `g` with `div(y g(|y|)) = Phi(|y|)` in 2D.
fn flux_2d(k: f64, r: f64) -> Complex64 {
    Complex64::new(0.0, 0.25) * hankel1_over_arg_regular(k * r)
}

/// `int_0^1 t e^{i a t} dt`.
fn t_exp_moment(a: f64) -> Complex64 {
    if a.abs() < 0.5 {
        // sum (ia)^j / (j! (j+2))
        let ia = Complex64::new(0.0, a);
        let mut term = Complex64::new(1.0, 0.0);
        let mut sum = Complex64::new(0.5, 0.0);
        for j in 1..30 {
            term *= ia / j as f64;
            sum += term / (j + 2) as f64;
        }
        return sum;
    }
    let e = Complex64::from_polar(1.0, a);
    e / Complex64::new(0.0, a) + (e - 1.0) / (a * a)
}

/// `g` with `div(y g(|y|)) = Phi(|y|)` in 3D.
fn flux_3d(k: f64, r: f64) -> Complex64 {
    t_exp_moment(k * r) / (4.0 * PI * r)
}

/// Boundary formula for the cell centred at `c` (side `h`) in 2D.
fn cell_boundary_2d(k: f64, c: [f64; 2], h: f64, rule: &(Vec<f64>, Vec<f64>)) -> Complex64 {
    let half = 0.5 * h;
    let mut total = Complex64::new(0.0, 0.0);
    for axis in 0..2 {
        let other = 1 - axis;
        for side in [-1.0, 1.0] {
            // edge where y_axis = c_axis + side*half, outward normal side*e_axis
            let fixed = c[axis] + side * half;
            let mut edge = Complex64::new(0.0, 0.0);
            for (t, w) in rule.0.iter().zip(&rule.1) {
                let s = c[other] + half * t;
                let r = fixed.hypot(s);
                edge += flux_2d(k, r) * (*w);
            }
            total += edge * (side * fixed * half);
        }
    }
    total
}

fn cell_boundary_3d(k: f64, c: [f64; 3], h: f64, rule: &(Vec<f64>, Vec<f64>)) -> Complex64 {
    let half = 0.5 * h;
    let mut total = Complex64::new(0.0, 0.0);
    for axis in 0..3 {
        let (o1, o2) = ((axis + 1) % 3, (axis + 2) % 3);
        for side in [-1.0, 1.0] {
            let fixed = c[axis] + side * half;
            let mut face = Complex64::new(0.0, 0.0);
            for (t1, w1) in rule.0.iter().zip(&rule.1) {
                let s1 = c[o1] + half * t1;
                for (t2, w2) in rule.0.iter().zip(&rule.1) {
                    let s2 = c[o2] + half * t2;
                    let r = (fixed * fixed + s1 * s1 + s2 * s2).sqrt();
                    face += flux_3d(k, r) * (w1 * w2);
                }
            }
            total += face * (side * fixed * half * half);
        }
    }
    total
}

fn cell_gauss(dim: usize, k: f64, c: &[f64], h: f64, rule: &(Vec<f64>, Vec<f64>)) -> Complex64 {
    let half = 0.5 * h;
    let mut total = Complex64::new(0.0, 0.0);
    let q = rule.0.len();
    let count = q.pow(dim as u32);
    for idx in 0..count {
        let mut r = idx;
        let mut w = half.powi(dim as i32);
        let mut d2 = 0.0;
        for ca in c.iter().take(dim) {
            let j = r % q;
            r /= q;
            let y = ca + half * rule.0[j];
            d2 += y * y;
            w *= rule.1[j];
        }
        let d = d2.sqrt();
        total += w * if dim == 2 { green_2d(k, d) } else { green_3d(k, d) };
    }
    total
}

/// `int_{cell} Phi(0, y) dy` for the cell at integer offset `m`.
pub fn cell_kernel(dim: usize, k: f64, h: f64, m: &[i64]) -> Complex64 {
    let c: Vec<f64> = m.iter().map(|&v| v as f64 * h).collect();
    let near = m.iter().all(|v| v.unsigned_abs() as usize <= NEAR_RANGE);
    if near {
        if dim == 2 {
            cell_boundary_2d(k, [c[0], c[1]], h, &gauss_legendre(EDGE_NODES))
        } else {
            cell_boundary_3d(k, [c[0], c[1], c[2]], h, &gauss_legendre(FACE_NODES))
        }
    } else {
        cell_gauss(dim, k, &c, h, &gauss_legendre(FAR_NODES))
    }
}

/// Kernel table over nonnegative offsets `0..=max_offset` per axis, using
/// the symmetry under coordinate permutations and sign flips.
fn kernel_table(dim: usize, k: f64, h: f64, extent: usize) -> Vec<Complex64> {
    let near_edge = gauss_legendre(EDGE_NODES);
    let near_face = gauss_legendre(FACE_NODES);
    let far = gauss_legendre(FAR_NODES);
    let eval = |m: &[usize]| -> Complex64 {
        let c: Vec<f64> = m.iter().map(|&v| v as f64 * h).collect();
        if m.iter().all(|&v| v <= NEAR_RANGE) {
            if dim == 2 {
                cell_boundary_2d(k, [c[0], c[1]], h, &near_edge)
            } else {
                cell_boundary_3d(k, [c[0], c[1], c[2]], h, &near_face)
            }
        } else {
            cell_gauss(dim, k, &c, h, &far)
        }
    };
    let n = extent;
    let total = n.pow(dim as u32);
    // sorted offsets m_0 >= m_1 (>= m_2) are computed, the rest copied
    let sorted: Vec<Vec<usize>> = (0..total)
        .filter_map(|lin| {
            let mut r = lin;
            let mut m = vec![0; dim];
            for a in (0..dim).rev() {
                m[a] = r % n;
                r /= n;
            }
            m.windows(2).all(|w| w[0] >= w[1]).then_some(m)
        })
        .collect();
    let values: Vec<Complex64> = sorted.par_iter().map(|m| eval(m)).collect();
    let mut table = vec![Complex64::new(0.0, 0.0); total];
    let lin_of = |m: &[usize]| m.iter().fold(0, |acc, &v| acc * n + v);
    for (m, v) in sorted.iter().zip(values) {
        for perm in permutations(m) {
            table[lin_of(&perm)] = v;
        }
    }
    table
}

fn permutations(m: &[usize]) -> Vec<Vec<usize>> {
    match m.len() {
        2 => vec![vec![m[0], m[1]], vec![m[1], m[0]]],
        _ => vec![
            vec![m[0], m[1], m[2]],
            vec![m[0], m[2], m[1]],
            vec![m[1], m[0], m[2]],
            vec![m[1], m[2], m[0]],
            vec![m[2], m[0], m[1]],
            vec![m[2], m[1], m[0]],
        ],
    }
}

/// Multidimensional complex FFT on a row-major array.
pub(crate) struct NdFft {
    shape: Vec<usize>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl NdFft {
    pub fn new(shape: &[usize]) -> Self {
        let mut planner = FftPlanner::new();
        NdFft {
            shape: shape.to_vec(),
            forward: shape.iter().map(|&n| planner.plan_fft_forward(n)).collect(),
            inverse: shape.iter().map(|&n| planner.plan_fft_inverse(n)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    /// Unnormalized transform; `inverse` applies the conjugate kernel.
    pub fn process(&self, data: &mut [Complex64], inverse: bool) {
        let dim = self.shape.len();
        for axis in 0..dim {
            let plan = if inverse {
                &self.inverse[axis]
            } else {
                &self.forward[axis]
            };
            let n = self.shape[axis];
            let inner: usize = self.shape[axis + 1..].iter().product();
            if inner == 1 {
                data.par_chunks_mut(n * 64).for_each(|chunk| plan.process(chunk));
                continue;
            }
            // lines along `axis`: gather each (outer, inner) slab into columns
            let slab = n * inner;
            data.par_chunks_mut(slab).for_each(|block| {
                let mut buf = vec![Complex64::new(0.0, 0.0); slab];
                // transpose block (n x inner) -> (inner x n)
                for i in 0..n {
                    for j in 0..inner {
                        buf[j * n + i] = block[i * inner + j];
                    }
                }
                plan.process(&mut buf);
                for i in 0..n {
                    for j in 0..inner {
                        block[i * inner + j] = buf[j * n + i];
                    }
                }
            });
        }
    }
}

/// Toeplitz convolution with the cell kernel on a fixed grid shape,
/// embedded in a circulant of size `padded >= 2n - 1` per axis.
pub struct KernelConvolution {
    dim: usize,
    shape: Vec<usize>,
    padded: Vec<usize>,
    fft: NdFft,
    symbol: Vec<Complex64>,
}

impl KernelConvolution {
    pub fn new(k: f64, h: f64, shape: &[usize], padded: &[usize]) -> Self {
        let dim = shape.len();
        assert!(
            padded.iter().zip(shape).all(|(p, n)| *p + 1 >= 2 * n),
            "padding must cover the full offset range"
        );
        let extent = *shape.iter().max().expect("nonempty shape");
        let table = kernel_table(dim, k, h, extent);
        let total: usize = padded.iter().product();
        let mut circ = vec![Complex64::new(0.0, 0.0); total];
        for (lin, c) in circ.iter_mut().enumerate() {
            let mut r = lin;
            let mut src = 0;
            let mut inside = true;
            let mut idx = vec![0usize; dim];
            for a in (0..dim).rev() {
                idx[a] = r % padded[a];
                r /= padded[a];
            }
            for a in 0..dim {
                let p = idx[a];
                // offset p or p - padded; keep |offset| < shape[a]
                let off = if p < shape[a] {
                    p
                } else if padded[a] - p < shape[a] {
                    padded[a] - p
                } else {
                    inside = false;
                    0
                };
                src = src * extent + off;
            }
            if inside {
                *c = table[src];
            }
        }
        let fft = NdFft::new(padded);
        fft.process(&mut circ, false);
        let scale = 1.0 / total as f64;
        for c in circ.iter_mut() {
            *c *= scale;
        }
        KernelConvolution {
            dim,
            shape: shape.to_vec(),
            padded: padded.to_vec(),
            fft,
            symbol: circ,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn padded_shape(&self) -> &[usize] {
        &self.padded
    }

    /// `out_i = sum_j W(i - j) f_j`.
    pub fn apply(&self, f: &[Complex64], out: &mut [Complex64]) {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.fft.len()];
        self.scatter(f, &mut buf);
        self.fft.process(&mut buf, false);
        buf.par_iter_mut()
            .zip(self.symbol.par_iter())
            .for_each(|(b, s)| *b *= s);
        self.fft.process(&mut buf, true);
        self.gather(&buf, out);
    }

    fn scatter(&self, f: &[Complex64], buf: &mut [Complex64]) {
        let n_last = self.shape[self.dim - 1];
        let p_last = self.padded[self.dim - 1];
        let rows = f.len() / n_last;
        for row in 0..rows {
            let dst = self.padded_row_start(row);
            buf[dst..dst + n_last].copy_from_slice(&f[row * n_last..(row + 1) * n_last]);
        }
        let _ = p_last;
    }

    fn gather(&self, buf: &[Complex64], out: &mut [Complex64]) {
        let n_last = self.shape[self.dim - 1];
        let rows = out.len() / n_last;
        for row in 0..rows {
            let src = self.padded_row_start(row);
            out[row * n_last..(row + 1) * n_last].copy_from_slice(&buf[src..src + n_last]);
        }
    }

    /// Offset in the padded array of the start of grid row `row`.
    fn padded_row_start(&self, row: usize) -> usize {
        let mut r = row;
        let mut idx = vec![0; self.dim - 1];
        for a in (0..self.dim - 1).rev() {
            idx[a] = r % self.shape[a];
            r /= self.shape[a];
        }
        let mut lin = 0;
        for a in 0..self.dim - 1 {
            lin = lin * self.padded[a] + idx[a];
        }
        lin * self.padded[self.dim - 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate_adaptive;

    #[test]
    fn moment_series_matches_closed_form() {
        for a in [0.49, 0.51, 1e-3] {
            let series = {
                let ia = Complex64::new(0.0, a);
                let mut term = Complex64::new(1.0, 0.0);
                let mut s = Complex64::new(0.5, 0.0);
                for j in 1..40 {
                    term *= ia / j as f64;
                    s += term / (j + 2) as f64;
                }
                s
            };
            let e = Complex64::from_polar(1.0, a);
            let closed = e / Complex64::new(0.0, a) + (e - 1.0) / (a * a);
            let tol = if a < 0.01 { 1e-7 } else { 1e-13 };
            assert!((series - closed).norm() < tol, "a={a}");
            assert!((t_exp_moment(a) - series).norm() < 1e-13);
        }
    }

    /// Brute-force cell integral by nested adaptive quadrature in polar
    /// coordinates around the singularity (2D, centre cell).
    #[test]
    fn centre_cell_2d_matches_polar_quadrature() {
        let k = 3.0;
        let h = 0.1;
        let half = 0.05;
        // by symmetry: 8 times the triangle 0 <= theta <= pi/4, r <= half/cos(theta)
        let value = integrate_adaptive(
            |theta| {
                let rmax = half / theta.cos();
                integrate_adaptive(|r| green_2d(k, r) * r, 0.0, rmax, 1e-12, 0.0)
            },
            0.0,
            PI / 4.0,
            1e-12,
            0.0,
        ) * 8.0;
        let w = cell_kernel(2, k, h, &[0, 0]);
        assert!((w - value).norm() < 1e-10 * value.norm(), "{w} vs {value}");
    }

    #[test]
    fn centre_cell_3d_matches_pyramid_quadrature() {
        let k = 2.0;
        let h = 0.2;
        let a = 0.1;
        // six pyramids over the faces; radial integral in closed form
        let radial = |r: f64| {
            let ik = Complex64::new(0.0, k);
            (Complex64::from_polar(1.0, k * r) * (r / ik + 1.0 / (k * k)) - 1.0 / (k * k)) / (4.0 * PI)
        };
        let value = integrate_adaptive(
            |s| {
                integrate_adaptive(
                    |t| {
                        let rho = (a * a + s * s + t * t).sqrt();
                        radial(rho) * (a / rho.powi(3))
                    },
                    -a,
                    a,
                    1e-13,
                    0.0,
                )
            },
            -a,
            a,
            1e-13,
            0.0,
        ) * 6.0;
        let w = cell_kernel(3, k, h, &[0, 0, 0]);
        assert!((w - value).norm() < 1e-10 * value.norm(), "{w} vs {value}");
    }

    #[test]
    fn neighbour_cell_2d_matches_cartesian_quadrature() {
        let k = 4.0;
        let h = 0.1;
        let value = integrate_adaptive(
            |x| integrate_adaptive(|y| green_2d(k, x.hypot(y)), -0.05, 0.05, 1e-13, 0.0),
            0.05,
            0.15,
            1e-13,
            0.0,
        );
        let w = cell_kernel(2, k, h, &[1, 0]);
        assert!((w - value).norm() < 1e-10 * value.norm(), "{w} vs {value}");
    }

    #[test]
    fn near_and_far_rules_agree_at_handover() {
        for dim in [2usize, 3] {
            let k = 2.5;
            let h = 0.05;
            let m: Vec<i64> = vec![4; dim];
            let c: Vec<f64> = m.iter().map(|&v| v as f64 * h).collect();
            let far = cell_gauss(dim, k, &c, h, &gauss_legendre(FAR_NODES));
            let fine = cell_gauss(dim, k, &c, h, &gauss_legendre(12));
            let boundary = if dim == 2 {
                cell_boundary_2d(k, [c[0], c[1]], h, &gauss_legendre(EDGE_NODES))
            } else {
                cell_boundary_3d(k, [c[0], c[1], c[2]], h, &gauss_legendre(FACE_NODES))
            };
            assert!((boundary - fine).norm() < 1e-10 * fine.norm(), "dim {dim}");
            assert!((far - fine).norm() < 1e-5 * fine.norm(), "dim {dim}");
        }
    }

    #[test]
    fn fft_convolution_matches_direct_sum() {
        for shape in [vec![5usize, 7], vec![3, 4, 5]] {
            let dim = shape.len();
            let padded: Vec<usize> = shape.iter().map(|n| 2 * n).collect();
            let k = 1.7;
            let h = 0.1;
            let conv = KernelConvolution::new(k, h, &shape, &padded);
            let total: usize = shape.iter().product();
            let f: Vec<Complex64> = (0..total)
                .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
                .collect();
            let mut out = vec![Complex64::new(0.0, 0.0); total];
            conv.apply(&f, &mut out);
            let unravel = |mut lin: usize| {
                let mut idx = vec![0i64; dim];
                for a in (0..dim).rev() {
                    idx[a] = (lin % shape[a]) as i64;
                    lin /= shape[a];
                }
                idx
            };
            for i in 0..total {
                let ii = unravel(i);
                let mut direct = Complex64::new(0.0, 0.0);
                for j in 0..total {
                    let jj = unravel(j);
                    let m: Vec<i64> = ii.iter().zip(&jj).map(|(a, b)| a - b).collect();
                    direct += cell_kernel(dim, k, h, &m) * f[j];
                }
                assert!((direct - out[i]).norm() < 1e-12 * (1.0 + direct.norm()));
            }
        }
    }
}
