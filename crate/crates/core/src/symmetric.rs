//! Smooth symmetric functions of eigenvalues and the second derivative of
//! the induced matrix function.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Relative eigenvalue gap below which difference quotients are replaced by
/// their coincident-eigenvalue limit.
pub const GAP_TOLERANCE: f64 = 1e-7;

/// A smooth symmetric function `g` of `n` eigenvalues.
///
/// Arguments are slices in ascending order. Implementations do not check
/// cone membership; callers are expected to have done so.
pub trait SymmetricFunction: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, z: &[f64]) -> f64;

    fn gradient(&self, z: &[f64]) -> Vec<f64>;

    fn hessian(&self, z: &[f64]) -> DMatrix<f64>;

    /// Whether `(ġⁱ − ġʲ)/(zᵢ − zⱼ)` may be replaced by `g̈ⁱⁱ − g̈ⁱʲ` when
    /// `zᵢ ≈ zⱼ`. True whenever the Hessian is exact.
    fn has_limit_rule(&self) -> bool {
        true
    }
}

impl<T: SymmetricFunction + ?Sized> SymmetricFunction for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, z: &[f64]) -> f64 {
        (**self).value(z)
    }
    fn gradient(&self, z: &[f64]) -> Vec<f64> {
        (**self).gradient(z)
    }
    fn hessian(&self, z: &[f64]) -> DMatrix<f64> {
        (**self).hessian(z)
    }
    fn has_limit_rule(&self) -> bool {
        (**self).has_limit_rule()
    }
}

fn norm(z: &[f64]) -> f64 {
    z.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// The matrix `Qᵢⱼ = (ġⁱ − ġʲ)/(zᵢ − zⱼ)` for `i ≠ j` (zero diagonal).
pub fn difference_quotients<G: SymmetricFunction + ?Sized>(
    g: &G,
    z: &[f64],
    grad: &[f64],
    hess: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let n = z.len();
    let scale = norm(z);
    let mut q = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..i {
            let gap = z[i] - z[j];
            let value = if gap.abs() < GAP_TOLERANCE * scale {
                if !g.has_limit_rule() {
                    return Err(Error::DegenerateEigenvalues { i, j, gap });
                }
                0.5 * (hess[(i, i)] + hess[(j, j)]) - hess[(i, j)]
            } else {
                (grad[i] - grad[j]) / gap
            };
            q[(i, j)] = value;
            q[(j, i)] = value;
        }
    }
    Ok(q)
}

/// `g̈^{ij,kl}(diag z) V_ij V_kl` from the eigenvalue Hessian and the
/// difference quotients.
pub fn form_from_parts(hess: &DMatrix<f64>, quotients: &DMatrix<f64>, v: &DMatrix<f64>) -> f64 {
    let n = hess.nrows();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            total += hess[(i, j)] * v[(i, i)] * v[(j, j)];
        }
    }
    for i in 0..n {
        for j in 0..i {
            total += 2.0 * quotients[(i, j)] * v[(i, j)] * v[(i, j)];
        }
    }
    total
}

/// Second derivative of the matrix function `g` at `diag(z)` in direction `V`.
pub fn second_derivative_form<G: SymmetricFunction + ?Sized>(g: &G, z: &[f64], v: &DMatrix<f64>) -> Result<f64> {
    let grad = g.gradient(z);
    let hess = g.hessian(z);
    let q = difference_quotients(g, z, &grad, &hess)?;
    Ok(form_from_parts(&hess, &q, v))
}

/// Five-point central-difference gradient with step `h·|z|`.
pub fn fd_gradient(f: &dyn Fn(&[f64]) -> f64, z: &[f64], h: f64) -> Vec<f64> {
    let step = h * norm(z).max(f64::MIN_POSITIVE);
    let mut w = z.to_vec();
    (0..z.len())
        .map(|i| {
            let at = |w: &mut Vec<f64>, d: f64| {
                w[i] = z[i] + d;
                let v = f(w);
                w[i] = z[i];
                v
            };
            let fp2 = at(&mut w, 2.0 * step);
            let fp1 = at(&mut w, step);
            let fm1 = at(&mut w, -step);
            let fm2 = at(&mut w, -2.0 * step);
            (-fp2 + 8.0 * fp1 - 8.0 * fm1 + fm2) / (12.0 * step)
        })
        .collect()
}

/// Five-point central-difference Hessian with step `h·|z|`.
pub fn fd_hessian(f: &dyn Fn(&[f64]) -> f64, z: &[f64], h: f64) -> DMatrix<f64> {
    let n = z.len();
    let step = h * norm(z).max(f64::MIN_POSITIVE);
    let mut out = DMatrix::zeros(n, n);
    let eval = |di: (usize, f64), dj: (usize, f64)| {
        let mut w = z.to_vec();
        w[di.0] += di.1;
        w[dj.0] += dj.1;
        f(&w)
    };
    for i in 0..n {
        let f0 = f(z);
        let d2 = (-eval((i, 2.0 * step), (i, 0.0)) + 16.0 * eval((i, step), (i, 0.0)) - 30.0 * f0
            + 16.0 * eval((i, -step), (i, 0.0))
            - eval((i, -2.0 * step), (i, 0.0)))
            / (12.0 * step * step);
        out[(i, i)] = d2;
        for j in 0..i {
            // fourth-order mixed stencil from the 1-D first-derivative stencil applied twice
            let c = [(2.0, -1.0), (1.0, 8.0), (-1.0, -8.0), (-2.0, 1.0)];
            let mut acc = 0.0;
            for &(a, wa) in &c {
                for &(b, wb) in &c {
                    acc += wa * wb * eval((i, a * step), (j, b * step));
                }
            }
            let d = acc / (144.0 * step * step);
            out[(i, j)] = d;
            out[(j, i)] = d;
        }
    }
    out
}

/// The dual `g_*(z) = 1/g(1/z₁, …, 1/zₙ)` on the positive cone.
pub struct Dual<G>(pub G);

impl<G: SymmetricFunction> SymmetricFunction for Dual<G> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn value(&self, z: &[f64]) -> f64 {
        let w: Vec<f64> = z.iter().map(|v| 1.0 / v).collect();
        1.0 / self.0.value(&w)
    }

    fn gradient(&self, z: &[f64]) -> Vec<f64> {
        let w: Vec<f64> = z.iter().map(|v| 1.0 / v).collect();
        let f = self.0.value(&w);
        let g = self.0.gradient(&w);
        g.iter().zip(&w).map(|(gi, wi)| gi * wi * wi / (f * f)).collect()
    }

    fn hessian(&self, z: &[f64]) -> DMatrix<f64> {
        let n = z.len();
        let w: Vec<f64> = z.iter().map(|v| 1.0 / v).collect();
        let f = self.0.value(&w);
        let g = self.0.gradient(&w);
        let h = self.0.hessian(&w);
        DMatrix::from_fn(n, n, |i, j| {
            let wi2 = w[i] * w[i];
            let wj2 = w[j] * w[j];
            let mut v = 2.0 * g[i] * g[j] * wi2 * wj2 / (f * f * f) - h[(i, j)] * wi2 * wj2 / (f * f);
            if i == j {
                v -= 2.0 * g[i] * wi2 * w[i] / (f * f);
            }
            v
        })
    }

    fn has_limit_rule(&self) -> bool {
        self.0.has_limit_rule()
    }
}

/// Linear combination `Σ cᵢ gᵢ` of symmetric functions.
pub struct Combination<'a> {
    pub terms: Vec<(f64, &'a dyn SymmetricFunction)>,
}

impl SymmetricFunction for Combination<'_> {
    fn dim(&self) -> usize {
        self.terms[0].1.dim()
    }

    fn value(&self, z: &[f64]) -> f64 {
        self.terms.iter().map(|(c, g)| c * g.value(z)).sum()
    }

    fn gradient(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; z.len()];
        for (c, g) in &self.terms {
            for (o, v) in out.iter_mut().zip(g.gradient(z)) {
                *o += c * v;
            }
        }
        out
    }

    fn hessian(&self, z: &[f64]) -> DMatrix<f64> {
        let n = z.len();
        let mut out = DMatrix::zeros(n, n);
        for (c, g) in &self.terms {
            out += g.hessian(z) * *c;
        }
        out
    }

    fn has_limit_rule(&self) -> bool {
        self.terms.iter().all(|(_, g)| g.has_limit_rule())
    }
}

/// Trace `tr(z)` as a symmetric function.
pub struct Trace(pub usize);

impl SymmetricFunction for Trace {
    fn dim(&self) -> usize {
        self.0
    }
    fn value(&self, z: &[f64]) -> f64 {
        z.iter().sum()
    }
    fn gradient(&self, z: &[f64]) -> Vec<f64> {
        vec![1.0; z.len()]
    }
    fn hessian(&self, z: &[f64]) -> DMatrix<f64> {
        DMatrix::zeros(z.len(), z.len())
    }
}

/// Euclidean norm `|z|` as a symmetric function.
pub struct Norm(pub usize);

impl SymmetricFunction for Norm {
    fn dim(&self) -> usize {
        self.0
    }
    fn value(&self, z: &[f64]) -> f64 {
        norm(z)
    }
    fn gradient(&self, z: &[f64]) -> Vec<f64> {
        let r = norm(z);
        z.iter().map(|v| v / r).collect()
    }
    fn hessian(&self, z: &[f64]) -> DMatrix<f64> {
        let n = z.len();
        let r = norm(z);
        DMatrix::from_fn(n, n, |i, j| {
            let delta = if i == j { 1.0 } else { 0.0 };
            (delta - z[i] * z[j] / (r * r)) / r
        })
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;

    /// Second derivative in `s` of `g(eig(diag(z) + sV))` by a five-point stencil.
    pub(crate) fn matrix_fd_form(g: &dyn SymmetricFunction, z: &[f64], v: &DMatrix<f64>, h: f64) -> f64 {
        let n = z.len();
        let base = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(z));
        let at = |s: f64| {
            let m = &base + v * s;
            let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
            ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
            debug_assert_eq!(ev.len(), n);
            g.value(&ev)
        };
        (-at(2.0 * h) + 16.0 * at(h) - 30.0 * at(0.0) + 16.0 * at(-h) - at(-2.0 * h)) / (12.0 * h * h)
    }

    #[test]
    fn norm_form_closed_form() {
        let g = Norm(2);
        let v = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let got = second_derivative_form(&g, &[1.0, 2.0], &v).unwrap();
        assert!((got - 2.0 / 5f64.sqrt()).abs() < 1e-14);
        let fd = matrix_fd_form(&g, &[1.0, 2.0], &v, 1e-3);
        assert!((got - fd).abs() < 1e-8);
    }

    #[test]
    fn trace_form_vanishes() {
        let v = DMatrix::from_fn(3, 3, |i, j| (i + j) as f64 + 1.0);
        assert_eq!(second_derivative_form(&Trace(3), &[1.0, 2.0, 3.0], &v).unwrap(), 0.0);
    }

    #[test]
    fn fd_helpers_match_polynomial() {
        let f = |z: &[f64]| z[0] * z[0] * z[1] + z[1].powi(3);
        let z = [0.7, 1.3];
        let g = fd_gradient(&f, &z, 1e-3);
        assert!((g[0] - 2.0 * 0.7 * 1.3).abs() < 1e-10);
        assert!((g[1] - (0.49 + 3.0 * 1.69)).abs() < 1e-10);
        let h = fd_hessian(&f, &z, 1e-3);
        assert!((h[(0, 0)] - 2.6).abs() < 1e-7);
        assert!((h[(0, 1)] - 1.4).abs() < 1e-7);
        assert!((h[(1, 1)] - 6.0 * 1.3).abs() < 1e-7);
    }

    #[test]
    fn dual_of_norm_matches_fd() {
        let g = Dual(Norm(3));
        let z = [0.4, 1.1, 2.0];
        let fd = fd_gradient(&|w: &[f64]| g.value(w), &z, 1e-4);
        for (a, b) in g.gradient(&z).iter().zip(&fd) {
            assert!((a - b).abs() < 1e-9);
        }
        let fdh = fd_hessian(&|w: &[f64]| g.value(w), &z, 1e-3);
        let h = g.hessian(&z);
        for i in 0..3 {
            for j in 0..3 {
                assert!((h[(i, j)] - fdh[(i, j)]).abs() < 1e-6, "{i}{j}");
            }
        }
    }

    #[test]
    fn coincident_limit_matches_matrix_fd() {
        let g = Norm(3);
        let z = [1.0, 2.0, 2.0];
        let v = DMatrix::from_row_slice(3, 3, &[0.3, 0.1, -0.2, 0.1, 0.5, 0.7, -0.2, 0.7, -0.4]);
        let got = second_derivative_form(&g, &z, &v).unwrap();
        let fd = matrix_fd_form(&g, &z, &v, 1e-3);
        assert!((got - fd).abs() < 1e-7 * got.abs().max(1.0));
    }
}
