//! Dense Hermitian positive-definite solves for the small per-frequency systems.

use num_complex::Complex64;

/// Row-major `n x n` Hermitian matrix; only the lower triangle is read.
#[derive(Debug, Clone)]
pub(crate) struct Hermitian {
    pub n: usize,
    pub data: Vec<Complex64>,
}

impl Hermitian {
    pub fn zeros(n: usize) -> Self {
        Hermitian {
            n,
            data: vec![Complex64::new(0.0, 0.0); n * n],
        }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        if i >= j {
            self.data[i * self.n + j]
        } else {
            self.data[j * self.n + i].conj()
        }
    }

    #[inline]
    pub fn add_lower(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.n + j] += v;
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.data[i * self.n + i].re).sum()
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.at(i, j) * x[j]).sum())
            .collect()
    }
}

/// Lower Cholesky factor `L` with `A = L L^H`.
pub(crate) struct Cholesky {
    n: usize,
    l: Vec<Complex64>,
}

impl Cholesky {
    /// Factors `a + shift * I`. Returns `None` if the shifted matrix is not
    /// numerically positive definite.
    pub fn factor(a: &Hermitian, shift: f64) -> Option<Self> {
        let n = a.n;
        let mut l = vec![Complex64::new(0.0, 0.0); n * n];
        for j in 0..n {
            let mut d = a.at(j, j).re + shift;
            for k in 0..j {
                d -= l[j * n + k].norm_sqr();
            }
            if !(d > 0.0) || !d.is_finite() {
                return None;
            }
            let djj = d.sqrt();
            l[j * n + j] = Complex64::new(djj, 0.0);
            for i in j + 1..n {
                let mut s = a.at(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k].conj();
                }
                l[i * n + j] = s / djj;
            }
        }
        Some(Cholesky { n, l })
    }

    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        let l = &self.l;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= l[i * n + k] * y[k];
            }
            y[i] = s / l[i * n + i].re;
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= l[k * n + i].conj() * y[k];
            }
            y[i] = s / l[i * n + i].re;
        }
        y
    }
}

/// Solves `a x = b` with diagonal loading `delta * trace(a) / n`, followed by
/// at most `refine` steps of iterated Tikhonov refinement against the
/// unloaded matrix. Refinement stops once a correction is negligible or stops
/// shrinking, so well-conditioned systems exit after a few steps while
/// ill-conditioned ones converge to the unloaded solution.
///
/// A zero matrix yields the zero vector. Loading escalates tenfold if the
/// factorisation breaks down numerically.
pub(crate) fn solve_loaded(a: &Hermitian, b: &[Complex64], delta: f64, refine: usize) -> Vec<Complex64> {
    let n = a.n;
    let zero = vec![Complex64::new(0.0, 0.0); n];
    let trace = a.trace();
    if !(trace > 0.0) || !trace.is_finite() {
        return zero;
    }
    let base = trace / n as f64;
    let mut shift = delta * base;
    let mut chol = Cholesky::factor(a, shift);
    let mut escalate = if delta > 0.0 { delta } else { 1e-15 };
    while chol.is_none() && escalate < 1.0 {
        escalate *= 10.0;
        shift = escalate * base;
        chol = Cholesky::factor(a, shift);
    }
    let Some(chol) = chol else {
        return zero;
    };
    let mut x = chol.solve(b);
    if shift > 0.0 {
        let norm = |v: &[Complex64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let mut last = f64::INFINITY;
        for _ in 0..refine {
            let ax = a.mul_vec(&x);
            let r: Vec<Complex64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
            let dx = chol.solve(&r);
            let step = norm(&dx);
            if !(step < last) {
                break;
            }
            x.iter_mut().zip(&dx).for_each(|(xi, di)| *xi += di);
            if step <= 1e-15 * norm(&x) {
                break;
            }
            last = step;
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn solves_small_hermitian_system() {
        // A = [[4, 1-i], [1+i, 3]]
        let mut a = Hermitian::zeros(2);
        a.add_lower(0, 0, c(4.0, 0.0));
        a.add_lower(1, 0, c(1.0, 1.0));
        a.add_lower(1, 1, c(3.0, 0.0));
        let x_true = [c(1.0, -2.0), c(0.5, 0.25)];
        let b = a.mul_vec(&x_true);
        let x = Cholesky::factor(&a, 0.0).unwrap().solve(&b);
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_matrix_gives_zero_solution() {
        let a = Hermitian::zeros(3);
        let x = solve_loaded(&a, &[c(1.0, 0.0); 3], 1e-6, 2);
        assert!(x.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn rank_deficient_matrix_still_solves() {
        // rank one: v v^H with v = [1, i]
        let mut a = Hermitian::zeros(2);
        a.add_lower(0, 0, c(1.0, 0.0));
        a.add_lower(1, 0, c(0.0, 1.0));
        a.add_lower(1, 1, c(1.0, 0.0));
        let b = a.mul_vec(&[c(1.0, 0.0), c(0.0, 0.0)]);
        let x = solve_loaded(&a, &b, 1e-6, 3);
        let ax = a.mul_vec(&x);
        for (u, v) in ax.iter().zip(&b) {
            assert!((u - v).norm() < 1e-9);
        }
    }
}
