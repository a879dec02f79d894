//! Dense complex square matrices and the small algebra the rest of the
//! library is built on: commutators, adjoints, tensor products, and the
//! Pauli set.
//!
//! Sign convention used throughout: `sigma_z = diag(-1, +1)`, i.e.
//! `sigma_z|0> = -|0>`, and `sigma_y = [[0, i], [-i, 0]]`. This keeps the
//! cyclic algebra `[sx, sy] = 2i sz`, `[sy, sz] = 2i sx`, `[sz, sx] = 2i sy`
//! while making the collective-dephasing operator `sz_1 + sz_2` equal
//! `diag(-2, 0, 0, +2)` on the basis `{|00>, |01>, |10>, |11>}`.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Dense complex square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    entries: Array2<C64>,
}

impl Operator {
    /// Wraps a square array. Rejects non-square input.
    pub fn new(entries: Array2<C64>) -> Result<Self> {
        let (rows, cols) = entries.dim();
        if rows != cols {
            return Err(Error::NotSquare { rows, cols });
        }
        Ok(Operator { entries })
    }

    pub fn zeros(dim: usize) -> Self {
        Operator {
            entries: Array2::zeros((dim, dim)),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Operator {
            entries: Array2::eye(dim),
        }
    }

    /// Builds from row-major real and imaginary parts.
    pub fn from_parts(re: &[Vec<f64>], im: &[Vec<f64>]) -> Result<Self> {
        let dim = re.len();
        if im.len() != dim {
            return Err(Error::DimensionMismatch {
                left: dim,
                right: im.len(),
            });
        }
        let mut entries = Array2::zeros((dim, dim));
        for i in 0..dim {
            if re[i].len() != dim || im[i].len() != dim {
                return Err(Error::NotSquare {
                    rows: dim,
                    cols: re[i].len().max(im[i].len()),
                });
            }
            for j in 0..dim {
                entries[(i, j)] = C64::new(re[i][j], im[i][j]);
            }
        }
        Ok(Operator { entries })
    }

    /// Builds a diagonal matrix from real entries.
    pub fn diag(values: &[f64]) -> Self {
        let mut entries = Array2::zeros((values.len(), values.len()));
        for (i, &v) in values.iter().enumerate() {
            entries[(i, i)] = C64::new(v, 0.0);
        }
        Operator { entries }
    }

    pub fn pauli_x() -> Self {
        Operator::from_parts(
            &[vec![0.0, 1.0], vec![1.0, 0.0]],
            &[vec![0.0, 0.0], vec![0.0, 0.0]],
        )
        .expect("static 2x2")
    }

    pub fn pauli_y() -> Self {
        Operator::from_parts(
            &[vec![0.0, 0.0], vec![0.0, 0.0]],
            &[vec![0.0, 1.0], vec![-1.0, 0.0]],
        )
        .expect("static 2x2")
    }

    pub fn pauli_z() -> Self {
        Operator::diag(&[-1.0, 1.0])
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &Array2<C64> {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.entries[(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.entries[(i, j)] = v;
    }

    pub fn add(&self, other: &Operator) -> Result<Operator> {
        self.check_dim(other)?;
        Ok(Operator {
            entries: &self.entries + &other.entries,
        })
    }

    pub fn sub(&self, other: &Operator) -> Result<Operator> {
        self.check_dim(other)?;
        Ok(Operator {
            entries: &self.entries - &other.entries,
        })
    }

    pub fn scale(&self, s: C64) -> Operator {
        Operator {
            entries: self.entries.mapv(|v| v * s),
        }
    }

    pub fn scale_re(&self, s: f64) -> Operator {
        self.scale(C64::new(s, 0.0))
    }

    /// Matrix product self * other.
    pub fn matmul(&self, other: &Operator) -> Result<Operator> {
        self.check_dim(other)?;
        let n = self.dim();
        // small matrices dominate this library's workloads; a direct
        // triple loop beats the generic matmul dispatch there
        if n <= 8 {
            if let (Some(a), Some(b)) = (self.entries.as_slice(), other.entries.as_slice()) {
                let mut out = Array2::<C64>::zeros((n, n));
                {
                    let o = out.as_slice_mut().expect("freshly allocated");
                    for i in 0..n {
                        for k in 0..n {
                            let aik = a[i * n + k];
                            if aik.re == 0.0 && aik.im == 0.0 {
                                continue;
                            }
                            for j in 0..n {
                                o[i * n + j] += aik * b[k * n + j];
                            }
                        }
                    }
                }
                return Ok(Operator { entries: out });
            }
        }
        Ok(Operator {
            entries: self.entries.dot(&other.entries),
        })
    }

    /// self + h * k in one pass.
    pub(crate) fn add_scaled(&self, h: f64, k: &Operator) -> Operator {
        let mut entries = self.entries.clone();
        entries.zip_mut_with(&k.entries, |y, &v| *y += v * h);
        Operator { entries }
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Operator {
        Operator {
            entries: self.entries.t().mapv(|v| v.conj()),
        }
    }

    pub fn trace(&self) -> C64 {
        self.entries.diag().sum()
    }

    /// Largest entry magnitude; the matrix norm used for all tolerance
    /// comparisons in this library.
    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Max-abs-entry of M - M^dag.
    pub fn hermiticity_deviation(&self) -> f64 {
        let n = self.dim();
        let mut dev: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                dev = dev.max((self.entries[(i, j)] - self.entries[(j, i)].conj()).norm());
            }
        }
        dev
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_deviation() <= tol
    }

    pub fn ensure_hermitian(&self, tol: f64) -> Result<()> {
        let deviation = self.hermiticity_deviation();
        if deviation > tol {
            return Err(Error::NotHermitian { deviation, tol });
        }
        Ok(())
    }

    /// (M + M^dag)/2.
    pub fn symmetrize(&self) -> Operator {
        let half = C64::new(0.5, 0.0);
        Operator {
            entries: (&self.entries + &self.dagger().entries).mapv(|v| v * half),
        }
    }

    /// M |v>.
    pub fn apply(&self, v: &Array1<C64>) -> Result<Array1<C64>> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: v.len(),
            });
        }
        Ok(self.entries.dot(v))
    }

    /// <u| M |v>.
    pub fn matrix_element(&self, u: &Array1<C64>, v: &Array1<C64>) -> Result<C64> {
        let mv = self.apply(v)?;
        if u.len() != mv.len() {
            return Err(Error::DimensionMismatch {
                left: u.len(),
                right: mv.len(),
            });
        }
        Ok(u.iter().zip(mv.iter()).map(|(a, b)| a.conj() * b).sum())
    }

    fn check_dim(&self, other: &Operator) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(())
    }
}

/// Tr(AB) without forming the product.
pub fn product_trace(a: &Operator, b: &Operator) -> Result<C64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let n = a.dim();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += a.entries[(i, j)] * b.entries[(j, i)];
        }
    }
    Ok(acc)
}

/// AB - BA.
pub fn commutator(a: &Operator, b: &Operator) -> Result<Operator> {
    a.matmul(b)?.sub(&b.matmul(a)?)
}

/// y + (h/6)(k1 + 2 k2 + 2 k3 + k4) in one pass.
pub(crate) fn rk4_combine(
    y: &Operator,
    k1: &Operator,
    k2: &Operator,
    k3: &Operator,
    k4: &Operator,
    h_over_6: f64,
) -> Operator {
    let mut entries = y.entries.clone();
    ndarray::Zip::from(&mut entries)
        .and(&k1.entries)
        .and(&k2.entries)
        .and(&k3.entries)
        .and(&k4.entries)
        .for_each(|o, &a, &b, &c, &d| *o += (a + d + (b + c) * 2.0) * h_over_6);
    Operator { entries }
}

/// AB + BA.
pub fn anticommutator(a: &Operator, b: &Operator) -> Result<Operator> {
    a.matmul(b)?.add(&b.matmul(a)?)
}

/// out = alpha * (a b) + beta * out, the fused multiply-accumulate the
/// hot generator evaluations are built from. Same small-dimension fast
/// path as `matmul`.
pub(crate) fn gemm(
    alpha: C64,
    a: &Operator,
    b: &Operator,
    beta: C64,
    out: &mut Operator,
) -> Result<()> {
    a.check_dim(b)?;
    a.check_dim(out)?;
    let n = a.dim();
    if n <= 8 {
        if let (Some(av), Some(bv)) = (a.entries.as_slice(), b.entries.as_slice()) {
            if let Some(ov) = out.entries.as_slice_mut() {
                for i in 0..n {
                    for o in &mut ov[i * n..(i + 1) * n] {
                        *o = *o * beta;
                    }
                    for k in 0..n {
                        let raw = av[i * n + k];
                        if raw.re == 0.0 && raw.im == 0.0 {
                            continue;
                        }
                        let aik = raw * alpha;
                        for j in 0..n {
                            ov[i * n + j] += aik * bv[k * n + j];
                        }
                    }
                }
                return Ok(());
            }
        }
    }
    general_mat_mul(alpha, &a.entries, &b.entries, beta, &mut out.entries);
    Ok(())
}

/// Kronecker product; the left factor indexes the first subsystem, so for
/// qubits the basis order is |q1 q2> with index 2*q1 + q2.
pub fn tensor_product(a: &Operator, b: &Operator) -> Operator {
    let (na, nb) = (a.dim(), b.dim());
    let n = na * nb;
    let mut entries = Array2::zeros((n, n));
    for ia in 0..na {
        for ja in 0..na {
            let f = a.entries[(ia, ja)];
            if f == C64::new(0.0, 0.0) {
                continue;
            }
            for ib in 0..nb {
                for jb in 0..nb {
                    entries[(ia * nb + ib, ja * nb + jb)] = f * b.entries[(ib, jb)];
                }
            }
        }
    }
    Operator { entries }
}

/// sigma applied to qubit `k` of an `n`-qubit register (identity elsewhere).
pub fn embed_single_qubit(sigma: &Operator, k: usize, n: usize) -> Operator {
    let mut out = Operator::identity(1);
    for i in 0..n {
        let factor = if i == k {
            sigma.clone()
        } else {
            Operator::identity(2)
        };
        out = tensor_product(&out, &factor);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn assert_op_eq(a: &Operator, b: &Operator, tol: f64) {
        assert_eq!(a.dim(), b.dim());
        assert!(
            a.sub(b).unwrap().max_abs() <= tol,
            "operators differ by {:.3e}:\n{:?}\nvs\n{:?}",
            a.sub(b).unwrap().max_abs(),
            a.entries(),
            b.entries()
        );
    }

    #[test]
    fn commutator_of_anything_with_itself_vanishes() {
        let a = Operator::from_parts(
            &[vec![1.0, 2.0], vec![3.0, 4.0]],
            &[vec![0.5, -0.25], vec![0.0, 1.0]],
        )
        .unwrap();
        assert_eq!(commutator(&a, &a).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn pauli_commutators_are_cyclic() {
        let (sx, sy, sz) = (Operator::pauli_x(), Operator::pauli_y(), Operator::pauli_z());
        let two_i = C64::new(0.0, 2.0);
        assert_op_eq(&commutator(&sz, &sx).unwrap(), &sy.scale(two_i), 0.0);
        assert_op_eq(&commutator(&sx, &sy).unwrap(), &sz.scale(two_i), 0.0);
        assert_op_eq(&commutator(&sy, &sz).unwrap(), &sx.scale(two_i), 0.0);
    }

    #[test]
    fn commutator_rejects_dimension_mismatch() {
        let a = Operator::identity(2);
        let b = Operator::identity(3);
        assert!(matches!(
            commutator(&a, &b),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn pauli_anticommutators() {
        let (sx, sy) = (Operator::pauli_x(), Operator::pauli_y());
        assert_op_eq(
            &anticommutator(&sx, &sx).unwrap(),
            &Operator::identity(2).scale_re(2.0),
            0.0,
        );
        assert_eq!(anticommutator(&sx, &sy).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn anticommutator_with_identity_doubles() {
        let m = Operator::from_parts(
            &[vec![1.0, -2.0], vec![0.0, 3.0]],
            &[vec![0.0, 1.0], vec![-1.0, 2.0]],
        )
        .unwrap();
        assert_op_eq(
            &anticommutator(&Operator::identity(2), &m).unwrap(),
            &m.scale_re(2.0),
            0.0,
        );
    }

    #[test]
    fn tensor_identity_gives_identity() {
        let i4 = tensor_product(&Operator::identity(2), &Operator::identity(2));
        assert_op_eq(&i4, &Operator::identity(4), 0.0);
    }

    #[test]
    fn collective_sz_is_diagonal_with_our_sign_convention() {
        let sz = Operator::pauli_z();
        let f = tensor_product(&sz, &Operator::identity(2))
            .add(&tensor_product(&Operator::identity(2), &sz))
            .unwrap();
        assert_op_eq(&f, &Operator::diag(&[-2.0, 0.0, 0.0, 2.0]), 0.0);
    }

    #[test]
    fn tensor_entry_convention() {
        let sx = Operator::pauli_x();
        let xx = tensor_product(&sx, &sx);
        // ((0,0),(1,1)) in the |q1 q2> indexing is entry (0, 3)
        assert_eq!(xx.get(0, 3), C64::new(1.0, 0.0));
    }

    #[test]
    fn tensor_is_associative_on_integer_inputs() {
        let a = Operator::diag(&[1.0, -2.0]);
        let b = Operator::pauli_x();
        let c = Operator::diag(&[3.0, 5.0]);
        let left = tensor_product(&tensor_product(&a, &b), &c);
        let right = tensor_product(&a, &tensor_product(&b, &c));
        assert_eq!(left, right);
    }

    #[test]
    fn symmetrize_produces_hermitian() {
        let m = Operator::from_parts(
            &[vec![1.0, 2.0], vec![3.0, 4.0]],
            &[vec![0.1, 0.2], vec![0.3, 0.4]],
        )
        .unwrap();
        let s = m.symmetrize();
        assert!(s.is_hermitian(0.0));
        assert_abs_diff_eq!(s.trace().re, m.trace().re, epsilon = 1e-15);
    }

    #[test]
    fn matrix_element_conjugates_the_bra() {
        let sy = Operator::pauli_y();
        let u = Array1::from(vec![C64::new(0.0, 1.0), C64::new(0.0, 0.0)]);
        let v = Array1::from(vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)]);
        // <u| sy |v> = conj(i) * (sy v)_0 = -i * i = 1
        assert_eq!(sy.matrix_element(&u, &v).unwrap(), C64::new(1.0, 0.0));
    }

    #[test]
    fn non_square_rejected() {
        let arr = Array2::zeros((2, 3));
        assert!(matches!(Operator::new(arr), Err(Error::NotSquare { .. })));
    }

    #[test]
    fn product_trace_matches_matmul_trace() {
        let a = Operator::from_parts(
            &[vec![1.0, 2.0], vec![3.0, 4.0]],
            &[vec![0.5, 0.0], vec![-1.0, 2.0]],
        )
        .unwrap();
        let b = Operator::pauli_y();
        let direct = product_trace(&a, &b).unwrap();
        let via_product = a.matmul(&b).unwrap().trace();
        assert_abs_diff_eq!(direct.re, via_product.re, epsilon = 1e-15);
        assert_abs_diff_eq!(direct.im, via_product.im, epsilon = 1e-15);
    }
}
