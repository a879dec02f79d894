//! Shared test oracles: a column-stacked superoperator route for
//! constant-coefficient models, a scaled Taylor matrix exponential, and
//! seeded random matrix helpers. Everything here is an independent
//! second path used to cross-check the production integrators.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use qinv_core::{LindbladModel, Operator, C64};

pub fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            for k in 0..br {
                for l in 0..bc {
                    out[[i * br + k, j * bc + l]] = a[[i, j]] * b[[k, l]];
                }
            }
        }
    }
    out
}

/// Column-stacked vectorization: vec(M)[i + j n] = M[i, j].
pub fn vec_col(m: &Operator) -> Array1<C64> {
    let n = m.dim();
    let mut v = Array1::zeros(n * n);
    for j in 0..n {
        for i in 0..n {
            v[i + j * n] = m.get(i, j);
        }
    }
    v
}

pub fn unvec_col(v: &Array1<C64>, n: usize) -> Operator {
    let mut m = Operator::zeros(n);
    for j in 0..n {
        for i in 0..n {
            m.set(i, j, v[i + j * n]);
        }
    }
    m
}

fn conjugate(m: &Array2<C64>) -> Array2<C64> {
    m.mapv(|v| v.conj())
}

fn transpose(m: &Array2<C64>) -> Array2<C64> {
    m.t().to_owned()
}

/// Matrix of rho -> -i[H, rho] + sum_a (F rho F' - {F'F, rho}/2) under
/// column stacking, with the effective sqrt(rate)-folded jump operators
/// evaluated at the probe time.
pub fn liouvillian_matrix(model: &LindbladModel, t: f64) -> Array2<C64> {
    let n = model.dim();
    let eye: Array2<C64> = Array2::eye(n);
    let h = model.hamiltonian_at(t).unwrap().entries().clone();
    let mi = Complex64::new(0.0, -1.0);
    let mut sup = (kron(&eye, &h) - kron(&transpose(&h), &eye)).mapv(|v| mi * v);
    for f in model.lindblad_ops_at(t).unwrap() {
        let f = f.entries().clone();
        let gram = conjugate(&transpose(&f)).dot(&f);
        sup = sup + kron(&conjugate(&f), &f)
            - (kron(&eye, &gram) + kron(&transpose(&gram), &eye)).mapv(|v| 0.5 * v);
    }
    sup
}

/// Matrix of I -> -i[H, I] - sum_a (F' I F - {F'F, I}/2): the generator
/// whose flow keeps Tr(I(t) rho(t)) constant.
pub fn adjoint_matrix(model: &LindbladModel, t: f64) -> Array2<C64> {
    let n = model.dim();
    let eye: Array2<C64> = Array2::eye(n);
    let h = model.hamiltonian_at(t).unwrap().entries().clone();
    let mi = Complex64::new(0.0, -1.0);
    let mut sup = (kron(&eye, &h) - kron(&transpose(&h), &eye)).mapv(|v| mi * v);
    for f in model.lindblad_ops_at(t).unwrap() {
        let f = f.entries().clone();
        let fdag = conjugate(&transpose(&f));
        let gram = fdag.dot(&f);
        sup = sup - kron(&transpose(&f), &fdag)
            + (kron(&eye, &gram) + kron(&transpose(&gram), &eye)).mapv(|v| 0.5 * v);
    }
    sup
}

/// Scaling-and-squaring Taylor exponential; fine at test scale.
pub fn expm(m: &Array2<C64>) -> Array2<C64> {
    let n = m.nrows();
    let norm = m.iter().map(|v| v.norm()).fold(0.0, f64::max) * n as f64;
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scaled = m.mapv(|v| v / Complex64::new(2f64.powi(squarings as i32), 0.0));
    let mut term: Array2<C64> = Array2::eye(n);
    let mut sum = term.clone();
    for k in 1..200 {
        term = term.dot(&scaled).mapv(|v| v / Complex64::new(k as f64, 0.0));
        let size = term.iter().map(|v| v.norm()).fold(0.0, f64::max);
        sum = sum + &term;
        if size < 1e-20 {
            break;
        }
    }
    for _ in 0..squarings {
        sum = sum.dot(&sum);
    }
    sum
}

pub fn apply_matrix(sup: &Array2<C64>, m: &Operator) -> Operator {
    let v = vec_col(m);
    unvec_col(&sup.dot(&v), m.dim())
}

pub fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> Operator {
    let mut m = Operator::zeros(n);
    for i in 0..n {
        m.set(i, i, Complex64::new(rng.random_range(-1.0..1.0), 0.0));
        for j in i + 1..n {
            let v = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            m.set(i, j, v);
            m.set(j, i, v.conj());
        }
    }
    m
}

pub fn random_density(n: usize, rng: &mut ChaCha8Rng) -> Operator {
    let mut g = Operator::zeros(n);
    for i in 0..n {
        for j in 0..n {
            g.set(
                i,
                j,
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
            );
        }
    }
    let rho = g.matmul(&g.dagger()).unwrap();
    let tr = rho.trace().re;
    rho.scale_re(1.0 / tr)
}
