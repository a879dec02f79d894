//! Hermitian spectral decomposition with eigenpair continuity tracking.
//!
//! Continuity tracking keeps eigenvalue curves smooth when a matrix is
//! sampled along a trajectory: each decomposition can be reordered to
//! follow a reference system by maximum eigenvector overlap, so curves
//! stay attached to their eigenvectors through avoided crossings instead
//! of being re-sorted by value.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};

use crate::error::{Error, Result};
use crate::operator::{Operator, C64};
use crate::tol;

/// Eigenvalues with matching orthonormal eigenvectors (columns).
///
/// `values` are ascending when no reference is given; continuity-ordered
/// otherwise. `pairing[slot]` records which ascending-order index ended up
/// in `slot`.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub values: Vec<f64>,
    pub vectors: Array2<C64>,
    pub pairing: Vec<usize>,
}

impl EigenSystem {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, k: usize) -> Array1<C64> {
        self.vectors.column(k).to_owned()
    }

    /// Sum of lambda_k |v_k><v_k|.
    pub fn reconstruct(&self) -> Operator {
        let n = self.dim();
        let mut entries = Array2::<C64>::zeros((n, n));
        for k in 0..n {
            let v = self.vectors.column(k);
            let lam = C64::new(self.values[k], 0.0);
            for i in 0..n {
                for j in 0..n {
                    entries[(i, j)] += lam * v[i] * v[j].conj();
                }
            }
        }
        Operator::new(entries).expect("square by construction")
    }

    /// Smallest gap between distinct slots, for degeneracy flagging.
    pub fn min_gap(&self) -> f64 {
        let mut sorted = self.values.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        sorted
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }
}

/// Eigendecomposition of a Hermitian matrix.
///
/// With `reference` given, eigenpairs are reordered by greedy maximum
/// overlap `|<v|v_ref>|^2` against the reference system (globally largest
/// overlap first, ties broken by ascending index) and each vector's phase
/// is rotated so `<v_ref|v>` is real and positive. Without a reference,
/// values are ascending and each vector's largest-magnitude component is
/// made real positive.
///
/// Eigenvalues within `1e-9 * ||M||` of each other form a degenerate
/// cluster whose vectors are re-orthonormalized by modified Gram-Schmidt.
pub fn spectral_decompose(m: &Operator, reference: Option<&EigenSystem>) -> Result<EigenSystem> {
    m.ensure_hermitian(tol::HERMITIAN_TOL)?;
    if let Some(r) = reference {
        if r.dim() != m.dim() {
            return Err(Error::DimensionMismatch {
                left: m.dim(),
                right: r.dim(),
            });
        }
    }

    let sym = m.symmetrize();
    let (values, mut vectors) = match reference {
        Some(r) => eigh_columns_warm(sym.entries(), &r.vectors)?,
        None => eigh_columns(sym.entries())?,
    };
    let n = values.len();

    let cluster_tol = tol::DEGENERACY_TOL_REL * m.max_abs();
    re_orthonormalize_clusters(&values, &mut vectors, cluster_tol);

    let order: Vec<usize> = match reference {
        Some(r) => greedy_overlap_order(&vectors, &r.vectors),
        None => (0..n).collect(),
    };

    let mut out_values = Vec::with_capacity(n);
    let mut out_vectors = Array2::<C64>::zeros((n, n));
    for (slot, &src) in order.iter().enumerate() {
        out_values.push(values[src]);
        let mut v = vectors.column(src).to_owned();
        let phase = match reference {
            Some(r) => {
                let overlap: C64 = r
                    .vectors
                    .column(slot)
                    .iter()
                    .zip(v.iter())
                    .map(|(a, b)| a.conj() * b)
                    .sum();
                if overlap.norm() > 1e-14 {
                    overlap / overlap.norm()
                } else {
                    C64::new(1.0, 0.0)
                }
            }
            None => canonical_phase(&v),
        };
        v.mapv_inplace(|x| x * phase.conj());
        out_vectors.column_mut(slot).assign(&v);
    }

    let system = EigenSystem {
        values: out_values,
        vectors: out_vectors,
        pairing: order,
    };
    verify_system(m, &system)?;
    Ok(system)
}

/// Hermitian eigendecomposition with ascending values and true right
/// eigenvectors as columns.
///
/// Dimensions up to `JACOBI_MAX_DIM` take the in-crate cyclic-Jacobi
/// path, which beats the backend's per-call overhead at the matrix sizes
/// this library spends its time on. Larger matrices fall back to the
/// LAPACK-backed `eigh`; that call receives the row-major buffer as if it
/// were column-major, i.e. it diagonalizes the conjugate of the matrix it
/// was handed, so its output columns must be conjugated before they
/// satisfy M v = lambda v. Every decomposition in this crate routes
/// through here, and `verify_system` re-checks the eigenpair residuals
/// after each call.
pub(crate) fn eigh_columns(m: &Array2<C64>) -> Result<(Vec<f64>, Array2<C64>)> {
    if m.nrows() <= JACOBI_MAX_DIM {
        let (values, vectors) = jacobi_hermitian(m, true)?;
        return Ok(ascending(values, vectors.expect("requested")));
    }
    let (values, vectors) = m.eigh(UPLO::Lower)?;
    Ok((values.to_vec(), vectors.mapv(|v| v.conj())))
}

/// `eigh_columns` seeded with a unitary that nearly diagonalizes the
/// input, e.g. the eigenvectors of the previous point on a trajectory.
/// Rotating into the seed basis first leaves the Jacobi sweeps almost
/// nothing to do; an unrelated seed just degrades to the cold path's
/// cost. Results are identical in meaning to `eigh_columns`.
fn eigh_columns_warm(m: &Array2<C64>, seed: &Array2<C64>) -> Result<(Vec<f64>, Array2<C64>)> {
    if m.nrows() > JACOBI_MAX_DIM {
        return eigh_columns(m);
    }
    // seed' m seed is Hermitian with the same eigenvalues as m
    let rotated = small_product(seed, &small_product(m, seed, false), true);
    let (values, w) = jacobi_hermitian(&rotated, true)?;
    let vectors = small_product(seed, &w.expect("requested"), false);
    Ok(ascending(values, vectors))
}

/// a b, or a' b when `adjoint_left`, for the small dimensions the Jacobi
/// path covers.
fn small_product(a: &Array2<C64>, b: &Array2<C64>, adjoint_left: bool) -> Array2<C64> {
    let n = a.nrows();
    let mut out = Array2::<C64>::zeros((n, n));
    for i in 0..n {
        for k in 0..n {
            let f = if adjoint_left {
                a[(k, i)].conj()
            } else {
                a[(i, k)]
            };
            if f.re == 0.0 && f.im == 0.0 {
                continue;
            }
            for j in 0..n {
                out[(i, j)] += f * b[(k, j)];
            }
        }
    }
    out
}

/// Reorders an eigensystem so values ascend.
fn ascending(values: Vec<f64>, vectors: Array2<C64>) -> (Vec<f64>, Array2<C64>) {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).expect("finite"));
    let mut out_values = Vec::with_capacity(n);
    let mut out_vectors = Array2::<C64>::zeros((n, n));
    for (slot, &src) in order.iter().enumerate() {
        out_values.push(values[src]);
        out_vectors.column_mut(slot).assign(&vectors.column(src));
    }
    (out_values, out_vectors)
}

/// Ascending eigenvalues of a Hermitian matrix, skipping eigenvector work.
pub(crate) fn hermitian_eigenvalues(m: &Array2<C64>) -> Result<Vec<f64>> {
    let mut values = if m.nrows() <= JACOBI_MAX_DIM {
        jacobi_hermitian(m, false)?.0
    } else {
        m.eigh(UPLO::Lower)?.0.to_vec()
    };
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    Ok(values)
}

/// Cutoff for the in-crate Jacobi path.
const JACOBI_MAX_DIM: usize = 6;

/// Cyclic Jacobi diagonalization of a Hermitian matrix: repeatedly zeroes
/// each off-diagonal entry with a unitary plane rotation. Off-diagonal
/// mass is strictly decreasing and convergence is quadratic, so the sweep
/// cap is far beyond what `JACOBI_MAX_DIM` ever needs.
///
/// Returns the unsorted diagonal and, when requested, the accumulated
/// unitary whose columns are the matching eigenvectors of the input.
fn jacobi_hermitian(
    m: &Array2<C64>,
    want_vectors: bool,
) -> Result<(Vec<f64>, Option<Array2<C64>>)> {
    let n = m.nrows();
    // exactly Hermitian working copy; rotations preserve that to rounding
    let mut a = Array2::<C64>::zeros((n, n));
    for i in 0..n {
        a[(i, i)] = C64::new(m[(i, i)].re, 0.0);
        for j in i + 1..n {
            let v = (m[(i, j)] + m[(j, i)].conj()) * C64::new(0.5, 0.0);
            a[(i, j)] = v;
            a[(j, i)] = v.conj();
        }
    }
    let mut vectors = if want_vectors {
        Some(Array2::<C64>::eye(n))
    } else {
        None
    };
    let fro = a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    if fro == 0.0 {
        return Ok((vec![0.0; n], vectors));
    }
    if !fro.is_finite() {
        return Err(Error::Backend("non-finite matrix entries".into()));
    }

    let stop = f64::EPSILON * fro;
    let mut converged = n < 2;
    for _ in 0..20 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in p + 1..n {
                off = off.max(a[(p, q)].norm());
            }
        }
        if off <= stop {
            converged = true;
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let mag = apq.norm();
                if mag == 0.0 {
                    continue;
                }
                // rotation angle zeroing (p, q):
                // tan(2 theta) = 2 |a_pq| / (a_pp - a_qq)
                let phase = apq / C64::new(mag, 0.0);
                let tau = (a[(p, p)].re - a[(q, q)].re) / (2.0 * mag);
                let t = if tau.abs() > 1e12 {
                    0.5 / tau
                } else {
                    tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sp = phase * (t * c); // sin(theta) e^{i arg(a_pq)}

                // A <- A U with U = [[c, -sp], [conj(sp), c]] on (p, q)
                for i in 0..n {
                    let aip = a[(i, p)];
                    let aiq = a[(i, q)];
                    a[(i, p)] = aip * c + aiq * sp.conj();
                    a[(i, q)] = aiq * c - aip * sp;
                }
                // A <- U' A
                for j in 0..n {
                    let apj = a[(p, j)];
                    let aqj = a[(q, j)];
                    a[(p, j)] = apj * c + aqj * sp;
                    a[(q, j)] = aqj * c - apj * sp.conj();
                }
                // the rotation zeroes (p, q) analytically; pin the
                // rounding residue so symmetry cannot drift
                a[(p, q)] = C64::new(0.0, 0.0);
                a[(q, p)] = C64::new(0.0, 0.0);
                a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
                a[(q, q)] = C64::new(a[(q, q)].re, 0.0);

                if let Some(v) = vectors.as_mut() {
                    for i in 0..n {
                        let vip = v[(i, p)];
                        let viq = v[(i, q)];
                        v[(i, p)] = vip * c + viq * sp.conj();
                        v[(i, q)] = viq * c - vip * sp;
                    }
                }
            }
        }
    }
    if !converged {
        return Err(Error::Backend(
            "plane-rotation diagonalization failed to converge".into(),
        ));
    }
    Ok(((0..n).map(|i| a[(i, i)].re).collect(), vectors))
}

/// Phase that makes the largest-magnitude component real positive.
pub(crate) fn canonical_phase(v: &Array1<C64>) -> C64 {
    let mut best = 0usize;
    let mut best_mag = -1.0;
    for (i, x) in v.iter().enumerate() {
        if x.norm() > best_mag + 1e-15 {
            best_mag = x.norm();
            best = i;
        }
    }
    let x = v[best];
    if x.norm() < 1e-300 {
        C64::new(1.0, 0.0)
    } else {
        x / x.norm()
    }
}

/// Greedy assignment: order[slot] = column of `vectors` matched to
/// reference column `slot`.
fn greedy_overlap_order(vectors: &Array2<C64>, refs: &Array2<C64>) -> Vec<usize> {
    let n = vectors.ncols();
    let mut overlap = vec![vec![0.0f64; n]; n]; // [ref][new]
    for r in 0..n {
        for c in 0..n {
            let o: C64 = refs
                .column(r)
                .iter()
                .zip(vectors.column(c).iter())
                .map(|(a, b)| a.conj() * b)
                .sum();
            overlap[r][c] = o.norm_sqr();
        }
    }
    let mut order = vec![usize::MAX; n];
    let mut ref_used = vec![false; n];
    let mut new_used = vec![false; n];
    for _ in 0..n {
        let (mut br, mut bc, mut bo) = (usize::MAX, usize::MAX, -1.0);
        for r in 0..n {
            if ref_used[r] {
                continue;
            }
            for c in 0..n {
                if new_used[c] {
                    continue;
                }
                if overlap[r][c] > bo {
                    bo = overlap[r][c];
                    br = r;
                    bc = c;
                }
            }
        }
        order[br] = bc;
        ref_used[br] = true;
        new_used[bc] = true;
    }
    order
}

/// Modified Gram-Schmidt on each cluster of near-equal eigenvalues.
fn re_orthonormalize_clusters(values: &[f64], vectors: &mut Array2<C64>, cluster_tol: f64) {
    let n = values.len();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[end] - values[end - 1] <= cluster_tol {
            end += 1;
        }
        if end - start > 1 {
            for k in start..end {
                let mut v = vectors.column(k).to_owned();
                for p in start..k {
                    let prev = vectors.column(p);
                    let proj: C64 = prev.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum();
                    for i in 0..n {
                        let correction = proj * prev[i];
                        v[i] -= correction;
                    }
                }
                let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
                if norm > 1e-300 {
                    v.mapv_inplace(|x| x / norm);
                }
                vectors.column_mut(k).assign(&v);
            }
        }
        start = end;
    }
}

fn verify_system(m: &Operator, s: &EigenSystem) -> Result<()> {
    let n = s.dim();
    let scale = m.max_abs().max(1.0);
    for k in 0..n {
        let v = s.vectors.column(k);
        let mv = m.entries().dot(&v);
        let mut res = 0.0f64;
        for i in 0..n {
            res += (mv[i] - C64::new(s.values[k], 0.0) * v[i]).norm_sqr();
        }
        if res.sqrt() > tol::EIG_TOL * scale {
            return Err(Error::Backend(format!(
                "eigenpair residual {:.3e} exceeds {:.3e}",
                res.sqrt(),
                tol::EIG_TOL * scale
            )));
        }
    }
    let dev = orthonormality_deviation(&s.vectors);
    if dev > tol::ORTHO_TOL {
        return Err(Error::NotOrthonormal {
            deviation: dev,
            tol: tol::ORTHO_TOL,
        });
    }
    Ok(())
}

pub(crate) fn orthonormality_deviation(vectors: &Array2<C64>) -> f64 {
    let n = vectors.ncols();
    let mut dev = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let g: C64 = vectors
                .column(i)
                .iter()
                .zip(vectors.column(j).iter())
                .map(|(a, b)| a.conj() * b)
                .sum();
            let target = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((g - C64::new(target, 0.0)).norm());
        }
    }
    dev
}
