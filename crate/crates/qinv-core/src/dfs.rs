//! Decoherence-free subspace detection and the effective-Hamiltonian
//! machinery around it.
//!
//! A D-dimensional subspace is decoherence free when (1) every basis
//! vector is an eigenvector of every jump operator with a common
//! eigenvalue c_a per operator, and (2) the subspace is invariant under
//! the effective Hamiltonian
//!
//! ```text
//! H_eff(t) = G(t) + H(t) + (i/2) sum_a (conj(c_a) F_a - c_a F_a'),
//! ```
//!
//! where G(t) = i sum_k |phi_k(t)><d/dt phi_k(t)| runs over a full moving
//! frame (subspace basis plus complement) and primes denote conjugate
//! transpose. Invariance is measured by the residual
//! max |<comp_n| H_eff |phi_j>|, which vanishes exactly when states inside
//! the subspace never leak out.
//!
//! Detection works on the time-independent base operators (rates scale
//! them but do not move their eigenspaces); the effective-Hamiltonian
//! residual is then evaluated at a caller-chosen time.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eig, SVD};

use crate::error::{Error, Result};
use crate::lindblad::LindbladModel;
use crate::operator::{Operator, C64};
use crate::spectral::{canonical_phase, orthonormality_deviation};
use crate::subspace::{subspace_intersection, SubspaceBasis};
use crate::tol;

/// One common-eigenvector subspace of all jump operators.
#[derive(Debug, Clone)]
pub struct DfsCandidate {
    pub basis: SubspaceBasis,
    pub complement: SubspaceBasis,
    /// One eigenvalue per jump operator, in model order.
    pub common_eigenvalues: Vec<C64>,
    /// max |<comp_n| H_eff |phi_j>| at the probe time.
    pub heff_residual: f64,
    /// True when the residual is within tolerance and the subspace can
    /// hold a nontrivial (at least 2-dimensional) unitary block.
    pub heff_invariant: bool,
}

impl DfsCandidate {
    pub fn dim(&self) -> usize {
        self.basis.dim()
    }
}

/// Enumerates all common-eigenvector subspaces of the model's jump
/// operators and scores each against the effective-Hamiltonian
/// invariance condition at time `t`.
///
/// Every jump operator must be diagonalizable with an eigenvector matrix
/// conditioned better than 1e8. Candidates are the nonzero intersections
/// of one eigenspace per operator, sorted by their eigenvalue tuples
/// (real part, then imaginary part, per operator in model order). With no
/// jump operators the full space is returned as the single candidate.
///
/// `dfs_tol` bounds both the eigenspace-membership residual and the
/// effective-Hamiltonian residual (absolute, on max-magnitude entries).
pub fn find_static_dfs(
    model: &LindbladModel,
    t: f64,
    dfs_tol: f64,
) -> Result<Vec<DfsCandidate>> {
    let n = model.dim();
    let full: Vec<usize> = (0..n).collect();
    let mut found: Vec<(Vec<C64>, SubspaceBasis)> =
        vec![(Vec::new(), SubspaceBasis::standard(n, &full))];

    for (alpha, term) in model.dissipator_terms().iter().enumerate() {
        let clusters = eigenspace_clusters(&term.operator, alpha)?;
        let mut next = Vec::new();
        for (eigenvalues, space) in &found {
            for (c, eigenspace) in &clusters {
                let common = subspace_intersection(space, eigenspace, dfs_tol)?;
                if common.dim() == 0 {
                    continue;
                }
                let mut with_c = eigenvalues.clone();
                with_c.push(*c);
                next.push((with_c, common));
            }
        }
        found = next;
    }

    found.sort_by(|(ca, _), (cb, _)| {
        let ka: Vec<(f64, f64)> = ca.iter().map(|c| (c.re, c.im)).collect();
        let kb: Vec<(f64, f64)> = cb.iter().map(|c| (c.re, c.im)).collect();
        ka.partial_cmp(&kb).unwrap()
    });

    let mut candidates = Vec::with_capacity(found.len());
    for (eigenvalues, space) in found {
        let basis = canonicalize(space)?;
        // eigenspace membership is re-checked directly: the intersection
        // is numerical and must not be trusted blindly
        for (alpha, term) in model.dissipator_terms().iter().enumerate() {
            let f = &term.operator;
            let scale = f.max_abs().max(1.0);
            for phi in basis.vectors() {
                let f_phi = f.apply(phi)?;
                let defect = f_phi
                    .iter()
                    .zip(phi.iter())
                    .map(|(a, b)| (a - eigenvalues[alpha] * b).norm())
                    .fold(0.0f64, f64::max);
                if defect > dfs_tol * scale {
                    return Err(Error::Backend(format!(
                        "intersection vector misses eigenspace {alpha} by {defect:.3e}"
                    )));
                }
            }
        }
        let complement = canonicalize(basis.orthogonal_complement()?)?;
        let heff = compute_heff_static(model, t, &eigenvalues)?;
        let heff_residual = dfs_condition_residual(&heff, &basis, &complement)?;
        let heff_invariant = heff_residual <= dfs_tol && basis.dim() >= 2;
        candidates.push(DfsCandidate {
            basis,
            complement,
            common_eigenvalues: eigenvalues,
            heff_residual,
            heff_invariant,
        });
    }
    Ok(candidates)
}

/// Distinct eigenvalues of one jump operator with orthonormal bases of
/// their eigenspaces.
fn eigenspace_clusters(f: &Operator, alpha: usize) -> Result<Vec<(C64, SubspaceBasis)>> {
    let n = f.dim();
    let (values, vectors) = f.entries().eig()?;

    let (_, singulars, _) = vectors.svd(false, false)?;
    let s_max = singulars.iter().cloned().fold(0.0f64, f64::max);
    let s_min = singulars.iter().cloned().fold(f64::INFINITY, f64::min);
    let cond = if s_min > 0.0 { s_max / s_min } else { f64::INFINITY };
    if cond > tol::DIAGONALIZABILITY_COND_MAX {
        return Err(Error::NotDiagonalizable {
            name: format!("jump operator {alpha}"),
            cond,
        });
    }

    let cluster_tol = tol::DEGENERACY_TOL_REL * f.max_abs().max(1.0);
    let mut clusters: Vec<(C64, Vec<usize>)> = Vec::new();
    for (k, &c) in values.iter().enumerate() {
        match clusters.iter_mut().find(|(rep, _)| (c - *rep).norm() <= cluster_tol) {
            Some((_, members)) => members.push(k),
            None => clusters.push((c, vec![k])),
        }
    }

    clusters
        .into_iter()
        .map(|(c, members)| {
            // modified Gram-Schmidt over the cluster's eigenvectors: the
            // span is the eigenspace, and within-cluster vectors of a
            // well-conditioned eigenbasis stay independent
            let mut ortho: Vec<Array1<C64>> = Vec::with_capacity(members.len());
            for &k in &members {
                let mut v = vectors.column(k).to_owned();
                for prev in &ortho {
                    let proj: C64 = prev.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum();
                    for i in 0..n {
                        let correction = proj * prev[i];
                        v[i] -= correction;
                    }
                }
                let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
                if norm < 1e-12 {
                    return Err(Error::NotDiagonalizable {
                        name: format!("jump operator {alpha}"),
                        cond: f64::INFINITY,
                    });
                }
                v.mapv_inplace(|x| x / norm);
                ortho.push(v);
            }
            Ok((c, SubspaceBasis::new(n, ortho)?))
        })
        .collect()
}

/// Deterministic presentation of a subspace basis: canonical phases,
/// vectors ordered by the index of their dominant component.
fn canonicalize(basis: SubspaceBasis) -> Result<SubspaceBasis> {
    let ambient = basis.ambient_dim();
    let mut vectors: Vec<Array1<C64>> = basis
        .vectors()
        .iter()
        .map(|v| {
            let phase = canonical_phase(v);
            v.mapv(|x| x * phase.conj())
        })
        .collect();
    vectors.sort_by_key(dominant_index);
    SubspaceBasis::new(ambient, vectors)
}

fn dominant_index(v: &Array1<C64>) -> usize {
    let mut best = 0usize;
    let mut mag = -1.0f64;
    for (i, x) in v.iter().enumerate() {
        if x.norm() > mag + 1e-12 {
            mag = x.norm();
            best = i;
        }
    }
    best
}

/// Full moving frame (subspace basis plus complement) as a function of
/// time, with optional analytic derivatives. Without them, derivatives
/// are taken by finite differences with step `fd_step` (centered where
/// the horizon allows, one-sided second order near t = 0), which
/// requires the supplied basis function to be smooth in t, including its
/// phase choices.
pub struct BasisTrajectory {
    ambient_dim: usize,
    dfs_dim: usize,
    basis: BasisFn,
    derivative: Option<BasisFn>,
    fd_step: f64,
}

/// Returns all `ambient_dim` frame vectors at t: subspace vectors first,
/// then the complement.
pub type BasisFn = Box<dyn Fn(f64) -> Result<Vec<Array1<C64>>>>;

impl BasisTrajectory {
    pub fn new(
        ambient_dim: usize,
        dfs_dim: usize,
        basis: BasisFn,
        derivative: Option<BasisFn>,
        fd_step: f64,
    ) -> Result<Self> {
        if dfs_dim > ambient_dim {
            return Err(Error::DimensionMismatch {
                left: ambient_dim,
                right: dfs_dim,
            });
        }
        if !(fd_step > 0.0) || !fd_step.is_finite() {
            return Err(Error::InvalidModel {
                reason: format!("finite-difference step must be positive, got {fd_step}"),
            });
        }
        Ok(BasisTrajectory {
            ambient_dim,
            dfs_dim,
            basis,
            derivative,
            fd_step,
        })
    }

    /// Frame frozen at a fixed pair of bases; derivatives are zero.
    pub fn from_static(dfs: &SubspaceBasis, comp: &SubspaceBasis) -> Result<Self> {
        if dfs.ambient_dim() != comp.ambient_dim()
            || dfs.dim() + comp.dim() != dfs.ambient_dim()
        {
            return Err(Error::DimensionMismatch {
                left: dfs.ambient_dim(),
                right: dfs.dim() + comp.dim(),
            });
        }
        let ambient = dfs.ambient_dim();
        let dfs_dim = dfs.dim();
        let frozen: Vec<Array1<C64>> = dfs
            .vectors()
            .iter()
            .chain(comp.vectors().iter())
            .cloned()
            .collect();
        let frame = frozen.clone();
        let basis: BasisFn = Box::new(move |_t| Ok(frame.clone()));
        let zeros: Vec<Array1<C64>> = frozen.iter().map(|v| Array1::zeros(v.len())).collect();
        let derivative: BasisFn = Box::new(move |_t| Ok(zeros.clone()));
        BasisTrajectory::new(ambient, dfs_dim, basis, Some(derivative), 1e-6)
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dfs_dim(&self) -> usize {
        self.dfs_dim
    }

    /// All frame vectors at t, checked for count, length, and combined
    /// orthonormality.
    pub fn vectors_at(&self, t: f64) -> Result<Vec<Array1<C64>>> {
        let vectors = (self.basis)(t)?;
        if vectors.len() != self.ambient_dim {
            return Err(Error::DimensionMismatch {
                left: self.ambient_dim,
                right: vectors.len(),
            });
        }
        let mut m = Array2::zeros((self.ambient_dim, self.ambient_dim));
        for (j, v) in vectors.iter().enumerate() {
            if v.len() != self.ambient_dim {
                return Err(Error::DimensionMismatch {
                    left: self.ambient_dim,
                    right: v.len(),
                });
            }
            m.column_mut(j).assign(v);
        }
        let deviation = orthonormality_deviation(&m);
        if deviation > tol::ORTHO_TOL {
            return Err(Error::NotOrthonormal {
                deviation,
                tol: tol::ORTHO_TOL,
            });
        }
        Ok(vectors)
    }

    pub fn dfs_basis_at(&self, t: f64) -> Result<SubspaceBasis> {
        let vectors = self.vectors_at(t)?;
        SubspaceBasis::new(self.ambient_dim, vectors[..self.dfs_dim].to_vec())
    }

    pub fn comp_basis_at(&self, t: f64) -> Result<SubspaceBasis> {
        let vectors = self.vectors_at(t)?;
        SubspaceBasis::new(self.ambient_dim, vectors[self.dfs_dim..].to_vec())
    }

    /// Time derivatives of all frame vectors at t.
    pub fn derivatives_at(&self, t: f64) -> Result<Vec<Array1<C64>>> {
        if let Some(d) = &self.derivative {
            let dots = d(t)?;
            if dots.len() != self.ambient_dim {
                return Err(Error::DimensionMismatch {
                    left: self.ambient_dim,
                    right: dots.len(),
                });
            }
            return Ok(dots);
        }
        let h = self.fd_step;
        if t >= h {
            let plus = (self.basis)(t + h)?;
            let minus = (self.basis)(t - h)?;
            Ok(plus
                .iter()
                .zip(minus.iter())
                .map(|(p, m)| (p - m).mapv(|x| x / C64::new(2.0 * h, 0.0)))
                .collect())
        } else {
            let v0 = (self.basis)(t)?;
            let v1 = (self.basis)(t + h)?;
            let v2 = (self.basis)(t + 2.0 * h)?;
            Ok(v0
                .iter()
                .zip(v1.iter())
                .zip(v2.iter())
                .map(|((a, b), c)| {
                    (&(b * C64::new(4.0, 0.0)) - &(a * C64::new(3.0, 0.0)) - c)
                        .mapv(|x| x / C64::new(2.0 * h, 0.0))
                })
                .collect())
        }
    }
}

/// Frame-rotation generator G(t) = i sum_k |phi_k(t)><d/dt phi_k(t)| over
/// the full frame. Exactly Hermitian when the frame stays orthonormal;
/// finite-difference derivatives leave an O(h^2) deviation that is not
/// smoothed away here.
pub fn compute_g(frame: &BasisTrajectory, t: f64) -> Result<Operator> {
    let vectors = frame.vectors_at(t)?;
    let dots = frame.derivatives_at(t)?;
    let n = frame.ambient_dim();
    let mut entries = Array2::<C64>::zeros((n, n));
    let i_unit = C64::new(0.0, 1.0);
    for (v, dv) in vectors.iter().zip(dots.iter()) {
        if dv.len() != n {
            return Err(Error::DimensionMismatch {
                left: n,
                right: dv.len(),
            });
        }
        for r in 0..n {
            for c in 0..n {
                entries[(r, c)] += i_unit * v[r] * dv[c].conj();
            }
        }
    }
    Operator::new(entries)
}

/// H_eff(t) for a frozen frame (G = 0): H(t) plus the anti-Hermitian
/// jump-operator compensation (i/2) sum_a r_a(t) (conj(c_a) F_a - c_a F_a').
pub fn compute_heff_static(
    model: &LindbladModel,
    t: f64,
    eigenvalues: &[C64],
) -> Result<Operator> {
    if eigenvalues.len() != model.dissipator_terms().len() {
        return Err(Error::DimensionMismatch {
            left: model.dissipator_terms().len(),
            right: eigenvalues.len(),
        });
    }
    let mut heff = model.hamiltonian_at(t)?;
    let rates = model.rates_at(t)?;
    let half_i = C64::new(0.0, 0.5);
    for (alpha, term) in model.dissipator_terms().iter().enumerate() {
        let c = eigenvalues[alpha];
        let rate = rates[alpha];
        if rate == 0.0 || c == C64::new(0.0, 0.0) {
            continue;
        }
        let f = &term.operator;
        let anti = f.scale(c.conj()).sub(&f.dagger().scale(c))?;
        heff = heff.add(&anti.scale(half_i).scale_re(rate))?;
    }
    Ok(heff)
}

/// H_eff(t) for a moving frame: the static part plus G(t).
pub fn compute_heff(
    model: &LindbladModel,
    frame: &BasisTrajectory,
    t: f64,
    eigenvalues: &[C64],
) -> Result<Operator> {
    if frame.ambient_dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            left: model.dim(),
            right: frame.ambient_dim(),
        });
    }
    compute_heff_static(model, t, eigenvalues)?.add(&compute_g(frame, t)?)
}

/// max |<comp_n| heff |phi_j>|: zero exactly when heff maps the subspace
/// into itself.
pub fn dfs_condition_residual(
    heff: &Operator,
    dfs: &SubspaceBasis,
    comp: &SubspaceBasis,
) -> Result<f64> {
    if dfs.ambient_dim() != heff.dim() || comp.ambient_dim() != heff.dim() {
        return Err(Error::DimensionMismatch {
            left: heff.dim(),
            right: dfs.ambient_dim().max(comp.ambient_dim()),
        });
    }
    let mut worst = 0.0f64;
    for phi in dfs.vectors() {
        let h_phi = heff.apply(phi)?;
        for perp in comp.vectors() {
            let leak: C64 = perp
                .iter()
                .zip(h_phi.iter())
                .map(|(a, b)| a.conj() * b)
                .sum();
            worst = worst.max(leak.norm());
        }
    }
    Ok(worst)
}

/// Operator blocks with respect to a subspace/complement split at one
/// probe time.
#[derive(Debug, Clone)]
pub struct BlockDecomposition {
    pub t_eval: f64,
    pub dfs: SubspaceBasis,
    pub comp: SubspaceBasis,
    /// D x D Hamiltonian block on the subspace.
    pub h_dfs: Operator,
    /// D x (N-D) Hamiltonian coupling block.
    pub h_coupling: Array2<C64>,
    /// (N-D) x (N-D) Hamiltonian block on the complement.
    pub h_comp: Operator,
    /// D x D frame-generator block; zero for a stationary frame.
    pub g_dfs: Operator,
    /// D x (N-D) frame-generator coupling block.
    pub g_coupling: Array2<C64>,
    /// (N-D) x (N-D) frame-generator block.
    pub g_comp: Operator,
    pub dissipators: Vec<BlockDissipator>,
}

/// Blocks of one jump operator's time-independent base, plus its rate at
/// the probe time. In the split basis the base takes the form
/// [[c Id, A], [0, B]].
#[derive(Debug, Clone)]
pub struct BlockDissipator {
    pub eigenvalue: C64,
    pub rate: f64,
    /// A: D x (N-D) coupling block.
    pub coupling: Array2<C64>,
    /// B: (N-D) x (N-D) complement block.
    pub comp_block: Operator,
}

/// Splits the model's operators over a subspace/complement pair.
///
/// Requires the combined bases to be a full orthonormal frame, every jump
/// operator to leave the subspace invariant (lower-left block below
/// tolerance), and each subspace block to equal its declared common
/// eigenvalue times the identity. Hamiltonian blocks are evaluated at
/// `t`; jump-operator blocks are the time-independent bases with their
/// rates reported at `t`. `g` is the frame-rotation generator for moving
/// frames (`None` for a stationary split).
pub fn block_decompose(
    model: &LindbladModel,
    dfs: &SubspaceBasis,
    comp: &SubspaceBasis,
    eigenvalues: &[C64],
    g: Option<&Operator>,
    t: f64,
) -> Result<BlockDecomposition> {
    let n = model.dim();
    if dfs.ambient_dim() != n || comp.ambient_dim() != n || dfs.dim() + comp.dim() != n {
        return Err(Error::DimensionMismatch {
            left: n,
            right: dfs.dim() + comp.dim(),
        });
    }
    if eigenvalues.len() != model.dissipator_terms().len() {
        return Err(Error::DimensionMismatch {
            left: model.dissipator_terms().len(),
            right: eigenvalues.len(),
        });
    }
    if let Some(g) = g {
        if g.dim() != n {
            return Err(Error::DimensionMismatch {
                left: n,
                right: g.dim(),
            });
        }
    }
    let mut frame = Array2::<C64>::zeros((n, n));
    for (j, v) in dfs.vectors().iter().chain(comp.vectors().iter()).enumerate() {
        frame.column_mut(j).assign(v);
    }
    let deviation = orthonormality_deviation(&frame);
    if deviation > tol::ORTHO_TOL {
        return Err(Error::NotOrthonormal {
            deviation,
            tol: tol::ORTHO_TOL,
        });
    }

    let u_d = dfs.column_matrix();
    let u_c = comp.column_matrix();
    let h = model.hamiltonian_at(t)?;
    let h_dfs = Operator::new(sandwich(&u_d, h.entries(), &u_d))?;
    let h_coupling = sandwich(&u_d, h.entries(), &u_c);
    let h_comp = Operator::new(sandwich(&u_c, h.entries(), &u_c))?;
    let (g_dfs, g_coupling, g_comp) = match g {
        Some(g) => (
            Operator::new(sandwich(&u_d, g.entries(), &u_d))?,
            sandwich(&u_d, g.entries(), &u_c),
            Operator::new(sandwich(&u_c, g.entries(), &u_c))?,
        ),
        None => (
            Operator::zeros(dfs.dim()),
            Array2::zeros((dfs.dim(), comp.dim())),
            Operator::zeros(comp.dim()),
        ),
    };

    let rates = model.rates_at(t)?;
    let mut dissipators = Vec::with_capacity(rates.len());
    for (alpha, term) in model.dissipator_terms().iter().enumerate() {
        let f = term.operator.entries();
        let scale = term.operator.max_abs().max(1.0);

        let lower_left = sandwich(&u_c, f, &u_d);
        let leak = max_abs_of(&lower_left);
        if leak > tol::DFS_TOL * scale {
            return Err(Error::NotInvariantSubspace { norm: leak });
        }

        let f_dfs = sandwich(&u_d, f, &u_d);
        let c = eigenvalues[alpha];
        let mut id_defect = 0.0f64;
        for i in 0..dfs.dim() {
            for j in 0..dfs.dim() {
                let target = if i == j { c } else { C64::new(0.0, 0.0) };
                id_defect = id_defect.max((f_dfs[(i, j)] - target).norm());
            }
        }
        if id_defect > tol::DFS_TOL * scale {
            return Err(Error::InvalidModel {
                reason: format!(
                    "jump operator {alpha} is not {c} times the identity on the subspace \
                     (defect {id_defect:.3e})"
                ),
            });
        }

        dissipators.push(BlockDissipator {
            eigenvalue: c,
            rate: rates[alpha],
            coupling: sandwich(&u_d, f, &u_c),
            comp_block: Operator::new(sandwich(&u_c, f, &u_c))?,
        });
    }

    Ok(BlockDecomposition {
        t_eval: t,
        dfs: dfs.clone(),
        comp: comp.clone(),
        h_dfs,
        h_coupling,
        h_comp,
        g_dfs,
        g_coupling,
        g_comp,
        dissipators,
    })
}

/// Decoupling data for a block pair: the effective off-block coupling
/// X = i (G^N + H^N) - sum_a r_a (conj(c_a)/2) A_a and the norm of the
/// off-diagonal flow I^D X - X I^C it would feed.
#[derive(Debug, Clone, Copy)]
pub struct DecouplingReport {
    /// max |.| of I^D X - X I^C: zero exactly when a block-diagonal
    /// invariant built from this pair stays block-diagonal.
    pub residual: f64,
    /// max |.| of X itself, to tell "X = 0" apart from "X nonzero but
    /// commuting with the pair".
    pub coupling_norm: f64,
}

/// Measures how strongly a block pair (I^D, I^C) is coupled through the
/// split's off-diagonal channels at the decomposition's probe time.
pub fn decoupling_residual(
    blocks: &BlockDecomposition,
    dfs_block: &Operator,
    comp_block: &Operator,
) -> Result<DecouplingReport> {
    let d = blocks.dfs.dim();
    let c = blocks.comp.dim();
    if dfs_block.dim() != d {
        return Err(Error::DimensionMismatch {
            left: d,
            right: dfs_block.dim(),
        });
    }
    if comp_block.dim() != c {
        return Err(Error::DimensionMismatch {
            left: c,
            right: comp_block.dim(),
        });
    }
    dfs_block.ensure_hermitian(tol::HERMITIAN_TOL)?;
    comp_block.ensure_hermitian(tol::HERMITIAN_TOL)?;

    let i_unit = C64::new(0.0, 1.0);
    let mut x: Array2<C64> = (&blocks.g_coupling + &blocks.h_coupling).mapv(|v| v * i_unit);
    for diss in &blocks.dissipators {
        let weight = C64::new(0.5 * diss.rate, 0.0) * diss.eigenvalue.conj();
        x = x - diss.coupling.mapv(|v| v * weight);
    }
    let flow = dfs_block.entries().dot(&x) - x.dot(comp_block.entries());
    Ok(DecouplingReport {
        residual: max_abs_of(&flow),
        coupling_norm: max_abs_of(&x),
    })
}

/// U' M V for column matrices U, V.
pub(crate) fn sandwich(u: &Array2<C64>, m: &Array2<C64>, v: &Array2<C64>) -> Array2<C64> {
    let u_dag = u.t().mapv(|x| x.conj());
    u_dag.dot(m).dot(v)
}

pub(crate) fn max_abs_of(m: &Array2<C64>) -> f64 {
    m.iter().map(|x| x.norm()).fold(0.0, f64::max)
}
