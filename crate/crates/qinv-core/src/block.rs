//! Block-form invariants over a subspace/complement split.
//!
//! When every jump operator leaves a subspace invariant and acts on it as
//! a scalar, an invariant that starts block-diagonal over the split stays
//! block-diagonal, and the two blocks close on themselves: the subspace
//! block evolves unitarily under the frame and Hamiltonian blocks alone,
//! while the complement block picks up the dissipative part. This module
//! propagates the pair, assembles it back into the ambient space, checks
//! the assembled operator against the full invariant equation, and tracks
//! the complement block's eigenvalue flow.

use ndarray::{s, Array2};

use crate::dfs::{block_decompose, compute_g, sandwich, BasisTrajectory, BlockDecomposition};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::lindblad::{rk4_step, EigenFlowRecord, InvariantTrajectory, LindbladModel};
use crate::operator::{anticommutator, commutator, Operator, C64};
use crate::subspace::SubspaceBasis;
use crate::tol;

/// A block-diagonal invariant: one Hermitian block on the subspace, one
/// on its complement, with all cross terms identically zero.
#[derive(Debug, Clone)]
pub struct BlockInvariant {
    /// D x D block acting on the subspace.
    pub dfs_block: Operator,
    /// (N-D) x (N-D) block acting on the complement.
    pub comp_block: Operator,
}

/// Consistency numbers relating a block-propagated invariant to the full
/// invariant equation; see `verify_full_invariant`.
#[derive(Debug, Clone, Copy)]
pub struct FullInvariantReport {
    /// Worst finite-difference defect of the assembled trajectory against
    /// the full invariant equation. Second-order small in the step when
    /// the split decouples; floored at the decoupling residual otherwise.
    pub equation_residual: f64,
    /// Largest off-diagonal block magnitude seen when the same initial
    /// operator is propagated by the full equation instead: stays at
    /// rounding level exactly when the decoupling condition holds.
    pub max_offdiagonal: f64,
}

/// Blocks of the model at one time over a moving frame: frame bases, the
/// frame generator, and each jump operator's measured common eigenvalue.
fn frame_blocks(
    model: &LindbladModel,
    frame: &BasisTrajectory,
    t: f64,
) -> Result<BlockDecomposition> {
    let dfs = frame.dfs_basis_at(t)?;
    let comp = frame.comp_basis_at(t)?;
    let g = compute_g(frame, t)?;
    let u_d = dfs.column_matrix();
    let d = dfs.dim();
    let mut eigenvalues = Vec::with_capacity(model.dissipator_terms().len());
    for term in model.dissipator_terms() {
        let f_dfs = sandwich(&u_d, term.operator.entries(), &u_d);
        let mut tr = C64::new(0.0, 0.0);
        for i in 0..d {
            tr += f_dfs[(i, i)];
        }
        // block_decompose verifies the block is this value times the identity
        eigenvalues.push(tr / C64::new(d.max(1) as f64, 0.0));
    }
    block_decompose(model, &dfs, &comp, &eigenvalues, Some(&g), t)
}

/// dI^D/dt = -i [G^D + H^D, I^D]: the subspace block never feels the
/// dissipator, so its spectrum is conserved.
fn dfs_block_rhs(blocks: &BlockDecomposition, dfs_block: &Operator) -> Result<Operator> {
    let k = blocks.g_dfs.add(&blocks.h_dfs)?;
    Ok(commutator(&k, dfs_block)?.scale(C64::new(0.0, -1.0)))
}

/// dI^C/dt = -i [G^C + H^C, I^C]
///           + sum_a r_a ( (1/2){A'A + B'B, I^C} - A' I^D A - B' I^C B ),
///
/// the complement block of the full invariant equation restricted to
/// block-diagonal operators over the split.
fn comp_block_rhs(
    blocks: &BlockDecomposition,
    dfs_block: &Operator,
    comp_block: &Operator,
) -> Result<Operator> {
    let k = blocks.g_comp.add(&blocks.h_comp)?;
    let mut out = commutator(&k, comp_block)?.scale(C64::new(0.0, -1.0));
    for diss in &blocks.dissipators {
        if diss.rate == 0.0 {
            continue;
        }
        let a = &diss.coupling;
        let a_dag = a.t().mapv(|x| x.conj());
        let b = diss.comp_block.entries();
        let b_dag = b.t().mapv(|x| x.conj());
        let gram = Operator::new(a_dag.dot(a) + b_dag.dot(b))?;
        let term = anticommutator(&gram, comp_block)?
            .scale_re(0.5)
            .sub(&Operator::new(a_dag.dot(dfs_block.entries()).dot(a))?)?
            .sub(&Operator::new(b_dag.dot(comp_block.entries()).dot(b))?)?;
        out = out.add(&term.scale_re(diss.rate))?;
    }
    Ok(out)
}

fn split_blocks(joint: &Operator, d: usize) -> (Operator, Operator) {
    let e = joint.entries();
    let dfs = Operator::new(e.slice(s![..d, ..d]).to_owned()).expect("square by construction");
    let comp = Operator::new(e.slice(s![d.., d..]).to_owned()).expect("square by construction");
    (dfs, comp)
}

fn join_blocks(dfs: &Operator, comp: &Operator) -> Operator {
    let d = dfs.dim();
    let n = d + comp.dim();
    let mut e = Array2::<C64>::zeros((n, n));
    e.slice_mut(s![..d, ..d]).assign(dfs.entries());
    e.slice_mut(s![d.., d..]).assign(comp.entries());
    Operator::new(e).expect("square by construction")
}

/// RK4 on the coupled block pair, carried as one block-diagonal matrix so
/// both blocks share stage times and stage values. Off-diagonal entries
/// are never written: they stay exactly zero.
fn integrate_blocks(
    model: &LindbladModel,
    frame: &BasisTrajectory,
    dfs0: &Operator,
    comp0: &Operator,
    grid: &TimeGrid,
) -> Result<(Vec<Operator>, Vec<Operator>)> {
    if frame.ambient_dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            left: model.dim(),
            right: frame.ambient_dim(),
        });
    }
    let d = frame.dfs_dim();
    if dfs0.dim() != d {
        return Err(Error::DimensionMismatch {
            left: d,
            right: dfs0.dim(),
        });
    }
    if comp0.dim() != frame.ambient_dim() - d {
        return Err(Error::DimensionMismatch {
            left: frame.ambient_dim() - d,
            right: comp0.dim(),
        });
    }
    model.check_horizon(grid.t_final())?;
    dfs0.ensure_hermitian(tol::HERMITIAN_TOL)?;
    comp0.ensure_hermitian(tol::HERMITIAN_TOL)?;

    let mut current = join_blocks(&dfs0.symmetrize(), &comp0.symmetrize());
    let mut dfs_ops = Vec::with_capacity(grid.len());
    let mut comp_ops = Vec::with_capacity(grid.len());
    let (i0, c0) = split_blocks(&current, d);
    dfs_ops.push(i0);
    comp_ops.push(c0);

    for k in 0..grid.steps() {
        let next = rk4_step(
            |t, y| {
                let blocks = frame_blocks(model, frame, t)?;
                let (dfs_block, comp_block) = split_blocks(y, d);
                let dfs_dot = dfs_block_rhs(&blocks, &dfs_block)?;
                let comp_dot = comp_block_rhs(&blocks, &dfs_block, &comp_block)?;
                Ok(join_blocks(&dfs_dot, &comp_dot))
            },
            grid.time(k),
            grid.time(k + 1),
            &current,
        )?;
        let drift = next.hermiticity_deviation();
        if drift > tol::HERM_DRIFT_TOL {
            return Err(Error::IntegrationQuality {
                step: k + 1,
                what: format!("hermiticity drift {drift:.3e}"),
            });
        }
        current = next.symmetrize();
        let (dfs_block, comp_block) = split_blocks(&current, d);
        dfs_ops.push(dfs_block);
        comp_ops.push(comp_block);
    }
    Ok((dfs_ops, comp_ops))
}

/// Propagates the subspace block by dI^D/dt = -i [G^D + H^D, I^D].
pub fn propagate_dfs_block(
    model: &LindbladModel,
    frame: &BasisTrajectory,
    dfs0: &Operator,
    grid: &TimeGrid,
) -> Result<InvariantTrajectory> {
    let comp0 = Operator::zeros(frame.ambient_dim().saturating_sub(frame.dfs_dim()));
    let (dfs_ops, _) = integrate_blocks(model, frame, dfs0, &comp0, grid)?;
    InvariantTrajectory::from_operators(grid.clone(), dfs_ops)
}

/// Propagates the complement block, sourced by the subspace block through
/// the jump operators' coupling columns.
///
/// The coupled pair is re-integrated jointly from `dfs_traj`'s initial
/// block, so the source term sees stage values consistent with the same
/// integrator that produced `dfs_traj`; the trajectory argument fixes the
/// grid and initial block.
pub fn propagate_comp_block(
    model: &LindbladModel,
    frame: &BasisTrajectory,
    dfs_traj: &InvariantTrajectory,
    comp0: &Operator,
    grid: &TimeGrid,
) -> Result<InvariantTrajectory> {
    if dfs_traj.grid() != grid {
        return Err(Error::GridMismatch {
            left: grid.len(),
            right: dfs_traj.len(),
        });
    }
    let (_, comp_ops) = integrate_blocks(model, frame, dfs_traj.operator(0), comp0, grid)?;
    InvariantTrajectory::from_operators(grid.clone(), comp_ops)
}

/// Propagates both blocks of a block-diagonal invariant jointly.
pub fn propagate_blocks(
    model: &LindbladModel,
    frame: &BasisTrajectory,
    initial: &BlockInvariant,
    grid: &TimeGrid,
) -> Result<(InvariantTrajectory, InvariantTrajectory)> {
    let (dfs_ops, comp_ops) =
        integrate_blocks(model, frame, &initial.dfs_block, &initial.comp_block, grid)?;
    Ok((
        InvariantTrajectory::from_operators(grid.clone(), dfs_ops)?,
        InvariantTrajectory::from_operators(grid.clone(), comp_ops)?,
    ))
}

fn check_split(dfs: &SubspaceBasis, comp: &SubspaceBasis) -> Result<()> {
    if dfs.ambient_dim() != comp.ambient_dim() || dfs.dim() + comp.dim() != dfs.ambient_dim() {
        return Err(Error::DimensionMismatch {
            left: dfs.ambient_dim(),
            right: dfs.dim() + comp.dim(),
        });
    }
    Ok(())
}

/// Embeds a block pair into the ambient space:
/// sum_ij ID_ij |phi_i><phi_j| + sum_mn IC_mn |perp_m><perp_n|.
pub fn assemble_invariant(
    dfs: &SubspaceBasis,
    comp: &SubspaceBasis,
    invariant: &BlockInvariant,
) -> Result<Operator> {
    check_split(dfs, comp)?;
    if invariant.dfs_block.dim() != dfs.dim() || invariant.comp_block.dim() != comp.dim() {
        return Err(Error::DimensionMismatch {
            left: dfs.dim() + comp.dim(),
            right: invariant.dfs_block.dim() + invariant.comp_block.dim(),
        });
    }
    let u_d = dfs.column_matrix();
    let u_c = comp.column_matrix();
    let embedded = u_d
        .dot(invariant.dfs_block.entries())
        .dot(&u_d.t().mapv(|x| x.conj()))
        + u_c
            .dot(invariant.comp_block.entries())
            .dot(&u_c.t().mapv(|x| x.conj()));
    Operator::new(embedded)
}

/// Restriction of an ambient operator to the split's two diagonal blocks,
/// the inverse of `assemble_invariant` on block-diagonal operators.
pub fn project_blocks(
    dfs: &SubspaceBasis,
    comp: &SubspaceBasis,
    ambient: &Operator,
) -> Result<BlockInvariant> {
    check_split(dfs, comp)?;
    if ambient.dim() != dfs.ambient_dim() {
        return Err(Error::DimensionMismatch {
            left: dfs.ambient_dim(),
            right: ambient.dim(),
        });
    }
    let u_d = dfs.column_matrix();
    let u_c = comp.column_matrix();
    Ok(BlockInvariant {
        dfs_block: Operator::new(sandwich(&u_d, ambient.entries(), &u_d))?,
        comp_block: Operator::new(sandwich(&u_c, ambient.entries(), &u_c))?,
    })
}

/// Checks an assembled block trajectory against the full invariant
/// equation, and re-propagates its initial operator by the full equation
/// to watch the off-diagonal block that block-form propagation holds at
/// zero by construction.
pub fn verify_full_invariant(
    model: &LindbladModel,
    frame: &BasisTrajectory,
    assembled: &InvariantTrajectory,
) -> Result<FullInvariantReport> {
    if frame.ambient_dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            left: model.dim(),
            right: frame.ambient_dim(),
        });
    }
    let equation_residual = model.invariant_residual(assembled)?;

    let direct = model.propagate_invariant(assembled.operator(0), assembled.grid())?;
    let mut max_offdiagonal = 0.0f64;
    for k in 0..direct.len() {
        let t = direct.grid().time(k);
        let u_d = frame.dfs_basis_at(t)?.column_matrix();
        let u_c = frame.comp_basis_at(t)?.column_matrix();
        let off = sandwich(&u_d, direct.operator(k).entries(), &u_c);
        max_offdiagonal = max_offdiagonal.max(crate::dfs::max_abs_of(&off));
    }
    Ok(FullInvariantReport {
        equation_residual,
        max_offdiagonal,
    })
}

/// Eigenvalue-flow records for the complement block: for every grid point
/// and eigenvalue slot n of I^C,
///
/// ```text
/// rhs_n = sum_a r_a ( sum_j (lambda_n - lambda_j^D) |<psi_j| A_a psi_n>|^2
///                   + sum_{m != n} (lambda_n - lambda_m) |<psi_m| B_a psi_n>|^2 )
/// ```
///
/// is compared against a finite-difference estimate of d lambda_n / dt,
/// exactly as in `LindbladModel::eigenflow`. The decomposition's probe-time
/// rates are used at every sample; rebuild the decomposition along the grid
/// when rates vary strongly.
pub fn complement_eigenflow(
    blocks: &BlockDecomposition,
    dfs_traj: &InvariantTrajectory,
    comp_traj: &InvariantTrajectory,
) -> Result<Vec<EigenFlowRecord>> {
    if dfs_traj.grid() != comp_traj.grid() {
        return Err(Error::GridMismatch {
            left: dfs_traj.len(),
            right: comp_traj.len(),
        });
    }
    let n = comp_traj.len();
    if n < 3 {
        return Err(Error::TooFewSamples { need: 3, got: n });
    }
    let d_dim = blocks.dfs.dim();
    let c_dim = blocks.comp.dim();
    if dfs_traj.operator(0).dim() != d_dim || comp_traj.operator(0).dim() != c_dim {
        return Err(Error::DimensionMismatch {
            left: d_dim + c_dim,
            right: dfs_traj.operator(0).dim() + comp_traj.operator(0).dim(),
        });
    }

    let dt = comp_traj.grid().dt();
    let mut records = Vec::with_capacity(n * c_dim);
    for k in 0..n {
        let t = comp_traj.grid().time(k);
        let comp_sys = comp_traj.eigensystem(k);
        let dfs_sys = dfs_traj.eigensystem(k);
        let scale = comp_traj.operator(k).max_abs().max(1.0);
        let degenerate = comp_sys.min_gap() <= tol::DEGENERACY_TOL_REL * scale;

        for slot in 0..c_dim {
            let lambda = comp_sys.values[slot];
            let psi = comp_sys.vector(slot);
            let mut rhs = 0.0;
            for diss in &blocks.dissipators {
                if diss.rate == 0.0 {
                    continue;
                }
                let a_psi = diss.coupling.dot(&psi);
                for j in 0..d_dim {
                    let amp: C64 = dfs_sys
                        .vectors
                        .column(j)
                        .iter()
                        .zip(a_psi.iter())
                        .map(|(u, v)| u.conj() * v)
                        .sum();
                    rhs += diss.rate * (lambda - dfs_sys.values[j]) * amp.norm_sqr();
                }
                let b_psi = diss.comp_block.entries().dot(&psi);
                for m in 0..c_dim {
                    if m == slot {
                        continue;
                    }
                    let amp: C64 = comp_sys
                        .vectors
                        .column(m)
                        .iter()
                        .zip(b_psi.iter())
                        .map(|(u, v)| u.conj() * v)
                        .sum();
                    rhs += diss.rate * (lambda - comp_sys.values[m]) * amp.norm_sqr();
                }
            }

            let curve = |i: usize| comp_traj.eigensystem(i).values[slot];
            let fd = if k == 0 {
                (-3.0 * curve(0) + 4.0 * curve(1) - curve(2)) / (2.0 * dt)
            } else if k == n - 1 {
                (3.0 * curve(n - 1) - 4.0 * curve(n - 2) + curve(n - 3)) / (2.0 * dt)
            } else {
                (curve(k + 1) - curve(k - 1)) / (2.0 * dt)
            };

            records.push(EigenFlowRecord {
                time: t,
                index: slot,
                lambda,
                rhs,
                fd,
                defect: (rhs - fd).abs(),
                degenerate,
            });
        }
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dfs::{decoupling_residual, find_static_dfs};
    use crate::lindblad::{expectation_series, DissipatorTerm, HamiltonianTerm};
    use crate::operator::tensor_product;
    use crate::schedule::CoefficientSchedule;

    fn collective_dephasing(g: f64, bz: f64, gamma: f64) -> LindbladModel {
        let sz = Operator::pauli_z();
        let sx = Operator::pauli_x();
        let sy = Operator::pauli_y();
        let id2 = Operator::identity(2);
        let f = tensor_product(&sz, &id2)
            .add(&tensor_product(&id2, &sz))
            .unwrap();
        let o12x = tensor_product(&sx, &sx)
            .add(&tensor_product(&sy, &sy))
            .unwrap()
            .scale_re(0.5);
        let oz = f.scale_re(0.5);
        LindbladModel::new(
            4,
            vec![
                HamiltonianTerm {
                    operator: o12x,
                    schedule: CoefficientSchedule::constant(g),
                },
                HamiltonianTerm {
                    operator: oz,
                    schedule: CoefficientSchedule::constant(bz),
                },
            ],
            vec![DissipatorTerm {
                operator: f,
                rate: CoefficientSchedule::constant(gamma),
            }],
        )
        .unwrap()
    }

    /// Splits |01>,|10> / |00>,|11> as found by the subspace search.
    fn dephasing_frame(model: &LindbladModel) -> (SubspaceBasis, SubspaceBasis, BasisTrajectory) {
        let candidates = find_static_dfs(model, 0.0, tol::DFS_TOL).unwrap();
        let dfs = candidates[1].basis.clone();
        let comp = candidates[1].complement.clone();
        let frame = BasisTrajectory::from_static(&dfs, &comp).unwrap();
        (dfs, comp, frame)
    }

    fn bloch(op: &Operator) -> (f64, f64, f64) {
        let x = crate::operator::product_trace(&Operator::pauli_x(), op).unwrap();
        let y = crate::operator::product_trace(&Operator::pauli_y(), op).unwrap();
        let z = crate::operator::product_trace(&Operator::pauli_z(), op).unwrap();
        (0.5 * x.re, 0.5 * y.re, 0.5 * z.re)
    }

    fn from_bloch(x: f64, y: f64, z: f64) -> Operator {
        Operator::pauli_x()
            .scale_re(x)
            .add(&Operator::pauli_y().scale_re(y))
            .unwrap()
            .add(&Operator::pauli_z().scale_re(z))
            .unwrap()
    }

    #[test]
    fn identity_dfs_block_is_constant() {
        let model = collective_dephasing(1.0, 1.0, 0.05);
        let (_, _, frame) = dephasing_frame(&model);
        let grid = TimeGrid::new(1.0, 200).unwrap();
        let traj = propagate_dfs_block(&model, &frame, &Operator::identity(2), &grid).unwrap();
        for op in traj.operators() {
            assert!(op.sub(&Operator::identity(2)).unwrap().max_abs() <= 1e-13);
        }
    }

    #[test]
    fn dfs_block_rotates_at_twice_the_exchange_rate() {
        // g(t) = 1 + 0.25 t, so the accumulated angle is 2 Lambda(T) with
        // Lambda(T) = T + 0.125 T^2
        let g_schedule = CoefficientSchedule::Polynomial {
            coeffs: vec![1.0, 0.25],
        };
        let model = {
            let base = collective_dephasing(1.0, 0.7, 0.05);
            let mut terms = base.hamiltonian_terms().to_vec();
            terms[0].schedule = g_schedule;
            LindbladModel::new(4, terms, base.dissipator_terms().to_vec()).unwrap()
        };
        let (_, _, frame) = dephasing_frame(&model);
        let grid = TimeGrid::new(1.0, 2000).unwrap();
        let (x0, y0, z0) = (0.3, 0.7, -0.2);
        let traj = propagate_dfs_block(&model, &frame, &from_bloch(x0, y0, z0), &grid).unwrap();

        let t_final = grid.t_final();
        let lambda = t_final + 0.125 * t_final * t_final;
        let (x, y, z) = bloch(traj.final_operator());
        // the exchange component rides along unchanged
        assert!((x - x0).abs() <= 1e-9, "x drifted: {x} vs {x0}");
        // (y, z) rotates rigidly: y + iz picks up exp(2 i Lambda)
        let r0 = C64::new(y0, z0);
        let r = C64::new(y, z);
        assert!((r.norm() - r0.norm()).abs() <= 1e-8);
        let expected = r0 * C64::new(0.0, 2.0 * lambda).exp();
        assert!((r - expected).norm() <= 1e-6, "rotation off: {r} vs {expected}");
    }

    #[test]
    fn dfs_block_spectrum_is_conserved() {
        let model = collective_dephasing(1.0, 1.0, 0.05);
        let (_, _, frame) = dephasing_frame(&model);
        let grid = TimeGrid::new(2.0, 4000).unwrap();
        let traj = propagate_dfs_block(&model, &frame, &from_bloch(0.4, -0.3, 0.6), &grid).unwrap();
        let initial = traj.eigensystem(0).values.clone();
        for k in 0..traj.len() {
            let sys = traj.eigensystem(k);
            // slots track eigenvectors; compare as sorted spectra
            let mut now = sys.values.clone();
            let mut then = initial.clone();
            now.sort_by(|a, b| a.partial_cmp(b).unwrap());
            then.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for (a, b) in now.iter().zip(then.iter()) {
                assert!((a - b).abs() <= 1e-8, "spectrum moved: {a} vs {b}");
            }
        }
    }

    #[test]
    fn comp_block_is_constant_without_generators() {
        let model = LindbladModel::closed(Operator::zeros(4)).unwrap();
        let (_, _, frame) = {
            let dfs = SubspaceBasis::standard(4, &[1, 2]);
            let comp = SubspaceBasis::standard(4, &[0, 3]);
            let f = BasisTrajectory::from_static(&dfs, &comp).unwrap();
            (dfs, comp, f)
        };
        let grid = TimeGrid::new(1.0, 100).unwrap();
        let comp0 = from_bloch(0.2, -0.4, 0.9);
        let dfs_traj = propagate_dfs_block(&model, &frame, &Operator::zeros(2), &grid).unwrap();
        let traj = propagate_comp_block(&model, &frame, &dfs_traj, &comp0, &grid).unwrap();
        for op in traj.operators() {
            assert!(op.sub(&comp0).unwrap().max_abs() <= 1e-13);
        }
    }

    #[test]
    fn comp_block_conserves_the_population_difference() {
        // I^C = sigma_z commutes with both the complement Hamiltonian and
        // the jump block, so it sits still
        let model = collective_dephasing(1.0, 1.0, 0.1);
        let (_, _, frame) = dephasing_frame(&model);
        let grid = TimeGrid::new(1.0, 1000).unwrap();
        let dfs_traj = propagate_dfs_block(&model, &frame, &Operator::pauli_z(), &grid).unwrap();
        let traj =
            propagate_comp_block(&model, &frame, &dfs_traj, &Operator::pauli_z(), &grid).unwrap();
        for op in traj.operators() {
            assert!(op.sub(&Operator::pauli_z()).unwrap().max_abs() <= 1e-9);
        }
    }

    #[test]
    fn comp_block_transverse_part_grows_exponentially() {
        let gamma = 0.1;
        let model = collective_dephasing(1.0, 1.0, gamma);
        let (_, _, frame) = dephasing_frame(&model);
        let grid = TimeGrid::new(1.0, 8000).unwrap();
        let dfs_traj = propagate_dfs_block(&model, &frame, &Operator::pauli_z(), &grid).unwrap();
        let comp0 = from_bloch(1.0, 0.0, 0.25);
        let traj = propagate_comp_block(&model, &frame, &dfs_traj, &comp0, &grid).unwrap();

        let mut max_trace_drift = 0.0f64;
        for (k, op) in traj.operators().iter().enumerate() {
            let t = grid.time(k);
            let (x, y, z) = bloch(op);
            let rho = (x * x + y * y).sqrt();
            let expected = (8.0 * gamma * t).exp();
            assert!(
                (rho / expected - 1.0).abs() <= 1e-6,
                "transverse envelope off at t={t}: {rho} vs {expected}"
            );
            assert!((z - 0.25).abs() <= 1e-9);
            max_trace_drift = max_trace_drift.max((op.trace() - comp0.trace()).norm());
        }
        assert!(max_trace_drift <= 1e-9);
    }

    #[test]
    fn assembled_identity_blocks_give_the_ambient_identity() {
        let dfs = SubspaceBasis::standard(4, &[1, 2]);
        let comp = SubspaceBasis::standard(4, &[0, 3]);
        let invariant = BlockInvariant {
            dfs_block: Operator::identity(2),
            comp_block: Operator::identity(2),
        };
        let assembled = assemble_invariant(&dfs, &comp, &invariant).unwrap();
        assert!(assembled.sub(&Operator::identity(4)).unwrap().max_abs() == 0.0);
    }

    #[test]
    fn assemble_then_project_round_trips_exactly() {
        // exact unit-vector bases make the round trip bitwise
        let dfs = SubspaceBasis::standard(4, &[1, 2]);
        let comp = SubspaceBasis::standard(4, &[0, 3]);
        let invariant = BlockInvariant {
            dfs_block: Operator::pauli_z(),
            comp_block: from_bloch(0.3, -0.8, 0.5),
        };
        let assembled = assemble_invariant(&dfs, &comp, &invariant).unwrap();

        // sigma_z over span{|01>, |10>} lands on the middle of the diagonal
        let expected = Operator::diag(&[0.0, -1.0, 1.0, 0.0])
            .add(&assemble_invariant(
                &dfs,
                &comp,
                &BlockInvariant {
                    dfs_block: Operator::zeros(2),
                    comp_block: invariant.comp_block.clone(),
                },
            ).unwrap())
            .unwrap();
        assert!(assembled.sub(&expected).unwrap().max_abs() == 0.0);

        // the split bases are exact unit vectors, so the round trip is bitwise
        let back = project_blocks(&dfs, &comp, &assembled).unwrap();
        assert_eq!(
            back.dfs_block.entries(),
            invariant.dfs_block.entries()
        );
        assert_eq!(
            back.comp_block.entries(),
            invariant.comp_block.entries()
        );
    }

    #[test]
    fn block_propagation_satisfies_the_full_invariant_equation() {
        let model = collective_dephasing(1.0, 1.0, 0.05);
        let (dfs, comp, frame) = dephasing_frame(&model);
        let grid = TimeGrid::new(1.0, 4000).unwrap();
        let initial = BlockInvariant {
            dfs_block: from_bloch(0.2, 0.5, 0.3),
            comp_block: from_bloch(0.4, -0.1, 0.6),
        };
        let (dfs_traj, comp_traj) = propagate_blocks(&model, &frame, &initial, &grid).unwrap();

        let mut assembled_ops = Vec::with_capacity(grid.len());
        for k in 0..grid.len() {
            let pair = BlockInvariant {
                dfs_block: dfs_traj.operator(k).clone(),
                comp_block: comp_traj.operator(k).clone(),
            };
            assembled_ops.push(assemble_invariant(&dfs, &comp, &pair).unwrap());
        }
        let assembled = InvariantTrajectory::from_operators(grid.clone(), assembled_ops).unwrap();
        let report = verify_full_invariant(&model, &frame, &assembled).unwrap();
        assert!(
            report.equation_residual <= 1e-5,
            "equation residual {}",
            report.equation_residual
        );
        assert!(
            report.max_offdiagonal <= 1e-8,
            "off-diagonal grew to {}",
            report.max_offdiagonal
        );

        // decoupling holds along the whole trajectory
        let blocks = block_decompose(
            &model,
            &dfs,
            &comp,
            &[C64::new(0.0, 0.0)],
            None,
            0.0,
        )
        .unwrap();
        for k in [0, grid.len() / 2, grid.len() - 1] {
            let report =
                decoupling_residual(&blocks, dfs_traj.operator(k), comp_traj.operator(k)).unwrap();
            assert!(report.residual <= 1e-10);
        }
    }

    #[test]
    fn hamiltonian_bridge_breaks_block_closure() {
        // |00><01| + h.c. at strength 0.1 violates the subspace condition:
        // full-equation propagation leaks into the off-diagonal block and
        // the block-propagated pair stops satisfying the full equation,
        // with a residual floor that refining the grid cannot remove
        let eps = 0.1;
        let base = collective_dephasing(1.0, 1.0, 0.05);
        let mut bridge = Operator::zeros(4);
        bridge.set(0, 1, C64::new(1.0, 0.0));
        bridge.set(1, 0, C64::new(1.0, 0.0));
        let model = LindbladModel::new(
            4,
            base.hamiltonian_terms()
                .iter()
                .cloned()
                .chain(std::iter::once(HamiltonianTerm {
                    operator: bridge,
                    schedule: CoefficientSchedule::constant(eps),
                }))
                .collect(),
            base.dissipator_terms().to_vec(),
        )
        .unwrap();
        let candidates = find_static_dfs(&model, 0.0, tol::DFS_TOL).unwrap();
        let dfs = candidates[1].basis.clone();
        let comp = candidates[1].complement.clone();
        let frame = BasisTrajectory::from_static(&dfs, &comp).unwrap();

        let initial = BlockInvariant {
            dfs_block: from_bloch(0.0, 0.0, 1.0),
            comp_block: from_bloch(0.3, 0.0, 0.0),
        };
        let residual_at = |steps: usize| {
            let grid = TimeGrid::new(1.0, steps).unwrap();
            let (dfs_traj, comp_traj) =
                propagate_blocks(&model, &frame, &initial, &grid).unwrap();
            let mut assembled_ops = Vec::with_capacity(grid.len());
            for k in 0..grid.len() {
                let pair = BlockInvariant {
                    dfs_block: dfs_traj.operator(k).clone(),
                    comp_block: comp_traj.operator(k).clone(),
                };
                assembled_ops.push(assemble_invariant(&dfs, &comp, &pair).unwrap());
            }
            let assembled =
                InvariantTrajectory::from_operators(grid.clone(), assembled_ops).unwrap();
            verify_full_invariant(&model, &frame, &assembled).unwrap()
        };

        let coarse = residual_at(500);
        let fine = residual_at(1000);
        assert!(coarse.max_offdiagonal > 1e-3, "leak {}", coarse.max_offdiagonal);
        // the defect is a modeling error, not a discretization error
        assert!(coarse.equation_residual > 1e-3);
        assert!(fine.equation_residual > 0.5 * coarse.equation_residual);
    }

    #[test]
    fn jump_coupling_sources_the_complement_block() {
        // F = [[0, A], [0, B]] with A != 0: the subspace is invariant with
        // eigenvalue 0, so X = i H^N - (conj(c)/2) A vanishes even though
        // A does not, and the complement block is driven by the subspace
        // block. Cross-check the block equations against direct
        // full-equation propagation, which is blind to the block split.
        let mut f = Operator::zeros(4);
        f.set(0, 2, C64::new(0.6, 0.2));
        f.set(1, 3, C64::new(-0.4, 0.0));
        f.set(2, 2, C64::new(1.0, 0.0));
        f.set(2, 3, C64::new(0.3, 0.0));
        f.set(3, 2, C64::new(0.3, 0.0));
        f.set(3, 3, C64::new(-0.5, 0.0));
        let mut h = Operator::zeros(4);
        h.set(0, 1, C64::new(0.7, 0.0));
        h.set(1, 0, C64::new(0.7, 0.0));
        h.set(2, 2, C64::new(0.5, 0.0));
        h.set(3, 3, C64::new(-0.5, 0.0));
        let model = LindbladModel::new(
            4,
            vec![HamiltonianTerm {
                operator: h,
                schedule: CoefficientSchedule::constant(1.0),
            }],
            vec![DissipatorTerm {
                operator: f,
                rate: CoefficientSchedule::constant(0.3),
            }],
        )
        .unwrap();
        let dfs = SubspaceBasis::standard(4, &[0, 1]);
        let comp = SubspaceBasis::standard(4, &[2, 3]);
        let frame = BasisTrajectory::from_static(&dfs, &comp).unwrap();
        let grid = TimeGrid::new(1.0, 2000).unwrap();
        let initial = BlockInvariant {
            dfs_block: from_bloch(0.5, -0.2, 0.8),
            comp_block: from_bloch(-0.3, 0.4, 0.1),
        };

        let blocks =
            block_decompose(&model, &dfs, &comp, &[C64::new(0.0, 0.0)], None, 0.0).unwrap();
        assert!(crate::dfs::max_abs_of(&blocks.dissipators[0].coupling) > 0.5);
        let rep =
            decoupling_residual(&blocks, &initial.dfs_block, &initial.comp_block).unwrap();
        assert_eq!(rep.coupling_norm, 0.0);

        let (dfs_traj, comp_traj) = propagate_blocks(&model, &frame, &initial, &grid).unwrap();
        // the coupling really feeds the complement block
        let moved = comp_traj
            .final_operator()
            .sub(&initial.comp_block)
            .unwrap()
            .max_abs();
        assert!(moved > 1e-2, "complement block never moved: {moved}");

        let mut assembled_ops = Vec::with_capacity(grid.len());
        for k in 0..grid.len() {
            let pair = BlockInvariant {
                dfs_block: dfs_traj.operator(k).clone(),
                comp_block: comp_traj.operator(k).clone(),
            };
            assembled_ops.push(assemble_invariant(&dfs, &comp, &pair).unwrap());
        }
        let assembled = InvariantTrajectory::from_operators(grid.clone(), assembled_ops).unwrap();
        let report = verify_full_invariant(&model, &frame, &assembled).unwrap();
        assert!(
            report.equation_residual <= 1e-5,
            "equation residual {}",
            report.equation_residual
        );
        assert!(report.max_offdiagonal <= 1e-10);

        // blockwise agreement with the full-equation trajectory
        let direct = model.propagate_invariant(assembled.operator(0), &grid).unwrap();
        for k in [grid.len() / 2, grid.len() - 1] {
            let projected = project_blocks(&dfs, &comp, direct.operator(k)).unwrap();
            let dev_d = projected
                .dfs_block
                .sub(dfs_traj.operator(k))
                .unwrap()
                .max_abs();
            let dev_c = projected
                .comp_block
                .sub(comp_traj.operator(k))
                .unwrap()
                .max_abs();
            assert!(dev_d <= 1e-9, "subspace block deviates by {dev_d}");
            assert!(dev_c <= 1e-9, "complement block deviates by {dev_c}");
        }
    }

    #[test]
    fn complement_eigenflow_matches_finite_differences() {
        let gamma = 0.1;
        let model = collective_dephasing(1.0, 1.0, gamma);
        let (dfs, comp, frame) = dephasing_frame(&model);
        let grid = TimeGrid::new(1.0, 8000).unwrap();
        let initial = BlockInvariant {
            dfs_block: Operator::pauli_z(),
            // z = 0 keeps the complement spectrum +-rho(t), non-degenerate
            comp_block: from_bloch(0.6, -0.3, 0.0),
        };
        let (dfs_traj, comp_traj) = propagate_blocks(&model, &frame, &initial, &grid).unwrap();
        let blocks =
            block_decompose(&model, &dfs, &comp, &[C64::new(0.0, 0.0)], None, 0.0).unwrap();
        let records = complement_eigenflow(&blocks, &dfs_traj, &comp_traj).unwrap();
        assert_eq!(records.len(), grid.len() * 2);

        let rho0 = (0.6f64 * 0.6 + 0.3 * 0.3).sqrt();
        for rec in &records {
            assert!(!rec.degenerate);
            // lambda = +- rho0 exp(8 gamma t)
            let expected = rho0 * (8.0 * gamma * rec.time).exp();
            assert!((rec.lambda.abs() / expected - 1.0).abs() <= 1e-6);
            // rhs tracks d lambda / dt; endpoints carry the one-sided error
            let tol_here = if rec.time == 0.0 || rec.time == grid.t_final() {
                1e-4
            } else {
                1e-5
            };
            assert!(
                rec.defect <= tol_here,
                "defect {} at t={} lam={}",
                rec.defect,
                rec.time,
                rec.lambda
            );
        }
    }

    #[test]
    fn complement_eigenflow_is_silent_for_commuting_blocks() {
        let model = collective_dephasing(1.0, 1.0, 0.1);
        let (dfs, comp, frame) = dephasing_frame(&model);
        let grid = TimeGrid::new(0.5, 200).unwrap();
        let initial = BlockInvariant {
            dfs_block: Operator::pauli_z(),
            // diagonal in the jump block's eigenbasis, distinct eigenvalues
            comp_block: Operator::diag(&[0.3, 0.9]),
        };
        let (dfs_traj, comp_traj) = propagate_blocks(&model, &frame, &initial, &grid).unwrap();
        let blocks =
            block_decompose(&model, &dfs, &comp, &[C64::new(0.0, 0.0)], None, 0.0).unwrap();
        for rec in complement_eigenflow(&blocks, &dfs_traj, &comp_traj).unwrap() {
            assert!(rec.rhs.abs() <= 1e-12);
            assert!(rec.fd.abs() <= 1e-9);
        }

        // fully degenerate complement block: still silent, but flagged
        let flat = BlockInvariant {
            dfs_block: Operator::pauli_z(),
            comp_block: Operator::identity(2).scale_re(0.4),
        };
        let (dfs_traj, comp_traj) = propagate_blocks(&model, &frame, &flat, &grid).unwrap();
        for rec in complement_eigenflow(&blocks, &dfs_traj, &comp_traj).unwrap() {
            assert!(rec.degenerate);
            assert!(rec.rhs.abs() <= 1e-12);
        }
    }

    #[test]
    fn each_block_alone_is_a_full_invariant() {
        let model = collective_dephasing(1.0, 1.0, 0.05);
        let (dfs, comp, frame) = dephasing_frame(&model);
        let grid = TimeGrid::new(1.0, 2000).unwrap();
        let initial = BlockInvariant {
            dfs_block: from_bloch(0.2, 0.5, 0.3),
            comp_block: from_bloch(0.4, -0.1, 0.6),
        };
        let (dfs_traj, comp_traj) = propagate_blocks(&model, &frame, &initial, &grid).unwrap();

        // a state with support on every basis vector
        let mut rho0 = Operator::diag(&[0.1, 0.35, 0.35, 0.2]);
        rho0.set(1, 2, C64::new(0.2, 0.1));
        rho0.set(2, 1, C64::new(0.2, -0.1));
        rho0.set(0, 3, C64::new(0.05, 0.0));
        rho0.set(3, 0, C64::new(0.05, 0.0));
        let states = model.propagate_state(&rho0, &grid).unwrap();

        for keep_dfs in [true, false] {
            let mut ops = Vec::with_capacity(grid.len());
            for k in 0..grid.len() {
                let pair = BlockInvariant {
                    dfs_block: if keep_dfs {
                        dfs_traj.operator(k).clone()
                    } else {
                        Operator::zeros(2)
                    },
                    comp_block: if keep_dfs {
                        Operator::zeros(2)
                    } else {
                        comp_traj.operator(k).clone()
                    },
                };
                ops.push(assemble_invariant(&dfs, &comp, &pair).unwrap());
            }
            let traj = InvariantTrajectory::from_operators(grid.clone(), ops).unwrap();
            let series = expectation_series(&states, &traj).unwrap();
            assert!(
                series.defect <= 1e-6,
                "pairing drifted by {} (dfs alone: {keep_dfs})",
                series.defect
            );
        }
    }

    #[test]
    fn propagation_rejects_mismatched_inputs() {
        let model = collective_dephasing(1.0, 1.0, 0.05);
        let (_, _, frame) = dephasing_frame(&model);
        let grid = TimeGrid::new(1.0, 10).unwrap();

        let wrong = Operator::identity(3);
        assert!(matches!(
            propagate_dfs_block(&model, &frame, &wrong, &grid),
            Err(Error::DimensionMismatch { .. })
        ));

        let dfs_traj =
            propagate_dfs_block(&model, &frame, &Operator::identity(2), &grid).unwrap();
        let other_grid = TimeGrid::new(1.0, 20).unwrap();
        assert!(matches!(
            propagate_comp_block(&model, &frame, &dfs_traj, &Operator::identity(2), &other_grid),
            Err(Error::GridMismatch { .. })
        ));

        let skewed = Operator::from_parts(
            &[vec![0.0, 1.0], vec![0.0, 0.0]],
            &[vec![0.0, 0.0], vec![0.0, 0.0]],
        )
        .unwrap();
        assert!(matches!(
            propagate_dfs_block(&model, &frame, &skewed, &grid),
            Err(Error::NotHermitian { .. })
        ));
    }
}
