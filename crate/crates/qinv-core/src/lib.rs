//! Numerical core for dynamical invariants of Markovian open quantum
//! systems: Lindblad propagation of states and invariants, eigenvalue
//! flow along invariant trajectories, decoherence-free-subspace
//! detection, block-form invariant construction, and a two-qubit
//! collective-dephasing example with closed-form cross-checks.

pub mod block;
pub mod dephasing;
pub mod dfs;
pub mod error;
pub mod export;
pub mod grid;
pub mod lindblad;
pub mod operator;
pub mod schedule;
pub mod spectral;
pub mod subspace;
pub mod tol;

pub use block::{
    assemble_invariant, complement_eigenflow, project_blocks, propagate_blocks,
    propagate_comp_block, propagate_dfs_block, verify_full_invariant, BlockInvariant,
    FullInvariantReport,
};
pub use dephasing::{
    analytic_comp_eigenvalues, analytic_comp_invariant, analytic_dfs_invariant,
    analytic_eigenpairs, build_two_qubit_model, collective_dephasing_model, collective_sz,
    compare_analytic_numeric, riccati_equation_residual, riccati_solve_second_order, xy_exchange,
    BlochCoefficients, BlochEigenpairs, DephasingComparison, DephasingScenario,
};
pub use dfs::{
    block_decompose, compute_g, compute_heff, compute_heff_static, decoupling_residual,
    dfs_condition_residual, find_static_dfs, BasisTrajectory, BlockDecomposition,
    BlockDissipator, DecouplingReport, DfsCandidate,
};
pub use error::{Error, Result};
pub use export::{atomic_write, format_float, to_json_fixed, CsvWriter};
pub use grid::TimeGrid;
pub use lindblad::{
    expectation_series, DissipatorTerm, EigenFlowRecord, ExpectationSeries, HamiltonianTerm,
    InvariantTrajectory, LindbladModel, StateDiagnostics, StateTrajectory,
};
pub use operator::{
    anticommutator, commutator, embed_single_qubit, product_trace, tensor_product, Operator, C64,
};
pub use schedule::CoefficientSchedule;
pub use spectral::{spectral_decompose, EigenSystem};
pub use subspace::{subspace_intersection, SubspaceBasis};
