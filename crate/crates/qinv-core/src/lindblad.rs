//! Lindblad propagation of density matrices and dynamical invariants on a
//! fixed time grid, plus the consistency checks relating the two.
//!
//! States evolve under
//!
//! ```text
//! drho/dt = -i[H(t), rho] + sum_a r_a(t) (F_a rho F_a' - {F_a' F_a, rho}/2)
//! ```
//!
//! (primes denote conjugate transpose), invariants under the trace-dual
//! equation
//!
//! ```text
//! dI/dt = -i[H(t), I] - sum_a r_a(t) (F_a' I F_a - {F_a' F_a, I}/2),
//! ```
//!
//! so Tr(I(t) rho(t)) stays constant along any state trajectory. The sign
//! of the dissipative part flips between the two equations; with it, a
//! decaying coherence in the state is balanced by a growing coefficient in
//! the invariant.
//!
//! Propagation is classical fixed-step RK4 with re-symmetrization after
//! every step. Trace and positivity are deliberately never corrected, so
//! their drift stays visible as an integration diagnostic.

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::operator::{gemm, product_trace, rk4_combine, Operator, C64};
use crate::schedule::CoefficientSchedule;
use crate::spectral::{spectral_decompose, EigenSystem};
use crate::tol;

/// One Hermitian Hamiltonian term with its scalar coefficient of time.
#[derive(Debug, Clone)]
pub struct HamiltonianTerm {
    pub operator: Operator,
    pub schedule: CoefficientSchedule,
}

/// One jump operator with its nonnegative rate schedule. The effective
/// operator at time t is sqrt(rate(t)) * operator.
#[derive(Debug, Clone)]
pub struct DissipatorTerm {
    pub operator: Operator,
    pub rate: CoefficientSchedule,
}

/// Markovian open-system model: H(t) = sum_k s_k(t) H_k plus dissipator
/// terms (F_a, r_a(t)).
#[derive(Debug, Clone)]
pub struct LindbladModel {
    dim: usize,
    hamiltonian: Vec<HamiltonianTerm>,
    dissipators: Vec<DissipatorTerm>,
    // cached per dissipator: F' and F'F of the (time-independent) base
    daggers: Vec<Operator>,
    grams: Vec<Operator>,
    // assembled H when every coefficient schedule is constant
    static_hamiltonian: Option<Operator>,
}

impl LindbladModel {
    pub fn new(
        dim: usize,
        hamiltonian: Vec<HamiltonianTerm>,
        dissipators: Vec<DissipatorTerm>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidModel {
                reason: "dimension must be positive".into(),
            });
        }
        for term in &hamiltonian {
            if term.operator.dim() != dim {
                return Err(Error::DimensionMismatch {
                    left: dim,
                    right: term.operator.dim(),
                });
            }
            term.operator.ensure_hermitian(tol::HERMITIAN_TOL)?;
            term.schedule.validate()?;
        }
        for term in &dissipators {
            if term.operator.dim() != dim {
                return Err(Error::DimensionMismatch {
                    left: dim,
                    right: term.operator.dim(),
                });
            }
            term.rate.validate()?;
        }
        let daggers: Vec<Operator> = dissipators.iter().map(|t| t.operator.dagger()).collect();
        let grams = dissipators
            .iter()
            .zip(&daggers)
            .map(|(t, d)| d.matmul(&t.operator).expect("same dim"))
            .collect();
        let static_hamiltonian = if hamiltonian
            .iter()
            .all(|t| matches!(t.schedule, CoefficientSchedule::Constant { .. }))
        {
            let mut h = Operator::zeros(dim);
            for term in &hamiltonian {
                let s = term.schedule.eval(0.0)?;
                if s != 0.0 {
                    h = h.add(&term.operator.scale_re(s))?;
                }
            }
            Some(h)
        } else {
            None
        };
        Ok(LindbladModel {
            dim,
            hamiltonian,
            dissipators,
            daggers,
            grams,
            static_hamiltonian,
        })
    }

    /// Closed-system model with a single constant Hamiltonian.
    pub fn closed(h: Operator) -> Result<Self> {
        let dim = h.dim();
        LindbladModel::new(
            dim,
            vec![HamiltonianTerm {
                operator: h,
                schedule: CoefficientSchedule::constant(1.0),
            }],
            Vec::new(),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hamiltonian_terms(&self) -> &[HamiltonianTerm] {
        &self.hamiltonian
    }

    pub fn dissipator_terms(&self) -> &[DissipatorTerm] {
        &self.dissipators
    }

    /// Smallest schedule horizon over all terms.
    pub fn horizon(&self) -> f64 {
        self.hamiltonian
            .iter()
            .map(|t| t.schedule.horizon())
            .chain(self.dissipators.iter().map(|t| t.rate.horizon()))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn check_horizon(&self, t_final: f64) -> Result<()> {
        let t_max = self.horizon();
        if t_final > t_max {
            return Err(Error::OutsideHorizon { t: t_final, t_max });
        }
        Ok(())
    }

    /// H(t) = sum_k s_k(t) H_k.
    pub fn hamiltonian_at(&self, t: f64) -> Result<Operator> {
        if let Some(h) = &self.static_hamiltonian {
            return Ok(h.clone());
        }
        let mut h = Operator::zeros(self.dim);
        for term in &self.hamiltonian {
            let s = term.schedule.eval(t)?;
            if s != 0.0 {
                h = h.add(&term.operator.scale_re(s))?;
            }
        }
        Ok(h)
    }

    /// out = -i [H(t), m], borrowing the assembled Hamiltonian when it is
    /// time-independent.
    fn hamiltonian_commutator_into(&self, t: f64, m: &Operator, out: &mut Operator) -> Result<()> {
        let minus_i = C64::new(0.0, -1.0);
        let plus_i = C64::new(0.0, 1.0);
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        match &self.static_hamiltonian {
            Some(h) => {
                gemm(minus_i, h, m, zero, out)?;
                gemm(plus_i, m, h, one, out)?;
            }
            None => {
                let h = self.hamiltonian_at(t)?;
                gemm(minus_i, &h, m, zero, out)?;
                gemm(plus_i, m, &h, one, out)?;
            }
        }
        Ok(())
    }

    /// Rate values r_a(t), rejecting negatives.
    pub fn rates_at(&self, t: f64) -> Result<Vec<f64>> {
        self.dissipators
            .iter()
            .map(|term| {
                let value = term.rate.eval(t)?;
                if value < 0.0 {
                    return Err(Error::NegativeRate { t, value });
                }
                Ok(value)
            })
            .collect()
    }

    /// Effective jump operators sqrt(r_a(t)) * F_a.
    pub fn lindblad_ops_at(&self, t: f64) -> Result<Vec<Operator>> {
        Ok(self
            .rates_at(t)?
            .into_iter()
            .zip(&self.dissipators)
            .map(|(r, term)| term.operator.scale_re(r.sqrt()))
            .collect())
    }

    /// Right-hand side of the state equation at (t, rho).
    pub fn apply_liouvillian(&self, t: f64, rho: &Operator) -> Result<Operator> {
        let mut out = Operator::zeros(self.dim);
        self.hamiltonian_commutator_into(t, rho, &mut out)?;
        if self.dissipators.is_empty() {
            return Ok(out);
        }
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        let mut scratch = Operator::zeros(self.dim);
        for (a, term) in self.dissipators.iter().enumerate() {
            let rate = term.rate.eval(t)?;
            if rate < 0.0 {
                return Err(Error::NegativeRate { t, value: rate });
            }
            if rate == 0.0 {
                continue;
            }
            // + rate (F rho F')
            gemm(one, &term.operator, rho, zero, &mut scratch)?;
            gemm(C64::new(rate, 0.0), &scratch, &self.daggers[a], one, &mut out)?;
            // - rate/2 {F'F, rho}
            let half = C64::new(-0.5 * rate, 0.0);
            gemm(half, &self.grams[a], rho, one, &mut out)?;
            gemm(half, rho, &self.grams[a], one, &mut out)?;
        }
        Ok(out)
    }

    /// Right-hand side of the invariant equation at (t, I).
    pub fn apply_adjoint_generator(&self, t: f64, inv: &Operator) -> Result<Operator> {
        let mut out = Operator::zeros(self.dim);
        self.hamiltonian_commutator_into(t, inv, &mut out)?;
        if self.dissipators.is_empty() {
            return Ok(out);
        }
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        let mut scratch = Operator::zeros(self.dim);
        for (a, term) in self.dissipators.iter().enumerate() {
            let rate = term.rate.eval(t)?;
            if rate < 0.0 {
                return Err(Error::NegativeRate { t, value: rate });
            }
            if rate == 0.0 {
                continue;
            }
            // - rate (F' I F)
            gemm(one, &self.daggers[a], inv, zero, &mut scratch)?;
            gemm(C64::new(-rate, 0.0), &scratch, &term.operator, one, &mut out)?;
            // + rate/2 {F'F, I}
            let half = C64::new(0.5 * rate, 0.0);
            gemm(half, &self.grams[a], inv, one, &mut out)?;
            gemm(half, inv, &self.grams[a], one, &mut out)?;
        }
        Ok(out)
    }

    /// Propagates a density matrix over the grid. The initial state must
    /// be Hermitian with unit trace and no eigenvalue below -1e-10; the
    /// propagation aborts if trace, positivity, or hermiticity drift past
    /// their integration-quality tolerances.
    pub fn propagate_state(&self, rho0: &Operator, grid: &TimeGrid) -> Result<StateTrajectory> {
        self.check_dim(rho0)?;
        self.check_horizon(grid.t_final())?;

        let herm = rho0.hermiticity_deviation();
        if herm > tol::HERMITIAN_TOL {
            return Err(Error::NotDensity {
                reason: format!("hermiticity deviation {herm:.3e}"),
            });
        }
        let tr = rho0.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > tol::INIT_TRACE_TOL {
            return Err(Error::NotDensity {
                reason: format!("trace {} + {}i is not 1", tr.re, tr.im),
            });
        }
        let low = min_eigenvalue(rho0)?;
        if low < -tol::PSD_TOL {
            return Err(Error::NotDensity {
                reason: format!("smallest eigenvalue {low:.3e}"),
            });
        }

        let n = grid.steps();
        let mut states = Vec::with_capacity(n + 1);
        let mut diagnostics = Vec::with_capacity(n + 1);
        let mut current = rho0.symmetrize();
        diagnostics.push(state_diagnostics(0.0, &current, herm)?);
        states.push(current.clone());

        for k in 0..n {
            let t0 = grid.time(k);
            let t1 = grid.time(k + 1);
            let next = rk4_step(
                |t, y| self.apply_liouvillian(t, y),
                t0,
                t1,
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
            let diag = state_diagnostics(t1, &current, drift)?;
            let trace_err = (diag.trace_re - 1.0).abs().max(diag.trace_im.abs());
            if trace_err > tol::TRACE_TOL {
                return Err(Error::IntegrationQuality {
                    step: k + 1,
                    what: format!("trace drifted by {trace_err:.3e}"),
                });
            }
            if diag.min_eigenvalue < -tol::PSD_TOL {
                return Err(Error::IntegrationQuality {
                    step: k + 1,
                    what: format!("eigenvalue {:.3e} below zero", diag.min_eigenvalue),
                });
            }
            states.push(current.clone());
            diagnostics.push(diag);
        }

        Ok(StateTrajectory {
            grid: grid.clone(),
            states,
            diagnostics,
        })
    }

    /// Propagates a Hermitian invariant over the grid, carrying a
    /// continuity-tracked eigensystem at every point: slot j stays
    /// attached to the eigenvector it overlaps most with from one step to
    /// the next, rather than to a value-sorted position.
    pub fn propagate_invariant(
        &self,
        i0: &Operator,
        grid: &TimeGrid,
    ) -> Result<InvariantTrajectory> {
        self.check_dim(i0)?;
        self.check_horizon(grid.t_final())?;
        i0.ensure_hermitian(tol::HERMITIAN_TOL)?;

        let n = grid.steps();
        let mut current = i0.symmetrize();
        let mut operators = Vec::with_capacity(n + 1);
        let mut eigensystems = Vec::with_capacity(n + 1);
        eigensystems.push(spectral_decompose(&current, None)?);
        operators.push(current.clone());
        let mut max_drift: f64 = 0.0;

        for k in 0..n {
            let t0 = grid.time(k);
            let t1 = grid.time(k + 1);
            let next = rk4_step(
                |t, y| self.apply_adjoint_generator(t, y),
                t0,
                t1,
                &current,
            )?;
            let drift = next.hermiticity_deviation();
            if drift > tol::HERM_DRIFT_TOL {
                return Err(Error::IntegrationQuality {
                    step: k + 1,
                    what: format!("hermiticity drift {drift:.3e}"),
                });
            }
            max_drift = max_drift.max(drift);
            current = next.symmetrize();
            let eig = spectral_decompose(&current, Some(&eigensystems[k]))?;
            operators.push(current.clone());
            eigensystems.push(eig);
        }

        Ok(InvariantTrajectory {
            grid: grid.clone(),
            operators,
            eigensystems,
            max_hermiticity_drift: max_drift,
        })
    }

    /// Worst defect, over interior grid points, between the centered
    /// finite difference of the trajectory and the invariant equation's
    /// right-hand side. Second-order small for a consistent trajectory.
    pub fn invariant_residual(&self, traj: &InvariantTrajectory) -> Result<f64> {
        let n = traj.len();
        if n < 3 {
            return Err(Error::TooFewSamples { need: 3, got: n });
        }
        let dt = traj.grid.dt();
        let mut worst: f64 = 0.0;
        for k in 1..n - 1 {
            let fd = traj.operators[k + 1]
                .sub(&traj.operators[k - 1])?
                .scale_re(1.0 / (2.0 * dt));
            let gen = self.apply_adjoint_generator(traj.grid.time(k), &traj.operators[k])?;
            worst = worst.max(fd.sub(&gen)?.max_abs());
        }
        Ok(worst)
    }

    /// Eigenvalue-flow records along an invariant trajectory: for every
    /// grid point and eigenvalue slot j,
    ///
    /// ```text
    /// rhs_j = sum_a r_a(t) (lambda_j <psi_j|F_a'F_a|psi_j> - <psi_j|F_a' I F_a|psi_j>)
    /// ```
    ///
    /// is compared against a finite-difference estimate of d lambda_j/dt
    /// (centered in the interior, one-sided second order at the ends).
    /// Records at (nearly) degenerate points are flagged: eigenvectors
    /// are not individually determined there, so the pointwise comparison
    /// loses meaning.
    pub fn eigenflow(&self, traj: &InvariantTrajectory) -> Result<Vec<EigenFlowRecord>> {
        let n = traj.len();
        if n < 3 {
            return Err(Error::TooFewSamples { need: 3, got: n });
        }
        let dim = self.dim;
        let dt = traj.grid.dt();
        let mut records = Vec::with_capacity(n * dim);

        for k in 0..n {
            let t = traj.grid.time(k);
            let inv = &traj.operators[k];
            let eig = &traj.eigensystems[k];
            let scale = inv.max_abs().max(1.0);
            let degenerate = eig.min_gap() <= tol::DEGENERACY_TOL_REL * scale;
            let rates = self.rates_at(t)?;

            for j in 0..dim {
                let psi = eig.vector(j);
                let lambda = eig.values[j];
                let mut rhs = 0.0;
                for (a, &rate) in rates.iter().enumerate() {
                    if rate == 0.0 {
                        continue;
                    }
                    let f_psi = self.dissipators[a].operator.apply(&psi)?;
                    let weight: f64 = f_psi.iter().map(|v| v.norm_sqr()).sum();
                    let sandwich = inv.matrix_element(&f_psi, &f_psi)?.re;
                    rhs += rate * (lambda * weight - sandwich);
                }

                let curve = |i: usize| traj.eigensystems[i].values[j];
                let fd = if k == 0 {
                    (-3.0 * curve(0) + 4.0 * curve(1) - curve(2)) / (2.0 * dt)
                } else if k == n - 1 {
                    (3.0 * curve(n - 1) - 4.0 * curve(n - 2) + curve(n - 3)) / (2.0 * dt)
                } else {
                    (curve(k + 1) - curve(k - 1)) / (2.0 * dt)
                };

                records.push(EigenFlowRecord {
                    time: t,
                    index: j,
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

    fn check_dim(&self, m: &Operator) -> Result<()> {
        if m.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: m.dim(),
            });
        }
        Ok(())
    }
}

/// Per-point health numbers for a state trajectory.
#[derive(Debug, Clone, Copy)]
pub struct StateDiagnostics {
    pub time: f64,
    pub trace_re: f64,
    pub trace_im: f64,
    pub purity: f64,
    pub min_eigenvalue: f64,
    /// Hermiticity deviation of the raw RK4 output before the
    /// re-symmetrization that produced the stored state.
    pub hermiticity_drift: f64,
}

/// Density-matrix history over a time grid.
#[derive(Debug, Clone)]
pub struct StateTrajectory {
    grid: TimeGrid,
    states: Vec<Operator>,
    diagnostics: Vec<StateDiagnostics>,
}

impl StateTrajectory {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, k: usize) -> &Operator {
        &self.states[k]
    }

    pub fn states(&self) -> &[Operator] {
        &self.states
    }

    pub fn final_state(&self) -> &Operator {
        self.states.last().expect("non-empty by construction")
    }

    pub fn diagnostics(&self) -> &[StateDiagnostics] {
        &self.diagnostics
    }

    /// Re Tr(obs * rho_k) at every grid point.
    pub fn observable_series(&self, obs: &Operator) -> Result<Vec<f64>> {
        self.states
            .iter()
            .map(|rho| Ok(product_trace(obs, rho)?.re))
            .collect()
    }
}

/// Invariant history with continuity-tracked eigensystems.
#[derive(Debug, Clone)]
pub struct InvariantTrajectory {
    grid: TimeGrid,
    operators: Vec<Operator>,
    eigensystems: Vec<EigenSystem>,
    max_hermiticity_drift: f64,
}

impl InvariantTrajectory {
    /// Assembles a trajectory from already-computed operators, attaching
    /// continuity-tracked eigensystems. Used by block-form propagation.
    pub fn from_operators(grid: TimeGrid, operators: Vec<Operator>) -> Result<Self> {
        if operators.len() != grid.len() {
            return Err(Error::GridMismatch {
                left: grid.len(),
                right: operators.len(),
            });
        }
        let mut eigensystems: Vec<EigenSystem> = Vec::with_capacity(operators.len());
        for (k, op) in operators.iter().enumerate() {
            let reference = if k == 0 { None } else { Some(&eigensystems[k - 1]) };
            eigensystems.push(spectral_decompose(op, reference)?);
        }
        Ok(InvariantTrajectory {
            grid,
            operators,
            eigensystems,
            max_hermiticity_drift: 0.0,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    pub fn operator(&self, k: usize) -> &Operator {
        &self.operators[k]
    }

    pub fn operators(&self) -> &[Operator] {
        &self.operators
    }

    pub fn final_operator(&self) -> &Operator {
        self.operators.last().expect("non-empty by construction")
    }

    pub fn eigensystem(&self, k: usize) -> &EigenSystem {
        &self.eigensystems[k]
    }

    pub fn eigensystems(&self) -> &[EigenSystem] {
        &self.eigensystems
    }

    /// Eigenvalue curve of slot j across the grid.
    pub fn eigenvalue_curve(&self, j: usize) -> Vec<f64> {
        self.eigensystems.iter().map(|e| e.values[j]).collect()
    }

    pub fn max_hermiticity_drift(&self) -> f64 {
        self.max_hermiticity_drift
    }
}

/// One eigenvalue-flow sample; see `LindbladModel::eigenflow`.
#[derive(Debug, Clone, Copy)]
pub struct EigenFlowRecord {
    pub time: f64,
    pub index: usize,
    pub lambda: f64,
    pub rhs: f64,
    pub fd: f64,
    pub defect: f64,
    pub degenerate: bool,
}

/// Pointwise pairing Tr(I_k rho_k): the series, its worst drift from the
/// initial value, and the largest imaginary part seen (nonzero imaginary
/// parts indicate a non-Hermitian pairing and are a bug in the caller).
#[derive(Debug, Clone)]
pub struct ExpectationSeries {
    pub values: Vec<f64>,
    pub defect: f64,
    pub max_imag: f64,
}

/// Pairs a state trajectory with an invariant trajectory on the same grid.
pub fn expectation_series(
    states: &StateTrajectory,
    invariants: &InvariantTrajectory,
) -> Result<ExpectationSeries> {
    if states.grid != invariants.grid {
        return Err(Error::GridMismatch {
            left: states.len(),
            right: invariants.len(),
        });
    }
    let mut values = Vec::with_capacity(states.len());
    let mut max_imag: f64 = 0.0;
    for (inv, rho) in invariants.operators.iter().zip(&states.states) {
        let tr = product_trace(inv, rho)?;
        max_imag = max_imag.max(tr.im.abs());
        values.push(tr.re);
    }
    let first = values[0];
    let defect = values
        .iter()
        .map(|v| (v - first).abs())
        .fold(0.0, f64::max);
    Ok(ExpectationSeries {
        values,
        defect,
        max_imag,
    })
}

/// Classical RK4 step from t0 to t1 with midpoint stages at (t0 + t1)/2.
/// Stage times are built from the two endpoints, never by accumulating
/// dt, so table-backed schedules are not pushed past their horizon by
/// rounding.
pub(crate) fn rk4_step<F>(mut rhs: F, t0: f64, t1: f64, y: &Operator) -> Result<Operator>
where
    F: FnMut(f64, &Operator) -> Result<Operator>,
{
    let dt = t1 - t0;
    let t_mid = 0.5 * (t0 + t1);
    let k1 = rhs(t0, y)?;
    let k2 = rhs(t_mid, &y.add_scaled(0.5 * dt, &k1))?;
    let k3 = rhs(t_mid, &y.add_scaled(0.5 * dt, &k2))?;
    let k4 = rhs(t1, &y.add_scaled(dt, &k3))?;
    Ok(rk4_combine(y, &k1, &k2, &k3, &k4, dt / 6.0))
}

fn min_eigenvalue(m: &Operator) -> Result<f64> {
    let values = crate::spectral::hermitian_eigenvalues(m.symmetrize().entries())?;
    Ok(values.iter().cloned().fold(f64::INFINITY, f64::min))
}

fn state_diagnostics(time: f64, rho: &Operator, drift: f64) -> Result<StateDiagnostics> {
    let tr = rho.trace();
    // for the symmetrized rho, Tr(rho^2) is the squared Frobenius norm
    let purity: f64 = rho.entries().iter().map(|v| v.norm_sqr()).sum();
    Ok(StateDiagnostics {
        time,
        trace_re: tr.re,
        trace_im: tr.im,
        purity,
        min_eigenvalue: min_eigenvalue(rho)?,
        hermiticity_drift: drift,
    })
}
