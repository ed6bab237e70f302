//! Lindblad master-equation integration and the repeated-injection driver.
//!
//! One collision prepares a fresh atom (or cluster) in its thermal state,
//! evolves atom ⊗ field under the microscopic master equation for the
//! interaction time τ, traces the atoms out and, if τ₀ > 0, lets the field
//! decay alone for τ₀.

use log::{debug, warn};
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::analytics::{field_temperature, g2_zero, mean_photon_number, thermalization_time};
use crate::config::SimulationConfig;
use crate::error::{Error, Result};
use crate::hilbert::{annihilation, lift, pauli, Pauli};
use crate::linalg::{hermitian_eigenvalues, partial_trace, ComplexMatrix, HilbertSpec, I, ONE, ZERO};
use crate::models::{
    hamiltonian_multilevel, hamiltonian_tc, thermal_field_state, CouplingSpec, FieldSpec, ReservoirKind,
    ReservoirSpec,
};

/// Population of the top Fock level above which a run is rejected.
pub const TAIL_LEAK_LIMIT: f64 = 1e-4;
/// Trace drift above which a run is treated as diverged.
pub const TRACE_DRIFT_LIMIT: f64 = 1e-6;
/// RK4 steps per interaction window when no dt is configured.
pub const DEFAULT_STEPS_PER_WINDOW: f64 = 100.0;

/// H plus (collapse operator, rate) channels.
#[derive(Debug, Clone)]
pub struct LindbladGenerator {
    hamiltonian: ComplexMatrix,
    channels: Vec<(ComplexMatrix, f64)>,
}

impl LindbladGenerator {
    pub fn new(hamiltonian: ComplexMatrix, channels: Vec<(ComplexMatrix, f64)>) -> Result<Self> {
        let defect = hamiltonian.hermiticity_defect();
        if defect > 1e-12 {
            return Err(Error::NotHermitian { defect });
        }
        let shape = hamiltonian.shape();
        for (op, rate) in &channels {
            if op.shape() != shape {
                return Err(Error::Shape(format!("collapse operator {:?} vs H {:?}", op.shape(), shape)));
            }
            if !(*rate >= 0.0) || !rate.is_finite() {
                return Err(Error::Validation(format!("channel rate {rate} must be >= 0")));
            }
        }
        Ok(Self { hamiltonian, channels })
    }

    pub fn hamiltonian(&self) -> &ComplexMatrix {
        &self.hamiltonian
    }

    pub fn channels(&self) -> &[(ComplexMatrix, f64)] {
        &self.channels
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.rows()
    }

    fn compile(&self) -> CompiledGenerator {
        // H_eff = H − (i/2) Σ rate·L†L carries the anticommutator terms.
        let mut h_eff = self.hamiltonian.clone();
        let mut jumps = Vec::new();
        for (op, rate) in &self.channels {
            if *rate == 0.0 {
                continue;
            }
            let ldl = &op.adjoint() * op;
            h_eff.axpy(-0.5 * I * *rate, &ldl);
            jumps.push((SparseOp::from_dense(op), SparseOp::from_dense(&op.adjoint()), *rate));
        }
        CompiledGenerator {
            h_eff: SparseOp::from_dense(&h_eff),
            h_eff_adj: SparseOp::from_dense(&h_eff.adjoint()),
            jumps,
        }
    }
}

/// Nonzero entries of an operator; products against dense states skip the
/// zeros that dominate lifted operators.
#[derive(Debug, Clone)]
struct SparseOp {
    entries: Vec<(usize, usize, C64)>,
}

impl SparseOp {
    fn from_dense(m: &ComplexMatrix) -> Self {
        let mut entries = Vec::new();
        for i in 0..m.rows() {
            for (j, &v) in m.row(i).iter().enumerate() {
                if v != ZERO {
                    entries.push((i, j, v));
                }
            }
        }
        Self { entries }
    }

    /// out += s · S · rho
    fn left_mul_into(&self, s: C64, rho: &ComplexMatrix, out: &mut ComplexMatrix) {
        let n = rho.cols();
        let src = rho.as_slice();
        let dst = out.as_mut_slice();
        for &(i, k, v) in &self.entries {
            let c = s * v;
            let (src_row, dst_row) = (&src[k * n..(k + 1) * n], &mut dst[i * n..(i + 1) * n]);
            for (d, &x) in dst_row.iter_mut().zip(src_row) {
                *d += c * x;
            }
        }
    }

    /// out += s · rho · S
    fn right_mul_into(&self, s: C64, rho: &ComplexMatrix, out: &mut ComplexMatrix) {
        let n = rho.cols();
        let rows = rho.rows();
        let src = rho.as_slice();
        let dst = out.as_mut_slice();
        for &(k, j, v) in &self.entries {
            let c = s * v;
            for r in 0..rows {
                dst[r * n + j] += c * src[r * n + k];
            }
        }
    }
}

struct CompiledGenerator {
    h_eff: SparseOp,
    h_eff_adj: SparseOp,
    jumps: Vec<(SparseOp, SparseOp, f64)>,
}

impl CompiledGenerator {
    /// −i H_eff ρ + i ρ H_eff† + Σ rate·L ρ L†
    fn rhs_into(&self, rho: &ComplexMatrix, out: &mut ComplexMatrix, scratch: &mut ComplexMatrix) {
        out.as_mut_slice().fill(ZERO);
        self.h_eff.left_mul_into(-I, rho, out);
        self.h_eff_adj.right_mul_into(I, rho, out);
        for (l, l_adj, rate) in &self.jumps {
            scratch.as_mut_slice().fill(ZERO);
            l.left_mul_into(ONE, rho, scratch);
            l_adj.right_mul_into(C64::new(*rate, 0.0), scratch, out);
        }
    }
}

/// Fixed-step classical RK4 settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorSettings {
    pub dt: f64,
    pub renormalize_trace: bool,
}

impl IntegratorSettings {
    pub fn new(dt: f64) -> Result<Self> {
        let s = Self { dt, renormalize_trace: false };
        s.validate()?;
        Ok(s)
    }

    /// Default step for an interaction window of length `tau`.
    pub fn for_window(tau: f64) -> Self {
        Self { dt: tau / DEFAULT_STEPS_PER_WINDOW, renormalize_trace: false }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Settings(format!("dt must be > 0, got {}", self.dt)));
        }
        Ok(())
    }

    /// Collision windows need at least 20 steps.
    pub fn validate_for_window(&self, tau: f64) -> Result<()> {
        self.validate()?;
        if self.dt > tau / 20.0 * (1.0 + 1e-12) {
            return Err(Error::Settings(format!("dt = {} exceeds tau/20 = {}", self.dt, tau / 20.0)));
        }
        Ok(())
    }
}

/// x ρ x† − ½(x†x ρ + ρ x†x).
pub fn dissipator(op: &ComplexMatrix, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    if op.shape() != rho.shape() || !op.is_square() {
        return Err(Error::Shape(format!("dissipator: {:?} vs {:?}", op.shape(), rho.shape())));
    }
    let adj = op.adjoint();
    let ldl = &adj * op;
    let jump = &(op * rho) * &adj;
    let anti = &(&ldl * rho) + &(rho * &ldl);
    Ok(&jump - &anti.scale_real(0.5))
}

/// −i[H, ρ] + Σ rate·D[L](ρ), evaluated densely.
pub fn master_rhs(generator: &LindbladGenerator, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    if rho.shape() != generator.hamiltonian.shape() {
        return Err(Error::Shape(format!(
            "state {:?} vs generator {:?}",
            rho.shape(),
            generator.hamiltonian.shape()
        )));
    }
    let mut out = generator.hamiltonian.commutator(rho)?.scale(-I);
    for (op, rate) in &generator.channels {
        out.axpy(C64::new(*rate, 0.0), &dissipator(op, rho)?);
    }
    Ok(out)
}

/// Propagates `rho0` for `duration` with classical RK4, re-symmetrizing
/// (ρ + ρ†)/2 after every step.
pub fn evolve(
    generator: &LindbladGenerator,
    rho0: &ComplexMatrix,
    duration: f64,
    settings: &IntegratorSettings,
) -> Result<ComplexMatrix> {
    settings.validate()?;
    if rho0.shape() != generator.hamiltonian.shape() {
        return Err(Error::Shape(format!(
            "state {:?} vs generator {:?}",
            rho0.shape(),
            generator.hamiltonian.shape()
        )));
    }
    if !(duration >= 0.0) || !duration.is_finite() {
        return Err(Error::Settings(format!("duration must be >= 0, got {duration}")));
    }
    if duration == 0.0 {
        return Ok(rho0.clone());
    }
    let compiled = generator.compile();
    let steps = ((duration / settings.dt) - 1e-9).ceil().max(1.0) as usize;
    let h = duration / steps as f64;
    let n = generator.dim();

    let mut rho = rho0.clone();
    let mut stage = ComplexMatrix::zeros(n, n);
    let mut scratch = ComplexMatrix::zeros(n, n);
    let mut k = [
        ComplexMatrix::zeros(n, n),
        ComplexMatrix::zeros(n, n),
        ComplexMatrix::zeros(n, n),
        ComplexMatrix::zeros(n, n),
    ];
    let hc = |x: f64| C64::new(x, 0.0);
    for step in 0..steps {
        compiled.rhs_into(&rho, &mut k[0], &mut scratch);
        for (s, coeff) in [(1, 0.5), (2, 0.5), (3, 1.0)] {
            stage.as_mut_slice().copy_from_slice(rho.as_slice());
            let (prev, rest) = k.split_at_mut(s);
            stage.axpy(hc(coeff * h), &prev[s - 1]);
            compiled.rhs_into(&stage, &mut rest[0], &mut scratch);
        }
        let w = [h / 6.0, h / 3.0, h / 3.0, h / 6.0];
        for (ki, wi) in k.iter().zip(w) {
            rho.axpy(hc(wi), ki);
        }
        rho.hermitize();
        if settings.renormalize_trace {
            let tr = rho.trace().re;
            rho = rho.scale_real(1.0 / tr);
        }
        if !rho.is_finite() {
            return Err(Error::Divergence(format!("non-finite state after step {step} of {steps}")));
        }
    }
    Ok(rho)
}

/// Microscopic generator for one interaction window on atoms ⊗ field.
///
/// Clusters decay through σ₋ on every atom, the multilevel atom through
/// |gᵢ⟩⟨e| into every ground level; the cavity decays through a.
pub fn microscopic_generator(
    reservoir: &ReservoirSpec,
    coupling: &CouplingSpec,
    field: &FieldSpec,
) -> Result<(LindbladGenerator, HilbertSpec)> {
    let dim = field.dim();
    let (h, atom_ops, spec) = match reservoir.kind {
        ReservoirKind::MultiAtom => {
            let n = reservoir.n;
            let h = hamiltonian_tc(field, reservoir.omega, coupling.g, n)?;
            let mut dims = vec![2; n];
            dims.push(dim);
            let fine = HilbertSpec::new(dims)?;
            let sm = pauli(Pauli::Minus);
            let ops = (0..n).map(|i| lift(&sm, &fine, i)).collect::<Result<Vec<_>>>()?;
            (h, ops, HilbertSpec::new(vec![1 << n, dim])?)
        }
        ReservoirKind::MultiLevel => {
            let n = reservoir.n;
            let h = hamiltonian_multilevel(field, reservoir.omega, coupling.g, n)?;
            let spec = HilbertSpec::new(vec![n + 1, dim])?;
            let ops = (1..=n)
                .map(|i| {
                    let mut down = ComplexMatrix::zeros(n + 1, n + 1);
                    down[(i, 0)] = ONE;
                    lift(&down, &spec, 0)
                })
                .collect::<Result<Vec<_>>>()?;
            (h, ops, spec)
        }
    };
    let mut channels: Vec<(ComplexMatrix, f64)> = atom_ops.into_iter().map(|op| (op, coupling.gamma)).collect();
    channels.push((lift(&annihilation(field.truncation), &spec, 1)?, coupling.kappa));
    Ok((LindbladGenerator::new(h, channels)?, spec))
}

/// Cavity-only decay between injections.
pub fn idle_generator(coupling: &CouplingSpec, field: &FieldSpec) -> Result<LindbladGenerator> {
    let h = crate::hilbert::number_op(field.truncation).scale_real(field.omega);
    LindbladGenerator::new(h, vec![(annihilation(field.truncation), coupling.kappa)])
}

/// Everything needed to apply one collision repeatedly.
#[derive(Debug, Clone)]
pub struct Collider {
    atom_state: ComplexMatrix,
    generator: LindbladGenerator,
    spec: HilbertSpec,
    idle: LindbladGenerator,
    tau: f64,
    tau0: f64,
    settings: IntegratorSettings,
}

impl Collider {
    pub fn new(
        reservoir: &ReservoirSpec,
        coupling: &CouplingSpec,
        field: &FieldSpec,
        settings: &IntegratorSettings,
    ) -> Result<Self> {
        Self::with_atom_state(reservoir.atom_state()?, reservoir, coupling, field, settings)
    }

    /// Uses `atom_state` in place of the reservoir's thermal state; lets
    /// diagnostics inject e.g. a fully excited atom.
    pub fn with_atom_state(
        atom_state: ComplexMatrix,
        reservoir: &ReservoirSpec,
        coupling: &CouplingSpec,
        field: &FieldSpec,
        settings: &IntegratorSettings,
    ) -> Result<Self> {
        settings.validate_for_window(coupling.tau)?;
        let (generator, spec) = microscopic_generator(reservoir, coupling, field)?;
        if atom_state.shape() != (spec.dims()[0], spec.dims()[0]) {
            return Err(Error::Shape(format!(
                "atom state {:?} for atomic dimension {}",
                atom_state.shape(),
                spec.dims()[0]
            )));
        }
        Ok(Self {
            atom_state,
            generator,
            spec,
            idle: idle_generator(coupling, field)?,
            tau: coupling.tau,
            tau0: coupling.tau0,
            settings: *settings,
        })
    }

    pub fn field_dim(&self) -> usize {
        self.spec.dims()[1]
    }

    /// One collision: ρ_at ⊗ ρ_f → evolve τ → trace atoms → idle τ₀.
    pub fn step(&self, rho_f: &ComplexMatrix) -> Result<ComplexMatrix> {
        let d = self.field_dim();
        if rho_f.shape() != (d, d) {
            return Err(Error::Shape(format!("field state {:?} for dim {d}", rho_f.shape())));
        }
        let joint = crate::linalg::kron(&self.atom_state, rho_f)?;
        let evolved = evolve(&self.generator, &joint, self.tau, &self.settings)?;
        let mut out = partial_trace(&evolved, &self.spec, 1)?;
        if self.tau0 > 0.0 {
            let idle_settings = IntegratorSettings { dt: self.settings.dt, ..self.settings };
            out = evolve(&self.idle, &out, self.tau0, &idle_settings)?;
        }
        out.hermitize();
        Ok(out)
    }

    /// Population-transfer matrix of one collision, built by colliding every
    /// Fock projector |k⟩⟨k|.
    ///
    /// Excitation number is conserved by H and lowered by exactly one by every
    /// collapse operator, so diagonal field states stay diagonal and this
    /// matrix is the whole collision map on them.
    pub fn population_map(&self) -> Result<PopulationMap> {
        let d = self.field_dim();
        let columns: Vec<Result<Vec<f64>>> = (0..d)
            .into_par_iter()
            .map(|k| {
                let out = self.step(&ComplexMatrix::projector(d, k))?;
                let diag = ComplexMatrix::from_diag(&out.diagonal());
                let off = out.max_abs_diff(&diag);
                if off > 1e-10 {
                    return Err(Error::Domain(format!(
                        "collision of |{k}><{k}| produced coherences of size {off:e}"
                    )));
                }
                Ok(out.real_diagonal())
            })
            .collect();
        let mut matrix = vec![0.0; d * d];
        for (k, col) in columns.into_iter().enumerate() {
            for (n, p) in col?.into_iter().enumerate() {
                matrix[n * d + k] = p;
            }
        }
        Ok(PopulationMap { dim: d, matrix })
    }
}

/// Column-stochastic map of Fock populations over one collision.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationMap {
    dim: usize,
    matrix: Vec<f64>,
}

impl PopulationMap {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Probability of ending in |n⟩ after starting in |k⟩.
    pub fn transfer(&self, n: usize, k: usize) -> f64 {
        self.matrix[n * self.dim + k]
    }

    pub fn apply(&self, populations: &[f64]) -> Vec<f64> {
        assert_eq!(populations.len(), self.dim);
        self.matrix
            .chunks_exact(self.dim)
            .map(|row| row.iter().zip(populations).map(|(m, p)| m * p).sum())
            .collect()
    }
}

/// Applies one collision to `rho_f`.
pub fn collision_step(
    rho_f: &ComplexMatrix,
    reservoir: &ReservoirSpec,
    coupling: &CouplingSpec,
    field: &FieldSpec,
    settings: &IntegratorSettings,
) -> Result<ComplexMatrix> {
    Collider::new(reservoir, coupling, field, settings)?.step(rho_f)
}

/// Per-collision record of field observables and numerical diagnostics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub n_mean: Vec<f64>,
    pub t_field: Vec<f64>,
    /// `None` where n̄ is below the g²(0) floor.
    pub g2: Vec<Option<f64>>,
    pub trace_dev: Vec<f64>,
    pub tail_leak: Vec<f64>,
    pub min_eigenvalue: Vec<f64>,
    pub hermiticity_defect: Vec<f64>,
    pub final_state: Option<ComplexMatrix>,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Records the observables of `rho_f` at time `t`.
    pub fn record(&mut self, t: f64, rho_f: &ComplexMatrix, omega: f64) -> Result<()> {
        let n = mean_photon_number(rho_f);
        self.times.push(t);
        self.n_mean.push(n);
        self.t_field.push(field_temperature(n, omega));
        self.g2.push(g2_zero(rho_f).ok());
        self.trace_dev.push((rho_f.trace().re - 1.0).abs());
        self.tail_leak.push(rho_f[(rho_f.rows() - 1, rho_f.rows() - 1)].re);
        self.min_eigenvalue.push(min_eigenvalue(rho_f)?);
        self.hermiticity_defect.push(rho_f.hermiticity_defect());
        Ok(())
    }
}

/// Smallest eigenvalue; read straight off the diagonal when there are no
/// off-diagonal entries.
pub fn min_eigenvalue(rho: &ComplexMatrix) -> Result<f64> {
    let diag = ComplexMatrix::from_diag(&rho.diagonal());
    if rho.max_abs_diff(&diag) == 0.0 && rho.diagonal().iter().all(|z| z.im == 0.0) {
        return Ok(rho.real_diagonal().into_iter().fold(f64::INFINITY, f64::min));
    }
    Ok(hermitian_eigenvalues(rho)?[0])
}

/// Smallest Fock dimension whose thermal tail at `t` drops below `limit`.
pub fn suggested_dim(omega: f64, t: f64, limit: f64) -> usize {
    (2..10_000)
        .find(|&d| crate::models::thermal_tail(omega, t, d) < limit)
        .unwrap_or(10_000)
}

/// Runs the collision model from the thermal initial field until the
/// collision budget is spent or n̄ has settled.
pub fn run_simulation(config: &SimulationConfig) -> Result<TimeSeries> {
    let field = &config.field;
    let prediction = thermalization_time(&config.reservoir, &config.coupling)?;
    check_truncation(config, prediction.n_bar_th)?;

    let period = config.coupling.period();
    let budget = config.collisions_max.unwrap_or_else(|| default_budget(prediction.t_th, period));
    debug!("collision budget {budget}, predicted t_th {}", prediction.t_th);

    let rho0 = thermal_field_state(field);
    let mut series = TimeSeries::default();
    series.record(0.0, &rho0, field.omega)?;
    let mut populations = rho0.real_diagonal();
    if budget > 0 {
        let collider = Collider::new(&config.reservoir, &config.coupling, field, &config.integrator)?;
        let map = collider.population_map()?;
        let mut quiet = 0;
        for k in 1..=budget {
            let previous = *series.n_mean.last().expect("initial sample");
            populations = map.apply(&populations);
            if populations.iter().any(|p| !p.is_finite()) {
                return Err(Error::Divergence(format!("non-finite populations at collision {k}")));
            }
            let rho = ComplexMatrix::from_real_diag(&populations);
            series.record(k as f64 * period, &rho, field.omega)?;

            let leak = *series.tail_leak.last().expect("sample");
            if leak > TAIL_LEAK_LIMIT {
                return Err(Error::Truncation {
                    message: format!("top Fock level holds {leak:e} at collision {k}"),
                    suggested_dim: field.dim() * 3 / 2 + 1,
                });
            }
            let drift = *series.trace_dev.last().expect("sample");
            if drift > TRACE_DRIFT_LIMIT {
                return Err(Error::Divergence(format!("trace drift {drift:e} at collision {k}")));
            }

            let current = *series.n_mean.last().expect("sample");
            let change = (current - previous).abs() / current.abs().max(f64::MIN_POSITIVE);
            quiet = if change < config.steady_epsilon { quiet + 1 } else { 0 };
            if quiet >= config.steady_window {
                debug!("steady state after {k} collisions");
                break;
            }
        }
    }
    series.final_state = Some(ComplexMatrix::from_real_diag(&populations));
    Ok(series)
}

/// 10 predicted thermalization times, in collisions.
pub fn default_budget(t_th: f64, period: f64) -> usize {
    10 * (t_th / period).ceil() as usize
}

fn check_truncation(config: &SimulationConfig, n_bar_steady: f64) -> Result<()> {
    let field = &config.field;
    let t_steady = field_temperature(n_bar_steady, field.omega);
    let t_max = field.initial_temperature.max(t_steady);
    let tail = crate::models::thermal_tail(field.omega, t_max, field.dim());
    if tail > TAIL_LEAK_LIMIT {
        return Err(Error::Truncation {
            message: format!(
                "thermal tail {tail:e} at T={t_max} exceeds {TAIL_LEAK_LIMIT:e} with dim {}",
                field.dim()
            ),
            suggested_dim: suggested_dim(field.omega, t_max, crate::models::THERMAL_TAIL_WARN),
        });
    }
    if tail > crate::models::THERMAL_TAIL_WARN {
        warn!("thermal tail {tail:e} at T={t_max} with dim {}", field.dim());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{number_op, FockTruncation};
    use crate::linalg::kron;
    use crate::models::two_level_populations;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fock(d: usize) -> FockTruncation {
        FockTruncation::new(d).unwrap()
    }

    fn field(d: usize, t: f64) -> FieldSpec {
        FieldSpec::new(1.0, fock(d), t).unwrap()
    }

    fn random_density(rng: &mut impl Rng, n: usize) -> ComplexMatrix {
        let data = (0..n * n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let a = ComplexMatrix::from_vec(n, n, data).unwrap();
        let rho = &a * &a.adjoint();
        let tr = rho.trace().re;
        rho.scale_real(1.0 / tr)
    }

    #[test]
    fn dissipator_examples() {
        let a = annihilation(fock(3));
        let vac = ComplexMatrix::projector(3, 0);
        assert_eq!(dissipator(&a, &vac).unwrap().max_abs(), 0.0);
        let one = ComplexMatrix::projector(3, 1);
        let want = &vac - &one;
        assert!(dissipator(&a, &one).unwrap().max_abs_diff(&want) < 1e-15);
        assert!(dissipator(&a, &ComplexMatrix::identity(2)).is_err());
    }

    #[test]
    fn dissipator_is_traceless() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let rho = random_density(&mut rng, 5);
            let x = random_density(&mut rng, 5).scale(C64::new(0.3, -2.0));
            assert!(dissipator(&x, &rho).unwrap().trace().norm() < 1e-12);
        }
    }

    #[test]
    fn master_rhs_examples() {
        let n = number_op(fock(4));
        let rho = ComplexMatrix::projector(4, 2);
        let gen = LindbladGenerator::new(n.clone(), vec![]).unwrap();
        assert_eq!(master_rhs(&gen, &rho).unwrap().max_abs(), 0.0);

        let a = annihilation(fock(4));
        let gen = LindbladGenerator::new(ComplexMatrix::zeros(4, 4), vec![(a.clone(), 0.7)]).unwrap();
        let want = dissipator(&a, &rho).unwrap().scale_real(0.7);
        assert!(master_rhs(&gen, &rho).unwrap().max_abs_diff(&want) < 1e-15);
    }

    #[test]
    fn master_rhs_closed_jc_matches_commutator() {
        let f = field(4, 1.0);
        let h = crate::models::hamiltonian_jc(&f, 1.0, 0.1).unwrap();
        let gen = LindbladGenerator::new(h.clone(), vec![]).unwrap();
        let rho = ComplexMatrix::projector(8, 0);
        let hand = &(&h * &rho) - &(&rho * &h);
        let want = hand.scale(-I);
        let got = master_rhs(&gen, &rho).unwrap();
        assert!(got.max_abs_diff(&want) < 1e-15);
        assert!(got.trace().norm() < 1e-12);
        assert!(got.hermiticity_defect() < 1e-15);
    }

    #[test]
    fn compiled_rhs_matches_dense_rhs() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let res = ReservoirSpec::new(ReservoirKind::MultiAtom, 2, 0.8, 1.0).unwrap();
        let c = CouplingSpec::new(0.1, 0.5, 0.0, 0.03, 0.02).unwrap();
        let (gen, _) = microscopic_generator(&res, &c, &field(4, 1.0)).unwrap();
        let rho = random_density(&mut rng, 16);
        let dense = master_rhs(&gen, &rho).unwrap();
        let mut out = ComplexMatrix::zeros(16, 16);
        let mut scratch = ComplexMatrix::zeros(16, 16);
        gen.compile().rhs_into(&rho, &mut out, &mut scratch);
        assert!(out.max_abs_diff(&dense) < 1e-14);
    }

    #[test]
    fn generator_validation() {
        let mut h = ComplexMatrix::zeros(2, 2);
        h[(0, 1)] = ONE;
        assert!(matches!(LindbladGenerator::new(h, vec![]), Err(Error::NotHermitian { .. })));
        let id = ComplexMatrix::identity(2);
        assert!(LindbladGenerator::new(id.clone(), vec![(id.clone(), -1.0)]).is_err());
        assert!(LindbladGenerator::new(id, vec![(ComplexMatrix::identity(3), 1.0)]).is_err());
    }

    #[test]
    fn evolve_zero_duration() {
        let gen = LindbladGenerator::new(number_op(fock(3)), vec![]).unwrap();
        let rho = ComplexMatrix::projector(3, 1);
        let s = IntegratorSettings::new(0.01).unwrap();
        assert_eq!(evolve(&gen, &rho, 0.0, &s).unwrap(), rho);
        assert!(matches!(IntegratorSettings::new(0.0), Err(Error::Settings(_))));
        assert!(matches!(
            IntegratorSettings::new(0.1).unwrap().validate_for_window(0.5),
            Err(Error::Settings(_))
        ));
    }

    #[test]
    fn evolve_vacuum_rabi_oscillation() {
        let g = 0.1;
        let f = field(4, 1.0);
        let gen = LindbladGenerator::new(crate::models::hamiltonian_jc(&f, 1.0, g).unwrap(), vec![]).unwrap();
        let rho0 = ComplexMatrix::projector(8, 0);
        let s = IntegratorSettings::new(0.01).unwrap();
        for t in [0.5, 3.0, 7.5] {
            let rho = evolve(&gen, &rho0, t, &s).unwrap();
            let pe: f64 = (0..4).map(|n| rho[(n, n)].re).sum();
            assert!((pe - (g * t).cos().powi(2)).abs() < 1e-9, "t={t}");
        }
    }

    #[test]
    fn evolve_is_converged_at_half_step() {
        let f = field(6, 1.0);
        let res = ReservoirSpec::new(ReservoirKind::MultiAtom, 1, 1.0, 1.0).unwrap();
        let c = CouplingSpec::new(0.2, 0.5, 0.0, 1e-3, 1e-3).unwrap();
        let (gen, _) = microscopic_generator(&res, &c, &f).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let rho0 = random_density(&mut rng, 12);
        let coarse = evolve(&gen, &rho0, 0.5, &IntegratorSettings::for_window(0.5)).unwrap();
        let fine = evolve(&gen, &rho0, 0.5, &IntegratorSettings::new(0.5 / (2.0 * DEFAULT_STEPS_PER_WINDOW)).unwrap()).unwrap();
        assert!(coarse.max_abs_diff(&fine) < 1e-8, "{:e}", coarse.max_abs_diff(&fine));
        assert!((fine.trace().re - 1.0).abs() < 1e-8);
    }

    #[test]
    fn evolve_detects_divergence() {
        // Stiff generator far outside RK4 stability.
        let gen = LindbladGenerator::new(number_op(fock(3)).scale_real(1e3), vec![]).unwrap();
        let mut rho = ComplexMatrix::identity(3).scale_real(1.0 / 3.0);
        rho[(0, 2)] = C64::new(0.1, 0.0);
        rho[(2, 0)] = C64::new(0.1, 0.0);
        let err = evolve(&gen, &rho, 50.0, &IntegratorSettings::new(0.01).unwrap()).unwrap_err();
        assert!(matches!(err, Error::Divergence(_)));
    }

    fn res_cold() -> ReservoirSpec {
        ReservoirSpec::new(ReservoirKind::MultiAtom, 1, 1e-3, 1.0).unwrap()
    }

    #[test]
    fn cold_atom_leaves_vacuum_dark() {
        let f = field(5, 0.0);
        let c = CouplingSpec::new(0.1, 0.5, 0.0, 0.0, 0.0).unwrap();
        let s = IntegratorSettings::for_window(0.5);
        let vac = ComplexMatrix::projector(5, 0);
        let out = collision_step(&vac, &res_cold(), &c, &f, &s).unwrap();
        assert!(out.max_abs_diff(&vac) < 1e-15);
    }

    #[test]
    fn excited_atom_transfers_sin_squared() {
        let f = field(5, 0.0);
        let (g, tau) = (0.3, 0.5);
        let c = CouplingSpec::new(g, tau, 0.0, 0.0, 0.0).unwrap();
        let s = IntegratorSettings::new(tau / 200.0).unwrap();
        let excited = ComplexMatrix::projector(2, 0);
        let collider = Collider::with_atom_state(excited, &res_cold(), &c, &f, &s).unwrap();
        let out = collider.step(&ComplexMatrix::projector(5, 0)).unwrap();
        let n = mean_photon_number(&out);
        assert!((n - (g * tau).sin().powi(2)).abs() < 1e-10);
    }

    #[test]
    fn thermal_field_is_a_fixed_point() {
        let t_a = 2.0;
        let res = ReservoirSpec::new(ReservoirKind::MultiAtom, 1, t_a, 1.0).unwrap();
        let c = CouplingSpec::new(0.08, 0.5, 0.0, 0.0, 0.0).unwrap();
        let f = field(40, t_a);
        let rho = thermal_field_state(&f);
        let out = collision_step(&rho, &res, &c, &f, &IntegratorSettings::for_window(0.5)).unwrap();
        let dn = (mean_photon_number(&out) - mean_photon_number(&rho)).abs();
        assert!(dn < 1e-3 * c.phi().powi(2), "{dn:e}");
    }

    #[test]
    fn idle_window_decays_the_field() {
        let f = field(4, 0.0);
        // Uncoupled atom: the photon decays over the whole period τ + τ₀.
        let c = CouplingSpec::new(0.0, 0.5, 2.0, 0.0, 0.05).unwrap();
        let s = IntegratorSettings::for_window(0.5);
        let out = collision_step(&ComplexMatrix::projector(4, 1), &res_cold(), &c, &f, &s).unwrap();
        let want = (-0.05f64 * 2.5).exp();
        assert!((mean_photon_number(&out) - want).abs() < 1e-9);
    }

    #[test]
    fn population_map_matches_direct_collisions() {
        let res = ReservoirSpec::new(ReservoirKind::MultiAtom, 2, 0.7, 1.0).unwrap();
        let c = CouplingSpec::new(0.1, 0.5, 0.25, 1e-3, 1e-3).unwrap();
        let f = field(8, 1.0);
        let collider = Collider::new(&res, &c, &f, &IntegratorSettings::for_window(0.5)).unwrap();
        let map = collider.population_map().unwrap();
        let mut rho = thermal_field_state(&f);
        let mut p = rho.real_diagonal();
        for _ in 0..4 {
            rho = collider.step(&rho).unwrap();
            p = map.apply(&p);
        }
        assert!(rho.max_abs_diff(&ComplexMatrix::from_real_diag(&p)) < 1e-12);
        for k in 0..8 {
            let col: f64 = (0..8).map(|n| map.transfer(n, k)).sum();
            assert!((col - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn single_atom_cluster_and_single_ground_level_agree() {
        let c = CouplingSpec::new(0.1, 0.5, 0.0, 1e-3, 1e-4).unwrap();
        let f = field(10, 1.0);
        let s = IntegratorSettings::for_window(0.5);
        let a = ReservoirSpec::new(ReservoirKind::MultiAtom, 1, 0.5, 1.0).unwrap();
        let b = ReservoirSpec::new(ReservoirKind::MultiLevel, 1, 0.5, 1.0).unwrap();
        let ma = Collider::new(&a, &c, &f, &s).unwrap().population_map().unwrap();
        let mb = Collider::new(&b, &c, &f, &s).unwrap().population_map().unwrap();
        let (mut pa, mut pb) = (thermal_field_state(&f).real_diagonal(), thermal_field_state(&f).real_diagonal());
        for _ in 0..200 {
            pa = ma.apply(&pa);
            pb = mb.apply(&pb);
        }
        let diff = pa.iter().zip(&pb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-10, "{diff:e}");
    }

    #[test]
    fn joint_state_layout_matches_kron() {
        let (pe, pg) = two_level_populations(1.0, 1.0).unwrap();
        let at = ComplexMatrix::from_real_diag(&[pe, pg]);
        let rho_f = thermal_field_state(&field(3, 1.0));
        let joint = kron(&at, &rho_f).unwrap();
        let spec = HilbertSpec::new(vec![2, 3]).unwrap();
        assert!(partial_trace(&joint, &spec, 1).unwrap().max_abs_diff(&rho_f) < 1e-15);
    }
}
