//! Reservoir and field specifications, thermal initial states and the
//! Jaynes-Cummings, Tavis-Cummings and multilevel Hamiltonians.
//!
//! Units: ħ = k_B = 1, frequencies and temperatures in units of the cavity
//! frequency.

use log::warn;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{
    annihilation, collective_spin, lift, multilevel_transition, number_op, pauli, Collective,
    FockTruncation, Pauli, Transition, DEFAULT_MAX_ATOMS,
};
use crate::linalg::{kron_all, ComplexMatrix, HilbertSpec};

/// Coupling strength φ = gτ above which the second-order rate picture is
/// no longer trusted.
pub const WEAK_COUPLING_LIMIT: f64 = 0.3;

/// Population a thermal state may leave outside the truncated space before
/// a warning is raised.
pub const THERMAL_TAIL_WARN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReservoirKind {
    /// Cluster of N uncorrelated two-level atoms.
    MultiAtom,
    /// One atom with an excited level and N degenerate ground levels.
    MultiLevel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReservoirSpec {
    pub kind: ReservoirKind,
    pub n: usize,
    pub temperature: f64,
    pub omega: f64,
}

impl ReservoirSpec {
    pub fn new(kind: ReservoirKind, n: usize, temperature: f64, omega: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Validation("reservoir.N must be >= 1".into()));
        }
        if kind == ReservoirKind::MultiAtom && n > DEFAULT_MAX_ATOMS {
            return Err(Error::DimensionLimit {
                what: "atoms in cluster",
                requested: n,
                limit: DEFAULT_MAX_ATOMS,
            });
        }
        if !(temperature > 0.0) || temperature.is_nan() {
            return Err(Error::Validation(format!("reservoir.T_a must be > 0, got {temperature}")));
        }
        if !(omega > 0.0) || !omega.is_finite() {
            return Err(Error::Validation(format!("reservoir.omega must be > 0, got {omega}")));
        }
        let spec = Self { kind, n, temperature, omega };
        // Rejects gain-regime multilevel reservoirs up front.
        spec.populations()?;
        Ok(spec)
    }

    /// (p_e, p_g) for each two-level atom, or (p_e, p_g') for the multilevel atom.
    pub fn populations(&self) -> Result<(f64, f64)> {
        match self.kind {
            ReservoirKind::MultiAtom => two_level_populations(self.omega, self.temperature),
            ReservoirKind::MultiLevel => multilevel_populations(self.n, self.omega, self.temperature),
        }
    }

    /// Dimension of the atomic Hilbert space.
    pub fn atom_dim(&self) -> usize {
        match self.kind {
            ReservoirKind::MultiAtom => 1 << self.n,
            ReservoirKind::MultiLevel => self.n + 1,
        }
    }

    pub fn atom_state(&self) -> Result<ComplexMatrix> {
        let (pe, _) = self.populations()?;
        match self.kind {
            ReservoirKind::MultiAtom => atom_cluster_state(self.n, pe),
            ReservoirKind::MultiLevel => multilevel_atom_state(self.n, pe),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSpec {
    pub omega: f64,
    pub truncation: FockTruncation,
    pub initial_temperature: f64,
}

impl FieldSpec {
    pub fn new(omega: f64, truncation: FockTruncation, initial_temperature: f64) -> Result<Self> {
        if !(omega > 0.0) || !omega.is_finite() {
            return Err(Error::Validation(format!("field.Omega must be > 0, got {omega}")));
        }
        if !(initial_temperature >= 0.0) || !initial_temperature.is_finite() {
            return Err(Error::Validation(format!(
                "field.T_f0 must be >= 0, got {initial_temperature}"
            )));
        }
        Ok(Self { omega, truncation, initial_temperature })
    }

    pub fn dim(&self) -> usize {
        self.truncation.dim()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingSpec {
    pub g: f64,
    pub tau: f64,
    pub tau0: f64,
    pub gamma: f64,
    pub kappa: f64,
}

impl CouplingSpec {
    pub fn new(g: f64, tau: f64, tau0: f64, gamma: f64, kappa: f64) -> Result<Self> {
        if !g.is_finite() || g < 0.0 {
            return Err(Error::Validation(format!("coupling.g must be >= 0, got {g}")));
        }
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::Validation(format!("coupling.tau must be > 0, got {tau}")));
        }
        if !(tau0 >= 0.0) || !tau0.is_finite() {
            return Err(Error::Validation(format!("coupling.tau0 must be >= 0, got {tau0}")));
        }
        for (name, v) in [("gamma", gamma), ("kappa", kappa)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Validation(format!("coupling.{name} must be >= 0, got {v}")));
            }
        }
        let spec = Self { g, tau, tau0, gamma, kappa };
        if spec.phi() > WEAK_COUPLING_LIMIT {
            warn!(
                "g*tau = {} exceeds {WEAK_COUPLING_LIMIT}; second-order rates are unreliable",
                spec.phi()
            );
        }
        if gamma * tau > 1e-2 || kappa * tau > 1e-2 {
            warn!("decay during one interaction window is not negligible");
        }
        Ok(spec)
    }

    /// φ = gτ.
    pub fn phi(&self) -> f64 {
        self.g * self.tau
    }

    /// r = 1/(τ + τ₀).
    pub fn injection_rate(&self) -> f64 {
        1.0 / self.period()
    }

    /// Time between successive injections.
    pub fn period(&self) -> f64 {
        self.tau + self.tau0
    }
}

fn check_temperature(omega: f64, t: f64) -> Result<()> {
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(Error::Domain(format!("level spacing must be > 0, got {omega}")));
    }
    if !(t > 0.0) || t.is_nan() {
        return Err(Error::Domain(format!("temperature must be > 0, got {t}")));
    }
    Ok(())
}

/// Thermal populations (p_e, p_g) of a two-level atom with p_g/p_e = e^{ω/T}.
pub fn two_level_populations(omega: f64, t: f64) -> Result<(f64, f64)> {
    check_temperature(omega, t)?;
    let x = omega / t;
    Ok((1.0 / (1.0 + x.exp()), 1.0 / (1.0 + (-x).exp())))
}

/// Temperature ω / ln(p_g/p_e) carried by a two-level population pair.
pub fn two_level_temperature(p_e: f64, p_g: f64, omega: f64) -> f64 {
    omega / (p_g / p_e).ln()
}

/// (p_e, p_g') of the multilevel atom with N·p_g'/p_e = e^{ω/T} and
/// p_e + N·p_g' = 1.
pub fn multilevel_populations(n: usize, omega: f64, t: f64) -> Result<(f64, f64)> {
    check_temperature(omega, t)?;
    if n == 0 {
        return Err(Error::Domain("multilevel atom needs N >= 1".into()));
    }
    let x = omega / t;
    let nf = n as f64;
    if x.exp() <= nf {
        return Err(Error::GainRegime(format!(
            "exp(omega/T_a) = {:.6} <= N = {n}: single ground level is not more populated than the excited level",
            x.exp()
        )));
    }
    let pe = 1.0 / (1.0 + x.exp());
    let pg = 1.0 / (nf * (1.0 + (-x).exp()));
    Ok((pe, pg))
}

/// Reservoir temperature ω / ln(N·p_g'/p_e) of the multilevel atom.
pub fn multilevel_temperature(n: usize, p_e: f64, p_g: f64, omega: f64) -> f64 {
    omega / (n as f64 * p_g / p_e).ln()
}

/// Untruncated thermal population of Fock level `dim − 1`.
pub fn thermal_tail(omega: f64, t: f64, dim: usize) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let q = (-omega / t).exp();
    (1.0 - q) * q.powi(dim as i32 - 1)
}

/// e^{−βΩn̂}/Z on the truncated space, renormalized to unit trace.
pub fn thermal_field_state(field: &FieldSpec) -> ComplexMatrix {
    let dim = field.dim();
    let t = field.initial_temperature;
    if t == 0.0 {
        return ComplexMatrix::projector(dim, 0);
    }
    let tail = thermal_tail(field.omega, t, dim);
    if tail > THERMAL_TAIL_WARN {
        warn!("thermal field at T={t} leaves population {tail:e} in the top Fock level of dim {dim}");
    }
    let weights: Vec<f64> = (0..dim).map(|n| (-(n as f64) * field.omega / t).exp()).collect();
    let z: f64 = weights.iter().sum();
    let probs: Vec<f64> = weights.iter().map(|w| w / z).collect();
    ComplexMatrix::from_real_diag(&probs)
}

fn check_excited_population(p_e: f64) -> Result<()> {
    if !(0.0..0.5).contains(&p_e) {
        return Err(Error::Domain(format!(
            "excited population {p_e} outside [0, 0.5): not a positive-temperature thermal atom"
        )));
    }
    Ok(())
}

/// N-fold tensor power of diag(p_e, 1 − p_e).
pub fn atom_cluster_state(n: usize, p_e: f64) -> Result<ComplexMatrix> {
    check_excited_population(p_e)?;
    if n == 0 {
        return Err(Error::Domain("cluster needs N >= 1".into()));
    }
    let single = ComplexMatrix::from_real_diag(&[p_e, 1.0 - p_e]);
    kron_all(std::iter::repeat(&single).take(n))
}

/// diag(p_e, p_g', …, p_g') with p_g' = (1 − p_e)/N.
pub fn multilevel_atom_state(n: usize, p_e: f64) -> Result<ComplexMatrix> {
    check_excited_population(p_e)?;
    if n == 0 {
        return Err(Error::Domain("multilevel atom needs N >= 1".into()));
    }
    let pg = (1.0 - p_e) / n as f64;
    let mut diag = vec![pg; n + 1];
    diag[0] = p_e;
    Ok(ComplexMatrix::from_real_diag(&diag))
}

fn warn_if_detuned(field: &FieldSpec, omega: f64) {
    if (omega - field.omega).abs() > 1e-12 * field.omega {
        warn!("detuned atom (omega={omega}, Omega={}): experimental, off the resonant model", field.omega);
    }
}

/// Joint atom ⊗ field space for `atom_dim` atomic levels.
pub fn joint_spec(atom_dim: usize, field: &FieldSpec) -> Result<HilbertSpec> {
    HilbertSpec::new(vec![atom_dim, field.dim()])
}

/// g(A₊ a + A₋ a†) for an atomic raising operator A₊ on the joint space.
fn exchange_term(raise: &ComplexMatrix, field: &FieldSpec, g: f64) -> Result<ComplexMatrix> {
    let spec = joint_spec(raise.rows(), field)?;
    let a = annihilation(field.truncation);
    let a_joint = lift(&a, &spec, 1)?;
    let up = &lift(raise, &spec, 0)? * &a_joint;
    Ok((&up + &up.adjoint()).scale_real(g))
}

fn field_energy(field: &FieldSpec, atom_dim: usize) -> Result<ComplexMatrix> {
    let spec = joint_spec(atom_dim, field)?;
    Ok(lift(&number_op(field.truncation), &spec, 1)?.scale_real(field.omega))
}

/// Ω a†a + (ω/2)σ_z + g(σ₊a + σ₋a†) on (2, dim).
pub fn hamiltonian_jc(field: &FieldSpec, omega: f64, g: f64) -> Result<ComplexMatrix> {
    warn_if_detuned(field, omega);
    let spec = joint_spec(2, field)?;
    let mut h = field_energy(field, 2)?;
    h += &lift(&pauli(Pauli::Z), &spec, 0)?.scale_real(omega / 2.0);
    h += &exchange_term(&pauli(Pauli::Plus), field, g)?;
    Ok(h)
}

/// Interaction part g(a†S₋ + aS₊) of the Tavis-Cummings Hamiltonian.
pub fn interaction_tc(field: &FieldSpec, g: f64, n: usize) -> Result<ComplexMatrix> {
    exchange_term(&collective_spin(n, Collective::Plus)?, field, g)
}

/// Ω a†a + ω S_z + g(a†S₋ + aS₊) on (2^N, dim).
pub fn hamiltonian_tc(field: &FieldSpec, omega: f64, g: f64, n: usize) -> Result<ComplexMatrix> {
    warn_if_detuned(field, omega);
    let sz = collective_spin(n, Collective::Z)?;
    let spec = joint_spec(sz.rows(), field)?;
    let mut h = field_energy(field, sz.rows())?;
    h += &lift(&sz, &spec, 0)?.scale_real(omega);
    h += &interaction_tc(field, g, n)?;
    Ok(h)
}

/// Interaction part g(R₊a + R₋a†) of the multilevel Hamiltonian.
pub fn interaction_multilevel(field: &FieldSpec, g: f64, n: usize) -> Result<ComplexMatrix> {
    exchange_term(&multilevel_transition(n, Transition::Plus)?, field, g)
}

/// Ω a†a + ω|e⟩⟨e| + g(R₊a + R₋a†) on (N+1, dim), ground levels at zero energy.
pub fn hamiltonian_multilevel(field: &FieldSpec, omega: f64, g: f64, n: usize) -> Result<ComplexMatrix> {
    warn_if_detuned(field, omega);
    let spec = joint_spec(n + 1, field)?;
    let mut h = field_energy(field, n + 1)?;
    let excited = ComplexMatrix::projector(n + 1, 0).scale(C64::new(omega, 0.0));
    h += &lift(&excited, &spec, 0)?;
    h += &interaction_multilevel(field, g, n)?;
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::partial_trace;

    fn field(dim: usize, t: f64) -> FieldSpec {
        FieldSpec::new(1.0, FockTruncation::new(dim).unwrap(), t).unwrap()
    }

    #[test]
    fn two_level_population_limits() {
        let (pe, pg) = two_level_populations(1.0, 1e-4).unwrap();
        assert_eq!((pe, pg), (0.0, 1.0));
        let (pe, pg) = two_level_populations(1.0, 2.0).unwrap();
        assert!((pe - 0.37754).abs() < 1e-5 && (pg - 0.62246).abs() < 1e-5);
        let (pe, pg) = two_level_populations(1.0, 1e12).unwrap();
        assert!((pe - 0.5).abs() < 1e-12 && (pg - 0.5).abs() < 1e-12);
        assert!(matches!(two_level_populations(1.0, 0.0), Err(Error::Domain(_))));
        assert!(matches!(two_level_populations(1.0, -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn two_level_round_trip() {
        for t in [0.05, 0.1, 0.7, 2.0, 9.0] {
            let (pe, pg) = two_level_populations(1.0, t).unwrap();
            assert!(pg > pe);
            assert!((pe + pg - 1.0).abs() < 1e-15);
            let back = two_level_temperature(pe, pg, 1.0);
            assert!((back - t).abs() / t < 1e-10, "{t} -> {back}");
        }
    }

    #[test]
    fn multilevel_populations_examples() {
        assert_eq!(multilevel_populations(1, 1.0, 2.0).unwrap(), two_level_populations(1.0, 2.0).unwrap());
        let (pe, pg) = multilevel_populations(2, 1.0, 0.1).unwrap();
        assert!((pe - 4.5398e-5).abs() < 1e-9);
        assert!((pg - 0.49998).abs() < 1e-5);
        assert!(matches!(multilevel_populations(3, 1.0, 2.0), Err(Error::GainRegime(_))));
    }

    #[test]
    fn multilevel_populations_satisfy_both_constraints() {
        for (n, t) in [(1, 0.3), (2, 0.5), (3, 0.5), (5, 0.2), (4, 0.1)] {
            let (pe, pg) = multilevel_populations(n, 1.0, t).unwrap();
            let nf = n as f64;
            assert!((pe + nf * pg - 1.0).abs() < 1e-12);
            assert!((nf * pg / pe - (1.0 / t).exp()).abs() / (1.0 / t).exp() < 1e-12);
            assert!((multilevel_temperature(n, pe, pg, 1.0) - t).abs() < 1e-10);
        }
    }

    #[test]
    fn thermal_field_states() {
        assert_eq!(thermal_field_state(&field(5, 0.0)), ComplexMatrix::projector(5, 0));
        let rho = thermal_field_state(&field(30, 1.0));
        let p0 = 1.0 - (-1.0f64).exp();
        assert!((rho[(0, 0)].re - p0).abs() < 1e-12);
        for n in 1..10 {
            assert!((rho[(n, n)].re - p0 * (-(n as f64)).exp()).abs() < 1e-12);
        }
        for (d, t) in [(2, 5.0), (10, 0.3), (40, 3.0)] {
            assert!((thermal_field_state(&field(d, t)).trace().re - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn cluster_states() {
        assert_eq!(atom_cluster_state(1, 0.2).unwrap(), ComplexMatrix::from_real_diag(&[0.2, 0.8]));
        let pe = 0.37754;
        let rho = atom_cluster_state(2, pe).unwrap();
        let want = [0.14254, 0.23501, 0.23501, 0.38746];
        for (g, w) in rho.real_diagonal().iter().zip(want) {
            assert!((g - w).abs() < 1e-5);
        }
        let purity = (&rho * &rho).trace().re;
        assert!((purity - (pe * pe + (1.0 - pe) * (1.0 - pe)).powi(2)).abs() < 1e-14);
        assert!(atom_cluster_state(1, 0.5).is_err());
    }

    #[test]
    fn cluster_marginals_are_single_atom_states() {
        let pe = 0.3;
        let single = ComplexMatrix::from_real_diag(&[pe, 1.0 - pe]);
        for n in 2..=4 {
            let rho = atom_cluster_state(n, pe).unwrap();
            let spec = HilbertSpec::new(vec![2; n]).unwrap();
            for keep in 0..n {
                assert!(partial_trace(&rho, &spec, keep).unwrap().max_abs_diff(&single) < 1e-12);
            }
        }
    }

    #[test]
    fn multilevel_states() {
        assert_eq!(multilevel_atom_state(1, 0.2).unwrap(), ComplexMatrix::from_real_diag(&[0.2, 0.8]));
        let rho = multilevel_atom_state(2, 4.5398e-5).unwrap();
        let d = rho.real_diagonal();
        assert!((d[0] - 4.5398e-5).abs() < 1e-12 && (d[1] - 0.49998).abs() < 1e-5 && d[1] == d[2]);
        for n in 1..6 {
            assert!((multilevel_atom_state(n, 0.01).unwrap().trace().re - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn jc_hamiltonian() {
        let f = field(6, 1.0);
        let h0 = hamiltonian_jc(&f, 1.0, 0.0).unwrap();
        assert_eq!(h0, ComplexMatrix::from_diag(&h0.diagonal()));
        let h = hamiltonian_jc(&f, 1.0, 0.08).unwrap();
        assert!(h.hermiticity_defect() < 1e-14);
        // |e,0⟩ is joint index 0, |g,1⟩ is 6 + 1.
        assert_eq!(h[(0, 7)].re, 0.08);
    }

    #[test]
    fn jc_conserves_excitations_below_the_cutoff() {
        let t = FockTruncation::new(6).unwrap();
        let f = FieldSpec::new(1.0, t, 1.0).unwrap();
        let spec = joint_spec(2, &f).unwrap();
        let h = hamiltonian_jc(&f, 1.0, 0.1).unwrap();
        let n_ex = &lift(&number_op(t), &spec, 1).unwrap()
            + &lift(&(&pauli(Pauli::Plus) * &pauli(Pauli::Minus)), &spec, 0).unwrap();
        let comm = h.commutator(&n_ex).unwrap();
        // Rows/cols touching the top Fock level see the truncation.
        for i in 0..12 {
            for j in 0..12 {
                if i % 6 == 5 || j % 6 == 5 {
                    continue;
                }
                assert!(comm[(i, j)].norm() < 1e-12);
            }
        }
    }

    #[test]
    fn tc_reduces_to_jc() {
        let f = field(5, 1.0);
        assert_eq!(hamiltonian_tc(&f, 1.0, 0.1, 1).unwrap(), hamiltonian_jc(&f, 1.0, 0.1).unwrap());
        for n in 1..=3 {
            assert!(hamiltonian_tc(&f, 1.0, 0.1, n).unwrap().hermiticity_defect() < 1e-15);
        }
        assert!(matches!(hamiltonian_tc(&f, 1.0, 0.1, 7), Err(Error::DimensionLimit { .. })));
    }

    #[test]
    fn multilevel_hamiltonian() {
        let f = field(5, 1.0);
        assert_eq!(hamiltonian_multilevel(&f, 1.0, 0.1, 1).unwrap(), hamiltonian_jc(&f, 1.0, 0.1).unwrap().try_add(
            &lift(&ComplexMatrix::identity(2), &joint_spec(2, &f).unwrap(), 0).unwrap().scale_real(0.5)).unwrap());
        for n in 1..=4 {
            let g = 0.1;
            let h = hamiltonian_multilevel(&f, 1.0, g, n).unwrap();
            assert!(h.hermiticity_defect() < 1e-14);
            let hi = interaction_multilevel(&f, g, n).unwrap();
            let amp = g / (n as f64).sqrt();
            for i in 1..=n {
                for m in 0..4 {
                    let e_m = m;
                    let g_m1 = i * 5 + m + 1;
                    assert!((hi[(e_m, g_m1)].re - amp * ((m + 1) as f64).sqrt()).abs() < 1e-15);
                }
            }
            // Bordered form: only row/column 0 of the atomic block is populated.
            for i in 1..=n {
                for j in 1..=n {
                    for p in 0..5 {
                        for q in 0..5 {
                            assert_eq!(hi[(i * 5 + p, j * 5 + q)].norm(), 0.0);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn spec_validation() {
        assert!(ReservoirSpec::new(ReservoirKind::MultiAtom, 0, 1.0, 1.0).is_err());
        assert!(ReservoirSpec::new(ReservoirKind::MultiAtom, 1, -1.0, 1.0).is_err());
        assert!(matches!(
            ReservoirSpec::new(ReservoirKind::MultiLevel, 3, 2.0, 1.0),
            Err(Error::GainRegime(_))
        ));
        let r = ReservoirSpec::new(ReservoirKind::MultiLevel, 3, 0.1, 1.0).unwrap();
        assert_eq!(r.atom_dim(), 4);
        let c = CouplingSpec::new(0.1, 0.5, 0.5, 0.0, 0.0).unwrap();
        assert_eq!(c.injection_rate(), 1.0);
        assert!((c.phi() - 0.05).abs() < 1e-16);
        assert!(CouplingSpec::new(0.1, 0.5, -1.0, 0.0, 0.0).is_err());
        assert!(FieldSpec::new(0.0, FockTruncation::new(3).unwrap(), 1.0).is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn multilevel_constraints(n in 1usize..6, t in 0.05f64..0.5) {
                prop_assume!((1.0 / t).exp() > n as f64);
                let (pe, pg) = multilevel_populations(n, 1.0, t).unwrap();
                prop_assert!((pe + n as f64 * pg - 1.0).abs() < 1e-12);
                prop_assert!((multilevel_temperature(n, pe, pg, 1.0) - t).abs() / t < 1e-9);
            }

            #[test]
            fn thermal_state_is_normalized_and_decreasing(t in 0.05f64..3.0) {
                let field = FieldSpec::new(1.0, FockTruncation::new(80).unwrap(), t).unwrap();
                let p = thermal_field_state(&field).real_diagonal();
                prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                prop_assert!(p.windows(2).all(|w| w[1] <= w[0]));
            }
        }
    }
}
