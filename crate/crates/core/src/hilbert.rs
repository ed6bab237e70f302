//! Operator builders on truncated bosonic and atomic spaces.
//!
//! Atomic basis ordering puts the excited state first: index 0 is |e⟩ and
//! the remaining indices are ground levels. Composite spaces are ordered
//! atoms first, field last.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{kron, ComplexMatrix, HilbertSpec, ONE};

/// Default cap on the number of two-level atoms in a cluster.
pub const DEFAULT_MAX_ATOMS: usize = 6;

/// Number of retained Fock levels |0⟩…|dim−1⟩.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FockTruncation {
    dim: usize,
}

impl FockTruncation {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Validation(format!("Fock dimension {dim} < 2")));
        }
        Ok(Self { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

pub fn annihilation(t: FockTruncation) -> ComplexMatrix {
    let mut a = ComplexMatrix::zeros(t.dim, t.dim);
    for n in 1..t.dim {
        a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    a
}

pub fn creation(t: FockTruncation) -> ComplexMatrix {
    annihilation(t).adjoint()
}

pub fn number_op(t: FockTruncation) -> ComplexMatrix {
    let diag: Vec<f64> = (0..t.dim).map(|n| n as f64).collect();
    ComplexMatrix::from_real_diag(&diag)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    X,
    Y,
    Z,
    Plus,
    Minus,
}

/// Two-level operators with |e⟩ at index 0, so σ₊ = |e⟩⟨g| sits at (0, 1).
pub fn pauli(which: Pauli) -> ComplexMatrix {
    let (o, z, i) = (ONE, C64::new(0.0, 0.0), C64::new(0.0, 1.0));
    let rows = match which {
        Pauli::X => [[z, o], [o, z]],
        Pauli::Y => [[z, -i], [i, z]],
        Pauli::Z => [[o, z], [z, -o]],
        Pauli::Plus => [[z, o], [z, z]],
        Pauli::Minus => [[z, z], [o, z]],
    };
    ComplexMatrix::from_rows(&rows.map(|r| r.to_vec())).expect("2x2")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Collective {
    Z,
    Plus,
    Minus,
}

pub fn collective_spin(n_atoms: usize, which: Collective) -> Result<ComplexMatrix> {
    collective_spin_capped(n_atoms, which, DEFAULT_MAX_ATOMS)
}

/// S_z = ½Σσ_zⁱ, S± = Σσ±ⁱ on the full 2^N space.
pub fn collective_spin_capped(n_atoms: usize, which: Collective, max_atoms: usize) -> Result<ComplexMatrix> {
    if n_atoms == 0 {
        return Err(Error::Validation("collective spin needs at least one atom".into()));
    }
    if n_atoms > max_atoms {
        return Err(Error::DimensionLimit { what: "atoms in cluster", requested: n_atoms, limit: max_atoms });
    }
    let (single, weight) = match which {
        Collective::Z => (pauli(Pauli::Z), 0.5),
        Collective::Plus => (pauli(Pauli::Plus), 1.0),
        Collective::Minus => (pauli(Pauli::Minus), 1.0),
    };
    if n_atoms == 1 {
        return Ok(single.scale_real(weight));
    }
    let spec = HilbertSpec::new(vec![2; n_atoms])?;
    let dim = spec.total_dim();
    let mut total = ComplexMatrix::zeros(dim, dim);
    for k in 0..n_atoms {
        total += &lift(&single, &spec, k)?;
    }
    Ok(total.scale_real(weight))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transition {
    Plus,
    Minus,
}

/// R₊ = N^{-1/2} Σᵢ |e⟩⟨gᵢ| and R₋ = R₊† on the (N+1)-level atom.
pub fn multilevel_transition(n_ground: usize, which: Transition) -> Result<ComplexMatrix> {
    if n_ground == 0 {
        return Err(Error::Validation("multilevel atom needs at least one ground level".into()));
    }
    let amp = C64::new(1.0 / (n_ground as f64).sqrt(), 0.0);
    let mut r = ComplexMatrix::zeros(n_ground + 1, n_ground + 1);
    for i in 1..=n_ground {
        r[(0, i)] = amp;
    }
    Ok(match which {
        Transition::Plus => r,
        Transition::Minus => r.adjoint(),
    })
}

/// Embeds `op` at subsystem `position`, identity elsewhere.
pub fn lift(op: &ComplexMatrix, spec: &HilbertSpec, position: usize) -> Result<ComplexMatrix> {
    let dims = spec.dims();
    if position >= dims.len() {
        return Err(Error::Shape(format!("lift: position {position} out of {}", dims.len())));
    }
    if op.shape() != (dims[position], dims[position]) {
        return Err(Error::Shape(format!(
            "lift: operator {:?} at subsystem of dimension {}",
            op.shape(),
            dims[position]
        )));
    }
    let left: usize = dims[..position].iter().product();
    let right: usize = dims[position + 1..].iter().product();
    let mut out = op.clone();
    if left > 1 {
        out = kron(&ComplexMatrix::identity(left), &out)?;
    }
    if right > 1 {
        out = kron(&out, &ComplexMatrix::identity(right))?;
    }
    Ok(out)
}
