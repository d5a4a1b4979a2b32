//! The pure and mixed three-qubit benchmark states.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    eig_hermitian, jacobi_eigh, permute_qubits, ComplexMatrix, Qubit, C64, HERMITIAN_TOL,
};

/// Trace tolerance for a valid density matrix.
pub const TRACE_TOL: f64 = 1e-12;
/// Smallest eigenvalue accepted as positive semidefinite.
pub const PSD_FLOOR: f64 = -1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "GHZ")]
    Ghz,
    W,
    Wbar,
    #[serde(rename = "WWbar")]
    WWbar,
    Star,
    #[serde(rename = "WernerGHZ")]
    WernerGhz,
    WernerW,
    #[serde(rename = "GHZWMix")]
    GhzWMix,
}

impl Family {
    pub const ALL: [Family; 8] = [
        Family::Ghz,
        Family::W,
        Family::Wbar,
        Family::WWbar,
        Family::Star,
        Family::WernerGhz,
        Family::WernerW,
        Family::GhzWMix,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Ghz => "GHZ",
            Family::W => "W",
            Family::Wbar => "Wbar",
            Family::WWbar => "WWbar",
            Family::Star => "Star",
            Family::WernerGhz => "WernerGHZ",
            Family::WernerW => "WernerW",
            Family::GhzWMix => "GHZWMix",
        }
    }

    pub fn is_mixed(self) -> bool {
        matches!(self, Family::WernerGhz | Family::WernerW | Family::GhzWMix)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace(['-', '_'], "");
        Family::ALL
            .iter()
            .copied()
            .find(|f| f.name().to_ascii_lowercase() == key)
            .ok_or_else(|| Error::Config {
                line: 0,
                message: format!("unknown state family '{s}'"),
            })
    }
}

/// A state family plus its mixing probability (ignored for pure families).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateSpec {
    pub family: Family,
    pub p: f64,
}

impl StateSpec {
    pub fn pure(family: Family) -> Self {
        Self { family, p: 1.0 }
    }

    pub fn mixed(family: Family, p: f64) -> Self {
        Self { family, p }
    }

    /// Label used in legends: `GHZ`, `WernerGHZ p=0.5`.
    pub fn label(&self) -> String {
        if self.family.is_mixed() {
            format!("{} p={}", self.family, self.p)
        } else {
            self.family.to_string()
        }
    }
}

/// A unit-trace positive-semidefinite Hermitian matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityMatrix(ComplexMatrix);

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        let asym = m.max_asymmetry();
        if asym > HERMITIAN_TOL {
            return Err(Error::NotHermitian {
                max_asymmetry: asym,
            });
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidDensityMatrix(format!("trace is {tr}")));
        }
        let min = eig_hermitian(&m)?.eigenvalues[0];
        if min < PSD_FLOOR {
            return Err(Error::InvalidDensityMatrix(format!(
                "minimum eigenvalue {min:.3e} is negative"
            )));
        }
        Ok(Self(m.hermitian_part()))
    }

    /// Wraps a matrix the caller already knows to be a state.
    pub(crate) fn new_unchecked(m: ComplexMatrix) -> Self {
        Self(m)
    }

    pub fn from_pure(psi: &[C64]) -> Result<Self> {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidDensityMatrix("zero state vector".into()));
        }
        let v: Vec<C64> = psi.iter().map(|z| z / norm).collect();
        Ok(Self(ComplexMatrix::projector(&v)?.hermitian_part()))
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        Ok(Self(ComplexMatrix::identity(dim)?.scale(1.0 / dim as f64)))
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        jacobi_eigh(&self.0).eigenvalues
    }

    /// Von Neumann entropy in nats, with `0 ln 0 = 0`.
    pub fn entropy_nats(&self) -> f64 {
        self.eigenvalues()
            .into_iter()
            .filter(|&l| l > 0.0)
            .map(|l| -l * l.ln())
            .sum()
    }

    pub fn entropy_bits(&self) -> f64 {
        self.entropy_nats() / std::f64::consts::LN_2
    }

    /// Reduced state on the qubits in `keep` (8-dimensional input only).
    pub fn reduce(&self, keep: &[Qubit]) -> Result<Self> {
        Ok(Self(crate::linalg::partial_trace(&self.0, keep)?))
    }

    /// Convex combination `p * self + (1 - p) * other`.
    pub fn mix(&self, other: &Self, p: f64) -> Result<Self> {
        check_p(p)?;
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch("mixing states of different size".into()));
        }
        Ok(Self(self.0.scale(p) + other.0.scale(1.0 - p)))
    }
}

fn check_p(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(Error::InvalidProbability(p));
    }
    Ok(())
}

fn basis_superposition(indices: &[usize]) -> Vec<C64> {
    let mut v = vec![C64::new(0.0, 0.0); 8];
    for &i in indices {
        v[i] = C64::new(1.0, 0.0);
    }
    v
}

/// Unnormalised state vectors of the pure families.
pub fn pure_vector(family: Family) -> Option<Vec<C64>> {
    let v = match family {
        Family::Ghz => basis_superposition(&[0b000, 0b111]),
        Family::W => basis_superposition(&[0b001, 0b010, 0b100]),
        Family::Wbar => basis_superposition(&[0b110, 0b101, 0b011]),
        // W and Wbar have disjoint support, so their normalised sum is a
        // uniform superposition over all six single- and double-excitations.
        Family::WWbar => basis_superposition(&[0b001, 0b010, 0b100, 0b110, 0b101, 0b011]),
        Family::Star => basis_superposition(&[0b000, 0b100, 0b101, 0b111]),
        _ => return None,
    };
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    Some(v.into_iter().map(|z| z / norm).collect())
}

/// Density matrix for a benchmark state.
pub fn make_state(spec: &StateSpec) -> Result<DensityMatrix> {
    check_p(spec.p)?;
    if let Some(v) = pure_vector(spec.family) {
        return DensityMatrix::from_pure(&v);
    }
    let ghz = DensityMatrix::from_pure(&pure_vector(Family::Ghz).expect("pure"))?;
    let w = DensityMatrix::from_pure(&pure_vector(Family::W).expect("pure"))?;
    let noise = DensityMatrix::maximally_mixed(8)?;
    match spec.family {
        Family::WernerGhz => ghz.mix(&noise, spec.p),
        Family::WernerW => w.mix(&noise, spec.p),
        Family::GhzWMix => ghz.mix(&w, spec.p),
        _ => unreachable!("pure families handled above"),
    }
}

/// The Star state with its central qubit moved to `center`. As written
/// the central qubit is C: tracing it out leaves A and B separable.
pub fn star_with_center(center: Qubit) -> Result<DensityMatrix> {
    let star = make_state(&StateSpec::pure(Family::Star))?;
    let source = match center {
        Qubit::C => return Ok(star),
        Qubit::A => [Qubit::C, Qubit::B, Qubit::A],
        Qubit::B => [Qubit::A, Qubit::C, Qubit::B],
    };
    Ok(DensityMatrix(permute_qubits(star.matrix(), source)?))
}

/// `Tr rho^2`.
pub fn purity(rho: &DensityMatrix) -> f64 {
    let m = rho.matrix();
    m.trace_product_re(m)
}
