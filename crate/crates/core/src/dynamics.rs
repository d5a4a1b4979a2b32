//! Pure-dephasing channels for three qubits.
//!
//! Every channel multiplies the density matrix elementwise by a table of
//! decoherence factors. For basis states `s, s'`:
//!
//! * local bath: `exp(-2 n_d X)` with `n_d` the Hamming distance of `s, s'`
//! * common bath: `exp(-(m - m')^2 X / 2 + i (m^2 - m'^2) B)` with `m` the
//!   eigenvalue of `S_z = sum_i sigma_z^i` (`sigma_z |0> = +|0>`)
//!
//! where `X = gamma0 t` without memory and `X = theta(t)`, `B = bphase(t)`
//! with bath memory (`B = 0` for the Markov common bath).
//!
//! The free qubit Hamiltonian is omitted: it is a product of local unitaries
//! and cannot change any entanglement across a cut.
//!
//! [`Integrator`] solves the master equations directly with fourth-order
//! Runge–Kutta and serves as an independent check of the closed forms.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bath::{
    bphase_t, dissipative_t, gamma_t, markov_rate, theta_t, BathParams, DecoherenceProfile,
};
use crate::error::{Error, Result};
use crate::linalg::{pauli, ComplexMatrix, Qubit, C64};
use crate::states::DensityMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    Local,
    Common,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Memory {
    Markov,
    #[serde(rename = "nonmarkov")]
    NonMarkov,
}

impl Topology {
    pub fn name(self) -> &'static str {
        match self {
            Topology::Local => "local",
            Topology::Common => "common",
        }
    }
}

impl Memory {
    pub fn name(self) -> &'static str {
        match self {
            Memory::Markov => "markov",
            Memory::NonMarkov => "nonmarkov",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Environment {
    pub topology: Topology,
    pub memory: Memory,
}

impl Environment {
    pub const LOCAL_MARKOV: Self = Self::new(Topology::Local, Memory::Markov);
    pub const COMMON_MARKOV: Self = Self::new(Topology::Common, Memory::Markov);
    pub const LOCAL_NON_MARKOV: Self = Self::new(Topology::Local, Memory::NonMarkov);
    pub const COMMON_NON_MARKOV: Self = Self::new(Topology::Common, Memory::NonMarkov);

    /// Panel order used in plots.
    pub const ALL: [Self; 4] = [
        Self::LOCAL_MARKOV,
        Self::COMMON_MARKOV,
        Self::LOCAL_NON_MARKOV,
        Self::COMMON_NON_MARKOV,
    ];

    pub const fn new(topology: Topology, memory: Memory) -> Self {
        Self { topology, memory }
    }

    /// Position in [`Environment::ALL`], used for deterministic sorting.
    pub fn rank(&self) -> usize {
        Self::ALL.iter().position(|e| e == self).expect("exhaustive")
    }
}

impl fmt::Display for Environment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.topology.name(), self.memory.name())
    }
}

impl FromStr for Environment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace(['-', '_', ' '], "");
        let (topo, mem) = norm.split_once('/').ok_or_else(|| Error::Config {
            line: 0,
            message: format!("environment '{s}' must look like local/markov"),
        })?;
        let topology = match topo {
            "local" => Topology::Local,
            "common" => Topology::Common,
            other => {
                return Err(Error::Config {
                    line: 0,
                    message: format!("unknown bath topology '{other}'"),
                })
            }
        };
        let memory = match mem {
            "markov" => Memory::Markov,
            "nonmarkov" => Memory::NonMarkov,
            other => {
                return Err(Error::Config {
                    line: 0,
                    message: format!("unknown bath memory '{other}'"),
                })
            }
        };
        Ok(Self { topology, memory })
    }
}

/// Number of qubits on which two 3-bit basis labels differ.
pub fn hamming_distance(s: usize, s2: usize) -> u32 {
    ((s ^ s2) & 0b111).count_ones()
}

/// Eigenvalue of `S_z` on basis state `s`: zeros minus ones.
pub fn collective_sz(s: usize) -> i32 {
    let ones = (s & 0b111).count_ones() as i32;
    3 - 2 * ones
}

/// Accumulated decoherence driving a channel at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayCoefficients {
    /// `gamma0 t` (Markov) or `theta(t)` (with memory).
    pub dephasing: f64,
    /// `bphase(t)` for the common bath with memory, otherwise zero.
    pub phase: f64,
}

impl DecayCoefficients {
    pub fn at(env: Environment, bath: &BathParams, t: f64) -> Result<Self> {
        if !(t >= 0.0) {
            return Err(Error::NegativeTime(t));
        }
        Ok(match env.memory {
            Memory::Markov => Self {
                dephasing: markov_rate(bath) * t,
                phase: 0.0,
            },
            Memory::NonMarkov => Self {
                dephasing: theta_t(bath, t)?,
                phase: match env.topology {
                    Topology::Common => bphase_t(bath, t)?,
                    Topology::Local => 0.0,
                },
            },
        })
    }

    /// Reads the coefficients for grid time `t` out of a precomputed profile.
    pub fn from_profile(
        env: Environment,
        bath: &BathParams,
        profile: &DecoherenceProfile,
        t: f64,
    ) -> Result<Self> {
        match env.memory {
            Memory::Markov => Self::at(env, bath, t),
            Memory::NonMarkov => match profile.index_of(t) {
                Some(i) => Ok(Self {
                    dephasing: profile.theta[i],
                    phase: match env.topology {
                        Topology::Common => profile.bphase[i],
                        Topology::Local => 0.0,
                    },
                }),
                None => Self::at(env, bath, t),
            },
        }
    }
}

/// Elementwise multipliers `factor(s, s')` for an 8x8 density matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PropagatorTable {
    factors: [[C64; 8]; 8],
}

impl PropagatorTable {
    pub fn from_coefficients(env: Environment, c: DecayCoefficients) -> Self {
        let mut factors = [[C64::new(0.0, 0.0); 8]; 8];
        for (s, row) in factors.iter_mut().enumerate() {
            for (s2, f) in row.iter_mut().enumerate() {
                *f = match env.topology {
                    Topology::Local => {
                        C64::new((-2.0 * hamming_distance(s, s2) as f64 * c.dephasing).exp(), 0.0)
                    }
                    Topology::Common => {
                        let (m, m2) = (collective_sz(s) as f64, collective_sz(s2) as f64);
                        let decay = -(m - m2).powi(2) * c.dephasing / 2.0;
                        let phase = (m * m - m2 * m2) * c.phase;
                        C64::from_polar(decay.exp(), phase)
                    }
                };
            }
        }
        Self { factors }
    }

    pub fn factor(&self, s: usize, s2: usize) -> C64 {
        self.factors[s][s2]
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.dim() != 8 {
            return Err(Error::DimensionMismatch(
                "dephasing channels act on three-qubit states".into(),
            ));
        }
        let out = rho.matrix().hadamard_with(|i, j| self.factors[i][j]);
        Ok(DensityMatrix::new_unchecked(out.hermitian_part()))
    }
}

pub fn build_propagator(env: Environment, bath: &BathParams, t: f64) -> Result<PropagatorTable> {
    Ok(PropagatorTable::from_coefficients(
        env,
        DecayCoefficients::at(env, bath, t)?,
    ))
}

/// `rho(t)` under the closed-form channel.
pub fn evolve(
    rho0: &DensityMatrix,
    env: Environment,
    bath: &BathParams,
    t: f64,
) -> Result<DensityMatrix> {
    build_propagator(env, bath, t)?.apply(rho0)
}

/// Instantaneous master-equation coefficients.
#[derive(Clone, Copy, Debug)]
struct Rates {
    /// local: per-qubit rate; common: coefficient of `S_z rho S_z`.
    sandwich: f64,
    /// common only: `alpha(t)`.
    alpha: C64,
}

/// Direct RK4 integration of the dephasing master equations.
pub struct Integrator {
    env: Environment,
    step: f64,
    steps: usize,
    /// Rates at every half-step node `k * step / 2`.
    nodes: Vec<Rates>,
    z_ops: [ComplexMatrix; 3],
    sz: ComplexMatrix,
    sz2: ComplexMatrix,
}

impl Integrator {
    /// Prepares an integrator on `[0, t_end]` with step at most `dt`.
    pub fn new(env: Environment, bath: &BathParams, t_end: f64, dt: f64) -> Result<Self> {
        bath.validate()?;
        if !(t_end >= 0.0) {
            return Err(Error::NegativeTime(t_end));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::StepTooLarge { drift: f64::NAN });
        }
        let ratio = t_end / dt;
        let steps = if (ratio - ratio.round()).abs() < 1e-9 {
            ratio.round() as usize
        } else {
            ratio.ceil() as usize
        };
        let step = if steps == 0 { 0.0 } else { t_end / steps as f64 };
        let g0 = markov_rate(bath);
        let nodes = (0..=2 * steps)
            .map(|k| {
                let t = 0.5 * step * k as f64;
                Ok(match (env.memory, env.topology) {
                    (Memory::Markov, Topology::Local) => Rates {
                        sandwich: g0,
                        alpha: C64::new(0.0, 0.0),
                    },
                    (Memory::Markov, Topology::Common) => Rates {
                        sandwich: g0,
                        alpha: C64::new(0.5 * g0, 0.0),
                    },
                    (Memory::NonMarkov, Topology::Local) => Rates {
                        sandwich: gamma_t(bath, t)?,
                        alpha: C64::new(0.0, 0.0),
                    },
                    (Memory::NonMarkov, Topology::Common) => {
                        let g = gamma_t(bath, t)?;
                        // trace preservation fixes the sandwich term to 2 Re alpha
                        Rates {
                            sandwich: g,
                            alpha: C64::new(0.5 * g, -dissipative_t(bath, t)?),
                        }
                    }
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let z_ops = Qubit::ALL.map(pauli::z_on);
        let sz = z_ops[0] + z_ops[1] + z_ops[2];
        let sz2 = sz.matmul(&sz);
        Ok(Self {
            env,
            step,
            steps,
            nodes,
            z_ops,
            sz,
            sz2,
        })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    fn rhs(&self, rho: &ComplexMatrix, r: Rates) -> ComplexMatrix {
        match self.env.topology {
            Topology::Local => {
                let mut out = ComplexMatrix::zeros_unchecked(8);
                for z in &self.z_ops {
                    out = out + (z.matmul(&rho.matmul(z)) - *rho).scale(r.sandwich);
                }
                out
            }
            Topology::Common => {
                let sandwich = self.sz.matmul(&rho.matmul(&self.sz)).scale(r.sandwich);
                let left = self.sz2.matmul(rho).scale_complex(r.alpha);
                let right = rho.matmul(&self.sz2).scale_complex(r.alpha.conj());
                sandwich - left - right
            }
        }
    }

    fn rk4_step(&self, rho: &ComplexMatrix, k: usize) -> ComplexMatrix {
        let h = self.step;
        let (r0, rm, r1) = (self.nodes[2 * k], self.nodes[2 * k + 1], self.nodes[2 * k + 2]);
        let k1 = self.rhs(rho, r0);
        let k2 = self.rhs(&(*rho + k1.scale(0.5 * h)), rm);
        let k3 = self.rhs(&(*rho + k2.scale(0.5 * h)), rm);
        let k4 = self.rhs(&(*rho + k3.scale(h)), r1);
        *rho + (k1 + k2.scale(2.0) + k3.scale(2.0) + k4).scale(h / 6.0)
    }

    /// States at each sample time; every sample must sit on the step grid.
    pub fn trajectory(&self, rho0: &DensityMatrix, samples: &[f64]) -> Result<Vec<DensityMatrix>> {
        if rho0.dim() != 8 {
            return Err(Error::DimensionMismatch(
                "dephasing channels act on three-qubit states".into(),
            ));
        }
        let mut targets = Vec::with_capacity(samples.len());
        for &t in samples {
            let k = if self.step == 0.0 { 0.0 } else { t / self.step };
            if (k - k.round()).abs() > 1e-6 || k.round() as usize > self.steps || t < 0.0 {
                return Err(Error::DimensionMismatch(format!(
                    "sample time {t} is not on the integrator grid"
                )));
            }
            targets.push(k.round() as usize);
        }
        let init = rho0.matrix().hermitian_part();
        let mut rho = init;
        let mut out = vec![None; samples.len()];
        let last = targets.iter().copied().max().unwrap_or(0);
        for k in 0..=last {
            for (slot, &target) in targets.iter().enumerate() {
                if target == k {
                    out[slot] = Some(self.check(&init, &rho)?);
                }
            }
            if k < last {
                rho = self.rk4_step(&rho, k).hermitian_part();
            }
        }
        Ok(out.into_iter().map(|m| m.expect("every target visited")).collect())
    }

    /// Pure dephasing never changes populations and never grows a coherence;
    /// a violation means the step is too coarse.
    fn check(&self, init: &ComplexMatrix, rho: &ComplexMatrix) -> Result<DensityMatrix> {
        let drift = (rho.trace() - init.trace()).norm();
        if drift > 1e-8 {
            return Err(Error::StepTooLarge { drift });
        }
        for i in 0..8 {
            for j in 0..8 {
                let growth = rho[(i, j)].norm() - init[(i, j)].norm();
                if growth > 1e-8 {
                    return Err(Error::StepTooLarge { drift: growth });
                }
            }
        }
        Ok(DensityMatrix::new_unchecked(*rho))
    }
}

/// `rho(t_end)` from RK4 integration of the master equation with step `dt`.
pub fn integrate_master_equation(
    rho0: &DensityMatrix,
    env: Environment,
    bath: &BathParams,
    t_end: f64,
    dt: f64,
) -> Result<DensityMatrix> {
    let integ = Integrator::new(env, bath, t_end, dt)?;
    Ok(integ.trajectory(rho0, &[t_end])?.remove(0))
}
