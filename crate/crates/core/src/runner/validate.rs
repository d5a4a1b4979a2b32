//! Self-check suite behind the `validate` subcommand.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bath::{markov_rate, BathParams};
use crate::dynamics::{
    DecayCoefficients, Environment, Integrator, PropagatorTable, Topology,
};
use crate::entanglement::{
    distribution, entanglement_entropy, entropy_lower_bound, ree, ree_bipartite,
    relative_entropy, Cut, DistributionOptions, ReeOptions,
};
use crate::error::Result;
use crate::linalg::{C64, Qubit};
use crate::states::{make_state, DensityMatrix, Family, StateSpec};

use super::{benchmark_specs, initial_state};

/// Times, in units of `gamma0 t`, at which propagators and integrator are compared.
const EQUIVALENCE_TIMES: [f64; 4] = [0.1, 0.5, 1.0, 2.0];
const EQUIVALENCE_TOL: f64 = 1e-6;
const PURE_REE_TOL: f64 = 1e-3;
const BOUND_SLACK: f64 = 1e-6;
const DFS_TOL: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct ValidationOptions {
    /// Solver seeds; the suite runs once per seed and the outcomes must agree.
    pub seeds: Vec<u64>,
    pub ree: ReeOptions,
    /// Relative perturbation of the propagator exponent, for checking that
    /// the equivalence test can fail.
    pub propagator_mutation: Option<f64>,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        let base = ReeOptions::default().seed;
        Self {
            seeds: (0..5).map(|k| base + k).collect(),
            ree: ReeOptions::default(),
            propagator_mutation: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Worst observed value of the checked quantity.
    pub metric: f64,
    pub threshold: f64,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub outcomes: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub passed: bool,
    /// Results for the first seed.
    pub checks: Vec<CheckResult>,
    pub seed_audit: Vec<SeedOutcome>,
    /// Whether every seed produced the same pass/fail pattern.
    pub seeds_consistent: bool,
}

impl ValidationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serialisable")
    }
}

pub fn run_validation(opts: &ValidationOptions) -> Result<ValidationReport> {
    let bath = BathParams::reference();
    let equivalence = propagator_vs_integrator(&bath, opts.propagator_mutation)?;

    let seeds = if opts.seeds.is_empty() {
        vec![opts.ree.seed]
    } else {
        opts.seeds.clone()
    };
    let mut first: Option<Vec<CheckResult>> = None;
    let mut audit = Vec::new();
    for &seed in &seeds {
        let ree_opts = ReeOptions { seed, ..opts.ree };
        let mut checks = vec![equivalence.clone()];
        checks.push(pure_state_ree(&ree_opts)?);
        checks.push(entropy_bounds(&bath, &ree_opts)?);
        checks.push(decoherence_free_subspace(&bath, &ree_opts)?);
        audit.push(SeedOutcome {
            seed,
            outcomes: checks.iter().map(|c| c.passed).collect(),
        });
        first.get_or_insert(checks);
    }
    let checks = first.expect("at least one seed");
    let seeds_consistent = audit.windows(2).all(|w| w[0].outcomes == w[1].outcomes);
    Ok(ValidationReport {
        passed: seeds_consistent && audit.iter().all(|s| s.outcomes.iter().all(|&p| p)),
        checks,
        seed_audit: audit,
        seeds_consistent,
    })
}

fn check(name: &str, metric: f64, threshold: f64, detail: String) -> CheckResult {
    CheckResult {
        name: name.into(),
        passed: metric <= threshold,
        metric,
        threshold,
        detail,
    }
}

fn propagator_vs_integrator(bath: &BathParams, mutation: Option<f64>) -> Result<CheckResult> {
    let g0 = markov_rate(bath);
    let samples: Vec<f64> = EQUIVALENCE_TIMES.iter().map(|x| x / g0).collect();
    let states: Vec<DensityMatrix> = benchmark_specs()
        .iter()
        .map(make_state)
        .collect::<Result<_>>()?;
    let scale = 1.0 + mutation.unwrap_or(0.0);
    let mut worst = 0.0f64;
    let mut where_ = String::new();
    for env in Environment::ALL {
        let integ = Integrator::new(env, bath, samples[samples.len() - 1], 1e-3 / g0)?;
        for (rho, spec) in states.iter().zip(benchmark_specs()) {
            let traj = integ.trajectory(rho, &samples)?;
            for ((&t, got), gt) in samples.iter().zip(&traj).zip(EQUIVALENCE_TIMES) {
                let c = DecayCoefficients::at(env, bath, t)?;
                let c = DecayCoefficients {
                    dephasing: c.dephasing * scale,
                    phase: c.phase * scale,
                };
                let exact = PropagatorTable::from_coefficients(env, c).apply(rho)?;
                let err = got.matrix().max_abs_diff(exact.matrix());
                if err > worst {
                    worst = err;
                    where_ = format!("{} {env} gamma0_t={gt}", spec.label());
                }
            }
        }
    }
    Ok(check(
        "propagator_vs_integrator",
        worst,
        EQUIVALENCE_TOL,
        format!("max elementwise difference at {where_}"),
    ))
}

fn pure_state_ree(opts: &ReeOptions) -> Result<CheckResult> {
    let mut worst = 0.0f64;
    let mut where_ = String::new();
    let mut record = |err: f64, label: String| {
        if err > worst {
            worst = err;
            where_ = label;
        }
    };
    for fam in [Family::Ghz, Family::W, Family::WWbar, Family::Star] {
        let rho = initial_state(&StateSpec::pure(fam), Qubit::C)?;
        let e = ree(&rho, Cut::ABc, opts)?.value;
        record((e - entanglement_entropy(&rho, Cut::ABc)?).abs(), fam.to_string());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for k in 0..6 {
        let (dl, dr) = if k % 2 == 0 { (2, 2) } else { (2, 4) };
        let psi: Vec<C64> = (0..dl * dr)
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let psi: Vec<C64> = psi.into_iter().map(|z| z / norm).collect();
        let rho = DensityMatrix::from_pure(&psi)?;
        let cut = if dr == 4 { Cut::ABc } else { Cut::AB };
        let e = ree_bipartite(&rho, dl, dr, opts)?.value;
        record(
            (e - entanglement_entropy(&rho, cut)?).abs(),
            format!("random {dl}x{dr} #{k}"),
        );
    }
    Ok(check(
        "pure_state_ree",
        worst,
        PURE_REE_TOL,
        format!("largest |REE - entropy| for {where_}"),
    ))
}

fn entropy_bounds(bath: &BathParams, opts: &ReeOptions) -> Result<CheckResult> {
    let g0 = markov_rate(bath);
    let mut worst = f64::NEG_INFINITY;
    let mut where_ = String::new();
    for spec in benchmark_specs() {
        let rho0 = make_state(&spec)?;
        for env in [Environment::LOCAL_MARKOV, Environment::COMMON_NON_MARKOV] {
            for gt in [0.0, 0.3] {
                let c = DecayCoefficients::at(env, bath, gt / g0)?;
                let rho = PropagatorTable::from_coefficients(env, c).apply(&rho0)?;
                for cut in [Cut::ABc, Cut::AB, Cut::AC] {
                    let state = cut.prepare(&rho)?;
                    let (dl, dr) = cut.dims();
                    let r = ree(&state, cut, opts)?;
                    let lower = entropy_lower_bound(&state, dl, dr)? - BOUND_SLACK;
                    let diag = DensityMatrix::new(state.matrix().diagonal_part())?;
                    let upper = relative_entropy(&state, &diag)? + 1e-9;
                    // positive when a bound is violated
                    let violation = (lower - r.value)
                        .max(r.value - upper)
                        .max(if r.converged { r.gap - opts.gap_tol } else { f64::NEG_INFINITY });
                    if violation > worst {
                        worst = violation;
                        where_ = format!("{} {env} gamma0_t={gt} {cut}", spec.label());
                    }
                }
            }
        }
    }
    Ok(check(
        "entropy_bounds",
        worst.max(0.0),
        0.0,
        format!("tightest case {where_}"),
    ))
}

fn decoherence_free_subspace(bath: &BathParams, opts: &ReeOptions) -> Result<CheckResult> {
    let g0 = markov_rate(bath);
    let dist_opts = DistributionOptions {
        ree: *opts,
        include_bc: false,
    };
    let mut specs = vec![StateSpec::pure(Family::W)];
    specs.extend([0.1, 0.5, 0.9].map(|p| StateSpec::mixed(Family::WernerW, p)));
    let mut worst = 0.0f64;
    let mut where_ = String::new();
    for spec in specs {
        let rho0 = make_state(&spec)?;
        for env in Environment::ALL.into_iter().filter(|e| e.topology == Topology::Common) {
            let mut values = Vec::new();
            for gt in [0.0, 0.5, 1.0, 2.0] {
                let c = DecayCoefficients::at(env, bath, gt / g0)?;
                let rho = PropagatorTable::from_coefficients(env, c).apply(&rho0)?;
                values.push(distribution(&rho, &dist_opts)?.d);
            }
            let spread = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - values.iter().cloned().fold(f64::INFINITY, f64::min);
            if spread > worst {
                worst = spread;
                where_ = format!("{} {env}", spec.label());
            }
        }
    }
    Ok(check(
        "decoherence_free_subspace",
        worst,
        DFS_TOL,
        format!("largest spread of D for {where_}"),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mutation_is_caught() {
        let bath = BathParams::reference();
        assert!(propagator_vs_integrator(&bath, None).unwrap().passed);
        assert!(!propagator_vs_integrator(&bath, Some(1e-3)).unwrap().passed);
    }
}
