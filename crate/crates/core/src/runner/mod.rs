//! Config-driven sweeps over states, environments and time grids, with CSV
//! and SVG output and a self-check suite.

mod config;
mod svg;
mod table;
mod validate;

use std::path::PathBuf;

use rayon::prelude::*;

pub use config::{
    load_config, parse_config, Grid, GridSpec, OutputSpec, ParsedConfig, SweepConfig,
    CSV_COLUMNS, DEFAULT_MIXING, OUTPUT_DIR_ENV,
};
pub use svg::{render_svg, write_svg};
pub use table::{read_csv, write_csv, write_csv_to};
pub use validate::{run_validation, CheckResult, ValidationOptions, ValidationReport};

use crate::bath::{markov_rate, ProfileCache};
use crate::dynamics::{DecayCoefficients, Environment, Memory, PropagatorTable};
use crate::entanglement::distribution;
use crate::error::Result;
use crate::linalg::Qubit;
use crate::states::{make_state, star_with_center, DensityMatrix, Family, StateSpec};

/// One (state, environment, time) point of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub state: Family,
    /// Mixing parameter, absent for pure families.
    pub p: Option<f64>,
    pub environment: Environment,
    pub gamma0_t: f64,
    pub e_abc: f64,
    pub e_ab: f64,
    pub e_ac: f64,
    pub e_bc: Option<f64>,
    pub d: f64,
    pub signed_d: f64,
    pub gap_abc: f64,
    pub gap_ab: f64,
    pub gap_ac: f64,
    pub converged: bool,
}

impl SweepRow {
    pub fn spec(&self) -> StateSpec {
        match self.p {
            Some(p) => StateSpec::mixed(self.state, p),
            None => StateSpec::pure(self.state),
        }
    }

    pub fn label(&self) -> String {
        self.spec().label()
    }
}

/// The seven states used by the self-checks: the four pure families and
/// each mixed family at `p = 0.5`.
pub fn benchmark_specs() -> Vec<StateSpec> {
    vec![
        StateSpec::pure(Family::Ghz),
        StateSpec::pure(Family::W),
        StateSpec::pure(Family::WWbar),
        StateSpec::pure(Family::Star),
        StateSpec::mixed(Family::WernerGhz, 0.5),
        StateSpec::mixed(Family::WernerW, 0.5),
        StateSpec::mixed(Family::GhzWMix, 0.5),
    ]
}

/// Initial state of a sweep entry, honouring the configured Star centre.
pub fn initial_state(spec: &StateSpec, star_center: Qubit) -> Result<DensityMatrix> {
    match spec.family {
        Family::Star => star_with_center(star_center),
        _ => make_state(spec),
    }
}

pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    run_sweep_with_cache(cfg, &ProfileCache::new())
}

/// [`run_sweep`] reusing decoherence profiles across calls.
pub fn run_sweep_with_cache(cfg: &SweepConfig, cache: &ProfileCache) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let g0 = markov_rate(&cfg.bath);
    let initial: Vec<DensityMatrix> = cfg
        .states
        .iter()
        .map(|s| initial_state(s, cfg.star_center))
        .collect::<Result<_>>()?;

    struct Item {
        state: usize,
        env: Environment,
        gamma0_t: f64,
        coeffs: DecayCoefficients,
    }

    let mut items = Vec::new();
    for env in &cfg.environments {
        let grid = cfg.grid.for_memory(env.memory).points();
        let times: Vec<f64> = grid.iter().map(|g| g / g0).collect();
        let profile = match env.memory {
            Memory::NonMarkov => Some(cache.get(&cfg.bath, &times)?),
            Memory::Markov => None,
        };
        let coeffs: Vec<DecayCoefficients> = times
            .iter()
            .map(|&t| match &profile {
                Some(p) => DecayCoefficients::from_profile(*env, &cfg.bath, p, t),
                None => DecayCoefficients::at(*env, &cfg.bath, t),
            })
            .collect::<Result<_>>()?;
        for state in 0..cfg.states.len() {
            for (&gamma0_t, &c) in grid.iter().zip(&coeffs) {
                items.push(Item {
                    state,
                    env: *env,
                    gamma0_t,
                    coeffs: c,
                });
            }
        }
    }

    let mut rows: Vec<(usize, SweepRow)> = items
        .par_iter()
        .map(|it| {
            let rho = PropagatorTable::from_coefficients(it.env, it.coeffs).apply(&initial[it.state])?;
            let dist = distribution(&rho, &cfg.solver)?;
            let spec = cfg.states[it.state];
            let converged = dist.converged() && dist.e_bc.as_ref().map_or(true, |r| r.converged);
            Ok((
                it.state,
                SweepRow {
                    state: spec.family,
                    p: spec.family.is_mixed().then_some(spec.p),
                    environment: it.env,
                    gamma0_t: it.gamma0_t,
                    e_abc: dist.e_abc.value,
                    e_ab: dist.e_ab.value,
                    e_ac: dist.e_ac.value,
                    e_bc: dist.e_bc.as_ref().map(|r| r.value),
                    d: dist.d,
                    signed_d: dist.signed_d,
                    gap_abc: dist.e_abc.gap,
                    gap_ab: dist.e_ab.gap,
                    gap_ac: dist.e_ac.gap,
                    converged,
                },
            ))
        })
        .collect::<Result<_>>()?;
    rows.sort_by(|(sa, a), (sb, b)| {
        sa.cmp(sb)
            .then(a.environment.rank().cmp(&b.environment.rank()))
            .then(a.gamma0_t.total_cmp(&b.gamma0_t))
    });
    Ok(rows.into_iter().map(|(_, r)| r).collect())
}

/// Files written by [`execute`].
#[derive(Clone, Debug)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub csv: PathBuf,
    pub svg: Option<PathBuf>,
}

/// Runs a sweep and writes its CSV (and SVG, if configured). Output paths
/// are checked for writability before any work is done.
pub fn execute(cfg: &SweepConfig) -> Result<SweepOutput> {
    let out = cfg.output.resolved();
    let csv_file = std::fs::File::create(&out.csv).map_err(|e| {
        crate::Error::Io(format!("cannot write {}: {e}", out.csv.display()))
    })?;
    if let Some(svg) = &out.svg {
        std::fs::File::create(svg)
            .map_err(|e| crate::Error::Io(format!("cannot write {}: {e}", svg.display())))?;
    }
    let rows = run_sweep(cfg)?;
    write_csv_to(csv_file, &rows, &out.columns)?;
    if let Some(svg) = &out.svg {
        write_svg(svg, &rows)?;
    }
    Ok(SweepOutput {
        rows,
        csv: out.csv,
        svg: out.svg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(states: Vec<StateSpec>, envs: Vec<Environment>, points: usize) -> SweepConfig {
        SweepConfig {
            states,
            environments: envs,
            grid: GridSpec::uniform(Grid::new(1.0, points).unwrap()),
            ..SweepConfig::default()
        }
    }

    #[test]
    fn rows_cover_grid_in_order() {
        let cfg = small_config(
            vec![StateSpec::pure(Family::W), StateSpec::pure(Family::Ghz)],
            vec![Environment::COMMON_MARKOV, Environment::LOCAL_MARKOV],
            5,
        );
        let rows = run_sweep(&cfg).unwrap();
        assert_eq!(rows.len(), 20);
        assert_eq!(rows[0].state, Family::W);
        assert_eq!(rows[0].environment, Environment::LOCAL_MARKOV);
        assert_eq!(rows[5].environment, Environment::COMMON_MARKOV);
        assert_eq!(rows[10].state, Family::Ghz);
        let grid = Grid::new(1.0, 5).unwrap().points();
        for (k, row) in rows[..5].iter().enumerate() {
            assert_eq!(row.gamma0_t, grid[k]);
            assert_eq!(row.d, (row.e_abc - row.e_ab - row.e_ac).abs());
            assert!(row.p.is_none());
        }
        // W is untouched by a common Markov bath
        for row in &rows[5..10] {
            assert!((row.d - rows[5].d).abs() <= 1e-9);
        }
    }

    #[test]
    fn non_markov_rows_use_profiles() {
        let cfg = small_config(
            vec![StateSpec::pure(Family::Ghz)],
            vec![Environment::LOCAL_NON_MARKOV],
            3,
        );
        let cache = ProfileCache::new();
        let rows = run_sweep_with_cache(&cfg, &cache).unwrap();
        assert_eq!(cache.len(), 1);
        assert_eq!(rows.len(), 3);
        assert!(rows[2].d < rows[0].d);
        run_sweep_with_cache(&cfg, &cache).unwrap();
        assert_eq!(cache.len(), 1);
    }

    #[test]
    fn star_center_is_configurable() {
        let spec = StateSpec::pure(Family::Star);
        let c = initial_state(&spec, Qubit::C).unwrap();
        assert_eq!(c, make_state(&spec).unwrap());
        let a = initial_state(&spec, Qubit::A).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn execute_writes_outputs_and_rejects_bad_paths() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small_config(
            vec![StateSpec::mixed(Family::WernerGhz, 0.5)],
            vec![Environment::LOCAL_MARKOV],
            3,
        );
        cfg.output.csv = dir.path().join("s.csv");
        cfg.output.svg = Some(dir.path().join("s.svg"));
        let out = execute(&cfg).unwrap();
        let back = read_csv(&out.csv).unwrap();
        assert_eq!(back, out.rows);
        assert_eq!(back[0].p, Some(0.5));
        assert!(std::fs::read_to_string(out.svg.unwrap()).unwrap().starts_with("<?xml"));

        cfg.output.csv = dir.path().join("missing").join("s.csv");
        assert!(matches!(execute(&cfg), Err(crate::Error::Io(_))));
    }
}
