//! Sweep configuration files.
//!
//! The format is line based: `[section]` headers, `key = value` pairs,
//! `#` or `;` comments, comma-separated lists. Unknown sections and keys
//! produce warnings rather than errors.
//!
//! ```text
//! [bath]
//! eta = 0.1
//! lambda = 0.01
//! kt = 0.0795774715459477
//!
//! [grid]
//! markov_t_max = 2
//! nonmarkov_t_max = 10
//! points = 50
//!
//! [states]
//! families = GHZ, W, WWbar, Star
//! p = 0.1, 0.5, 0.9
//! star_center = C
//!
//! [environments]
//! list = local/markov, common/markov, local/nonmarkov, common/nonmarkov
//!
//! [solver]
//! seed = 7
//!
//! [output]
//! csv = pure.csv
//! svg = pure.svg
//! ```

use std::path::{Path, PathBuf};

use crate::bath::BathParams;
use crate::dynamics::{Environment, Memory};
use crate::entanglement::{DistributionOptions, LogBase};
use crate::error::{Error, Result};
use crate::linalg::Qubit;
use crate::states::{Family, StateSpec};

/// Setting this redirects every output file into the named directory.
pub const OUTPUT_DIR_ENV: &str = "ENTDIST_OUTPUT_DIR";

/// The CSV schema, in emission order.
pub const CSV_COLUMNS: [&str; 15] = [
    "state",
    "p",
    "bath_topology",
    "memory",
    "gamma0_t",
    "e_abc",
    "e_ab",
    "e_ac",
    "e_bc",
    "d",
    "signed_d",
    "gap_abc",
    "gap_ab",
    "gap_ac",
    "converged",
];

/// Uniform grid `0, h, ..., t_max` in units of `gamma0 t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub t_max: f64,
    pub n_points: usize,
}

impl Grid {
    pub fn new(t_max: f64, n_points: usize) -> Result<Self> {
        if !(t_max > 0.0 && t_max.is_finite()) {
            return Err(config_err(0, format!("grid t_max must be positive, got {t_max}")));
        }
        if n_points < 2 {
            return Err(config_err(0, format!("grid needs at least 2 points, got {n_points}")));
        }
        Ok(Self { t_max, n_points })
    }

    pub fn points(&self) -> Vec<f64> {
        let last = (self.n_points - 1) as f64;
        (0..self.n_points)
            .map(|k| self.t_max * k as f64 / last)
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub markov: Grid,
    pub non_markov: Grid,
}

impl GridSpec {
    pub fn for_memory(&self, memory: Memory) -> Grid {
        match memory {
            Memory::Markov => self.markov,
            Memory::NonMarkov => self.non_markov,
        }
    }

    /// One grid for every environment.
    pub fn uniform(grid: Grid) -> Self {
        Self {
            markov: grid,
            non_markov: grid,
        }
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            markov: Grid {
                t_max: 2.0,
                n_points: 50,
            },
            non_markov: Grid {
                t_max: 10.0,
                n_points: 50,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputSpec {
    pub csv: PathBuf,
    pub svg: Option<PathBuf>,
    /// Subset of [`CSV_COLUMNS`]; emitted in schema order.
    pub columns: Vec<String>,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            csv: PathBuf::from("sweep.csv"),
            svg: None,
            columns: CSV_COLUMNS.iter().map(|c| c.to_string()).collect(),
        }
    }
}

impl OutputSpec {
    /// Applies [`OUTPUT_DIR_ENV`] when it is set.
    pub fn resolved(&self) -> Self {
        match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(dir) => self.relocated(Path::new(&dir)),
            None => self.clone(),
        }
    }

    /// Same file names, placed in `dir`.
    pub fn relocated(&self, dir: &Path) -> Self {
        let move_to = |p: &Path| dir.join(p.file_name().unwrap_or(p.as_os_str()));
        Self {
            csv: move_to(&self.csv),
            svg: self.svg.as_deref().map(move_to),
            columns: self.columns.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub states: Vec<StateSpec>,
    pub environments: Vec<Environment>,
    pub bath: BathParams,
    pub grid: GridSpec,
    pub solver: DistributionOptions,
    pub star_center: Qubit,
    pub output: OutputSpec,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            states: Vec::new(),
            environments: Environment::ALL.to_vec(),
            bath: BathParams::reference(),
            grid: GridSpec::default(),
            solver: DistributionOptions::default(),
            star_center: Qubit::C,
            output: OutputSpec::default(),
        }
    }
}

/// Mixing parameters used when a config names a mixed family without `p`.
pub const DEFAULT_MIXING: [f64; 3] = [0.1, 0.5, 0.9];

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.states.is_empty() {
            return Err(config_err(0, "no states selected".into()));
        }
        if self.environments.is_empty() {
            return Err(config_err(0, "no environments selected".into()));
        }
        self.bath.validate()?;
        Grid::new(self.grid.markov.t_max, self.grid.markov.n_points)?;
        Grid::new(self.grid.non_markov.t_max, self.grid.non_markov.n_points)?;
        for s in &self.states {
            if !(0.0..=1.0).contains(&s.p) {
                return Err(Error::InvalidProbability(s.p));
            }
        }
        for c in &self.output.columns {
            if !CSV_COLUMNS.contains(&c.as_str()) {
                return Err(config_err(0, format!("unknown output column '{c}'")));
            }
        }
        Ok(())
    }
}

/// A parsed config plus the warnings raised while reading it.
#[derive(Clone, Debug)]
pub struct ParsedConfig {
    pub config: SweepConfig,
    pub warnings: Vec<String>,
}

pub fn load_config(path: &Path) -> Result<ParsedConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_err(0, format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<ParsedConfig> {
    let mut cfg = SweepConfig::default();
    let mut warnings = Vec::new();
    let mut section = String::new();
    let mut families: Vec<Family> = Vec::new();
    let mut mixing: Option<Vec<f64>> = None;
    let mut points: Option<usize> = None;
    let mut t_max: Option<f64> = None;
    let mut markov = cfg.grid.markov;
    let mut non_markov = cfg.grid.non_markov;
    let (mut saw_markov_points, mut saw_nonmarkov_points) = (false, false);
    let (mut saw_markov_tmax, mut saw_nonmarkov_tmax) = (false, false);

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| config_err(line_no, format!("malformed section header '{line}'")))?;
            section = name.trim().to_ascii_lowercase();
            if !["bath", "grid", "states", "environments", "solver", "output"]
                .contains(&section.as_str())
            {
                warnings.push(format!("line {line_no}: unknown section [{section}]"));
            }
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| config_err(line_no, format!("expected 'key = value', got '{line}'")))?;
        let key = key.trim().to_ascii_lowercase();
        let value = value.trim();
        let num = || parse_f64(value, line_no);
        let int = || parse_usize(value, line_no);

        match (section.as_str(), key.as_str()) {
            ("bath", "eta") => cfg.bath.eta = num()?,
            ("bath", "lambda") | ("bath", "cutoff") => cfg.bath.lambda = num()?,
            ("bath", "kt") => cfg.bath.kt = num()?,
            ("bath", "omega0") => cfg.bath.omega0 = num()?,

            ("grid", "t_max") => t_max = Some(num()?),
            ("grid", "points") | ("grid", "n_points") => points = Some(int()?),
            ("grid", "markov_t_max") => {
                markov.t_max = num()?;
                saw_markov_tmax = true;
            }
            ("grid", "nonmarkov_t_max") => {
                non_markov.t_max = num()?;
                saw_nonmarkov_tmax = true;
            }
            ("grid", "markov_points") => {
                markov.n_points = int()?;
                saw_markov_points = true;
            }
            ("grid", "nonmarkov_points") => {
                non_markov.n_points = int()?;
                saw_nonmarkov_points = true;
            }

            ("states", "families") | ("states", "family") => {
                families = split_list(value)
                    .map(|s| s.parse::<Family>().map_err(|e| relocate(e, line_no)))
                    .collect::<Result<_>>()?;
            }
            ("states", "p") => {
                mixing = Some(
                    split_list(value)
                        .map(|s| parse_f64(s, line_no))
                        .collect::<Result<_>>()?,
                );
            }
            ("states", "star_center") => cfg.star_center = parse_qubit(value, line_no)?,

            ("environments", "list") | ("environments", "environments") => {
                cfg.environments = split_list(value)
                    .map(|s| s.parse::<Environment>().map_err(|e| relocate(e, line_no)))
                    .collect::<Result<_>>()?;
            }

            ("solver", "seed") => {
                cfg.solver.ree.seed = value
                    .parse()
                    .map_err(|_| config_err(line_no, format!("seed must be a u64, got '{value}'")))?
            }
            ("solver", "restarts") => cfg.solver.ree.restarts = int()?,
            ("solver", "gap_tol") | ("solver", "tol") => cfg.solver.ree.gap_tol = num()?,
            ("solver", "max_iter") => cfg.solver.ree.max_iter = int()?,
            ("solver", "regularization") => cfg.solver.ree.regularization = num()?,
            ("solver", "units") => {
                cfg.solver.ree.units = match value.to_ascii_lowercase().as_str() {
                    "bits" => LogBase::Bits,
                    "nats" => LogBase::Nats,
                    other => return Err(config_err(line_no, format!("unknown units '{other}'"))),
                }
            }
            ("solver", "include_bc") => cfg.solver.include_bc = parse_bool(value, line_no)?,
            ("solver", "ppt_shortcut") => cfg.solver.ree.ppt_shortcut = parse_bool(value, line_no)?,

            ("output", "csv") => cfg.output.csv = PathBuf::from(value),
            ("output", "svg") => {
                cfg.output.svg = if value.is_empty() {
                    None
                } else {
                    Some(PathBuf::from(value))
                }
            }
            ("output", "columns") => {
                cfg.output.columns = split_list(value).map(str::to_string).collect();
            }

            (sec, k) => warnings.push(format!("line {line_no}: unknown key '{k}' in [{sec}]")),
        }
    }

    if let Some(t) = t_max {
        if !saw_markov_tmax {
            markov.t_max = t;
        }
        if !saw_nonmarkov_tmax {
            non_markov.t_max = t;
        }
    }
    if let Some(n) = points {
        if !saw_markov_points {
            markov.n_points = n;
        }
        if !saw_nonmarkov_points {
            non_markov.n_points = n;
        }
    }
    cfg.grid = GridSpec { markov, non_markov };

    let mixing = mixing.unwrap_or_else(|| DEFAULT_MIXING.to_vec());
    for fam in families {
        if fam.is_mixed() {
            cfg.states
                .extend(mixing.iter().map(|&p| StateSpec::mixed(fam, p)));
        } else {
            cfg.states.push(StateSpec::pure(fam));
        }
    }
    cfg.validate()?;
    Ok(ParsedConfig {
        config: cfg,
        warnings,
    })
}

fn config_err(line: usize, message: String) -> Error {
    Error::Config { line, message }
}

fn relocate(e: Error, line: usize) -> Error {
    match e {
        Error::Config { message, .. } => Error::Config { line, message },
        other => other,
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find(['#', ';']) {
        Some(i) => &line[..i],
        None => line,
    }
}

fn split_list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn parse_f64(value: &str, line: usize) -> Result<f64> {
    value
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| config_err(line, format!("expected a number, got '{value}'")))
}

fn parse_usize(value: &str, line: usize) -> Result<usize> {
    value
        .trim()
        .parse()
        .map_err(|_| config_err(line, format!("expected a non-negative integer, got '{value}'")))
}

fn parse_bool(value: &str, line: usize) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(config_err(line, format!("expected true or false, got '{value}'"))),
    }
}

fn parse_qubit(value: &str, line: usize) -> Result<Qubit> {
    match value.trim().to_ascii_uppercase().as_str() {
        "A" => Ok(Qubit::A),
        "B" => Ok(Qubit::B),
        "C" => Ok(Qubit::C),
        _ => Err(config_err(line, format!("qubit must be A, B or C, got '{value}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "
# comment
[bath]
eta = 0.2
kt = 0.5 ; trailing comment

[grid]
t_max = 3
points = 11
nonmarkov_t_max = 6

[states]
families = GHZ, werner-ghz
p = 0.25, 0.75
star_center = a

[environments]
list = local/markov, common/non-markov

[solver]
seed = 42
include_bc = yes
frobnicate = 3

[output]
csv = out/a.csv
svg = out/a.svg
";

    #[test]
    fn parses_sample() {
        let parsed = parse_config(SAMPLE).unwrap();
        let c = &parsed.config;
        assert_eq!(c.bath.eta, 0.2);
        assert_eq!(c.bath.kt, 0.5);
        assert_eq!(c.bath.lambda, BathParams::reference().lambda);
        assert_eq!(c.grid.markov, Grid { t_max: 3.0, n_points: 11 });
        assert_eq!(c.grid.non_markov, Grid { t_max: 6.0, n_points: 11 });
        assert_eq!(
            c.states,
            vec![
                StateSpec::pure(Family::Ghz),
                StateSpec::mixed(Family::WernerGhz, 0.25),
                StateSpec::mixed(Family::WernerGhz, 0.75),
            ]
        );
        assert_eq!(c.star_center, Qubit::A);
        assert_eq!(
            c.environments,
            vec![Environment::LOCAL_MARKOV, Environment::COMMON_NON_MARKOV]
        );
        assert_eq!(c.solver.ree.seed, 42);
        assert!(c.solver.include_bc);
        assert_eq!(c.output.svg.as_deref(), Some(Path::new("out/a.svg")));
        assert_eq!(parsed.warnings.len(), 1);
        assert!(parsed.warnings[0].contains("frobnicate"));
    }

    #[test]
    fn defaults() {
        let c = parse_config("[states]\nfamilies = GHZWMix, W").unwrap().config;
        assert_eq!(c.states.len(), 4);
        assert_eq!(c.states[0].p, 0.1);
        assert_eq!(c.states[2].p, 0.9);
        assert_eq!(c.environments, Environment::ALL.to_vec());
        assert_eq!(c.grid, GridSpec::default());
        assert_eq!(c.output.columns.len(), CSV_COLUMNS.len());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse_config("[states]\nfamilies = GHZ\n[grid]\npoints = x\n").unwrap_err();
        assert_eq!(e, config_err(4, "expected a non-negative integer, got 'x'".into()));
        let e = parse_config("[states]\nfamilies = GHZ, Nope\n").unwrap_err();
        assert!(matches!(e, Error::Config { line: 2, .. }));
        assert!(parse_config("[states]\nfamilies = GHZ\n[grid]\npoints = 1\n").is_err());
        assert!(parse_config("[grid]\npoints = 5\n").is_err());
        assert!(parse_config("[states]\nfamilies = GHZ\nno equals sign\n").is_err());
    }

    #[test]
    fn grid_points_are_exact_multiples() {
        let g = Grid::new(2.0, 50).unwrap().points();
        assert_eq!(g.len(), 50);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[49], 2.0);
        assert!((g[10] - 20.0 / 49.0).abs() < 1e-15);
    }

    #[test]
    fn relocation_keeps_file_names() {
        let out = OutputSpec {
            csv: "a/b/c.csv".into(),
            svg: Some("d.svg".into()),
            ..OutputSpec::default()
        };
        let moved = out.relocated(Path::new("/tmp/x"));
        assert_eq!(moved.csv, PathBuf::from("/tmp/x/c.csv"));
        assert_eq!(moved.svg, Some(PathBuf::from("/tmp/x/d.svg")));
    }
}
