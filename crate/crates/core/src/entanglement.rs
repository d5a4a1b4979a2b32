//! Relative entropy, relative entropy of entanglement and the tripartite
//! distribution `D = |E_A:BC - E_A:B - E_A:C|`.
//!
//! The REE across a bipartition is `min S(rho || sigma)` over separable
//! `sigma`. It is computed by a conditional-gradient method over the convex
//! hull of pure product states, alternated with local descent on the atoms.
//! Each outer iteration:
//!
//! 1. eigendecompose the (slightly regularised) iterate `sigma`;
//! 2. build `T = D log(sigma)[rho]`, the Fréchet derivative of the log
//!    applied to `rho`, through divided differences in the eigenbasis; the
//!    objective gradient is `-T`;
//! 3. find the product vector maximising `<a (x) b| T |a (x) b>` by
//!    alternating top-eigenvector updates from several seeded starts;
//! 4. step towards that atom with an exact line search, then jointly move
//!    all weights and vectors with L-BFGS.
//!
//! The duality gap `max <x|T|x> - Tr(T sigma)` bounds the distance of the
//! objective from its minimum, as does the objective itself since the
//! minimum is non-negative. The returned value is an upper bound certified
//! to within the smaller of the two.

use std::f64::consts::LN_2;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    jacobi_eigh, kron_vec, partial_transpose, trace_left, trace_right, ComplexMatrix, Qubit, C64,
};
use crate::states::{purity, DensityMatrix};

/// Eigenvalues of `sigma` at or below this are outside its support.
const SUPPORT_EPS: f64 = 1e-15;
/// Largest weight of `rho` tolerated outside the support of `sigma`.
const SUPPORT_LEAK: f64 = 1e-9;
/// Partial-transpose eigenvalue floor for the two-qubit separability test.
const PPT_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Cut {
    /// Qubit A against the block BC.
    #[serde(rename = "A_BC")]
    ABc,
    /// Qubits A and B after tracing out C.
    #[serde(rename = "A_B")]
    AB,
    /// Qubits A and C after tracing out B.
    #[serde(rename = "A_C")]
    AC,
    /// Qubits B and C after tracing out A.
    #[serde(rename = "B_C")]
    BC,
}

impl Cut {
    pub fn label(self) -> &'static str {
        match self {
            Cut::ABc => "A_BC",
            Cut::AB => "A_B",
            Cut::AC => "A_C",
            Cut::BC => "B_C",
        }
    }

    /// Left and right factor dimensions.
    pub fn dims(self) -> (usize, usize) {
        match self {
            Cut::ABc => (2, 4),
            _ => (2, 2),
        }
    }

    /// Qubits kept before the cut is applied, or `None` for the full register.
    pub fn kept_qubits(self) -> Option<[Qubit; 2]> {
        match self {
            Cut::ABc => None,
            Cut::AB => Some([Qubit::A, Qubit::B]),
            Cut::AC => Some([Qubit::A, Qubit::C]),
            Cut::BC => Some([Qubit::B, Qubit::C]),
        }
    }

    /// The state the cut acts on: `rho` itself for `A_BC`, the reduced pair
    /// otherwise. Accepts already reduced 4x4 input for pair cuts.
    pub fn prepare(self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        let (dl, dr) = self.dims();
        match (self.kept_qubits(), rho.dim()) {
            (_, d) if d == dl * dr => Ok(*rho),
            (Some(keep), 8) => rho.reduce(&keep),
            (_, d) => Err(Error::DimensionMismatch(format!(
                "cut {} needs a {}-dimensional state, got {d}",
                self.label(),
                dl * dr
            ))),
        }
    }
}

impl fmt::Display for Cut {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Cut {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_uppercase().replace([':', '-', '|'], "_");
        [Cut::ABc, Cut::AB, Cut::AC, Cut::BC]
            .into_iter()
            .find(|c| c.label() == key)
            .ok_or_else(|| Error::Config {
                line: 0,
                message: format!("unknown cut '{s}' (expected A_BC, A_B, A_C or B_C)"),
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogBase {
    Bits,
    Nats,
}

impl LogBase {
    fn from_nats(self, x: f64) -> f64 {
        match self {
            LogBase::Bits => x / LN_2,
            LogBase::Nats => x,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReeOptions {
    /// Random starts for each direction subproblem.
    pub restarts: usize,
    /// Duality-gap target, in bits.
    pub gap_tol: f64,
    pub max_iter: usize,
    /// Convergence of the alternating product-vector search.
    pub inner_tol: f64,
    /// Line-search tolerance on the step length.
    pub line_tol: f64,
    /// Weight of `I/d` mixed into `sigma` when forming the gradient.
    pub regularization: f64,
    pub seed: u64,
    pub units: LogBase,
    /// Return `0` immediately for PPT two-qubit states.
    pub ppt_shortcut: bool,
    /// Keep the objective after every iteration in [`ReeResult::history`].
    pub record_history: bool,
}

impl Default for ReeOptions {
    fn default() -> Self {
        Self {
            restarts: 20,
            gap_tol: 1e-6,
            max_iter: 500,
            inner_tol: 1e-10,
            line_tol: 1e-10,
            regularization: 1e-9,
            seed: 0x5eed,
            units: LogBase::Bits,
            ppt_shortcut: true,
            record_history: false,
        }
    }
}

/// One weighted pure product state `|left> (x) |right>`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductAtom {
    pub weight: f64,
    pub left: Vec<C64>,
    pub right: Vec<C64>,
}

impl ProductAtom {
    pub fn vector(&self) -> Vec<C64> {
        kron_vec(&self.left, &self.right)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReeMethod {
    FrankWolfe,
    /// Two-qubit state with positive partial transpose, hence separable.
    PptShortcut,
}

#[derive(Clone, Debug)]
pub struct ReeResult {
    /// `S(rho || sigma_star)` in the requested units, never negative.
    pub value: f64,
    pub sigma_star: DensityMatrix,
    /// Explicit separable decomposition of `sigma_star`; empty for
    /// [`ReeMethod::PptShortcut`], where `sigma_star = rho`.
    pub decomposition: Vec<ProductAtom>,
    /// Final Frank–Wolfe duality gap in the requested units.
    pub gap: f64,
    pub iterations: usize,
    /// Random starts spent in direction subproblems over the whole run.
    pub restarts_used: usize,
    pub converged: bool,
    pub method: ReeMethod,
    /// Objective in nats after each iteration, when requested.
    pub history: Vec<f64>,
}

/// `S(rho || sigma)` in nats, via eigendecompositions and `0 ln 0 = 0`.
pub fn relative_entropy_nats(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch("relative entropy of states of different size".into()));
    }
    let eig = jacobi_eigh(sigma.matrix());
    let mut cross = 0.0;
    let mut leak = 0.0;
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        let v = eig.vector(k);
        let w = rho.matrix().expectation(&v);
        if l <= SUPPORT_EPS {
            leak += w.max(0.0);
        } else {
            cross += w * l.ln();
        }
    }
    if leak > SUPPORT_LEAK {
        return Err(Error::SupportViolation { weight: leak });
    }
    Ok(-rho.entropy_nats() - cross)
}

/// `S(rho || sigma)` in bits.
pub fn relative_entropy(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    Ok(relative_entropy_nats(rho, sigma)? / LN_2)
}

/// Reduced-state entropy of a pure state across `cut`, in bits.
pub fn entanglement_entropy(rho_pure: &DensityMatrix, cut: Cut) -> Result<f64> {
    let (dl, dr) = cut.dims();
    if rho_pure.dim() != dl * dr {
        return Err(Error::DimensionMismatch(format!(
            "cut {cut} needs a {}-dimensional pure state",
            dl * dr
        )));
    }
    let pu = purity(rho_pure);
    if pu < 1.0 - 1e-10 {
        return Err(Error::MixedInput { purity: pu });
    }
    let left = trace_right(rho_pure.matrix(), dl, dr)?;
    Ok(DensityMatrix::new_unchecked(left).entropy_bits())
}

/// `max(S(rho_L), S(rho_R)) - S(rho)` in bits, a lower bound on the REE.
pub fn entropy_lower_bound(rho: &DensityMatrix, dl: usize, dr: usize) -> Result<f64> {
    let left = DensityMatrix::new_unchecked(trace_right(rho.matrix(), dl, dr)?);
    let right = DensityMatrix::new_unchecked(trace_left(rho.matrix(), dl, dr)?);
    Ok(left.entropy_bits().max(right.entropy_bits()) - rho.entropy_bits())
}

/// Whether a two-qubit state has a positive partial transpose.
pub fn is_ppt(rho: &DensityMatrix, dl: usize, dr: usize) -> Result<bool> {
    let pt = partial_transpose(rho.matrix(), 1, &[dl, dr])?;
    Ok(jacobi_eigh(&pt.hermitian_part()).eigenvalues[0] >= -PPT_TOL)
}

/// Relative entropy of entanglement of `rho` across `cut`.
pub fn ree(rho: &DensityMatrix, cut: Cut, opts: &ReeOptions) -> Result<ReeResult> {
    let state = cut.prepare(rho)?;
    let (dl, dr) = cut.dims();
    ree_bipartite(&state, dl, dr, opts)
}

/// Relative entropy of entanglement of a `dl x dr` bipartite state.
pub fn ree_bipartite(
    rho: &DensityMatrix,
    dl: usize,
    dr: usize,
    opts: &ReeOptions,
) -> Result<ReeResult> {
    if dl * dr != rho.dim() || dl < 2 || dr < 2 {
        return Err(Error::DimensionMismatch(format!(
            "{dl}x{dr} bipartition of a {}-dimensional state",
            rho.dim()
        )));
    }
    if opts.ppt_shortcut && dl == 2 && dr == 2 && is_ppt(rho, dl, dr)? {
        return Ok(ReeResult {
            value: 0.0,
            sigma_star: *rho,
            decomposition: Vec::new(),
            gap: 0.0,
            iterations: 0,
            restarts_used: 0,
            converged: true,
            method: ReeMethod::PptShortcut,
            history: Vec::new(),
        });
    }
    Solver::new(rho, dl, dr, opts).run()
}

#[derive(Clone, Debug)]
struct Atom {
    weight: f64,
    left: Vec<C64>,
    right: Vec<C64>,
    full: Vec<C64>,
}

impl Atom {
    fn new(weight: f64, left: Vec<C64>, right: Vec<C64>) -> Self {
        let full = kron_vec(&left, &right);
        Self {
            weight,
            left,
            right,
            full,
        }
    }
}

struct Solver<'a> {
    rho: ComplexMatrix,
    rho_entropy: f64,
    dl: usize,
    dr: usize,
    dim: usize,
    opts: &'a ReeOptions,
    rng: ChaCha8Rng,
    restarts_used: usize,
}

impl<'a> Solver<'a> {
    fn new(rho: &DensityMatrix, dl: usize, dr: usize, opts: &'a ReeOptions) -> Self {
        Self {
            rho: *rho.matrix(),
            rho_entropy: rho.entropy_nats(),
            dl,
            dr,
            dim: dl * dr,
            opts,
            rng: ChaCha8Rng::seed_from_u64(opts.seed),
            restarts_used: 0,
        }
    }

    fn regularized(&self, sigma: &ComplexMatrix) -> ComplexMatrix {
        let eps = self.opts.regularization;
        let mut m = sigma.scale(1.0 - eps);
        for i in 0..self.dim {
            m[(i, i)] += eps / self.dim as f64;
        }
        m
    }

    /// Regularised objective `S(rho || (1-eps) sigma + eps I/d)` in nats.
    fn objective(&self, sigma: &ComplexMatrix) -> f64 {
        let eig = jacobi_eigh(&self.regularized(sigma));
        let mut cross = 0.0;
        for (k, &l) in eig.eigenvalues.iter().enumerate() {
            let w = self.rho.expectation(&eig.vector(k));
            cross += w * l.max(f64::MIN_POSITIVE).ln();
        }
        -self.rho_entropy - cross
    }

    /// `T = D log(sigma_reg)[rho]`.
    fn gradient_operator(&self, sigma: &ComplexMatrix) -> ComplexMatrix {
        let eig = jacobi_eigh(&self.regularized(sigma));
        let rho_t = eig.to_eigenbasis(&self.rho);
        let l = &eig.eigenvalues;
        let t_eig = rho_t.hadamard_with(|i, j| C64::new(log_divided_difference(l[i], l[j]), 0.0));
        eig.from_eigenbasis(&t_eig).hermitian_part()
    }

    fn random_unit(&mut self, n: usize) -> Vec<C64> {
        loop {
            let v: Vec<C64> = (0..n)
                .map(|_| C64::new(self.rng.gen_range(-1.0..1.0), self.rng.gen_range(-1.0..1.0)))
                .collect();
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm > 1e-3 {
                return v.into_iter().map(|z| z / norm).collect();
            }
        }
    }

    /// `<left| T |left'>` contracted over the left factor with `left` fixed.
    fn contract_left(&self, t: &ComplexMatrix, left: &[C64]) -> ComplexMatrix {
        let (dl, dr) = (self.dl, self.dr);
        let mut out = ComplexMatrix::zeros_unchecked(dr);
        for b in 0..dr {
            for b2 in 0..dr {
                let mut acc = C64::new(0.0, 0.0);
                for a in 0..dl {
                    for a2 in 0..dl {
                        acc += left[a].conj() * t[(a * dr + b, a2 * dr + b2)] * left[a2];
                    }
                }
                out[(b, b2)] = acc;
            }
        }
        out.hermitian_part()
    }

    fn contract_right(&self, t: &ComplexMatrix, right: &[C64]) -> ComplexMatrix {
        let (dl, dr) = (self.dl, self.dr);
        let mut out = ComplexMatrix::zeros_unchecked(dl);
        for a in 0..dl {
            for a2 in 0..dl {
                let mut acc = C64::new(0.0, 0.0);
                for b in 0..dr {
                    for b2 in 0..dr {
                        acc += right[b].conj() * t[(a * dr + b, a2 * dr + b2)] * right[b2];
                    }
                }
                out[(a, a2)] = acc;
            }
        }
        out.hermitian_part()
    }

    /// Alternating maximisation of the product expectation from `left`.
    fn climb(&self, t: &ComplexMatrix, mut left: Vec<C64>) -> (f64, Vec<C64>, Vec<C64>) {
        let mut value = f64::NEG_INFINITY;
        let mut right = Vec::new();
        for _ in 0..200 {
            let er = jacobi_eigh(&self.contract_left(t, &left));
            right = er.vector(self.dr - 1);
            let el = jacobi_eigh(&self.contract_right(t, &right));
            left = el.vector(self.dl - 1);
            let new_value = el.eigenvalues[self.dl - 1];
            let done = new_value - value <= self.opts.inner_tol * new_value.abs().max(1.0);
            value = new_value;
            if done {
                break;
            }
        }
        (value, left, right)
    }

    /// Product vector maximising `<x|T|x>`, from warm starts then seeded
    /// random starts; ties keep the earlier candidate.
    fn best_product(&mut self, t: &ComplexMatrix, warm: &[Vec<C64>]) -> (f64, Vec<C64>, Vec<C64>) {
        let mut best: Option<(f64, Vec<C64>, Vec<C64>)> = None;
        let mut starts: Vec<Vec<C64>> = warm.to_vec();
        for _ in 0..self.opts.restarts {
            starts.push(self.random_unit(self.dl));
        }
        self.restarts_used += self.opts.restarts;
        for start in starts {
            let cand = self.climb(t, start);
            if best.as_ref().map_or(true, |b| cand.0 > b.0) {
                best = Some(cand);
            }
        }
        best.expect("at least one start")
    }

    fn sigma_of(&self, atoms: &[Atom]) -> ComplexMatrix {
        let mut s = ComplexMatrix::zeros_unchecked(self.dim);
        for a in atoms {
            for i in 0..self.dim {
                for j in 0..self.dim {
                    s[(i, j)] += a.full[i] * a.full[j].conj() * a.weight;
                }
            }
        }
        s.hermitian_part()
    }

    /// Minimises the objective on `sigma + step * dir`, `step in [0, max_step]`.
    fn line_search(&self, sigma: &ComplexMatrix, dir: &ComplexMatrix, max_step: f64, f0: f64) -> (f64, f64) {
        let f = |g: f64| self.objective(&(*sigma + dir.scale(g)));
        let (mut step, mut value) = brent_minimize(&f, 0.0, max_step, self.opts.line_tol);
        let at_end = f(max_step);
        if at_end <= value {
            step = max_step;
            value = at_end;
        }
        if value > f0 {
            (0.0, f0)
        } else {
            (step, value)
        }
    }

    fn run(mut self) -> Result<ReeResult> {
        let (dl, dr) = (self.dl, self.dr);
        let basis = |n: usize, k: usize| -> Vec<C64> {
            let mut v = vec![C64::new(0.0, 0.0); n];
            v[k] = C64::new(1.0, 0.0);
            v
        };
        let diag_total: f64 = (0..self.dim).map(|i| self.rho[(i, i)].re.max(0.0)).sum();
        let mut atoms: Vec<Atom> = (0..self.dim)
            .filter(|&i| self.rho[(i, i)].re > 0.0)
            .map(|i| Atom::new(self.rho[(i, i)].re / diag_total, basis(dl, i / dr), basis(dr, i % dr)))
            .collect();

        let mut sigma = self.sigma_of(&atoms);
        let mut value = self.objective(&sigma);
        let mut history = Vec::new();
        if self.opts.record_history {
            history.push(value);
        }
        let gap_tol_nats = self.opts.gap_tol * LN_2;
        let eps = self.opts.regularization;
        let mut gap;
        let mut converged = false;
        let mut iterations = 0;
        let mut last_fw: Option<Vec<C64>> = None;
        let mut recent = vec![value];
        let mut gaps = Vec::new();

        loop {
            let t = self.gradient_operator(&sigma);
            let t_sigma = t.trace_product_re(&sigma);
            let mut warm: Vec<Vec<C64>> = last_fw.iter().cloned().collect();
            let mut by_score: Vec<(f64, usize)> = atoms
                .iter()
                .enumerate()
                .map(|(k, a)| (t.expectation(&a.full), k))
                .collect();
            by_score.sort_by(|x, y| y.0.total_cmp(&x.0));
            warm.extend(by_score.iter().take(2).map(|&(_, k)| atoms[k].left.clone()));

            let (s_val, s_left, s_right) = self.best_product(&t, &warm);
            // relative entropy is non-negative, so the objective itself also
            // bounds the distance to the optimum
            gap = ((1.0 - eps) * (s_val - t_sigma)).max(0.0).min(value.max(0.0));
            if gap > gap_tol_nats && iterations > 0 {
                let rho = DensityMatrix::new_unchecked(self.rho);
                if let Ok(f0) = relative_entropy_nats(&rho, &DensityMatrix::new_unchecked(sigma)) {
                    gap = gap.min(self.mixed_certificate(&sigma, f0, &warm));
                }
            }
            if gap <= gap_tol_nats {
                converged = true;
                break;
            }
            gaps.push(gap);
            if iterations >= self.opts.max_iter || stalled(&recent, &gaps) {
                break;
            }
            iterations += 1;
            last_fw = Some(s_left.clone());

            // conditional-gradient step towards the new atom
            let fw_atom = Atom::new(0.0, s_left, s_right);
            let dir = ComplexMatrix::projector(&fw_atom.full)? - sigma;
            let (step, _) = self.line_search(&sigma, &dir, 1.0, value);
            let mut candidate = atoms.clone();
            if step > 0.0 {
                for a in candidate.iter_mut() {
                    a.weight *= 1.0 - step;
                }
                candidate.push(Atom {
                    weight: step,
                    ..fw_atom
                });
                candidate.retain(|a| a.weight > 0.0);
            }

            // local descent on weights and vectors of every atom
            let (polished, polished_value) = self.polish(&candidate);
            let fw_value = self.objective(&self.sigma_of(&candidate));
            let (next, next_value) = if polished_value <= fw_value {
                (polished, polished_value)
            } else {
                (candidate, fw_value)
            };
            if next_value >= value {
                // no descent at working precision
                break;
            }
            atoms = self.compact(next, next_value);
            sigma = self.sigma_of(&atoms);
            value = self.objective(&sigma);
            if self.opts.record_history {
                history.push(value);
            }
            recent.push(value);
        }

        let rho = DensityMatrix::new_unchecked(self.rho);
        let sigma_star = DensityMatrix::new_unchecked(sigma);
        let nats = match relative_entropy_nats(&rho, &sigma_star) {
            Ok(v) => v,
            Err(Error::SupportViolation { .. }) => value,
            Err(e) => return Err(e),
        };
        let units = self.opts.units;
        Ok(ReeResult {
            value: units.from_nats(nats.max(0.0)),
            sigma_star,
            decomposition: atoms
                .into_iter()
                .map(|a| ProductAtom {
                    weight: a.weight,
                    left: a.left,
                    right: a.right,
                })
                .collect(),
            gap: units.from_nats(gap),
            iterations,
            restarts_used: self.restarts_used,
            converged,
            method: ReeMethod::FrankWolfe,
            history,
        })
    }

    /// Bound from a nearby full-rank separable point. For
    /// `y = (1 - delta) sigma + delta I/d` convexity gives
    /// `f(sigma) - f* <= f(sigma) - f(y) + gap(y)`, which stays tight when
    /// `sigma` is nearly singular and its own gap is dominated by rounding
    /// in the near-kernel eigenvectors.
    fn mixed_certificate(&mut self, sigma: &ComplexMatrix, f_sigma: f64, warm: &[Vec<C64>]) -> f64 {
        let mut best = f64::INFINITY;
        for delta in CERTIFICATE_MIXING {
            let mut y = sigma.scale(1.0 - delta);
            for i in 0..self.dim {
                y[(i, i)] += delta / self.dim as f64;
            }
            let t = self.gradient_operator(&y);
            let z = self.regularized(&y);
            let (s_val, _, _) = self.best_product(&t, warm);
            best = best.min(f_sigma - self.objective(&y) + (s_val - t.trace_product_re(&z)));
            if best <= self.opts.gap_tol * LN_2 {
                break;
            }
        }
        best.max(0.0)
    }

    /// Merges coincident atoms and drops negligible ones, keeping each
    /// change only if the objective does not rise.
    fn compact(&self, mut atoms: Vec<Atom>, mut value: f64) -> Vec<Atom> {
        let mut i = 0;
        while i < atoms.len() {
            let mut j = i + 1;
            while j < atoms.len() {
                if overlap_sqr(&atoms[i].full, &atoms[j].full) > 1.0 - 1e-12 {
                    let w = atoms[j].weight;
                    atoms[i].weight += w;
                    atoms.remove(j);
                } else {
                    j += 1;
                }
            }
            i += 1;
        }
        let mut k = 0;
        while k < atoms.len() && atoms.len() > 1 {
            if atoms[k].weight < 1e-12 {
                let mut trial = atoms.clone();
                trial.remove(k);
                let total: f64 = trial.iter().map(|a| a.weight).sum();
                for a in trial.iter_mut() {
                    a.weight /= total;
                }
                let v = self.objective(&self.sigma_of(&trial));
                if v <= value {
                    atoms = trial;
                    value = v;
                    continue;
                }
            }
            k += 1;
        }
        atoms
    }

    /// Objective and gradient with respect to the packed atom parameters:
    /// per atom a weight amplitude followed by the real and imaginary parts
    /// of the unnormalised left and right vectors.
    fn atom_objective(&self, theta: &[f64], n_atoms: usize) -> (f64, Vec<f64>) {
        let (dl, dr) = (self.dl, self.dr);
        let stride = 1 + 2 * dl + 2 * dr;
        let atoms = unpack_atoms(theta, n_atoms, dl, dr);
        let amp_total: f64 = (0..n_atoms).map(|k| theta[k * stride].powi(2)).sum();
        let sigma = self.sigma_of(&atoms);
        let eig = jacobi_eigh(&self.regularized(&sigma));
        let mut cross = 0.0;
        for (k, &l) in eig.eigenvalues.iter().enumerate() {
            cross += self.rho.expectation(&eig.vector(k)) * l.max(f64::MIN_POSITIVE).ln();
        }
        let value = -self.rho_entropy - cross;
        let rho_t = eig.to_eigenbasis(&self.rho);
        let l = &eig.eigenvalues;
        let t = eig
            .from_eigenbasis(&rho_t.hadamard_with(|i, j| C64::new(log_divided_difference(l[i], l[j]), 0.0)))
            .hermitian_part();
        // dF/dsigma = -(1 - eps) T
        let g = t.scale(-(1.0 - self.opts.regularization));
        let scores: Vec<f64> = atoms.iter().map(|a| g.expectation(&a.full)).collect();
        let mean: f64 = atoms.iter().zip(&scores).map(|(a, s)| a.weight * s).sum();
        let mut grad = vec![0.0; theta.len()];
        for (k, atom) in atoms.iter().enumerate() {
            let base = k * stride;
            grad[base] = 2.0 * theta[base] / amp_total * (scores[k] - mean);
            let a_norm = vec_norm(&theta[base + 1..base + 1 + 2 * dl]);
            let b_norm = vec_norm(&theta[base + 1 + 2 * dl..base + stride]);
            let m_left = self.contract_right(&g, &atom.right);
            let m_right = self.contract_left(&g, &atom.left);
            let c_left = tangent(&m_left, &atom.left, scores[k], 2.0 * atom.weight / a_norm);
            let c_right = tangent(&m_right, &atom.right, scores[k], 2.0 * atom.weight / b_norm);
            for (i, z) in c_left.iter().enumerate() {
                grad[base + 1 + 2 * i] = z.re;
                grad[base + 2 + 2 * i] = z.im;
            }
            let off = base + 1 + 2 * dl;
            for (i, z) in c_right.iter().enumerate() {
                grad[off + 2 * i] = z.re;
                grad[off + 1 + 2 * i] = z.im;
            }
        }
        (value, grad)
    }

    fn polish(&self, atoms: &[Atom]) -> (Vec<Atom>, f64) {
        let n = atoms.len();
        let mut theta = Vec::with_capacity(n * (1 + 2 * self.dl + 2 * self.dr));
        for a in atoms {
            theta.push(a.weight.sqrt());
            for z in a.left.iter().chain(&a.right) {
                theta.push(z.re);
                theta.push(z.im);
            }
        }
        let (theta, value) = lbfgs(theta, |x| self.atom_objective(x, n), LOCAL_ITERATIONS);
        (unpack_atoms(&theta, n, self.dl, self.dr), value)
    }
}

/// Weights of `I/d` tried by [`Solver::mixed_certificate`].
const CERTIFICATE_MIXING: [f64; 4] = [1e-8, 1e-7, 1e-6, 1e-5];

/// Outer iterations over which the objective must drop by at least
/// `STALL_DECREASE` (relative, nats), or the best gap shrink by the factor
/// `STALL_GAP_RATIO`, for the solver to keep going.
const STALL_WINDOW: usize = 10;
const STALL_DECREASE: f64 = 1e-10;
const STALL_GAP_RATIO: f64 = 0.75;

/// True once neither the objective nor the gap has made progress over the
/// last [`STALL_WINDOW`] iterations. Typical when the gap is dominated by
/// near-kernel directions of `sigma`.
fn stalled(values: &[f64], gaps: &[f64]) -> bool {
    let n = values.len();
    if n <= STALL_WINDOW || gaps.len() != n {
        return false;
    }
    let value = values[n - 1];
    let flat = values[n - 1 - STALL_WINDOW] - value < STALL_DECREASE * value.abs().max(1.0);
    let best = |g: &[f64]| g.iter().cloned().fold(f64::INFINITY, f64::min);
    flat && best(&gaps[n - STALL_WINDOW..]) > STALL_GAP_RATIO * best(&gaps[..n - STALL_WINDOW])
}

/// Local descent iterations between conditional-gradient steps.
const LOCAL_ITERATIONS: usize = 3000;

fn vec_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `scale * (M v - score v)`, the Wirtinger gradient of a Rayleigh quotient.
fn tangent(m: &ComplexMatrix, v: &[C64], score: f64, scale: f64) -> Vec<C64> {
    (0..v.len())
        .map(|i| {
            let mv: C64 = (0..v.len()).map(|j| m[(i, j)] * v[j]).sum();
            (mv - v[i] * score) * scale
        })
        .collect()
}

fn unpack_atoms(theta: &[f64], n: usize, dl: usize, dr: usize) -> Vec<Atom> {
    let stride = 1 + 2 * dl + 2 * dr;
    let amps: Vec<f64> = (0..n).map(|k| theta[k * stride].powi(2)).collect();
    let total: f64 = amps.iter().sum();
    let unit = |x: &[f64]| -> Vec<C64> {
        let norm = vec_norm(x);
        x.chunks(2).map(|p| C64::new(p[0], p[1]) / norm).collect()
    };
    (0..n)
        .map(|k| {
            let base = k * stride;
            Atom::new(
                amps[k] / total,
                unit(&theta[base + 1..base + 1 + 2 * dl]),
                unit(&theta[base + 1 + 2 * dl..base + stride]),
            )
        })
        .collect()
}

/// Limited-memory BFGS with a backtracking Armijo search. Only accepts
/// points that lower the objective.
fn lbfgs(
    mut x: Vec<f64>,
    mut f: impl FnMut(&[f64]) -> (f64, Vec<f64>),
    max_iter: usize,
) -> (Vec<f64>, f64) {
    const MEMORY: usize = 8;
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let (mut fx, mut g) = f(&x);
    let mut hist: std::collections::VecDeque<(Vec<f64>, Vec<f64>, f64)> = Default::default();
    let mut stalls = 0;
    for _ in 0..max_iter {
        if g.iter().all(|v| v.abs() < 1e-14) {
            break;
        }
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        let h0 = hist
            .back()
            .map_or(1.0 / vec_norm(&g).max(1.0), |(s, y, _)| dot(s, y) / dot(y, y));
        q.iter_mut().for_each(|v| *v *= h0);
        for ((s, y, rho), a) in hist.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        let mut d: Vec<f64> = q.into_iter().map(|v| -v).collect();
        let mut slope = dot(&g, &d);
        if slope >= 0.0 {
            hist.clear();
            let scale = 1.0 / vec_norm(&g).max(1.0);
            d = g.iter().map(|v| -v * scale).collect();
            slope = dot(&g, &d);
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
            let (ft, gt) = f(&trial);
            if ft <= fx + 1e-4 * step * slope && ft < fx {
                accepted = Some((trial, ft, gt));
                break;
            }
            step *= 0.5;
        }
        let Some((x_new, f_new, g_new)) = accepted else {
            break;
        };
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-20 {
            if hist.len() == MEMORY {
                hist.pop_front();
            }
            hist.push_back((s, y, 1.0 / sy));
        }
        stalls = if fx - f_new < 1e-15 * fx.abs().max(1.0) { stalls + 1 } else { 0 };
        x = x_new;
        fx = f_new;
        g = g_new;
        if stalls >= 3 {
            break;
        }
    }
    (x, fx)
}

fn overlap_sqr(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<C64>().norm_sqr()
}

/// `(ln a - ln b) / (a - b)`, continuous at `a = b`.
fn log_divided_difference(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    let x = (hi - lo) / lo;
    if x < 1e-6 {
        // ln(1+x)/x = 1 - x/2 + x^2/3
        (1.0 - x / 2.0 + x * x / 3.0) / lo
    } else {
        x.ln_1p() / (hi - lo)
    }
}

/// Brent's minimiser (golden-section steps with parabolic interpolation)
/// for a unimodal function on `[a, b]`.
fn brent_minimize(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let golden = 0.5 * (3.0 - 5f64.sqrt());
    let sqrt_eps = f64::EPSILON.sqrt();
    let mut x = a + golden * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x);
    let (mut fw, mut fv) = (fx, fx);
    let (mut d, mut e): (f64, f64) = (0.0, 0.0);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let tol1 = sqrt_eps * x.abs() + tol / 3.0;
        let tol2 = 2.0 * tol1;
        if (x - m).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut use_golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            } else {
                q = -q;
            }
            if p.abs() < (0.5 * q * e).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if x < m { tol1 } else { -tol1 };
                }
                use_golden = false;
            }
        }
        if use_golden {
            e = if x < m { b - x } else { a - x };
            d = golden * e;
        }
        let u = if d.abs() >= tol1 {
            x + d
        } else if d > 0.0 {
            x + tol1
        } else {
            x - tol1
        };
        let fu = f(u);
        if fu <= fx {
            if u < x {
                b = x;
            } else {
                a = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    (x, fx)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionOptions {
    pub ree: ReeOptions,
    /// Also compute `E_B:C`.
    pub include_bc: bool,
}

impl Default for DistributionOptions {
    fn default() -> Self {
        Self {
            ree: ReeOptions::default(),
            include_bc: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DistributionResult {
    pub e_abc: ReeResult,
    pub e_ab: ReeResult,
    pub e_ac: ReeResult,
    pub e_bc: Option<ReeResult>,
    /// `|E_A:BC - E_A:B - E_A:C|`.
    pub d: f64,
    /// `E_A:BC - E_A:B - E_A:C`.
    pub signed_d: f64,
}

impl DistributionResult {
    pub fn converged(&self) -> bool {
        self.e_abc.converged && self.e_ab.converged && self.e_ac.converged
    }
}

/// REE across `A:BC`, `A:B` and `A:C` of a three-qubit state, and `D`.
pub fn distribution(rho: &DensityMatrix, opts: &DistributionOptions) -> Result<DistributionResult> {
    if rho.dim() != 8 {
        return Err(Error::DimensionMismatch(
            "distribution needs a three-qubit state".into(),
        ));
    }
    let e_abc = ree(rho, Cut::ABc, &opts.ree)?;
    let e_ab = ree(rho, Cut::AB, &opts.ree)?;
    let e_ac = ree(rho, Cut::AC, &opts.ree)?;
    let e_bc = if opts.include_bc {
        Some(ree(rho, Cut::BC, &opts.ree)?)
    } else {
        None
    };
    let signed_d = e_abc.value - e_ab.value - e_ac.value;
    Ok(DistributionResult {
        d: signed_d.abs(),
        signed_d,
        e_abc,
        e_ab,
        e_ac,
        e_bc,
    })
}
