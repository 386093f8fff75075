//! SINR-target feasibility as a second-order cone program.
//!
//! For fixed targets `gamma_k` the question "is there a feasible strategy
//! meeting every target" is convex once the phase of each useful signal is
//! fixed. We solve the equivalent margin problem
//!
//! ```text
//! minimize beta  s.t.  sum_k v_k^H Q_lk v_k / q_l <= beta   for all l
//!                      SINR_k(v) >= gamma_k                 for all k
//! ```
//!
//! so the targets are feasible iff `beta* <= 1`. Unlike a pure feasibility
//! problem this has informative dual variables: after scaling they are the
//! `(mu, lambda)` weights that reproduce the solution in closed form.

use std::fmt::Write as _;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CVector};
use crate::scenario::{constraint_usage, sinrs, BeamformingStrategy, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cone {
    Zero(usize),
    SecondOrder(usize),
}

impl Cone {
    pub fn dim(&self) -> usize {
        match *self {
            Cone::Zero(d) | Cone::SecondOrder(d) => d,
        }
    }
}

/// `minimize c^T x  s.t.  b - A x in K`, with `A` stored row-wise.
#[derive(Debug, Clone)]
pub struct ConeProgram {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub rows: Vec<Vec<(usize, f64)>>,
    pub b: Vec<f64>,
    pub cones: Vec<Cone>,
    layout: Layout,
}

#[derive(Debug, Clone)]
struct Layout {
    // (first column of the real block, data support) per active user
    users: Vec<Option<(usize, Vec<usize>)>>,
    power_rows: Vec<usize>,
    sinr_rows: Vec<Option<usize>>,
}

/// Row `s_i = b_i - a_i^T x` under construction; coefficients are those of `s_i`.
#[derive(Default)]
struct RowBuilder {
    terms: Vec<(usize, f64)>,
}

impl RowBuilder {
    fn add(&mut self, col: usize, coef: f64) {
        if coef != 0.0 {
            self.terms.push((col, coef));
        }
    }

    // Re(r^T v) or Im(r^T v) with v = x + i y stored at (x_col, y_col)
    fn add_re(&mut self, r: Complex64, x_col: usize, y_col: usize, scale: f64) {
        self.add(x_col, scale * r.re);
        self.add(y_col, -scale * r.im);
    }

    fn add_im(&mut self, r: Complex64, x_col: usize, y_col: usize, scale: f64) {
        self.add(x_col, scale * r.im);
        self.add(y_col, scale * r.re);
    }

    fn finish(mut self) -> Vec<(usize, f64)> {
        // A = -coefficients of s
        self.terms.sort_by_key(|t| t.0);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(self.terms.len());
        for (col, v) in self.terms {
            match out.last_mut() {
                Some(last) if last.0 == col => last.1 -= v,
                _ => out.push((col, -v)),
            }
        }
        out
    }
}

struct Builder {
    rows: Vec<Vec<(usize, f64)>>,
    b: Vec<f64>,
    cones: Vec<Cone>,
}

impl Builder {
    fn push(&mut self, row: RowBuilder, b: f64) {
        self.rows.push(row.finish());
        self.b.push(b);
    }
}

/// Assemble the margin program for the given SINR targets. Users with a zero
/// target carry no variables.
pub fn build_program(scenario: &Scenario, targets: &[f64]) -> Result<ConeProgram> {
    let kr = scenario.num_users();
    if targets.len() != kr {
        return Err(Error::InvalidParams(format!("expected {kr} SINR targets")));
    }
    if targets.iter().any(|&g| !(g >= 0.0 && g.is_finite())) {
        return Err(Error::InvalidParams("SINR targets must be nonnegative and finite".into()));
    }
    let sel = scenario.selection();
    let kappa = scenario.evm();

    let mut users = Vec::with_capacity(kr);
    let mut col = 1;
    for k in 0..kr {
        if targets[k] > 0.0 {
            let supp = sel.data_support(k).to_vec();
            users.push(Some((col, supp.clone())));
            col += 2 * supp.len();
        } else {
            users.push(None);
        }
    }
    let num_vars = col;
    let cols = |k: usize, i: usize| {
        let (off, supp) = users[k].as_ref().expect("active user");
        (off + i, off + supp.len() + i)
    };

    let mut bld = Builder { rows: Vec::new(), b: Vec::new(), cones: Vec::new() };

    // useful signal is real
    let active: Vec<usize> = (0..kr).filter(|&k| users[k].is_some()).collect();
    if !active.is_empty() {
        for &k in &active {
            let h = scenario.channel(k);
            let mut row = RowBuilder::default();
            for (i, &n) in sel.data_support(k).iter().enumerate() {
                let (xc, yc) = cols(k, i);
                row.add_im(h[n].conj(), xc, yc, 1.0);
            }
            bld.push(row, 0.0);
        }
        bld.cones.push(Cone::Zero(active.len()));
    }

    // power constraints as rotated cones (beta + 1, beta - 1, 2 F v / sqrt(q))
    let mut power_rows = Vec::new();
    for pc in scenario.constraints() {
        power_rows.push(bld.rows.len());
        let start = bld.rows.len();
        let mut r = RowBuilder::default();
        r.add(0, 1.0);
        bld.push(r, 1.0);
        let mut r = RowBuilder::default();
        r.add(0, 1.0);
        bld.push(r, -1.0);
        let scale = 2.0 / pc.q.sqrt();
        for &k in &active {
            let supp = sel.data_support(k);
            let f = linalg::psd_factor(&linalg::submatrix(&pc.matrices[k], supp));
            for fr in 0..f.nrows() {
                let mut re = RowBuilder::default();
                let mut im = RowBuilder::default();
                for i in 0..supp.len() {
                    let (xc, yc) = cols(k, i);
                    re.add_re(f[(fr, i)], xc, yc, scale);
                    im.add_im(f[(fr, i)], xc, yc, scale);
                }
                bld.push(re, 0.0);
                bld.push(im, 0.0);
            }
        }
        bld.cones.push(Cone::SecondOrder(bld.rows.len() - start));
    }

    // SINR constraints
    let mut sinr_rows = vec![None; kr];
    for &k in &active {
        sinr_rows[k] = Some(bld.rows.len());
        let start = bld.rows.len();
        let h = scenario.channel(k);
        let coord = &sel.coord[k];
        let inv_sqrt_gamma = 1.0 / targets[k].sqrt();
        let mut head = RowBuilder::default();
        for (i, &n) in sel.data_support(k).iter().enumerate() {
            let (xc, yc) = cols(k, i);
            head.add_re(h[n].conj(), xc, yc, inv_sqrt_gamma);
        }
        bld.push(head, 0.0);
        bld.push(RowBuilder::default(), scenario.noise_power(k).sqrt());
        for &kb in &active {
            if kb == k {
                continue;
            }
            let supp = sel.data_support(kb);
            if !supp.iter().any(|&n| coord[n] && h[n] != c(0.0, 0.0)) {
                continue;
            }
            let mut re = RowBuilder::default();
            let mut im = RowBuilder::default();
            for (i, &n) in supp.iter().enumerate() {
                if coord[n] {
                    let (xc, yc) = cols(kb, i);
                    re.add_re(h[n].conj(), xc, yc, 1.0);
                    im.add_im(h[n].conj(), xc, yc, 1.0);
                }
            }
            bld.push(re, 0.0);
            bld.push(im, 0.0);
        }
        for &kb in &active {
            for (i, &n) in sel.data_support(kb).iter().enumerate() {
                let w = kappa[n] * h[n].norm();
                if coord[n] && w > 0.0 {
                    let (xc, yc) = cols(kb, i);
                    let mut re = RowBuilder::default();
                    re.add(xc, w);
                    let mut im = RowBuilder::default();
                    im.add(yc, w);
                    bld.push(re, 0.0);
                    bld.push(im, 0.0);
                }
            }
        }
        bld.cones.push(Cone::SecondOrder(bld.rows.len() - start));
    }

    let mut objective = vec![0.0; num_vars];
    objective[0] = 1.0;
    Ok(ConeProgram {
        num_vars,
        objective,
        rows: bld.rows,
        b: bld.b,
        cones: bld.cones,
        layout: Layout { users, power_rows, sinr_rows },
    })
}

impl ConeProgram {
    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// Plain-text listing of the program, one constraint row per line.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "vars {} rows {}", self.num_vars, self.num_rows());
        let _ = writeln!(out, "minimize x0");
        let mut row = 0;
        for cone in &self.cones {
            let _ = writeln!(out, "{cone:?}");
            for _ in 0..cone.dim() {
                let terms: Vec<String> = self.rows[row]
                    .iter()
                    .map(|(c, v)| format!("{v:+.6e}*x{c}"))
                    .collect();
                let _ = writeln!(out, "  s{row} = {:+.6e} - ({})", self.b[row], terms.join(" "));
                row += 1;
            }
        }
        out
    }

    pub fn csc(&self) -> CscMatrix<f64> {
        let mut triplets: Vec<(usize, usize, f64)> = self
            .rows
            .iter()
            .enumerate()
            .flat_map(|(r, terms)| terms.iter().map(move |&(c, v)| (c, r, v)))
            .collect();
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut colptr = vec![0usize; self.num_vars + 1];
        for &(c, _, _) in &triplets {
            colptr[c + 1] += 1;
        }
        for j in 0..self.num_vars {
            colptr[j + 1] += colptr[j];
        }
        CscMatrix::new(
            self.num_rows(),
            self.num_vars,
            colptr,
            triplets.iter().map(|t| t.1).collect(),
            triplets.iter().map(|t| t.2).collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BackendStatus {
    Solved,
    Infeasible,
    Failed(String),
}

#[derive(Debug, Clone)]
pub struct BackendSolution {
    pub status: BackendStatus,
    pub x: Vec<f64>,
    pub s: Vec<f64>,
    pub z: Vec<f64>,
    pub iterations: u32,
}

/// A conic solver able to handle zero and second-order cones.
pub trait ConicBackend: Sync {
    fn name(&self) -> &str;
    /// `tight` requests tighter tolerances and more iterations.
    fn solve(&self, program: &ConeProgram, tight: bool) -> BackendSolution;
}

#[derive(Debug, Clone)]
pub struct ClarabelBackend {
    pub tol: f64,
    pub max_iter: u32,
}

impl Default for ClarabelBackend {
    fn default() -> Self {
        ClarabelBackend { tol: 1e-11, max_iter: 200 }
    }
}

impl ClarabelBackend {
    fn settings(&self, tight: bool) -> DefaultSettings<f64> {
        let tol = if tight { self.tol * 1e-2 } else { self.tol };
        let mut s = DefaultSettingsBuilder::default()
            .verbose(false)
            .max_iter(if tight { 2 * self.max_iter } else { self.max_iter })
            .tol_gap_abs(tol)
            .tol_gap_rel(tol)
            .tol_feas(tol)
            .max_threads(1)
            .build()
            .expect("valid solver settings");
        if tight {
            // stalls near the margin boundary come from the KKT solves, not
            // the tolerance; shorter steps and more refinement get past them
            s.max_step_fraction = 0.95;
            s.static_regularization_constant = 1e-12;
            s.iterative_refinement_reltol = 1e-16;
            s.iterative_refinement_abstol = 1e-16;
            s.iterative_refinement_max_iter = 50;
        }
        s
    }
}

impl ConicBackend for ClarabelBackend {
    fn name(&self) -> &str {
        "clarabel"
    }

    fn solve(&self, program: &ConeProgram, tight: bool) -> BackendSolution {
        let n = program.num_vars;
        let p = CscMatrix::zeros((n, n));
        let a = program.csc();
        let cones: Vec<SupportedConeT<f64>> = program
            .cones
            .iter()
            .map(|c| match *c {
                Cone::Zero(d) => SupportedConeT::ZeroConeT(d),
                Cone::SecondOrder(d) => SupportedConeT::SecondOrderConeT(d),
            })
            .collect();
        let failed = |msg: String| BackendSolution {
            status: BackendStatus::Failed(msg),
            x: Vec::new(),
            s: Vec::new(),
            z: Vec::new(),
            iterations: 0,
        };
        let mut solver =
            match DefaultSolver::new(&p, &program.objective, &a, &program.b, &cones, self.settings(tight)) {
                Ok(s) => s,
                Err(e) => return failed(format!("setup: {e}")),
            };
        solver.solve();
        let sol = &solver.solution;
        let status = match sol.status {
            SolverStatus::Solved | SolverStatus::AlmostSolved => BackendStatus::Solved,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => BackendStatus::Infeasible,
            other => BackendStatus::Failed(format!("{other:?}")),
        };
        BackendSolution {
            status,
            x: sol.x.clone(),
            s: sol.s.clone(),
            z: sol.z.clone(),
            iterations: sol.iterations,
        }
    }
}

/// Dual weights of the margin program, scaled so that they can be used as
/// explicit parameters directly: `sum(lambda) = 1` at optimality and
/// `sum(mu) = beta*` by strong duality.
#[derive(Debug, Clone, PartialEq)]
pub struct Duals {
    pub mu: Vec<f64>,
    pub lambda: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct Diagnostics {
    pub backend: String,
    pub status: String,
    pub iterations: u32,
    pub retried: bool,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeasibilityStatus {
    Feasible,
    Infeasible,
    /// The solver failed even after a retry; the targets are undecided.
    SolverFailure,
}

impl FeasibilityStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            FeasibilityStatus::Feasible => "feasible",
            FeasibilityStatus::Infeasible => "infeasible",
            FeasibilityStatus::SolverFailure => "solver-failure",
        }
    }
}

/// Slack on `beta* <= 1` absorbing interior-point accuracy.
pub const MARGIN_SLACK: f64 = 1e-9;

/// Relative SINR shortfall tolerated when certifying a stalled solve.
pub const CERTIFY_RTOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct FeasibilityResult {
    pub status: FeasibilityStatus,
    /// Optimal margin; `None` when the targets cannot be met at any power.
    pub beta: Option<f64>,
    /// Optimal strategy of the margin program, present whenever `beta` is.
    pub strategy: Option<BeamformingStrategy>,
    pub duals: Option<Duals>,
    pub diagnostics: Diagnostics,
}

impl FeasibilityResult {
    pub fn is_feasible(&self) -> bool {
        self.status == FeasibilityStatus::Feasible
    }
}

/// Decide whether the SINR targets are jointly achievable, using Clarabel.
pub fn check_feasibility(scenario: &Scenario, targets: &[f64]) -> Result<FeasibilityResult> {
    check_feasibility_with(&ClarabelBackend::default(), scenario, targets)
}

pub fn check_feasibility_with(
    backend: &dyn ConicBackend,
    scenario: &Scenario,
    targets: &[f64],
) -> Result<FeasibilityResult> {
    let program = build_program(scenario, targets)?;
    let kr = scenario.num_users();
    let mut diag = Diagnostics { backend: backend.name().to_string(), ..Default::default() };

    let undecided = |status, diag: Diagnostics| FeasibilityResult {
        status,
        beta: None,
        strategy: None,
        duals: None,
        diagnostics: diag,
    };

    if program.layout.users.iter().all(|u| u.is_none()) {
        diag.status = "trivial".into();
        return Ok(FeasibilityResult {
            status: FeasibilityStatus::Feasible,
            beta: Some(0.0),
            strategy: Some(BeamformingStrategy::zero(kr, scenario.num_antennas())),
            duals: None,
            diagnostics: diag,
        });
    }
    for (k, u) in program.layout.users.iter().enumerate() {
        if let Some((_, supp)) = u {
            let a = linalg::subvector(scenario.channel(k), supp);
            if linalg::norm(&a) == 0.0 {
                diag.status = "no-signal-path".into();
                return Ok(undecided(FeasibilityStatus::Infeasible, diag));
            }
        }
    }

    let mut sol = backend.solve(&program, false);
    if let BackendStatus::Failed(msg) = &sol.status {
        diag.retried = true;
        diag.warnings.push(format!("solver failed ({msg}), retrying with tighter tolerances"));
        sol = backend.solve(&program, true);
    }
    diag.iterations = sol.iterations;
    let mut certified = false;
    match &sol.status {
        BackendStatus::Infeasible => {
            diag.status = "infeasible".into();
            return Ok(undecided(FeasibilityStatus::Infeasible, diag));
        }
        BackendStatus::Failed(msg) => {
            diag.warnings.push(format!("solver failed twice ({msg})"));
            if sol.x.len() != program.num_vars {
                diag.status = format!("solver-failure: {msg}");
                log::warn!("conic solver failed twice ({msg})");
                return Ok(undecided(FeasibilityStatus::SolverFailure, diag));
            }
            certified = true;
        }
        BackendStatus::Solved => diag.status = "solved".into(),
    }

    let n = scenario.num_antennas();
    let beams: Vec<CVector> = program
        .layout
        .users
        .iter()
        .map(|u| match u {
            Some((off, supp)) => {
                let m = supp.len();
                let local = CVector::from_fn(m, |i, _| c(sol.x[off + i], sol.x[off + m + i]));
                linalg::embed(&local, supp, n)
            }
            None => CVector::zeros(n),
        })
        .collect();
    let strategy = BeamformingStrategy::from_beamformers(&beams);

    let mut beta = sol.x[0];
    if certified {
        // the last iterate of a stalled solve can still be checked directly;
        // only a strategy that verifiably meets every target counts
        let usage = constraint_usage(scenario, &strategy).max;
        let met = sinrs(scenario, &strategy)
            .iter()
            .zip(targets)
            .all(|(s, t)| *s >= t * (1.0 - CERTIFY_RTOL));
        if !(met && usage <= 1.0 + MARGIN_SLACK) {
            diag.status = "solver-failure: iterate not certified".into();
            log::warn!("conic solver failed twice and its iterate does not meet the targets");
            return Ok(undecided(FeasibilityStatus::SolverFailure, diag));
        }
        diag.status = "certified".into();
        diag.warnings.push("feasibility certified by evaluating the last iterate".into());
        beta = usage;
    }

    let lambda: Vec<f64> = program
        .layout
        .power_rows
        .iter()
        // z = alpha (beta + 1, 1 - beta, ..) at optimality, lambda = 2 alpha
        .map(|&r| sol.z[r] + sol.z[r + 1])
        .collect();
    let mu: Vec<f64> = (0..kr)
        .map(|k| match program.layout.sinr_rows[k] {
            Some(r) => {
                let t = sol.s[r].max(f64::MIN_POSITIVE);
                sol.z[r] / (2.0 * t) * scenario.noise_power(k)
            }
            None => 0.0,
        })
        .collect();

    Ok(FeasibilityResult {
        status: if beta <= 1.0 + MARGIN_SLACK {
            FeasibilityStatus::Feasible
        } else {
            FeasibilityStatus::Infeasible
        },
        beta: Some(beta),
        strategy: Some(strategy),
        duals: Some(Duals { mu, lambda }),
        diagnostics: diag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::tests::{orthogonal_pair, single_user};
    use crate::scenario::{constraint_usage, sinrs};

    #[test]
    fn single_user_margin() {
        // SINR gamma needs power gamma (|h| = 1), so beta = gamma / 2
        let scn = single_user(0.0);
        let r = check_feasibility(&scn, &[1.0]).unwrap();
        assert!(r.is_feasible());
        assert!((r.beta.unwrap() - 0.5).abs() < 1e-7);
        let d = r.duals.unwrap();
        assert!((d.lambda[0] - 1.0).abs() < 1e-6, "{d:?}");
        assert!((d.mu[0] - 0.5).abs() < 1e-6, "{d:?}");

        let r = check_feasibility(&scn, &[2.5]).unwrap();
        assert!(!r.is_feasible());
        assert!((r.beta.unwrap() - 1.25).abs() < 1e-7);
    }

    #[test]
    fn distortion_caps_attainable_sinr() {
        // with kappa = 0.1 the SINR is p / (1 + 0.01 p) < 100
        let scn = single_user(0.1);
        let r = check_feasibility(&scn, &[150.0]).unwrap();
        assert!(!r.is_feasible() && r.beta.is_none());
        let r = check_feasibility(&scn, &[2.0 / 1.02]).unwrap();
        assert!(r.is_feasible());
        assert!((r.beta.unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn orthogonal_pair_duals() {
        let scn = orthogonal_pair();
        let r = check_feasibility(&scn, &[1.0, 1.0]).unwrap();
        assert!((r.beta.unwrap() - 1.0).abs() < 1e-7);
        let s = r.strategy.unwrap();
        let sinr = sinrs(&scn, &s);
        assert!((sinr[0] - 1.0).abs() < 1e-6 && (sinr[1] - 1.0).abs() < 1e-6);
        assert!(constraint_usage(&scn, &s).max <= 1.0 + 1e-7);
        let d = r.duals.unwrap();
        assert!((d.mu[0] - 0.5).abs() < 1e-6 && (d.mu[1] - 0.5).abs() < 1e-6);
        assert!((d.lambda[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn full_power_mrt_is_feasible() {
        let r = check_feasibility(&single_user(0.0), &[2.0]).unwrap();
        assert!(r.is_feasible());
        let s = r.strategy.unwrap();
        assert!((s.powers[0] - 2.0).abs() < 1e-7);
        assert!((s.directions[0][0].norm() - 1.0).abs() < 1e-9);
        let r = check_feasibility(&single_user(0.0), &[5.0]).unwrap();
        assert_eq!(r.status, FeasibilityStatus::Infeasible);
    }

    #[test]
    fn feasibility_is_monotone_in_targets() {
        let scn = orthogonal_pair();
        assert!(check_feasibility(&scn, &[1.0, 1.0]).unwrap().is_feasible());
        assert!(check_feasibility(&scn, &[0.7, 0.99]).unwrap().is_feasible());
        assert!(!check_feasibility(&scn, &[1.2, 1.0]).unwrap().is_feasible());
    }

    #[test]
    fn zero_targets_are_trivial() {
        let r = check_feasibility(&orthogonal_pair(), &[0.0, 0.0]).unwrap();
        assert!(r.is_feasible() && r.duals.is_none());
        assert_eq!(r.beta, Some(0.0));
    }

    #[test]
    fn rejects_bad_targets() {
        assert!(check_feasibility(&single_user(0.0), &[-1.0]).is_err());
        assert!(check_feasibility(&single_user(0.0), &[1.0, 1.0]).is_err());
    }

    #[test]
    fn dump_lists_every_row() {
        let p = build_program(&orthogonal_pair(), &[1.0, 0.5]).unwrap();
        let text = p.dump();
        assert_eq!(text.lines().filter(|l| l.trim_start().starts_with('s')).count(), p.num_rows());
        assert_eq!(p.cones.iter().map(Cone::dim).sum::<usize>(), p.num_rows());
    }

    struct AlwaysFails;

    impl ConicBackend for AlwaysFails {
        fn name(&self) -> &str {
            "fails"
        }
        fn solve(&self, _: &ConeProgram, _: bool) -> BackendSolution {
            BackendSolution {
                status: BackendStatus::Failed("NumericalError".into()),
                x: Vec::new(),
                s: Vec::new(),
                z: Vec::new(),
                iterations: 0,
            }
        }
    }

    #[test]
    fn solver_failure_is_reported_as_infeasible() {
        let r = check_feasibility_with(&AlwaysFails, &single_user(0.0), &[1.0]).unwrap();
        assert_eq!(r.status, FeasibilityStatus::SolverFailure);
        assert!(r.diagnostics.retried);
        assert_eq!(r.diagnostics.warnings.len(), 2);
    }

    // solves correctly but reports every solve as stalled
    struct Stalls;

    impl ConicBackend for Stalls {
        fn name(&self) -> &str {
            "stalls"
        }
        fn solve(&self, program: &ConeProgram, tight: bool) -> BackendSolution {
            let mut sol = ClarabelBackend::default().solve(program, tight);
            sol.status = BackendStatus::Failed("InsufficientProgress".into());
            sol
        }
    }

    #[test]
    fn stalled_iterate_is_certified_only_when_it_meets_the_targets() {
        let r = check_feasibility_with(&Stalls, &single_user(0.0), &[1.0]).unwrap();
        assert_eq!(r.status, FeasibilityStatus::Feasible);
        assert_eq!(r.diagnostics.status, "certified");
        let s = r.strategy.unwrap();
        assert!(sinrs(&single_user(0.0), &s)[0] >= 1.0 - 1e-9);
        assert!((r.beta.unwrap() - constraint_usage(&single_user(0.0), &s).max).abs() < 1e-15);

        // beyond the single-user optimum of 2 the iterate cannot meet the target
        let r = check_feasibility_with(&Stalls, &single_user(0.0), &[3.0]).unwrap();
        assert_eq!(r.status, FeasibilityStatus::SolverFailure);
    }
}
