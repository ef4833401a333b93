//! Linear programs for revenue-optimal two-priced auctions, and the dense
//! simplex solver behind them.
//!
//! The single-agent program has one `qv` and one `qc` variable per type and
//! the full pairwise set of direct incentive constraints (quadratic in the
//! number of types). The multi-agent program is an explicit ex-post
//! formulation: service probabilities per joint type profile, linked to each
//! agent's interim incentive constraints through mass-weighted marginals.
//!
//! The solver is a two-phase dense tableau simplex. Entering columns follow
//! Dantzig's rule until the objective stalls, then Bland's anti-cycling rule.
//! Large row sets are handled by activation: solve on a working subset, scan
//! the full set for violations, activate, repeat until clean.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dist::DiscreteTypeSpace;
use crate::scalar::smin;
use crate::two_price::TwoPricedRule;

#[derive(Debug, Error, PartialEq)]
pub enum LpError {
    #[error("numerical breakdown: no acceptable pivot after refactorization")]
    NumericalBreakdown,
    #[error("instance too large: {0}")]
    TooLarge(String),
    #[error("invalid linear program: {0}")]
    Invalid(String),
    #[error("solver returned {0:?} on an instance expected to be feasible")]
    Unsolved(LpStatus),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

/// Dense LP: maximize `objective . x` subject to `rows[i] . x  senses[i]
/// rhs[i]` and `bounds[j].0 <= x_j <= bounds[j].1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub senses: Vec<Sense>,
    pub rhs: Vec<f64>,
    pub bounds: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective_value: f64,
    pub assignment: Vec<f64>,
}

const FEAS_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-12;
const REDUCED_COST_TOL: f64 = 1e-9;

impl LinearProgram {
    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if self.rows.len() != self.senses.len() || self.rows.len() != self.rhs.len() {
            return Err(LpError::Invalid("row, sense and rhs counts differ".into()));
        }
        if self.bounds.len() != n {
            return Err(LpError::Invalid("bounds must cover every variable".into()));
        }
        if self.rows.iter().any(|r| r.len() != n) {
            return Err(LpError::Invalid("row length must match variable count".into()));
        }
        for (lo, hi) in &self.bounds {
            if !lo.is_finite() || *lo > *hi {
                return Err(LpError::Invalid("bounds must satisfy finite lo <= hi".into()));
            }
        }
        let finite = |x: &f64| x.is_finite();
        if !self.objective.iter().all(finite)
            || !self.rhs.iter().all(finite)
            || !self.rows.iter().all(|r| r.iter().all(finite))
        {
            return Err(LpError::Invalid("coefficients must be finite".into()));
        }
        Ok(())
    }

    /// Fixed-format MPS dump (with an `OBJSENSE MAX` section) for external
    /// cross-checking.
    pub fn to_fixed_format(&self) -> String {
        let mut out = String::new();
        out.push_str("NAME          CAPAUCT_LP\n");
        out.push_str("OBJSENSE\n    MAX\n");
        out.push_str("ROWS\n N  COST\n");
        for (i, s) in self.senses.iter().enumerate() {
            let tag = match s {
                Sense::Le => 'L',
                Sense::Eq => 'E',
                Sense::Ge => 'G',
            };
            out.push_str(&format!(" {}  R{:07}\n", tag, i));
        }
        out.push_str("COLUMNS\n");
        for j in 0..self.num_vars() {
            if self.objective[j] != 0.0 {
                out.push_str(&format!("    X{:07}  COST      {:.12e}\n", j, self.objective[j]));
            }
            for (i, row) in self.rows.iter().enumerate() {
                if row[j] != 0.0 {
                    out.push_str(&format!("    X{:07}  R{:07}  {:.12e}\n", j, i, row[j]));
                }
            }
        }
        out.push_str("RHS\n");
        for (i, b) in self.rhs.iter().enumerate() {
            if *b != 0.0 {
                out.push_str(&format!("    RHS       R{:07}  {:.12e}\n", i, b));
            }
        }
        out.push_str("BOUNDS\n");
        for (j, (lo, hi)) in self.bounds.iter().enumerate() {
            if *lo != 0.0 {
                out.push_str(&format!(" LO BND       X{:07}  {:.12e}\n", j, lo));
            }
            if hi.is_finite() {
                out.push_str(&format!(" UP BND       X{:07}  {:.12e}\n", j, hi));
            }
        }
        out.push_str("ENDATA\n");
        out
    }
}

/// Internal: LP normalized so every variable satisfies `x >= 0` (lower bounds
/// shifted away, finite upper bounds turned into rows).
struct Shifted {
    objective: Vec<f64>,
    rows: Vec<Vec<f64>>,
    senses: Vec<Sense>,
    rhs: Vec<f64>,
    shift: Vec<f64>,
    obj_const: f64,
}

fn shift_bounds(lp: &LinearProgram) -> Shifted {
    let n = lp.num_vars();
    let shift: Vec<f64> = lp.bounds.iter().map(|(lo, _)| *lo).collect();
    let mut rows = lp.rows.clone();
    let mut senses = lp.senses.clone();
    let mut rhs: Vec<f64> = lp
        .rhs
        .iter()
        .zip(&lp.rows)
        .map(|(b, row)| b - row.iter().zip(&shift).map(|(a, s)| a * s).sum::<f64>())
        .collect();
    for j in 0..n {
        let (lo, hi) = lp.bounds[j];
        if hi.is_finite() && hi > lo {
            let mut row = vec![0.0; n];
            row[j] = 1.0;
            rows.push(row);
            senses.push(Sense::Le);
            rhs.push(hi - lo);
        }
    }
    let obj_const = lp.objective.iter().zip(&shift).map(|(c, s)| c * s).sum();
    Shifted { objective: lp.objective.clone(), rows, senses, rhs, shift, obj_const }
}

/// Solve by two-phase dense simplex. Row activation keeps the tableau small
/// when the constraint set is quadratic; the returned solution satisfies
/// every row of the input within the feasibility tolerance.
pub fn solve_simplex(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    lp.validate()?;
    let s = shift_bounds(lp);
    let n = s.objective.len();
    let m = s.rows.len();
    if n == 0 {
        return Err(LpError::Invalid("no variables".into()));
    }

    // Tall all-inequality programs (the pairwise incentive sets are quadratic
    // in the type count while variables stay linear) pivot far more stably
    // through their dual, whose basis has only `n` rows. The primal solution
    // comes back as the dual's row multipliers and is verified before use.
    if m >= 4 * n && n <= 1500 && s.senses.iter().all(|x| *x == Sense::Le) {
        if let Some(sol) = solve_via_dual(&s)? {
            return Ok(sol);
        }
    }

    // Working subset: everything when small; otherwise all non-Le rows plus
    // a deterministic prefix (the builders put bounding rows first) and a
    // stride sample of the rest. Between rounds, violated rows come in and
    // clearly slack rows go out, so the dense subproblem stays small even
    // when the row set is quadratic.
    let mut active: Vec<bool> = vec![true; m];
    const ACTIVATION_THRESHOLD: usize = 1600;
    if m > ACTIVATION_THRESHOLD {
        let prefix = (4 * n).max(600).min(m);
        let stride = (m / 300).max(1);
        for (i, a) in active.iter_mut().enumerate() {
            *a = s.senses[i] != Sense::Le || i < prefix || i % stride == 0;
        }
    }
    let dropping = m > ACTIVATION_THRESHOLD;

    let debug = std::env::var_os("CAPAUCT_LP_DEBUG").is_some();
    let mut last: Option<(Vec<f64>, f64)> = None;
    for round in 0..400 {
        let idx: Vec<usize> = (0..m).filter(|i| active[*i]).collect();
        if debug {
            eprintln!("[lp] round {round}: {} active of {m}", idx.len());
        }
        let sub = solve_dense_subset(&s, &idx)?;
        match sub {
            DenseOutcome::Infeasible => {
                // Infeasible on a subset implies infeasible overall.
                return Ok(LpSolution { status: LpStatus::Infeasible, objective_value: f64::NAN, assignment: vec![] });
            }
            DenseOutcome::Stuck(rows) => {
                // Numerically dependent inequality rows add nothing the rest
                // of the active set does not already imply to within rounding;
                // retire them and recheck later against the final solution.
                if debug {
                    eprintln!("[lp] round {round}: retiring {} dependent rows", rows.len());
                }
                let mut any = false;
                for i in rows {
                    if s.senses[i] == Sense::Le && active[i] {
                        active[i] = false;
                        any = true;
                    }
                }
                if !any {
                    return Err(LpError::NumericalBreakdown);
                }
            }
            DenseOutcome::Unbounded => {
                // Unbounded on the subset: either truly unbounded or a
                // bounding row is inactive. Activate more rows and retry.
                let mut added = false;
                let mut budget = 400;
                for a in active.iter_mut() {
                    if !*a {
                        *a = true;
                        added = true;
                        budget -= 1;
                        if budget == 0 {
                            break;
                        }
                    }
                }
                if !added {
                    return Ok(LpSolution { status: LpStatus::Unbounded, objective_value: f64::INFINITY, assignment: vec![] });
                }
            }
            DenseOutcome::Optimal { y, objective, .. } => {
                // Scan every row: activate violated ones, retire slack ones.
                let mut violated: Vec<(usize, f64)> = Vec::new();
                let mut keep_binding = 0usize;
                for i in 0..m {
                    let lhs: f64 = s.rows[i].iter().zip(&y).map(|(a, x)| a * x).sum();
                    let gap = match s.senses[i] {
                        Sense::Le => lhs - s.rhs[i],
                        Sense::Ge => s.rhs[i] - lhs,
                        Sense::Eq => (lhs - s.rhs[i]).abs(),
                    };
                    if active[i] {
                        if dropping && round < 60 && s.senses[i] == Sense::Le && gap < -1e-6 {
                            active[i] = false;
                        } else {
                            keep_binding += 1;
                        }
                    } else if gap > FEAS_TOL {
                        violated.push((i, gap));
                    }
                }
                if violated.is_empty() {
                    last = Some((y, objective));
                    break;
                }
                if debug {
                    eprintln!(
                        "[lp] round {round}: obj {objective:.6}, kept {keep_binding}, {} violated (worst {:.3e})",
                        violated.len(),
                        violated.iter().map(|v| v.1).fold(0.0, f64::max)
                    );
                }
                violated.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
                for (i, _) in violated.into_iter().take(150) {
                    active[i] = true;
                }
            }
        }
    }
    let (y, objective) = last.ok_or(LpError::NumericalBreakdown)?;
    let assignment: Vec<f64> = y.iter().zip(&s.shift).map(|(v, sh)| v + sh).collect();
    Ok(LpSolution { status: LpStatus::Optimal, objective_value: objective + s.obj_const, assignment })
}

/// Solve `max c x, A x <= b, x >= 0` through its dual
/// `max -b y, -A' y <= -c, y >= 0` and recover `x` as the dual's row
/// multipliers. Returns `None` when the recovered solution fails
/// verification (the caller then falls back to the primal path).
fn solve_via_dual(s: &Shifted) -> Result<Option<LpSolution>, LpError> {
    let n = s.objective.len();
    let m = s.rows.len();
    let mut dual_rows = vec![vec![0.0f64; m]; n];
    for (i, row) in s.rows.iter().enumerate() {
        for (j, a) in row.iter().enumerate() {
            dual_rows[j][i] = -a;
        }
    }
    let dual = Shifted {
        objective: s.rhs.iter().map(|b| -b).collect(),
        rows: dual_rows,
        senses: vec![Sense::Le; n],
        rhs: s.objective.iter().map(|c| -c).collect(),
        shift: vec![0.0; m],
        obj_const: 0.0,
    };
    let idx: Vec<usize> = (0..n).collect();
    let out = match solve_dense_subset(&dual, &idx) {
        Ok(out) => out,
        // Let the primal path have its own try before giving up.
        Err(LpError::NumericalBreakdown) => return Ok(None),
        Err(e) => return Err(e),
    };
    match out {
        DenseOutcome::Infeasible => {
            // The primal is feasible whenever x = 0 is (b >= 0); an
            // infeasible dual then certifies an unbounded primal.
            if s.rhs.iter().all(|b| *b >= 0.0) {
                return Ok(Some(LpSolution {
                    status: LpStatus::Unbounded,
                    objective_value: f64::INFINITY,
                    assignment: vec![],
                }));
            }
            Ok(None)
        }
        DenseOutcome::Unbounded => Ok(Some(LpSolution {
            status: LpStatus::Infeasible,
            objective_value: f64::NAN,
            assignment: vec![],
        })),
        DenseOutcome::Stuck(_) => Ok(None),
        DenseOutcome::Optimal { objective, row_duals, .. } => {
            let value = -objective;
            let x: Vec<f64> = row_duals.iter().map(|d| d.max(0.0)).collect();
            // Verify primal feasibility and the duality gap before trusting
            // the recovery.
            let mut feasible = true;
            for (row, b) in s.rows.iter().zip(&s.rhs) {
                let lhs: f64 = row.iter().zip(&x).map(|(a, v)| a * v).sum();
                let scale = row.iter().fold(b.abs(), |acc, a| acc.max(a.abs())).max(1.0);
                if lhs - b > 2e-9 * scale {
                    feasible = false;
                    break;
                }
            }
            let cx: f64 = s.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
            let gap_ok = (cx - value).abs() <= 1e-6 * (1.0 + value.abs());
            if !feasible || !gap_ok {
                return Ok(None);
            }
            let assignment: Vec<f64> = x.iter().zip(&s.shift).map(|(v, sh)| v + sh).collect();
            Ok(Some(LpSolution {
                status: LpStatus::Optimal,
                objective_value: cx + s.obj_const,
                assignment,
            }))
        }
    }
}

enum DenseOutcome {
    Optimal { y: Vec<f64>, objective: f64, row_duals: Vec<f64> },
    Infeasible,
    Unbounded,
    /// The subproblem contains numerically dependent rows (global indices)
    /// that block progress; retire them and let the violation scan recheck.
    Stuck(Vec<usize>),
}

/// Standard-form workspace for one dense solve: `rows` holds the structural
/// plus auxiliary columns after row and column equilibration, so the tableau
/// can be rebuilt exactly from it at any basis. Solutions live in the scaled
/// variable space until multiplied back by `col_scale`.
///
/// `rhs_work` carries a deterministic sub-tolerance perturbation that breaks
/// the massive degeneracy of incentive-constraint polytopes; the final basis
/// is re-solved against the true `rhs`.
struct StandardForm {
    rows: Vec<f64>,
    rhs: Vec<f64>,
    rhs_work: Vec<f64>,
    col_scale: Vec<f64>,
    /// Cumulative row factor: stored row = row_sign * row_scale * original.
    row_scale: Vec<f64>,
    row_sign: Vec<f64>,
    /// The +e_r auxiliary column of each row (slack or artificial), from
    /// whose reduced cost the row's dual multiplier is read.
    plus_col: Vec<usize>,
    n: usize,
    m: usize,
    art0: usize,
    total: usize,
}

impl StandardForm {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.rows[r * self.total + c]
    }
}

/// Dense two-phase simplex on the selected rows of a shifted LP.
fn solve_dense_subset(s: &Shifted, idx: &[usize]) -> Result<DenseOutcome, LpError> {
    // A solve can break down on a pathological pivot path; a different
    // degeneracy perturbation routes around it. Deterministic retry ladder.
    let mut err = None;
    for attempt in 0..3 {
        match solve_dense_core(s, idx, attempt) {
            Ok(out) => return Ok(out),
            Err(e) => err = Some(e),
        }
    }
    Err(err.unwrap())
}

fn solve_dense_core(s: &Shifted, idx: &[usize], attempt: u64) -> Result<DenseOutcome, LpError> {
    let n = s.objective.len();
    let m = idx.len();

    // Normalize to rhs >= 0, equilibrate rows, and count auxiliary columns.
    let mut flip = vec![false; m];
    let mut senses: Vec<Sense> = Vec::with_capacity(m);
    for (r, &i) in idx.iter().enumerate() {
        let mut sense = s.senses[i];
        if s.rhs[i] < 0.0 {
            flip[r] = true;
            sense = match sense {
                Sense::Le => Sense::Ge,
                Sense::Ge => Sense::Le,
                Sense::Eq => Sense::Eq,
            };
        }
        senses.push(sense);
    }
    let n_slack = senses.iter().filter(|x| **x == Sense::Le).count();
    let n_surplus = senses.iter().filter(|x| **x == Sense::Ge).count();
    let n_art = senses.iter().filter(|x| matches!(x, Sense::Ge | Sense::Eq)).count();
    let slack0 = n;
    let surplus0 = slack0 + n_slack;
    let art0 = surplus0 + n_surplus;
    let total = art0 + n_art;

    let mut std = StandardForm {
        rows: vec![0.0; m * total],
        rhs: vec![0.0; m],
        rhs_work: vec![0.0; m],
        col_scale: vec![1.0; total],
        row_scale: vec![1.0; m],
        row_sign: vec![1.0; m],
        plus_col: vec![0; m],
        n,
        m,
        art0,
        total,
    };
    let mut basis: Vec<usize> = vec![0; m];
    let (mut si, mut ui, mut ai) = (0usize, 0usize, 0usize);
    for (r, &i) in idx.iter().enumerate() {
        let sgn = if flip[r] { -1.0 } else { 1.0 };
        let scale = s.rows[i].iter().fold(0.0f64, |acc, a| acc.max(a.abs())).max(s.rhs[i].abs());
        let scale = if scale > 0.0 { 1.0 / scale } else { 1.0 };
        std.row_scale[r] = scale;
        std.row_sign[r] = sgn;
        let row = &mut std.rows[r * total..(r + 1) * total];
        for (j, a) in s.rows[i].iter().enumerate() {
            row[j] = sgn * scale * a;
        }
        std.rhs[r] = sgn * scale * s.rhs[i];
        match senses[r] {
            Sense::Le => {
                row[slack0 + si] = 1.0;
                basis[r] = slack0 + si;
                std.plus_col[r] = slack0 + si;
                si += 1;
            }
            Sense::Ge => {
                row[surplus0 + ui] = -1.0;
                ui += 1;
                row[art0 + ai] = 1.0;
                basis[r] = art0 + ai;
                std.plus_col[r] = art0 + ai;
                ai += 1;
            }
            Sense::Eq => {
                row[art0 + ai] = 1.0;
                basis[r] = art0 + ai;
                std.plus_col[r] = art0 + ai;
                ai += 1;
            }
        }
    }
    // Geometric-mean equilibration of the structural block (power-of-two
    // factors, alternating rows and columns). Incentive rows mix coefficients
    // of order C with coefficients of order one grid step, and plain max
    // scaling cannot flatten both; the geometric mean does.
    for pass in 0..3 {
        for j in 0..n {
            let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
            for r in 0..m {
                let a = std.at(r, j).abs();
                if a > 0.0 {
                    lo = lo.min(a);
                    hi = hi.max(a);
                }
            }
            if hi > 0.0 {
                let target = 1.0 / (lo * hi).sqrt();
                let sc = target.log2().round().exp2();
                if sc != 1.0 {
                    std.col_scale[j] *= sc;
                    for r in 0..m {
                        std.rows[r * total + j] *= sc;
                    }
                }
            }
        }
        for r in 0..m {
            let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
            for j in 0..n {
                let a = std.at(r, j).abs();
                if a > 0.0 {
                    lo = lo.min(a);
                    hi = hi.max(a);
                }
            }
            if hi > 0.0 {
                let target = 1.0 / (lo * hi).sqrt();
                let sc = target.log2().round().exp2();
                if sc != 1.0 {
                    for j in 0..n {
                        std.rows[r * total + j] *= sc;
                    }
                    std.rhs[r] *= sc;
                    std.row_scale[r] *= sc;
                }
            }
        }
        let _ = pass;
    }
    // Break ties between degenerate vertices: every right-hand side gets its
    // own sub-tolerance offset (varied across retry attempts).
    let eps = [1e-10, 7.3e-10, 3.1e-9][attempt as usize % 3];
    for r in 0..m {
        let jitter = 1.0 + ((r as u64).wrapping_mul(2654435761).wrapping_add(attempt) % 97) as f64 / 97.0;
        std.rhs_work[r] = std.rhs[r] + eps * jitter * (1.0 + std.rhs[r].abs());
    }

    let width = total + 1;
    let mut t: Vec<f64> = vec![0.0; (m + 1) * width];
    for r in 0..m {
        t[r * width..r * width + total].copy_from_slice(&std.rows[r * total..(r + 1) * total]);
        t[r * width + total] = std.rhs_work[r];
    }

    // Lexicographic comparison order: the initial identity columns first (in
    // row order) so every zero-rhs row starts lexicographically positive.
    let mut lex_order: Vec<usize> = basis.clone();
    {
        let mut seen = vec![false; total];
        for &c in &lex_order {
            seen[c] = true;
        }
        for c in 0..total {
            if !seen[c] {
                lex_order.push(c);
            }
        }
    }

    if n_art > 0 {
        // Phase 1: maximize -sum(artificials).
        let mut cost = vec![0.0; total];
        for c in cost.iter_mut().skip(art0) {
            *c = -1.0;
        }
        install_objective(&mut t, &basis, &std, &cost);
        if let IterStatus::Stuck(rows) = iterate(&mut t, &mut basis, &std, &cost, &lex_order, |_| true)? {
            return Ok(DenseOutcome::Stuck(rows.into_iter().map(|r| idx[r]).collect()));
        }
        // The z-row constant equals the remaining artificial mass.
        let infeasibility = t[m * width + total];
        if infeasibility > 1e-7 {
            return Ok(DenseOutcome::Infeasible);
        }
    }

    // Phase 2 objective row (artificials barred from re-entering), in the
    // scaled variable space.
    let mut cost = vec![0.0; total];
    for j in 0..n {
        cost[j] = s.objective[j] * std.col_scale[j];
    }
    install_objective(&mut t, &basis, &std, &cost);
    match iterate(&mut t, &mut basis, &std, &cost, &lex_order, |c| c < art0)? {
        IterStatus::Unbounded => return Ok(DenseOutcome::Unbounded),
        IterStatus::Stuck(rows) => {
            return Ok(DenseOutcome::Stuck(rows.into_iter().map(|r| idx[r]).collect()))
        }
        IterStatus::Optimal => {}
    }

    // Read the solution off the exact basis against the true (unperturbed)
    // right-hand side rather than trusting the pivoted tableau.
    let mut y = vec![0.0; n];
    refine_basic_solution(&std, &basis, &mut y)?;
    let objective = s.objective.iter().zip(&y).map(|(c, x)| c * x).sum();
    // Dual multipliers of the original rows, from the reduced costs of each
    // row's +e_r auxiliary column.
    let mut row_duals = vec![0.0; m];
    for r in 0..m {
        let lam = -t[m * width + std.plus_col[r]];
        row_duals[r] = lam * std.row_sign[r] * std.row_scale[r];
    }
    Ok(DenseOutcome::Optimal { y, objective, row_duals })
}

/// Install a full-width cost vector into the z-row and canonicalize it
/// against the current basis (assumes the body rows are already in basic
/// form, i.e. basis columns are unit vectors).
fn install_objective(t: &mut [f64], basis: &[usize], std: &StandardForm, cost: &[f64]) {
    let (m, total) = (std.m, std.total);
    let width = total + 1;
    t[m * width..m * width + total].copy_from_slice(cost);
    t[m * width + total] = 0.0;
    for r in 0..m {
        let factor = t[m * width + basis[r]];
        if factor != 0.0 {
            for j in 0..width {
                let v = t[r * width + j];
                t[m * width + j] -= factor * v;
            }
        }
    }
}

enum IterStatus {
    Optimal,
    Unbounded,
    /// Every improving column is blocked by numerically meaningless pivots
    /// in these (local) rows, which are near-dependent on the rest.
    Stuck(Vec<usize>),
}

/// Minimum acceptable pivot magnitude under normal operation.
const PIVOT_GOOD: f64 = 1e-8;

/// Pivot loop shared by both phases. Dantzig entering rule with a permanent
/// switch to Bland's anti-cycling rule once the objective stalls; the ratio
/// test prefers large pivot elements among near-tied ratios. If no column
/// offers a sound pivot, the tableau is refactorized from the standard form
/// at the current basis; a pivot below 1e-12 that persists after that is a
/// breakdown.
fn iterate(
    t: &mut [f64],
    basis: &mut [usize],
    std: &StandardForm,
    cost: &[f64],
    lex_order: &[usize],
    allowed: impl Fn(usize) -> bool,
) -> Result<IterStatus, LpError> {
    let (m, total) = (std.m, std.total);
    let width = total + 1;
    let debug = std::env::var_os("CAPAUCT_LP_DEBUG").is_some();
    let mut bland = false;
    // `fresh` marks a tableau rebuilt from exact data with no pivots since;
    // optimality and breakdown verdicts are only issued on a fresh tableau.
    let mut fresh = false;
    let mut rebuilds = 0usize;
    let max_rebuilds = 400;
    let mut since_rebuild = 0usize;
    let rebuild_cadence = 400 + 2 * m;
    // Best (smallest) z-cell seen; the cell carries the negated objective.
    let mut best_cell = t[m * width + total];
    let mut since_improved = 0usize;
    let max_pivots = 20_000 + 80 * (m + total);
    let mut banned: Vec<usize> = Vec::new();
    let mut dust_rows: Vec<usize> = Vec::new();
    let mut pivots = 0usize;

    let mut rebuild = |t: &mut [f64], basis: &mut [usize], rebuilds: &mut usize| -> Result<(), LpError> {
        if *rebuilds >= max_rebuilds {
            return Err(LpError::NumericalBreakdown);
        }
        rebuild_tableau(t, basis, std)?;
        // Refactorization exposes accumulated drift. Small negative basics
        // are settled to zero (degenerate); a grossly infeasible basis cannot
        // be continued by primal pivoting.
        for r in 0..m {
            if t[r * width + total] < -1e-4 {
                return Err(LpError::NumericalBreakdown);
            }
            if t[r * width + total] < 0.0 {
                t[r * width + total] = 0.0;
            }
        }
        install_objective(t, basis, std, cost);
        *rebuilds += 1;
        Ok(())
    };

    while pivots < max_pivots {
        // Entering column among allowed, non-banned candidates. Reduced
        // costs in the band just above machine noise are not worth chasing
        // once the tableau is exact (their payoff is below every tolerance
        // this crate asserts), and in Bland mode they only prolong the walk.
        let enter_tol = if bland || fresh { 1e-8 } else { REDUCED_COST_TOL };
        let mut enter: Option<usize> = None;
        if bland {
            for j in 0..total {
                if allowed(j) && !banned.contains(&j) && t[m * width + j] > enter_tol {
                    enter = Some(j);
                    break;
                }
            }
        } else {
            let mut best = enter_tol;
            for j in 0..total {
                let c = t[m * width + j];
                if allowed(j) && c > best && !banned.contains(&j) {
                    best = c;
                    enter = Some(j);
                }
            }
        }
        let Some(pc) = enter else {
            if fresh {
                if banned.is_empty() {
                    return Ok(IterStatus::Optimal); // certified on exact data
                }
                // Improving columns exist but none offers a usable pivot even
                // on refactorized data: the blocking rows are numerically
                // dependent on the rest of the active set.
                if dust_rows.is_empty() {
                    return Err(LpError::NumericalBreakdown);
                }
                dust_rows.sort_unstable();
                dust_rows.dedup();
                return Ok(IterStatus::Stuck(dust_rows));
            }
            rebuild(t, basis, &mut rebuilds)?;
            fresh = true;
            since_rebuild = 0;
            banned.clear();
            dust_rows.clear();
            continue;
        };
        // Ratio test: exact minimal ratio, ties resolved lexicographically
        // (the anti-cycling guarantee; candidate rows are compared after
        // normalizing by their pivot entry along a fixed column order).
        let mut col_max = 0.0f64;
        let mut min_ratio = f64::INFINITY;
        for r in 0..m {
            let a = t[r * width + pc];
            col_max = col_max.max(a.abs());
            if a > PIVOT_TOL {
                let ratio = t[r * width + total].max(0.0) / a;
                if ratio < min_ratio {
                    min_ratio = ratio;
                }
            }
        }
        if !min_ratio.is_finite() {
            if fresh {
                return Ok(IterStatus::Unbounded);
            }
            rebuild(t, basis, &mut rebuilds)?;
            fresh = true;
            since_rebuild = 0;
            banned.clear();
            continue;
        }
        let window = 1e-11 * (1.0 + min_ratio.abs());
        let mut pr = usize::MAX;
        for r in 0..m {
            let a = t[r * width + pc];
            if a > PIVOT_TOL && t[r * width + total].max(0.0) / a - min_ratio <= window {
                if pr == usize::MAX || lex_less(t, width, lex_order, r, pr, pc) {
                    pr = r;
                }
            }
        }
        let piv = t[pr * width + pc];
        // Pivot-quality policy. The elimination multipliers are bounded by
        // col_max / piv, so a weak pivot lets rounding error grow. Sound
        // pivots pass outright; borderline ones are taken only on a freshly
        // refactorized tableau and trigger another refactorization; dust
        // pivots are refused and their rows recorded as blockers.
        let mult = col_max / piv;
        let sound = piv >= 1e-9 && mult <= 1e6;
        let borderline = piv >= 1e-10 && mult <= 1e8;
        if !sound && !(fresh && borderline) {
            if fresh && std::env::var_os("CAPAUCT_LP_DEBUG").is_some() {
                eprintln!(
                    "[lp]   dust: col {pc} cbar {:.3e} piv {piv:.3e} colmax {col_max:.3e} ratio {min_ratio:.3e} basisvar {}",
                    t[m * width + pc],
                    basis[pr]
                );
            }
            banned.push(pc);
            if fresh {
                dust_rows.push(pr);
            }
            continue;
        }
        let force_rebuild = !sound;
        pivot(t, width, pr, pc);
        basis[pr] = pc;
        // Rounding can push basic values a hair negative; settle them so the
        // ratio test never sees spurious negative entries.
        for r in 0..m {
            let b = &mut t[r * width + total];
            if *b < 0.0 && *b > -1e-11 {
                *b = 0.0;
            }
        }
        banned.clear();
        dust_rows.clear();
        fresh = false;
        pivots += 1;
        since_rebuild += 1;
        if force_rebuild {
            rebuild(t, basis, &mut rebuilds)?;
            fresh = true;
            since_rebuild = 0;
        }
        if debug && pivots % 2000 == 0 {
            eprintln!(
                "[lp]   {pivots} pivots (m={m}), z-cell {:.6}, bland={bland}, rebuilds={rebuilds}",
                t[m * width + total]
            );
        }
        let cell = t[m * width + total];
        if cell < best_cell - 1e-9 * (1.0 + best_cell.abs()) {
            best_cell = cell;
            since_improved = 0;
        } else {
            since_improved += 1;
            if since_improved > m / 2 + 100 && !bland {
                // Degenerate thrash: rebuild to exact data and fall back to
                // Bland's anti-cycling rule.
                bland = true;
                rebuild(t, basis, &mut rebuilds)?;
                fresh = true;
                since_rebuild = 0;
                since_improved = 0;
            }
        }
        if since_rebuild >= rebuild_cadence {
            // Keep accumulated rounding in check on long runs.
            rebuild(t, basis, &mut rebuilds)?;
            fresh = true;
            since_rebuild = 0;
        }
    }
    Err(LpError::NumericalBreakdown)
}

fn pivot(t: &mut [f64], width: usize, pr: usize, pc: usize) {
    let piv = t[pr * width + pc];
    let inv = 1.0 / piv;
    for j in 0..width {
        t[pr * width + j] *= inv;
    }
    t[pr * width + pc] = 1.0;
    let (before, rest) = t.split_at_mut(pr * width);
    let (prow, after) = rest.split_at_mut(width);
    let apply = |row: &mut [f64]| {
        let f = row[pc];
        if f != 0.0 {
            for (x, p) in row.iter_mut().zip(prow.iter()) {
                *x -= f * p;
            }
            row[pc] = 0.0;
        }
    };
    for row in before.chunks_exact_mut(width) {
        apply(row);
    }
    for row in after.chunks_exact_mut(width) {
        apply(row);
    }
}

/// True when candidate row `r`, normalized by its pivot entry, precedes row
/// `q` lexicographically along `lex_order`. Ties fall back to the row index,
/// keeping the choice total and deterministic.
fn lex_less(t: &[f64], width: usize, lex_order: &[usize], r: usize, q: usize, pc: usize) -> bool {
    let ar = t[r * width + pc];
    let aq = t[q * width + pc];
    for &c in lex_order {
        let dr = t[r * width + c] / ar;
        let dq = t[q * width + c] / aq;
        let scale = 1.0 + dr.abs().max(dq.abs());
        if (dr - dq).abs() > 1e-9 * scale {
            return dr < dq;
        }
    }
    r < q
}

/// Recompute tableau rows exactly as `B^{-1} [A | b]` for the current basis.
fn rebuild_tableau(t: &mut [f64], basis: &[usize], std: &StandardForm) -> Result<(), LpError> {
    let (m, total) = (std.m, std.total);
    let width = total + 1;
    let mut b_mat = vec![0.0f64; m * m];
    for (c, &var) in basis.iter().enumerate() {
        for r in 0..m {
            b_mat[r * m + c] = std.at(r, var);
        }
    }
    let lu = LuFactors::factor(&b_mat, m).ok_or(LpError::NumericalBreakdown)?;
    let mut col = vec![0.0f64; m];
    for j in 0..total {
        for (r, slot) in col.iter_mut().enumerate() {
            *slot = std.at(r, j);
        }
        let solved = lu.solve(&col);
        for r in 0..m {
            t[r * width + j] = solved[r];
        }
    }
    let solved = lu.solve(&std.rhs_work);
    for r in 0..m {
        t[r * width + total] = solved[r];
    }
    if std::env::var_os("CAPAUCT_LP_DEBUG").is_some() {
        let min_b = solved.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut unit_err = 0.0f64;
        for (c, &var) in basis.iter().enumerate() {
            for r in 0..m {
                let want = if r == c { 1.0 } else { 0.0 };
                unit_err = unit_err.max((t[r * width + var] - want).abs());
            }
        }
        eprintln!("[lp]   rebuild: min basic value {min_b:.3e}, basis unit error {unit_err:.3e}");
    }
    Ok(())
}

/// Refactorize the final basis: solve `B x_B = b` from the exact standard
/// form by dense LU with one iterative-refinement pass, replacing the
/// drifted tableau values.
fn refine_basic_solution(std: &StandardForm, basis: &[usize], y: &mut [f64]) -> Result<(), LpError> {
    let m = std.m;
    let mut b_mat = vec![0.0f64; m * m];
    for (c, &var) in basis.iter().enumerate() {
        for r in 0..m {
            b_mat[r * m + c] = std.at(r, var);
        }
    }
    let lu = LuFactors::factor(&b_mat, m).ok_or(LpError::NumericalBreakdown)?;
    let mut xb = lu.solve(&std.rhs);
    let mut resid = std.rhs.clone();
    for r in 0..m {
        for c in 0..m {
            resid[r] -= b_mat[r * m + c] * xb[c];
        }
    }
    let corr = lu.solve(&resid);
    for (x, d) in xb.iter_mut().zip(&corr) {
        *x += d;
    }
    for v in y.iter_mut() {
        *v = 0.0;
    }
    for (c, &var) in basis.iter().enumerate() {
        if var < std.n {
            y[var] = xb[c] * std.col_scale[var];
        }
    }
    Ok(())
}

struct LuFactors {
    lu: Vec<f64>,
    perm: Vec<usize>,
    n: usize,
}

impl LuFactors {
    fn factor(a: &[f64], n: usize) -> Option<Self> {
        let mut lu = a.to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut p = k;
            let mut max = lu[perm[k] * n + k].abs();
            for r in k + 1..n {
                let v = lu[perm[r] * n + k].abs();
                if v > max {
                    max = v;
                    p = r;
                }
            }
            if max < 1e-14 {
                return None;
            }
            perm.swap(k, p);
            let pk = perm[k];
            for r in k + 1..n {
                let pr = perm[r];
                let f = lu[pr * n + k] / lu[pk * n + k];
                lu[pr * n + k] = f;
                for c in k + 1..n {
                    lu[pr * n + c] -= f * lu[pk * n + c];
                }
            }
        }
        Some(LuFactors { lu, perm, n })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = vec![0.0; n];
        for r in 0..n {
            let mut v = b[self.perm[r]];
            for c in 0..r {
                v -= self.lu[self.perm[r] * n + c] * y[c];
            }
            y[r] = v;
        }
        let mut x = vec![0.0; n];
        for r in (0..n).rev() {
            let mut v = y[r];
            for c in r + 1..n {
                v -= self.lu[self.perm[r] * n + c] * x[c];
            }
            x[r] = v / self.lu[self.perm[r] * n + r];
        }
        x
    }
}

/// Capacity used inside the LPs when an agent is risk neutral: large enough
/// that the discount price never binds, finite so the coefficients stay
/// representable.
pub fn effective_capacity(top_value: f64, capacity: f64) -> f64 {
    if capacity.is_finite() {
        capacity
    } else {
        64.0 * top_value.max(1.0)
    }
}

/// Variable layout of the single-agent program: `qv_i` at `i`, `qc_i` at
/// `n + i`.
pub fn build_single_agent_lp(space: &DiscreteTypeSpace, capacity: f64) -> LinearProgram {
    let n = space.len();
    let v = &space.values;
    let c = effective_capacity(v[n - 1], capacity);
    let nv = 2 * n;
    let mut objective = vec![0.0; nv];
    for i in 0..n {
        objective[i] = space.masses[i] * v[i];
        objective[n + i] = space.masses[i] * (v[i] - c);
    }
    let mut rows = Vec::new();
    let mut senses = Vec::new();
    let mut rhs = Vec::new();
    // Service caps first: they bound the polytope, so the activation prefix
    // always contains them.
    for i in 0..n {
        let mut row = vec![0.0; nv];
        row[i] = 1.0;
        row[n + i] = 1.0;
        rows.push(row);
        senses.push(Sense::Le);
        rhs.push(1.0);
    }
    // Direct incentive constraints for every ordered pair, nearest gaps
    // first. Utility of truth i is C qc_i; deviations use the capped wealth.
    for gap in 1..n {
        for i in 0..n - gap {
            let j = i + gap;
            let up = v[j] - v[i];
            // Truth i reporting j.
            let mut row = vec![0.0; nv];
            row[n + i] -= c;
            row[j] += -up; // u_C(v_i - v_j) = v_i - v_j
            row[n + j] += c - up; // u_C(v_i - v_j + C)
            rows.push(row);
            senses.push(Sense::Le);
            rhs.push(0.0);
            // Truth j reporting i.
            let mut row = vec![0.0; nv];
            row[n + j] -= c;
            row[i] += smin(up, c); // u_C(v_j - v_i)
            row[n + i] += c; // u_C(v_j - v_i + C) = C
            rows.push(row);
            senses.push(Sense::Le);
            rhs.push(0.0);
        }
    }
    let bounds = vec![(0.0, f64::INFINITY); nv];
    LinearProgram { objective, rows, senses, rhs, bounds }
}

/// Index scheme for the ex-post program: profiles enumerate type indices in
/// mixed radix with agent 0 as the slowest digit; variables alternate
/// `(a_v, a_c)` per (profile, agent).
pub struct ExPostLayout {
    pub sizes: Vec<usize>,
    pub profiles: usize,
    pub agents: usize,
}

impl ExPostLayout {
    pub fn new(sizes: Vec<usize>) -> Self {
        let profiles = sizes.iter().product();
        let agents = sizes.len();
        ExPostLayout { sizes, profiles, agents }
    }

    pub fn decode(&self, mut p: usize) -> Vec<usize> {
        let mut out = vec![0; self.agents];
        for i in (0..self.agents).rev() {
            out[i] = p % self.sizes[i];
            p /= self.sizes[i];
        }
        out
    }

    pub fn var_v(&self, profile: usize, agent: usize) -> usize {
        2 * (profile * self.agents + agent)
    }

    pub fn var_c(&self, profile: usize, agent: usize) -> usize {
        2 * (profile * self.agents + agent) + 1
    }

    pub fn num_vars(&self) -> usize {
        2 * self.profiles * self.agents
    }
}

/// Ex-post LP over joint type profiles: per-profile service probabilities at
/// the two prices, one feasibility row per profile, and each agent's full
/// pairwise incentive constraints imposed on the mass-weighted interim
/// marginals. Objective is expected total payment.
pub fn build_multi_agent_expost_lp(
    agents: &[(DiscreteTypeSpace, f64)],
) -> Result<(LinearProgram, ExPostLayout), LpError> {
    if agents.is_empty() {
        return Err(LpError::Invalid("need at least one agent".into()));
    }
    let sizes: Vec<usize> = agents.iter().map(|(s, _)| s.len()).collect();
    let profiles: usize = sizes.iter().product();
    if profiles > 1_000_000 {
        return Err(LpError::TooLarge(format!("{profiles} joint profiles")));
    }
    let layout = ExPostLayout::new(sizes);
    if layout.num_vars() > 60_000 {
        return Err(LpError::TooLarge(format!("{} ex-post variables", layout.num_vars())));
    }
    let caps: Vec<f64> = agents
        .iter()
        .map(|(s, c)| effective_capacity(*s.values.last().unwrap(), *c))
        .collect();
    let nv = layout.num_vars();
    let na = agents.len();

    let mut prob = vec![0.0f64; profiles];
    let mut objective = vec![0.0f64; nv];
    for p in 0..profiles {
        let t = layout.decode(p);
        let w: f64 = t.iter().enumerate().map(|(i, &ti)| agents[i].0.masses[ti]).product();
        prob[p] = w;
        for i in 0..na {
            let v = agents[i].0.values[t[i]];
            objective[layout.var_v(p, i)] = w * v;
            objective[layout.var_c(p, i)] = w * (v - caps[i]);
        }
    }

    let mut rows = Vec::new();
    let mut senses = Vec::new();
    let mut rhs = Vec::new();
    // Feasibility: at most one unit of service per profile.
    for p in 0..profiles {
        let mut row = vec![0.0; nv];
        for i in 0..na {
            row[layout.var_v(p, i)] = 1.0;
            row[layout.var_c(p, i)] = 1.0;
        }
        rows.push(row);
        senses.push(Sense::Le);
        rhs.push(1.0);
    }
    // Interim incentive constraints. The marginal weight of profile p in
    // agent i's type row is the others' mass product, i.e. prob[p] divided by
    // agent i's own mass.
    for i in 0..na {
        let (space, _) = &agents[i];
        let c = caps[i];
        let n = space.len();
        for a in 0..n {
            for b in 0..n {
                if a == b {
                    continue;
                }
                let (lo, hi) = (a.min(b), a.max(b));
                let _ = (lo, hi);
                let va = space.values[a];
                let vb = space.values[b];
                // Truth a reporting b: qv_b u_C(va - vb) + qc_b u_C(va - vb + c)
                //   - c qc_a <= 0.
                let u_full = smin(va - vb, c);
                let u_disc = smin(va - vb + c, c);
                let mut row = vec![0.0; nv];
                for p in 0..profiles {
                    let t = layout.decode(p);
                    if t[i] == a {
                        let w = prob[p] / space.masses[a];
                        row[layout.var_c(p, i)] -= c * w;
                    } else if t[i] == b {
                        let w = prob[p] / space.masses[b];
                        row[layout.var_v(p, i)] += u_full * w;
                        row[layout.var_c(p, i)] += u_disc * w;
                    }
                }
                rows.push(row);
                senses.push(Sense::Le);
                rhs.push(0.0);
            }
        }
    }
    let bounds = vec![(0.0, f64::INFINITY); nv];
    Ok((LinearProgram { objective, rows, senses, rhs, bounds }, layout))
}

/// A solved instance: the optimal rule(s) and the revenue they earn.
#[derive(Debug, Clone)]
pub struct OptimalSingle {
    pub rule: TwoPricedRule<f64>,
    pub revenue: f64,
    pub lp: LinearProgram,
}

#[derive(Debug, Clone)]
pub struct OptimalMulti {
    /// Interim two-priced rule induced for each agent.
    pub rules: Vec<TwoPricedRule<f64>>,
    pub revenue: f64,
}

fn clamp_unit_pair(qv: f64, qc: f64) -> (f64, f64) {
    let mut qv = qv.clamp(0.0, 1.0);
    let mut qc = qc.clamp(0.0, 1.0);
    let sum = qv + qc;
    if sum > 1.0 {
        // Solver round-off only; shave the excess off the larger share.
        let excess = sum - 1.0;
        if qv >= qc {
            qv -= excess;
        } else {
            qc -= excess;
        }
    }
    (qv, qc)
}

/// Solve the revenue-optimal two-priced rule for a single agent.
pub fn optimal_two_priced_single(space: &DiscreteTypeSpace, capacity: f64) -> Result<OptimalSingle, LpError> {
    let lp = build_single_agent_lp(space, capacity);
    let sol = solve_simplex(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(LpError::Unsolved(sol.status));
    }
    let n = space.len();
    let c = effective_capacity(space.values[n - 1], capacity);
    let mut qv = Vec::with_capacity(n);
    let mut qc = Vec::with_capacity(n);
    for i in 0..n {
        let (a, b) = clamp_unit_pair(sol.assignment[i], sol.assignment[n + i]);
        qv.push(a);
        qc.push(b);
    }
    let rule = TwoPricedRule::new(space.values.clone(), qv, qc, c)
        .map_err(|e| LpError::Invalid(format!("solution violated rule invariants: {e}")))?;
    Ok(OptimalSingle { rule, revenue: sol.objective_value, lp })
}

/// Solve the revenue-optimal auction over an explicit joint type space and
/// return each agent's induced interim rule.
pub fn optimal_two_priced_multi(agents: &[(DiscreteTypeSpace, f64)]) -> Result<OptimalMulti, LpError> {
    let (lp, layout) = build_multi_agent_expost_lp(agents)?;
    let sol = solve_simplex(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(LpError::Unsolved(sol.status));
    }
    let mut prob = vec![0.0f64; layout.profiles];
    for p in 0..layout.profiles {
        let t = layout.decode(p);
        prob[p] = t.iter().enumerate().map(|(i, &ti)| agents[i].0.masses[ti]).product();
    }
    let mut rules = Vec::with_capacity(agents.len());
    for (i, (space, cap)) in agents.iter().enumerate() {
        let c = effective_capacity(*space.values.last().unwrap(), *cap);
        let n = space.len();
        let mut qv = vec![0.0; n];
        let mut qc = vec![0.0; n];
        for p in 0..layout.profiles {
            let t = layout.decode(p);
            let w = prob[p] / space.masses[t[i]];
            qv[t[i]] += w * sol.assignment[layout.var_v(p, i)];
            qc[t[i]] += w * sol.assignment[layout.var_c(p, i)];
        }
        for i2 in 0..n {
            let (a, b) = clamp_unit_pair(qv[i2], qc[i2]);
            qv[i2] = a;
            qc[i2] = b;
        }
        rules.push(
            TwoPricedRule::new(space.values.clone(), qv, qc, c)
                .map_err(|e| LpError::Invalid(format!("marginals violated rule invariants: {e}")))?,
        );
    }
    Ok(OptimalMulti { rules, revenue: sol.objective_value })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::Dist;

    fn lp(obj: Vec<f64>, rows: Vec<Vec<f64>>, senses: Vec<Sense>, rhs: Vec<f64>) -> LinearProgram {
        let n = obj.len();
        LinearProgram { objective: obj, rows, senses, rhs, bounds: vec![(0.0, f64::INFINITY); n] }
    }

    #[test]
    fn simplex_solves_tiny_programs() {
        // max x s.t. x <= 1.
        let sol = solve_simplex(&lp(vec![1.0], vec![vec![1.0]], vec![Sense::Le], vec![1.0])).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective_value - 1.0).abs() < 1e-9);

        // max x s.t. x >= 2, x <= 1: infeasible.
        let sol = solve_simplex(&lp(
            vec![1.0],
            vec![vec![1.0], vec![1.0]],
            vec![Sense::Ge, Sense::Le],
            vec![2.0, 1.0],
        ))
        .unwrap();
        assert_eq!(sol.status, LpStatus::Infeasible);

        // max x with no bounding rows: unbounded.
        let sol = solve_simplex(&lp(vec![1.0], vec![vec![-1.0]], vec![Sense::Le], vec![0.5])).unwrap();
        assert_eq!(sol.status, LpStatus::Unbounded);
    }

    #[test]
    fn simplex_matches_vertex_enumeration() {
        // max 3a + 2b s.t. a + b <= 4, a <= 2.
        let program = lp(
            vec![3.0, 2.0],
            vec![vec![1.0, 1.0], vec![1.0, 0.0]],
            vec![Sense::Le, Sense::Le],
            vec![4.0, 2.0],
        );
        // Oracle: enumerate constraint-pair intersections of the 2-D polytope.
        let cands = [
            (0.0, 0.0),
            (2.0, 0.0),
            (0.0, 4.0),
            (2.0, 2.0),
        ];
        let best = cands
            .iter()
            .filter(|(a, b)| a + b <= 4.0 + 1e-12 && *a <= 2.0 + 1e-12)
            .map(|(a, b)| 3.0 * a + 2.0 * b)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(best, 10.0);
        let sol = solve_simplex(&program).unwrap();
        assert!((sol.objective_value - best).abs() < 1e-9);
        assert!((sol.assignment[0] - 2.0).abs() < 1e-9);
        assert!((sol.assignment[1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn simplex_respects_equalities_and_upper_bounds() {
        let program = LinearProgram {
            objective: vec![1.0, 1.0],
            rows: vec![vec![1.0, 2.0]],
            senses: vec![Sense::Eq],
            rhs: vec![2.0],
            bounds: vec![(0.0, 0.5), (0.0, f64::INFINITY)],
        };
        let sol = solve_simplex(&program).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        // x = 0.5, y = 0.75.
        assert!((sol.objective_value - 1.25).abs() < 1e-9);
    }

    #[test]
    fn single_type_extracts_full_surplus() {
        let space = DiscreteTypeSpace::new(vec![1.0], vec![1.0]).unwrap();
        for c in [0.5, f64::INFINITY] {
            let opt = optimal_two_priced_single(&space, c).unwrap();
            assert!((opt.revenue - 1.0).abs() < 1e-7, "capacity {c}: revenue {}", opt.revenue);
        }
    }

    #[test]
    fn single_agent_lp_dominates_known_feasible_rules() {
        let er = Dist::equal_revenue(1000.0);
        let space = er.discretize(100);

        // Capacity 1: the sell-always rule is feasible, so the optimum
        // dominates its revenue on this grid (6.14 at one hundred points;
        // the fine-grid value ln 1000 needs a finer discretization).
        let sell = TwoPricedRule::sell_always(space.values.clone(), 1.0);
        let sell_rev = sell.expected_payment(&space.masses).unwrap();
        let opt = optimal_two_priced_single(&space, 1.0).unwrap();
        assert!(opt.rule.check_bic(1e-9).is_ok());
        assert!(opt.revenue >= sell_rev - 1e-6, "revenue {} vs sell-always {}", opt.revenue, sell_rev);
        assert!(opt.revenue >= 6.1, "revenue {}", opt.revenue);

        // Capacity 1000: the linear-ramp rule is feasible at about 1.55.
        let ramp = TwoPricedRule::from_fn(space.values.clone(), 1000.0, |v| {
            let qc = 0.6 * (v - 1.0) / 1000.0;
            let qq = (qc + 0.6).min(1.0);
            (qq - qc, qc)
        })
        .unwrap();
        let ramp_rev = ramp.expected_payment(&space.masses).unwrap();
        let opt = optimal_two_priced_single(&space, 1000.0).unwrap();
        assert!(opt.rule.check_bic(1e-9).is_ok());
        assert!(opt.revenue >= ramp_rev - 1e-6, "revenue {} vs ramp {}", opt.revenue, ramp_rev);
        assert!(opt.revenue >= 1.4, "revenue {}", opt.revenue);
    }

    #[test]
    fn uniform_limits_match_closed_forms() {
        let space = Dist::uniform(0.0, 1.0).discretize(50);
        // Risk-neutral limit: monopoly revenue 1/4.
        let opt = optimal_two_priced_single(&space, f64::INFINITY).unwrap();
        assert!((opt.revenue - 0.25).abs() < 0.02, "revenue {}", opt.revenue);
        // Tiny capacity: nearly full surplus extraction at v - C.
        let opt = optimal_two_priced_single(&space, 0.05).unwrap();
        assert!((opt.revenue - 0.45125).abs() < 0.03, "revenue {}", opt.revenue);
    }

    #[test]
    fn lp_optimum_weakly_decreases_with_capacity() {
        let space = Dist::uniform(0.0, 1.0).discretize(20);
        let mut last = f64::INFINITY;
        for c in [0.05, 0.25, 1.0, 4.0, 64.0] {
            let opt = optimal_two_priced_single(&space, c).unwrap();
            assert!(opt.revenue <= last + 1e-7, "capacity {c} broke monotonicity");
            last = opt.revenue;
        }
    }

    #[test]
    fn multi_agent_single_types_sell_to_someone() {
        let one = DiscreteTypeSpace::new(vec![1.0], vec![1.0]).unwrap();
        let opt = optimal_two_priced_multi(&[(one.clone(), f64::INFINITY), (one, f64::INFINITY)]).unwrap();
        assert!((opt.revenue - 1.0).abs() < 1e-7);
    }

    #[test]
    fn multi_agent_matches_deterministic_dsic_oracle() {
        // Two symmetric agents with types {1, 2} at equal mass. Brute force
        // over deterministic monotone allocations with threshold payments.
        let space = DiscreteTypeSpace::new(vec![1.0, 2.0], vec![0.5, 0.5]).unwrap();
        let best = brute_force_deterministic_dsic(&space);
        assert!((best - 1.5).abs() < 1e-12);
        let opt = optimal_two_priced_multi(&[(space.clone(), f64::INFINITY), (space.clone(), f64::INFINITY)]).unwrap();
        assert!((opt.revenue - best).abs() < 0.02, "lp {} vs oracle {best}", opt.revenue);

        // With capacity 1/2 the capacitated optimum can only be higher: the
        // risk-neutral optimum stays feasible through full-value payments.
        let opt_cap = optimal_two_priced_multi(&[(space.clone(), 0.5), (space, 0.5)]).unwrap();
        assert!(opt_cap.revenue >= best - 1e-7);
    }

    /// Enumerate deterministic DSIC auctions on a tiny symmetric 2-agent
    /// instance: every profile maps to a winner in {none, 0, 1}; per-agent
    /// monotonicity is enforced and winners pay their threshold type.
    fn brute_force_deterministic_dsic(space: &DiscreteTypeSpace) -> f64 {
        let n = space.len();
        let profiles: Vec<(usize, usize)> =
            (0..n).flat_map(|a| (0..n).map(move |b| (a, b))).collect();
        let mut best = 0.0f64;
        let count = 3usize.pow(profiles.len() as u32);
        'outer: for code in 0..count {
            let mut c = code;
            let mut winner = Vec::with_capacity(profiles.len());
            for _ in &profiles {
                winner.push(c % 3);
                c /= 3;
            }
            let win = |a: usize, b: usize| winner[a * n + b];
            // Monotone in own type for each agent.
            for other in 0..n {
                for t in 1..n {
                    if win(t - 1, other) == 1 && win(t, other) != 1 {
                        continue 'outer;
                    }
                    if win(other, t - 1) == 2 && win(other, t) != 2 {
                        continue 'outer;
                    }
                }
            }
            let mut revenue = 0.0;
            for &(a, b) in &profiles {
                let w = win(a, b);
                if w == 0 {
                    continue;
                }
                // Threshold: lowest own type that still wins.
                let (own, price) = if w == 1 {
                    let t = (0..=a).rev().take_while(|&t| win(t, b) == 1).last().unwrap();
                    (a, space.values[t])
                } else {
                    let t = (0..=b).rev().take_while(|&t| win(a, t) == 2).last().unwrap();
                    (b, space.values[t])
                };
                let _ = own;
                revenue += space.masses[a] * space.masses[b] * price;
            }
            best = best.max(revenue);
        }
        best
    }

    #[test]
    fn optimal_rules_pass_bic_and_beat_posted_prices() {
        for (dist, c) in [
            (Dist::uniform(0.0, 1.0), 0.25),
            (Dist::uniform(0.0, 1.0), 1.0),
            (Dist::exponential(1.0), 0.5),
        ] {
            let space = dist.discretize(30);
            let opt = optimal_two_priced_single(&space, c).unwrap();
            assert!(opt.rule.check_bic(1e-9).is_ok(), "{dist:?} c={c}");
            let posted = TwoPricedRule::capped_posted_price(
                space.values.clone(),
                space.values[space.len() / 2],
                c,
            );
            let posted_rev = posted.expected_payment(&space.masses).unwrap();
            assert!(opt.revenue >= posted_rev - 1e-7);
        }
    }

    #[test]
    fn fixed_format_dump_contains_all_sections() {
        let space = Dist::uniform(0.0, 1.0).discretize(3);
        let program = build_single_agent_lp(&space, 0.5);
        let dump = program.to_fixed_format();
        for section in ["NAME", "OBJSENSE", "ROWS", "COLUMNS", "RHS", "BOUNDS", "ENDATA"] {
            assert!(dump.contains(section), "missing {section}");
        }
        assert!(dump.contains("R0000000"));
        assert!(dump.contains("X0000000"));
    }
}
