//! Dense two-phase simplex over an abstract ordered field.
//!
//! Instances here are small (at most a few thousand rows and columns),
//! so a dense tableau beats sparse machinery.  The entering rule is
//! Dantzig's most-negative reduced cost; ties in the ratio test are
//! broken lexicographically, comparing the candidate rows column by
//! column from the right end of the tableau.  The slack/artificial
//! identity block lives there, so every starting row is lexicographically
//! positive and the usual argument rules out cycling even on the heavily
//! degenerate distance programs this crate produces.  Rows are pre-scaled
//! to unit max-norm; the feasibility and duality-gap tolerances below are
//! absolute on the scaled data.
//!
//! The same pivoting code instantiated at `BigRational` gives an exact
//! re-solve used by the test suite to validate float results on tiny
//! instances.

use num_bigint::BigInt;
use num_rational::Ratio;
use num_traits::{One, Signed, Zero};
use std::fmt::Debug;
use std::ops::Div;
use thiserror::Error;

pub type BigRational = Ratio<BigInt>;

/// Feasibility tolerance on scaled rows.
pub const FEAS_TOL: f64 = 1e-9;
/// Accepted primal-dual objective gap at optimality.
pub const GAP_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum LpError {
    #[error("inconsistent shape: {0}")]
    Shape(String),
    #[error("iteration limit of {limit} pivots reached")]
    IterationLimit { limit: usize },
    #[error("coefficient at row {row}, column {col} is not finite")]
    NotFinite { row: usize, col: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// `minimize c.x  subject to  rows[i].x (sense[i]) rhs[i]`, with every
/// variable nonnegative unless its `free` flag is set.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub minimize: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
    pub senses: Vec<Sense>,
    pub free: Vec<bool>,
}

impl LinearProgram {
    pub fn new(nvars: usize) -> Self {
        LinearProgram {
            minimize: vec![0.0; nvars],
            rows: Vec::new(),
            rhs: Vec::new(),
            senses: Vec::new(),
            free: vec![false; nvars],
        }
    }

    pub fn push_row(&mut self, coeffs: Vec<f64>, sense: Sense, rhs: f64) {
        self.rows.push(coeffs);
        self.senses.push(sense);
        self.rhs.push(rhs);
    }

    pub fn nvars(&self) -> usize {
        self.minimize.len()
    }

    fn validate(&self) -> Result<(), LpError> {
        let nv = self.nvars();
        if self.free.len() != nv {
            return Err(LpError::Shape(format!(
                "free flags: {} for {} variables",
                self.free.len(),
                nv
            )));
        }
        if self.rows.len() != self.rhs.len() || self.rows.len() != self.senses.len() {
            return Err(LpError::Shape("rows/rhs/senses lengths differ".into()));
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != nv {
                return Err(LpError::Shape(format!("row {i} has {} coefficients", row.len())));
            }
            for (j, v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(LpError::NotFinite { row: i, col: j });
                }
            }
            if !self.rhs[i].is_finite() {
                return Err(LpError::NotFinite { row: i, col: nv });
            }
        }
        Ok(())
    }
}

/// Result of a float solve.  `x`, `objective`, `duals` are only
/// meaningful when `status == Optimal`; `duals[i]` belongs to row `i` of
/// the original program (nonnegative for `Ge` rows, nonpositive for `Le`,
/// free for `Eq`).
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub duals: Vec<f64>,
}

/// Result of an exact rational solve.
#[derive(Debug, Clone)]
pub struct ExactSolution {
    pub status: LpStatus,
    pub x: Vec<BigRational>,
    pub objective: BigRational,
}

/// The scalar requirements of the pivoting code.
pub trait SimplexScalar:
    Clone + PartialOrd + Debug + Zero + One + Signed + Div<Output = Self>
{
    /// Entries with absolute value at or below this are treated as zero.
    fn pivot_tol() -> Self;
    /// Threshold on the phase-1 objective for declaring feasibility.
    fn feas_tol() -> Self;
}

impl SimplexScalar for f64 {
    fn pivot_tol() -> f64 {
        1e-9
    }
    fn feas_tol() -> f64 {
        FEAS_TOL
    }
}

impl SimplexScalar for BigRational {
    fn pivot_tol() -> BigRational {
        BigRational::zero()
    }
    fn feas_tol() -> BigRational {
        BigRational::zero()
    }
}

struct GenericProgram<T> {
    minimize: Vec<T>,
    rows: Vec<Vec<T>>,
    rhs: Vec<T>,
    senses: Vec<Sense>,
    free: Vec<bool>,
}

struct GenericSolution<T> {
    status: LpStatus,
    x: Vec<T>,
    objective: T,
    duals: Vec<T>,
}

struct Tableau<T> {
    nrows: usize,
    ncols: usize,
    width: usize, // ncols + 1, last column is the rhs
    cells: Vec<T>,
    basis: Vec<usize>,
    red: Vec<T>, // reduced costs; red[ncols] tracks -objective
    pivots: usize,
    limit: usize,
}

enum StepOutcome {
    Optimal,
    Unbounded,
}

impl<T: SimplexScalar> Tableau<T> {
    fn at(&self, i: usize, j: usize) -> &T {
        &self.cells[i * self.width + j]
    }

    fn init_reduced(&mut self, costs: &[T]) {
        let mut red = vec![T::zero(); self.width];
        red[..self.ncols].clone_from_slice(&costs[..self.ncols]);
        for i in 0..self.nrows {
            let cb = costs[self.basis[i]].clone();
            if cb.is_zero() {
                continue;
            }
            for j in 0..self.width {
                let delta = cb.clone() * self.at(i, j).clone();
                red[j] = red[j].clone() - delta;
            }
        }
        self.red = red;
    }

    fn objective(&self) -> T {
        -self.red[self.ncols].clone()
    }

    fn pivot(&mut self, entering: usize, leaving_row: usize) {
        let w = self.width;
        let pivot_val = self.at(leaving_row, entering).clone();
        let row_start = leaving_row * w;
        for j in 0..w {
            let v = self.cells[row_start + j].clone() / pivot_val.clone();
            self.cells[row_start + j] = v;
        }
        for i in 0..self.nrows {
            if i == leaving_row {
                continue;
            }
            let factor = self.at(i, entering).clone();
            if factor.is_zero() {
                continue;
            }
            let target = i * w;
            for j in 0..w {
                let delta = factor.clone() * self.cells[row_start + j].clone();
                self.cells[target + j] = self.cells[target + j].clone() - delta;
            }
            // wipe residue so later zero tests are clean
            self.cells[target + entering] = T::zero();
        }
        let factor = self.red[entering].clone();
        if !factor.is_zero() {
            for j in 0..w {
                let delta = factor.clone() * self.cells[row_start + j].clone();
                self.red[j] = self.red[j].clone() - delta;
            }
            self.red[entering] = T::zero();
        }
        self.basis[leaving_row] = entering;
        self.pivots += 1;
    }

    /// True when row `i` beats row `l` in the lexicographic ratio
    /// comparison for entering column `e`: the vectors `row / pivot`
    /// are compared column by column starting from the right end of the
    /// tableau, where the slack/artificial identity block guarantees the
    /// comparison resolves.
    fn lex_smaller(&self, i: usize, l: usize, e: usize) -> bool {
        let ai = self.at(i, e).clone();
        let al = self.at(l, e).clone();
        for col in (0..self.ncols).rev() {
            let ri = self.at(i, col).clone() / ai.clone();
            let rl = self.at(l, col).clone() / al.clone();
            if ri < rl {
                return true;
            }
            if ri > rl {
                return false;
            }
        }
        false
    }

    /// Runs pivots until optimal/unbounded under the current reduced costs.
    /// `allowed` masks columns permitted to enter.
    fn iterate(&mut self, allowed: &[bool]) -> Result<StepOutcome, LpError> {
        let tol = T::pivot_tol();
        loop {
            if self.pivots >= self.limit {
                return Err(LpError::IterationLimit { limit: self.limit });
            }
            // Dantzig: most negative reduced cost.
            let mut best: Option<(usize, T)> = None;
            for j in 0..self.ncols {
                if !allowed[j] {
                    continue;
                }
                let r = self.red[j].clone();
                if r < -tol.clone() {
                    match &best {
                        Some((_, cur)) if r >= *cur => {}
                        _ => best = Some((j, r)),
                    }
                }
            }
            let Some(e) = best.map(|(j, _)| j) else {
                return Ok(StepOutcome::Optimal);
            };

            let mut leave: Option<(usize, T)> = None; // (row, ratio)
            for i in 0..self.nrows {
                let a = self.at(i, e).clone();
                if a <= tol {
                    continue;
                }
                let ratio = self.at(i, self.ncols).clone() / a;
                match &leave {
                    None => leave = Some((i, ratio)),
                    Some((li, cur)) => {
                        let near = (ratio.clone() - cur.clone()).abs()
                            <= tol.clone() * (T::one() + cur.abs());
                        if near {
                            if self.lex_smaller(i, *li, e) {
                                leave = Some((i, ratio));
                            }
                        } else if ratio < *cur {
                            leave = Some((i, ratio));
                        }
                    }
                }
            }
            let Some((l, _)) = leave else {
                return Ok(StepOutcome::Unbounded);
            };
            self.pivot(e, l);
        }
    }
}

fn solve_generic<T: SimplexScalar>(lp: &GenericProgram<T>) -> Result<GenericSolution<T>, LpError> {
    let nvars = lp.minimize.len();
    let nrows = lp.rows.len();

    // Row scaling to unit max-norm (coefficients and rhs), folding in a
    // sign so every scaled rhs is nonnegative.  `alpha[i]` maps duals of
    // the scaled system back to the original rows.
    let mut scaled_rows: Vec<Vec<T>> = Vec::with_capacity(nrows);
    let mut scaled_rhs: Vec<T> = Vec::with_capacity(nrows);
    let mut senses: Vec<Sense> = Vec::with_capacity(nrows);
    let mut alpha: Vec<T> = Vec::with_capacity(nrows);
    for i in 0..nrows {
        let mut norm = lp.rhs[i].abs();
        for v in &lp.rows[i] {
            let a = v.abs();
            if a > norm {
                norm = a;
            }
        }
        let scale = if norm.is_zero() {
            T::one()
        } else {
            T::one() / norm
        };
        let mut row: Vec<T> = lp.rows[i].iter().map(|v| v.clone() * scale.clone()).collect();
        let mut rhs = lp.rhs[i].clone() * scale.clone();
        let mut sense = lp.senses[i];
        let mut a = scale;
        if rhs < T::zero() {
            for v in &mut row {
                *v = -v.clone();
            }
            rhs = -rhs;
            a = -a;
            sense = match sense {
                Sense::Le => Sense::Ge,
                Sense::Ge => Sense::Le,
                Sense::Eq => Sense::Eq,
            };
        }
        scaled_rows.push(row);
        scaled_rhs.push(rhs);
        senses.push(sense);
        alpha.push(a);
    }

    // Expanded columns: nonnegative part for every variable, a negated
    // twin for free variables, then one slack per inequality, then one
    // artificial per row.
    let mut col_of_var: Vec<(usize, Option<usize>)> = Vec::with_capacity(nvars);
    let mut expanded_cost: Vec<T> = Vec::new();
    for j in 0..nvars {
        let pos = expanded_cost.len();
        expanded_cost.push(lp.minimize[j].clone());
        let neg = if lp.free[j] {
            expanded_cost.push(-lp.minimize[j].clone());
            Some(pos + 1)
        } else {
            None
        };
        col_of_var.push((pos, neg));
    }
    let n_ex = expanded_cost.len();
    let n_slack = senses.iter().filter(|s| **s != Sense::Eq).count();
    let art_start = n_ex + n_slack;
    let ncols = art_start + nrows;
    let width = ncols + 1;

    let mut cells = vec![T::zero(); nrows * width];
    {
        let mut slack_idx = 0usize;
        for i in 0..nrows {
            for j in 0..nvars {
                let v = scaled_rows[i][j].clone();
                let (pos, neg) = &col_of_var[j];
                cells[i * width + *pos] = v.clone();
                if let Some(ncol) = neg {
                    cells[i * width + *ncol] = -v;
                }
            }
            match senses[i] {
                Sense::Le => {
                    cells[i * width + n_ex + slack_idx] = T::one();
                    slack_idx += 1;
                }
                Sense::Ge => {
                    cells[i * width + n_ex + slack_idx] = -T::one();
                    slack_idx += 1;
                }
                Sense::Eq => {}
            }
            cells[i * width + art_start + i] = T::one();
            cells[i * width + ncols] = scaled_rhs[i].clone();
        }
    }

    let limit = 2000 + 100 * (nrows + ncols);
    let mut tab = Tableau {
        nrows,
        ncols,
        width,
        cells,
        basis: (art_start..art_start + nrows).collect(),
        red: vec![T::zero(); width],
        pivots: 0,
        limit,
    };

    // Phase 1: minimize the sum of artificials.
    let mut phase1_cost = vec![T::zero(); ncols];
    for c in phase1_cost.iter_mut().skip(art_start) {
        *c = T::one();
    }
    tab.init_reduced(&phase1_cost);
    let allowed1: Vec<bool> = (0..ncols).map(|j| j < art_start).collect();
    match tab.iterate(&allowed1)? {
        StepOutcome::Optimal => {}
        StepOutcome::Unbounded => unreachable!("phase-1 objective is bounded below by zero"),
    }
    if tab.objective() > T::feas_tol() {
        return Ok(GenericSolution {
            status: LpStatus::Infeasible,
            x: Vec::new(),
            objective: T::zero(),
            duals: Vec::new(),
        });
    }

    // Drive leftover artificials out of the basis where the row allows;
    // rows that do not allow it are redundant and keep a zero artificial.
    for i in 0..nrows {
        if tab.basis[i] < art_start {
            continue;
        }
        let tol = T::pivot_tol();
        let entering = (0..art_start).find(|&j| tab.at(i, j).abs() > tol);
        if let Some(e) = entering {
            tab.pivot(e, i);
        }
    }

    // Phase 2 on the real objective, artificials barred from entering.
    let mut phase2_cost = vec![T::zero(); ncols];
    phase2_cost[..n_ex].clone_from_slice(&expanded_cost[..n_ex]);
    tab.init_reduced(&phase2_cost);
    let allowed2: Vec<bool> = (0..ncols).map(|j| j < art_start).collect();
    match tab.iterate(&allowed2)? {
        StepOutcome::Unbounded => {
            return Ok(GenericSolution {
                status: LpStatus::Unbounded,
                x: Vec::new(),
                objective: T::zero(),
                duals: Vec::new(),
            })
        }
        StepOutcome::Optimal => {}
    }

    let mut expanded_x = vec![T::zero(); ncols];
    for i in 0..nrows {
        expanded_x[tab.basis[i]] = tab.at(i, ncols).clone();
    }
    let mut x = Vec::with_capacity(nvars);
    for (pos, neg) in &col_of_var {
        let v = match neg {
            Some(ncol) => expanded_x[*pos].clone() - expanded_x[*ncol].clone(),
            None => expanded_x[*pos].clone(),
        };
        x.push(v);
    }
    let mut objective = T::zero();
    for j in 0..nvars {
        objective = objective + lp.minimize[j].clone() * x[j].clone();
    }
    // Duals: the reduced cost of artificial i is -y_i in the scaled
    // system; alpha maps back to the original row.
    let duals = (0..nrows)
        .map(|i| -tab.red[art_start + i].clone() * alpha[i].clone())
        .collect();

    Ok(GenericSolution {
        status: LpStatus::Optimal,
        x,
        objective,
        duals,
    })
}

/// Solves in floating point.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    lp.validate()?;
    let generic = GenericProgram {
        minimize: lp.minimize.clone(),
        rows: lp.rows.clone(),
        rhs: lp.rhs.clone(),
        senses: lp.senses.clone(),
        free: lp.free.clone(),
    };
    let sol = solve_generic(&generic)?;
    Ok(LpSolution {
        status: sol.status,
        x: sol.x,
        objective: sol.objective,
        duals: sol.duals,
    })
}

/// Feasibility check: a zero-objective solve.
pub fn check_feasible(lp: &LinearProgram) -> Result<bool, LpError> {
    let mut probe = lp.clone();
    probe.minimize = vec![0.0; lp.nvars()];
    Ok(solve(&probe)?.status == LpStatus::Optimal)
}

fn rational(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite float")
}

/// Exact rational re-solve of the same program; every f64 coefficient is
/// converted exactly.  Meant for validating float results on tiny
/// instances; cost grows quickly with size.
pub fn solve_exact(lp: &LinearProgram) -> Result<ExactSolution, LpError> {
    lp.validate()?;
    let generic = GenericProgram {
        minimize: lp.minimize.iter().copied().map(rational).collect(),
        rows: lp
            .rows
            .iter()
            .map(|r| r.iter().copied().map(rational).collect())
            .collect(),
        rhs: lp.rhs.iter().copied().map(rational).collect(),
        senses: lp.senses.clone(),
        free: lp.free.clone(),
    };
    let sol = solve_generic(&generic)?;
    Ok(ExactSolution {
        status: sol.status,
        x: sol.x,
        objective: sol.objective,
    })
}
