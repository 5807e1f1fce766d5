//! Independent check of the simplex solver on random small programs.
//!
//! The oracle never pivots: it converts the program to standard equality
//! form over exact rationals, enumerates every candidate basis by brute
//! force, collects all basic feasible solutions (vertices), and looks
//! for improving extreme rays of the recession cone.  A pointed feasible
//! region always contains a vertex, and an unbounded objective always
//! shows up on an extreme ray, so the oracle classifies every instance
//! completely — then the float solve, the exact solve, and the returned
//! duals all have to agree with it.

use kwise::lp::{solve, solve_exact, BigRational, LinearProgram, LpStatus, Sense};
use kwise::sampling::{gen_below, trial_rng};
use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};

fn rat(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

/// Standard equality form `A z = b, z >= 0` with costs on every column.
struct StdForm {
    a: Vec<Vec<BigRational>>, // row major, nrows x ncols
    b: Vec<BigRational>,
    cost: Vec<BigRational>,
    ncols: usize,
}

fn standardize(lp: &LinearProgram) -> StdForm {
    let nv = lp.nvars();
    assert!(
        lp.free.iter().all(|f| !f),
        "oracle instances use nonnegative variables only"
    );
    let slacks = lp.senses.iter().filter(|s| **s != Sense::Eq).count();
    let ncols = nv + slacks;
    let mut a = Vec::with_capacity(lp.rows.len());
    let mut b = Vec::with_capacity(lp.rows.len());
    let mut slack_at = nv;
    for (i, row) in lp.rows.iter().enumerate() {
        let mut arow: Vec<BigRational> = Vec::with_capacity(ncols);
        for v in row {
            arow.push(rat(*v as i64));
        }
        arow.resize(ncols, BigRational::zero());
        match lp.senses[i] {
            Sense::Le => {
                arow[slack_at] = rat(1);
                slack_at += 1;
            }
            Sense::Ge => {
                arow[slack_at] = rat(-1);
                slack_at += 1;
            }
            Sense::Eq => {}
        }
        a.push(arow);
        b.push(rat(lp.rhs[i] as i64));
    }
    let mut cost: Vec<BigRational> = lp.minimize.iter().map(|c| rat(*c as i64)).collect();
    cost.resize(ncols, BigRational::zero());
    StdForm { a, b, cost, ncols }
}

/// Exact Gauss-Jordan solve of the square system formed by `cols`;
/// returns `B^{-1} rhs` for each requested right-hand side, or `None`
/// when the basis is singular.
fn basis_solve(
    std_form: &StdForm,
    cols: &[usize],
    rhss: &[Vec<BigRational>],
) -> Option<Vec<Vec<BigRational>>> {
    let r = std_form.a.len();
    assert_eq!(cols.len(), r);
    let extra = rhss.len();
    // augmented matrix r x (r + extra)
    let mut m: Vec<Vec<BigRational>> = (0..r)
        .map(|i| {
            let mut row: Vec<BigRational> =
                cols.iter().map(|&j| std_form.a[i][j].clone()).collect();
            for rhs in rhss {
                row.push(rhs[i].clone());
            }
            row
        })
        .collect();
    for pivot in 0..r {
        let hit = (pivot..r).find(|&i| !m[i][pivot].is_zero())?;
        m.swap(pivot, hit);
        let p = m[pivot][pivot].clone();
        for v in m[pivot].iter_mut() {
            *v = &*v / &p;
        }
        for i in 0..r {
            if i != pivot && !m[i][pivot].is_zero() {
                let f = m[i][pivot].clone();
                for j in 0..(r + extra) {
                    let sub = &f * &m[pivot][j];
                    m[i][j] = &m[i][j] - &sub;
                }
            }
        }
    }
    let mut out = Vec::with_capacity(extra);
    for e in 0..extra {
        out.push((0..r).map(|i| m[i][r + e].clone()).collect());
    }
    Some(out)
}

struct OracleVerdict {
    status: LpStatus,
    optimum: Option<BigRational>,
}

/// Complete classification by brute force over bases.
fn oracle(lp: &LinearProgram) -> OracleVerdict {
    let sf = standardize(lp);
    let r = sf.a.len();
    assert!(r <= sf.ncols, "oracle instances keep rows <= columns");

    let mut best: Option<BigRational> = None;
    let mut feasible = false;
    let mut improving_ray = false;

    let mut cols: Vec<usize> = (0..r).collect();
    loop {
        // candidate basis `cols`
        let col_rhs: Vec<Vec<BigRational>> = std::iter::once(sf.b.clone())
            .chain(
                (0..sf.ncols)
                    .filter(|j| !cols.contains(j))
                    .map(|j| (0..r).map(|i| sf.a[i][j].clone()).collect()),
            )
            .collect();
        if let Some(solved) = basis_solve(&sf, &cols, &col_rhs) {
            let xb = &solved[0];
            if xb.iter().all(|v| !v.is_negative()) {
                feasible = true;
                let obj: BigRational = cols
                    .iter()
                    .zip(xb)
                    .map(|(&j, v)| &sf.cost[j] * v)
                    .sum();
                best = Some(match best {
                    Some(b) if b <= obj => b,
                    _ => obj,
                });
            }
            // extreme rays: direction with one entering nonbasic column
            let nonbasic: Vec<usize> = (0..sf.ncols).filter(|j| !cols.contains(j)).collect();
            for (idx, &j) in nonbasic.iter().enumerate() {
                let dir_b = &solved[1 + idx]; // B^{-1} A_j
                if dir_b.iter().all(|v| !v.is_positive()) {
                    // d_basis = -B^{-1} A_j >= 0, d_j = 1: recession direction
                    let along: BigRational = cols
                        .iter()
                        .zip(dir_b)
                        .map(|(&bcol, v)| &sf.cost[bcol] * v)
                        .sum();
                    let reduced = &sf.cost[j] - &along;
                    if reduced.is_negative() {
                        improving_ray = true;
                    }
                }
            }
        }
        // next combination
        let mut i = r;
        loop {
            if i == 0 {
                cols.clear();
                break;
            }
            i -= 1;
            if cols[i] != i + sf.ncols - r {
                cols[i] += 1;
                for l in (i + 1)..r {
                    cols[l] = cols[l - 1] + 1;
                }
                break;
            }
        }
        if cols.is_empty() {
            break;
        }
    }

    if !feasible {
        OracleVerdict {
            status: LpStatus::Infeasible,
            optimum: None,
        }
    } else if improving_ray {
        OracleVerdict {
            status: LpStatus::Unbounded,
            optimum: None,
        }
    } else {
        OracleVerdict {
            status: LpStatus::Optimal,
            optimum: best,
        }
    }
}

/// Primal feasibility, dual sign/feasibility, strong duality, and
/// complementary slackness of a float solution, all within tolerance.
fn check_optimal_certificates(lp: &LinearProgram, sol: &kwise::lp::LpSolution) {
    let tol = 1e-6;
    for (i, row) in lp.rows.iter().enumerate() {
        let lhs: f64 = row.iter().zip(&sol.x).map(|(a, x)| a * x).sum();
        match lp.senses[i] {
            Sense::Le => assert!(lhs <= lp.rhs[i] + tol, "row {i} violated: {lhs}"),
            Sense::Ge => assert!(lhs >= lp.rhs[i] - tol, "row {i} violated: {lhs}"),
            Sense::Eq => assert!((lhs - lp.rhs[i]).abs() <= tol, "row {i} violated: {lhs}"),
        }
        match lp.senses[i] {
            Sense::Ge => assert!(sol.duals[i] >= -tol, "dual sign row {i}: {}", sol.duals[i]),
            Sense::Le => assert!(sol.duals[i] <= tol, "dual sign row {i}: {}", sol.duals[i]),
            Sense::Eq => {}
        }
    }
    for x in &sol.x {
        assert!(*x >= -tol, "negative variable {x}");
    }
    // reduced costs and complementary slackness
    for j in 0..lp.nvars() {
        let along: f64 = (0..lp.rows.len())
            .map(|i| sol.duals[i] * lp.rows[i][j])
            .sum();
        let reduced = lp.minimize[j] - along;
        assert!(reduced >= -tol, "dual infeasible at column {j}: {reduced}");
        if sol.x[j] > tol {
            assert!(
                reduced.abs() <= tol,
                "slackness broken at column {j}: x={} reduced={}",
                sol.x[j],
                reduced
            );
        }
    }
    for i in 0..lp.rows.len() {
        let lhs: f64 = lp.rows[i].iter().zip(&sol.x).map(|(a, x)| a * x).sum();
        if (lhs - lp.rhs[i]).abs() > tol {
            assert!(
                sol.duals[i].abs() <= tol,
                "slackness broken at row {i}: slack={} dual={}",
                lhs - lp.rhs[i],
                sol.duals[i]
            );
        }
    }
    let dual_obj: f64 = sol.duals.iter().zip(&lp.rhs).map(|(y, b)| y * b).sum();
    assert!(
        (dual_obj - sol.objective).abs() <= 1e-6 * (1.0 + sol.objective.abs()),
        "strong duality gap: primal {} dual {}",
        sol.objective,
        dual_obj
    );
}

fn random_program(seed: u64) -> LinearProgram {
    let mut rng = trial_rng(seed);
    let mut small = |lo: i64, hi: i64| -> f64 {
        let span = (hi - lo + 1) as u64;
        (lo + gen_below(&mut rng, span) as i64) as f64
    };
    let nv = 2 + (seed % 3) as usize; // 2..=4
    let nr = 2 + (seed / 3 % 4) as usize; // 2..=5
    let mut lp = LinearProgram::new(nv);
    for c in lp.minimize.iter_mut() {
        *c = small(-3, 3);
    }
    for _ in 0..nr {
        let coeffs: Vec<f64> = (0..nv).map(|_| small(-3, 3)).collect();
        let sense = match small(0, 9) as i64 {
            0..=4 => Sense::Le,
            5..=8 => Sense::Ge,
            _ => Sense::Eq,
        };
        lp.push_row(coeffs, sense, small(-4, 4));
    }
    lp
}

#[test]
fn random_programs_match_vertex_enumeration() {
    let mut counts = [0usize; 3];
    for seed in 0..240u64 {
        let lp = random_program(seed);
        let want = oracle(&lp);
        let float = solve(&lp).expect("float solve");
        let exact = solve_exact(&lp).expect("exact solve");

        assert_eq!(float.status, want.status, "float status at seed {seed}");
        assert_eq!(exact.status, want.status, "exact status at seed {seed}");
        match want.status {
            LpStatus::Optimal => {
                counts[0] += 1;
                let vstar = want.optimum.clone().expect("optimum exists");
                assert_eq!(
                    exact.objective, vstar,
                    "exact objective differs from vertex minimum at seed {seed}"
                );
                let vf = vstar.to_f64().expect("small rational");
                assert!(
                    (float.objective - vf).abs() <= 1e-6 * (1.0 + vf.abs()),
                    "float objective {} vs vertex minimum {} at seed {seed}",
                    float.objective,
                    vf
                );
                check_optimal_certificates(&lp, &float);
            }
            LpStatus::Infeasible => counts[1] += 1,
            LpStatus::Unbounded => counts[2] += 1,
        }
    }
    println!(
        "oracle agreement on 240 programs: {} optimal, {} infeasible, {} unbounded",
        counts[0], counts[1], counts[2]
    );
    // the instance family genuinely exercises all three outcomes
    assert!(counts.iter().all(|c| *c > 10), "degenerate family {counts:?}");
}

#[test]
fn known_programs_solve_exactly() {
    // max x + y over the simplex: minimum of -(x + y) is -1
    let mut lp = LinearProgram::new(2);
    lp.minimize = vec![-1.0, -1.0];
    lp.push_row(vec![1.0, 1.0], Sense::Le, 1.0);
    let sol = solve(&lp).unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    assert!((sol.objective + 1.0).abs() < 1e-9);

    // x >= 3 and x <= 2 cannot both hold
    let mut lp = LinearProgram::new(1);
    lp.minimize = vec![1.0];
    lp.push_row(vec![1.0], Sense::Ge, 3.0);
    lp.push_row(vec![1.0], Sense::Le, 2.0);
    assert_eq!(solve(&lp).unwrap().status, LpStatus::Infeasible);

    // minimize -x with x unconstrained above
    let mut lp = LinearProgram::new(1);
    lp.minimize = vec![-1.0];
    lp.push_row(vec![1.0], Sense::Ge, 0.0);
    assert_eq!(solve(&lp).unwrap().status, LpStatus::Unbounded);

    // one free variable: minimize x - y with x + 2y = 4, x >= 0, y free
    // substituting y = (4 - x)/2 gives (3/2)x - 2, minimized at x = 0
    let mut lp = LinearProgram::new(2);
    lp.minimize = vec![1.0, -1.0];
    lp.free[1] = true;
    lp.push_row(vec![1.0, 2.0], Sense::Eq, 4.0);
    let sol = solve(&lp).unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    assert!((sol.objective + 2.0).abs() < 1e-9, "{}", sol.objective);
    assert!((sol.x[1] - 2.0).abs() < 1e-9);
}
