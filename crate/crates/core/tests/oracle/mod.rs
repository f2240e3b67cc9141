//! Brute-force reference implementations used by the integration tests and the
//! acceptance harness. Everything is recomputed from the model definitions with
//! plain loops; only the urgency matrices and the social-state layout are
//! taken from the crate under test.

#![allow(dead_code, clippy::needless_range_loop)]

use karma_core::lp::LpProblem;
use karma_core::{Outcome, SocialState, UrgencyProcess};

/// Opponent bid distribution by a double loop over states and bids.
pub fn nu(social: &SocialState) -> Vec<f64> {
    let k_max = social.k_max();
    let mut out = vec![0.0; k_max + 1];
    for u in 0..social.n_levels() {
        for k in 0..=k_max {
            let m = social.mass(u, k);
            for b in 0..=k {
                out[b] += m * social.bids(u, k)[b];
            }
        }
    }
    out
}

/// `P(win | b)` by enumerating opponent bids.
pub fn p_win(b: usize, nu: &[f64]) -> f64 {
    nu.iter()
        .enumerate()
        .map(|(other, &p)| {
            p * if b > other {
                1.0
            } else if b == other {
                0.5
            } else {
                0.0
            }
        })
        .sum()
}

/// Average payment as a triple sum over `(u, k, b)`.
pub fn p_bar(social: &SocialState) -> f64 {
    let nu = nu(social);
    let mut total = 0.0;
    for u in 0..social.n_levels() {
        for k in 0..=social.k_max() {
            for b in 0..=k {
                total += social.mass(u, k) * social.bids(u, k)[b] * p_win(b, &nu) * b as f64;
            }
        }
    }
    total
}

/// Joint next-state distribution: sum over outcome, redistribution branch and
/// next urgency.
pub fn rho(process: &UrgencyProcess, social: &SocialState, u: usize, k: usize, b: usize) -> Vec<f64> {
    let k_max = social.k_max();
    let width = k_max + 1;
    let nu = nu(social);
    let p = p_bar(social);
    let win = p_win(b, &nu);
    let lo = p.floor();
    let hi = p.ceil();
    let branches = [(lo as usize, hi - p), (hi as usize, 1.0 - (hi - p))];
    let mut out = vec![0.0; process.n_levels() * width];
    for (outcome, p_o) in [(Outcome::Win, win), (Outcome::Lose, 1.0 - win)] {
        let base = if outcome == Outcome::Win { k - b } else { k };
        for &(gain, p_branch) in &branches {
            let kn = (base + gain).min(k_max);
            for un in 0..process.n_levels() {
                out[un * width + kn] += p_o * p_branch * process.prob(u, un, outcome);
            }
        }
    }
    out
}

/// Expected immediate reward of bidding `b` at urgency value `level`.
pub fn reward(level: f64, b: usize, nu: &[f64]) -> f64 {
    -level * (1.0 - p_win(b, nu))
}

/// Dense `(R, P)` of the policy in `social`, row-major `P`.
pub fn reward_and_kernel(process: &UrgencyProcess, social: &SocialState) -> (Vec<f64>, Vec<Vec<f64>>) {
    let nu = nu(social);
    let n = social.n_states();
    let mut r = vec![0.0; n];
    let mut p = vec![vec![0.0; n]; n];
    for u in 0..social.n_levels() {
        for k in 0..=social.k_max() {
            let s = social.index(u, k);
            for b in 0..=k {
                let w = social.bids(u, k)[b];
                if w == 0.0 {
                    continue;
                }
                r[s] += w * reward(process.level(u), b, &nu);
                for (t, q) in rho(process, social, u, k, b).into_iter().enumerate() {
                    p[s][t] += w * q;
                }
            }
        }
    }
    (r, p)
}

/// Gaussian elimination with partial pivoting for a square system.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Vec<f64> {
    let n = rhs.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        rhs.swap(col, pivot);
        let diag = a[col][col];
        assert!(diag.abs() > 1e-14, "singular system");
        for row in col + 1..n {
            let f = a[row][col] / diag;
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                a[row][c] -= f * a[col][c];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|c| a[row][c] * x[c]).sum();
        x[row] = (rhs[row] - s) / a[row][row];
    }
    x
}

/// `V = R + alpha P V` by a dense direct solve.
pub fn values(process: &UrgencyProcess, social: &SocialState, alpha: f64) -> Vec<f64> {
    let (r, p) = reward_and_kernel(process, social);
    let n = r.len();
    let a = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { 1.0 } else { 0.0 } - alpha * p[i][j])
                .collect()
        })
        .collect();
    solve_dense(a, r)
}

/// `Q[u, k, b]` by expanding over every `(u+, k+)`.
pub fn q(process: &UrgencyProcess, social: &SocialState, alpha: f64, v: &[f64], u: usize, k: usize, b: usize) -> f64 {
    let nu = nu(social);
    let next = rho(process, social, u, k, b);
    reward(process.level(u), b, &nu) + alpha * next.iter().zip(v).map(|(p, x)| p * x).sum::<f64>()
}

/// Largest gain over all states from switching to a single deterministic bid.
pub fn max_deviation_gain(process: &UrgencyProcess, social: &SocialState, alpha: f64) -> f64 {
    let v = values(process, social, alpha);
    let mut worst: f64 = 0.0;
    for u in 0..social.n_levels() {
        for k in 0..=social.k_max() {
            let qs: Vec<f64> = (0..=k).map(|b| q(process, social, alpha, &v, u, k, b)).collect();
            let current: f64 = qs.iter().zip(social.bids(u, k)).map(|(a, p)| a * p).sum();
            for &alt in &qs {
                worst = worst.max(alt - current);
            }
        }
    }
    worst
}

/// Stationary distribution of a row-stochastic matrix by lazy power iteration.
pub fn power_iteration(p: &[Vec<f64>], start: &[f64], tol: f64, max_iters: usize) -> Vec<f64> {
    let n = start.len();
    let mut d = start.to_vec();
    for _ in 0..max_iters {
        let mut next = vec![0.0; n];
        for (i, &m) in d.iter().enumerate() {
            for j in 0..n {
                next[j] += m * p[i][j];
            }
        }
        for j in 0..n {
            next[j] = 0.5 * (next[j] + d[j]);
        }
        let delta: f64 = next.iter().zip(&d).map(|(a, b)| (a - b).abs()).sum();
        d = next;
        if delta < tol {
            break;
        }
    }
    d
}

/// Long-run reward of RANDOM: the stationary law of the coin-flip urgency chain
/// from a linear solve, times the expected half loss.
pub fn random_reward(process: &UrgencyProcess) -> f64 {
    let n = process.n_levels();
    // mu (M - I) = 0 with the last equation replaced by sum(mu) = 1
    let mut a = vec![vec![0.0; n]; n];
    for j in 0..n {
        for i in 0..n {
            let m = 0.5 * process.prob(i, j, Outcome::Win) + 0.5 * process.prob(i, j, Outcome::Lose);
            a[j][i] = m - if i == j { 1.0 } else { 0.0 };
        }
    }
    let mut rhs = vec![0.0; n];
    a[n - 1] = vec![1.0; n];
    rhs[n - 1] = 1.0;
    let mu = solve_dense(a, rhs);
    -0.5 * (0..n).map(|u| mu[u] * process.level(u)).sum::<f64>()
}

/// Solves `A x = b` in the least-squares-free sense: `Some(x)` iff the columns
/// are independent and the (possibly overdetermined) system is consistent.
fn solve_columns(a: &[Vec<f64>], b: &[f64], cols: &[usize]) -> Option<Vec<f64>> {
    let m = a.len();
    let n = cols.len();
    let mut aug: Vec<Vec<f64>> = (0..m)
        .map(|i| cols.iter().map(|&c| a[i][c]).chain([b[i]]).collect())
        .collect();
    let mut row = 0;
    for col in 0..n {
        let pivot = (row..m).max_by(|&i, &j| aug[i][col].abs().total_cmp(&aug[j][col].abs()))?;
        if aug[pivot][col].abs() < 1e-10 {
            return None;
        }
        aug.swap(row, pivot);
        for r in 0..m {
            if r != row {
                let f = aug[r][col] / aug[row][col];
                for c in col..=n {
                    aug[r][c] -= f * aug[row][c];
                }
            }
        }
        row += 1;
    }
    if aug[row..].iter().any(|r| r[n].abs() > 1e-9) {
        return None;
    }
    Some((0..n).map(|i| aug[i][n] / aug[i][i]).collect())
}

fn rank(a: &[Vec<f64>]) -> usize {
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let cols = m.first().map_or(0, Vec::len);
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..m.len()).find(|&i| m[i][c].abs() > 1e-10) else {
            continue;
        };
        m.swap(r, p);
        for i in 0..m.len() {
            if i != r {
                let f = m[i][c] / m[r][c];
                for j in c..cols {
                    m[i][j] -= f * m[r][j];
                }
            }
        }
        r += 1;
    }
    r
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Maximum of the objective over all basic feasible solutions, or `None` when
/// there are none. Assumes the feasible region is bounded.
pub fn lp_vertex_enumeration(problem: &LpProblem) -> Option<(f64, Vec<f64>)> {
    let n = problem.n_vars();
    let r = rank(&problem.constraints);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for basis in combinations(n, r) {
        let Some(xb) = solve_columns(&problem.constraints, &problem.rhs, &basis) else {
            continue;
        };
        if xb.iter().any(|&v| v < -1e-12) {
            continue;
        }
        let mut x = vec![0.0; n];
        for (&c, &v) in basis.iter().zip(&xb) {
            x[c] = v;
        }
        let value: f64 = problem.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        if best.as_ref().is_none_or(|(b, _)| value > *b) {
            best = Some((value, x));
        }
    }
    best
}

/// Total variation distance `0.5 * |a - b|_1`.
pub fn tv(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}
