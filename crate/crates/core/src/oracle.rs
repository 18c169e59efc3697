//! Brute-force numerical checks of the closed-form bounds on small
//! alphabets.
//!
//! [`brute_force_sup`] searches over joints `P_{X,Y}` with a fixed marginal
//! and a list-error budget. Each restart fixes a list for every `y`, which
//! makes the budget a single linear constraint; projected gradient ascent
//! then runs on the concave objective `sum_y P_Y(y) phi(P_{X|Y=y})`. The
//! best value is compared against a family of structured candidates whose
//! conditionals are rearrangements of one distribution.

use crate::error::{Error, Result};
use crate::errprob::{feasible_range, list_map_error, marginal_list_error, YCard};
use crate::extremal::{endpoint_achievers, extremal_joint_type1, extremal_joint_type2};
use crate::measures::{conditional_measure, JointDist, PhiFunctional, PhiKind};
use crate::numeric::{eta, kahan_sum, GRID};
use crate::pmf::{variational_distance, Pmf};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::Serialize;

const MAX_SUPPORT: usize = 8;
const MAX_Y: usize = 6;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleConfig {
    pub restarts: usize,
    pub seed: u64,
    pub max_iters: usize,
    pub step_tolerance: f64,
    /// Grid denominator for the variational-ball search.
    pub grid_resolution: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { restarts: 64, seed: 0, max_iters: 500, step_tolerance: 1e-12, grid_resolution: 200 }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::InvalidParameter("restarts must be at least 1".into()));
        }
        if self.grid_resolution == 0 {
            return Err(Error::InvalidParameter("grid resolution must be positive".into()));
        }
        Ok(())
    }
}

/// Best value found and the joint that attains it.
#[derive(Clone, Debug, Serialize)]
pub struct OracleResult {
    pub value: f64,
    pub joint: JointDist,
}

/// Derivatives `g1'(u)` and `g2'(s)` of the separable form.
fn separable_derivatives(phi: &PhiFunctional, u: f64, s: f64) -> (f64, f64) {
    let u = u.max(1e-12);
    match phi.kind {
        PhiKind::Shannon => (-u.ln() - 1.0, 1.0),
        PhiKind::LpNorm(a) => (a * u.powf(a - 1.0), s.max(1e-300).powf(1.0 / a - 1.0) / a),
        PhiKind::LpNormPower(a) => (a * u.powf(a - 1.0), 1.0),
        PhiKind::OneMinusL2Squared => (1.0 - 2.0 * u, 1.0),
        PhiKind::Dbar(_) => unreachable!("dbar is not separable"),
    }
}

/// The search problem for one decoder assignment: joint masses `pi[y][x]`
/// with column sums `q[x]` and `sum_y sum_{x in D_y} pi[y][x] >= 1 - eps`.
struct Problem<'a> {
    q: &'a [f64],
    lists: Vec<Vec<bool>>,
    need: f64,
    phi: &'a PhiFunctional,
    /// `1` to maximize, `-1` to minimize.
    sign: f64,
}

/// Euclidean projection of `v` onto `{x >= 0, sum x = total}`.
fn project_simplex(v: &mut [f64], total: f64) {
    if total <= 0.0 {
        v.iter_mut().for_each(|x| *x = 0.0);
        return;
    }
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        acc += ui;
        let t = (acc - total) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    v.iter_mut().for_each(|x| *x = (*x - theta).max(0.0));
}

impl Problem<'_> {
    fn ny(&self) -> usize {
        self.lists.len()
    }

    fn listed_mass(&self, pi: &[Vec<f64>]) -> f64 {
        kahan_sum(pi.iter().zip(&self.lists).flat_map(|(row, d)| row.iter().zip(d).filter(|(_, &i)| i).map(|(v, _)| *v)))
    }

    fn project_columns(&self, z: &[Vec<f64>], mu: f64) -> Vec<Vec<f64>> {
        let ny = self.ny();
        let mut out = vec![vec![0.0; self.q.len()]; ny];
        let mut col = vec![0.0; ny];
        for (x, &qx) in self.q.iter().enumerate() {
            for y in 0..ny {
                col[y] = z[y][x] + if self.lists[y][x] { mu } else { 0.0 };
            }
            project_simplex(&mut col, qx);
            for y in 0..ny {
                out[y][x] = col[y];
            }
        }
        out
    }

    /// Exact projection onto the feasible set: the budget multiplier `mu`
    /// is found by bisection on the monotone listed mass.
    fn project(&self, z: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
        let p0 = self.project_columns(z, 0.0);
        if self.listed_mass(&p0) >= self.need {
            return Some(p0);
        }
        let mut hi = 1.0;
        while self.listed_mass(&self.project_columns(z, hi)) < self.need {
            hi *= 2.0;
            if hi > 1e6 {
                return None;
            }
        }
        let mut lo = 0.0;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.listed_mass(&self.project_columns(z, mid)) >= self.need {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(self.project_columns(z, hi))
    }

    fn objective(&self, pi: &[Vec<f64>]) -> f64 {
        let mut acc = 0.0;
        for row in pi {
            let w = kahan_sum(row.iter().copied());
            if w <= 0.0 {
                continue;
            }
            let s: f64 = row.iter().map(|&v| self.phi.separable_term(v / w).unwrap_or(0.0)).sum();
            acc += w * self.phi.separable_outer(s);
        }
        self.sign * acc
    }

    /// Gradient of the perspective `w phi(pi_y / w)` row by row.
    fn gradient(&self, pi: &[Vec<f64>]) -> Vec<Vec<f64>> {
        pi.iter()
            .map(|row| {
                let w = kahan_sum(row.iter().copied());
                if w <= 0.0 {
                    return vec![0.0; row.len()];
                }
                let p: Vec<f64> = row.iter().map(|&v| v / w).collect();
                let s: f64 = p.iter().map(|&u| self.phi.separable_term(u).unwrap_or(0.0)).sum();
                let value = self.phi.separable_outer(s);
                let d: Vec<f64> = p
                    .iter()
                    .map(|&u| {
                        let (g1, g2) = separable_derivatives(self.phi, u, s);
                        g1 * g2
                    })
                    .collect();
                let mean: f64 = p.iter().zip(&d).map(|(a, b)| a * b).sum();
                d.iter().map(|di| self.sign * (value + di - mean)).collect()
            })
            .collect()
    }

    fn ascend(&self, start: Vec<Vec<f64>>, cfg: &OracleConfig) -> Option<Vec<Vec<f64>>> {
        let mut pi = self.project(&start)?;
        let mut f = self.objective(&pi);
        let mut eta = 0.05;
        for _ in 0..cfg.max_iters {
            let g = self.gradient(&pi);
            let z: Vec<Vec<f64>> =
                pi.iter().zip(&g).map(|(r, gr)| r.iter().zip(gr).map(|(a, b)| a + eta * b).collect()).collect();
            let Some(cand) = self.project(&z) else { break };
            let fc = self.objective(&cand);
            if fc > f {
                let step = pi.iter().flatten().zip(cand.iter().flatten()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                pi = cand;
                f = fc;
                eta *= 1.5;
                if step < cfg.step_tolerance {
                    break;
                }
            } else {
                eta *= 0.5;
                if eta < 1e-14 {
                    break;
                }
            }
        }
        Some(pi)
    }
}

fn joint_from_masses(pi: &[Vec<f64>]) -> Result<JointDist> {
    let mut py = Vec::new();
    let mut conditionals = Vec::new();
    for row in pi {
        let w = kahan_sum(row.iter().copied());
        if w > 0.0 {
            py.push(w);
            conditionals.push(Pmf::from_closed_form(row.iter().map(|v| v / w).collect(), None));
        }
    }
    let total = kahan_sum(py.iter().copied());
    py.iter_mut().for_each(|w| *w /= total);
    JointDist::from_pmfs(Pmf::from_closed_form(py, None), conditionals)
}

fn check_desk_scale(q: &Pmf, n: usize) -> Result<()> {
    if !q.is_tail_free() {
        return Err(Error::UnsupportedTail("oracles need a finite alphabet".into()));
    }
    if q.len() > MAX_SUPPORT || n == 0 || n > MAX_Y {
        return Err(Error::InvalidParameter(format!(
            "oracle limited to |X| <= {MAX_SUPPORT} and 1 <= |Y| <= {MAX_Y}"
        )));
    }
    Ok(())
}

/// Value of a joint, or `None` when it breaks the budget or marginal.
fn admissible_value(j: &JointDist, q: &Pmf, l: usize, eps: f64, phi: &PhiFunctional) -> Option<f64> {
    if list_map_error(j, l) > eps + GRID || variational_distance(&j.marginal(), q) > 1e-9 {
        return None;
    }
    conditional_measure(j, phi).ok()?.finite()
}

/// Largest `h_phi(X|Y)` found over joints with marginal `q`, at most `n`
/// values of `Y`, and list error at most `eps`, for a concave `phi`.
pub fn brute_force_sup(
    q: &Pmf,
    l: usize,
    eps: f64,
    n: usize,
    phi: &PhiFunctional,
    cfg: &OracleConfig,
) -> Result<OracleResult> {
    if !phi.concave {
        return Err(Error::NonConcavePhi(phi.name()));
    }
    search(q, l, eps, n, phi, cfg, 1.0)
}

/// Smallest `h_phi(X|Y)` found under the same constraints, for a convex
/// `phi`.
pub fn brute_force_inf(
    q: &Pmf,
    l: usize,
    eps: f64,
    n: usize,
    phi: &PhiFunctional,
    cfg: &OracleConfig,
) -> Result<OracleResult> {
    if !phi.convex {
        return Err(Error::InvalidParameter(format!("{} is not convex", phi.name())));
    }
    search(q, l, eps, n, phi, cfg, -1.0)
}

fn search(
    q: &Pmf,
    l: usize,
    eps: f64,
    n: usize,
    phi: &PhiFunctional,
    cfg: &OracleConfig,
    sign: f64,
) -> Result<OracleResult> {
    cfg.validate()?;
    check_desk_scale(q, n)?;
    if !phi.separable {
        return Err(Error::InvalidParameter(format!("{} is not separable", phi.name())));
    }
    let (lo, hi) = feasible_range(q, l, YCard::Finite(n));
    if !(eps >= lo - GRID && eps <= 1.0) {
        return Err(Error::Infeasible { eps, lo, hi });
    }
    let mut best: Option<OracleResult> = None;
    let mut offer = |value: f64, joint: JointDist| {
        if best.as_ref().is_none_or(|b| sign * value > sign * b.value) {
            best = Some(OracleResult { value, joint });
        }
    };
    // structured candidates: rearrangements of a single distribution
    let mut structured = Vec::new();
    if marginal_list_error(q, l) <= eps + GRID {
        structured.push(JointDist::independent(q)?);
    }
    if let Ok(j) = extremal_joint_type2(q, l, eps.min(hi), n) {
        structured.push(j);
    }
    if let Ok(j) = extremal_joint_type1(q, l, eps.min(hi)) {
        structured.push(j);
    }
    if let Ok((_, low)) = endpoint_achievers(q, l, YCard::Finite(n)) {
        structured.push(low);
    }
    for j in structured.into_iter().filter(|j| j.y_len() <= n) {
        if let Some(v) = admissible_value(&j, q, l, eps, phi) {
            offer(v, j);
        }
    }

    let m = q.len();
    let lsize = l.min(m);
    for restart in 0..cfg.restarts {
        let mut rng = SplitMix64::seed_from_u64(cfg.seed.wrapping_add(restart as u64));
        let lists: Vec<Vec<bool>> = (0..n)
            .map(|_| {
                let mut d = vec![false; m];
                for i in sample(&mut rng, m, lsize) {
                    d[i] = true;
                }
                d
            })
            .collect();
        let problem = Problem { q: q.masses(), lists, need: 1.0 - eps, phi, sign };
        let start: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| rng.gen::<f64>()).collect()).collect();
        let Some(pi) = problem.ascend(start, cfg) else { continue };
        let joint = joint_from_masses(&pi)?;
        if let Some(v) = admissible_value(&joint, q, l, eps, phi) {
            offer(v, joint);
        }
    }
    best.ok_or(Error::Infeasible { eps, lo, hi })
}

/// Exhaustive search over joints whose masses `pi[y][x]` are multiples of
/// `q[x] / mesh`; a lower bound on the supremum. With two outputs, the split
/// of the last symbol also ranges over the points where the list error
/// equals `eps` exactly, so budgets off the grid are still reached.
pub fn exhaustive_small(q: &Pmf, l: usize, eps: f64, n: usize, phi: &PhiFunctional, mesh: usize) -> Result<f64> {
    if mesh == 0 || mesh > 64 {
        return Err(Error::MeshTooLarge(format!("mesh {mesh} outside 1..=64")));
    }
    if !q.is_tail_free() || q.len() > 3 || n == 0 || n > 2 {
        return Err(Error::MeshTooLarge("exhaustive search needs |X| <= 3 and |Y| <= 2".into()));
    }
    let m = q.len();
    let qm = q.masses();
    let mut best: Option<f64> = None;
    let mut consider = |pi: &[Vec<f64>]| -> Result<()> {
        let joint = joint_from_masses(pi)?;
        if list_map_error(&joint, l) > eps + GRID {
            return Ok(());
        }
        if let Some(v) = conditional_measure(&joint, phi)?.finite() {
            best = Some(best.map_or(v, |b: f64| b.max(v)));
        }
        Ok(())
    };
    if n == 1 {
        consider(&[qm.to_vec()])?;
    } else {
        let last = m - 1;
        for code in 0..(mesh + 1).pow(last as u32) {
            let mut pi = vec![vec![0.0; m]; 2];
            let mut c = code;
            for x in 0..last {
                let i = c % (mesh + 1);
                c /= mesh + 1;
                pi[0][x] = qm[x] * i as f64 / mesh as f64;
                pi[1][x] = qm[x] - pi[0][x];
            }
            let mut splits: Vec<f64> = (0..=mesh).map(|i| qm[last] * i as f64 / mesh as f64).collect();
            splits.extend(tight_splits(&pi, qm[last], l, eps));
            for t in splits {
                pi[0][last] = t;
                pi[1][last] = qm[last] - t;
                consider(&pi)?;
            }
        }
    }
    best.ok_or_else(|| {
        let (lo, hi) = feasible_range(q, l, YCard::Finite(n));
        Error::Infeasible { eps, lo, hi }
    })
}

/// Splits `t` of the last symbol (mass `total`, placed as the last column
/// entry of both rows) at which the list error of the two-row joint equals
/// `eps`. The error is piecewise linear in `t` with breaks where the last
/// entry crosses another entry of its row.
fn tight_splits(pi: &[Vec<f64>], total: f64, l: usize, eps: f64) -> Vec<f64> {
    let last = pi[0].len() - 1;
    let error_at = |t: f64| {
        let mut e = 0.0;
        for (row, v) in pi.iter().zip([t, total - t]) {
            let mut r: Vec<f64> = row[..last].to_vec();
            r.push(v);
            r.sort_by(|a, b| b.total_cmp(a));
            e += r[l.min(r.len())..].iter().sum::<f64>();
        }
        e
    };
    let mut breaks = vec![0.0, total];
    for x in 0..last {
        breaks.push(pi[0][x]);
        breaks.push(total - pi[1][x]);
    }
    breaks.retain(|b| (0.0..=total).contains(b));
    breaks.sort_by(|a, b| a.total_cmp(b));
    let mut out = Vec::new();
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (ea, eb) = (error_at(a) - eps, error_at(b) - eps);
        if ea * eb <= 0.0 && ea != eb {
            out.push(a + (b - a) * ea / (ea - eb));
        }
    }
    out
}

/// Smallest Shannon entropy over distributions on the grid
/// `{k / grid_resolution}` within variational distance `delta` of `q`.
#[derive(Clone, Debug, Serialize)]
pub struct TvBallMinimum {
    pub entropy: f64,
    pub argmin: Vec<f64>,
}

pub fn tv_ball_min_entropy(q: &Pmf, delta: f64, cfg: &OracleConfig) -> Result<TvBallMinimum> {
    cfg.validate()?;
    if !q.is_tail_free() || q.len() > 6 || cfg.grid_resolution > 200 {
        return Err(Error::MeshTooLarge("variational-ball grid needs |X| <= 6 and resolution <= 200".into()));
    }
    let res = cfg.grid_resolution;
    let qm = q.masses();
    // distances are measured in units of 1/res on the l1 scale
    let budget = 2.0 * delta * res as f64 + 1e-9;
    let scaled: Vec<f64> = qm.iter().map(|&v| v * res as f64).collect();
    let suffix: Vec<f64> = (0..=qm.len()).map(|i| scaled[i..].iter().sum()).collect();
    let mut counts = vec![0usize; qm.len()];
    #[allow(clippy::too_many_arguments)]
    fn walk(
        i: usize,
        left: usize,
        used: f64,
        counts: &mut Vec<usize>,
        scaled: &[f64],
        suffix: &[f64],
        budget: f64,
        res: usize,
        best: &mut (f64, Vec<usize>),
    ) {
        let m = scaled.len();
        if i + 1 == m {
            let d = used + (left as f64 - scaled[i]).abs();
            if d <= budget {
                counts[i] = left;
                let h: f64 = counts.iter().map(|&c| eta(c as f64 / res as f64)).sum();
                if h < best.0 {
                    *best = (h, counts.clone());
                }
            }
            return;
        }
        for c in 0..=left {
            let d = used + (c as f64 - scaled[i]).abs();
            // the remaining coordinates differ by at least their mass mismatch
            if d + ((left - c) as f64 - suffix[i + 1]).abs() > budget {
                continue;
            }
            counts[i] = c;
            walk(i + 1, left - c, d, counts, scaled, suffix, budget, res, best);
        }
    }
    let mut best_counts = (f64::INFINITY, Vec::new());
    walk(0, res, 0.0, &mut counts, &scaled, &suffix, budget, res, &mut best_counts);
    if best_counts.1.is_empty() {
        return Err(Error::MeshTooLarge("no grid point within the ball; raise the resolution".into()));
    }
    let argmin = best_counts.1.iter().map(|&c| c as f64 / res as f64).collect();
    Ok(TvBallMinimum { entropy: best_counts.0, argmin })
}
