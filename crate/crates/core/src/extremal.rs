//! Joint distributions that attain the Fano-type bounds.
//!
//! The Fano distribution `P` majorizes `Q`, so `Q↓ = M P↓` for a doubly
//! stochastic `M` built from pairwise transfers. Decomposing `M` into
//! permutations gives a mixture of rearrangements of `P` whose average is
//! `Q`; each permutation becomes one value of `Y`. All of this happens on
//! the index window `J..=K`, where `P` and `Q↓` differ.

use crate::error::{Error, Result};
use crate::errprob::{check_list_size, list_map_error, marginal_list_error, SystemSpec, YCard};
use crate::fano::{bound, fano_type1, fano_type2, spade_bound, FanoIndices};
use crate::measures::{conditional_measure, JointDist, PhiFunctional};
use crate::numeric::{kahan_sum, Extended, GRID};
use crate::pmf::{majorizes, variational_distance, Pmf};
use serde::Serialize;

const POSITIVE: f64 = 1e-13;
const DRIFT: f64 = 1e-9;

/// An `n × n` matrix with nonnegative entries whose rows and columns sum
/// to one.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DoublyStochastic {
    entries: Vec<Vec<f64>>,
}

impl DoublyStochastic {
    pub fn new(entries: Vec<Vec<f64>>) -> Result<Self> {
        let n = entries.len();
        if n == 0 || entries.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidParameter("matrix must be square and nonempty".into()));
        }
        for (i, row) in entries.iter().enumerate() {
            if row.iter().any(|&e| !(-GRID..=1.0 + GRID).contains(&e)) {
                return Err(Error::InvalidParameter(format!("row {i} has an entry outside [0, 1]")));
            }
            let rs = kahan_sum(row.iter().copied());
            let cs = kahan_sum(entries.iter().map(|r| r[i]));
            if (rs - 1.0).abs() > GRID || (cs - 1.0).abs() > GRID {
                return Err(Error::InvalidParameter(format!("row or column {i} does not sum to 1")));
            }
        }
        Ok(DoublyStochastic { entries })
    }

    pub fn identity(n: usize) -> Self {
        let entries = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        DoublyStochastic { entries }
    }

    pub fn n(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[Vec<f64>] {
        &self.entries
    }

    /// Matrix-vector product `M x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.entries.iter().map(|row| kahan_sum(row.iter().zip(x).map(|(a, b)| a * b))).collect()
    }
}

/// Convex combination of permutation matrices. `perms[i][row]` is the
/// column holding the one in row `row`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BirkhoffDecomp {
    pub weights: Vec<f64>,
    pub perms: Vec<Vec<usize>>,
}

impl BirkhoffDecomp {
    /// `sum_i w_i Π_i` as a dense matrix.
    pub fn reconstruct(&self) -> Vec<Vec<f64>> {
        let n = self.perms.first().map_or(0, Vec::len);
        let mut m = vec![vec![0.0; n]; n];
        for (w, p) in self.weights.iter().zip(&self.perms) {
            for (row, &col) in p.iter().enumerate() {
                m[row][col] += w;
            }
        }
        m
    }
}

/// Sequence of pairwise transfers carrying the sorted `source` onto the
/// sorted `target`; returns the product matrix. Both slices must have the
/// same length and sum, and `source` must majorize `target`.
fn transfer_matrix(target: &[f64], source: &[f64]) -> Vec<Vec<f64>> {
    let n = target.len();
    let mut m: Vec<Vec<f64>> = DoublyStochastic::identity(n).entries;
    let mut x = source.to_vec();
    let tol = 1e-15;
    for _ in 0..n {
        let Some(j) = (0..n).rev().find(|&i| x[i] > target[i] + tol) else { break };
        let Some(k) = (j + 1..n).find(|&i| x[i] < target[i] - tol) else { break };
        let delta = (x[j] - target[j]).min(target[k] - x[k]);
        let gap = x[j] - x[k];
        if gap <= 0.0 {
            break;
        }
        let t = delta / gap;
        // rows j and k become (1-t) r_j + t r_k and t r_j + (1-t) r_k
        let (rj, rk) = (m[j].clone(), m[k].clone());
        for c in 0..n {
            m[j][c] = (1.0 - t) * rj[c] + t * rk[c];
            m[k][c] = t * rj[c] + (1.0 - t) * rk[c];
        }
        let (xj, xk) = (x[j], x[k]);
        x[j] = (1.0 - t) * xj + t * xk;
        x[k] = t * xj + (1.0 - t) * xk;
        if (x[j] - target[j]).abs() < tol * 10.0 {
            x[j] = target[j];
        }
        if (x[k] - target[k]).abs() < tol * 10.0 {
            x[k] = target[k];
        }
    }
    m
}

/// A doubly stochastic `M` with `target↓ = M source↓`, built from at most
/// `n - 1` pairwise transfers.
pub fn hlp_transfer(target: &Pmf, source: &Pmf) -> Result<DoublyStochastic> {
    if !target.is_tail_free() || !source.is_tail_free() {
        return Err(Error::UnsupportedTail("transfers need finite alphabets".into()));
    }
    let verdict = majorizes(source, target);
    if !verdict.holds {
        return Err(Error::NotMajorized { witness: verdict.witness.unwrap_or(0) });
    }
    let n = target.len().max(source.len());
    let mut t = target.sorted_masses();
    let mut s = source.sorted_masses();
    t.resize(n, 0.0);
    s.resize(n, 0.0);
    Ok(DoublyStochastic { entries: transfer_matrix(&t, &s) })
}

/// Whether the rows `rows` can be matched to distinct unused columns
/// through positive entries (Kuhn's augmenting paths).
fn completes(m: &[Vec<f64>], rows: &[usize], used: &[bool]) -> bool {
    fn augment(row: usize, m: &[Vec<f64>], used: &[bool], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for col in 0..m.len() {
            if m[row][col] > POSITIVE && !used[col] && !seen[col] {
                seen[col] = true;
                if owner[col].is_none_or(|r| augment(r, m, used, seen, owner)) {
                    owner[col] = Some(row);
                    return true;
                }
            }
        }
        false
    }
    let mut owner = vec![None; m.len()];
    rows.iter().all(|&r| augment(r, m, used, &mut vec![false; m.len()], &mut owner))
}

/// Lexicographically smallest permutation supported on the positive
/// entries.
fn perfect_matching(m: &[Vec<f64>]) -> Option<Vec<usize>> {
    let n = m.len();
    let mut used = vec![false; n];
    let mut perm = Vec::with_capacity(n);
    for row in 0..n {
        let rest: Vec<usize> = (row + 1..n).collect();
        let col = (0..n).find(|&c| {
            if m[row][c] <= POSITIVE || used[c] {
                return false;
            }
            used[c] = true;
            let ok = completes(m, &rest, &used);
            used[c] = false;
            ok
        })?;
        used[col] = true;
        perm.push(col);
    }
    Some(perm)
}

/// Greedy decomposition: repeatedly peel off a permutation supported on the
/// positive entries, with the smallest entry along it as weight.
pub fn birkhoff_decompose(m: &DoublyStochastic) -> Result<BirkhoffDecomp> {
    let n = m.n();
    let mut res = m.entries.clone();
    let mut weights = Vec::new();
    let mut perms = Vec::new();
    let mut remaining = 1.0;
    while remaining > POSITIVE * n as f64 {
        for (i, row) in res.iter().enumerate() {
            let rs = kahan_sum(row.iter().copied());
            let cs = kahan_sum(res.iter().map(|r| r[i]));
            if (rs - remaining).abs() > DRIFT || (cs - remaining).abs() > DRIFT {
                return Err(Error::NumericalBreakdown(format!("residual sums drifted at index {i}")));
            }
        }
        let Some(perm) = perfect_matching(&res) else {
            return Err(Error::NumericalBreakdown("no positive permutation in the residual".into()));
        };
        let w = perm.iter().enumerate().map(|(r, &c)| res[r][c]).fold(f64::INFINITY, f64::min);
        for (r, &c) in perm.iter().enumerate() {
            res[r][c] -= w;
            if res[r][c] <= POSITIVE {
                res[r][c] = 0.0;
            }
        }
        remaining -= w;
        weights.push(w);
        perms.push(perm);
        if perms.len() > n * n {
            return Err(Error::NumericalBreakdown("too many permutations".into()));
        }
    }
    let total: f64 = kahan_sum(weights.iter().copied());
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(BirkhoffDecomp { weights, perms })
}

/// Null vector of the `(d+1) × count` system `[points; 1]` by Gauss-Jordan
/// elimination with partial pivoting.
fn affine_dependence(points: &[Vec<f64>]) -> Option<Vec<f64>> {
    let count = points.len();
    let d = points.first()?.len();
    let mut a: Vec<Vec<f64>> = (0..d).map(|r| points.iter().map(|p| p[r]).collect()).collect();
    a.push(vec![1.0; count]);
    let rows = a.len();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..count {
        if r == rows {
            break;
        }
        let (best, val) = (r..rows).map(|i| (i, a[i][c].abs())).fold((r, 0.0), |b, x| if x.1 > b.1 { x } else { b });
        if val < 1e-12 {
            continue;
        }
        a.swap(r, best);
        let p = a[r][c];
        a[r].iter_mut().for_each(|x| *x /= p);
        for i in 0..rows {
            if i != r && a[i][c] != 0.0 {
                let f = a[i][c];
                let pivot_row = a[r].clone();
                a[i].iter_mut().zip(&pivot_row).for_each(|(x, y)| *x -= f * y);
            }
        }
        pivots.push(c);
        r += 1;
    }
    let free = (0..count).find(|c| !pivots.contains(c))?;
    let mut alpha = vec![0.0; count];
    alpha[free] = 1.0;
    for (row, &pc) in pivots.iter().enumerate() {
        alpha[pc] = -a[row][free];
    }
    Some(alpha)
}

/// Reduces a mixture of points in an affine space of dimension `d - 1` to
/// at most `d` points with the same barycenter.
fn caratheodory(mut points: Vec<Vec<f64>>, mut weights: Vec<f64>) -> (Vec<Vec<f64>>, Vec<f64>) {
    let d = points.first().map_or(0, Vec::len);
    while points.len() > d.max(1) {
        let Some(alpha) = affine_dependence(&points) else { break };
        let (idx, t) = alpha
            .iter()
            .zip(&weights)
            .enumerate()
            .filter(|(_, (a, _))| **a > 1e-12)
            .map(|(i, (a, w))| (i, w / a))
            .fold((usize::MAX, f64::INFINITY), |b, x| if x.1 < b.1 { x } else { b });
        if idx == usize::MAX {
            break;
        }
        for (w, a) in weights.iter_mut().zip(&alpha) {
            *w -= t * a;
        }
        weights[idx] = 0.0;
        let keep: Vec<bool> = weights.iter().map(|&w| w > 1e-15).collect();
        points = points.into_iter().zip(&keep).filter(|(_, k)| **k).map(|(p, _)| p).collect();
        weights = weights.into_iter().zip(&keep).filter(|(_, k)| **k).map(|(w, _)| w).collect();
    }
    let total = kahan_sum(weights.iter().copied());
    weights.iter_mut().for_each(|w| *w /= total);
    (points, weights)
}

/// Sums the weights of conditionals that agree within the grid.
fn merge_identical(points: Vec<Vec<f64>>, weights: Vec<f64>) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut out: Vec<(Vec<f64>, f64)> = Vec::new();
    for (p, w) in points.into_iter().zip(weights) {
        match out.iter_mut().find(|(q, _)| q.iter().zip(&p).all(|(a, b)| (a - b).abs() <= GRID)) {
            Some((_, acc)) => *acc += w,
            None => out.push((p, w)),
        }
    }
    out.into_iter().unzip()
}

/// Mixture of rearrangements of the Fano distribution `p` (in sorted-`q`
/// coordinates) that averages to `q`, returned in `q`'s symbol order.
fn window_mixture(q: &Pmf, p: &Pmf, idx: &FanoIndices, l: usize) -> Result<JointDist> {
    let order = q.rearrangement_order();
    let n = q.len().max(p.len());
    let mut qs = q.sorted_masses();
    qs.resize(n, 0.0);
    let mut ps = p.masses().to_vec();
    ps.resize(n, 0.0);
    let hi = idx.k.finite().ok_or(Error::KInfinite)?.max(l);
    let (points, weights) = if idx.j > l {
        (vec![Vec::new()], vec![1.0])
    } else {
        let lo = idx.j - 1;
        let target = &qs[lo..hi];
        let source = &ps[lo..hi];
        let m = transfer_matrix(target, source);
        let decomp = birkhoff_decompose(&DoublyStochastic { entries: m })?;
        let points: Vec<Vec<f64>> =
            decomp.perms.iter().map(|perm| perm.iter().map(|&c| source[c]).collect()).collect();
        let (points, weights) = merge_identical(points, decomp.weights);
        caratheodory(points, weights)
    };
    let mut conditionals = Vec::with_capacity(points.len());
    for window in &points {
        let mut sorted = ps.clone();
        if idx.j <= l {
            sorted[idx.j - 1..hi].copy_from_slice(window);
        }
        let mut full = vec![0.0; n];
        for (s, &v) in sorted.iter().enumerate() {
            full[if s < order.len() { order[s] } else { s }] = v;
        }
        conditionals.push(Pmf::from_closed_form(full, None));
    }
    JointDist::from_pmfs(Pmf::from_closed_form(weights, None), conditionals)
}

fn require_finite(q: &Pmf) -> Result<()> {
    if !q.is_tail_free() {
        return Err(Error::UnsupportedTail("extremal joints need a finite alphabet".into()));
    }
    Ok(())
}

/// A joint with marginal `q` and list error `eps` whose conditionals are
/// all rearrangements of the type-1 distribution, so it attains the bound
/// for every functional at once.
pub fn extremal_joint_type1(q: &Pmf, l: usize, eps: f64) -> Result<JointDist> {
    require_finite(q)?;
    let (p, idx) = fano_type1(q, l, eps)?;
    window_mixture(q, &p, &idx, l)
}

/// As [`extremal_joint_type1`] with the type-2 distribution and at most
/// `n` values of `Y`.
pub fn extremal_joint_type2(q: &Pmf, l: usize, eps: f64, n: usize) -> Result<JointDist> {
    require_finite(q)?;
    let (p, idx) = fano_type2(q, l, eps, n)?;
    let at_endpoint = (eps - marginal_list_error(q, l)).abs() <= GRID;
    let k = idx.k.finite().ok_or(Error::KInfinite)?;
    let required = spade_bound(idx.j, k, l);
    if !at_endpoint && (n as u64) < required {
        return Err(Error::YTooSmall { n, required });
    }
    window_mixture(q, &p, &idx, l)
}

/// Joints attaining both ends of the feasible error range: `X`
/// independent of `Y` (upper end), and one value of `Y` per block of `L`
/// most likely symbols with the remaining mass shared by all blocks (lower
/// end).
pub fn endpoint_achievers(q: &Pmf, l: usize, y_card: YCard) -> Result<(JointDist, JointDist)> {
    check_list_size(l)?;
    require_finite(q)?;
    let upper = JointDist::independent(q)?;
    let order = q.rearrangement_order();
    let qs = q.sorted_masses();
    let blocks = match y_card {
        YCard::Finite(n) => n,
        YCard::CountablyInfinite => qs.len().div_ceil(l),
    };
    let covered = blocks.saturating_mul(l).min(qs.len());
    let residual = kahan_sum(qs[covered..].iter().copied());
    let mut py = Vec::new();
    let mut conditionals = Vec::new();
    for v in 0..blocks {
        let (start, end) = ((v * l).min(covered), ((v + 1) * l).min(covered));
        let block_mass = kahan_sum(qs[start..end].iter().copied());
        if block_mass <= 0.0 {
            break;
        }
        let mut c = vec![0.0; qs.len()];
        for s in start..end {
            c[order[s]] = (1.0 - residual) * qs[s] / block_mass;
        }
        for s in covered..qs.len() {
            c[order[s]] = qs[s];
        }
        py.push(block_mass / (1.0 - residual));
        conditionals.push(Pmf::from_closed_form(c, None));
    }
    let lower = JointDist::from_pmfs(Pmf::from_closed_form(py, None), conditionals)?;
    Ok((upper, lower))
}

/// Residuals of a candidate extremal joint against a system.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExtremalCertificate {
    /// Variational distance between the joint's marginal and `Q`.
    pub marginal_residual: f64,
    /// `P_e^(L)(X|Y) - eps`; positive values violate the budget.
    pub error_residual: f64,
    pub bound: Extended,
    pub value: Extended,
    /// `|bound - value|`; zero for an extremal joint.
    pub gap: f64,
    pub passed: bool,
}

pub fn verify_extremal(joint: &JointDist, sys: &SystemSpec, phi: &PhiFunctional) -> Result<ExtremalCertificate> {
    let marginal_residual = variational_distance(&joint.marginal(), sys.q());
    let error_residual = list_map_error(joint, sys.list_size()) - sys.eps();
    let report = bound(sys, phi)?;
    let value = conditional_measure(joint, phi)?;
    let gap = match (report.value, value) {
        (Extended::Finite(b), Extended::Finite(v)) => (b - v).abs(),
        (Extended::Infinite, Extended::Infinite) => 0.0,
        _ => f64::INFINITY,
    };
    let passed = marginal_residual <= 1e-9 && error_residual <= 1e-10 && gap.abs() <= 1e-9;
    Ok(ExtremalCertificate { marginal_residual, error_residual, bound: report.value, value, gap, passed })
}
