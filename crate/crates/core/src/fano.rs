//! Fano distributions and the Fano-type bound.
//!
//! Given a marginal `Q`, a list size `L` and an error budget `eps`, the
//! type-1 distribution is the least element (in the majorization order) of
//! the marginals that majorize `Q` and have list-decoding error at most
//! `eps`. Every symmetric concave functional is therefore maximized there,
//! which bounds `h_phi(X|Y)` over all joints with `P_X = Q` and
//! `P_e^(L)(X|Y) <= eps`. The type-2 variant accounts for a finite
//! observation alphabet; type-3 restricts the decoding range.
//!
//! Indices follow the usual 1-based convention: `J` is the first list
//! position that is flattened to the weight `V(J)`, and `K` is the last
//! position beyond `L` that is raised to the weight `W(K)`.

use crate::error::{Error, Result};
use crate::errprob::{check_list_size, feasible_range, marginal_list_error, SystemSpec, YCard};
use crate::measures::{phi_eval, BoundDirection, Measure, PhiFunctional, PhiKind};
use crate::numeric::{grid_le, grid_lt, kahan_sum, prefix_sums, Extended, KahanSum, GRID};
use crate::pmf::{DecreasingView, Pmf, TailModel};
use serde::{Serialize, Serializer};

/// The index `K`, which is infinite only for a zero error budget on an
/// infinite support.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KIndex {
    Finite(usize),
    Infinite,
}

impl KIndex {
    pub fn finite(&self) -> Option<usize> {
        match self {
            KIndex::Finite(k) => Some(*k),
            KIndex::Infinite => None,
        }
    }
}

impl Serialize for KIndex {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            KIndex::Finite(k) => s.serialize_u64(*k as u64),
            KIndex::Infinite => s.serialize_str("inf"),
        }
    }
}

/// The indices and weights that shape a Fano distribution.
///
/// `J = L + 1` means no list position is flattened (the budget equals the
/// error of `Q` itself); `w` is `None` when `K = L`, i.e. no position beyond
/// the list is raised.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FanoIndices {
    #[serde(rename = "J")]
    pub j: usize,
    #[serde(rename = "K")]
    pub k: KIndex,
    #[serde(rename = "V")]
    pub v: f64,
    #[serde(rename = "W")]
    pub w: Option<f64>,
}

/// A Fano distribution together with the sorted prefix of `Q` it was built
/// from, for closed-form cross-checks.
#[derive(Clone, Debug)]
struct Construction {
    dist: Pmf,
    indices: FanoIndices,
    sorted_q: Vec<f64>,
    tail: Option<TailModel>,
}

fn check_range(eps: f64, lo: f64, hi: f64) -> Result<()> {
    if !(eps >= lo - GRID && eps <= hi + GRID) || !(0.0..=1.0).contains(&eps) {
        return Err(Error::Infeasible { eps, lo, hi });
    }
    Ok(())
}

/// `J = min { j : Q(j) < V(j) }` with `V(j) = 1` past the list.
fn find_j(view: &mut DecreasingView, l: usize, eps: f64) -> Result<(usize, f64)> {
    for j in 1..=l {
        let v = ((1.0 - eps) - view.prefix(j - 1)?) / (l - j + 1) as f64;
        if grid_lt(view.at(j)?, v) {
            return Ok((j, v));
        }
    }
    Ok((l + 1, 1.0))
}

/// Largest `k >= L` (at most `cap`) with `W(k) < Q(k)`. The qualifying set
/// is an interval starting at `L`, so the scan stops at the first failure.
fn find_k(
    view: &mut DecreasingView,
    l: usize,
    eps: f64,
    cap: Option<usize>,
) -> Result<(KIndex, Option<f64>)> {
    if eps == 0.0 && cap.is_none() && view.remaining_tail().is_some_and(|t| t.mass() > 0.0) {
        return Ok((KIndex::Infinite, Some(0.0)));
    }
    let mut k = l;
    let mut w = None;
    loop {
        let next = k + 1;
        if cap.is_some_and(|c| next > c) || (!view.has_tail() && next > view.len()) {
            break;
        }
        let q = view.at(next)?;
        let wn = (view.prefix(next)? - (1.0 - eps)) / (next - l) as f64;
        if !grid_lt(wn, q) {
            break;
        }
        k = next;
        w = Some(wn.max(0.0));
    }
    Ok((KIndex::Finite(k), w))
}

fn construct(q: &Pmf, l: usize, eps: f64, cap: Option<usize>) -> Result<Construction> {
    let mut view = DecreasingView::new(q)?;
    let (j, v) = find_j(&mut view, l, eps)?;
    let (k, w) = find_k(&mut view, l, eps, cap)?;
    let indices = FanoIndices { j, k, v, w };
    let list_end = if j <= l { l } else { 0 };
    let (masses, tail) = match k {
        KIndex::Infinite => {
            let mut m: Vec<f64> = (1..j).map(|x| view.at(x)).collect::<Result<_>>()?;
            m.resize(l, v);
            (m, None)
        }
        KIndex::Finite(kf) => {
            let n = view.len().max(kf).max(list_end);
            view.extend_to(n)?;
            let mut m = view.values().to_vec();
            m.resize(n, 0.0);
            for x in j..=l {
                m[x - 1] = v;
            }
            for x in l + 1..=kf {
                m[x - 1] = w.unwrap_or(0.0);
            }
            (m, view.remaining_tail())
        }
    };
    Ok(Construction {
        dist: Pmf::from_closed_form(masses, tail.clone()),
        indices,
        sorted_q: view.values().to_vec(),
        tail,
    })
}

/// Type-0 distribution: `(1-eps)/L` on `L` symbols and `eps/(M-L)` on the
/// remaining `M - L`.
pub fn fano_type0(m: usize, l: usize, eps: f64) -> Result<Pmf> {
    if !(1 <= l && l < m) {
        return Err(Error::InvalidParameter(format!("type-0 needs 1 <= L < M (got L={l}, M={m})")));
    }
    let hi = 1.0 - l as f64 / m as f64;
    if !(0.0..=hi + GRID).contains(&eps) {
        return Err(Error::EpsOutOfRange { eps, hi });
    }
    let mut masses = vec![(1.0 - eps) / l as f64; l];
    masses.resize(m, eps / (m - l) as f64);
    Ok(Pmf::from_closed_form(masses, None))
}

/// Type-1 distribution for an observation alphabet of unlimited size.
pub fn fano_type1(q: &Pmf, l: usize, eps: f64) -> Result<(Pmf, FanoIndices)> {
    check_list_size(l)?;
    let (lo, hi) = feasible_range(q, l, YCard::CountablyInfinite);
    check_range(eps, lo, hi)?;
    let c = construct(q, l, eps, None)?;
    Ok((c.dist, c.indices))
}

/// Type-2 distribution for an observation alphabet of `n` values. Unlike
/// type-1 it need not be sorted.
pub fn fano_type2(q: &Pmf, l: usize, eps: f64, n: usize) -> Result<(Pmf, FanoIndices)> {
    check_list_size(l)?;
    let (lo, hi) = feasible_range(q, l, YCard::Finite(n));
    check_range(eps, lo, hi)?;
    let c = construct(q, l, eps, Some(n.saturating_mul(l)))?;
    Ok((c.dist, c.indices))
}

/// Type-3 distribution: the decoding range is restricted to the symbol set
/// `z` (0-based indices into `q`) of size `n * L`. Masses outside `z` are
/// those of `q`.
pub fn fano_type3(q: &Pmf, l: usize, eps: f64, n: usize, z: &[usize]) -> Result<Pmf> {
    check_list_size(l)?;
    if !q.is_tail_free() {
        return Err(Error::UnsupportedTail("type-3 needs a finite alphabet".into()));
    }
    let mut zs = z.to_vec();
    zs.sort_unstable();
    zs.dedup();
    let expected = n.saturating_mul(l);
    if zs.len() != expected || zs.len() != z.len() {
        return Err(Error::BadZCardinality { expected, got: zs.len() });
    }
    if let Some(&bad) = zs.iter().find(|&&x| x >= q.len()) {
        return Err(Error::InvalidParameter(format!("symbol {bad} outside the alphabet")));
    }
    let m = q.masses();
    // beta: positions of z in decreasing order of mass, ties by index
    let mut beta = zs.clone();
    beta.sort_by(|&a, &b| m[b].total_cmp(&m[a]));
    let qb: Vec<f64> = beta.iter().map(|&x| m[x]).collect();
    let s = prefix_sums(&qb);
    let lo = 1.0 - s[qb.len()];
    let hi = 1.0 - s[l.min(qb.len())];
    check_range(eps, lo.max(0.0), hi)?;

    let j3 = (1..=l)
        .find(|&j| grid_le(qb[j - 1], ((1.0 - eps) - s[j - 1]) / (l - j + 1) as f64))
        .unwrap_or(l);
    let v3 = ((1.0 - eps) - s[j3 - 1]) / (l - j3 + 1) as f64;
    let mut k3 = l;
    for k in l + 1..=qb.len() {
        let w = (s[k] - (1.0 - eps)) / (k - l) as f64;
        if !grid_le(w, qb[k - 1]) {
            break;
        }
        k3 = k;
    }
    let mut out = m.to_vec();
    for r in j3..=l {
        out[beta[r - 1]] = v3;
    }
    if k3 > l {
        let w3 = ((s[k3] - (1.0 - eps)) / (k3 - l) as f64).max(0.0);
        for r in l + 1..=k3 {
            out[beta[r - 1]] = w3;
        }
    }
    Ok(Pmf::from_closed_form(out, None))
}

/// `min { C(K-J+1, L-J+1), (K-J)^2 + 1 }`, saturating at `u64::MAX`. For
/// `J = L + 1` (no flattened positions) this is 1.
pub fn spade_bound(j: usize, k: usize, l: usize) -> u64 {
    if j > l || k < j {
        return 1;
    }
    let d = (k - j) as u128;
    let square = d.saturating_mul(d).saturating_add(1);
    let n = (k - j + 1) as u128;
    let r = (l - j + 1) as u128;
    let r = r.min(n - r);
    let mut c: u128 = 1;
    for i in 1..=r {
        // C(n-r+i, i) = C(n-r+i-1, i-1) * (n-r+i) / i stays integral
        c = c.saturating_mul(n - r + i) / i;
        if c > square {
            break;
        }
    }
    c.min(square).min(u64::MAX as u128) as u64
}

/// Smallest `|Y|` for which the type-1 bound is attained.
pub fn spade_min_y(q: &Pmf, l: usize, eps: f64) -> Result<u64> {
    let (_, idx) = fano_type1(q, l, eps)?;
    match idx.k {
        KIndex::Finite(k) => Ok(spade_bound(idx.j, k, l)),
        KIndex::Infinite => Err(Error::KInfinite),
    }
}

/// Whether `phi(Q)` is finite, judged through the tail's closed form.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Finiteness {
    Finite,
    Infinite,
}

/// Finite/infinite verdict for a separable `phi` at `q`.
pub fn phi_finiteness_guard(phi: &PhiFunctional, q: &Pmf) -> Result<Finiteness> {
    if !phi.separable {
        return Err(Error::InvalidParameter(format!("{} is not separable", phi.name())));
    }
    Ok(match phi_eval(phi, q)? {
        Extended::Finite(_) => Finiteness::Finite,
        Extended::Infinite => Finiteness::Infinite,
    })
}

/// Conditions under which the reported bound is known to be attained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SharpnessCondition {
    /// The budget equals the error of guessing from `Q` alone.
    EpsAtUpperEndpoint,
    /// Enough observations for the type-1 window, with `0 < eps` below the
    /// upper endpoint.
    SpadeInteriorEps,
    /// Enough observations for the type-1 window, and `Q` has finite support.
    SpadeFiniteSupport,
    /// `J = L` and countably many observations.
    ListFilledCountableY,
    /// A finite observation alphabet at least as large as the type-2 window
    /// requires.
    FiniteYCardinality,
}

/// The Fano-type bound on a measure, with the distribution that attains it
/// and the evidence for sharpness.
#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    pub measure: String,
    pub direction: BoundDirection,
    pub value: Extended,
    /// The same value recomputed term by term from the indices and weights.
    pub closed_form_check: Option<Extended>,
    pub fano_type: u8,
    pub distribution: Pmf,
    pub indices: FanoIndices,
    pub sharp: Vec<SharpnessCondition>,
    /// `min { C(K1-J+1, L-J+1), (K1-J)^2 + 1 }` for the type-1 indices.
    pub spade_min_y: Option<u64>,
    /// The same expression with the type-2 index `K2` (finite `Y` only).
    pub spade_min_y_k2: Option<u64>,
}

/// The Fano distribution that governs a system: type-2 for finite `Y`,
/// type-1 otherwise.
pub fn fano_distribution(sys: &SystemSpec) -> Result<(Pmf, FanoIndices, u8)> {
    match sys.y_card() {
        YCard::Finite(n) => {
            let (p, i) = fano_type2(sys.q(), sys.list_size(), sys.eps(), n)?;
            Ok((p, i, 2))
        }
        YCard::CountablyInfinite => {
            let (p, i) = fano_type1(sys.q(), sys.list_size(), sys.eps())?;
            Ok((p, i, 1))
        }
    }
}

/// Term-by-term value of a separable `phi` at the Fano distribution.
fn closed_form(phi: &PhiFunctional, c: &Construction, l: usize) -> Option<Extended> {
    let g = |u: f64| phi.separable_term(u);
    let idx = &c.indices;
    let mut acc = KahanSum::new();
    for x in 1..idx.j.min(l + 1) {
        acc.add(g(c.sorted_q.get(x - 1).copied().unwrap_or(0.0))?);
    }
    if idx.j <= l {
        acc.add((l - idx.j + 1) as f64 * g(idx.v)?);
    }
    let tail_part = match idx.k {
        KIndex::Infinite => Extended::Finite(0.0),
        KIndex::Finite(k) => {
            if k > l {
                acc.add((k - l) as f64 * g(idx.w.unwrap_or(0.0))?);
            }
            for &u in c.sorted_q.iter().skip(k.max(l)) {
                acc.add(g(u)?);
            }
            match &c.tail {
                None => Extended::Finite(0.0),
                Some(t) => match phi.kind {
                    PhiKind::Shannon => t.entropy_contribution(),
                    PhiKind::LpNorm(a) | PhiKind::LpNormPower(a) => t.power_sum(a),
                    PhiKind::OneMinusL2Squared => t.power_sum(2.0).map(|s| t.mass() - s),
                    PhiKind::Dbar(_) => return None,
                },
            }
        }
    };
    Some((Extended::Finite(acc.value()) + tail_part).map(|s| phi.separable_outer(s)))
}

fn sharpness(
    sys: &SystemSpec,
    c1: &Construction,
    k2: Option<usize>,
) -> (Vec<SharpnessCondition>, Option<u64>, Option<u64>) {
    let l = sys.list_size();
    let eps = sys.eps();
    let hi = marginal_list_error(sys.q(), l);
    let at_hi = (eps - hi).abs() <= GRID;
    let j = c1.indices.j;
    let spade1 = c1.indices.k.finite().map(|k| spade_bound(j, k, l));
    let spade2 = k2.map(|k| spade_bound(j, k, l));
    let mut out = Vec::new();
    if at_hi {
        out.push(SharpnessCondition::EpsAtUpperEndpoint);
    }
    match sys.y_card() {
        YCard::CountablyInfinite => {
            if spade1.is_some() {
                if eps > 0.0 && !at_hi {
                    out.push(SharpnessCondition::SpadeInteriorEps);
                }
                if sys.q().is_tail_free() {
                    out.push(SharpnessCondition::SpadeFiniteSupport);
                }
            }
            if j == l {
                out.push(SharpnessCondition::ListFilledCountableY);
            }
        }
        YCard::Finite(n) => {
            if spade2.is_some_and(|s| n as u64 >= s) {
                out.push(SharpnessCondition::FiniteYCardinality);
            }
        }
    }
    (out, spade1, spade2)
}

fn evaluate(sys: &SystemSpec, phi: &PhiFunctional) -> Result<BoundReport> {
    let q = sys.q();
    let l = sys.list_size();
    let eps = sys.eps();
    if phi.separable && eps > 0.0 && phi_finiteness_guard(phi, q)? == Finiteness::Infinite {
        return Err(Error::PhiInfinite);
    }
    let c1 = construct(q, l, eps, None)?;
    let (c, fano_type, k2) = match sys.y_card() {
        YCard::CountablyInfinite => (c1.clone(), 1, None),
        YCard::Finite(n) => {
            let c2 = construct(q, l, eps, Some(n.saturating_mul(l)))?;
            let k2 = c2.indices.k.finite();
            (c2, 2, k2)
        }
    };
    let value = phi_eval(phi, &c.dist)?;
    let closed_form_check = closed_form(phi, &c, l);
    let (sharp, spade_min_y, spade_min_y_k2) = sharpness(sys, &c1, k2);
    Ok(BoundReport {
        measure: phi.name(),
        direction: if phi.concave { BoundDirection::Upper } else { BoundDirection::Lower },
        value,
        closed_form_check,
        fano_type,
        distribution: c.dist,
        indices: c.indices,
        sharp,
        spade_min_y,
        spade_min_y_k2,
    })
}

/// Upper bound on `h_phi(X|Y)` for a concave `phi` over all joints that
/// satisfy the system's constraints.
pub fn bound(sys: &SystemSpec, phi: &PhiFunctional) -> Result<BoundReport> {
    if !phi.concave {
        return Err(Error::NonConcavePhi(phi.name()));
    }
    evaluate(sys, phi)
}

/// Value of a convex `phi` at the Fano distribution, which is the infimum
/// of `h_phi(X|Y)` over the system's joints.
pub fn infimum(sys: &SystemSpec, phi: &PhiFunctional) -> Result<BoundReport> {
    if !phi.convex {
        return Err(Error::InvalidParameter(format!("{} is not convex", phi.name())));
    }
    evaluate(sys, phi)
}

/// The Fano-type bound on a named measure. Concave functionals give upper
/// bounds; convex ones give lower bounds, which the decreasing maps of the
/// Rényi-type measures turn back into upper bounds.
pub fn bound_measure(sys: &SystemSpec, measure: &Measure) -> Result<BoundReport> {
    let needs_alphabet = matches!(measure, Measure::Ktv | Measure::Dbar);
    if needs_alphabet && !sys.q().is_tail_free() {
        return Err(Error::UnsupportedTail(format!("{measure} needs a finite alphabet")));
    }
    let phi = measure.phi(sys.q().len().max(2))?;
    let mut report = evaluate(sys, &phi)?;
    report.measure = measure.to_string();
    report.direction = measure.direction();
    report.value = measure.from_phi_value(report.value);
    report.closed_form_check = report.closed_form_check.map(|v| measure.from_phi_value(v));
    Ok(report)
}

/// The distribution `S` that minimizes Shannon entropy over the
/// variational ball of radius `delta` around `q`: `delta` is moved from the
/// smallest masses onto the largest one.
#[derive(Clone, Debug, Serialize)]
pub struct HoYeung {
    pub distribution: Pmf,
    pub entropy: Extended,
    /// Last position that keeps positive mass (`None` for `delta = 0`).
    pub b: Option<usize>,
}

pub fn ho_yeung_truncation(q: &Pmf, delta: f64) -> Result<HoYeung> {
    let mut view = DecreasingView::new(q)?;
    let first = view.at(1)?;
    let max = 1.0 - first;
    if !(delta >= 0.0 && delta <= max + GRID) {
        return Err(Error::DeltaOutOfRange { delta, max });
    }
    if delta == 0.0 {
        let distribution = q.decreasing_rearrangement()?;
        let entropy = crate::measures::shannon_entropy(&distribution);
        return Ok(HoYeung { distribution, entropy, b: None });
    }
    let total = 1.0 - q.defect();
    let tail_from = |view: &mut DecreasingView, b: usize| -> Result<f64> { Ok(total - view.prefix(b - 1)?) };
    let mut b = 1;
    while tail_from(&mut view, b + 1)? >= delta - GRID * 1e-3 {
        b += 1;
        if !view.has_tail() && b > view.len() {
            break;
        }
    }
    let mut masses: Vec<f64> = (1..=b).map(|x| view.at(x)).collect::<Result<_>>()?;
    masses[b - 1] = (tail_from(&mut view, b)? - delta).max(0.0);
    masses[0] += delta;
    if b == 1 {
        masses[0] = total;
    }
    let distribution = Pmf::from_closed_form(masses, None);
    let entropy = Extended::Finite(kahan_sum(distribution.masses().iter().map(|&m| crate::numeric::eta(m))));
    Ok(HoYeung { distribution, entropy, b: Some(b) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{binary_entropy, renyi_entropy, shannon_entropy};
    use crate::pmf::majorizes;
    use proptest::prelude::*;

    fn pmf(m: &[f64]) -> Pmf {
        Pmf::new(m.to_vec()).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    fn h(p: &Pmf) -> f64 {
        shannon_entropy(p).finite().unwrap()
    }

    #[test]
    fn type0_examples() {
        let p = fano_type0(8, 3, 0.375).unwrap();
        let mut expected = vec![0.625 / 3.0; 3];
        expected.extend([0.075; 5]);
        assert!(close(p.masses(), &expected, 1e-15));
        let p = fano_type0(5, 2, 0.0).unwrap();
        assert!(close(p.masses(), &[0.5, 0.5, 0.0, 0.0, 0.0], 0.0));
        assert!(close(fano_type0(2, 1, 0.25).unwrap().masses(), &[0.75, 0.25], 1e-15));
        assert!(matches!(fano_type0(4, 1, 0.8), Err(Error::EpsOutOfRange { .. })));
    }

    /// Grid search over the 3-symbol simplex in steps of 1/200 for the
    /// entropy maximizer among marginals that majorize `q` and whose top
    /// mass is at least `1 - eps`.
    fn grid_maximizer(q: &[f64; 3], eps: f64) -> [f64; 3] {
        let res = 200;
        let mut best = (f64::NEG_INFINITY, [0.0; 3]);
        let mut qs = *q;
        qs.sort_by(|a, b| b.total_cmp(a));
        for a in 0..=res {
            for b in 0..=res - a {
                let c = res - a - b;
                let mut r = [a as f64 / res as f64, b as f64 / res as f64, c as f64 / res as f64];
                r.sort_by(|x, y| y.total_cmp(x));
                if r[0] < qs[0] - 1e-12 || r[0] + r[1] < qs[0] + qs[1] - 1e-12 || r[0] < 1.0 - eps - 1e-12 {
                    continue;
                }
                let hv: f64 = r.iter().map(|&u| crate::numeric::eta(u)).sum();
                if hv > best.0 + 1e-15 {
                    best = (hv, r);
                }
            }
        }
        best.1
    }

    #[test]
    fn type1_example_matches_grid_maximizer() {
        let q = pmf(&[0.5, 0.3, 0.2]);
        let (p, idx) = fano_type1(&q, 1, 0.3).unwrap();
        assert!(close(p.masses(), &[0.7, 0.15, 0.15], 1e-15));
        assert_eq!((idx.j, idx.k), (1, KIndex::Finite(3)));
        assert!((idx.v - 0.7).abs() < 1e-15 && (idx.w.unwrap() - 0.15).abs() < 1e-15);
        let oracle = grid_maximizer(&[0.5, 0.3, 0.2], 0.3);
        assert!(close(p.masses(), &oracle, 1e-12));
        assert!((h(&p) - 0.8188085).abs() < 1e-6);
    }

    #[test]
    fn type1_at_upper_endpoint_is_sorted_q() {
        let q = pmf(&[0.2, 0.5, 0.3]);
        let (p, idx) = fano_type1(&q, 2, 0.2).unwrap();
        assert!(close(p.masses(), &[0.5, 0.3, 0.2], 1e-15));
        assert_eq!((idx.j, idx.k, idx.w), (3, KIndex::Finite(2), None));
    }

    #[test]
    fn type1_on_uniform_is_type0() {
        for (m, l) in [(4, 1), (8, 3), (6, 5)] {
            for i in 0..10 {
                let eps = (1.0 - l as f64 / m as f64) * i as f64 / 9.0;
                let (p, _) = fano_type1(&Pmf::uniform(m), l, eps).unwrap();
                assert!(close(p.masses(), fano_type0(m, l, eps).unwrap().masses(), 1e-14));
            }
        }
    }

    #[test]
    fn type1_rejects_infeasible_budget() {
        let q = pmf(&[0.5, 0.3, 0.2]);
        assert!(matches!(fano_type1(&q, 1, 0.6), Err(Error::Infeasible { .. })));
    }

    #[test]
    fn type2_examples() {
        let q = pmf(&[0.5, 0.3, 0.2]);
        let (p, idx) = fano_type2(&q, 1, 0.3, 2).unwrap();
        assert!(close(p.masses(), &[0.7, 0.1, 0.2], 1e-15));
        assert_eq!(idx.k, KIndex::Finite(2));
        let (p2, _) = fano_type2(&q, 1, 0.3, 3).unwrap();
        let (p1, _) = fano_type1(&q, 1, 0.3).unwrap();
        assert_eq!(p2.masses(), p1.masses());
        let (p, _) = fano_type2(&q, 1, 0.5, 2).unwrap();
        assert!(close(p.masses(), &[0.5, 0.3, 0.2], 1e-15));
        assert!(matches!(fano_type2(&q, 1, 0.1, 2), Err(Error::Infeasible { .. })));
    }

    #[test]
    fn type3_examples() {
        let q = pmf(&[0.5, 0.3, 0.2]);
        let p = fano_type3(&q, 1, 0.5, 2, &[1, 2]).unwrap();
        assert!(close(p.masses(), &[0.5, 0.5, 0.0], 1e-15));
        // upper end of the restricted range leaves q unchanged
        let p = fano_type3(&q, 1, 0.7, 2, &[1, 2]).unwrap();
        assert!(close(p.masses(), q.masses(), 1e-15));
        assert!(matches!(fano_type3(&q, 1, 0.5, 2, &[1]), Err(Error::BadZCardinality { .. })));
        assert!(matches!(fano_type3(&q, 1, 0.3, 2, &[1, 2]), Err(Error::Infeasible { .. })));
    }

    #[test]
    fn type3_on_leading_block_is_type2() {
        let q = pmf(&[0.1, 0.35, 0.05, 0.25, 0.15, 0.1]);
        let order = q.rearrangement_order();
        for (l, n) in [(1, 2), (1, 3), (2, 2)] {
            let (lo, hi) = feasible_range(&q, l, YCard::Finite(n));
            for i in 0..6 {
                let eps = lo + (hi - lo) * i as f64 / 5.0;
                let z: Vec<usize> = order[..n * l].to_vec();
                let p3 = fano_type3(&q, l, eps, n, &z).unwrap();
                let (p2, _) = fano_type2(&q, l, eps, n).unwrap();
                assert!(close(&p3.sorted_masses(), &p2.sorted_masses(), 1e-14));
            }
        }
    }

    #[test]
    fn spade_examples() {
        assert_eq!(spade_bound(2, 7, 3), 15);
        assert_eq!(spade_bound(3, 9, 3), 7);
        assert_eq!(spade_min_y(&pmf(&[0.5, 0.3, 0.2]), 1, 0.3).unwrap(), 3);
        assert_eq!(spade_bound(1, 40, 20), 39 * 39 + 1);
        assert_eq!(spade_bound(4, 3, 3), 1);
    }

    #[test]
    fn k_infinite_needs_zero_budget_on_infinite_support() {
        let t = TailModel::geometric(0.1, 0.5).unwrap();
        let q = Pmf::validate(vec![0.5, 0.3], None, Some(t), false).unwrap();
        let (p, idx) = fano_type1(&q, 2, 0.0).unwrap();
        assert_eq!(idx.k, KIndex::Infinite);
        assert!(close(p.masses(), &[0.5, 0.5], 1e-15));
        assert_eq!(spade_min_y(&q, 2, 0.0), Err(Error::KInfinite));
        let (_, idx) = fano_type1(&q, 2, 0.01).unwrap();
        assert!(idx.k.finite().is_some());
    }

    #[test]
    fn bound_examples() {
        let sys = SystemSpec::new(Pmf::uniform(2), 1, 0.25, YCard::CountablyInfinite).unwrap();
        let r = bound(&sys, &PhiFunctional::shannon()).unwrap();
        assert!((r.value.finite().unwrap() - binary_entropy(0.25)).abs() < 1e-15);
        assert!((binary_entropy(0.25) - 0.562335).abs() < 1e-6);
        let r = bound_measure(&sys, &Measure::Renyi(2.0)).unwrap();
        assert!((r.value.finite().unwrap() + 0.625f64.ln()).abs() < 1e-15);
        assert_eq!(r.direction, BoundDirection::Upper);
        let q = pmf(&[0.5, 0.3, 0.2]);
        let sys = SystemSpec::new(q.clone(), 1, 0.5, YCard::CountablyInfinite).unwrap();
        let r = bound(&sys, &PhiFunctional::shannon()).unwrap();
        assert!((r.value.finite().unwrap() - h(&q)).abs() < 1e-15);
        assert!(r.sharp.contains(&SharpnessCondition::EpsAtUpperEndpoint));
        let bad = PhiFunctional::lp_norm(2.0).unwrap();
        assert!(matches!(bound(&sys, &bad), Err(Error::NonConcavePhi(_))));
    }

    #[test]
    fn bound_reports_sharpness() {
        let q = pmf(&[0.5, 0.3, 0.2]);
        let sys = SystemSpec::new(q.clone(), 1, 0.3, YCard::CountablyInfinite).unwrap();
        let r = bound(&sys, &PhiFunctional::shannon()).unwrap();
        assert_eq!(r.fano_type, 1);
        assert_eq!(r.spade_min_y, Some(3));
        assert!(r.sharp.contains(&SharpnessCondition::SpadeInteriorEps));
        assert!(r.sharp.contains(&SharpnessCondition::SpadeFiniteSupport));
        let sys = SystemSpec::new(q, 1, 0.3, YCard::Finite(2)).unwrap();
        let r = bound(&sys, &PhiFunctional::shannon()).unwrap();
        assert_eq!(r.fano_type, 2);
        assert_eq!(r.spade_min_y_k2, Some(2));
        assert_eq!(r.sharp, vec![SharpnessCondition::FiniteYCardinality]);
        let expected = h(&pmf(&[0.7, 0.1, 0.2]));
        assert!((r.value.finite().unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn convex_measures_give_lower_bounds() {
        let q = pmf(&[0.5, 0.3, 0.2]);
        let sys = SystemSpec::new(q, 1, 0.3, YCard::CountablyInfinite).unwrap();
        let r = bound_measure(&sys, &Measure::Ktv).unwrap();
        assert_eq!(r.direction, BoundDirection::Lower);
        // dbar(0.7, 0.15, 0.15) = (2 * 0.55 + 2 * 0.55) / 4
        assert!((r.value.finite().unwrap() - 0.55).abs() < 1e-15);
        let r = bound_measure(&sys, &Measure::Arimoto(2.0)).unwrap();
        assert_eq!(r.direction, BoundDirection::Upper);
        let expected = renyi_entropy(&pmf(&[0.7, 0.15, 0.15]), 2.0).finite().unwrap();
        assert!((r.value.finite().unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn closed_form_matches_evaluation() {
        let q = pmf(&[0.3, 0.25, 0.2, 0.1, 0.08, 0.07]);
        for (l, eps) in [(1, 0.5), (2, 0.3), (3, 0.1), (2, 0.45)] {
            for m in [Measure::Shannon, Measure::Renyi(0.5), Measure::Hayashi(2.0), Measure::Quadratic] {
                let sys = SystemSpec::new(q.clone(), l, eps, YCard::CountablyInfinite).unwrap();
                let r = bound_measure(&sys, &m).unwrap();
                let a = r.value.finite().unwrap();
                let b = r.closed_form_check.unwrap().finite().unwrap();
                assert!((a - b).abs() < 1e-12, "{m}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn geometric_tail_bound_is_finite() {
        let t = TailModel::geometric(0.05, 0.5).unwrap();
        let q = Pmf::validate(vec![0.5, 0.3, 0.1], None, Some(t), false).unwrap();
        let sys = SystemSpec::new(q.clone(), 1, 0.3, YCard::CountablyInfinite).unwrap();
        let r = bound(&sys, &PhiFunctional::shannon()).unwrap();
        let v = r.value.finite().unwrap();
        // the same bound on a finely truncated copy of q
        let qt = q.truncate(1e-16, true).unwrap().pmf;
        let (pt, _) = fano_type1(&qt, 1, 0.3).unwrap();
        assert!((v - h(&pt)).abs() < 1e-12);
        assert!((r.closed_form_check.unwrap().finite().unwrap() - v).abs() < 1e-12);
    }

    #[test]
    fn log_power_tail_triggers_guard() {
        let t = TailModel::log_power(0.5, 3).unwrap();
        let q = Pmf::validate(vec![1.0 - t.mass()], None, Some(t), false).unwrap();
        assert_eq!(phi_finiteness_guard(&PhiFunctional::shannon(), &q).unwrap(), Finiteness::Infinite);
        let sys = SystemSpec::new(q, 1, 0.1, YCard::CountablyInfinite).unwrap();
        assert_eq!(bound(&sys, &PhiFunctional::shannon()).unwrap_err(), Error::PhiInfinite);
        let g = TailModel::geometric(0.1, 0.5).unwrap();
        let q = Pmf::validate(vec![0.8], None, Some(g), false).unwrap();
        assert_eq!(phi_finiteness_guard(&PhiFunctional::shannon(), &q).unwrap(), Finiteness::Finite);
        assert_eq!(phi_finiteness_guard(&PhiFunctional::shannon(), &pmf(&[0.5, 0.5])).unwrap(), Finiteness::Finite);
    }

    #[test]
    fn ho_yeung_examples() {
        let q = pmf(&[0.2, 0.5, 0.3]);
        let r = ho_yeung_truncation(&q, 0.0).unwrap();
        assert_eq!(r.distribution.masses(), &[0.5, 0.3, 0.2]);
        let r = ho_yeung_truncation(&q, 0.1).unwrap();
        assert!(close(r.distribution.masses(), &[0.6, 0.3, 0.1], 1e-15));
        assert_eq!(r.b, Some(3));
        assert!((r.entropy.finite().unwrap() - 0.897946).abs() < 1e-6);
        let r = ho_yeung_truncation(&q, 0.5).unwrap();
        assert!(close(r.distribution.masses(), &[1.0, 0.0], 1e-15));
        assert_eq!(r.entropy.finite().unwrap(), 0.0);
        assert!(matches!(ho_yeung_truncation(&q, 0.6), Err(Error::DeltaOutOfRange { .. })));
    }

    fn arb_pmf(max_len: usize) -> impl Strategy<Value = Pmf> {
        prop::collection::vec(0.0f64..1.0, 2..=max_len)
            .prop_filter_map("nonzero", |w| Pmf::validate(w, None, None, true).ok())
    }

    fn arb_system() -> impl Strategy<Value = (Pmf, usize, f64, usize)> {
        (arb_pmf(7), 1usize..4, 0.0f64..=1.0, 1usize..5).prop_map(|(q, l, t, n)| {
            let (lo, hi) = feasible_range(&q, l, YCard::Finite(n));
            (q, l, lo + t * (hi - lo), n)
        })
    }

    proptest! {
        #[test]
        fn type1_is_sorted_feasible_and_majorizes_q((q, l, eps, _) in arb_system()) {
            let (p, idx) = fano_type1(&q, l, eps).unwrap();
            prop_assert!(p.masses().windows(2).all(|w| w[0] >= w[1] - 1e-15));
            prop_assert!((kahan_sum(p.masses().iter().copied()) - 1.0).abs() < 1e-12);
            prop_assert!((marginal_list_error(&p, l) - eps).abs() < 1e-12);
            prop_assert!(majorizes(&p, &q).holds);
            if let (Some(k), Some(w)) = (idx.k.finite(), idx.w) {
                prop_assert!(k >= l && idx.v >= w - 1e-15);
            }
        }

        #[test]
        fn type1_is_majorized_by_every_feasible_candidate(
            q in arb_pmf(6), l in 1usize..3, moves in prop::collection::vec((0usize..6, 0usize..6, 0.0f64..1.0), 0..6),
            slack in 0.0f64..1.0
        ) {
            let mut r = q.masses().to_vec();
            for (i, j, t) in moves {
                let (i, j) = (i % r.len(), j % r.len());
                let (hi, lo) = if r[i] >= r[j] { (i, j) } else { (j, i) };
                let d = t * r[lo];
                r[hi] += d;
                r[lo] -= d;
            }
            let r = Pmf::from_closed_form(r, None);
            let hi = marginal_list_error(&q, l);
            let er = marginal_list_error(&r, l);
            let eps = (er + slack * (hi - er)).min(hi);
            let (p, _) = fano_type1(&q, l, eps).unwrap();
            prop_assert!(majorizes(&r, &p).holds);
        }

        #[test]
        fn majorization_chain((q, l, eps, n) in arb_system(), seed in any::<u64>()) {
            let (p1, _) = fano_type1(&q, l, eps).unwrap();
            let (p2, _) = fano_type2(&q, l, eps, n).unwrap();
            prop_assert!(majorizes(&p2, &p1).holds);
            let sys_fin = SystemSpec::new(q.clone(), l, eps, YCard::Finite(n)).unwrap();
            let sys_inf = SystemSpec::new(q.clone(), l, eps, YCard::CountablyInfinite).unwrap();
            let bf = bound(&sys_fin, &PhiFunctional::shannon()).unwrap().value.finite().unwrap();
            let bi = bound(&sys_inf, &PhiFunctional::shannon()).unwrap().value.finite().unwrap();
            prop_assert!(bf <= bi + 1e-12);
            // a pseudo-random decoding range of the required size
            let nl = n * l;
            if nl <= q.len() {
                let mut idx: Vec<usize> = (0..q.len()).collect();
                let mut s = seed;
                for i in (1..idx.len()).rev() {
                    s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    idx.swap(i, (s >> 33) as usize % (i + 1));
                }
                let z = &idx[..nl];
                let zmass: f64 = z.iter().map(|&x| q.masses()[x]).sum();
                let mut top: Vec<f64> = z.iter().map(|&x| q.masses()[x]).collect();
                top.sort_by(|a, b| b.total_cmp(a));
                let upper = 1.0 - top[..l].iter().sum::<f64>();
                if eps >= 1.0 - zmass && eps <= upper {
                    let p3 = fano_type3(&q, l, eps, n, z).unwrap();
                    prop_assert!(majorizes(&p3, &p2).holds);
                }
            }
        }

        #[test]
        fn shannon_bound_nondecreasing_in_eps(q in arb_pmf(6), l in 1usize..3, a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let hi = marginal_list_error(&q, l);
            let (e1, e2) = (hi * a.min(b), hi * a.max(b));
            let (p1, _) = fano_type1(&q, l, e1).unwrap();
            let (p2, _) = fano_type1(&q, l, e2).unwrap();
            prop_assert!(h(&p1) <= h(&p2) + 1e-12);
        }

        #[test]
        fn entropy_of_type1_is_midpoint_concave(q in arb_pmf(6), l in 1usize..3, a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let hi = marginal_list_error(&q, l);
            let (e1, e2) = (hi * a, hi * b);
            let f = |e: f64| h(&fano_type1(&q, l, e).unwrap().0);
            prop_assert!(f(0.5 * (e1 + e2)) >= 0.5 * (f(e1) + f(e2)) - 1e-10);
        }
    }
}
