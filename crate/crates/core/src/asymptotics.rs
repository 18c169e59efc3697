//! Source sequences `X_1, X_2, ...` and finite-`n` diagnostics of how the
//! Fano-type bound behaves along them.

use crate::error::{Error, Result};
use crate::errprob::{marginal_list_error, symbolwise_error, SystemSpec, YCard};
use crate::fano::{bound_measure, fano_type1};
use crate::measures::{binary_entropy, renyi_entropy, shannon_entropy, JointDist, Measure};
use crate::numeric::{kahan_sum, Extended, KahanSum};
use crate::pmf::{geometric_entropy_rate, poisson_ln_pmf, Pmf, TailModel};
use serde::Serialize;
use std::fmt::Write as _;
use std::str::FromStr;

/// Mass below which the left end of a Poisson law is dropped.
const POISSON_LEFT_CUTOFF: f64 = 1e-18;
const MAX_PRODUCT_SIZE: usize = 1 << 20;

/// A positive sequence indexed by `n >= 1`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    Constant { value: f64 },
    /// `scale * ratio^n`
    Geometric { scale: f64, ratio: f64 },
    /// `scale / n`
    Harmonic { scale: f64 },
}

impl Schedule {
    pub fn at(&self, n: u64) -> f64 {
        match *self {
            Schedule::Constant { value } => value,
            Schedule::Geometric { scale, ratio } => scale * ratio.powf(n as f64),
            Schedule::Harmonic { scale } => scale / n as f64,
        }
    }
}

/// Parses `const:C`, `geom:SCALE:RATIO` and `harmonic:SCALE`.
impl FromStr for Schedule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |i: usize| -> Result<f64> {
            parts
                .get(i)
                .and_then(|p| p.parse::<f64>().ok())
                .filter(|v| v.is_finite() && *v > 0.0)
                .ok_or_else(|| Error::Parse(format!("bad schedule '{s}'")))
        };
        let schedule = match (parts[0], parts.len()) {
            ("const", 2) => Schedule::Constant { value: num(1)? },
            ("geom", 3) => Schedule::Geometric { scale: num(1)?, ratio: num(2)? },
            ("harmonic", 2) => Schedule::Harmonic { scale: num(1)? },
            _ => return Err(Error::Parse(format!("bad schedule '{s}'"))),
        };
        Ok(schedule)
    }
}

/// A general source, given by the law of each `X_n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceFamily {
    /// The same law for every `n`.
    Fixed { q: Pmf },
    /// `X_n` is `n` independent copies of `base`.
    IidProduct { base: Pmf },
    /// `P(k) = λ_n^(k-1) e^(-λ_n) / (k-1)!` for `k >= 1`.
    Poisson { mean: Schedule },
    /// Uniform on `L` symbols with mass `1 - δ_n`, followed by a geometric
    /// tail of mass `δ_n` whose entropy per unit mass is `γ / δ_n`.
    NonAep { gamma: f64, list_size: usize, delta: Schedule },
    /// Uniform bits.
    UniformBits,
}

/// The success probability of the geometric part of [`SourceFamily::NonAep`],
/// kept in log form because it underflows for small `δ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NonAepParameter {
    pub ln_p: f64,
    pub p: f64,
}

/// Solves `δ h2(p) / p = γ` for `0 < p <= min{1, (1-δ)/(δL)}` by bisection
/// on `t = -ln p`.
pub fn solve_non_aep(gamma: f64, list_size: usize, delta: f64) -> Result<NonAepParameter> {
    if !(gamma > 0.0) || !(delta > 0.0 && delta < 1.0) || list_size == 0 {
        return Err(Error::InvalidParameter("need γ > 0, 0 < δ < 1 and L >= 1".into()));
    }
    let target = gamma / delta;
    let p_max = ((1.0 - delta) / (delta * list_size as f64)).min(1.0);
    let rate = |t: f64| geometric_entropy_rate(-t);
    let mut lo = -p_max.ln();
    if rate(lo) > target {
        return Err(Error::BisectionFailure(format!(
            "δ h2(p)/p exceeds γ already at p = {p_max}; δ = {delta} is too large"
        )));
    }
    // h2(p)/p >= -ln p, so the root lies below t = target
    let mut hi = target + 1.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if rate(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi.max(1.0) {
            break;
        }
    }
    let t = 0.5 * (lo + hi);
    Ok(NonAepParameter { ln_p: -t, p: (-t).exp() })
}

fn poisson_law(mean: f64) -> Result<Pmf> {
    if !(mean > 0.0 && mean.is_finite()) {
        return Err(Error::InvalidParameter(format!("poisson mean must be positive, got {mean}")));
    }
    let mode = mean.floor() as usize;
    // walk left from the mode until the atoms are negligible
    let mut a = mode;
    while a > 0 && poisson_ln_pmf(mean, a - 1).exp() >= POISSON_LEFT_CUTOFF {
        a -= 1;
    }
    let floor = poisson_ln_pmf(mean, a).exp();
    let mut b = mode;
    while poisson_ln_pmf(mean, b + 1).exp() > floor {
        b += 1;
    }
    let masses: Vec<f64> = (a..=b).map(|n| poisson_ln_pmf(mean, n).exp()).collect();
    let tail = TailModel::poisson(mean, b + 1)?;
    Pmf::validate(masses, None, Some(tail), false)
}

fn product(base: &Pmf, n: u64) -> Result<Pmf> {
    if !base.is_tail_free() {
        return Err(Error::UnsupportedTail("product sources need a finite base".into()));
    }
    let size = (base.len() as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if size > MAX_PRODUCT_SIZE as u128 {
        return Err(Error::InvalidParameter(format!("product alphabet of size {size} is too large")));
    }
    let mut masses = vec![1.0];
    for _ in 0..n {
        masses = masses.iter().flat_map(|&m| base.masses().iter().map(move |&b| m * b)).collect();
    }
    Ok(Pmf::from_closed_form(masses, None))
}

/// The law of `X_n`.
pub fn realize(src: &SourceFamily, n: u64) -> Result<Pmf> {
    if n == 0 {
        return Err(Error::InvalidParameter("sources are indexed from n = 1".into()));
    }
    match src {
        SourceFamily::Fixed { q } => Ok(q.clone()),
        SourceFamily::IidProduct { base } => product(base, n),
        SourceFamily::Poisson { mean } => poisson_law(mean.at(n)),
        SourceFamily::NonAep { gamma, list_size, delta } => {
            let d = delta.at(n);
            let par = solve_non_aep(*gamma, *list_size, d)?;
            let masses = vec![(1.0 - d) / *list_size as f64; *list_size];
            let tail = TailModel::geometric_from_log(d, par.ln_p)?;
            Pmf::validate(masses, None, Some(tail), false)
        }
        SourceFamily::UniformBits => Ok(Pmf::uniform(2)),
    }
}

/// `P{ -ln P(X) <= (1 - δ) H(P) }`; zero when `H(P) = 0`.
pub fn aep_defect(p: &Pmf, delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("δ must be positive, got {delta}")));
    }
    let h = match shannon_entropy(p) {
        Extended::Finite(h) => h,
        Extended::Infinite => return Err(Error::InvalidParameter("entropy is infinite".into())),
    };
    if h == 0.0 {
        return Ok(0.0);
    }
    let threshold = (1.0 - delta) * h;
    let mut acc = KahanSum::new();
    for &m in p.masses() {
        if m > 0.0 && -m.ln() <= threshold {
            acc.add(m);
        }
    }
    if let Some(t) = p.tail().filter(|t| t.is_nonincreasing()) {
        // tail surprisals only grow, so stop at the first one above the threshold
        let mut i = 0;
        while -t.ln_term(i) <= threshold {
            acc.add(t.term(i));
            i += 1;
        }
    }
    Ok(acc.value())
}

/// Error budget used along a trace.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ErrorSchedule {
    /// The error of guessing `X_n` without observations.
    Independence,
    Given { eps: Schedule },
}

/// One row of an equivocation trace. Rows whose budget is infeasible keep
/// `bound` and the derived columns empty.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub n: u64,
    #[serde(rename = "H")]
    pub h: f64,
    #[serde(rename = "logL")]
    pub log_l: f64,
    pub eps: f64,
    pub bound: Option<f64>,
    /// `max(bound - ln L, 0)`
    pub excess: Option<f64>,
    pub excess_ratio: Option<f64>,
    pub feasible: bool,
}

/// Entropy of `p` in the family of `measure`: Shannon, or Rényi of the
/// measure's order.
fn source_entropy(p: &Pmf, measure: &Measure) -> Extended {
    match *measure {
        Measure::Renyi(a) | Measure::Arimoto(a) | Measure::Hayashi(a) => renyi_entropy(p, a),
        _ => shannon_entropy(p),
    }
}

/// Bound on the equivocation of `X_n` given a countable `Y_n` with list
/// size `L_n` and error `eps_n`, for each `n` in `ns`.
pub fn equivocation_trace(
    src: &SourceFamily,
    list: &Schedule,
    errors: &ErrorSchedule,
    measure: &Measure,
    ns: &[u64],
) -> Result<Vec<TraceRow>> {
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let p = realize(src, n)?;
        let l = (list.at(n).round() as usize).max(1);
        let eps = match errors {
            ErrorSchedule::Independence => marginal_list_error(&p, l),
            ErrorSchedule::Given { eps } => eps.at(n),
        };
        let h = source_entropy(&p, measure).to_f64();
        let log_l = (l as f64).ln();
        let row = match SystemSpec::new(p, l, eps, YCard::CountablyInfinite) {
            Ok(sys) => {
                let b = bound_measure(&sys, measure)?.value.to_f64();
                let excess = (b - log_l).max(0.0);
                TraceRow {
                    n,
                    h,
                    log_l,
                    eps,
                    bound: Some(b),
                    excess: Some(excess),
                    excess_ratio: Some(excess / h),
                    feasible: true,
                }
            }
            Err(Error::Infeasible { .. }) => TraceRow {
                n,
                h,
                log_l,
                eps,
                bound: None,
                excess: None,
                excess_ratio: None,
                feasible: false,
            },
            Err(e) => return Err(e),
        };
        rows.push(row);
    }
    Ok(rows)
}

fn csv_number(x: Option<f64>) -> String {
    x.map_or(String::new(), |v| format!("{v:.16e}"))
}

/// Trace rows as CSV with header `n,H,logL,eps,bound,excess,excess_ratio`.
pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from("n,H,logL,eps,bound,excess,excess_ratio\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.n,
            csv_number(Some(r.h)),
            csv_number(Some(r.log_l)),
            csv_number(Some(r.eps)),
            csv_number(r.bound),
            csv_number(r.excess),
            csv_number(r.excess_ratio)
        );
    }
    out
}

/// Per-position view of a block of `n` observations.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SymbolwiseReport {
    /// Mean of the per-position list errors.
    pub p_e_sym: f64,
    /// `H(X_i | Y_i)` for each position.
    pub position_entropies: Vec<f64>,
    /// `sum_i H(X_i | Y_i)`, an upper bound on `H(X^n | Y^n)`.
    pub chain_bound: f64,
    /// `chain_bound / n`
    pub normalized_bound: f64,
    /// Fano bound at each position's own marginal and error.
    pub position_fano_bounds: Vec<f64>,
    pub mean_fano_bound: f64,
    /// Fano bound at the reference marginal and the mean error, which
    /// dominates `mean_fano_bound` when the reference is majorized by
    /// every position marginal.
    pub jensen_bound: Option<f64>,
    pub log_l: f64,
}

/// Symbol-wise diagnostics for positions `(X_i, Y_i)` with list size `L`.
/// The reference marginal defaults to the common marginal when all
/// positions share one.
pub fn symbolwise_trace(joints: &[JointDist], list_size: usize, reference: Option<&Pmf>) -> Result<SymbolwiseReport> {
    let p_e_sym = symbolwise_error(joints, list_size)?;
    let position_entropies: Vec<f64> = joints.iter().map(|j| Measure::Shannon.evaluate(j)).collect::<Result<_>>()?;
    let chain_bound = kahan_sum(position_entropies.iter().copied());
    let mut position_fano_bounds = Vec::with_capacity(joints.len());
    for j in joints {
        let q = j.marginal();
        let eps = crate::errprob::list_map_error(j, list_size);
        let eps = eps.min(marginal_list_error(&q, list_size));
        let (p, _) = fano_type1(&q, list_size, eps)?;
        position_fano_bounds.push(shannon_entropy(&p).to_f64());
    }
    let mean_fano_bound = kahan_sum(position_fano_bounds.iter().copied()) / joints.len() as f64;
    let marginals: Vec<Pmf> = joints.iter().map(JointDist::marginal).collect();
    let common = marginals
        .iter()
        .all(|m| m.len() == marginals[0].len() && m.masses().iter().zip(marginals[0].masses()).all(|(a, b)| (a - b).abs() <= 1e-12));
    let reference = reference.cloned().or_else(|| common.then(|| marginals[0].clone()));
    let jensen_bound = match reference {
        Some(r) => {
            let eps = p_e_sym.min(marginal_list_error(&r, list_size));
            Some(shannon_entropy(&fano_type1(&r, list_size, eps)?.0).to_f64())
        }
        None => None,
    };
    Ok(SymbolwiseReport {
        p_e_sym,
        normalized_bound: chain_bound / joints.len() as f64,
        position_entropies,
        chain_bound,
        position_fano_bounds,
        mean_fano_bound,
        jensen_bound,
        log_l: (list_size as f64).ln(),
    })
}

/// `H(X_n)` of [`SourceFamily::NonAep`] in closed form:
/// `h2(δ) + (1 - δ) ln L + γ`.
pub fn non_aep_entropy(gamma: f64, list_size: usize, delta: f64) -> f64 {
    binary_entropy(delta) + (1.0 - delta) * (list_size as f64).ln() + gamma
}

/// Gaussian approximation `ln(2 π e λ) / 2` of the Poisson entropy.
pub fn poisson_entropy_approx(mean: f64) -> f64 {
    0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * mean).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::eta;

    #[test]
    fn schedules() {
        assert_eq!("const:0.5".parse::<Schedule>().unwrap().at(7), 0.5);
        assert_eq!("geom:1:10".parse::<Schedule>().unwrap().at(3), 1000.0);
        assert_eq!("harmonic:1".parse::<Schedule>().unwrap().at(4), 0.25);
        assert!("geom:1".parse::<Schedule>().is_err());
        assert!("harmonic:-1".parse::<Schedule>().is_err());
    }

    #[test]
    fn non_aep_parameter() {
        let par = solve_non_aep(1.0, 2, 0.1).unwrap();
        assert!(par.p > 1.2e-4 && par.p < 1.3e-4, "{}", par.p);
        let h2 = binary_entropy(par.p);
        assert!((0.1 * h2 / par.p - 1.0).abs() < 1e-12);
        // tiny δ: p underflows but its log is still accurate
        let par = solve_non_aep(1.0, 2, 1e-4).unwrap();
        assert!((par.ln_p + 1e4 - 1.0).abs() < 1e-6);
        assert!(matches!(solve_non_aep(1.0, 1, 0.9), Err(Error::BisectionFailure(_))));
    }

    #[test]
    fn non_aep_law() {
        let src = SourceFamily::NonAep { gamma: 1.0, list_size: 2, delta: Schedule::Harmonic { scale: 1.0 } };
        for n in [10, 100, 10_000] {
            let p = realize(&src, n).unwrap();
            let d = 1.0 / n as f64;
            assert!((marginal_list_error(&p, 2) - d).abs() < 1e-15);
            let h = shannon_entropy(&p).finite().unwrap();
            assert!((h - non_aep_entropy(1.0, 2, d)).abs() < 1e-9);
        }
        let p = realize(&src, 10_000).unwrap();
        assert!((p.masses()[0] - 0.5).abs() < 1e-4);
        assert!(aep_defect(&p, 0.2).unwrap() > 0.99);
    }

    #[test]
    fn poisson_law_matches_formula() {
        let p = poisson_law(4.0).unwrap();
        // index 0 holds the smallest kept atom; locate k via the mode
        let total: f64 = p.masses().iter().sum::<f64>() + p.tail().unwrap().mass();
        assert!((total - 1.0).abs() < 1e-12);
        let direct: Vec<f64> = (0..12).map(|k: i32| 4f64.powi(k) * (-4f64).exp() / (1..=k).map(f64::from).product::<f64>()).collect();
        assert!(direct.iter().zip(p.masses()).all(|(a, b)| (a - b).abs() < 1e-13 * a));
        let h = shannon_entropy(&p).finite().unwrap();
        let h_direct: f64 = (0..200).map(|k| eta(poisson_ln_pmf(4.0, k).exp())).sum();
        assert!((h - h_direct).abs() < 1e-12);
    }

    #[test]
    fn poisson_entropy_ratio() {
        let mut prev = f64::INFINITY;
        for e in 2..=6 {
            let lambda = 10f64.powi(e);
            let h = shannon_entropy(&poisson_law(lambda).unwrap()).finite().unwrap();
            assert!((h - poisson_entropy_approx(lambda)).abs() < 1e-2 / lambda.sqrt() + 1e-6);
            let ratio = h / lambda.sqrt().ln();
            assert!(ratio < prev);
            prev = ratio;
        }
        assert!((prev - 1.205).abs() < 0.01);
        assert!(aep_defect(&poisson_law(1e4).unwrap(), 0.2).unwrap() < 0.05);
    }

    #[test]
    fn aep_defect_trivial_cases() {
        assert_eq!(aep_defect(&Pmf::uniform(8), 0.3).unwrap(), 0.0);
        assert_eq!(aep_defect(&Pmf::point_mass(3, 1), 0.3).unwrap(), 0.0);
    }

    #[test]
    fn product_source() {
        let p = realize(&SourceFamily::IidProduct { base: Pmf::uniform(2) }, 3).unwrap();
        assert_eq!(p.masses(), &[0.125; 8]);
    }

    #[test]
    fn poisson_trace_excess_shrinks() {
        let src = SourceFamily::Poisson { mean: Schedule::Geometric { scale: 1.0, ratio: 10.0 } };
        let errors = ErrorSchedule::Given { eps: Schedule::Harmonic { scale: 1.0 } };
        let rows = equivocation_trace(&src, &Schedule::Constant { value: 1.0 }, &errors, &Measure::Shannon, &[2, 3, 4, 5, 6]).unwrap();
        for w in rows.windows(2) {
            assert!(w[1].excess_ratio.unwrap() < w[0].excess_ratio.unwrap());
        }
        let csv = trace_csv(&rows);
        assert!(csv.starts_with("n,H,logL,eps,bound,excess,excess_ratio\n2,"));
        assert_eq!(csv.lines().count(), 6);
    }

    #[test]
    fn non_aep_trace_keeps_excess() {
        let src = SourceFamily::NonAep { gamma: 1.0, list_size: 2, delta: Schedule::Harmonic { scale: 1.0 } };
        let rows = equivocation_trace(&src, &Schedule::Constant { value: 2.0 }, &ErrorSchedule::Independence, &Measure::Shannon, &[10, 100, 1000]).unwrap();
        for r in &rows {
            assert!((r.eps - 1.0 / r.n as f64).abs() < 1e-15);
            assert!(r.excess.unwrap() > 0.9);
            assert!(r.excess_ratio.unwrap() > 0.5);
        }
    }

    #[test]
    fn infeasible_rows_are_flagged() {
        let src = SourceFamily::Fixed { q: Pmf::new(vec![0.5, 0.3, 0.2]).unwrap() };
        let rows = equivocation_trace(&src, &Schedule::Constant { value: 1.0 }, &ErrorSchedule::Given { eps: Schedule::Constant { value: 0.9 } }, &Measure::Shannon, &[1, 2]).unwrap();
        assert!(rows.iter().all(|r| !r.feasible && r.bound.is_none()));
        assert!(trace_csv(&rows).lines().nth(1).unwrap().ends_with(",,,"));
    }

    #[test]
    fn renyi_two_excess_vanishes() {
        let src = SourceFamily::Fixed { q: Pmf::new(vec![0.4, 0.3, 0.2, 0.1]).unwrap() };
        let errors = ErrorSchedule::Given { eps: Schedule::Harmonic { scale: 1.0 } };
        for m in [Measure::Arimoto(2.0), Measure::Hayashi(2.0)] {
            let rows = equivocation_trace(&src, &Schedule::Constant { value: 1.0 }, &errors, &m, &[1000]).unwrap();
            assert!(rows[0].excess.unwrap() < 0.01);
        }
    }

    #[test]
    fn symbolwise_examples() {
        let bits = JointDist::independent(&Pmf::uniform(2)).unwrap();
        let r = symbolwise_trace(&vec![bits; 5], 2, None).unwrap();
        assert_eq!(r.p_e_sym, 0.0);
        assert!((r.normalized_bound - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((r.jensen_bound.unwrap() - r.log_l).abs() < 1e-15);
        let det = JointDist::independent(&Pmf::point_mass(2, 0)).unwrap();
        let r = symbolwise_trace(&[det.clone(), det], 1, None).unwrap();
        assert_eq!((r.p_e_sym, r.chain_bound, r.mean_fano_bound), (0.0, 0.0, 0.0));
        let q = Pmf::new(vec![0.5, 0.3, 0.2]).unwrap();
        let a = crate::extremal::extremal_joint_type1(&q, 1, 0.1).unwrap();
        let b = crate::extremal::extremal_joint_type1(&q, 1, 0.3).unwrap();
        let r = symbolwise_trace(&[a, b], 1, None).unwrap();
        assert!((r.p_e_sym - 0.2).abs() < 1e-12);
        assert!(r.jensen_bound.unwrap() >= r.mean_fano_bound - 1e-12);
        assert!(r.normalized_bound <= r.jensen_bound.unwrap() + 1e-12);
    }
}
