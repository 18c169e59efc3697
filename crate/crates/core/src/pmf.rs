//! Probability mass functions on countable alphabets.
//!
//! A [`Pmf`] is a finite list of explicit masses optionally followed by a
//! parametric [`TailModel`] that covers the remaining (countably many)
//! symbols. Tails carry closed forms for their total mass, their Shannon
//! entropy contribution and their power sums, so that infinite-support
//! sources can be handled without materializing them.

use crate::error::{Error, Result};
use crate::numeric::{eta, kahan_sum, prefix_sums, Extended, KahanSum};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, ln_gamma};

/// Tolerance on `|sum - 1|` accepted by [`Pmf::validate`].
pub const MASS_SUM_TOLERANCE: f64 = 1e-9;

/// Tolerance applied to each prefix-sum comparison in [`majorizes`].
pub const MAJORIZATION_TOLERANCE: f64 = 1e-12;

/// Hard cap on the number of tail terms that may be materialized.
pub const MAX_TAIL_TERMS: usize = 10_000_000;

/// Tail remainder below which a tail is considered exhausted when effective
/// masses are materialized for comparisons.
const EFFECTIVE_TAIL_TOLERANCE: f64 = 1e-15;
const EFFECTIVE_TAIL_CAP: usize = 1_000_000;

/// Number of log-power terms summed explicitly before switching to the
/// integral estimate of the remainder.
const LOG_POWER_EXPLICIT_TERMS: usize = 10_000;

/// Parametric model for the symbols that follow the explicit masses.
///
/// Term `i` (counting from zero) of each model is
/// * geometric: `total * p * (1 - p)^i`, stored through `ln p` so that
///   extremely small success probabilities remain representable;
/// * poisson: `exp(-mean) * mean^(start + i) / (start + i)!`, the Poisson law
///   with its first `start` atoms removed;
/// * log-power: `scale / (x ln(x)^2)` with `x = start + i`, a summable
///   sequence whose Shannon entropy diverges.
#[derive(Clone, Debug, PartialEq)]
pub enum TailModel {
    Geometric { total: f64, ln_success: f64 },
    Poisson { mean: f64, start: usize },
    LogPower { scale: f64, start: usize, mass: f64 },
}

impl TailModel {
    /// Geometric tail with first term `first` and common ratio `ratio`.
    pub fn geometric(first: f64, ratio: f64) -> Result<Self> {
        if !(first > 0.0 && first.is_finite()) || !(0.0..1.0).contains(&ratio) {
            return Err(Error::InvalidTail(format!(
                "geometric tail needs first > 0 and 0 <= ratio < 1 (got {first}, {ratio})"
            )));
        }
        let p = 1.0 - ratio;
        Self::geometric_from_log(first / p, p.ln())
    }

    /// Geometric tail of total mass `total` and success probability
    /// `exp(ln_success)`.
    pub fn geometric_from_log(total: f64, ln_success: f64) -> Result<Self> {
        if !(total > 0.0 && total <= 1.0 + MASS_SUM_TOLERANCE) || !(ln_success <= 0.0) {
            return Err(Error::InvalidTail(format!(
                "geometric tail needs 0 < total <= 1 and ln p <= 0 (got {total}, {ln_success})"
            )));
        }
        Ok(TailModel::Geometric { total, ln_success })
    }

    /// Poisson(mean) atoms `start, start + 1, ...`.
    pub fn poisson(mean: f64, start: usize) -> Result<Self> {
        if !(mean > 0.0 && mean.is_finite()) {
            return Err(Error::InvalidTail(format!("poisson mean must be positive, got {mean}")));
        }
        Ok(TailModel::Poisson { mean, start })
    }

    /// Terms `scale / (x ln(x)^2)` for `x = start, start + 1, ...`.
    pub fn log_power(scale: f64, start: usize) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) || start < 2 {
            return Err(Error::InvalidTail(format!(
                "log-power tail needs scale > 0 and start >= 2 (got {scale}, {start})"
            )));
        }
        let mass = log_power_mass(scale, start);
        Ok(TailModel::LogPower { scale, start, mass })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            TailModel::Geometric { .. } => "geometric",
            TailModel::Poisson { .. } => "poisson",
            TailModel::LogPower { .. } => "log_power",
        }
    }

    /// Total mass carried by the tail.
    pub fn mass(&self) -> f64 {
        match *self {
            TailModel::Geometric { total, .. } => total,
            TailModel::Poisson { mean, start } => {
                if start == 0 {
                    1.0
                } else {
                    gamma_lr(start as f64, mean)
                }
            }
            TailModel::LogPower { mass, .. } => mass,
        }
    }

    /// Natural log of term `i`.
    pub fn ln_term(&self, i: usize) -> f64 {
        match *self {
            TailModel::Geometric { total, ln_success } => {
                if i == 0 {
                    total.ln() + ln_success
                } else {
                    total.ln() + ln_success + i as f64 * geometric_ln_ratio(ln_success)
                }
            }
            TailModel::Poisson { mean, start } => poisson_ln_pmf(mean, start + i),
            TailModel::LogPower { scale, start, .. } => {
                let x = (start + i) as f64;
                scale.ln() - x.ln() - 2.0 * x.ln().ln()
            }
        }
    }

    /// Term `i` of the tail.
    pub fn term(&self, i: usize) -> f64 {
        self.ln_term(i).exp()
    }

    pub fn first_mass(&self) -> f64 {
        self.term(0)
    }

    /// Whether the terms are nonincreasing, so that the tail may follow a
    /// sorted explicit prefix.
    pub fn is_nonincreasing(&self) -> bool {
        match *self {
            TailModel::Geometric { .. } | TailModel::LogPower { .. } => true,
            TailModel::Poisson { mean, start } => start as f64 >= mean.floor(),
        }
    }

    /// The tail with its first `n` terms removed.
    pub fn advance(&self, n: usize) -> TailModel {
        match *self {
            TailModel::Geometric { total, ln_success } => TailModel::Geometric {
                total: (total.ln() + n as f64 * geometric_ln_ratio(ln_success)).exp(),
                ln_success,
            },
            TailModel::Poisson { mean, start } => TailModel::Poisson { mean, start: start + n },
            TailModel::LogPower { scale, start, .. } => TailModel::LogPower {
                scale,
                start: start + n,
                mass: log_power_mass(scale, start + n),
            },
        }
    }

    /// Sum of `eta(term)` over the tail.
    pub fn entropy_contribution(&self) -> Extended {
        match *self {
            TailModel::Geometric { total, ln_success } => {
                if total == 0.0 {
                    return Extended::Finite(0.0);
                }
                Extended::Finite(eta(total) + total * geometric_entropy_rate(ln_success))
            }
            TailModel::Poisson { mean, start } => {
                Extended::Finite(poisson_sum(mean, start, 1.0, |ln_t| {
                    let t = ln_t.exp();
                    if t < crate::numeric::ETA_CUTOFF {
                        0.0
                    } else {
                        -t * ln_t
                    }
                }))
            }
            TailModel::LogPower { .. } => Extended::Infinite,
        }
    }

    /// Natural log of the power sum of the tail terms raised to `alpha`.
    /// `Extended::Infinite` signals divergence; an empty tail gives
    /// `Finite(-inf)`.
    pub fn ln_power_sum(&self, alpha: f64) -> Extended {
        match *self {
            TailModel::Geometric { total, ln_success } => {
                if total == 0.0 {
                    return Extended::Finite(f64::NEG_INFINITY);
                }
                let ln_q = geometric_ln_ratio(ln_success);
                let ln_den = if ln_q == f64::NEG_INFINITY {
                    0.0
                } else if ln_q < -1e-290 {
                    (-(alpha * ln_q).exp_m1()).ln()
                } else {
                    alpha.ln() + ln_success
                };
                Extended::Finite(alpha * (total.ln() + ln_success) - ln_den)
            }
            TailModel::Poisson { mean, start } => {
                let s = poisson_sum(mean, start, alpha, |ln_t| (alpha * ln_t).exp());
                Extended::Finite(s.ln())
            }
            TailModel::LogPower { scale, start, mass } => {
                if alpha < 1.0 {
                    Extended::Infinite
                } else if alpha == 1.0 {
                    Extended::Finite(mass.ln())
                } else {
                    Extended::Finite(log_power_power_sum(scale, start, alpha).ln())
                }
            }
        }
    }

    /// Power sum of the tail terms raised to `alpha`.
    pub fn power_sum(&self, alpha: f64) -> Extended {
        self.ln_power_sum(alpha).map(f64::exp)
    }

    /// `(first, ratio)` of a geometric tail.
    pub fn geometric_parameters(&self) -> Option<(f64, f64)> {
        match *self {
            TailModel::Geometric { total, ln_success } => {
                Some((total * ln_success.exp(), -ln_success.exp_m1()))
            }
            _ => None,
        }
    }
}

fn geometric_ln_ratio(ln_success: f64) -> f64 {
    (-ln_success.exp()).ln_1p()
}

/// `h2(p) / p`, the entropy per unit mass of a geometric law.
pub(crate) fn geometric_entropy_rate(ln_success: f64) -> f64 {
    let p = ln_success.exp();
    if p < 1e-8 {
        return -ln_success + 1.0 - 0.5 * p;
    }
    let q = 1.0 - p;
    if q <= 0.0 {
        return -ln_success;
    }
    -ln_success - q * (-p).ln_1p() / p
}

pub(crate) fn poisson_ln_pmf(mean: f64, n: usize) -> f64 {
    n as f64 * mean.ln() - mean - ln_gamma(n as f64 + 1.0)
}

/// Sums `f(ln term)` over the Poisson atoms from `start` on. Terminates once
/// the atoms decay geometrically and the remainder bound for exponent
/// `decay` is negligible.
fn poisson_sum(mean: f64, start: usize, decay: f64, f: impl Fn(f64) -> f64) -> f64 {
    let mut acc = KahanSum::new();
    let mut n = start;
    let mut ln_t = poisson_ln_pmf(mean, n);
    let ln_mean = mean.ln();
    loop {
        let c = f(ln_t);
        acc.add(c);
        let r = mean / (n as f64 + 1.0);
        if r < 1.0 {
            let bound = 2.0 * (c + ln_t.exp()) / (1.0 - r.powf(decay.min(1.0)));
            if bound < 1e-18 * acc.value().abs().max(1e-300) || bound < 1e-300 {
                break;
            }
        }
        ln_t += ln_mean - (n as f64 + 1.0).ln();
        n += 1;
        if n - start > 100 * MAX_TAIL_TERMS {
            break;
        }
    }
    acc.value()
}

fn log_power_term(scale: f64, x: f64) -> f64 {
    let l = x.ln();
    scale / (x * l * l)
}

fn log_power_mass(scale: f64, start: usize) -> f64 {
    let mut acc = KahanSum::new();
    for i in 0..LOG_POWER_EXPLICIT_TERMS {
        acc.add(log_power_term(scale, (start + i) as f64));
    }
    let a = (start + LOG_POWER_EXPLICIT_TERMS) as f64 - 0.5;
    acc.add(scale / a.ln());
    acc.value()
}

fn log_power_power_sum(scale: f64, start: usize, alpha: f64) -> f64 {
    let mut acc = KahanSum::new();
    for i in 0..LOG_POWER_EXPLICIT_TERMS {
        acc.add(log_power_term(scale, (start + i) as f64).powf(alpha));
    }
    let a = (start + LOG_POWER_EXPLICIT_TERMS) as f64 - 0.5;
    acc.add(scale.powf(alpha) * a.powf(1.0 - alpha) / ((alpha - 1.0) * a.ln().powf(2.0 * alpha)));
    acc.value()
}

/// A probability mass function: explicit masses, optional labels and an
/// optional parametric tail.
///
/// `defect` is mass known to be missing. It is zero except for the output of
/// [`Pmf::truncate`] without renormalization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PmfRecord", into = "PmfRecord")]
pub struct Pmf {
    masses: Vec<f64>,
    labels: Option<Vec<String>>,
    tail: Option<TailModel>,
    defect: f64,
}

/// Result of [`majorizes`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct MajorizationVerdict {
    pub holds: bool,
    /// First prefix length `k` (1-based) at which the inequality fails.
    pub witness: Option<usize>,
}

/// Result of [`Pmf::truncate`].
#[derive(Clone, Debug, PartialEq)]
pub struct Truncation {
    pub pmf: Pmf,
    pub omitted_mass: f64,
}

impl Pmf {
    /// Validates explicit masses without labels or tail.
    pub fn new(masses: Vec<f64>) -> Result<Pmf> {
        Pmf::validate(masses, None, None, false)
    }

    /// Validates a candidate distribution. With `renormalize` the masses are
    /// divided by their total instead of being rejected when they do not sum
    /// to one.
    pub fn validate(
        masses: Vec<f64>,
        labels: Option<Vec<String>>,
        tail: Option<TailModel>,
        renormalize: bool,
    ) -> Result<Pmf> {
        Pmf::build(masses, labels, tail, 0.0, renormalize)
    }

    fn build(
        mut masses: Vec<f64>,
        labels: Option<Vec<String>>,
        mut tail: Option<TailModel>,
        defect: f64,
        renormalize: bool,
    ) -> Result<Pmf> {
        for (index, &value) in masses.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFiniteMass { index });
            }
            if value < 0.0 {
                return Err(Error::NegativeMass { index, value });
            }
        }
        if let Some(l) = &labels {
            if l.len() != masses.len() {
                return Err(Error::LabelMismatch { masses: masses.len(), labels: l.len() });
            }
        }
        if !(0.0..1.0).contains(&defect) {
            return Err(Error::InvalidParameter(format!("defect {defect} outside [0, 1)")));
        }
        let tail_mass = tail.as_ref().map_or(0.0, TailModel::mass);
        let sum = kahan_sum(masses.iter().copied()) + tail_mass + defect;
        if renormalize && sum > 0.0 {
            let scale = 1.0 / (sum - defect);
            if let Some(t) = &tail {
                match *t {
                    TailModel::Geometric { total, ln_success } => {
                        tail = Some(TailModel::Geometric { total: total * scale, ln_success })
                    }
                    _ if (scale - 1.0).abs() > MASS_SUM_TOLERANCE => {
                        return Err(Error::UnsupportedTail(format!(
                            "{} tails cannot be rescaled",
                            t.kind()
                        )))
                    }
                    _ => {}
                }
            }
            for m in &mut masses {
                *m *= scale;
            }
            return Ok(Pmf { masses, labels, tail, defect: 0.0 });
        }
        if (sum - 1.0).abs() > MASS_SUM_TOLERANCE {
            return Err(Error::MassSumMismatch { sum });
        }
        Ok(Pmf { masses, labels, tail, defect })
    }

    /// Builds a distribution from masses produced by a closed form whose sum
    /// is one by construction; tiny negative rounding residue is clamped.
    pub(crate) fn from_closed_form(masses: Vec<f64>, tail: Option<TailModel>) -> Pmf {
        let masses = masses.into_iter().map(|m| m.max(0.0)).collect();
        Pmf { masses, labels: None, tail, defect: 0.0 }
    }

    /// Uniform distribution on `n` symbols.
    pub fn uniform(n: usize) -> Pmf {
        assert!(n > 0, "uniform distribution needs at least one symbol");
        Pmf::from_closed_form(vec![1.0 / n as f64; n], None)
    }

    /// Point mass on symbol `i` of an `n`-symbol alphabet.
    pub fn point_mass(n: usize, i: usize) -> Pmf {
        let mut m = vec![0.0; n];
        m[i] = 1.0;
        Pmf::from_closed_form(m, None)
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn tail(&self) -> Option<&TailModel> {
        self.tail.as_ref()
    }

    pub fn defect(&self) -> f64 {
        self.defect
    }

    /// Number of explicit masses.
    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty() && self.tail.is_none()
    }

    pub fn is_tail_free(&self) -> bool {
        self.tail.is_none()
    }

    /// Mass of symbol `i`, reading into the tail past the explicit masses.
    pub fn get(&self, i: usize) -> f64 {
        if i < self.masses.len() {
            self.masses[i]
        } else {
            self.tail.as_ref().map_or(0.0, |t| t.term(i - self.masses.len()))
        }
    }

    /// Number of explicit symbols with positive mass.
    pub fn explicit_support_size(&self) -> usize {
        self.masses.iter().filter(|&&m| m > 0.0).count()
    }

    /// Indices of the explicit masses in decreasing order of mass; the sort
    /// is stable so equal masses keep their original order.
    pub fn rearrangement_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.masses.len()).collect();
        order.sort_by(|&a, &b| self.masses[b].total_cmp(&self.masses[a]));
        order
    }

    /// Explicit masses sorted nonincreasing.
    pub fn sorted_masses(&self) -> Vec<f64> {
        self.rearrangement_order().into_iter().map(|i| self.masses[i]).collect()
    }

    /// Whether the tail can be appended after the sorted explicit masses.
    pub fn tail_is_sortable(&self) -> bool {
        match &self.tail {
            None => true,
            Some(t) => {
                let min = self.masses.iter().copied().fold(f64::INFINITY, f64::min);
                t.is_nonincreasing() && (self.masses.is_empty() || t.first_mass() <= min + 1e-15)
            }
        }
    }

    /// The decreasing rearrangement: explicit masses sorted nonincreasing
    /// (stable), labels permuted alongside, tail kept after them.
    pub fn decreasing_rearrangement(&self) -> Result<Pmf> {
        if !self.tail_is_sortable() {
            return Err(Error::UnsortableTail);
        }
        let order = self.rearrangement_order();
        let masses = order.iter().map(|&i| self.masses[i]).collect();
        let labels = self.labels.as_ref().map(|l| order.iter().map(|&i| l[i].clone()).collect());
        Ok(Pmf { masses, labels, tail: self.tail.clone(), defect: self.defect })
    }

    /// Explicit masses followed by tail terms until the tail remainder drops
    /// below 1e-15 (or a cap of 10^6 terms is reached).
    pub fn effective_masses(&self) -> Vec<f64> {
        let mut out = self.masses.clone();
        if let Some(t) = &self.tail {
            let mut remaining = KahanSum::new();
            remaining.add(t.mass());
            for i in 0..EFFECTIVE_TAIL_CAP {
                if remaining.value() <= EFFECTIVE_TAIL_TOLERANCE {
                    break;
                }
                let term = t.term(i);
                out.push(term);
                remaining.add(-term);
            }
        }
        out
    }

    /// Sum of the `k` largest masses, reading into a sortable tail if
    /// `k` exceeds the explicit length.
    pub fn top_mass(&self, k: usize) -> Result<f64> {
        let sorted = self.sorted_masses();
        if k <= sorted.len() {
            return Ok(kahan_sum(sorted[..k].iter().copied()));
        }
        match &self.tail {
            None => Ok(kahan_sum(sorted)),
            Some(t) => {
                if !self.tail_is_sortable() {
                    return Err(Error::UnsortableTail);
                }
                let extra = k - sorted.len();
                let head = kahan_sum(sorted);
                Ok(head + t.mass() - t.advance(extra).mass())
            }
        }
    }

    /// Replaces the tail by explicit masses until the omitted mass is at
    /// most `mass_tolerance`. The omitted mass is reported and, unless
    /// `renormalize` is set, recorded as the defect of the result.
    pub fn truncate(&self, mass_tolerance: f64, renormalize: bool) -> Result<Truncation> {
        if !(mass_tolerance > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "mass tolerance must be positive, got {mass_tolerance}"
            )));
        }
        let tail = match &self.tail {
            None => return Ok(Truncation { pmf: self.clone(), omitted_mass: 0.0 }),
            Some(t) => t,
        };
        let n = terms_needed(tail, mass_tolerance)?;
        let mut masses = self.masses.clone();
        masses.extend((0..n).map(|i| tail.term(i)));
        let omitted = tail.advance(n).mass().max(0.0);
        let labels = self.labels.as_ref().map(|l| {
            let mut l = l.clone();
            l.extend((self.masses.len()..self.masses.len() + n).map(|i| (i + 1).to_string()));
            l
        });
        let pmf = if renormalize {
            let scale = 1.0 / (1.0 - omitted - self.defect);
            for m in &mut masses {
                *m *= scale;
            }
            Pmf { masses, labels, tail: None, defect: 0.0 }
        } else {
            Pmf { masses, labels, tail: None, defect: self.defect + omitted }
        };
        Ok(Truncation { pmf, omitted_mass: omitted })
    }
}

/// Number of tail terms to materialize so that the rest weighs at most `tol`.
fn terms_needed(tail: &TailModel, tol: f64) -> Result<usize> {
    let cap_err = Error::TailNotSummable { cap: MAX_TAIL_TERMS };
    let mut n = match *tail {
        TailModel::Geometric { total, ln_success } => {
            if total <= tol {
                0
            } else {
                let ln_q = geometric_ln_ratio(ln_success);
                let est = ((tol.ln() - total.ln()) / ln_q).ceil();
                if !(est <= MAX_TAIL_TERMS as f64) {
                    return Err(cap_err);
                }
                (est.max(1.0) as usize).saturating_sub(1)
            }
        }
        TailModel::Poisson { mean, start } => {
            let mut rem = KahanSum::new();
            rem.add(tail.mass());
            let mut ln_t = poisson_ln_pmf(mean, start);
            let mut n = 0;
            while rem.value() > 0.5 * tol {
                if n >= MAX_TAIL_TERMS {
                    return Err(cap_err);
                }
                rem.add(-ln_t.exp());
                ln_t += mean.ln() - ((start + n) as f64 + 1.0).ln();
                n += 1;
            }
            n.saturating_sub(3)
        }
        TailModel::LogPower { scale, start, .. } => {
            let x = (scale / tol).exp();
            if !(x - (start as f64) < MAX_TAIL_TERMS as f64) {
                return Err(cap_err);
            }
            (x - start as f64).max(0.0) as usize
        }
    };
    while tail.advance(n).mass() > tol {
        n += 1;
        if n > MAX_TAIL_TERMS {
            return Err(cap_err);
        }
    }
    Ok(n)
}

/// Whether `r` majorizes `p`: every prefix sum of `r` sorted nonincreasing
/// dominates the corresponding prefix sum of `p`, up to 1e-12.
pub fn majorizes(r: &Pmf, p: &Pmf) -> MajorizationVerdict {
    let mut a = r.effective_masses();
    let mut b = p.effective_masses();
    a.sort_by(|x, y| y.total_cmp(x));
    b.sort_by(|x, y| y.total_cmp(x));
    let n = a.len().max(b.len());
    a.resize(n, 0.0);
    b.resize(n, 0.0);
    let sa = prefix_sums(&a);
    let sb = prefix_sums(&b);
    for k in 1..=n {
        if sa[k] < sb[k] - MAJORIZATION_TOLERANCE {
            return MajorizationVerdict { holds: false, witness: Some(k) };
        }
    }
    MajorizationVerdict { holds: true, witness: None }
}

/// Half the l1 distance between two distributions on aligned supports; the
/// shorter one is padded with zeros.
pub fn variational_distance(p: &Pmf, q: &Pmf) -> f64 {
    let mut a = p.effective_masses();
    let mut b = q.effective_masses();
    let n = a.len().max(b.len());
    a.resize(n, 0.0);
    b.resize(n, 0.0);
    0.5 * kahan_sum(a.iter().zip(&b).map(|(x, y)| (x - y).abs()))
}

/// View of a distribution in decreasing order whose tail is read lazily.
#[derive(Clone, Debug)]
pub(crate) struct DecreasingView {
    values: Vec<f64>,
    prefix: Vec<f64>,
    acc: KahanSum,
    tail: Option<TailModel>,
    consumed: usize,
}

impl DecreasingView {
    pub(crate) fn new(q: &Pmf) -> Result<Self> {
        if !q.tail_is_sortable() {
            return Err(Error::UnsortableTail);
        }
        let mut view = DecreasingView {
            values: Vec::new(),
            prefix: vec![0.0],
            acc: KahanSum::new(),
            tail: q.tail.clone(),
            consumed: 0,
        };
        for m in q.sorted_masses() {
            view.push(m);
        }
        Ok(view)
    }

    fn push(&mut self, m: f64) {
        self.values.push(m);
        self.acc.add(m);
        self.prefix.push(self.acc.value());
    }

    pub(crate) fn has_tail(&self) -> bool {
        self.tail.is_some()
    }

    /// Materializes values until at least `n` are available (tails only).
    pub(crate) fn extend_to(&mut self, n: usize) -> Result<()> {
        if let Some(t) = self.tail.clone() {
            while self.values.len() < n {
                if self.consumed >= MAX_TAIL_TERMS {
                    return Err(Error::TailNotSummable { cap: MAX_TAIL_TERMS });
                }
                let m = t.term(self.consumed);
                self.consumed += 1;
                self.push(m);
            }
        }
        Ok(())
    }

    /// Value at 1-based position `k` (zero past a finite support).
    pub(crate) fn at(&mut self, k: usize) -> Result<f64> {
        self.extend_to(k)?;
        Ok(self.values.get(k - 1).copied().unwrap_or(0.0))
    }

    /// Sum of the first `k` values.
    pub(crate) fn prefix(&mut self, k: usize) -> Result<f64> {
        self.extend_to(k)?;
        Ok(self.prefix[k.min(self.values.len())])
    }

    pub(crate) fn len(&self) -> usize {
        self.values.len()
    }

    pub(crate) fn values(&self) -> &[f64] {
        &self.values
    }

    /// The part of the tail that has not been materialized.
    pub(crate) fn remaining_tail(&self) -> Option<TailModel> {
        self.tail.as_ref().map(|t| t.advance(self.consumed))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PmfRecord {
    masses: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tail: Option<TailRecord>,
    #[serde(default, skip_serializing_if = "is_zero")]
    defect: f64,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum TailRecord {
    Geometric {
        first: f64,
        ratio: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        total: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ln_success: Option<f64>,
    },
    Poisson {
        mean: f64,
        truncation_index: usize,
    },
    LogPower {
        scale: f64,
        start: usize,
    },
}

impl From<Pmf> for PmfRecord {
    fn from(p: Pmf) -> Self {
        let tail = p.tail.map(|t| match t {
            TailModel::Geometric { total, ln_success } => {
                let (first, ratio) = t.geometric_parameters().unwrap();
                let precise = ln_success < 1e-6f64.ln();
                TailRecord::Geometric {
                    first,
                    ratio,
                    total: precise.then_some(total),
                    ln_success: precise.then_some(ln_success),
                }
            }
            TailModel::Poisson { mean, start } => TailRecord::Poisson { mean, truncation_index: start },
            TailModel::LogPower { scale, start, .. } => TailRecord::LogPower { scale, start },
        });
        PmfRecord { masses: p.masses, labels: p.labels, tail, defect: p.defect }
    }
}

impl TryFrom<PmfRecord> for Pmf {
    type Error = Error;
    fn try_from(r: PmfRecord) -> Result<Pmf> {
        let tail = match r.tail {
            None => None,
            Some(TailRecord::Geometric { total: Some(total), ln_success: Some(l), .. }) => {
                Some(TailModel::geometric_from_log(total, l)?)
            }
            Some(TailRecord::Geometric { first, ratio, .. }) => Some(TailModel::geometric(first, ratio)?),
            Some(TailRecord::Poisson { mean, truncation_index }) => {
                Some(TailModel::poisson(mean, truncation_index)?)
            }
            Some(TailRecord::LogPower { scale, start }) => Some(TailModel::log_power(scale, start)?),
        };
        Pmf::build(r.masses, r.labels, tail, r.defect, false)
    }
}
