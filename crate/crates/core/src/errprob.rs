//! Minimum list-decoding error probabilities.
//!
//! A list decoder of size `L` observes `Y` and outputs at most `L` candidate
//! values of `X`; the optimal one keeps the `L` largest conditional masses.

use crate::error::{Error, Result};
use crate::measures::JointDist;
use crate::numeric::{kahan_sum, GRID};
use crate::pmf::Pmf;
use serde::Serialize;
use std::fmt;
use std::str::FromStr;

/// Cardinality of the observation alphabet.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum YCard {
    Finite(usize),
    CountablyInfinite,
}

impl FromStr for YCard {
    type Err = Error;
    /// Accepts `inf`, `finite:N` or a bare `N`.
    fn from_str(s: &str) -> Result<Self> {
        if s == "inf" || s == "infinite" {
            return Ok(YCard::CountablyInfinite);
        }
        let n = s.strip_prefix("finite:").unwrap_or(s);
        match n.parse::<usize>() {
            Ok(n) if n >= 1 => Ok(YCard::Finite(n)),
            _ => Err(Error::Parse(format!("expected inf, finite:N or N >= 1, got {s:?}"))),
        }
    }
}

impl fmt::Display for YCard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            YCard::Finite(n) => write!(f, "finite:{n}"),
            YCard::CountablyInfinite => write!(f, "inf"),
        }
    }
}

/// A system `(Q, L, eps, |Y|)` whose error budget is feasible.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemSpec {
    q: Pmf,
    list_size: usize,
    eps: f64,
    y_card: YCard,
}

impl SystemSpec {
    /// Checks `L >= 1` and that `eps` lies in [`feasible_range`] (up to
    /// 1e-12); out-of-range budgets are rejected, never clamped.
    pub fn new(q: Pmf, list_size: usize, eps: f64, y_card: YCard) -> Result<Self> {
        check_list_size(list_size)?;
        if let YCard::Finite(0) = y_card {
            return Err(Error::InvalidParameter("Y needs at least one value".into()));
        }
        let (lo, hi) = feasible_range(&q, list_size, y_card);
        if !(eps >= lo - GRID && eps <= hi + GRID) || !(0.0..=1.0).contains(&eps) {
            return Err(Error::Infeasible { eps, lo, hi });
        }
        Ok(SystemSpec { q, list_size, eps, y_card })
    }

    pub fn q(&self) -> &Pmf {
        &self.q
    }

    pub fn list_size(&self) -> usize {
        self.list_size
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn y_card(&self) -> YCard {
        self.y_card
    }

    /// `feasible_range` of this system.
    pub fn range(&self) -> (f64, f64) {
        feasible_range(&self.q, self.list_size, self.y_card)
    }
}

pub(crate) fn check_list_size(l: usize) -> Result<()> {
    if l == 0 {
        return Err(Error::InvalidParameter("list size must be at least 1".into()));
    }
    Ok(())
}

/// Sum of the `k` largest entries of a finite slice.
pub(crate) fn top_sum(masses: &[f64], k: usize) -> f64 {
    let mut m = masses.to_vec();
    m.sort_by(|a, b| b.total_cmp(a));
    kahan_sum(m.into_iter().take(k))
}

/// Sum of the `k` largest masses of `q`, tail included.
fn top_mass(q: &Pmf, k: usize) -> f64 {
    match q.top_mass(k) {
        Ok(v) => v,
        Err(_) => top_sum(&q.effective_masses(), k),
    }
}

/// `1 - sum_y P_Y(y) (sum of the L largest masses of P_{X|Y=y})`.
pub fn list_map_error(j: &JointDist, list_size: usize) -> f64 {
    let kept = kahan_sum(j.support().map(|(w, c)| w * top_sum(c.masses(), list_size)));
    (1.0 - kept).max(0.0)
}

/// `1 - (sum of the L largest masses of Q)`: the error of guessing without
/// observations.
pub fn marginal_list_error(q: &Pmf, list_size: usize) -> f64 {
    (1.0 - top_mass(q, list_size)).max(0.0)
}

/// Range of list-decoding error probabilities achievable by joints with
/// `X`-marginal `q` and the given `Y` alphabet. With infinitely many
/// observations the lower end is the known missing mass of `q`.
pub fn feasible_range(q: &Pmf, list_size: usize, y_card: YCard) -> (f64, f64) {
    let hi = marginal_list_error(q, list_size);
    let lo = match y_card {
        YCard::Finite(n) => (1.0 - top_mass(q, n.saturating_mul(list_size))).max(0.0),
        YCard::CountablyInfinite => q.defect(),
    };
    (lo.min(hi), hi)
}

/// Error of the best list decoder whose lists are drawn from `z` only.
pub fn restricted_list_error(j: &JointDist, list_size: usize, z: &[usize]) -> Result<f64> {
    if z.is_empty() {
        return Err(Error::ZTooSmall);
    }
    if let Some(&bad) = z.iter().find(|&&x| x >= j.x_len()) {
        return Err(Error::InvalidParameter(format!("symbol {bad} outside the X alphabet")));
    }
    let mut zs = z.to_vec();
    zs.sort_unstable();
    zs.dedup();
    let kept = kahan_sum(j.support().map(|(w, c)| {
        let within: Vec<f64> = zs.iter().map(|&x| c.masses()[x]).collect();
        w * top_sum(&within, list_size)
    }));
    Ok((1.0 - kept).max(0.0))
}

/// Arithmetic mean of the per-position list-decoding errors.
pub fn symbolwise_error(joints: &[JointDist], list_size: usize) -> Result<f64> {
    if joints.is_empty() {
        return Err(Error::InvalidParameter("no positions given".into()));
    }
    Ok(kahan_sum(joints.iter().map(|j| list_map_error(j, list_size))) / joints.len() as f64)
}
