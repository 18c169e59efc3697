//! Symmetric functionals of distributions and the conditional measures they
//! induce: `h_phi(X|Y) = sum_y P_Y(y) phi(P_{X|Y=y})`.
//!
//! Shannon entropy, the l_alpha family (which covers Rényi, Arimoto and
//! Hayashi entropies through monotone maps), quadratic entropy, the
//! Bhattacharyya parameter and the variational quantity K(X|Y) all fit this
//! pattern.

use crate::error::{Error, Result};
use crate::numeric::{eta, kahan_sum, Extended, KahanSum};
use crate::pmf::Pmf;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// The functional families supported by [`phi_eval`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PhiKind {
    Shannon,
    /// `||P||_alpha`
    LpNorm(f64),
    /// `||P||_alpha^alpha`
    LpNormPower(f64),
    /// `1 - ||P||_2^2`
    OneMinusL2Squared,
    /// Normalized mean absolute difference between masses on `M` symbols.
    Dbar(usize),
}

/// A symmetric functional together with its convexity metadata.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhiFunctional {
    pub kind: PhiKind,
    pub concave: bool,
    pub strictly_concave: bool,
    pub convex: bool,
    /// `phi(P) = g2(sum_x g1(P(x)))` with `g1 >= 0` and `g1(0) = 0`, so that
    /// the value on an infinite tail is governed by a single series.
    pub separable: bool,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) || alpha == 1.0 {
        return Err(Error::InvalidParameter(format!(
            "order must be positive, finite and different from 1 (got {alpha})"
        )));
    }
    Ok(())
}

impl PhiFunctional {
    pub fn shannon() -> Self {
        PhiFunctional {
            kind: PhiKind::Shannon,
            concave: true,
            strictly_concave: true,
            convex: false,
            separable: true,
        }
    }

    /// `||.||_alpha`: concave for `alpha < 1`, convex for `alpha > 1`.
    pub fn lp_norm(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(PhiFunctional {
            kind: PhiKind::LpNorm(alpha),
            concave: alpha < 1.0,
            strictly_concave: alpha < 1.0,
            convex: alpha > 1.0,
            separable: true,
        })
    }

    /// `||.||_alpha^alpha`: concave for `alpha < 1`, convex for `alpha > 1`.
    pub fn lp_norm_power(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(PhiFunctional {
            kind: PhiKind::LpNormPower(alpha),
            concave: alpha < 1.0,
            strictly_concave: alpha < 1.0,
            convex: alpha > 1.0,
            separable: true,
        })
    }

    pub fn quadratic() -> Self {
        PhiFunctional {
            kind: PhiKind::OneMinusL2Squared,
            concave: true,
            strictly_concave: true,
            convex: false,
            separable: true,
        }
    }

    /// The convex functional behind K(X|Y) on an `m`-symbol alphabet.
    pub fn dbar(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidParameter(format!("dbar needs M >= 2, got {m}")));
        }
        Ok(PhiFunctional {
            kind: PhiKind::Dbar(m),
            concave: false,
            strictly_concave: false,
            convex: true,
            separable: false,
        })
    }

    pub fn name(&self) -> String {
        match self.kind {
            PhiKind::Shannon => "shannon".into(),
            PhiKind::LpNorm(a) => format!("lp-norm({a})"),
            PhiKind::LpNormPower(a) => format!("lp-norm-power({a})"),
            PhiKind::OneMinusL2Squared => "one-minus-l2-squared".into(),
            PhiKind::Dbar(m) => format!("dbar({m})"),
        }
    }

    /// `g1` of the separable form, used for the term-by-term closed forms.
    pub(crate) fn separable_term(&self, u: f64) -> Option<f64> {
        match self.kind {
            PhiKind::Shannon => Some(eta(u)),
            PhiKind::LpNorm(a) | PhiKind::LpNormPower(a) => Some(if u > 0.0 { u.powf(a) } else { 0.0 }),
            PhiKind::OneMinusL2Squared => Some(u * (1.0 - u)),
            PhiKind::Dbar(_) => None,
        }
    }

    /// `g2` of the separable form.
    pub(crate) fn separable_outer(&self, s: f64) -> f64 {
        match self.kind {
            PhiKind::LpNorm(a) => s.powf(1.0 / a),
            _ => s,
        }
    }
}

/// Binary entropy `h2(u)` in nats.
pub fn binary_entropy(u: f64) -> f64 {
    eta(u) + eta(1.0 - u)
}

/// Binary relative entropy `d(a || b)` in nats.
pub fn binary_divergence(a: f64, b: f64) -> Extended {
    fn term(x: f64, y: f64) -> Extended {
        if x == 0.0 {
            Extended::Finite(0.0)
        } else if y == 0.0 {
            Extended::Infinite
        } else {
            Extended::Finite(x * (x / y).ln())
        }
    }
    term(a, b) + term(1.0 - a, 1.0 - b)
}

/// Shannon entropy in nats; tails contribute through their closed forms.
pub fn shannon_entropy(p: &Pmf) -> Extended {
    let explicit = Extended::Finite(kahan_sum(p.masses().iter().map(|&m| eta(m))));
    match p.tail() {
        None => explicit,
        Some(t) => explicit + t.entropy_contribution(),
    }
}

/// `ln sum_x P(x)^alpha`, combining explicit masses and tail in log space.
pub fn ln_power_sum(p: &Pmf, alpha: f64) -> Extended {
    let explicit = kahan_sum(p.masses().iter().filter(|&&m| m > 0.0).map(|&m| m.powf(alpha)));
    match p.tail() {
        None => Extended::Finite(explicit.ln()),
        Some(t) => match t.ln_power_sum(alpha) {
            Extended::Infinite => Extended::Infinite,
            Extended::Finite(lt) => {
                if explicit == 0.0 {
                    Extended::Finite(lt)
                } else {
                    let le = explicit.ln();
                    let hi = le.max(lt);
                    let lo = le.min(lt);
                    Extended::Finite(hi + (lo - hi).exp().ln_1p())
                }
            }
        },
    }
}

/// Rényi entropy of order `alpha` in nats; `alpha = 1` is Shannon entropy.
pub fn renyi_entropy(p: &Pmf, alpha: f64) -> Extended {
    if alpha == 1.0 {
        return shannon_entropy(p);
    }
    ln_power_sum(p, alpha).map(|l| l / (1.0 - alpha))
}

/// `||P||_alpha`.
pub fn lp_norm(p: &Pmf, alpha: f64) -> Extended {
    if alpha == 1.0 {
        return Extended::Finite(1.0 - p.defect());
    }
    ln_power_sum(p, alpha).map(|l| (l / alpha).exp())
}

/// `(1 / (2(M-1))) sum_{i,j} |p_i - p_j|` on an `m`-symbol alphabet,
/// computed from the ascending order statistics.
fn dbar_value(masses: &[f64], m: usize) -> f64 {
    let mut a = masses.to_vec();
    a.resize(m, 0.0);
    a.sort_by(f64::total_cmp);
    let mut acc = KahanSum::new();
    for (i, &v) in a.iter().enumerate() {
        acc.add((2.0 * (i as f64 + 1.0) - m as f64 - 1.0) * v);
    }
    acc.value() / (m as f64 - 1.0)
}

/// Evaluates `phi(P)`.
pub fn phi_eval(phi: &PhiFunctional, p: &Pmf) -> Result<Extended> {
    Ok(match phi.kind {
        PhiKind::Shannon => shannon_entropy(p),
        PhiKind::LpNorm(a) => lp_norm(p, a),
        PhiKind::LpNormPower(a) => ln_power_sum(p, a).map(f64::exp),
        PhiKind::OneMinusL2Squared => ln_power_sum(p, 2.0).map(|l| 1.0 - l.exp()),
        PhiKind::Dbar(m) => {
            if !p.is_tail_free() {
                return Err(Error::UnsupportedTail("dbar needs a finite alphabet".into()));
            }
            if p.masses()[m.min(p.len())..].iter().any(|&x| x > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "distribution has mass beyond the {m}-symbol alphabet of dbar"
                )));
            }
            let len = p.len().min(m);
            Extended::Finite(dbar_value(&p.masses()[..len], m))
        }
    })
}

/// A joint distribution with finite `Y`: the weights `P_Y` and one
/// conditional distribution of `X` per value of `Y`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "JointRecord", into = "JointRecord")]
pub struct JointDist {
    py: Pmf,
    conditionals: Vec<Pmf>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JointRecord {
    py: Vec<f64>,
    conditionals: Vec<Vec<f64>>,
}

impl From<JointDist> for JointRecord {
    fn from(j: JointDist) -> Self {
        JointRecord {
            py: j.py.masses().to_vec(),
            conditionals: j.conditionals.iter().map(|c| c.masses().to_vec()).collect(),
        }
    }
}

impl TryFrom<JointRecord> for JointDist {
    type Error = Error;
    fn try_from(r: JointRecord) -> Result<Self> {
        JointDist::new(r.py, r.conditionals)
    }
}

impl JointDist {
    /// Validates `P_Y` and the conditionals; all conditionals must have the
    /// same length.
    pub fn new(py: Vec<f64>, conditionals: Vec<Vec<f64>>) -> Result<Self> {
        let py = Pmf::new(py)?;
        let conditionals = conditionals.into_iter().map(Pmf::new).collect::<Result<Vec<_>>>()?;
        JointDist::from_pmfs(py, conditionals)
    }

    pub fn from_pmfs(py: Pmf, conditionals: Vec<Pmf>) -> Result<Self> {
        if !py.is_tail_free() || conditionals.iter().any(|c| !c.is_tail_free()) {
            return Err(Error::UnsupportedTail("joint distributions are tail-free".into()));
        }
        if conditionals.len() != py.len() || conditionals.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "{} conditionals for {} values of Y",
                conditionals.len(),
                py.len()
            )));
        }
        let m = conditionals[0].len();
        if conditionals.iter().any(|c| c.len() != m) {
            return Err(Error::InvalidParameter("conditionals have different lengths".into()));
        }
        Ok(JointDist { py, conditionals })
    }

    /// `X` independent of `Y` with a single value of `Y`.
    pub fn independent(q: &Pmf) -> Result<Self> {
        JointDist::from_pmfs(Pmf::point_mass(1, 0), vec![q.clone()])
    }

    pub fn py(&self) -> &Pmf {
        &self.py
    }

    pub fn conditionals(&self) -> &[Pmf] {
        &self.conditionals
    }

    /// Number of values of `Y`.
    pub fn y_len(&self) -> usize {
        self.py.len()
    }

    /// Size of the common `X` alphabet.
    pub fn x_len(&self) -> usize {
        self.conditionals[0].len()
    }

    /// `P_X(x) = sum_y P_Y(y) P_{X|Y}(x|y)`.
    pub fn marginal(&self) -> Pmf {
        let masses = (0..self.x_len())
            .map(|x| {
                kahan_sum(
                    self.py.masses().iter().zip(&self.conditionals).map(|(w, c)| w * c.masses()[x]),
                )
            })
            .collect();
        Pmf::from_closed_form(masses, None)
    }

    /// Pairs `(P_Y(y), P_{X|Y=y})` with positive weight.
    pub fn support(&self) -> impl Iterator<Item = (f64, &Pmf)> {
        self.py.masses().iter().copied().zip(&self.conditionals).filter(|(w, _)| *w > 0.0)
    }

    fn expectation(&self, f: impl Fn(&Pmf) -> f64) -> f64 {
        kahan_sum(self.support().map(|(w, c)| w * f(c)))
    }
}

/// `h_phi(X|Y) = sum_y P_Y(y) phi(P_{X|Y=y})`.
pub fn conditional_measure(j: &JointDist, phi: &PhiFunctional) -> Result<Extended> {
    let mut acc = KahanSum::new();
    for (w, c) in j.support() {
        match phi_eval(phi, c)? {
            Extended::Infinite => return Ok(Extended::Infinite),
            Extended::Finite(v) => acc.add(w * v),
        }
    }
    Ok(Extended::Finite(acc.value()))
}

fn finite_power_sum(p: &Pmf, alpha: f64) -> f64 {
    kahan_sum(p.masses().iter().filter(|&&m| m > 0.0).map(|&m| m.powf(alpha)))
}

fn conditional_shannon(j: &JointDist) -> f64 {
    j.expectation(|c| kahan_sum(c.masses().iter().map(|&m| eta(m))))
}

/// Arimoto's conditional Rényi entropy `(alpha/(1-alpha)) ln E||P_{X|Y}||_alpha`.
pub fn arimoto(j: &JointDist, alpha: f64) -> f64 {
    if alpha == 1.0 {
        return conditional_shannon(j);
    }
    let mean_norm = j.expectation(|c| finite_power_sum(c, alpha).powf(1.0 / alpha));
    alpha / (1.0 - alpha) * mean_norm.ln()
}

/// Hayashi's conditional Rényi entropy `(1/(1-alpha)) ln E||P_{X|Y}||_alpha^alpha`.
pub fn hayashi(j: &JointDist, alpha: f64) -> f64 {
    if alpha == 1.0 {
        return conditional_shannon(j);
    }
    let mean_power = j.expectation(|c| finite_power_sum(c, alpha));
    mean_power.ln() / (1.0 - alpha)
}

/// Unnormalized Bhattacharyya parameter `E[sum_{x,x'} sqrt(P(x) P(x'))]`.
pub fn bhattacharyya(j: &JointDist) -> f64 {
    j.expectation(|c| {
        let m = c.masses();
        kahan_sum(m.iter().flat_map(|&a| m.iter().map(move |&b| (a * b).sqrt())))
    })
}

/// Conditional quadratic entropy `E[sum_x P(x)(1 - P(x))]`.
pub fn quadratic(j: &JointDist) -> f64 {
    j.expectation(|c| kahan_sum(c.masses().iter().map(|&m| m * (1.0 - m))))
}

/// `K(X|Y) = E[dbar(P_{X|Y})]` over the common alphabet of the conditionals.
pub fn ktv(j: &JointDist) -> Result<f64> {
    let m = j.x_len();
    if m < 2 {
        return Err(Error::InvalidParameter("K(X|Y) needs at least two symbols".into()));
    }
    Ok(j.expectation(|c| dbar_value(c.masses(), m)))
}

/// Conditional measures addressable by name, as used by the command line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Measure {
    Shannon,
    Renyi(f64),
    Arimoto(f64),
    Hayashi(f64),
    Bhattacharyya,
    Quadratic,
    Ktv,
    Lp(f64),
    Dbar,
}

/// Whether the Fano distribution bounds a measure from above or below.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundDirection {
    Upper,
    Lower,
}

impl FromStr for Measure {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let alpha = || -> Result<f64> {
            let a = arg.ok_or_else(|| Error::Parse(format!("measure {name} needs an order, e.g. {name}:2")))?;
            let v: f64 = a.parse().map_err(|_| Error::Parse(format!("bad order {a:?}")))?;
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Parse(format!("order must be positive, got {v}")));
            }
            Ok(v)
        };
        let no_arg = |m: Measure| -> Result<Measure> {
            match arg {
                None => Ok(m),
                Some(_) => Err(Error::Parse(format!("measure {name} takes no order"))),
            }
        };
        match name {
            "shannon" => no_arg(Measure::Shannon),
            "renyi" => Ok(Measure::Renyi(alpha()?)),
            "arimoto" => Ok(Measure::Arimoto(alpha()?)),
            "hayashi" => Ok(Measure::Hayashi(alpha()?)),
            "bhattacharyya" => no_arg(Measure::Bhattacharyya),
            "quadratic" => no_arg(Measure::Quadratic),
            "ktv" => no_arg(Measure::Ktv),
            "lp" => Ok(Measure::Lp(alpha()?)),
            "dbar" => no_arg(Measure::Dbar),
            _ => Err(Error::Parse(format!("unknown measure {s:?}"))),
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Measure::Shannon => write!(f, "shannon"),
            Measure::Renyi(a) => write!(f, "renyi:{a}"),
            Measure::Arimoto(a) => write!(f, "arimoto:{a}"),
            Measure::Hayashi(a) => write!(f, "hayashi:{a}"),
            Measure::Bhattacharyya => write!(f, "bhattacharyya"),
            Measure::Quadratic => write!(f, "quadratic"),
            Measure::Ktv => write!(f, "ktv"),
            Measure::Lp(a) => write!(f, "lp:{a}"),
            Measure::Dbar => write!(f, "dbar"),
        }
    }
}

impl Measure {
    /// The functional `phi` behind the measure. `m` is the alphabet size,
    /// needed only by the dbar-based measures.
    pub fn phi(&self, m: usize) -> Result<PhiFunctional> {
        match *self {
            Measure::Shannon => Ok(PhiFunctional::shannon()),
            Measure::Renyi(a) | Measure::Arimoto(a) | Measure::Hayashi(a) if a == 1.0 => {
                Ok(PhiFunctional::shannon())
            }
            Measure::Renyi(a) | Measure::Arimoto(a) => PhiFunctional::lp_norm(a),
            Measure::Hayashi(a) => PhiFunctional::lp_norm_power(a),
            Measure::Bhattacharyya => PhiFunctional::lp_norm(0.5),
            Measure::Quadratic => Ok(PhiFunctional::quadratic()),
            Measure::Ktv | Measure::Dbar => PhiFunctional::dbar(m),
            Measure::Lp(a) => {
                if a == 1.0 {
                    Err(Error::InvalidParameter("lp:1 is constant".into()))
                } else {
                    PhiFunctional::lp_norm(a)
                }
            }
        }
    }

    /// Maps a value of `phi` (or of its expectation) to the measure's scale.
    pub fn from_phi_value(&self, v: Extended) -> Extended {
        match *self {
            Measure::Renyi(a) | Measure::Arimoto(a) if a != 1.0 => v.map(|u| a / (1.0 - a) * u.ln()),
            Measure::Hayashi(a) if a != 1.0 => v.map(|u| u.ln() / (1.0 - a)),
            _ => v,
        }
    }

    /// Whether `phi(P_Fano)` mapped to the measure's scale is an upper or a
    /// lower bound. Entropy-like measures are bounded above; the convex
    /// measures without a decreasing map are bounded below.
    pub fn direction(&self) -> BoundDirection {
        match *self {
            Measure::Ktv | Measure::Dbar => BoundDirection::Lower,
            Measure::Lp(a) if a > 1.0 => BoundDirection::Lower,
            _ => BoundDirection::Upper,
        }
    }

    /// Value of the conditional measure on a joint distribution.
    pub fn evaluate(&self, j: &JointDist) -> Result<f64> {
        Ok(match *self {
            Measure::Shannon => conditional_shannon(j),
            Measure::Renyi(a) | Measure::Arimoto(a) => arimoto(j, a),
            Measure::Hayashi(a) => hayashi(j, a),
            Measure::Bhattacharyya => bhattacharyya(j),
            Measure::Quadratic => quadratic(j),
            Measure::Ktv | Measure::Dbar => ktv(j)?,
            Measure::Lp(a) => j.expectation(|c| finite_power_sum(c, a).powf(1.0 / a)),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pmf(m: &[f64]) -> Pmf {
        Pmf::new(m.to_vec()).unwrap()
    }

    fn fin(x: Extended) -> f64 {
        x.finite().unwrap()
    }

    #[test]
    fn shannon_examples() {
        assert!((fin(shannon_entropy(&Pmf::uniform(4))) - 4f64.ln()).abs() < 1e-15);
        assert_eq!(fin(shannon_entropy(&pmf(&[1.0, 0.0, 0.0]))), 0.0);
        let h: f64 = [0.6f64, 0.3, 0.1].iter().map(|&p| -p * p.ln()).sum();
        assert!((fin(shannon_entropy(&pmf(&[0.6, 0.3, 0.1]))) - h).abs() < 1e-15);
        assert!((h - 0.897946).abs() < 1e-6);
    }

    #[test]
    fn renyi_examples() {
        for a in [0.3, 0.5, 2.0, 7.0] {
            assert!((fin(renyi_entropy(&Pmf::uniform(5), a)) - 5f64.ln()).abs() < 1e-14);
        }
        let v = fin(renyi_entropy(&pmf(&[0.75, 0.25]), 2.0));
        assert!((v + 0.625f64.ln()).abs() < 1e-15);
        assert!((v - 0.470004).abs() < 1e-6);
    }

    #[test]
    fn lp_norm_examples() {
        let q = pmf(&[0.5, 0.3, 0.2]);
        assert_eq!(fin(lp_norm(&q, 1.0)), 1.0);
        assert!((fin(lp_norm(&pmf(&[0.0, 1.0]), 3.0)) - 1.0).abs() < 1e-15);
        assert!((fin(lp_norm(&pmf(&[0.5, 0.5]), 2.0)) - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn binary_functions() {
        assert!((binary_entropy(0.5) - 2f64.ln()).abs() < 1e-16);
        assert_eq!(binary_entropy(0.0), 0.0);
        assert_eq!(binary_entropy(1.0), 0.0);
        assert!((binary_entropy(0.25) - 0.562335).abs() < 1e-6);
        assert_eq!(binary_divergence(0.3, 0.3), Extended::Finite(0.0));
        assert_eq!(binary_divergence(0.3, 0.0), Extended::Infinite);
        assert_eq!(binary_divergence(0.0, 0.0), Extended::Finite(0.0));
    }

    #[test]
    fn phi_eval_examples() {
        let h = fin(phi_eval(&PhiFunctional::shannon(), &pmf(&[0.7, 0.15, 0.15])).unwrap());
        let expected = -0.7 * 0.7f64.ln() - 0.3 * 0.15f64.ln();
        assert!((h - expected).abs() < 1e-15);
        assert!((h - 0.8188085).abs() < 1e-6);
        let half = PhiFunctional::lp_norm(0.5).unwrap();
        assert!((fin(phi_eval(&half, &Pmf::point_mass(3, 1)).unwrap()) - 1.0).abs() < 1e-15);
        let d = PhiFunctional::dbar(2).unwrap();
        assert_eq!(fin(phi_eval(&d, &pmf(&[0.5, 0.5])).unwrap()), 0.0);
    }

    #[test]
    fn concavity_flags() {
        assert!(PhiFunctional::lp_norm(0.5).unwrap().concave);
        assert!(!PhiFunctional::lp_norm(2.0).unwrap().concave);
        assert!(PhiFunctional::lp_norm(2.0).unwrap().convex);
        assert!(PhiFunctional::dbar(3).unwrap().convex);
        assert!(!PhiFunctional::dbar(3).unwrap().separable);
        assert!(PhiFunctional::dbar(1).is_err());
        assert!(PhiFunctional::lp_norm(1.0).is_err());
    }

    #[test]
    fn tail_values_use_closed_forms() {
        let t = crate::pmf::TailModel::geometric(0.125, 0.5).unwrap();
        let p = Pmf::validate(vec![0.5, 0.25], None, Some(t), false).unwrap();
        let eff: Vec<f64> = (0..3000).map(|i| p.get(i)).collect();
        let h: f64 = eff.iter().map(|&m| eta(m)).sum();
        assert!((fin(shannon_entropy(&p)) - h).abs() < 1e-13);
        let s: f64 = eff.iter().map(|&m| m.powf(0.5)).sum();
        assert!((fin(renyi_entropy(&p, 0.5)) - 2.0 * s.ln()).abs() < 1e-12);
        let lp = crate::pmf::TailModel::log_power(0.5, 3).unwrap();
        let p = Pmf::validate(vec![1.0 - lp.mass()], None, Some(lp), false).unwrap();
        assert_eq!(shannon_entropy(&p), Extended::Infinite);
        assert_eq!(renyi_entropy(&p, 0.5), Extended::Infinite);
        assert!(renyi_entropy(&p, 2.0).is_finite());
        let d = PhiFunctional::dbar(3).unwrap();
        assert!(matches!(phi_eval(&d, &p), Err(Error::UnsupportedTail(_))));
    }

    fn joint(py: &[f64], c: &[&[f64]]) -> JointDist {
        JointDist::new(py.to_vec(), c.iter().map(|v| v.to_vec()).collect()).unwrap()
    }

    #[test]
    fn conditional_measure_examples() {
        let sh = PhiFunctional::shannon();
        let q = pmf(&[0.5, 0.3, 0.2]);
        let ind = joint(&[0.4, 0.6], &[q.masses(), q.masses()]);
        let v = fin(conditional_measure(&ind, &sh).unwrap());
        assert!((v - fin(shannon_entropy(&q))).abs() < 1e-15);
        let det = joint(&[0.5, 0.5], &[&[1.0, 0.0], &[0.0, 1.0]]);
        assert_eq!(fin(conditional_measure(&det, &sh).unwrap()), 0.0);
        let mixed = joint(&[0.5, 0.5], &[&[1.0, 0.0], &[0.5, 0.5]]);
        let v = fin(conditional_measure(&mixed, &sh).unwrap());
        assert!((v - 0.5 * 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn arimoto_hayashi_examples() {
        let q = pmf(&[0.5, 0.3, 0.2]);
        let ind = joint(&[0.3, 0.7], &[q.masses(), q.masses()]);
        for a in [0.5, 2.0, 3.0] {
            let h = fin(renyi_entropy(&q, a));
            assert!((arimoto(&ind, a) - h).abs() < 1e-14);
            assert!((hayashi(&ind, a) - h).abs() < 1e-14);
        }
        let det = joint(&[0.5, 0.5], &[&[1.0, 0.0], &[0.0, 1.0]]);
        assert!(arimoto(&det, 2.0).abs() < 1e-15 && hayashi(&det, 0.5).abs() < 1e-15);
        let sym = joint(&[0.5, 0.5], &[&[0.75, 0.25], &[0.25, 0.75]]);
        let expected = -2.0 * 0.625f64.sqrt().ln();
        assert!((arimoto(&sym, 2.0) - expected).abs() < 1e-15);
        assert!((expected - 0.470004).abs() < 1e-6);
    }

    #[test]
    fn auxiliary_measure_examples() {
        let det = joint(&[0.5, 0.5], &[&[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0]]);
        assert!((bhattacharyya(&det) - 1.0).abs() < 1e-15);
        assert_eq!(quadratic(&det), 0.0);
        assert!((ktv(&det).unwrap() - 1.0).abs() < 1e-15);
        let u = Pmf::uniform(4);
        let uni = joint(&[1.0], &[u.masses()]);
        assert!((bhattacharyya(&uni) - 4.0).abs() < 1e-14);
        assert!((quadratic(&uni) - 0.75).abs() < 1e-15);
        assert!(ktv(&uni).unwrap().abs() < 1e-15);
    }

    /// Direct O(M^2) evaluation of dbar, used as an oracle for the sorted form.
    fn dbar_pairwise(p: &[f64]) -> f64 {
        let m = p.len() as f64;
        let s: f64 = p.iter().flat_map(|a| p.iter().map(move |b| (a - b).abs())).sum();
        s / (2.0 * (m - 1.0))
    }

    #[test]
    fn measure_selectors_parse() {
        assert_eq!("shannon".parse::<Measure>().unwrap(), Measure::Shannon);
        assert_eq!("renyi:2".parse::<Measure>().unwrap(), Measure::Renyi(2.0));
        assert_eq!("hayashi:0.5".parse::<Measure>().unwrap(), Measure::Hayashi(0.5));
        assert_eq!("lp:3".parse::<Measure>().unwrap(), Measure::Lp(3.0));
        assert!("renyi".parse::<Measure>().is_err());
        assert!("shannon:2".parse::<Measure>().is_err());
        assert!("bogus".parse::<Measure>().is_err());
        for s in ["shannon", "renyi:2", "arimoto:0.5", "ktv", "dbar", "lp:3", "quadratic"] {
            assert_eq!(s.parse::<Measure>().unwrap().to_string(), s);
        }
    }

    fn arb_pmf(max_len: usize) -> impl Strategy<Value = Pmf> {
        prop::collection::vec(0.0f64..1.0, 2..=max_len)
            .prop_filter_map("nonzero", |w| Pmf::validate(w, None, None, true).ok())
    }

    fn arb_joint(m: usize, n: usize) -> impl Strategy<Value = JointDist> {
        (
            prop::collection::vec(0.01f64..1.0, n),
            prop::collection::vec(prop::collection::vec(0.0f64..1.0, m), n),
        )
            .prop_filter_map("nonzero", |(py, c)| {
                let py = Pmf::validate(py, None, None, true).ok()?;
                let c = c
                    .into_iter()
                    .map(|v| Pmf::validate(v, None, None, true).ok())
                    .collect::<Option<Vec<_>>>()?;
                JointDist::from_pmfs(py, c).ok()
            })
    }

    /// Moves mass from a smaller entry to a larger one, which produces a
    /// distribution majorizing the input.
    fn concentrate(p: &Pmf, i: usize, j: usize, t: f64) -> Pmf {
        let mut m = p.masses().to_vec();
        let (hi, lo) = if m[i] >= m[j] { (i, j) } else { (j, i) };
        let d = t * m[lo];
        m[hi] += d;
        m[lo] -= d;
        Pmf::from_closed_form(m, None)
    }

    fn concave_phis() -> Vec<PhiFunctional> {
        vec![
            PhiFunctional::shannon(),
            PhiFunctional::lp_norm(0.5).unwrap(),
            PhiFunctional::lp_norm_power(0.3).unwrap(),
            PhiFunctional::quadratic(),
        ]
    }

    proptest! {
        #[test]
        fn dbar_sorted_form_matches_pairwise(p in arb_pmf(9)) {
            let d = PhiFunctional::dbar(p.len()).unwrap();
            let v = fin(phi_eval(&d, &p).unwrap());
            prop_assert!((v - dbar_pairwise(p.masses())).abs() < 1e-13);
            prop_assert!((-1e-15..=1.0 + 1e-15).contains(&v));
        }

        #[test]
        fn bhattacharyya_matches_lp_half_route(j in arb_joint(4, 3)) {
            let via_phi = fin(conditional_measure(&j, &PhiFunctional::lp_norm(0.5).unwrap()).unwrap());
            prop_assert!((bhattacharyya(&j) - via_phi).abs() < 1e-12);
        }

        #[test]
        fn schur_concavity(p in arb_pmf(6), i in 0usize..6, j in 0usize..6, t in 0.0f64..1.0) {
            let (i, j) = (i % p.len(), j % p.len());
            let r = concentrate(&p, i, j, t);
            prop_assert!(crate::pmf::majorizes(&r, &p).holds);
            for phi in concave_phis() {
                let vp = fin(phi_eval(&phi, &p).unwrap());
                let vr = fin(phi_eval(&phi, &r).unwrap());
                prop_assert!(vp >= vr - 1e-12);
            }
        }

        #[test]
        fn conditioning_reduces(j in arb_joint(4, 3)) {
            for phi in concave_phis() {
                let c = fin(conditional_measure(&j, &phi).unwrap());
                let m = fin(phi_eval(&phi, &j.marginal()).unwrap());
                prop_assert!(c <= m + 1e-10);
            }
        }

        #[test]
        fn merging_symbols_never_increases(j in arb_joint(4, 3)) {
            let merged = JointDist::from_pmfs(
                j.py().clone(),
                j.conditionals()
                    .iter()
                    .map(|c| {
                        let m = c.masses();
                        Pmf::from_closed_form(vec![m[0] + m[1], m[2], m[3]], None)
                    })
                    .collect(),
            )
            .unwrap();
            for phi in concave_phis() {
                let a = fin(conditional_measure(&j, &phi).unwrap());
                let b = fin(conditional_measure(&merged, &phi).unwrap());
                prop_assert!(b <= a + 1e-12);
            }
        }

        #[test]
        fn renyi_nonincreasing_in_order(p in arb_pmf(7)) {
            let orders = [0.25, 0.5, 1.0, 2.0, 4.0];
            let v: Vec<f64> = orders.iter().map(|&a| fin(renyi_entropy(&p, a))).collect();
            for w in v.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12);
            }
        }

        #[test]
        fn renyi_is_continuous_at_one(p in arb_pmf(7)) {
            let h = fin(shannon_entropy(&p));
            prop_assert!((fin(renyi_entropy(&p, 1.0 + 1e-6)) - h).abs() < 1e-4);
            prop_assert!((fin(renyi_entropy(&p, 1.0 - 1e-6)) - h).abs() < 1e-4);
        }

        #[test]
        fn expected_rearranged_prefixes_dominate_marginal(j in arb_joint(5, 3)) {
            let m = j.marginal().sorted_masses();
            let sorted: Vec<Vec<f64>> = j.conditionals().iter().map(|c| c.sorted_masses()).collect();
            let mut acc_m = 0.0;
            for k in 0..5 {
                acc_m += m[k];
                let e: f64 = j
                    .py()
                    .masses()
                    .iter()
                    .zip(&sorted)
                    .map(|(w, s)| w * s[..=k].iter().sum::<f64>())
                    .sum();
                prop_assert!(e >= acc_m - 1e-12);
            }
        }
    }
}
