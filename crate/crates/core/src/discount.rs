//! Discount vectors, the standard families and the distance between vectors.
//!
//! A vector of age `k` stores an explicit head for `t = k, k+1, ...` and an
//! analytic tail afterwards. Tails are evaluated at `j = t - anchor`, where the
//! anchor is an absolute time: `0` for `γ^t`, `k` for forms in `t - k`.

use crate::error::{Error, Result};
use crate::scalar::{Rational, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub enum Tail<S> {
    Zero,
    /// `coeff * rate^j`
    Geometric {
        coeff: S,
        rate: S,
    },
    /// `scale / (1 + kappa j)`
    Hyperbolic {
        scale: S,
        kappa: S,
    },
    /// `scale / (1 + kappa j)^beta`; evaluated in floating point.
    Power {
        scale: S,
        kappa: f64,
        beta: f64,
    },
    Constant(S),
}

impl<S: Scalar> Tail<S> {
    fn at(&self, j: usize) -> S {
        match self {
            Tail::Zero => S::zero(),
            Tail::Geometric { coeff, rate } => coeff.clone() * rate.powu(j as u64),
            Tail::Hyperbolic { scale, kappa } => scale.clone() / (S::one() + kappa.clone() * S::from_usize(j)),
            Tail::Power { scale, kappa, beta } => scale.clone() * S::from_f64((1.0 + kappa * j as f64).powf(-beta)),
            Tail::Constant(c) => c.clone(),
        }
    }

    /// True when every tail entry is zero.
    fn vanishes(&self) -> bool {
        match self {
            Tail::Zero => true,
            Tail::Geometric { coeff, .. } => coeff.is_zero(),
            Tail::Hyperbolic { scale, .. } | Tail::Power { scale, .. } => scale.is_zero(),
            Tail::Constant(c) => c.is_zero(),
        }
    }

    /// `Σ_{j ≥ j1}`; `None` when the series diverges.
    fn mass_from(&self, j1: usize) -> Option<S> {
        if self.vanishes() {
            return Some(S::zero());
        }
        match self {
            Tail::Zero => Some(S::zero()),
            Tail::Geometric { coeff, rate } => {
                if *rate < S::one() {
                    Some(coeff.clone() * rate.powu(j1 as u64) / (S::one() - rate.clone()))
                } else {
                    None
                }
            }
            Tail::Hyperbolic { .. } | Tail::Constant(_) => None,
            Tail::Power { scale, kappa, beta } => {
                // first term plus the integral of the remaining decreasing terms
                let a = 1.0 + kappa * j1 as f64;
                let bound = a.powf(-beta) + a.powf(1.0 - beta) / (kappa * (beta - 1.0));
                Some(scale.clone() * S::from_f64(bound))
            }
        }
    }

    fn scaled(&self, alpha: &S) -> Tail<S> {
        let a = alpha.clone();
        match self {
            Tail::Zero => Tail::Zero,
            Tail::Geometric { coeff, rate } => Tail::Geometric { coeff: coeff.clone() * a, rate: rate.clone() },
            Tail::Hyperbolic { scale, kappa } => Tail::Hyperbolic { scale: scale.clone() * a, kappa: kappa.clone() },
            Tail::Power { scale, kappa, beta } => Tail::Power { scale: scale.clone() * a, kappa: *kappa, beta: *beta },
            Tail::Constant(c) => Tail::Constant(c.clone() * a),
        }
    }
}

/// Where the positive entries of a vector end.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Support {
    Empty,
    EndsAt(usize),
    Unbounded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiscountVector<S> {
    age: usize,
    head: Vec<S>,
    tail: Tail<S>,
    anchor: usize,
}

impl<S: Scalar> DiscountVector<S> {
    pub fn new(age: usize, head: Vec<S>, tail: Tail<S>, anchor: usize) -> Self {
        assert!(age >= 1, "ages start at 1");
        assert!(anchor <= age + head.len(), "tail anchor after tail start");
        DiscountVector { age, head, tail, anchor }
    }

    /// Entries for `t = age, age+1, ...`, zero afterwards.
    pub fn explicit(age: usize, from_age: Vec<S>) -> Self {
        Self::new(age, from_age, Tail::Zero, age)
    }

    /// Entries indexed from `t = 1`; those before `age` are dropped.
    pub fn from_full(age: usize, full: &[S]) -> Self {
        let head = full.iter().skip(age - 1).cloned().collect();
        Self::explicit(age, head)
    }

    pub fn age(&self) -> usize {
        self.age
    }

    pub fn head(&self) -> &[S] {
        &self.head
    }

    pub fn tail(&self) -> &Tail<S> {
        &self.tail
    }

    /// First time covered by the analytic tail.
    pub fn tail_start(&self) -> usize {
        self.age + self.head.len()
    }

    /// `d^k_t`; zero for `t < k` (those entries are never read).
    pub fn entry(&self, t: usize) -> S {
        if t < self.age {
            return S::zero();
        }
        let i = t - self.age;
        if i < self.head.len() {
            return self.head[i].clone();
        }
        self.tail.at(t - self.anchor)
    }

    /// Entries for `t = 1..=until`.
    pub fn entries(&self, until: usize) -> Vec<S> {
        (1..=until).map(|t| self.entry(t)).collect()
    }

    pub fn support(&self) -> Support {
        if !self.tail.vanishes() {
            return Support::Unbounded;
        }
        match self.head.iter().rposition(|x| x.is_positive()) {
            Some(i) => Support::EndsAt(self.age + i),
            None => Support::Empty,
        }
    }

    pub fn is_summable(&self) -> bool {
        self.tail.mass_from(0).is_some()
    }

    /// `Σ_{t > horizon} d^k_t`, or `None` for infinity.
    pub fn tail_mass(&self, horizon: usize) -> Option<S> {
        let from = (horizon + 1).max(self.age);
        let mut total = S::zero();
        for t in from..self.tail_start() {
            total = total + self.head[t - self.age].clone();
        }
        let t1 = from.max(self.tail_start());
        Some(total + self.tail.mass_from(t1 - self.anchor)?)
    }

    /// The same absolute entries seen from a later age.
    pub fn restrict_from(&self, age: usize) -> Self {
        assert!(age >= self.age);
        let skip = (age - self.age).min(self.head.len());
        DiscountVector { age, head: self.head[skip..].to_vec(), tail: self.tail.clone(), anchor: self.anchor }
    }

    /// The vector moved `age' - age` steps later: `d'_{t} = d_{t - shift}`.
    pub fn shifted_to(&self, age: usize) -> Self {
        assert!(age >= self.age);
        let shift = age - self.age;
        DiscountVector { age, head: self.head.clone(), tail: self.tail.clone(), anchor: self.anchor + shift }
    }

    pub fn scaled(&self, alpha: &S) -> Self {
        DiscountVector {
            age: self.age,
            head: self.head.iter().map(|x| x.clone() * alpha.clone()).collect(),
            tail: self.tail.scaled(alpha),
            anchor: self.anchor,
        }
    }

    /// Nonnegative entries and at least one positive entry at `t >= age`.
    pub fn validate(&self) -> Result<()> {
        let bad = |x: &S| *x < S::zero() || !x.to_f64().is_finite();
        if let Some(i) = self.head.iter().position(bad) {
            return Err(Error::InvalidDiscountEntry { age: self.age, time: self.age + i });
        }
        let tail_ok = match &self.tail {
            Tail::Zero => true,
            Tail::Geometric { coeff, rate } => !bad(coeff) && !bad(rate),
            Tail::Hyperbolic { scale, kappa } => !bad(scale) && kappa.is_positive(),
            Tail::Power { scale, kappa, beta } => !bad(scale) && *kappa > 0.0 && *beta > 1.0,
            Tail::Constant(c) => !bad(c),
        };
        if !tail_ok {
            return Err(Error::InvalidDiscountEntry { age: self.age, time: self.tail_start() });
        }
        let positive_tail = match &self.tail {
            Tail::Geometric { coeff, rate } => {
                coeff.is_positive() && (rate.is_positive() || self.tail_start() == self.anchor)
            }
            t => !t.vanishes(),
        };
        if self.head.iter().any(Scalar::is_positive) || positive_tail {
            Ok(())
        } else {
            Err(Error::DegenerateColumn { age: self.age, until: None })
        }
    }
}

/// The parametric families; parameters stay exact where the form allows it.
#[derive(Clone, Debug, PartialEq)]
pub enum Family {
    /// `1[t - k < H]`
    ConstantHorizon { horizon: usize },
    /// `1[t <= m]`
    FixedLifetime { lifetime: usize },
    /// `1 / (1 + κ (t - k))`
    Hyperbolic { kappa: Rational },
    /// `1 / (1 + κ (t - k))^β`, `β > 1`
    PowerHyperbolic { kappa: f64, beta: f64 },
    /// `γ^t`
    Geometric { gamma: Rational },
    /// `γ^(t - k)`
    SlidingGeometric { gamma: Rational },
    /// `1`
    NoDiscounting,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::ConstantHorizon { .. } => "constant-horizon",
            Family::FixedLifetime { .. } => "fixed-lifetime",
            Family::Hyperbolic { .. } => "hyperbolic",
            Family::PowerHyperbolic { .. } => "power-hyperbolic",
            Family::Geometric { .. } => "geometric",
            Family::SlidingGeometric { .. } => "sliding-geometric",
            Family::NoDiscounting => "no-discounting",
        }
    }

    /// Whether entries are exact rationals (everything except the power form).
    pub fn is_exact(&self) -> bool {
        !matches!(self, Family::PowerHyperbolic { .. })
    }

    pub fn check(&self) -> Result<()> {
        let zero = Rational::from_ratio(0, 1);
        let one = Rational::from_ratio(1, 1);
        let fail = |msg: String| Err(Error::InvalidParameter(msg));
        match self {
            Family::ConstantHorizon { horizon } if *horizon < 1 => fail("constant horizon needs H >= 1".into()),
            Family::FixedLifetime { lifetime } if *lifetime < 1 => fail("fixed lifetime needs m >= 1".into()),
            Family::Hyperbolic { kappa } if *kappa <= zero => fail(format!("hyperbolic needs kappa > 0, got {kappa}")),
            Family::PowerHyperbolic { kappa, beta } if !(*kappa > 0.0 && *beta > 1.0 && beta.is_finite()) => {
                fail(format!("power hyperbolic needs kappa > 0 and beta > 1, got kappa={kappa}, beta={beta}"))
            }
            Family::Geometric { gamma } | Family::SlidingGeometric { gamma } if !(*gamma > zero && *gamma < one) => {
                fail(format!("geometric needs gamma in (0,1), got {gamma}"))
            }
            _ => Ok(()),
        }
    }
}

/// Column `k` of a family.
pub fn make_discount<S: Scalar>(family: &Family, k: usize) -> Result<DiscountVector<S>> {
    if k == 0 {
        return Err(Error::InvalidParameter("ages start at 1".into()));
    }
    family.check()?;
    Ok(match family {
        Family::ConstantHorizon { horizon } => DiscountVector::explicit(k, vec![S::one(); *horizon]),
        Family::FixedLifetime { lifetime } => {
            DiscountVector::explicit(k, vec![S::one(); (lifetime + 1).saturating_sub(k)])
        }
        Family::Hyperbolic { kappa } => {
            DiscountVector::new(k, Vec::new(), Tail::Hyperbolic { scale: S::one(), kappa: S::from_rational(kappa) }, k)
        }
        Family::PowerHyperbolic { kappa, beta } => {
            DiscountVector::new(k, Vec::new(), Tail::Power { scale: S::one(), kappa: *kappa, beta: *beta }, k)
        }
        Family::Geometric { gamma } => {
            DiscountVector::new(k, Vec::new(), Tail::Geometric { coeff: S::one(), rate: S::from_rational(gamma) }, 0)
        }
        Family::SlidingGeometric { gamma } => {
            DiscountVector::new(k, Vec::new(), Tail::Geometric { coeff: S::one(), rate: S::from_rational(gamma) }, k)
        }
        Family::NoDiscounting => DiscountVector::new(k, Vec::new(), Tail::Constant(S::one()), k),
    })
}

/// `Σ_{i ≥ max(k, j)} |a_i - b_i|`.
///
/// Exact when both tails vanish or are geometric; two non-summable tails
/// that differ have no finite distance.
pub fn distance<S: Scalar>(a: &DiscountVector<S>, b: &DiscountVector<S>) -> Result<S> {
    let start = a.age.max(b.age);
    let t1 = a.tail_start().max(b.tail_start()).max(start);
    let mut sum = S::zero();
    for t in start..t1 {
        sum = sum + (a.entry(t) - b.entry(t)).abs_val();
    }
    Ok(sum + tail_distance(a, b, t1)?)
}

fn tail_distance<S: Scalar>(a: &DiscountVector<S>, b: &DiscountVector<S>, t1: usize) -> Result<S> {
    let (ta, tb) = (&a.tail, &b.tail);
    if ta.vanishes() && tb.vanishes() {
        return Ok(S::zero());
    }
    if ta.vanishes() {
        return b.tail.mass_from(t1 - b.anchor).ok_or(Error::IncomparableTails);
    }
    if tb.vanishes() {
        return a.tail.mass_from(t1 - a.anchor).ok_or(Error::IncomparableTails);
    }
    if ta == tb && a.anchor == b.anchor {
        return Ok(S::zero());
    }
    if let (Tail::Geometric { rate: ra, .. }, Tail::Geometric { rate: rb, .. }) = (ta, tb) {
        if *ra >= S::one() || *rb >= S::one() {
            let same = ra == rb && a.entry(t1) == b.entry(t1);
            return if same { Ok(S::zero()) } else { Err(Error::IncomparableTails) };
        }
        // the difference of two geometric sequences changes sign at most once
        let mut t = t1;
        let mut sum = S::zero();
        if ra != rb {
            let (x, y) = (a.entry(t1).to_f64(), b.entry(t1).to_f64());
            let ratio = (ra.to_f64() / rb.to_f64()).ln();
            let cross = if x > 0.0 && y > 0.0 && ratio != 0.0 { (y / x).ln() / ratio } else { 0.0 };
            let stop = t1 + (cross.max(0.0).ceil() as usize).min(1_000_000) + 1;
            while t < stop {
                sum = sum + (a.entry(t) - b.entry(t)).abs_val();
                t += 1;
            }
        }
        let ma = a.tail.mass_from(t - a.anchor).expect("summable");
        let mb = b.tail.mass_from(t - b.anchor).expect("summable");
        return Ok(sum + (ma - mb).abs_val());
    }
    Err(Error::IncomparableTails)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    #[test]
    fn family_entries() {
        let g: DiscountVector<Rational> = make_discount(&Family::Geometric { gamma: q(1, 2) }, 1).unwrap();
        assert_eq!(g.entries(3), vec![q(1, 2), q(1, 4), q(1, 8)]);
        let h: DiscountVector<Rational> = make_discount(&Family::ConstantHorizon { horizon: 2 }, 3).unwrap();
        assert_eq!(h.entries(6), vec![q(0, 1), q(0, 1), q(1, 1), q(1, 1), q(0, 1), q(0, 1)]);
        let hyp: DiscountVector<Rational> = make_discount(&Family::Hyperbolic { kappa: q(1, 1) }, 1).unwrap();
        assert_eq!(hyp.entries(3), vec![q(1, 1), q(1, 2), q(1, 3)]);
        let f: DiscountVector<Rational> = make_discount(&Family::FixedLifetime { lifetime: 3 }, 2).unwrap();
        assert_eq!(f.entries(5), vec![q(0, 1), q(1, 1), q(1, 1), q(0, 1), q(0, 1)]);
        assert_eq!(f.support(), Support::EndsAt(3));
    }

    #[test]
    fn out_of_range_parameters() {
        assert!(make_discount::<f64>(&Family::Geometric { gamma: q(1, 1) }, 1).is_err());
        assert!(make_discount::<f64>(&Family::Hyperbolic { kappa: q(0, 1) }, 1).is_err());
        assert!(make_discount::<f64>(&Family::PowerHyperbolic { kappa: 1.0, beta: 1.0 }, 1).is_err());
        assert!(make_discount::<f64>(&Family::ConstantHorizon { horizon: 0 }, 1).is_err());
        assert!(make_discount::<f64>(&Family::Geometric { gamma: q(1, 2) }, 0).is_err());
    }

    #[test]
    fn tail_masses() {
        let g: DiscountVector<Rational> = make_discount(&Family::Geometric { gamma: q(1, 2) }, 1).unwrap();
        assert_eq!(g.tail_mass(3), Some(q(1, 8)));
        assert_eq!(g.tail_mass(0), Some(q(1, 1)));
        let f: DiscountVector<Rational> = make_discount(&Family::FixedLifetime { lifetime: 10 }, 1).unwrap();
        assert_eq!(f.tail_mass(10), Some(q(0, 1)));
        assert_eq!(f.tail_mass(8), Some(q(2, 1)));
        let h: DiscountVector<Rational> = make_discount(&Family::Hyperbolic { kappa: q(1, 1) }, 1).unwrap();
        assert_eq!(h.tail_mass(1000), None);
        let n: DiscountVector<f64> = make_discount(&Family::NoDiscounting, 4).unwrap();
        assert_eq!(n.tail_mass(2), None);
    }

    #[test]
    fn power_tail_bound_dominates_partial_sums() {
        let p: DiscountVector<f64> = make_discount(&Family::PowerHyperbolic { kappa: 0.5, beta: 2.0 }, 1).unwrap();
        for horizon in [1usize, 5, 40] {
            let partial: f64 = (horizon + 1..200_000).map(|t| p.entry(t)).sum();
            let bound = p.tail_mass(horizon).unwrap();
            assert!(bound >= partial, "{bound} < {partial}");
            assert!(bound <= partial * 1.5 + 1e-3);
        }
    }

    #[test]
    fn restrict_and_shift() {
        let v = DiscountVector::from_full(1, &[q(1, 1), q(2, 1), q(3, 1)]);
        let r = v.restrict_from(2);
        assert_eq!(r.entries(4), vec![q(0, 1), q(2, 1), q(3, 1), q(0, 1)]);
        let s = v.shifted_to(3);
        assert_eq!(s.entries(6), vec![q(0, 1), q(0, 1), q(1, 1), q(2, 1), q(3, 1), q(0, 1)]);
        let g: DiscountVector<Rational> = make_discount(&Family::SlidingGeometric { gamma: q(1, 2) }, 1).unwrap();
        assert_eq!(g.shifted_to(3).entries(4), vec![q(0, 1), q(0, 1), q(1, 1), q(1, 2)]);
    }

    #[test]
    fn distances() {
        let g: DiscountVector<Rational> = make_discount(&Family::Geometric { gamma: q(1, 2) }, 1).unwrap();
        assert_eq!(distance(&g, &g).unwrap(), q(0, 1));
        assert_eq!(distance(&g, &g.scaled(&q(2, 1))).unwrap(), q(1, 1));
        let zero_tail = DiscountVector::explicit(1, vec![q(1, 2)]);
        // |1/2-1/2| + Σ_{t>=2} 2^-t
        assert_eq!(distance(&g, &zero_tail).unwrap(), q(1, 2));
        let h: DiscountVector<Rational> = make_discount(&Family::Hyperbolic { kappa: q(1, 1) }, 1).unwrap();
        assert_eq!(distance(&h, &zero_tail), Err(Error::IncomparableTails));
        assert_eq!(distance(&h, &h).unwrap(), q(0, 1));
    }

    #[test]
    fn distance_between_different_rates_matches_direct_sum() {
        let a = DiscountVector::new(1, vec![], Tail::Geometric { coeff: 1.0, rate: 0.5 }, 0);
        let b = DiscountVector::new(2, vec![], Tail::Geometric { coeff: 3.0, rate: 0.8 }, 0);
        let direct: f64 = (2..2000).map(|t| (a.entry(t) - b.entry(t)).abs()).sum();
        assert!((distance(&a, &b).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn validation() {
        assert!(DiscountVector::<f64>::explicit(2, vec![0.0, 0.0]).validate().is_err());
        assert!(DiscountVector::<f64>::explicit(2, vec![0.0, -1.0]).validate().is_err());
        assert!(DiscountVector::<f64>::explicit(2, vec![0.0, 1.0]).validate().is_ok());
    }
}
