//! Discount matrices and the time-consistency checks.

use serde::Serialize;

use crate::discount::{make_discount, DiscountVector, Family};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Absolute tolerance for deciding that an entry is zero.
pub const ZERO_TOLERANCE: f64 = 1e-12;

/// How columns beyond the explicit ones are produced.
#[derive(Clone, Debug, PartialEq)]
pub enum ColumnRule<S> {
    /// Only the explicit columns exist.
    None,
    /// Column `k` is column 1 shifted `k - 1` steps later.
    Sliding,
    /// Later columns reuse the last explicit column's absolute entries.
    RepeatLast,
    Family(Family),
    /// Column `k` is `α_k` times `base` restricted to `t >= k`; `α_k = 1`
    /// for every `k` when `alphas` is absent.
    Scaled {
        base: DiscountVector<S>,
        alphas: Option<Vec<S>>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiscountMatrix<S> {
    explicit: Vec<DiscountVector<S>>,
    rule: ColumnRule<S>,
}

impl<S: Scalar> DiscountMatrix<S> {
    /// `columns[i]` must have age `i + 1`.
    pub fn from_columns(columns: Vec<DiscountVector<S>>, rule: ColumnRule<S>) -> Result<Self> {
        for (i, c) in columns.iter().enumerate() {
            if c.age() != i + 1 {
                return Err(Error::InvalidParameter(format!("column {} has age {}", i + 1, c.age())));
            }
        }
        if matches!(rule, ColumnRule::Sliding | ColumnRule::RepeatLast) && columns.is_empty() {
            return Err(Error::InvalidParameter("rule needs at least one explicit column".into()));
        }
        Ok(DiscountMatrix { explicit: columns, rule })
    }

    pub fn family(family: Family) -> Result<Self> {
        family.check()?;
        Ok(DiscountMatrix { explicit: Vec::new(), rule: ColumnRule::Family(family) })
    }

    /// Full vectors indexed from `t = 1`, one per column (entries before
    /// the column's age are ignored).
    pub fn from_rows(columns: &[Vec<S>], rule: ColumnRule<S>) -> Result<Self> {
        let cols = columns.iter().enumerate().map(|(i, c)| DiscountVector::from_full(i + 1, c)).collect();
        Self::from_columns(cols, rule)
    }

    pub fn explicit_columns(&self) -> &[DiscountVector<S>] {
        &self.explicit
    }

    pub fn rule(&self) -> &ColumnRule<S> {
        &self.rule
    }

    /// `δ^k`.
    pub fn column(&self, k: usize) -> Result<DiscountVector<S>> {
        if k == 0 {
            return Err(Error::ColumnUnavailable(0));
        }
        if let Some(c) = self.explicit.get(k - 1) {
            return Ok(c.clone());
        }
        match &self.rule {
            ColumnRule::None => Err(Error::ColumnUnavailable(k)),
            ColumnRule::Sliding => Ok(self.explicit[0].shifted_to(k)),
            ColumnRule::RepeatLast => Ok(self.explicit.last().expect("nonempty").restrict_from(k)),
            ColumnRule::Family(f) => make_discount(f, k),
            ColumnRule::Scaled { base, alphas } => {
                let alpha = match alphas {
                    None => S::one(),
                    Some(list) => list.get(k - 1).cloned().ok_or(Error::ColumnUnavailable(k))?,
                };
                Ok(base.restrict_from(k).scaled(&alpha))
            }
        }
    }

    /// Matrix entry `d^k_t`.
    pub fn entry(&self, k: usize, t: usize) -> Result<S> {
        Ok(self.column(k)?.entry(t))
    }
}

/// All time-consistent matrices: column `k` is `α_k` times the base.
pub fn make_consistent_matrix<S: Scalar>(base: DiscountVector<S>, alphas: Option<Vec<S>>) -> Result<DiscountMatrix<S>> {
    if base.age() != 1 {
        return Err(Error::InvalidParameter(format!("base vector must have age 1, got {}", base.age())));
    }
    base.validate()?;
    if let Some(list) = &alphas {
        if let Some(i) = list.iter().position(|a| !a.is_positive()) {
            return Err(Error::InvalidParameter(format!("alpha_{} = {} is not positive", i + 1, list[i])));
        }
    }
    Ok(DiscountMatrix { explicit: Vec::new(), rule: ColumnRule::Scaled { base, alphas } })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConsistencyReport<S> {
    pub consistent: bool,
    /// `α_1 .. α_K`, anchored at the first `t >= k` with `d^1_t > 0`.
    pub alphas: Vec<S>,
    /// First violating `(k, t)`.
    pub witness: Option<(usize, usize)>,
}

fn is_zero<S: Scalar>(x: &S) -> bool {
    x.abs_val().to_f64() <= ZERO_TOLERANCE
}

/// `|a - b| <= tol * max(|a|, |b|)`.
fn close<S: Scalar>(a: &S, b: &S, tol: &S) -> bool {
    let scale = if a.abs_val() > b.abs_val() { a.abs_val() } else { b.abs_val() };
    (a.clone() - b.clone()).abs_val() <= tol.clone() * scale
}

/// Finite-window certificate of `d^k_t = α_k d^1_t` for `k <= K`, `k <= t <= T`.
pub fn is_time_consistent<S: Scalar>(
    m: &DiscountMatrix<S>,
    k_max: usize,
    t_max: usize,
    tol: &S,
) -> Result<ConsistencyReport<S>> {
    if k_max < 1 || t_max < k_max {
        return Err(Error::Precondition(format!("need T >= K >= 1, got K = {k_max}, T = {t_max}")));
    }
    let first = m.column(1)?.entries(t_max);
    let mut columns = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let col = m.column(k)?.entries(t_max);
        if col[k - 1..].iter().all(is_zero) {
            return Err(Error::DegenerateColumn { age: k, until: Some(t_max) });
        }
        columns.push(col);
    }
    let alphas: Vec<S> = (1..=k_max)
        .map(|k| match (k..=t_max).find(|&t| !is_zero(&first[t - 1])) {
            Some(t) => columns[k - 1][t - 1].clone() / first[t - 1].clone(),
            None => S::zero(),
        })
        .collect();
    for k in 1..=k_max {
        let alpha = &alphas[k - 1];
        for t in k..=t_max {
            let (d1, dk) = (&first[t - 1], &columns[k - 1][t - 1]);
            let agree = if is_zero(d1) || is_zero(dk) {
                is_zero(d1) == is_zero(dk)
            } else {
                close(dk, &(alpha.clone() * d1.clone()), tol)
            };
            if !agree {
                return Ok(ConsistencyReport { consistent: false, alphas, witness: Some((k, t)) });
            }
        }
    }
    Ok(ConsistencyReport { consistent: true, alphas, witness: None })
}

/// `d^k_{k+t} = d^1_{t+1}` for `k <= K`, `k + t <= T`.
pub fn is_sliding<S: Scalar>(m: &DiscountMatrix<S>, k_max: usize, t_max: usize, tol: &S) -> Result<bool> {
    let first = m.column(1)?;
    for k in 2..=k_max {
        let col = m.column(k)?;
        for t in 0..=t_max.saturating_sub(k) {
            let (a, b) = (col.entry(k + t), first.entry(t + 1));
            let agree = if is_zero(&a) || is_zero(&b) { is_zero(&a) && is_zero(&b) } else { close(&a, &b, tol) };
            if !agree {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeometricRate<S> {
    pub gamma: S,
    /// `0 < γ < 1`; no discounting gives the degenerate rate 1.
    pub proper: bool,
}

/// The rate of a sliding, time-consistent matrix: `d^1_t ∝ γ^t`.
///
/// Returns `None` when the recovered rate does not reproduce column 1,
/// which can only happen if the two checks disagree at their tolerance.
pub fn infer_geometric_rate<S: Scalar>(
    m: &DiscountMatrix<S>,
    t_max: usize,
    tol: &S,
) -> Result<Option<GeometricRate<S>>> {
    if t_max < 2 {
        return Err(Error::Precondition("rate inference needs T >= 2".into()));
    }
    if !is_sliding(m, t_max, t_max, tol)? {
        return Err(Error::Precondition("matrix is not sliding".into()));
    }
    let report = is_time_consistent(m, t_max, t_max, tol)?;
    if !report.consistent {
        return Err(Error::Precondition("matrix is not time-consistent".into()));
    }
    let alpha2 = &report.alphas[1];
    if alpha2.is_zero() {
        return Ok(None);
    }
    let gamma = S::one() / alpha2.clone();
    let first = m.column(1)?.entries(t_max);
    let t0 = match first.iter().position(|x| !is_zero(x)) {
        Some(i) => i + 1,
        None => return Ok(None),
    };
    for t in t0..=t_max {
        let predicted = first[t0 - 1].clone() * gamma.powu((t - t0) as u64);
        let agree = if is_zero(&predicted) || is_zero(&first[t - 1]) {
            is_zero(&predicted) && is_zero(&first[t - 1])
        } else {
            close(&first[t - 1], &predicted, tol)
        };
        if !agree {
            return Ok(None);
        }
    }
    let proper = gamma.is_positive() && gamma < S::one();
    Ok(Some(GeometricRate { gamma, proper }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    fn fam(f: Family) -> DiscountMatrix<Rational> {
        DiscountMatrix::family(f).unwrap()
    }

    #[test]
    fn geometric_is_consistent_with_unit_alphas() {
        let m = fam(Family::Geometric { gamma: q(9, 10) });
        let r = is_time_consistent(&m, 6, 12, &q(0, 1)).unwrap();
        assert!(r.consistent);
        assert!(r.alphas.iter().all(|a| *a == q(1, 1)));
    }

    #[test]
    fn constant_horizon_witness() {
        let m = fam(Family::ConstantHorizon { horizon: 2 });
        let r = is_time_consistent(&m, 4, 8, &q(0, 1)).unwrap();
        assert!(!r.consistent);
        assert_eq!(r.witness, Some((2, 3)));
    }

    #[test]
    fn fixed_lifetime_is_consistent_inside_its_support() {
        let m = fam(Family::FixedLifetime { lifetime: 10 });
        assert!(is_time_consistent(&m, 10, 20, &q(0, 1)).unwrap().consistent);
        assert_eq!(
            is_time_consistent(&m, 11, 20, &q(0, 1)).unwrap_err(),
            Error::DegenerateColumn { age: 11, until: Some(20) }
        );
    }

    #[test]
    fn sliding_checks() {
        let tol = q(0, 1);
        assert!(is_sliding(&fam(Family::SlidingGeometric { gamma: q(1, 2) }), 6, 12, &tol).unwrap());
        assert!(!is_sliding(&fam(Family::Geometric { gamma: q(1, 2) }), 6, 12, &tol).unwrap());
        assert!(is_sliding(&fam(Family::ConstantHorizon { horizon: 2 }), 6, 12, &tol).unwrap());
    }

    #[test]
    fn rate_inference() {
        let tol = q(0, 1);
        let r = infer_geometric_rate(&fam(Family::SlidingGeometric { gamma: q(7, 10) }), 10, &tol).unwrap().unwrap();
        assert_eq!(r.gamma, q(7, 10));
        assert!(r.proper);
        let n = infer_geometric_rate(&fam(Family::NoDiscounting), 10, &tol).unwrap().unwrap();
        assert_eq!(n.gamma, q(1, 1));
        assert!(!n.proper);
        assert!(matches!(
            infer_geometric_rate(&fam(Family::FixedLifetime { lifetime: 4 }), 10, &tol),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn consistent_construction() {
        let base: DiscountVector<Rational> = make_discount(&Family::Geometric { gamma: q(9, 10) }, 1).unwrap();
        let alphas: Vec<Rational> = (1..=8).map(|k| q(2, 1).powu(k)).collect();
        let m = make_consistent_matrix(base, Some(alphas.clone())).unwrap();
        let r = is_time_consistent(&m, 8, 16, &q(0, 1)).unwrap();
        assert!(r.consistent);
        for (k, a) in r.alphas.iter().enumerate() {
            assert_eq!(a.clone(), alphas[k].clone() / alphas[0].clone());
        }
        let zero = DiscountVector::explicit(1, vec![q(0, 1); 4]);
        assert!(make_consistent_matrix(zero, None).is_err());
        let base = DiscountVector::explicit(1, vec![q(1, 1)]);
        assert!(make_consistent_matrix(base, Some(vec![q(1, 1), q(-1, 1)])).is_err());
    }

    #[test]
    fn column_rules() {
        let m = DiscountMatrix::from_rows(&[vec![q(1, 1), q(1, 2)]], ColumnRule::Sliding).unwrap();
        assert_eq!(m.column(3).unwrap().entries(5), vec![q(0, 1), q(0, 1), q(1, 1), q(1, 2), q(0, 1)]);
        let m = DiscountMatrix::from_rows(&[vec![q(1, 1), q(1, 2), q(1, 3)]], ColumnRule::RepeatLast).unwrap();
        assert_eq!(m.column(2).unwrap().entries(4), vec![q(0, 1), q(1, 2), q(1, 3), q(0, 1)]);
        let m = DiscountMatrix::from_rows(&[vec![q(1, 1)]], ColumnRule::None).unwrap();
        assert_eq!(m.column(2), Err(Error::ColumnUnavailable(2)));
    }
}
