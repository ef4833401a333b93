//! Two-priced rules: a served agent pays either her value `v` or `v - C`.
//!
//! A rule lives on a finite ascending value grid and stores the two payment
//! probabilities per grid point. Grid functions are read as step functions
//! that are constant on `[v_i, v_{i+1})` and extend left of the grid at their
//! first value; cumulative quantities integrate those steps exactly, which
//! keeps every inequality in this module sound on coarse grids instead of
//! only in the fine-grid limit.

use thiserror::Error;

use crate::dist::DiscreteTypeSpace;
use crate::scalar::{capped, half, smax, smin, Scalar};

#[derive(Debug, Error, PartialEq)]
pub enum TwoPriceError {
    #[error("report is not a grid point")]
    ReportNotOnGrid,
    #[error("input length does not match the rule grid")]
    LengthMismatch,
    #[error("rule grid does not match the type space")]
    GridMismatch,
    #[error("rule invariant violated: {0}")]
    BadRule(String),
}

/// Grid-sampled two-priced allocation: `qv[i]` is the probability of winning
/// and paying `grid[i]`, `qc[i]` of winning and paying `grid[i] - capacity`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPricedRule<T> {
    pub grid: Vec<T>,
    pub qv: Vec<T>,
    pub qc: Vec<T>,
    pub capacity: T,
}

/// Outcome of a BIC check: either clean or the list of profitable deviations.
#[derive(Debug, Clone, PartialEq)]
pub enum BicVerdict<T> {
    Ok,
    Violated(Vec<BicViolation<T>>),
}

impl<T> BicVerdict<T> {
    pub fn is_ok(&self) -> bool {
        matches!(self, BicVerdict::Ok)
    }
}

/// Type `grid[truth]` strictly gains `gain` by reporting `grid[report]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BicViolation<T> {
    pub truth: usize,
    pub report: usize,
    pub gain: T,
}

/// A two-priced rule rewritten so that the discount probability below the
/// capacity is the running integral of `chi`, the prefix maximum of
/// `qv / capacity`. Revenue weakly improves and the rewritten discount curve
/// is convex on `[0, capacity]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedRule<T> {
    pub grid: Vec<T>,
    pub qv: Vec<T>,
    pub qc: Vec<T>,
    pub capacity: T,
    pub chi: Vec<T>,
}

impl<T: Scalar> TwoPricedRule<T> {
    pub fn new(grid: Vec<T>, qv: Vec<T>, qc: Vec<T>, capacity: T) -> Result<Self, TwoPriceError> {
        if grid.len() != qv.len() || grid.len() != qc.len() || grid.is_empty() {
            return Err(TwoPriceError::LengthMismatch);
        }
        if grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(TwoPriceError::BadRule("grid must be strictly increasing".into()));
        }
        if !(capacity > T::zero()) {
            return Err(TwoPriceError::BadRule("capacity must be positive".into()));
        }
        for (a, b) in qv.iter().zip(&qc) {
            if *a < T::zero() || *b < T::zero() || a.clone() + b.clone() > T::one() {
                return Err(TwoPriceError::BadRule(
                    "probabilities must satisfy 0 <= qv, qc and qv + qc <= 1".into(),
                ));
            }
        }
        Ok(Self { grid, qv, qc, capacity })
    }

    /// Build a rule by evaluating `(qv, qc)` at each grid point.
    pub fn from_fn(grid: Vec<T>, capacity: T, f: impl Fn(&T) -> (T, T)) -> Result<Self, TwoPriceError> {
        let (qv, qc) = grid.iter().map(&f).unzip();
        Self::new(grid, qv, qc, capacity)
    }

    /// The rule that always serves at price `v - capacity`.
    pub fn sell_always(grid: Vec<T>, capacity: T) -> Self {
        let n = grid.len();
        Self::new(grid, vec![T::zero(); n], vec![T::one(); n], capacity).expect("valid grid")
    }

    /// Posted price `price` softened by the capacity: a buyer with `v >=
    /// price` is always served and pays `max(price, v - capacity)` in
    /// expectation, realized two-priced as `qc = min(v - price, C) / C`.
    pub fn capped_posted_price(grid: Vec<T>, price: T, capacity: T) -> Self {
        let c = capacity.clone();
        Self::from_fn(grid, capacity, |v| {
            if *v < price {
                (T::zero(), T::zero())
            } else {
                let qc = smin(v.clone() - price.clone(), c.clone()) / c.clone();
                (T::one() - qc.clone(), qc)
            }
        })
        .expect("valid grid")
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Total service probability `q = qv + qc` per grid point.
    pub fn q(&self) -> Vec<T> {
        self.qv.iter().zip(&self.qc).map(|(a, b)| a.clone() + b.clone()).collect()
    }

    /// Expected utility of a type with value `true_value` reporting the grid
    /// point at `report_idx`. Off-equilibrium negative wealth is not floored.
    pub fn utility_at(&self, true_value: &T, report_idx: usize) -> T {
        let r = &self.grid[report_idx];
        let c = &self.capacity;
        let full = capped(true_value.clone() - r.clone(), c.clone());
        let discounted = capped(true_value.clone() - r.clone() + c.clone(), c.clone());
        self.qv[report_idx].clone() * full + self.qc[report_idx].clone() * discounted
    }

    /// As [`utility_at`](Self::utility_at) with the report given by value;
    /// the report must be a grid point.
    pub fn utility_of_report(&self, true_value: &T, report: &T) -> Result<T, TwoPriceError> {
        let idx = self
            .grid
            .iter()
            .position(|g| g == report)
            .ok_or(TwoPriceError::ReportNotOnGrid)?;
        Ok(self.utility_at(true_value, idx))
    }

    /// Direct incentive-compatibility check over every ordered grid pair in
    /// both directions. `tol` absorbs floating error; pass zero for exact
    /// scalars.
    pub fn check_bic(&self, tol: T) -> BicVerdict<T> {
        let mut violations = Vec::new();
        let n = self.len();
        for i in 0..n {
            let truthful = self.utility_at(&self.grid[i], i);
            for j in 0..n {
                if i == j {
                    continue;
                }
                let deviation = self.utility_at(&self.grid[i], j);
                if deviation.clone() - truthful.clone() > tol {
                    violations.push(BicViolation { truth: i, report: j, gain: deviation - truthful.clone() });
                }
            }
        }
        if violations.is_empty() {
            BicVerdict::Ok
        } else {
            BicVerdict::Violated(violations)
        }
    }

    /// Interim expected payment of each grid point:
    /// `p(v) = v q(v) - C qc(v)`.
    pub fn payment_at(&self, i: usize) -> T {
        self.grid[i].clone() * (self.qv[i].clone() + self.qc[i].clone())
            - self.capacity.clone() * self.qc[i].clone()
    }

    /// Expected payment under type masses aligned with the grid.
    pub fn expected_payment(&self, masses: &[T]) -> Result<T, TwoPriceError> {
        if masses.len() != self.len() {
            return Err(TwoPriceError::LengthMismatch);
        }
        let mut total = T::zero();
        for (i, m) in masses.iter().enumerate() {
            total = total + m.clone() * self.payment_at(i);
        }
        Ok(total)
    }

    /// The revenue-dominating rewrite: `chi` is the prefix maximum of
    /// `qv / capacity`; below the capacity the discount probability becomes
    /// the running integral of `chi` (grid functions integrate as steps),
    /// above it the original `qc` is kept.
    pub fn qbar_transform(&self) -> TransformedRule<T> {
        let n = self.len();
        let mut chi = Vec::with_capacity(n);
        let mut running = T::zero();
        for v in &self.qv {
            running = smax(running.clone(), v.clone() / self.capacity.clone());
            chi.push(running.clone());
        }
        let mut qc_bar = Vec::with_capacity(n);
        // Constant extension of chi below the first grid point.
        let mut acc = chi[0].clone() * self.grid[0].clone();
        for i in 0..n {
            if self.grid[i] > self.capacity {
                qc_bar.push(self.qc[i].clone());
            } else {
                qc_bar.push(acc.clone());
            }
            if i + 1 < n {
                acc = acc + chi[i].clone() * (self.grid[i + 1].clone() - self.grid[i].clone());
            }
        }
        TransformedRule {
            grid: self.grid.clone(),
            qv: self.qv.clone(),
            qc: qc_bar,
            capacity: self.capacity.clone(),
            chi,
        }
    }
}

impl<T: Scalar> TransformedRule<T> {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn q(&self) -> Vec<T> {
        self.qv.iter().zip(&self.qc).map(|(a, b)| a.clone() + b.clone()).collect()
    }

    /// Rewritten interim payment `p̄(v) = v q̄(v) - C q̄c(v)`.
    pub fn payment_at(&self, i: usize) -> T {
        self.grid[i].clone() * (self.qv[i].clone() + self.qc[i].clone())
            - self.capacity.clone() * self.qc[i].clone()
    }

    /// Integral of the step extension of `qv` over `[0, grid[idx]]`.
    fn integral_qv(&self, idx: usize) -> T {
        let mut acc = self.qv[0].clone() * self.grid[0].clone();
        for l in 0..idx {
            acc = acc + self.qv[l].clone() * (self.grid[l + 1].clone() - self.grid[l].clone());
        }
        acc
    }

    /// Integral of the rewritten discount curve over `[0, x]` split at the
    /// capacity: below it the curve is piecewise linear in the grid (exact
    /// trapezoids), above it the original `qc` integrates as a step.
    fn integral_qc_bar(&self, x: &T) -> (T, T) {
        let c = &self.capacity;
        let two = T::one() + T::one();
        let mut below = T::zero();
        let mut above = T::zero();
        // Leading ramp from 0 to the first grid point (slope chi[0]).
        let first = smin(self.grid[0].clone(), smin(x.clone(), c.clone()));
        if first > T::zero() {
            below = self.chi[0].clone() * first.clone() * first / two.clone();
        }
        for l in 0..self.len() {
            if self.grid[l] >= *x {
                break;
            }
            let seg_hi = if l + 1 < self.len() { smin(self.grid[l + 1].clone(), x.clone()) } else { x.clone() };
            let lo = self.grid[l].clone();
            if seg_hi <= lo {
                continue;
            }
            if lo >= *c {
                // Entirely above the capacity: step integral of qc.
                above = above + self.qc[l].clone() * (seg_hi - lo);
            } else if seg_hi <= *c {
                // Entirely below: linear with slope chi[l] from qc_bar[l].
                let end = self.qc[l].clone() + self.chi[l].clone() * (seg_hi.clone() - lo.clone());
                below = below + (self.qc[l].clone() + end) / two.clone() * (seg_hi - lo);
            } else {
                // Straddles the capacity.
                let at_c = self.qc[l].clone() + self.chi[l].clone() * (c.clone() - lo.clone());
                below = below + (self.qc[l].clone() + at_c.clone()) / two.clone() * (c.clone() - lo);
                above = above + at_c * (seg_hi - c.clone());
            }
        }
        (below, above)
    }

    /// The three payment components at grid point `v`:
    /// `pI = q̄(v) v - ∫ q̄`, `pII = ∫_0^{min(v,C)} q̄c`,
    /// `pIII = ∫_C^v q̄c` (zero at or below the capacity).
    pub fn decomposition(&self, v: &T) -> (T, T, T) {
        let idx = self
            .grid
            .iter()
            .position(|g| g == v)
            .expect("decomposition point must be on the grid");
        let q_at = self.qv[idx].clone() + self.qc[idx].clone();
        let (p2, p3) = self.integral_qc_bar(v);
        let int_q = self.integral_qv(idx) + p2.clone() + p3.clone();
        let p1 = q_at * v.clone() - int_q;
        (p1, p2, p3)
    }
}

/// The three expectations of the payment upper bound and their sum.
#[derive(Debug, Clone, PartialEq)]
pub struct PaymentBound {
    /// `E[phi^+ q]`, `E[phi^+ qc]`, `E[(v - C)^+ qc]`.
    pub parts: [f64; 3],
    pub bound: f64,
}

/// Upper bound on the expected payment of any BIC rule on this type space:
/// twice the positive virtual surplus plus the value-minus-capacity surplus,
/// each weighted by the service probabilities it can exploit. Virtual values
/// are the forward-difference hazard of the discrete space, whose top point
/// keeps its full value.
pub fn payment_upper_bound(
    rule: &TwoPricedRule<f64>,
    space: &DiscreteTypeSpace,
) -> Result<PaymentBound, TwoPriceError> {
    if rule.grid.len() != space.values.len()
        || rule.grid.iter().zip(&space.values).any(|(a, b)| (a - b).abs() > 1e-12)
    {
        return Err(TwoPriceError::GridMismatch);
    }
    let phi = space.virtual_values();
    let mut parts = [0.0f64; 3];
    for i in 0..rule.len() {
        let m = space.masses[i];
        let phi_plus = phi[i].max(0.0);
        let q = rule.qv[i] + rule.qc[i];
        parts[0] += m * phi_plus * q;
        parts[1] += m * phi_plus * rule.qc[i];
        parts[2] += m * (rule.grid[i] - rule.capacity).max(0.0) * rule.qc[i];
    }
    Ok(PaymentBound { parts, bound: parts.iter().sum() })
}

/// Discrete integral form of the incentive constraints: over every grid pair
/// `v < v'`, the step integral of `qv / C` is at most the discount increment,
/// which is at most the step integral of `q / C` taken from the right.
pub fn integral_ic_holds<T: Scalar>(rule: &TwoPricedRule<T>, tol: T) -> bool {
    let n = rule.len();
    let c = &rule.capacity;
    let q = rule.q();
    for i in 0..n {
        let mut lower = T::zero();
        let mut upper = T::zero();
        for j in i + 1..n {
            let dv = rule.grid[j].clone() - rule.grid[j - 1].clone();
            lower = lower + rule.qv[j - 1].clone() * dv.clone() / c.clone();
            upper = upper + q[j].clone() * dv / c.clone();
            let delta = rule.qc[j].clone() - rule.qc[i].clone();
            if lower.clone() - delta.clone() > tol || delta - upper.clone() > tol {
                return false;
            }
        }
    }
    true
}

/// Trapezoid rule over aligned samples; exact for piecewise-linear data.
pub fn trapezoid<T: Scalar>(xs: &[T], ys: &[T]) -> T {
    assert_eq!(xs.len(), ys.len());
    let mut acc = T::zero();
    for i in 1..xs.len() {
        let dx = xs[i].clone() - xs[i - 1].clone();
        acc = acc + (ys[i].clone() + ys[i - 1].clone()) * half::<T>() * dx;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;

    type Q = Ratio<i64>;
    fn q(n: i64, d: i64) -> Q {
        Ratio::new(n, d)
    }

    /// The worked two-type rule with a non-monotone allocation: values 3 and
    /// 4, capacity 2, q = (5/6, 2/3).
    fn nonmonotone_rule() -> TwoPricedRule<Q> {
        TwoPricedRule::new(
            vec![q(3, 1), q(4, 1)],
            vec![q(1, 3), q(0, 1)],
            vec![q(1, 2), q(2, 3)],
            q(2, 1),
        )
        .unwrap()
    }

    #[test]
    fn worked_example_utilities_are_exact() {
        let r = nonmonotone_rule();
        assert_eq!(r.utility_of_report(&q(3, 1), &q(3, 1)).unwrap(), q(1, 1));
        assert_eq!(r.utility_of_report(&q(3, 1), &q(4, 1)).unwrap(), q(2, 3));
        assert_eq!(r.utility_of_report(&q(4, 1), &q(4, 1)).unwrap(), q(4, 3));
        assert_eq!(r.utility_of_report(&q(4, 1), &q(3, 1)).unwrap(), q(4, 3));
        assert!(r.check_bic(q(0, 1)).is_ok());
        // The allocation is non-monotone: q(3) = 5/6 > q(4) = 2/3.
        let total = r.q();
        assert!(total[0] > total[1]);
        assert_eq!(r.utility_of_report(&q(3, 1), &q(5, 1)), Err(TwoPriceError::ReportNotOnGrid));
    }

    #[test]
    fn lowering_the_top_discount_breaks_bic() {
        let r = TwoPricedRule::new(
            vec![q(3, 1), q(4, 1)],
            vec![q(1, 3), q(0, 1)],
            vec![q(1, 2), q(1, 2)],
            q(2, 1),
        )
        .unwrap();
        match r.check_bic(q(0, 1)) {
            BicVerdict::Violated(vs) => {
                // Type 4 mimics 3 and gains 1/3.
                assert!(vs.iter().any(|v| v.truth == 1 && v.report == 0 && v.gain == q(1, 3)));
            }
            BicVerdict::Ok => panic!("expected a violation"),
        }
    }

    #[test]
    fn zero_rule_is_trivially_bic_with_zero_utility() {
        let r = TwoPricedRule::new(vec![1.0, 2.0], vec![0.0, 0.0], vec![0.0, 0.0], 1.0).unwrap();
        assert_eq!(r.utility_of_report(&1.0, &2.0).unwrap(), 0.0);
        assert!(r.check_bic(1e-9).is_ok());
        assert_eq!(r.expected_payment(&[0.5, 0.5]).unwrap(), 0.0);
        let b = payment_upper_bound(&r, &DiscreteTypeSpace::new(vec![1.0, 2.0], vec![0.5, 0.5]).unwrap()).unwrap();
        assert_eq!(b.parts, [0.0, 0.0, 0.0]);
    }

    #[test]
    fn expected_payment_reproduces_equal_revenue_examples() {
        let er = crate::dist::Dist::equal_revenue(1000.0);
        let space = er.discretize(10_000);

        // Always selling at value-minus-capacity with capacity one earns the
        // mean minus one, i.e. ln 1000.
        let sell = TwoPricedRule::sell_always(space.values.clone(), 1.0);
        let rev = sell.expected_payment(&space.masses).unwrap();
        assert!((rev - 1000.0f64.ln()).abs() < 0.02, "rev = {rev}");

        // The linear-ramp rule with capacity 1000 earns about 1.55.
        let ramp = TwoPricedRule::from_fn(space.values.clone(), 1000.0, |v| {
            let qc = 0.6 * (v - 1.0) / 1000.0;
            let qq = (qc + 0.6).min(1.0);
            (qq - qc, qc)
        })
        .unwrap();
        assert!(ramp.check_bic(1e-9).is_ok());
        let rev = ramp.expected_payment(&space.masses).unwrap();
        assert!((rev - 1.55).abs() < 0.02, "rev = {rev}");
    }

    #[test]
    fn qbar_transform_on_constant_and_stepped_rules() {
        // Constant qv = 0.6 on an even grid over [0, 1000]: the discount
        // curve is exactly linear, 0.6 v / 1000.
        let grid: Vec<f64> = (0..=100).map(|i| 10.0 * i as f64).collect();
        let r = TwoPricedRule::from_fn(grid, 1000.0, |_| (0.6, 0.0)).unwrap();
        let t = r.qbar_transform();
        for (v, qc) in t.grid.iter().zip(&t.qc) {
            assert!((qc - 0.6 * v / 1000.0).abs() < 1e-12);
        }
        // pII at the top: integral of the linear curve, 300 exactly.
        let (_, p2, p3) = t.decomposition(&1000.0);
        assert!((p2 - 300.0).abs() < 1e-9);
        assert_eq!(p3, 0.0);

        // qv stepping down 0.5 -> 0.2 with capacity 2: chi stays at the
        // prefix maximum 0.25 and the discount reaches 0.5 at v = 2.
        let r = TwoPricedRule::<f64>::new(vec![0.0, 1.0, 2.0], vec![0.5, 0.2, 0.2], vec![0.0, 0.3, 0.5], 2.0).unwrap();
        let t = r.qbar_transform();
        assert_eq!(t.chi, vec![0.25, 0.25, 0.25]);
        assert!((t.qc[2] - 0.5f64).abs() < 1e-12);

        // qv identically zero: the rewritten discount vanishes below C.
        let r = TwoPricedRule::new(vec![0.0, 1.0], vec![0.0, 0.0], vec![0.1, 0.2], 2.0).unwrap();
        let t = r.qbar_transform();
        assert_eq!(t.qc, vec![0.0, 0.0]);
    }

    #[test]
    fn decomposition_zero_at_origin_and_capacity_split() {
        // qc climbing at the fastest incentive-compatible slope qv / C.
        let grid: Vec<f64> = (0..=50).map(|i| i as f64 / 50.0).collect();
        let r = TwoPricedRule::from_fn(grid, 0.4, |v| {
            let qc = v * 0.75;
            (0.3f64.min(1.0 - qc), qc)
        })
        .unwrap();
        assert!(r.check_bic(1e-9).is_ok());
        let t = r.qbar_transform();
        let (p1, p2, p3) = t.decomposition(&0.0);
        assert_eq!((p1, p2, p3), (0.0, 0.0, 0.0));
        let (_, _, p3) = t.decomposition(&0.4);
        assert_eq!(p3, 0.0);
        let (_, _, p3) = t.decomposition(&1.0);
        assert!(p3 > 0.0);
        // The decomposition dominates the rewritten payment everywhere.
        for (i, v) in t.grid.iter().enumerate() {
            let (a, b, c) = t.decomposition(v);
            assert!(a + b + c >= t.payment_at(i) - 1e-9);
        }
    }

    #[test]
    fn payment_bound_is_tight_for_sell_always_under_unit_capacity() {
        let er = crate::dist::Dist::equal_revenue(1000.0);
        let space = er.discretize(50_000);
        let rule = TwoPricedRule::sell_always(space.values.clone(), 1.0);
        let b = payment_upper_bound(&rule, &space).unwrap();
        let pay = rule.expected_payment(&space.masses).unwrap();
        // Interior hazard virtual values vanish in the fine-grid limit; the
        // top atom contributes its value (one unit of revenue) to each of the
        // first two parts, and the third part carries E[v - 1] = ln 1000.
        assert!((b.parts[2] - 1000.0f64.ln()).abs() < 0.05, "part 3 = {}", b.parts[2]);
        assert!((b.parts[0] - 1.0).abs() < 0.05, "part 1 = {}", b.parts[0]);
        assert!((b.parts[1] - 1.0).abs() < 0.05, "part 2 = {}", b.parts[1]);
        assert!(b.bound >= pay - 1e-9);
    }

    #[test]
    fn bound_dominates_the_ramp_rule() {
        let er = crate::dist::Dist::equal_revenue(1000.0);
        let space = er.discretize(5_000);
        let ramp = TwoPricedRule::from_fn(space.values.clone(), 1000.0, |v| {
            let qc = 0.6 * (v - 1.0) / 1000.0;
            let qq = (qc + 0.6).min(1.0);
            (qq - qc, qc)
        })
        .unwrap();
        let b = payment_upper_bound(&ramp, &space).unwrap();
        let pay = ramp.expected_payment(&space.masses).unwrap();
        assert!(b.bound >= pay - 1e-9, "bound {} vs payment {}", b.bound, pay);
    }

    #[test]
    fn integral_ic_holds_on_bic_rules_and_fails_on_broken_ones() {
        let er = crate::dist::Dist::equal_revenue(1000.0);
        let space = er.discretize(200);
        let ramp = TwoPricedRule::from_fn(space.values.clone(), 1000.0, |v| {
            let qc = 0.6 * (v - 1.0) / 1000.0;
            let qq = (qc + 0.6).min(1.0);
            (qq - qc, qc)
        })
        .unwrap();
        assert!(integral_ic_holds(&ramp, 1e-9));
        let broken = TwoPricedRule::new(vec![1.0, 2.0], vec![0.9, 0.0], vec![0.0, 0.0], 1.0).unwrap();
        assert!(!integral_ic_holds(&broken, 1e-9));
    }

    #[test]
    fn capped_posted_price_is_bic_and_charges_the_cap() {
        let space = crate::dist::Dist::uniform(0.0, 1.0).discretize(40);
        let rule = TwoPricedRule::capped_posted_price(space.values.clone(), 0.5, 0.2);
        assert!(rule.check_bic(1e-9).is_ok());
        for (i, v) in rule.grid.iter().enumerate() {
            let expect = if *v < 0.5 { 0.0 } else { 0.5f64.max(v - 0.2) };
            assert!((rule.payment_at(i) - expect).abs() < 1e-12);
        }
    }
}
