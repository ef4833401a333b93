//! Payment curves for one-priced mechanisms (a winner's payment is a
//! deterministic function of her value; losers pay nothing).
//!
//! Given a monotone interim allocation `x`, three curves matter:
//!
//! * the risk-neutral payment `p_rn(v) = v x(v) - ∫_0^v x`;
//! * the value-minus-capacity floor `p_vc(v) = (v - C) x(v)`;
//! * the capacitated equilibrium payment `p_cap`, anchored at zero and equal
//!   at every value to the larger of the floor and the best risk-neutral
//!   continuation `sup_{w < v} { p_cap(w) + p_rn(v) - p_rn(w) }`.
//!
//! On a grid the supremum collapses to a running maximum of
//! `p_cap - p_rn`, so the whole curve costs one left-to-right pass.

use thiserror::Error;

use crate::scalar::{half, smax, Scalar};

#[derive(Debug, Error, PartialEq)]
pub enum PayError {
    #[error("allocation must be non-decreasing")]
    NonMonotoneAllocation,
    #[error("allocation invariant violated: {0}")]
    BadAllocation(String),
}

/// Grid-sampled interim winning probability.
#[derive(Debug, Clone, PartialEq)]
pub struct InterimAllocation<T> {
    pub grid: Vec<T>,
    pub x: Vec<T>,
}

/// Grid-sampled interim expected payment.
#[derive(Debug, Clone, PartialEq)]
pub struct PaymentCurve<T> {
    pub grid: Vec<T>,
    pub p: Vec<T>,
}

/// Payment-per-win curve `p(v) / x(v)`, defined where `x > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct BidCurve<T> {
    pub values: Vec<T>,
    pub bids: Vec<T>,
}

impl<T: Scalar> InterimAllocation<T> {
    pub fn new(grid: Vec<T>, x: Vec<T>) -> Result<Self, PayError> {
        if grid.len() != x.len() || grid.is_empty() {
            return Err(PayError::BadAllocation("grid and x must be non-empty and aligned".into()));
        }
        if grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(PayError::BadAllocation("grid must be strictly increasing".into()));
        }
        if grid[0] < T::zero() {
            return Err(PayError::BadAllocation("values must be non-negative".into()));
        }
        if x.iter().any(|p| *p < T::zero() || *p > T::one()) {
            return Err(PayError::BadAllocation("x must lie in [0, 1]".into()));
        }
        if x.windows(2).any(|w| w[1] < w[0]) {
            return Err(PayError::NonMonotoneAllocation);
        }
        Ok(Self { grid, x })
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Trapezoid cumulative `∫_0^{v_i} x`, with `x` held constant at its
    /// first sample below the grid.
    fn cumulative(&self) -> Vec<T> {
        let mut acc = self.x[0].clone() * self.grid[0].clone();
        let mut out = Vec::with_capacity(self.len());
        out.push(acc.clone());
        for i in 1..self.len() {
            let dv = self.grid[i].clone() - self.grid[i - 1].clone();
            acc = acc + (self.x[i].clone() + self.x[i - 1].clone()) * half::<T>() * dv;
            out.push(acc.clone());
        }
        out
    }
}

/// Myerson payment for a monotone allocation: `p(v) = v x(v) - ∫_0^v x`.
pub fn risk_neutral_payment<T: Scalar>(a: &InterimAllocation<T>) -> PaymentCurve<T> {
    let cum = a.cumulative();
    let p = a
        .grid
        .iter()
        .zip(&a.x)
        .zip(cum)
        .map(|((v, x), c)| v.clone() * x.clone() - c)
        .collect();
    PaymentCurve { grid: a.grid.clone(), p }
}

/// Pointwise floor `(v - capacity) x(v)`; negative below the capacity. Zero
/// allocation yields zero payment even for infinite capacities.
pub fn value_minus_capacity_floor<T: Scalar>(a: &InterimAllocation<T>, capacity: &T) -> PaymentCurve<T> {
    let p = a
        .grid
        .iter()
        .zip(&a.x)
        .map(|(v, x)| {
            if x.is_zero() {
                T::zero()
            } else {
                (v.clone() - capacity.clone()) * x.clone()
            }
        })
        .collect();
    PaymentCurve { grid: a.grid.clone(), p }
}

/// The capacitated equilibrium payment. The grid is extended to zero (with
/// the allocation held at its lowest sample) so the anchor `p(0) = 0` is
/// always in force; the returned curve is aligned with the input grid.
pub fn capacitated_payment<T: Scalar>(a: &InterimAllocation<T>, capacity: &T) -> Result<PaymentCurve<T>, PayError> {
    if a.x.windows(2).any(|w| w[1] < w[0]) {
        return Err(PayError::NonMonotoneAllocation);
    }
    let p_rn = risk_neutral_payment(a);
    let p_vc = value_minus_capacity_floor(a, capacity);
    let mut offset = T::zero(); // running max of p_cap - p_rn, seeded by the zero anchor
    let mut p = Vec::with_capacity(a.len());
    for i in 0..a.len() {
        let candidate = p_rn.p[i].clone() + offset.clone();
        let value = smax(p_vc.p[i].clone(), candidate);
        offset = smax(offset, value.clone() - p_rn.p[i].clone());
        p.push(value);
    }
    Ok(PaymentCurve { grid: a.grid.clone(), p })
}

/// Bid (payment-on-win) curve `p_cap(v) / x(v)`. Grid points with zero
/// allocation never win and are omitted.
pub fn bid_function<T: Scalar>(a: &InterimAllocation<T>, capacity: &T) -> Result<BidCurve<T>, PayError> {
    let p_cap = capacitated_payment(a, capacity)?;
    let mut values = Vec::new();
    let mut bids = Vec::new();
    for i in 0..a.len() {
        if !a.x[i].is_zero() {
            values.push(a.grid[i].clone());
            bids.push(p_cap.p[i].clone() / a.x[i].clone());
        }
    }
    Ok(BidCurve { values, bids })
}

impl BidCurve<f64> {
    /// Piecewise-linear evaluation. Below the first point (where zero-
    /// allocation values were omitted) the first segment extrapolates down,
    /// floored at zero; above the last point the curve is flat.
    pub fn eval(&self, v: f64) -> f64 {
        let n = self.values.len();
        if n == 0 {
            return 0.0;
        }
        if v >= self.values[n - 1] {
            return self.bids[n - 1];
        }
        if v <= self.values[0] {
            if n == 1 {
                return self.bids[0];
            }
            let slope = (self.bids[1] - self.bids[0]) / (self.values[1] - self.values[0]);
            return (self.bids[0] - slope * (self.values[0] - v)).clamp(0.0, self.bids[0]);
        }
        let i = self.values.partition_point(|g| *g <= v) - 1;
        let (v0, v1) = (self.values[i], self.values[i + 1]);
        let (b0, b1) = (self.bids[i], self.bids[i + 1]);
        b0 + (b1 - b0) * (v - v0) / (v1 - v0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_alloc(k: usize) -> InterimAllocation<f64> {
        let grid: Vec<f64> = (0..=k).map(|i| i as f64 / k as f64).collect();
        let x = grid.clone();
        InterimAllocation::new(grid, x).unwrap()
    }

    #[test]
    fn risk_neutral_payment_closed_forms() {
        // x(v) = v on [0,1]: p = v^2 / 2, exactly (trapezoids are exact on
        // linear data).
        let a = linear_alloc(100);
        let p = risk_neutral_payment(&a);
        let i = a.grid.iter().position(|v| *v == 0.6).unwrap();
        assert!((p.p[i] - 0.18).abs() < 1e-12);

        // Constant allocation: identically zero payment.
        let a = InterimAllocation::new(vec![0.0, 0.5, 1.0], vec![0.4, 0.4, 0.4]).unwrap();
        assert!(risk_neutral_payment(&a).p.iter().all(|p: &f64| p.abs() < 1e-12));

        // Posted price at r: p = r above r, 0 below, up to half a grid cell.
        let k = 1000usize;
        let r = 0.5;
        let grid: Vec<f64> = (0..=k).map(|i| i as f64 / k as f64).collect();
        let x: Vec<f64> = grid.iter().map(|v| if *v >= r { 1.0 } else { 0.0 }).collect();
        let a = InterimAllocation::new(grid, x).unwrap();
        let p = risk_neutral_payment(&a);
        for (v, pay) in a.grid.iter().zip(&p.p) {
            let expect = if *v >= r { r } else { 0.0 };
            assert!((pay - expect).abs() <= 0.5 / k as f64 + 1e-12);
        }
    }

    #[test]
    fn vc_floor_is_pointwise() {
        let a = linear_alloc(10);
        let p = value_minus_capacity_floor(&a, &0.25);
        let i = a.grid.iter().position(|v| *v == 0.6).unwrap();
        assert!((p.p[i] - 0.21).abs() < 1e-12);
        let j = a.grid.iter().position(|v| *v == 0.2).unwrap();
        assert!(p.p[j] < 0.0);
        let zero = InterimAllocation::new(vec![0.0, 1.0], vec![0.0, 0.0]).unwrap();
        assert_eq!(value_minus_capacity_floor(&zero, &0.25).p, vec![0.0, 0.0]);
    }

    #[test]
    fn capacitated_payment_matches_piecewise_solution() {
        // x(v) = v, C = 1/4: payment is v^2/2 up to 1/2 and v^2 - v/4 above.
        let a = linear_alloc(2000);
        let p = capacitated_payment(&a, &0.25).unwrap();
        for (v, pay) in a.grid.iter().zip(&p.p) {
            let expect = if *v <= 0.5 { v * v / 2.0 } else { v * v - 0.25 * v };
            assert!((pay - expect).abs() <= 2.0 / 2000.0, "at v={v}");
        }
        let at = |v: f64| p.p[a.grid.iter().position(|g| (*g - v).abs() < 1e-12).unwrap()];
        assert!((at(0.6) - 0.21).abs() < 1e-3);
        assert!((at(0.4) - 0.08).abs() < 1e-3);
        assert_eq!(p.p[0], 0.0);
    }

    #[test]
    fn infinite_capacity_reduces_to_risk_neutral_bit_for_bit() {
        let a = linear_alloc(64);
        let rn = risk_neutral_payment(&a);
        let cap = capacitated_payment(&a, &f64::INFINITY).unwrap();
        assert_eq!(rn.p, cap.p);
    }

    #[test]
    fn constant_allocation_pays_capped_excess() {
        let grid: Vec<f64> = (0..=40).map(|i| i as f64 / 10.0).collect();
        let x = vec![0.35; grid.len()];
        let a = InterimAllocation::new(grid.clone(), x).unwrap();
        let p = capacitated_payment(&a, &1.5).unwrap();
        for (v, pay) in grid.iter().zip(&p.p) {
            assert!((pay - 0.35 * (v - 1.5).max(0.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn payment_dominates_floors_and_is_monotone() {
        // Random-ish monotone step allocation.
        let grid: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        let x: Vec<f64> = grid.iter().map(|v| (v * 0.9).powf(1.7).min(1.0)).collect();
        let a = InterimAllocation::new(grid, x).unwrap();
        for c in [0.1, 0.3, 2.0] {
            let rn = risk_neutral_payment(&a);
            let vc = value_minus_capacity_floor(&a, &c);
            let cap = capacitated_payment(&a, &c).unwrap();
            for i in 0..a.len() {
                assert!(cap.p[i] >= rn.p[i] - 1e-9);
                assert!(cap.p[i] >= vc.p[i] - 1e-9);
                if i > 0 {
                    assert!(cap.p[i] >= cap.p[i - 1] - 1e-12);
                }
            }
            let bid = bid_function(&a, &c).unwrap();
            for w in bid.bids.windows(2) {
                assert!(w[1] >= w[0] - 1e-9, "bids must be non-decreasing");
            }
            for (v, b) in bid.values.iter().zip(&bid.bids) {
                assert!(*b >= v - c - 1e-9, "never shade more than the capacity");
            }
        }
    }

    #[test]
    fn bids_divide_payment_by_allocation() {
        let a = linear_alloc(2000);
        let bid = bid_function(&a, &0.25).unwrap();
        let eval = |v: f64| bid.eval(v);
        assert!((eval(0.6) - 0.35).abs() < 1e-3);
        assert!((eval(0.8) - 0.55).abs() < 1e-3);
        assert!((eval(0.4) - 0.2).abs() < 1e-3);
        // Risk-neutral limit: classical two-bidder shading v/2.
        let bid = bid_function(&a, &10.0).unwrap();
        assert!((bid.eval(0.6) - 0.3).abs() < 1e-3);
        // x = 0 points are omitted: v = 0 is not on the curve.
        assert!(bid.values[0] > 0.0);
    }

    #[test]
    fn non_monotone_allocation_is_rejected() {
        let err = InterimAllocation::new(vec![0.0, 1.0], vec![0.5, 0.4]);
        assert_eq!(err.unwrap_err(), PayError::NonMonotoneAllocation);
    }
}
