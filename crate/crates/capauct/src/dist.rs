//! Value distributions and the classical machinery built on them: virtual
//! values, regularity, monopoly reserves, discretization onto finite type
//! spaces, and seeded inverse-transform sampling.
//!
//! The only atom a distribution may carry is at its upper support (the
//! equal-revenue distribution ends in one). Interior atoms and flat cdf
//! stretches are representable through `PiecewiseCdf` but are rejected by the
//! operations whose theory requires strictly increasing cdfs.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{rng_for, stream};

#[derive(Debug, Error, PartialEq)]
pub enum DistError {
    #[error("value {0} is outside the distribution support")]
    OutOfSupport(f64),
    #[error("density is zero at {0}")]
    ZeroDensity(f64),
    #[error("distribution is not regular")]
    NotRegular,
    #[error("distribution has an interior atom or flat cdf segment")]
    AtomicDistribution,
    #[error("invalid distribution: {0}")]
    Invalid(String),
    #[error("type space invariant violated: {0}")]
    BadTypeSpace(String),
}

/// A one-dimensional value distribution.
///
/// `cdf` is right-continuous with `cdf(upper_support) = 1`; `pdf` is the
/// density of the absolutely continuous part; `quantile` is the generalized
/// inverse `inf { v : cdf(v) >= u }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Dist {
    Uniform { lo: f64, hi: f64 },
    /// `F(z) = 1 - 1/z` on `[1, h]` with a point mass `1/h` at `h`; every
    /// posted price yields revenue one.
    EqualRevenue { h: f64 },
    Exponential { rate: f64 },
    /// Piecewise-linear cdf through `points = [[v, F(v)], ...]`. The first
    /// point carries `F = 0`; a final `F < 1` leaves an atom at the last `v`.
    PiecewiseCdf { points: Vec<(f64, f64)> },
}

impl Dist {
    pub fn uniform(lo: f64, hi: f64) -> Self {
        let d = Dist::Uniform { lo, hi };
        d.validate().expect("uniform parameters");
        d
    }

    pub fn equal_revenue(h: f64) -> Self {
        let d = Dist::EqualRevenue { h };
        d.validate().expect("equal-revenue parameters");
        d
    }

    pub fn exponential(rate: f64) -> Self {
        let d = Dist::Exponential { rate };
        d.validate().expect("exponential parameters");
        d
    }

    pub fn piecewise_cdf(points: Vec<(f64, f64)>) -> Result<Self, DistError> {
        let d = Dist::PiecewiseCdf { points };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<(), DistError> {
        let bad = |m: &str| Err(DistError::Invalid(m.to_string()));
        match self {
            Dist::Uniform { lo, hi } => {
                if !lo.is_finite() || !hi.is_finite() || lo >= hi || *lo < 0.0 {
                    return bad("uniform requires 0 <= lo < hi");
                }
            }
            Dist::EqualRevenue { h } => {
                if !h.is_finite() || *h <= 1.0 {
                    return bad("equal-revenue requires h > 1");
                }
            }
            Dist::Exponential { rate } => {
                if !rate.is_finite() || *rate <= 0.0 {
                    return bad("exponential requires rate > 0");
                }
            }
            Dist::PiecewiseCdf { points } => {
                if points.len() < 2 {
                    return bad("piecewise cdf needs at least two points");
                }
                if points[0].1 != 0.0 {
                    return bad("piecewise cdf must start at F = 0");
                }
                let last_f = points[points.len() - 1].1;
                if !(last_f > 0.0 && last_f <= 1.0) {
                    return bad("piecewise cdf must end with 0 < F <= 1");
                }
                for w in points.windows(2) {
                    if !(w[0].0 < w[1].0) {
                        return bad("piecewise cdf values must be strictly increasing");
                    }
                    if w[0].1 > w[1].1 {
                        return bad("piecewise cdf must be non-decreasing");
                    }
                }
                if points.iter().any(|(v, f)| !v.is_finite() || !f.is_finite() || *v < 0.0) {
                    return bad("piecewise cdf points must be finite and non-negative");
                }
            }
        }
        Ok(())
    }

    pub fn lower_support(&self) -> f64 {
        match self {
            Dist::Uniform { lo, .. } => *lo,
            Dist::EqualRevenue { .. } => 1.0,
            Dist::Exponential { .. } => 0.0,
            Dist::PiecewiseCdf { points } => points[0].0,
        }
    }

    /// Upper end of the support; `+inf` for the exponential.
    pub fn upper_support(&self) -> f64 {
        match self {
            Dist::Uniform { hi, .. } => *hi,
            Dist::EqualRevenue { h } => *h,
            Dist::Exponential { .. } => f64::INFINITY,
            Dist::PiecewiseCdf { points } => points[points.len() - 1].0,
        }
    }

    /// Probability mass sitting exactly at `upper_support` (0 if none).
    pub fn atom_at_upper(&self) -> f64 {
        match self {
            Dist::EqualRevenue { h } => 1.0 / h,
            Dist::PiecewiseCdf { points } => 1.0 - points[points.len() - 1].1,
            _ => 0.0,
        }
    }

    pub fn cdf(&self, v: f64) -> f64 {
        match self {
            Dist::Uniform { lo, hi } => ((v - lo) / (hi - lo)).clamp(0.0, 1.0),
            Dist::EqualRevenue { h } => {
                if v < 1.0 {
                    0.0
                } else if v >= *h {
                    1.0
                } else {
                    1.0 - 1.0 / v
                }
            }
            Dist::Exponential { rate } => {
                if v <= 0.0 {
                    0.0
                } else {
                    1.0 - (-rate * v).exp()
                }
            }
            Dist::PiecewiseCdf { points } => {
                if v < points[0].0 {
                    return 0.0;
                }
                if v >= points[points.len() - 1].0 {
                    return 1.0;
                }
                let i = points.partition_point(|(x, _)| *x <= v) - 1;
                let (v0, f0) = points[i];
                let (v1, f1) = points[i + 1];
                f0 + (f1 - f0) * (v - v0) / (v1 - v0)
            }
        }
    }

    /// Density of the continuous part. At an upper atom this returns the
    /// left-limit density of the continuous part, which may be zero.
    pub fn pdf(&self, v: f64) -> f64 {
        match self {
            Dist::Uniform { lo, hi } => {
                if v < *lo || v > *hi {
                    0.0
                } else {
                    1.0 / (hi - lo)
                }
            }
            Dist::EqualRevenue { h } => {
                if v < 1.0 || v > *h {
                    0.0
                } else {
                    1.0 / (v * v)
                }
            }
            Dist::Exponential { rate } => {
                if v < 0.0 {
                    0.0
                } else {
                    rate * (-rate * v).exp()
                }
            }
            Dist::PiecewiseCdf { points } => {
                let n = points.len();
                if v < points[0].0 || v > points[n - 1].0 {
                    return 0.0;
                }
                let i = points
                    .partition_point(|(x, _)| *x <= v)
                    .clamp(1, n - 1)
                    - 1;
                let (v0, f0) = points[i];
                let (v1, f1) = points[i + 1];
                (f1 - f0) / (v1 - v0)
            }
        }
    }

    /// Generalized inverse cdf. `u` outside `[0, 1]` is clamped.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match self {
            Dist::Uniform { lo, hi } => lo + u * (hi - lo),
            Dist::EqualRevenue { h } => {
                if u >= 1.0 - 1.0 / h {
                    *h
                } else {
                    1.0 / (1.0 - u)
                }
            }
            Dist::Exponential { rate } => {
                if u >= 1.0 {
                    f64::INFINITY
                } else {
                    -(1.0 - u).ln() / rate
                }
            }
            Dist::PiecewiseCdf { points } => {
                let n = points.len();
                if u > points[n - 1].1 {
                    return points[n - 1].0;
                }
                // First segment whose upper F reaches u; flat segments map to
                // their left end (generalized inverse).
                let mut i = points.partition_point(|(_, f)| *f < u);
                if i == 0 {
                    return points[0].0;
                }
                i -= 1;
                let (v0, f0) = points[i];
                let (v1, f1) = points[i + 1];
                if f1 == f0 {
                    v0
                } else {
                    v0 + (v1 - v0) * (u - f0) / (f1 - f0)
                }
            }
        }
    }

    /// `P[v >= p]`, counting the upper atom.
    pub fn survival(&self, p: f64) -> f64 {
        let upper = self.upper_support();
        if upper.is_finite() && p >= upper {
            return if p > upper { 0.0 } else { self.atom_at_upper() };
        }
        1.0 - self.cdf(p) + if p == upper { self.atom_at_upper() } else { 0.0 }
    }

    /// Virtual value `v - (1 - F(v)) / f(v)`. At an upper atom the virtual
    /// value is the value itself: the atom is the top of the distribution, so
    /// its marginal revenue carries no hazard discount.
    pub fn virtual_value(&self, v: f64) -> Result<f64, DistError> {
        let lo = self.lower_support();
        let hi = self.upper_support();
        if v < lo || v > hi {
            return Err(DistError::OutOfSupport(v));
        }
        if self.atom_at_upper() > 0.0 && v == hi {
            return Ok(hi);
        }
        let f = self.pdf(v);
        if f <= 0.0 {
            return Err(DistError::ZeroDensity(v));
        }
        Ok(v - (1.0 - self.cdf(v)) / f)
    }

    /// True iff the virtual value is non-decreasing across a quantile-uniform
    /// grid of `grid_size` points (tolerance 1e-9).
    pub fn is_regular(&self, grid_size: usize) -> Result<bool, DistError> {
        assert!(grid_size >= 2, "regularity grid needs at least two points");
        let mut prev = f64::NEG_INFINITY;
        for i in 0..grid_size {
            let u = (i as f64 + 0.5) / grid_size as f64;
            let phi = self.virtual_value(self.quantile(u))?;
            if phi < prev - 1e-9 {
                return Ok(false);
            }
            prev = prev.max(phi);
        }
        if self.atom_at_upper() > 0.0 {
            // The atom's virtual value equals the upper support, which cannot
            // undercut any interior virtual value.
            let phi = self.virtual_value(self.upper_support())?;
            if phi < prev - 1e-9 {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Smallest value with non-negative virtual value, by bisection on the
    /// quantile axis to 1e-9. When the virtual value is non-negative on the
    /// whole support (equal-revenue), the lower support is returned.
    pub fn monopoly_reserve(&self) -> Result<f64, DistError> {
        if !self.is_regular(1024)? {
            return Err(DistError::NotRegular);
        }
        let lo = self.lower_support();
        if self.virtual_value(self.quantile(0.0).max(lo))? >= 0.0 {
            return Ok(lo);
        }
        // Bracket a non-negative virtual value in quantile space.
        let mut u_lo = 0.0_f64;
        let mut u_hi = 0.5_f64;
        let mut bracketed = false;
        for _ in 0..64 {
            if self.virtual_value(self.quantile(u_hi))? >= 0.0 {
                bracketed = true;
                break;
            }
            u_lo = u_hi;
            u_hi = 0.5 * (1.0 + u_hi);
        }
        if !bracketed {
            // Virtual value stays negative on the sampled grid; the reserve
            // degenerates to the top of the distribution.
            return Ok(self.quantile(1.0 - 1e-12));
        }
        for _ in 0..200 {
            let u_mid = 0.5 * (u_lo + u_hi);
            if self.virtual_value(self.quantile(u_mid))? >= 0.0 {
                u_hi = u_mid;
            } else {
                u_lo = u_mid;
            }
            if (self.quantile(u_hi) - self.quantile(u_lo)).abs() < 1e-9 {
                break;
            }
        }
        Ok(self.quantile(u_hi))
    }

    /// Monopoly (single-agent risk-neutral) revenue `sup_p p * P[v >= p]`,
    /// evaluated on a fine quantile grid plus the upper atom.
    pub fn monopoly_revenue(&self) -> f64 {
        let mut best: f64 = 0.0;
        let n = 20_000;
        for i in 0..n {
            let u = i as f64 / n as f64;
            let p = self.quantile(u);
            if p.is_finite() {
                best = best.max(p * (1.0 - u));
            }
        }
        let atom = self.atom_at_upper();
        if atom > 0.0 {
            best = best.max(self.upper_support() * atom);
        }
        best
    }

    /// Quantile-midpoint discretization with `k` points. A positive upper
    /// atom keeps its own point with its exact mass; the continuous part is
    /// then carried by `k - 1` equal-mass midpoints.
    pub fn discretize(&self, k: usize) -> DiscreteTypeSpace {
        assert!(k >= 1, "discretization needs at least one point");
        let atom = self.atom_at_upper();
        let mut values = Vec::with_capacity(k);
        let mut masses = Vec::with_capacity(k);
        if atom > 0.0 && k >= 2 {
            let m = k - 1;
            let cell = (1.0 - atom) / m as f64;
            for i in 0..m {
                let u = (i as f64 + 0.5) / m as f64 * (1.0 - atom);
                values.push(self.quantile(u));
                masses.push(cell);
            }
            let continuum: f64 = masses.iter().sum();
            values.push(self.upper_support());
            masses.push(1.0 - continuum);
        } else {
            for i in 0..k {
                let u = (i as f64 + 0.5) / k as f64;
                values.push(self.quantile(u));
                masses.push(1.0 / k as f64);
            }
            let head: f64 = masses[..k - 1].iter().sum();
            masses[k - 1] = 1.0 - head;
        }
        // Merge duplicate values (a coarse grid can collapse neighbours).
        let mut out_v: Vec<f64> = Vec::with_capacity(values.len());
        let mut out_m: Vec<f64> = Vec::with_capacity(values.len());
        for (v, m) in values.into_iter().zip(masses) {
            match out_v.last() {
                Some(last) if *last == v => *out_m.last_mut().unwrap() += m,
                _ => {
                    out_v.push(v);
                    out_m.push(m);
                }
            }
        }
        DiscreteTypeSpace::new(out_v, out_m).expect("discretization preserves invariants")
    }

    /// `n` seeded inverse-transform samples. Identical seeds give identical
    /// output.
    pub fn sample(&self, seed: u64, n: usize) -> Vec<f64> {
        let mut rng = rng_for(seed, stream::SAMPLE);
        (0..n).map(|_| self.sample_with(&mut rng)).collect()
    }

    /// One inverse-transform draw from an external generator.
    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.gen::<f64>())
    }

    /// Ascending quantile-spaced value grid with `k` requested points, for
    /// payment curves. Endpoints are included; an unbounded upper support is
    /// cut at the `1 - 1e-7` quantile; values collapsing onto an upper atom
    /// are merged.
    pub fn value_grid(&self, k: usize) -> Vec<f64> {
        assert!(k >= 2, "value grid needs at least two points");
        let u_cap = if self.upper_support().is_finite() { 1.0 } else { 1.0 - 1e-7 };
        let mut grid = Vec::with_capacity(k);
        for i in 0..k {
            let u = i as f64 / (k - 1) as f64 * u_cap;
            let v = self.quantile(u);
            if grid.last().map_or(true, |last: &f64| v > *last) {
                grid.push(v);
            }
        }
        grid
    }

    /// Rejects distributions whose cdf is not strictly increasing inside the
    /// support (interior atoms are unrepresentable; interior flats are not).
    pub fn require_strictly_increasing_cdf(&self) -> Result<(), DistError> {
        if let Dist::PiecewiseCdf { points } = self {
            for w in points.windows(2) {
                if w[0].1 == w[1].1 {
                    return Err(DistError::AtomicDistribution);
                }
            }
        }
        Ok(())
    }
}

/// A finite type space: strictly increasing values with positive masses
/// summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteTypeSpace {
    pub values: Vec<f64>,
    pub masses: Vec<f64>,
}

impl DiscreteTypeSpace {
    pub fn new(values: Vec<f64>, masses: Vec<f64>) -> Result<Self, DistError> {
        let bad = |m: &str| Err(DistError::BadTypeSpace(m.to_string()));
        if values.len() != masses.len() || values.is_empty() {
            return bad("values and masses must be non-empty and aligned");
        }
        if values.windows(2).any(|w| !(w[0] < w[1])) {
            return bad("values must be strictly increasing");
        }
        if masses.iter().any(|m| !(*m > 0.0)) {
            return bad("masses must be positive");
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return bad("masses must sum to one");
        }
        Ok(Self { values, masses })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Inclusive cumulative masses `F_i = sum_{j <= i} f_j`.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.masses
            .iter()
            .map(|m| {
                acc += m;
                acc.min(1.0)
            })
            .collect()
    }

    /// Discrete virtual values by the forward-difference hazard
    /// `phi_i = v_i - (1 - F_i)(v_{i+1} - v_i) / f_i`, with `phi_n = v_n`.
    pub fn virtual_values(&self) -> Vec<f64> {
        let n = self.len();
        let cum = self.cumulative();
        let mut phi = Vec::with_capacity(n);
        for i in 0..n {
            if i + 1 == n {
                phi.push(self.values[i]);
            } else {
                let tail = (1.0 - cum[i]).max(0.0);
                let gap = self.values[i + 1] - self.values[i];
                phi.push(self.values[i] - tail * gap / self.masses[i]);
            }
        }
        phi
    }

    /// Best posted-price revenue `max_i v_i * P[v >= v_i]`.
    pub fn posted_price_revenue(&self) -> f64 {
        let mut tail = 1.0;
        let mut best: f64 = 0.0;
        for (v, m) in self.values.iter().zip(&self.masses) {
            best = best.max(v * tail);
            tail -= m;
        }
        best
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().zip(&self.masses).map(|(v, m)| v * m).sum()
    }
}

/// Capacity values admit `+inf` (risk neutrality); the JSON encoding uses the
/// string `"inf"` because JSON numbers cannot carry infinities.
pub mod capacity_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn serialize<S: Serializer>(c: &f64, s: S) -> Result<S::Ok, S::Error> {
        if c.is_finite() {
            Repr::Num(*c).serialize(s)
        } else {
            Repr::Str("inf".to_string()).serialize(s)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Str(s) if s == "inf" => Ok(f64::INFINITY),
            Repr::Str(s) => s.parse::<f64>().map_err(serde::de::Error::custom),
        }
    }
}

/// One auction participant: a value distribution (continuous or already
/// discrete) paired with a capacity, possibly `+inf`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub types: TypeSpace,
    #[serde(with = "capacity_serde")]
    pub capacity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum TypeSpace {
    Continuous { dist: Dist },
    Discrete { space: DiscreteTypeSpace },
}

impl AgentSpec {
    pub fn continuous(dist: Dist, capacity: f64) -> Self {
        assert!(capacity > 0.0, "capacity must be positive");
        AgentSpec { types: TypeSpace::Continuous { dist }, capacity }
    }

    pub fn discrete(space: DiscreteTypeSpace, capacity: f64) -> Self {
        assert!(capacity > 0.0, "capacity must be positive");
        AgentSpec { types: TypeSpace::Discrete { space }, capacity }
    }

    pub fn dist(&self) -> Option<&Dist> {
        match &self.types {
            TypeSpace::Continuous { dist } => Some(dist),
            TypeSpace::Discrete { .. } => None,
        }
    }

    /// The agent's type space as a finite grid: either the stored discrete
    /// space or a `k`-point discretization of the continuous distribution.
    pub fn discretized(&self, k: usize) -> DiscreteTypeSpace {
        match &self.types {
            TypeSpace::Continuous { dist } => dist.discretize(k),
            TypeSpace::Discrete { space } => space.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn er1000() -> Dist {
        Dist::equal_revenue(1000.0)
    }

    #[test]
    fn virtual_value_matches_closed_forms() {
        let u = Dist::uniform(0.0, 1.0);
        assert!((u.virtual_value(0.75).unwrap() - 0.5).abs() < 1e-12);
        assert!((u.virtual_value(0.5).unwrap() - 0.0).abs() < 1e-12);
        let er = er1000();
        assert!(er.virtual_value(5.0).unwrap().abs() < 1e-12);
        // Top atom: the virtual value is the value itself.
        assert_eq!(er.virtual_value(1000.0).unwrap(), 1000.0);
        assert_eq!(u.virtual_value(2.0), Err(DistError::OutOfSupport(2.0)));
    }

    #[test]
    fn zero_density_is_reported() {
        let gap = Dist::piecewise_cdf(vec![(0.0, 0.0), (1.0, 0.5), (10.0, 0.5), (11.0, 1.0)]).unwrap();
        assert_eq!(gap.virtual_value(5.0), Err(DistError::ZeroDensity(5.0)));
    }

    #[test]
    fn regularity_of_builtins() {
        assert!(Dist::uniform(0.0, 1.0).is_regular(1000).unwrap());
        assert!(er1000().is_regular(1000).unwrap());
        assert!(Dist::exponential(1.0).is_regular(1000).unwrap());
        // Density dropping from 0.75 to 0.25 at v = 1 makes the virtual value
        // jump down from 2/3 to 0: irregular.
        let mix = Dist::piecewise_cdf(vec![(0.0, 0.0), (1.0, 0.75), (2.0, 1.0)]).unwrap();
        assert!(!mix.is_regular(1000).unwrap());
    }

    #[test]
    fn monopoly_reserves() {
        assert!((Dist::uniform(0.0, 1.0).monopoly_reserve().unwrap() - 0.5).abs() < 1e-8);
        assert!((Dist::uniform(0.0, 2.0).monopoly_reserve().unwrap() - 1.0).abs() < 1e-8);
        // Non-negative virtual value everywhere: reserve degenerates to the
        // lower support.
        assert_eq!(er1000().monopoly_reserve().unwrap(), 1.0);
        assert!((Dist::exponential(1.0).monopoly_reserve().unwrap() - 1.0).abs() < 1e-8);
        let mix = Dist::piecewise_cdf(vec![(0.0, 0.0), (1.0, 0.75), (2.0, 1.0)]).unwrap();
        assert_eq!(mix.monopoly_reserve(), Err(DistError::NotRegular));
    }

    #[test]
    fn monopoly_revenue_closed_forms() {
        assert!((Dist::uniform(0.0, 1.0).monopoly_revenue() - 0.25).abs() < 1e-4);
        assert!((er1000().monopoly_revenue() - 1.0).abs() < 1e-3);
        // Exponential(1): max p e^{-p} = 1/e at p = 1.
        assert!((Dist::exponential(1.0).monopoly_revenue() - (-1.0f64).exp()).abs() < 1e-4);
    }

    #[test]
    fn discretize_uniform_midpoints() {
        let s = Dist::uniform(0.0, 1.0).discretize(2);
        assert_eq!(s.values, vec![0.25, 0.75]);
        assert_eq!(s.masses, vec![0.5, 0.5]);
        let s1 = Dist::uniform(0.0, 1.0).discretize(1);
        assert_eq!(s1.values, vec![0.5]);
        assert_eq!(s1.masses, vec![1.0]);
    }

    #[test]
    fn discretize_preserves_upper_atom() {
        let s = er1000().discretize(10);
        assert_eq!(s.len(), 10);
        assert_eq!(*s.values.last().unwrap(), 1000.0);
        assert!((s.masses.last().unwrap() - 1e-3).abs() < 1e-12);
        // Nine quantile midpoints of the continuous part.
        for (i, v) in s.values[..9].iter().enumerate() {
            let u = (i as f64 + 0.5) / 9.0 * (1.0 - 1e-3);
            assert!((v - 1.0 / (1.0 - u)).abs() < 1e-9);
        }
        let total: f64 = s.masses.iter().sum();
        assert_eq!(total, 1.0);
    }

    #[test]
    fn discretized_equal_revenue_mean_hits_log_h() {
        let s = er1000().discretize(10_000);
        assert!((s.mean() - (1000.0f64.ln() + 1.0)).abs() < 0.01);
    }

    #[test]
    fn quantile_cdf_round_trip() {
        let dists = [
            Dist::uniform(0.0, 1.0),
            er1000(),
            Dist::exponential(0.7),
            Dist::piecewise_cdf(vec![(0.5, 0.0), (1.0, 0.25), (3.0, 0.8), (4.0, 1.0)]).unwrap(),
        ];
        let mut rng = rng_for(11, stream::RULES);
        for d in &dists {
            for _ in 0..1000 {
                let u: f64 = rng.gen_range(1e-6..1.0 - 1e-6);
                if u > 1.0 - d.atom_at_upper() {
                    continue; // inside the atom: not a continuity point
                }
                let v = d.quantile(u);
                assert!(
                    (d.quantile(d.cdf(v)) - v).abs() < 1e-9,
                    "round trip failed for {d:?} at u={u}"
                );
            }
        }
    }

    #[test]
    fn sampling_is_seeded_and_consistent() {
        let d = Dist::uniform(0.0, 1.0);
        assert!(d.sample(7, 0).is_empty());
        let a = d.sample(7, 100_000);
        let b = d.sample(7, 100_000);
        assert_eq!(a, b);
        let mean = a.iter().sum::<f64>() / a.len() as f64;
        assert!((mean - 0.5).abs() < 0.01);
    }

    #[test]
    fn equal_revenue_sample_mean() {
        let d = er1000();
        let xs = d.sample(3, 1_000_000);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!((mean - (1000.0f64.ln() + 1.0)).abs() < 0.1);
    }

    #[test]
    fn empirical_cdf_matches_cdf() {
        // Kolmogorov-Smirnov statistic below 0.01 at one million samples.
        for d in [Dist::uniform(0.0, 1.0), er1000(), Dist::exponential(1.0)] {
            let mut xs = d.sample(5, 1_000_000);
            xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let n = xs.len() as f64;
            let mut ks: f64 = 0.0;
            for (i, x) in xs.iter().enumerate() {
                let emp_hi = (i + 1) as f64 / n;
                let emp_lo = i as f64 / n;
                let f = d.cdf(*x);
                ks = ks.max((emp_hi - f).abs()).max((f - emp_lo).abs());
            }
            assert!(ks < 0.01, "KS statistic {ks} too large for {d:?}");
        }
    }

    #[test]
    fn value_grid_merges_atom() {
        let g = er1000().value_grid(2000);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(*g.last().unwrap(), 1000.0);
        assert_eq!(g[0], 1.0);
        let gu = Dist::uniform(0.0, 1.0).value_grid(11);
        assert_eq!(gu.len(), 11);
        assert!((gu[3] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn discrete_virtual_values_track_parent() {
        let s = Dist::uniform(0.0, 1.0).discretize(200);
        let phi = s.virtual_values();
        for (i, v) in s.values.iter().enumerate().take(199) {
            assert!((phi[i] - (2.0 * v - 1.0)).abs() < 0.02, "hazard mismatch at {v}");
        }
        assert_eq!(phi[199], s.values[199]);
    }

    #[test]
    fn agent_spec_serde_round_trips_infinite_capacity() {
        let a = AgentSpec::continuous(Dist::uniform(0.0, 1.0), f64::INFINITY);
        let js = serde_json::to_string(&a).unwrap();
        let back: AgentSpec = serde_json::from_str(&js).unwrap();
        assert_eq!(a, back);
        let b = AgentSpec::continuous(er1000(), 0.25);
        let js = serde_json::to_string(&b).unwrap();
        assert_eq!(b, serde_json::from_str::<AgentSpec>(&js).unwrap());
    }
}
