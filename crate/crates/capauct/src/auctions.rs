//! Concrete single-item mechanisms as outcome functions on value profiles,
//! plus the interim-level constructors behind them.
//!
//! Bids tie with positive probability once values are simulated through
//! discretized curves, so every bid-ranked auction takes an explicit
//! generator for uniform tie-breaking. Virtual-value ties (which have
//! positive probability under the equal-revenue distribution) are broken by
//! agent index, and threshold payments honor that order.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dist::{AgentSpec, Dist, DistError};
use crate::payid::{
    bid_function, capacitated_payment, risk_neutral_payment, value_minus_capacity_floor, BidCurve,
    InterimAllocation, PayError, PaymentCurve,
};

#[derive(Debug, Error, PartialEq)]
pub enum AuctionError {
    #[error("profile must contain at least one value")]
    EmptyProfile,
    #[error("profile and per-agent data lengths differ")]
    LengthMismatch,
    #[error("mechanism requires regular value distributions")]
    NotRegular,
    #[error("mechanism requires identical agents")]
    AsymmetricAgents,
    #[error("mechanism requires finite capacities")]
    UnboundedCapacity,
    #[error("mechanism requires a continuous (non-atomic) distribution")]
    AtomicDistribution,
    #[error("mechanism requires continuous type spaces")]
    DiscreteTypes,
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Pay(#[from] PayError),
}

/// Auction result:`winner` pays `payments[winner]`; losers pay zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub winner: Option<usize>,
    pub payments: Vec<f64>,
}

impl Outcome {
    pub fn none(n: usize) -> Self {
        Outcome { winner: None, payments: vec![0.0; n] }
    }

    pub fn total_payment(&self) -> f64 {
        self.payments.iter().sum()
    }
}

/// Highest entry wins; exact ties resolved uniformly with the caller's
/// generator.
fn argmax_with_ties<R: Rng + ?Sized>(xs: &[f64], rng: &mut R) -> usize {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let tied: Vec<usize> = (0..xs.len()).filter(|i| xs[*i] == max).collect();
    if tied.len() == 1 {
        tied[0]
    } else {
        tied[rng.gen_range(0..tied.len())]
    }
}

/// Second-price auction: highest bid wins and pays the second-highest bid
/// (zero for a lone bidder).
pub fn run_spa<R: Rng + ?Sized>(profile: &[f64], rng: &mut R) -> Result<Outcome, AuctionError> {
    if profile.is_empty() {
        return Err(AuctionError::EmptyProfile);
    }
    let w = argmax_with_ties(profile, rng);
    let second = profile
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != w)
        .map(|(_, v)| *v)
        .fold(0.0f64, f64::max);
    let mut payments = vec![0.0; profile.len()];
    payments[w] = second;
    Ok(Outcome { winner: Some(w), payments })
}

/// Capacitated second-price auction: highest bid wins and pays the larger of
/// the second-highest bid and her own bid minus her capacity.
pub fn run_csp<R: Rng + ?Sized>(
    profile: &[f64],
    capacities: &[f64],
    rng: &mut R,
) -> Result<Outcome, AuctionError> {
    if profile.is_empty() {
        return Err(AuctionError::EmptyProfile);
    }
    if capacities.len() != profile.len() {
        return Err(AuctionError::LengthMismatch);
    }
    let w = argmax_with_ties(profile, rng);
    let second = profile
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != w)
        .map(|(_, v)| *v)
        .fold(0.0f64, f64::max);
    let mut payments = vec![0.0; profile.len()];
    payments[w] = second.max(profile[w] - capacities[w]);
    Ok(Outcome { winner: Some(w), payments })
}

/// Smallest value whose virtual value reaches `target` (strictly exceeds it
/// when `strict`), by bisection on the quantile axis to 1e-9 in value.
fn phi_inverse(d: &Dist, target: f64, strict: bool) -> Result<f64, DistError> {
    let lo = d.lower_support();
    let pred = |phi: f64| if strict { phi > target } else { phi >= target };
    if pred(d.virtual_value(lo)?) {
        return Ok(lo);
    }
    let upper = d.upper_support();
    let top_phi = if upper.is_finite() {
        d.virtual_value(upper)?
    } else {
        d.virtual_value(d.quantile(1.0 - 1e-12))?
    };
    if !pred(top_phi) {
        // Unattainable target: collapse to the top of the support.
        return Ok(if upper.is_finite() { upper } else { d.quantile(1.0 - 1e-12) });
    }
    let mut u_lo = 0.0f64;
    let mut u_hi = 1.0 - 1e-12;
    // The bracket upper end must satisfy the predicate; walk it down from the
    // top if the capped quantile does not (possible only with an upper atom).
    if !pred(d.virtual_value(d.quantile(u_hi))?) {
        return Ok(upper);
    }
    for _ in 0..200 {
        let u_mid = 0.5 * (u_lo + u_hi);
        if pred(d.virtual_value(d.quantile(u_mid))?) {
            u_hi = u_mid;
        } else {
            u_lo = u_mid;
        }
        if (d.quantile(u_hi) - d.quantile(u_lo)).abs() < 1e-9 {
            break;
        }
    }
    Ok(d.quantile(u_hi))
}

/// The revenue-optimal direct mechanism for regular risk-neutral agents:
/// serve the agent with the highest non-negative virtual value and charge the
/// smallest value she could have reported and still won.
#[derive(Debug, Clone)]
pub struct MyersonAuction {
    pub dists: Vec<Dist>,
    pub reserves: Vec<f64>,
    symmetric: bool,
}

impl MyersonAuction {
    pub fn new(dists: Vec<Dist>) -> Result<Self, AuctionError> {
        if dists.is_empty() {
            return Err(AuctionError::EmptyProfile);
        }
        let mut reserves = Vec::with_capacity(dists.len());
        for d in &dists {
            if !d.is_regular(1024)? {
                return Err(AuctionError::NotRegular);
            }
            reserves.push(d.monopoly_reserve()?);
        }
        let symmetric = dists.windows(2).all(|w| w[0] == w[1]);
        Ok(MyersonAuction { dists, reserves, symmetric })
    }

    pub fn run(&self, profile: &[f64]) -> Result<Outcome, AuctionError> {
        if profile.len() != self.dists.len() {
            return Err(AuctionError::LengthMismatch);
        }
        let n = profile.len();
        if self.symmetric {
            // Identical regular distributions: second-price with the monopoly
            // reserve, ties to the lowest index.
            let r = self.reserves[0];
            let mut w = None;
            for (i, v) in profile.iter().enumerate() {
                if *v >= r && w.map_or(true, |b: usize| *v > profile[b]) {
                    w = Some(i);
                }
            }
            let Some(w) = w else { return Ok(Outcome::none(n)) };
            let second = profile
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != w)
                .map(|(_, v)| *v)
                .fold(f64::NEG_INFINITY, f64::max);
            let mut payments = vec![0.0; n];
            payments[w] = r.max(second);
            return Ok(Outcome { winner: Some(w), payments });
        }
        let mut phi = Vec::with_capacity(n);
        for (d, v) in self.dists.iter().zip(profile) {
            phi.push(d.virtual_value(*v)?);
        }
        let mut w: Option<usize> = None;
        for i in 0..n {
            if phi[i] >= 0.0 && w.map_or(true, |b| phi[i] > phi[b]) {
                w = Some(i);
            }
        }
        let Some(w) = w else { return Ok(Outcome::none(n)) };
        // Threshold report: beat later agents weakly, earlier agents strictly,
        // and the zero reserve.
        let mut weak = 0.0f64;
        let mut strict = f64::NEG_INFINITY;
        for j in 0..n {
            if j < w {
                strict = strict.max(phi[j]);
            } else if j > w {
                weak = weak.max(phi[j]);
            }
        }
        let d = &self.dists[w];
        let mut threshold = phi_inverse(d, weak, false)?;
        if strict > f64::NEG_INFINITY {
            threshold = threshold.max(phi_inverse(d, strict, true)?);
        }
        let mut payments = vec![0.0; n];
        payments[w] = threshold.min(profile[w]);
        Ok(Outcome { winner: Some(w), payments })
    }
}

/// Interim curves of one agent in a one-priced mechanism.
#[derive(Debug, Clone)]
pub struct AgentCurves {
    pub alloc: InterimAllocation<f64>,
    pub p_rn: PaymentCurve<f64>,
    pub p_vc: PaymentCurve<f64>,
    pub p_cap: PaymentCurve<f64>,
    pub bid: BidCurve<f64>,
}

impl AgentCurves {
    pub fn from_allocation(alloc: InterimAllocation<f64>, capacity: f64) -> Result<Self, PayError> {
        let p_rn = risk_neutral_payment(&alloc);
        let p_vc = value_minus_capacity_floor(&alloc, &capacity);
        let p_cap = capacitated_payment(&alloc, &capacity)?;
        let bid = bid_function(&alloc, &capacity)?;
        Ok(AgentCurves { alloc, p_rn, p_vc, p_cap, bid })
    }

    /// Interim winning probability at an arbitrary value (linear
    /// interpolation, clamped).
    pub fn x_at(&self, v: f64) -> f64 {
        let g = &self.alloc.grid;
        let n = g.len();
        if v <= g[0] {
            return self.alloc.x[0];
        }
        if v >= g[n - 1] {
            return self.alloc.x[n - 1];
        }
        let i = g.partition_point(|p| *p <= v) - 1;
        let t = (v - g[i]) / (g[i + 1] - g[i]);
        self.alloc.x[i] + t * (self.alloc.x[i + 1] - self.alloc.x[i])
    }
}

/// Symmetric first-price equilibrium for `n` i.i.d. agents: the highest value
/// wins, so the interim allocation is `F^{n-1}`, and the bid curve divides
/// the capacitated equilibrium payment by it.
pub fn fpa_symmetric_equilibrium(
    agent: &AgentSpec,
    n: usize,
    grid_points: usize,
) -> Result<AgentCurves, AuctionError> {
    assert!(n >= 2, "first-price equilibrium needs at least two agents");
    let dist = agent.dist().ok_or(AuctionError::DiscreteTypes)?;
    dist.require_strictly_increasing_cdf()?;
    let grid = dist.value_grid(grid_points);
    let x: Vec<f64> = grid.iter().map(|v| dist.cdf(*v).powi(n as i32 - 1)).collect();
    let alloc = InterimAllocation::new(grid, x)?;
    Ok(AgentCurves::from_allocation(alloc, agent.capacity)?)
}

/// First-price auction under a common bid curve: values map through the
/// curve, the highest bid wins and is charged her bid.
pub fn run_fpa<R: Rng + ?Sized>(
    profile: &[f64],
    bid: &BidCurve<f64>,
    rng: &mut R,
) -> Result<Outcome, AuctionError> {
    if profile.is_empty() {
        return Err(AuctionError::EmptyProfile);
    }
    let bids: Vec<f64> = profile.iter().map(|v| bid.eval(*v)).collect();
    let w = argmax_with_ties(&bids, rng);
    let mut payments = vec![0.0; profile.len()];
    payments[w] = bids[w];
    Ok(Outcome { winner: Some(w), payments })
}

/// Which monotone allocation the asymmetric one-priced construction uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OnePricedKind {
    /// Allocation of the risk-neutral optimal auction:
    /// `x_i(v) = 1{phi_i(v) >= 0} prod_j F_j(phi_j^{-1}(phi_i(v)))`.
    MyersonAlloc,
    /// Serve the agent with the largest value minus capacity:
    /// `x_i(v) = prod_j F_j(v - C_i + C_j)`.
    MaxVMinusC,
}

/// A BIC direct-revelation one-priced mechanism built from a monotone
/// interim allocation and its capacitated payment curve.
#[derive(Debug, Clone)]
pub struct OnePricedMechanism {
    pub kind: OnePricedKind,
    pub capacities: Vec<f64>,
    pub dists: Vec<Dist>,
    pub curves: Vec<AgentCurves>,
}

pub fn asym_one_priced(
    agents: &[AgentSpec],
    kind: OnePricedKind,
    grid_points: usize,
) -> Result<OnePricedMechanism, AuctionError> {
    if agents.is_empty() {
        return Err(AuctionError::EmptyProfile);
    }
    let dists: Vec<Dist> = agents
        .iter()
        .map(|a| a.dist().cloned().ok_or(AuctionError::DiscreteTypes))
        .collect::<Result<_, _>>()?;
    let capacities: Vec<f64> = agents.iter().map(|a| a.capacity).collect();
    for d in &dists {
        if !d.is_regular(1024)? {
            return Err(AuctionError::NotRegular);
        }
    }
    if kind == OnePricedKind::MaxVMinusC && capacities.iter().any(|c| !c.is_finite()) {
        return Err(AuctionError::UnboundedCapacity);
    }
    let mut curves = Vec::with_capacity(agents.len());
    for (i, d) in dists.iter().enumerate() {
        let grid = d.value_grid(grid_points);
        let mut x = Vec::with_capacity(grid.len());
        for v in &grid {
            let xi = match kind {
                OnePricedKind::MyersonAlloc => {
                    let phi = d.virtual_value(*v)?;
                    if phi < 0.0 {
                        0.0
                    } else {
                        let mut prod = 1.0;
                        for (j, dj) in dists.iter().enumerate() {
                            if j != i {
                                let t = phi_inverse(dj, phi, false)?;
                                prod *= dj.cdf(t).clamp(0.0, 1.0);
                            }
                        }
                        prod
                    }
                }
                OnePricedKind::MaxVMinusC => {
                    let mut prod = 1.0;
                    for (j, dj) in dists.iter().enumerate() {
                        if j != i {
                            prod *= dj.cdf(v - capacities[i] + capacities[j]).clamp(0.0, 1.0);
                        }
                    }
                    prod
                }
            };
            // Bisection noise can dent monotonicity at the 1e-9 scale.
            let floor = x.last().copied().unwrap_or(0.0);
            x.push(xi.max(floor).min(1.0));
        }
        let alloc = InterimAllocation::new(grid, x)?;
        curves.push(AgentCurves::from_allocation(alloc, capacities[i])?);
    }
    Ok(OnePricedMechanism { kind, capacities, dists, curves })
}

impl OnePricedMechanism {
    /// Serve per the ex-post rule matching the interim allocation (ties by
    /// agent index) and charge the winner her payment-per-win.
    pub fn run(&self, profile: &[f64]) -> Result<Outcome, AuctionError> {
        if profile.len() != self.curves.len() {
            return Err(AuctionError::LengthMismatch);
        }
        let n = profile.len();
        let winner = match self.kind {
            OnePricedKind::MyersonAlloc => {
                let mut best: Option<(usize, f64)> = None;
                for i in 0..n {
                    let phi = self.dists[i].virtual_value(profile[i])?;
                    if phi >= 0.0 && best.map_or(true, |(_, b)| phi > b) {
                        best = Some((i, phi));
                    }
                }
                best.map(|(i, _)| i)
            }
            OnePricedKind::MaxVMinusC => {
                let mut best: Option<(usize, f64)> = None;
                for i in 0..n {
                    let score = profile[i] - self.capacities[i];
                    if best.map_or(true, |(_, b)| score > b) {
                        best = Some((i, score));
                    }
                }
                best.map(|(i, _)| i)
            }
        };
        let Some(w) = winner else { return Ok(Outcome::none(n)) };
        let mut payments = vec![0.0; n];
        payments[w] = self.curves[w].bid.eval(profile[w]).min(profile[w]).max(0.0);
        Ok(Outcome { winner: Some(w), payments })
    }
}

/// Mechanism families the simulator knows how to build and run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MechKind {
    Fpa,
    Spa,
    Csp,
    Myerson,
    OnePricedMyersonAlloc,
    OnePricedMaxVMinusC,
}

impl MechKind {
    pub const ALL: [MechKind; 6] = [
        MechKind::Fpa,
        MechKind::Spa,
        MechKind::Csp,
        MechKind::Myerson,
        MechKind::OnePricedMyersonAlloc,
        MechKind::OnePricedMaxVMinusC,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            MechKind::Fpa => "fpa",
            MechKind::Spa => "spa",
            MechKind::Csp => "csp",
            MechKind::Myerson => "myerson",
            MechKind::OnePricedMyersonAlloc => "one_priced_myerson_alloc",
            MechKind::OnePricedMaxVMinusC => "one_priced_max_v_minus_c",
        }
    }

    pub fn parse(s: &str) -> Option<MechKind> {
        MechKind::ALL.into_iter().find(|k| k.name() == s)
    }
}

/// A mechanism request: kind, participants, and the curve grid size used for
/// any derived equilibrium objects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismSpec {
    pub kind: MechKind,
    pub agents: Vec<AgentSpec>,
    pub grid: usize,
}

/// A mechanism with all derived curves materialized, ready to run on
/// profiles.
#[derive(Debug, Clone)]
pub enum BuiltMechanism {
    Fpa { curve: AgentCurves, n: usize },
    Spa { n: usize },
    Csp { capacities: Vec<f64> },
    Myerson(MyersonAuction),
    OnePriced(OnePricedMechanism),
}

impl MechanismSpec {
    pub fn new(kind: MechKind, agents: Vec<AgentSpec>, grid: usize) -> Self {
        MechanismSpec { kind, agents, grid }
    }

    pub fn build(&self) -> Result<BuiltMechanism, AuctionError> {
        if self.agents.is_empty() {
            return Err(AuctionError::EmptyProfile);
        }
        match self.kind {
            MechKind::Spa => Ok(BuiltMechanism::Spa { n: self.agents.len() }),
            MechKind::Csp => Ok(BuiltMechanism::Csp {
                capacities: self.agents.iter().map(|a| a.capacity).collect(),
            }),
            MechKind::Myerson => {
                let dists: Vec<Dist> = self
                    .agents
                    .iter()
                    .map(|a| a.dist().cloned().ok_or(AuctionError::DiscreteTypes))
                    .collect::<Result<_, _>>()?;
                Ok(BuiltMechanism::Myerson(MyersonAuction::new(dists)?))
            }
            MechKind::Fpa => {
                if self.agents.windows(2).any(|w| w[0] != w[1]) {
                    return Err(AuctionError::AsymmetricAgents);
                }
                let curve = fpa_symmetric_equilibrium(&self.agents[0], self.agents.len(), self.grid)?;
                Ok(BuiltMechanism::Fpa { curve, n: self.agents.len() })
            }
            MechKind::OnePricedMyersonAlloc => Ok(BuiltMechanism::OnePriced(asym_one_priced(
                &self.agents,
                OnePricedKind::MyersonAlloc,
                self.grid,
            )?)),
            MechKind::OnePricedMaxVMinusC => Ok(BuiltMechanism::OnePriced(asym_one_priced(
                &self.agents,
                OnePricedKind::MaxVMinusC,
                self.grid,
            )?)),
        }
    }
}

impl BuiltMechanism {
    pub fn run<R: Rng + ?Sized>(&self, profile: &[f64], rng: &mut R) -> Result<Outcome, AuctionError> {
        match self {
            BuiltMechanism::Fpa { curve, .. } => run_fpa(profile, &curve.bid, rng),
            BuiltMechanism::Spa { .. } => run_spa(profile, rng),
            BuiltMechanism::Csp { capacities } => run_csp(profile, capacities, rng),
            BuiltMechanism::Myerson(m) => m.run(profile),
            BuiltMechanism::OnePriced(m) => m.run(profile),
        }
    }
}
