//! Revenue-optimal and approximately optimal single-item auctions for bidders
//! with capacitated utility `u_C(z) = min(z, C)`.
//!
//! The crate is organized around the lifecycle of a desk-scale experiment:
//!
//! * [`dist`] — value distributions, virtual values, discretization, sampling.
//! * [`two_price`] — two-priced rules (pay `v` or `v - C`), BIC checking, the
//!   revenue-dominating transform and the three-part payment upper bound.
//! * [`optlp`] — dense simplex and the LPs that compute optimal two-priced
//!   auctions for one agent or an explicit joint type space.
//! * [`payid`] — the payment identity for one-priced (pay-your-bid style)
//!   mechanisms: risk-neutral payment, value-minus-capacity floor, and the
//!   capacitated equilibrium payment with its bid function.
//! * [`auctions`] — concrete mechanisms: FPA, SPA, capacitated second-price,
//!   Myerson, and the asymmetric one-priced constructions.
//! * [`sim`] — seeded Monte-Carlo revenue estimation, best-response audits,
//!   and approximation-ratio reports.
//! * [`io`] — CSV/JSON formats shared with the command-line tool.
//!
//! Payment and probability algebra that does not touch a distribution is
//! generic over the scalar type (see [`scalar::Scalar`]), so the same code
//! runs on `f64` grids and on exact rationals.

pub mod auctions;
pub mod dist;
pub mod io;
pub mod optlp;
pub mod payid;
pub mod rng;
pub mod scalar;
pub mod sim;
pub mod two_price;

/// Money amounts (values, payments, capacities).
pub type Money = f64;
/// Probabilities and probability masses.
pub type Prob = f64;

/// Two-priced rule on an `f64` grid, the common concrete instantiation.
pub type TwoPricedRuleF = two_price::TwoPricedRule<f64>;
/// Interim allocation on an `f64` grid.
pub type InterimAllocationF = payid::InterimAllocation<f64>;
/// Payment curve on an `f64` grid.
pub type PaymentCurveF = payid::PaymentCurve<f64>;
/// Exact-rational two-priced rule (used where results must be exact).
pub type TwoPricedRuleQ = two_price::TwoPricedRule<num_rational::Ratio<i64>>;

pub use dist::{AgentSpec, DiscreteTypeSpace, Dist, DistError};
pub use optlp::{LinearProgram, LpSolution, LpStatus};
pub use sim::RevenueEstimate;
