//! Exact construction and verification of discrete p-values.
//!
//! A [`DiscreteModel`] holds a finite support with exact rational
//! probabilities under each registered parameter. From a test statistic and
//! a one-to-one [`Ranking`] that agrees with it, [`testing`] builds size-α
//! test functions and the linear-in-`u` p-value families
//! `P(x, u) = a(x) + u·b(x)`: natural (`u = 1`), mid (`u = 1/2`) and
//! randomized (`u ~ U(0, 1)`), in both the statistic-based and the minimally
//! discrete (rank-based) flavours. [`orders`] checks the stochastic, convex
//! and variance orderings between the two flavours by exhaustive exact
//! computation, and [`downstream`] feeds the families into multiple-testing
//! and combination procedures under a seeded simulation harness.

pub mod downstream;
pub mod error;
pub mod model;
pub mod orders;
pub mod ranking;
pub mod rational;
pub mod testing;

pub use error::{Error, Result};
pub use model::{DiscreteModel, SupportPoint};
pub use orders::{Claim, OrderReport, StepCdf, Verdict};
pub use ranking::{Ranking, Statistic, TieBreak};
pub use rational::Rational;
pub use testing::{Basis, FamilyKind, PValueFamily, TestFunction};
