//! Projection-constrained nonlinear opinion dynamics on graphs.
//!
//! Agents hold opinions on several options and each agent's opinion is
//! confined to a subspace of option space by an orthogonal projector. The
//! crate simulates the constrained system, reduces it exactly to scalar
//! effective opinions when constraints are rank one, analyses the pitchfork
//! bifurcation of the neutral state, and measures how heterogeneous
//! constraints redistribute eigenvector centrality.

pub mod bifurcation;
pub mod centrality;
pub mod constraints;
pub mod dynamics;
pub mod error;
pub mod graphs;
pub mod linalg;

pub use constraints::{effective_adjacency, effective_bias, BiasField, ConstraintSet, EffectiveNetwork};
pub use error::{Error, Result};
pub use graphs::{Eigenpair, Graph, GraphSpec};
