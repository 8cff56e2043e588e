//! Dynamic fault tree analysis over a failure-time algebra.
//!
//! Fault trees are turned into structure functions ([`algebra::EventTerm`]),
//! simplified by a verified rewrite system ([`rewrite`]), and analysed either
//! qualitatively as cut sequences ([`qualitative`]) or quantitatively through a
//! generated continuous-time Markov chain ([`markov`]) with an independent
//! Monte Carlo cross-check ([`simulate`]).

pub mod algebra;
pub mod bench;
pub mod galileo;
pub mod markov;
pub mod qualitative;
pub mod rewrite;
pub mod simulate;
