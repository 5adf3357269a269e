//! Combinatorial optimization pipelines with a learned linear model in front
//! of an easy CO layer: a two-stage stochastic spanning tree problem and
//! single-machine scheduling with release dates.

pub mod experiment;
pub mod graphs;
pub mod learning;
pub mod model;
pub mod scheduling;
pub mod two_stage;
