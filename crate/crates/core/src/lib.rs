//! Job-shop formulation toolkit: instance and description generation, an
//! exact solver, and an evaluation harness for externally generated
//! formulations.

pub mod adapter;
pub mod evaluator;
pub mod formulation;
pub mod gantt;
pub mod generator;
pub mod model;
pub mod parallel;
pub mod process;
pub mod rng;
pub mod solver;
