//! Numerical toolkit for Kirchhoff-Routh type functions
//! `f_Omega(x) = f(x) - sum_{j,k} lambda_j lambda_k H_Omega(x_j, x_k)` on smooth
//! planar domains: Green functions and their regular parts, critical points
//! and their Morse data, Hadamard shape derivatives, continuation of critical
//! points under domain perturbation, and point-vortex dynamics.

pub mod geometry;
pub mod green;
pub mod kr;
pub mod critical;
pub mod report;
pub mod shape;
pub mod dynamics;
pub mod checks;
pub mod cli;
