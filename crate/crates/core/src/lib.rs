//! Balayage of discrete positive measures onto finite regions for
//! regularized Riesz kernels, computed as an energy-norm projection onto
//! the cone of measures carried by the region.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod balayage;
pub mod coneqp;
pub mod energy;
pub mod equilibrium;
pub mod error;
pub mod grids;
pub mod kernel;
pub mod linalg;
pub mod report;
pub mod types;

pub use coneqp::{project, project_in, KktCertificate, MassConstraint, Projection, ProjectionProblem};
pub use energy::EnergyContext;
pub use error::{Error, Result};
pub use kernel::{assemble_gram, eval_kernel, KernelSpec};
pub use report::{Detail, TheoremReport};
pub use types::{make_measure, region_subset, DiscreteMeasure, EquilibriumResult, Point, Region, SweepResult};
