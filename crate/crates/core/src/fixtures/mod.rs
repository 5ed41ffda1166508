//! Problem fixtures, parameter samplers and independent oracles.

mod cone;
mod oracles;
mod problems;
mod random;

pub use cone::{planted_program, sparse_qp, PlantedProgram};
pub use oracles::{eq_qp, lp_vertex_enumeration, simplex_projection, OracleError};
pub use problems::{complementarity_margin, norm_regression, Fixture, Reference};
pub use random::{depth, gen_random_dpp, RandomSizes};
