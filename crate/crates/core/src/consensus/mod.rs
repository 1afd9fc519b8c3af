//! Agent communication graph, its Laplace matrix and spectrum, and the
//! synchronous gossip step used by the consensus method.

mod gossip;
mod jacobi;
mod laplacian;
mod topology;

pub use gossip::{gossip_rounds, gossip_step, mean_deviation_norm};
pub use jacobi::{symmetric_eigen, SymmetricEigen};
pub use laplacian::{build_laplacian, contraction_factor, LaplaceSpectrum};
pub use topology::Topology;
