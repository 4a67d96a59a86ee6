pub mod certificates;
pub mod counterexamples;
pub mod error;
pub mod functions;
pub mod linalg;
pub mod operators;
pub mod primal_dual;
pub mod qp;
pub mod solver;
pub mod spectral;
pub mod subspace;
pub mod svm;
