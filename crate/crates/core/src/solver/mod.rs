//! Interface-fitted P1 finite elements for `div(A∇u) + W·∇u + Vu = f`.

mod linalg;
mod mesh;
mod solve;

pub use linalg::{solve as solve_linear, CsrMatrix, EnvelopeCholesky, Method, SolveStats, SolverOptions};
pub use mesh::{
    build_mesh, Domain, Mesh, RectSide, Tag, TagEdge, MARK_BOTTOM, MARK_INCLUSION, MARK_INTERFACE, MARK_LEFT,
    MARK_OUTER, MARK_RIGHT, MARK_TOP,
};
pub use solve::{basis_gradients, solve_dirichlet, DiscreteSolution, Medium, Problem, Source};
