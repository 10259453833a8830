//! Dense tensors, a reverse-mode tape, parameter storage, and the
//! finite-difference gradient oracle.

mod gradcheck;
mod graph;
pub(crate) mod kernels;
mod optim;
mod params;
#[allow(clippy::module_inception)]
mod tensor;

pub use gradcheck::{
    finite_difference_check, relative_error, GradCheckReport, ParamCheck, REL_ERR_FLOOR,
};
pub use graph::{Grads, Graph, Var};
pub use optim::{Optimizer, OptimizerConfig, OptimizerKind};
pub use params::{Param, ParamId, ParamStore};
pub use tensor::Tensor;
