//! Minimal dense-tensor math with reverse-mode automatic differentiation.
//!
//! Values live in [`Tensor`]s (row-major, 64-bit). Differentiable programs are
//! recorded on a [`Tape`] as they execute; [`Tape::backward`] replays the
//! record in reverse and returns [`Gradients`] for every node that needs one.
//!
//! ```
//! use ldp_autodiff::{Tape, Tensor};
//!
//! let mut tape = Tape::new();
//! let x = tape.leaf(&Tensor::from_vec(vec![3], vec![1.0, 2.0, 3.0]).unwrap().with_grad());
//! let sq = tape.mul(x, x).unwrap();
//! let loss = tape.sum(sq).unwrap();
//! let grads = tape.backward(loss).unwrap();
//! assert_eq!(grads.get(x).unwrap(), &[2.0, 4.0, 6.0]);
//! ```

mod error;
mod gradcheck;
mod kernels;
mod tape;
mod tensor;

pub use error::{AutodiffError, Result};
pub use gradcheck::{central_difference, grad_check, GradCheckReport};
pub use kernels::{log_softmax_rows, matmul, softmax};
pub use tape::{Gradients, RopeTable, Tape, Var};
pub use tensor::Tensor;
