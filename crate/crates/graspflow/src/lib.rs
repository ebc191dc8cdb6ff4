//! graspflow: learning a condition-dependent transformation between two
//! 7-DOF grasp-pose distributions (rigid-gripper proxy poses to corrected
//! soft-gripper poses) with a flow-matching velocity field integrated as
//! a neural ODE.
//!
//! The crate is organized around the pipeline stages:
//!
//! * [`pose`] — 7-DOF pose representation, quaternion algebra, the linear
//!   interpolation path and its constant target velocity.
//! * [`tensor`] / [`nn`] — dense f64 matrix math and a small reverse-mode
//!   layer stack (affine, batch norm, SiLU/ReLU, MSE, Adam).
//! * [`velocity`] — the conditional velocity network and its training loop.
//! * [`ode`] — Dormand–Prince 5(4), RK4 and Euler integrators for the flow.
//! * [`encoder`] — depth-image autoencoder producing the 128-d condition.
//! * [`scene`] — synthetic primitive scenes, orthographic depth rendering,
//!   the rigid-grasp proxy generator and the soft-correction oracle.
//! * [`pipeline`] — the end-to-end training pipeline over one run config.
//! * [`eval`] — geometric success oracle and seen/unseen benchmark tables.
//! * [`persist`] — on-disk formats: datasets, depth images, checkpoints,
//!   reports.
//!
//! Data-parallel stages (scene generation, batch encoding, evaluation
//! trials) run on rayon when the default `parallel` feature is enabled and
//! fall back to sequential iteration otherwise; results are identical
//! either way.

pub mod config;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod nn;
pub mod ode;
pub mod par;
pub mod persist;
pub mod pipeline;
pub mod pose;
pub mod rng;
pub mod scene;
pub mod tensor;
pub mod velocity;

pub use error::{Error, Result};
pub use pose::{GraspPose, PoseVec7, Velocity7};
pub use tensor::Tensor2;
