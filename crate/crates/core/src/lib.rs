//! Membership-inference attacks and training-time defenses on small
//! feed-forward classifiers.
//!
//! The crate is organised bottom-up:
//!
//! * [`numerics`] is a dense MLP engine with manual backpropagation and Adam.
//! * [`data`] loads MNIST IDX files, generates Gaussian blob datasets and
//!   draws the disjoint target/shadow split plan.
//! * [`defense`] holds the training-time defenses, including adaptive mixup
//!   (a linearly decaying mixing coefficient with dominant-label assignment).
//! * [`attack`] implements the shadow-trained classifier attack (A1), the
//!   confidence-threshold attack (A2) and the label-only perturbation
//!   attack (A3).
//! * [`harness`] wires everything into repeatable experiments and reports.

pub mod attack;
pub mod data;
pub mod defense;
pub mod harness;
pub mod numerics;
pub mod seed;
