// SPDX-License-Identifier: Apache-2.0

//! Standard-library companion to the `ttc-core` solvers: file formats,
//! the experiment harness, the dense factorization baseline, and the
//! types behind the `ttc` command line binary.

pub mod baseline;
pub mod experiment;
pub mod io;
