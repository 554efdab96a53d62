// SPDX-License-Identifier: Apache-2.0

//! File formats, the parallel suite runner and the `forkmut` command line
//! on top of `forkmut-core`.

pub mod cli;
pub mod export;
pub mod runner;
pub mod suite;
pub mod tablefile;
