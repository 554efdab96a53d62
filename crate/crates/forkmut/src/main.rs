// SPDX-License-Identifier: Apache-2.0

use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(forkmut::cli::main_with_args(std::env::args_os()))
}
