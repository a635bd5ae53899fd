//! Thin wrapper: all behavior lives in [`feaspump::cli`].

fn main() {
    std::process::exit(feaspump::cli::main());
}
