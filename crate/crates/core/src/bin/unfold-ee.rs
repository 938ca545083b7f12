fn main() {
    std::process::exit(unfold_ee::harness::cli::run(std::env::args_os()));
}
