fn main() {
    std::process::exit(intersect_bias::cli::run_from(std::env::args_os()));
}
