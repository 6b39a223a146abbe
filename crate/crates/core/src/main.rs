fn main() {
    std::process::exit(asgs_flow::app::cli::run(std::env::args_os()));
}
