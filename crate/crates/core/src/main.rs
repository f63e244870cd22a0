fn main() { std::process::exit(nlest::cli::run_cli(std::env::args_os())); }
