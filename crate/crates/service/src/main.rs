fn main() { std::process::exit(compass_service::cli::main()) }
