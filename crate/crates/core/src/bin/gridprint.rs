fn main() { std::process::exit(gridprint::cli::main_exit()); }
