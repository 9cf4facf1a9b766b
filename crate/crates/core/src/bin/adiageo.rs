fn main() {
    std::process::exit(adiageo::cli::main_with_args(std::env::args_os()));
}
