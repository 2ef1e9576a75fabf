fn main() {
    std::process::exit(lcbound::cli::main_with(std::env::args_os()));
}
