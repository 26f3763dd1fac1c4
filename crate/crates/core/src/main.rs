fn main() {
    let code = gotm::cli::run(std::env::args_os());
    std::process::exit(code);
}
