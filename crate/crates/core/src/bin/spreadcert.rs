fn main() {
    std::process::exit(spreadcert::cli::run(std::env::args_os()));
}
