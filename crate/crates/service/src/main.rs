fn main() {
    std::process::exit(elmo2eds_service::cli::run(std::env::args_os()));
}
