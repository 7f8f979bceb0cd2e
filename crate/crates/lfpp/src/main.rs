fn main() {
    std::process::exit(lfpp::cli::run(std::env::args_os()));
}
