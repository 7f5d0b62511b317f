fn main() {
    std::process::exit(clusvd::cli::run(std::env::args_os()));
}
