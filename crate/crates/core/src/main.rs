fn main() {
    std::process::exit(chemolab::cli::run(std::env::args_os()));
}
