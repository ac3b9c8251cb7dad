fn main() {
    std::process::exit(lwn::cli::run(std::env::args_os()));
}
