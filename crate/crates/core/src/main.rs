fn main() {
    std::process::exit(lmilatt::cli::run(std::env::args_os()));
}
