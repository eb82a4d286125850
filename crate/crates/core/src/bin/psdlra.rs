fn main() {
    std::process::exit(psdlra::cli::run(std::env::args_os()));
}
