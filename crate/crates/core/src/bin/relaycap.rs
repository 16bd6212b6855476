fn main() {
    std::process::exit(relaycap::cli::run(std::env::args_os()));
}
