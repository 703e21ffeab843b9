fn main() {
    std::process::exit(lagspec::cli::run(std::env::args_os()));
}
