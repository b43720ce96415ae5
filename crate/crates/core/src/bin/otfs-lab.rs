fn main() {
    std::process::exit(otfs_lab::cli::main_with_args(std::env::args_os()));
}
