fn main() {
    std::process::exit(gridfuse_cli::run(std::env::args_os()));
}
