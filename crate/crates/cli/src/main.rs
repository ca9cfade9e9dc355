fn main() {
    std::process::exit(plnet_cli::run(std::env::args_os()));
}
