fn main() {
    std::process::exit(aim_forge::cli::run_cli(std::env::args_os()));
}
