fn main() {
    std::process::exit(qbsde_cli::run_command(std::env::args_os()));
}
