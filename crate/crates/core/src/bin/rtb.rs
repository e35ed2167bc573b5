fn main() {
    std::process::exit(rtb_core::cli::run_subcommand(std::env::args_os()));
}
