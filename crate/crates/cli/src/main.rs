fn main() {
    std::process::exit(degenctrl_cli::run(std::env::args_os()));
}
