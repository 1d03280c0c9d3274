fn main() {
    env_logger::init();
    std::process::exit(fig_core::cli::run(std::env::args_os()));
}
