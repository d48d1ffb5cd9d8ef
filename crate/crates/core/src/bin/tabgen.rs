fn main() {
    env_logger::init();
    std::process::exit(tabgen::cli::dispatch(std::env::args_os()));
}
