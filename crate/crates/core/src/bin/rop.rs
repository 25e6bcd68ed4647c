fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ROP_LOG", "warn")).init();
    std::process::exit(rop::cli::run(std::env::args_os()));
}
