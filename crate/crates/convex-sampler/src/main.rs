use env_logger::Env;

fn main() {
    env_logger::Builder::from_env(Env::new().filter_or("CONVEX_SAMPLER_LOG", "warn")).init();
    std::process::exit(convex_sampler::cli::main_with(std::env::args_os()));
}
