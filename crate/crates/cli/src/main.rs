fn main() {
    std::process::exit(geotomo_cli::run(std::env::args_os()));
}
