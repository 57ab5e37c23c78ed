fn main() {
    std::process::exit(carma_field_cli::run(std::env::args_os()));
}
