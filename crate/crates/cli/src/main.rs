fn main() {
    if let Err(e) = eegtopo_cli::run(std::env::args_os()) {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}
