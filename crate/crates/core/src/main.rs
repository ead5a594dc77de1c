fn main() {
    let args: Vec<String> = std::env::args().collect();
    std::process::exit(hardphase::cli_io::run(&args));
}
