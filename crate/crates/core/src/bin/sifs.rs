fn main() {
    std::process::exit(sifs::cli_main(std::env::args_os()));
}
