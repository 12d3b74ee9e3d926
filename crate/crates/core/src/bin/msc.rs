fn main() {
    std::process::exit(msc::expcli::cli_main(std::env::args_os()));
}
