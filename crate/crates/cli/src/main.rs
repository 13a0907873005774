fn main() {
    std::process::exit(pmap_cutout_cli::cli_main(std::env::args_os()));
}
