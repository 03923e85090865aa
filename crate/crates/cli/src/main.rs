fn main() {
    centroflat_cli::configure_threads();
    let code = centroflat_cli::main_with_args(std::env::args_os(), &mut std::io::stdout().lock());
    std::process::exit(code);
}
