fn main() {
    let code = monopole_lab::cli::run_cli(std::env::args_os(), &mut std::io::stdout().lock());
    std::process::exit(code);
}
