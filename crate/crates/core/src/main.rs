fn main() {
    let code = rof_afem::cli::run(std::env::args_os(), &mut std::io::stdout());
    std::process::exit(code);
}
