fn main() {
    let code = rosterd_cli::main_with(std::env::args(), &mut std::io::stdout().lock(), &mut std::io::stderr().lock());
    std::process::exit(code);
}
