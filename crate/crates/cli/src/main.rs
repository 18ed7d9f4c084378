fn main() {
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    let code = entdetect::cli::main_with(std::env::args_os(), &mut std::io::stdout().lock());
    std::process::exit(code);
}
