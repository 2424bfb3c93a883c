fn main() {
    let stdout = &mut std::io::stdout();
    let stderr = &mut std::io::stderr();
    std::process::exit(accf::cli::main_with(std::env::args_os(), stdout, stderr));
}
