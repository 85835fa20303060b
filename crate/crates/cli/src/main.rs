use clap::Parser;

fn main() {
    let cli = probcut_cli::Cli::parse();
    let code = match probcut_cli::execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            probcut_cli::EXIT_ERROR
        }
    };
    std::process::exit(code);
}
