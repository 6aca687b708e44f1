use clap::Parser;

fn main() {
    let cli = gmxb_cli::Cli::parse();
    match gmxb_cli::run(cli) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.code);
        }
    }
}
