use antijam_cli::{run, Cli, Status};
use clap::Parser;

fn main() {
    // clap exits with 2 on bad arguments, which is reserved here for degenerate solves.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            std::process::exit(if e.use_stderr() { Status::Usage.code() } else { 0 });
        }
    };
    std::process::exit(run(cli).code());
}
