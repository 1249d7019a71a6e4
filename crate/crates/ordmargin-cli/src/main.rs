use clap::Parser;

use ordmargin_cli::commands::{run, Cli};

fn main() {
    // Rust ignores SIGPIPE at startup, so a closed output pipe
    // (`ordmargin eval ... | head`) would panic mid-print; restore the
    // default die-quietly behavior expected of a CLI.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }

    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("ordmargin: {err}");
        std::process::exit(err.exit_code());
    }
}
