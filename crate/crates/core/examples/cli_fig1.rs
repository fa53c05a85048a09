//! Drives the command-line pipeline in-process on the `fig1` preset and lists
//! the CSV files it writes.
//!
//! cargo run --release --example cli_fig1 -- [output dir]

fn main() {
    let out = std::env::args().nth(1).unwrap_or_else(|| "fig1-out".into());
    for cmd in ["validate", "eigen-fixedpoint", "eigen-operator", "compare"] {
        println!("== {cmd}");
        let code = plasmid_spectra::cli::run(["plasmid-spectra", cmd, "--preset", "fig1", "--out", out.as_str()]);
        if code != 0 {
            eprintln!("{cmd} exited with {code}");
            std::process::exit(code);
        }
    }
    let mut files: Vec<_> = std::fs::read_dir(&out)
        .expect("output directory")
        .filter_map(|e| e.ok().map(|e| e.file_name().to_string_lossy().into_owned()))
        .collect();
    files.sort();
    println!("\n{out}/: {}", files.join(" "));
}
