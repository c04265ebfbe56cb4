//! Writes a synthetic English-like treebank.
//!
//! `cargo run --example synth -- <sentences> <seed> <label> [--raw]`

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.len() < 3 {
        eprintln!("usage: synth <sentences> <seed> <label> [--raw]");
        std::process::exit(2);
    }
    let n: usize = args[0].parse().expect("sentence count");
    let seed: u64 = args[1].parse().expect("seed");
    let text = if args.iter().any(|a| a == "--raw") {
        udparse::synth::raw_corpus(n, seed, &args[2])
    } else {
        udparse_core::conllu::write_conllu(&udparse::synth::treebank(n, seed, &args[2]))
    };
    print!("{}", text);
}
