//! Combine independent evidence scores and show why order never matters.
//!
//! cargo run --example hooper_scoring [-- 0.8 0.3 ...]

use pdt_episodes::engine::hooper;

fn main() {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let scores = if args.is_empty() { vec![0.8, 0.3, 0.3 * 0.6] } else { args };

    match hooper(&scores) {
        Ok(h) => println!("H({scores:?}) = {h:.6}"),
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(2);
        }
    }

    let mut acc = Vec::new();
    for s in &scores {
        acc.push(*s);
        println!("  after {s:<6} -> {:.6}", hooper(&acc).unwrap());
    }
    let mut reversed = scores.clone();
    reversed.reverse();
    println!("reversed input gives the same bits: {}", hooper(&reversed).unwrap() == hooper(&scores).unwrap());

    // A weak keyword hit in a body field weighted 0.6 contributes 0.3 * 0.6.
    println!("\nthree weak hits: {:.3}", hooper(&[0.3, 0.3, 0.3]).unwrap());
    println!("one strong hit:  {:.3}", hooper(&[0.8]).unwrap());
}
