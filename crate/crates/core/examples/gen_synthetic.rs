//! Writes a synthetic ProPublica-shaped corpus: `gen_synthetic <n_ads> <n_advertisers> <seed>`.

use polads_core::synthetic::{generate_records, to_ndjson, SyntheticConfig};

fn main() {
    let args: Vec<u64> = std::env::args().skip(1).map(|a| a.parse().expect("numeric argument")).collect();
    let cfg = SyntheticConfig {
        n_ads: args.first().copied().unwrap_or(1000) as usize,
        n_advertisers: args.get(1).copied().unwrap_or(100) as usize,
        seed: args.get(2).copied().unwrap_or(0),
        tie_rate: 0.05,
        ..Default::default()
    };
    print!("{}", to_ndjson(&generate_records(&cfg)));
}
