//! Prints the seeded synthetic drug-interaction fact file.
//! `cargo run -p dgm-core --example write_synthetic > data/ddi_synthetic.facts`

use dgm_core::synth::{planted_ddi_text, SynthConfig};

fn main() {
    print!("{}", planted_ddi_text(&SynthConfig::default()).expect("default config plants"));
}
