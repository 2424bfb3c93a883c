//! Instantiates every grouping preset on the two-partition topology and
//! shows tracking groups, checking groups and key-sharing peers.
//!
//! `cargo run --example grouping_presets`

use accf::grouping::{Preset, Topology};

fn main() {
    let topology = Topology::two_partitions_two_replicas();
    for preset in Preset::ALL {
        let g = preset.instantiate(&topology);
        println!("{preset}");
        for s in &g.servers {
            let tg = g.tracking_of(s).map_or("?", |t| t.as_str());
            let cgs: Vec<_> = g.checking_of(s).iter().map(|c| c.to_string()).collect();
            let peers: Vec<_> = g.key_sharing_peers(s).iter().map(|p| p.to_string()).collect();
            println!(
                "  {s}: tracking {tg}, checking [{}], shares keys with [{}]",
                cgs.join(" "),
                peers.join(" ")
            );
        }
        if let Err(v) = g.validate() {
            println!("  invalid: {v:?}");
        }
    }
}
