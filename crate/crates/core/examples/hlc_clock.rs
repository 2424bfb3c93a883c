//! Steps a hybrid logical clock through a few writes, including one whose
//! dependency is ahead of the local physical clock.
//!
//! `cargo run --example hlc_clock`

use accf::hlc::HlcState;
use accf::model::HlcTimestamp;

fn main() {
    let mut clock = HlcState::new();
    let steps = [
        (100, None),
        (100, None),
        (101, Some(HlcTimestamp::new(250, 3))),
        (180, None),
        (300, Some(HlcTimestamp::new(120, 0))),
    ];
    for (pc, dep) in steps {
        let before = clock.current();
        let t = match dep {
            Some(dt) => clock.update_for_put(pc, dt),
            None => clock.tick(pc),
        };
        let dep = dep.map_or("-".to_string(), |d| d.to_string());
        println!("pc={pc:<4} dep={dep:<8} {before} -> {t}");
    }
}
