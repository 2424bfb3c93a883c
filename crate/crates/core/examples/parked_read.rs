//! A session writes `a` at A1 and then reads `b` at B2. B2 may only answer
//! once it has heard from B1, the other replica of `b` in A1's tracking
//! group, past the write's timestamp, so a slow B1 makes the read park.
//! Prints the session's trace and the park records.
//!
//! `cargo run --example parked_read [extra-delay-ms]`

use std::sync::Arc;

use accf::client::PinnedBalancer;
use accf::experiments::figure_one_config;
use accf::model::{CheckingGroupId, ClientId, ServerId};
use accf::sim::{Action, ClientSpec, Script, Simulation};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let delay: u64 = std::env::args().nth(1).map_or(Ok(200), |s| s.parse())?;
    let mut cfg = figure_one_config("two-by-two")?;
    cfg.network.extra_delay_ms.insert("B1".into(), delay);
    let mut sim = Simulation::new(&cfg, 1)?;
    let balancer = PinnedBalancer::new(sim.config().clone())
        .pin("A", ServerId::new("A1"))
        .pin("B", ServerId::new("B2"));
    let client = ClientId::new("s");
    sim.add_client(
        ClientSpec {
            id: client.clone(),
            region: "west".into(),
            balancer: Arc::new(balancer),
            default_cg: CheckingGroupId::new("cg2"),
            start_ms: 50,
        },
        Box::new(Script::new([Action::put("a", "1"), Action::get("b"), Action::get("b")])),
    )?;
    sim.run_until(2_000)?;

    println!("extra delay on B1: {delay} ms");
    for r in sim.trace().iter() {
        let mine = r.actor.as_client() == Some(&client)
            || r.peer.as_ref().and_then(|p| p.as_client()) == Some(&client);
        if mine {
            println!("  {r}");
        }
    }
    for p in sim.parks() {
        println!(
            "parked at {} from {} to {} ms ({} ms)",
            p.server,
            p.parked_at,
            p.released_at,
            p.released_at - p.parked_at
        );
    }
    if sim.parks().is_empty() {
        println!("no read parked");
    }
    Ok(())
}
