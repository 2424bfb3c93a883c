//! Adds a checking group spanning A1 and B2 while a session keeps writing,
//! lets a reader use it once both members have gossiped, then tries to drop
//! `cg2`, which is refused because A2 would be left without a group.
//!
//! `cargo run --example reconfigure`

use std::collections::BTreeSet;
use std::sync::Arc;

use accf::client::{OpOutcome, PinnedBalancer};
use accf::experiments::figure_one_config;
use accf::grouping::GroupChange;
use accf::model::{CheckingGroupId, ClientId, ServerId};
use accf::sim::{Action, ClientSpec, SimRng, Simulation};
use accf::trace::TraceKind;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = figure_one_config("two-by-two")?;
    let mut sim = Simulation::new(&cfg, 3)?;
    let members: BTreeSet<_> = ["A1", "B2"].into_iter().map(ServerId::new).collect();
    sim.schedule_reconfig(
        300,
        GroupChange::AddChecking {
            cg: CheckingGroupId::new("cross"),
            members,
        },
    )?;
    sim.schedule_reconfig(
        600,
        GroupChange::RemoveChecking {
            cg: CheckingGroupId::new("cg2"),
        },
    )?;

    let group = sim.config().clone();
    let pinned = |a: &str, b: &str| {
        Arc::new(
            PinnedBalancer::new(group.clone())
                .pin("A", ServerId::new(a))
                .pin("B", ServerId::new(b)),
        )
    };
    let mut n = 0u64;
    let writer = move |now: u64, last: Option<&OpOutcome>, _: &mut SimRng| {
        if now >= 1_000 {
            return Action::Stop;
        }
        if last.is_some() {
            return Action::Sleep(10);
        }
        n += 1;
        Action::put(if n.is_multiple_of(2) { "a" } else { "b" }, &n.to_string())
    };
    sim.add_client(
        ClientSpec {
            id: ClientId::new("w"),
            region: "east".into(),
            balancer: pinned("A2", "B1"),
            default_cg: CheckingGroupId::new("cg2"),
            start_ms: 0,
        },
        Box::new(writer),
    )?;
    let mut step = 0u64;
    let reader = move |now: u64, last: Option<&OpOutcome>, _: &mut SimRng| {
        if now >= 1_000 {
            return Action::Stop;
        }
        if last.is_some() {
            return Action::Sleep(10);
        }
        step += 1;
        let key = if step.is_multiple_of(2) { "a" } else { "b" };
        if now >= 400 {
            Action::get_in(key, "cross")
        } else {
            Action::get(key)
        }
    };
    sim.add_client(
        ClientSpec {
            id: ClientId::new("r"),
            region: "west".into(),
            balancer: pinned("A1", "B2"),
            default_cg: CheckingGroupId::new("cg1"),
            start_ms: 5,
        },
        Box::new(reader),
    )?;
    sim.run_until(1_500)?;

    for r in sim.trace().iter().filter(|r| r.kind == TraceKind::Reconfig) {
        println!("{r}");
    }
    for (t, e) in sim.reconfig_failures() {
        println!("at {t} ms: {e}");
    }
    let cross = CheckingGroupId::new("cross");
    let reads = sim
        .trace()
        .iter()
        .filter(|r| r.kind == TraceKind::GetReply && r.cg.as_ref() == Some(&cross))
        .count();
    println!("{reads} reads answered in `cross`");
    print!("{}", accf::checker::check(sim.trace()));
    Ok(())
}
