//! Drives two copies of one key by hand with per-server groups: a put at
//! A1, a read at A2 that parks on the writer's dependencies, then the
//! replicate, which releases it because A2 checks alone.
//!
//! `cargo run --example two_server_session`

use std::sync::Arc;

use accf::grouping::{Preset, Topology};
use accf::model::{CheckingGroupId, ClientId, DependencySet, Key, Message, ServerId, Value};
use accf::server::{Effects, Server, ServerParams};

fn show(who: &str, fx: &mut Effects) {
    for e in &fx.sends {
        println!("  {who} -> {}: {:?}", e.to.as_str(), e.msg);
    }
    fx.clear();
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let group = Arc::new(Preset::FourByOne.instantiate(&Topology::two_partitions_two_replicas()));
    let params = ServerParams::default();
    let mut a1 = Server::new(ServerId::new("A1"), group.clone(), params.clone())?;
    let mut a2 = Server::new(ServerId::new("A2"), group, params)?;
    let mut fx = Effects::new();
    let client = ClientId::new("c");
    let key = Key::new("a");

    println!("put a=hello at A1");
    a1.handle_put_req(10, 10, client.clone(), key.clone(), Value::new("hello"), DependencySet::new(), &mut fx);
    let replicate = fx
        .sends
        .iter()
        .find_map(|e| match &e.msg {
            Message::Replicate { version, .. } => Some(version.clone()),
            _ => None,
        })
        .ok_or("no replicate message")?;
    let ds = replicate.ds.clone();
    show("A1", &mut fx);

    println!("read at A2 with the writer's dependencies {ds}");
    let cg = CheckingGroupId::new("cg-A2");
    a2.handle_get_req(12, 12, client.clone(), key.clone(), cg.clone(), ds, &mut fx);
    show("A2", &mut fx);
    println!("  parked reads at A2: {}", a2.pending_gets());

    println!("replicate reaches A2");
    a2.handle_replicate(15, a1.id().clone(), key.clone(), replicate, &mut fx);
    show("A2", &mut fx);
    println!("  A2 vv {}  svv(cg-A2) {}", a2.vv(), a2.svv(&cg).map_or("-".into(), |v| v.to_string()));
    println!("  parked reads at A2: {}", a2.pending_gets());
    println!("  latest a at A2: {:?}", a2.latest(&key).map(|v| v.value.as_str().to_string()));
    Ok(())
}
