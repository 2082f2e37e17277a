//! Runs the seeded default experiment and prints the metrics table.
//!
//! cargo run --release -p fusionloc --example default_experiment [seed] [trials]

use fusionloc::cluster::{build_subareas, ClusterConfig};
use fusionloc::pipeline::{evaluate, Locator, Method};
use fusionloc::pose::PoseConfig;
use fusionloc::synth::{device_ids, gen_environment, gen_trials, SynthConfig};
use fusionloc::MatchConfig;

fn main() -> fusionloc::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(42);
    let n: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(300);
    let synth = SynthConfig { seed, ..Default::default() };
    let pose = PoseConfig::default();
    let mut env = gen_environment(4.0, 2.0, 0.5, &synth, &pose)?;
    let cluster = ClusterConfig { seed, ..Default::default() };
    env.map.subareas = build_subareas(&env.map, &cluster)?;
    let trials = gen_trials(&env, &pose, n, &device_ids(3), seed)?;
    let locator = Locator::new(&env.map, cluster, MatchConfig::default())?;
    let report = evaluate(&trials, &locator, &Method::ALL, seed)?;
    print!("{}", report.to_table());
    Ok(())
}
