//! The `fusionloc` command line.
//!
//! Exit status: 0 on success, 2 on a usage error, 1 on a runtime error.
//! Commands that take a file can read it from stdin instead, so
//! `gen | build-db | evaluate` works as a pipeline.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Read, Write};
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use fusionloc::cluster::build_subareas;
use fusionloc::db::{parse_query, BuildConfig, RpDatabase, TrialSet};
use fusionloc::pipeline::evaluate;
use fusionloc::synth::{device_ids, gen_environment, gen_trials, Environment, SynthConfig, World};
use fusionloc::{ClusterConfig, Locator, Method};

use crate::api::{localize_request, AppState, LocalizeRequest, ServiceConfig};

type CliResult<T = ()> = Result<T, Box<dyn std::error::Error>>;

#[derive(Debug, Parser)]
#[command(name = "fusionloc", version, about = "Wi-Fi + image fusional indoor localization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize an environment and write its RP database (no subareas yet).
    Gen {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 4.0)]
        width: f64,
        #[arg(long, default_value_t = 2.0)]
        depth: f64,
        #[arg(long, default_value_t = 0.5)]
        interval: f64,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cluster a database's fingerprints into subareas.
    BuildDb {
        /// Input database; stdin when omitted.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        k: usize,
        /// Clustering seed; defaults to the seed recorded in the database.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Localize one query document and print the result as JSON.
    Localize {
        #[arg(long)]
        db: PathBuf,
        /// Query document; stdin when omitted.
        #[arg(long)]
        query: Option<PathBuf>,
        #[arg(long, default_value = "combined_dr", value_parser = parse_method)]
        method: Method,
    },
    /// Generate a seeded trial set against a database's synthetic world.
    Simulate {
        #[arg(long)]
        db: PathBuf,
        /// Number of trials.
        #[arg(long, default_value_t = 300)]
        trials: usize,
        /// Trial seed; defaults to the seed recorded in the database.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 3)]
        devices: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score methods on a trial set; prints a table and writes a JSON report.
    Evaluate {
        /// Database; stdin when omitted.
        #[arg(long)]
        db: Option<PathBuf>,
        /// Trial set; simulated in-process from --seed/--num-trials/--devices
        /// when omitted.
        #[arg(long)]
        trials: Option<PathBuf>,
        /// `all` or a comma-separated list of methods.
        #[arg(long, default_value = "all", value_parser = parse_methods)]
        methods: MethodList,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 300)]
        num_trials: usize,
        #[arg(long, default_value_t = 3)]
        devices: usize,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long)]
        db: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
    },
}

/// Methods selected on the command line, in report order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodList(pub Vec<Method>);

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: fusionloc::Error| e.to_string())
}

fn parse_methods(s: &str) -> Result<MethodList, String> {
    if s == "all" {
        return Ok(MethodList(Method::ALL.to_vec()));
    }
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim) {
        let m = parse_method(part)?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    Ok(MethodList(out))
}

fn read_input(path: Option<&Path>) -> CliResult<Vec<u8>> {
    match path {
        Some(p) => fs::read(p).map_err(|e| format!("{}: {e}", p.display()).into()),
        None => {
            let mut buf = Vec::new();
            io::stdin().read_to_end(&mut buf)?;
            Ok(buf)
        }
    }
}

fn write_output(path: Option<&Path>, text: &str) -> CliResult {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| format!("{}: {e}", p.display()).into()),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn load_db(path: Option<&Path>) -> CliResult<RpDatabase> {
    Ok(RpDatabase::from_json_bytes(&read_input(path)?)?)
}

/// The synthetic environment behind a database, for generating trials.
fn environment(db: &RpDatabase) -> CliResult<Environment> {
    let synth = db.build_config.synth.clone();
    let world = World::generate(db.map.width, db.map.depth, &synth)?;
    Ok(Environment { map: db.map.clone(), world, config: synth })
}

fn simulate(db: &RpDatabase, n: usize, seed: u64, devices: usize) -> CliResult<TrialSet> {
    let env = environment(db)?;
    let trials = gen_trials(&env, &db.build_config.pose, n, &device_ids(devices), seed)?;
    Ok(TrialSet { seed, trials })
}

fn locator(db: &RpDatabase) -> fusionloc::Result<Locator<'_>> {
    Locator::new(&db.map, db.build_config.cluster.clone(), db.build_config.matching.clone())
}

/// Runs one parsed command.
pub fn execute(command: Command) -> CliResult {
    match command {
        Command::Gen { seed, width, depth, interval, out } => {
            let synth = SynthConfig { seed, ..SynthConfig::default() };
            let build = BuildConfig { synth, cluster: ClusterConfig { seed, ..ClusterConfig::default() }, ..BuildConfig::default() };
            let env = gen_environment(width, depth, interval, &build.synth, &build.pose)?;
            write_output(out.as_deref(), &RpDatabase::new(env.map, build).to_json()?)
        }
        Command::BuildDb { input, k, seed, out } => {
            let mut db = load_db(input.as_deref())?;
            let cluster = &mut db.build_config.cluster;
            cluster.k = k;
            if let Some(seed) = seed {
                cluster.seed = seed;
            }
            db.map.subareas = build_subareas(&db.map, cluster)?;
            write_output(out.as_deref(), &db.to_json()?)
        }
        Command::Localize { db, query, method } => {
            let db = load_db(Some(&db))?;
            db.require_subareas()?;
            let q = parse_query(&read_input(query.as_deref())?)?;
            let req = LocalizeRequest {
                fingerprint: q.fingerprint,
                keypoints: q.keypoints,
                heading: q.heading,
                device_id: q.device_id,
                method: Some(method),
            };
            let resp = localize_request(&db, &locator(&db)?, &req, method)?;
            write_output(None, &format!("{}\n", serde_json::to_string_pretty(&resp)?))
        }
        Command::Simulate { db, trials, seed, devices, out } => {
            let db = load_db(Some(&db))?;
            let seed = seed.unwrap_or(db.build_config.synth.seed);
            let set = simulate(&db, trials, seed, devices)?;
            write_output(out.as_deref(), &serde_json::to_string(&set)?)
        }
        Command::Evaluate { db, trials, methods, report, seed, num_trials, devices } => {
            let db = load_db(db.as_deref())?;
            db.require_subareas()?;
            let set = match trials {
                Some(path) => TrialSet::from_json_bytes(&read_input(Some(&path))?)?,
                None => simulate(&db, num_trials, seed.unwrap_or(db.build_config.synth.seed), devices)?,
            };
            let metrics = evaluate(&set.trials, &locator(&db)?, &methods.0, set.seed)?;
            if let Some(path) = report.as_deref() {
                write_output(Some(path), &format!("{}\n", serde_json::to_string_pretty(&metrics)?))?;
            }
            write_output(None, &metrics.to_table())
        }
        Command::Serve { db, port, host } => {
            let state = AppState::new(load_db(Some(&db))?, ServiceConfig::default())?;
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(crate::api::serve(state, SocketAddr::new(host, port)))?;
            Ok(())
        }
    }
}

/// Parses `args` (program name first) and runs the command, returning the
/// process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
