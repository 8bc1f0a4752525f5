use std::fmt;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use pgfold::folding::{fold_plan_with, FoldOptions};
use pgfold::galois::{self, FieldSpec};
use pgfold::partition::{spread_partition, CarrierStrategy};
use pgfold::plan_file::{self, SCHEMA};
use pgfold::projective::{build_space, incidence_graph, phi, ProjParams};
use pgfold::simulator::{
    check_plan, run_folded, run_reference, EdgeState, Kernel, SimOptions, SumKernel, UpdateRule,
    XorKernel,
};

const AFTER_HELP: &str = "\
Plan files (written by `schedule`, read by `verify` and `simulate`) use schema
\"pgfold-plan/1\": a JSON object with params, memories {count, size},
memory_map [[point, hyperplane, mem, addr], ...], phase1 [unit -> [[slot, mem, addr], ...]],
phase2 [unit -> [[hyperplane, [addr, ...]], ...]], degree_profile and idle_slots.

Errors are printed to stderr as a JSON object {\"error\": {...}} with a nonzero exit.";

#[derive(Parser)]
#[command(name = "pgfold", version, about = "Conflict-free folding of projective geometry graphs", after_help = AFTER_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the exp/log table of GF(p^e) as CSV.
    Field {
        #[arg(long)]
        p: u64,
        #[arg(long)]
        e: u32,
        /// Primitive polynomial coefficients, leading first, e.g. 1,0,1,1.
        #[arg(long, value_delimiter = ',')]
        poly: Option<Vec<u32>>,
    },
    /// Summarize P(m, GF(q)) and optionally dump its incidence edges.
    Geometry {
        #[arg(long)]
        m: u32,
        #[arg(long)]
        q: u64,
        /// Write edges as CSV (point,hyperplane).
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Build the spread of k-flats, its carriers and hyperplane groups.
    Partition {
        #[arg(long)]
        m: u32,
        #[arg(long)]
        q: u64,
        #[arg(long = "block-dim")]
        k: u32,
        #[arg(long, value_enum, default_value_t = Carriers::Auto)]
        carriers: Carriers,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a fold plan and write it as JSON.
    Schedule {
        #[arg(long)]
        m: u32,
        #[arg(long)]
        q: u64,
        #[arg(long = "block-dim")]
        k: u32,
        #[arg(long, value_enum, default_value_t = Carriers::Auto)]
        carriers: Carriers,
        #[arg(long)]
        out: PathBuf,
    },
    /// Statically check every invariant of a plan file.
    Verify { plan: PathBuf },
    /// Replay a plan slot by slot and compare with the parallel reference.
    Simulate {
        plan: PathBuf,
        #[arg(long, value_enum, default_value_t = KernelArg::Xor)]
        kernel: KernelArg,
        #[arg(long, value_enum, default_value_t = RuleArg::Assign)]
        rule: RuleArg,
        /// Word width of the xor kernel.
        #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u32).range(1..=64))]
        width: u32,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        iters: usize,
        /// Write every read and write as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Overlap each step's write-back with the next step's reads.
        #[arg(long)]
        overlap: bool,
    },
    /// Evaluate phi(n, l, s), the number of l-flats in P(n, GF(s)).
    #[command(allow_negative_numbers = true)]
    Phi { n: i64, l: i64, s: u64 },
}

#[derive(Clone, Copy, ValueEnum)]
enum Carriers {
    Auto,
    Matching,
}

impl From<Carriers> for CarrierStrategy {
    fn from(c: Carriers) -> Self {
        match c {
            Carriers::Auto => CarrierStrategy::Auto,
            Carriers::Matching => CarrierStrategy::Matching,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Xor,
    Sum,
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    Assign,
    Add,
}

/// A failure with a machine-readable kind and extra fields.
#[derive(Debug)]
struct Failure {
    kind: &'static str,
    message: String,
    details: Value,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Failure {}

fn error_object(err: &anyhow::Error) -> Value {
    let message = format!("{err:#}");
    if let Some(f) = err.downcast_ref::<Failure>() {
        let mut obj = json!({ "kind": f.kind, "message": message });
        if let (Value::Object(o), Value::Object(d)) = (&mut obj, &f.details) {
            o.extend(d.clone());
        }
        return json!({ "error": obj });
    }
    if let Some(e) = err.downcast_ref::<pgfold::Error>() {
        let mut obj = json!({ "kind": e.kind(), "message": message });
        match e {
            pgfold::Error::Conflict {
                slot,
                mem,
                port,
                units,
            } => {
                obj["slot"] = json!(slot);
                obj["mem"] = json!(mem);
                obj["port"] = json!(port);
                obj["units"] = json!(units);
            }
            pgfold::Error::DoubleRead {
                slot,
                unit,
                mem,
                addr,
            } => {
                obj["slot"] = json!(slot);
                obj["unit"] = json!(unit);
                obj["mem"] = json!(mem);
                obj["addr"] = json!(addr);
            }
            pgfold::Error::PlanFormat { path, .. } => obj["path"] = json!(path),
            _ => {}
        }
        return json!({ "error": obj });
    }
    let kind = if err.downcast_ref::<io::Error>().is_some() {
        "io"
    } else {
        "error"
    };
    json!({ "error": { "kind": kind, "message": message } })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", error_object(&err));
            ExitCode::FAILURE
        }
    }
}

fn print_json(v: &Value) {
    println!(
        "{}",
        serde_json::to_string_pretty(v).expect("json values serialize")
    );
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    let f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Field { p, e, poly } => field(p, e, poly),
        Command::Geometry { m, q, dump } => geometry(m, q, dump.as_deref()),
        Command::Partition {
            m,
            q,
            k,
            carriers,
            out,
        } => partition(m, q, k, carriers.into(), out.as_deref()),
        Command::Schedule {
            m,
            q,
            k,
            carriers,
            out,
        } => schedule(m, q, k, carriers.into(), &out),
        Command::Verify { plan } => verify(&plan),
        Command::Simulate {
            plan,
            kernel,
            rule,
            width,
            seed,
            iters,
            trace,
            overlap,
        } => {
            let rule = match rule {
                RuleArg::Assign => UpdateRule::Assign,
                RuleArg::Add => UpdateRule::AddReduced,
            };
            let sim = Simulation {
                plan: &plan,
                seed,
                iters,
                trace: trace.as_deref(),
                overlap,
            };
            match kernel {
                KernelArg::Xor => sim.run(&XorKernel { width, rule }),
                KernelArg::Sum => sim.run(&SumKernel { rule }),
            }
        }
        Command::Phi { n, l, s } => {
            println!("{}", phi(n, l, s)?);
            Ok(())
        }
    }
}

fn field(p: u64, e: u32, poly: Option<Vec<u32>>) -> Result<()> {
    let spec = match poly {
        Some(poly) => FieldSpec::new(p, e, poly),
        None => FieldSpec::with_default_poly(p, e)?,
    };
    let f = galois::build_field(spec)?;
    let out = io::stdout();
    let mut out = BufWriter::new(out.lock());
    writeln!(out, "exponent,coefficients")?;
    for i in 0..f.group_order() {
        let coeffs = f.coefficients(f.from_exponent(i as i64));
        let digits: String = coeffs
            .iter()
            .rev()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(" ");
        writeln!(out, "{i},{digits}")?;
    }
    out.flush()?;
    Ok(())
}

fn geometry(m: u32, q: u64, dump: Option<&Path>) -> Result<()> {
    let space = build_space(ProjParams::new(m, q))?;
    let graph = incidence_graph(&space);
    if let Some(path) = dump {
        let mut w = create(path)?;
        writeln!(w, "point,hyperplane")?;
        for e in graph.edges() {
            writeln!(w, "{},{}", e.point, e.hyperplane)?;
        }
        w.flush()?;
    }
    let spec = space.field().spec();
    print_json(&json!({
        "m": m,
        "q": q,
        "field": { "p": spec.p, "e": spec.e, "poly": spec.poly },
        "points": space.n_points(),
        "hyperplanes": space.n_hyperplanes(),
        "points_per_hyperplane": space.degree(),
        "degree": graph.degree(),
        "edges": graph.n_edges(),
    }));
    Ok(())
}

fn partition(m: u32, q: u64, k: u32, strategy: CarrierStrategy, out: Option<&Path>) -> Result<()> {
    let space = build_space(ProjParams::new(m, q))?;
    let sp = spread_partition(&space, k, strategy)?;
    let profile = sp.degree_profile(&space);
    let fp = sp.params;
    let params = json!({
        "m": fp.m, "q": fp.q, "k": fp.k, "t": fp.t, "case": fp.case,
        "blocks": fp.blocks, "points_per_block": fp.points_per_block,
        "carriers_per_block": fp.carriers_per_block,
    });
    if let Some(path) = out {
        let doc = json!({
            "params": params,
            "carrier_assignment": sp.assignment,
            "blocks": sp.blocks.iter().map(|b| &b.points).collect::<Vec<_>>(),
            "carriers": sp.carriers.iter().map(|c| &c.points).collect::<Vec<_>>(),
            "hyperplane_blocks": sp.hyperplanes.groups,
            "degree_profile": profile.rounds,
        });
        let mut w = create(path)?;
        serde_json::to_writer(&mut w, &doc)?;
        writeln!(w)?;
        w.flush()?;
    }
    print_json(&json!({
        "params": params,
        "carrier_assignment": sp.assignment,
        "degree_profile": profile.rounds,
        "uniform_profile": profile.is_uniform(),
    }));
    Ok(())
}

fn schedule(m: u32, q: u64, k: u32, strategy: CarrierStrategy, out: &Path) -> Result<()> {
    let plan = fold_plan_with(
        m,
        q,
        k,
        FoldOptions {
            carrier_strategy: strategy,
        },
    )?;
    let mut w = create(out)?;
    w.write_all(plan_file::to_json(&plan).as_bytes())?;
    w.flush()?;
    print_json(&json!({
        "schema": SCHEMA,
        "units": plan.units(),
        "memories": { "count": plan.memory_map.mem_count, "size": plan.memory_map.mem_size },
        "points_per_unit": plan.fold_factor(),
        "degree_profile": plan.phase1.round_lengths,
        "phase1_slots": plan.phase1_len(),
        "idle_slots": plan.phase1.idle_slots,
    }));
    Ok(())
}

fn load_plan(path: &Path) -> Result<pgfold::folding::FoldPlan> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(plan_file::from_json(&text)?)
}

fn verify(path: &Path) -> Result<()> {
    let plan = load_plan(path)?;
    let report = check_plan(&plan);
    print!("{report}");
    if !report.all_passed() {
        let failures: Vec<Value> = report
            .failures()
            .map(|c| json!({ "check": c.name, "witness": c.witness }))
            .collect();
        let first = report.failures().next().expect("a failure exists");
        return Err(Failure {
            kind: "check_failed",
            message: format!(
                "{} of {} checks failed, first: {}: {}",
                failures.len(),
                report.checks.len(),
                first.name,
                first.witness.as_deref().unwrap_or("")
            ),
            details: json!({ "failures": failures }),
        }
        .into());
    }
    println!("all checks pass");
    println!("memories: {}", plan.memory_map.mem_count);
    Ok(())
}

struct Simulation<'a> {
    plan: &'a Path,
    seed: u64,
    iters: usize,
    trace: Option<&'a Path>,
    overlap: bool,
}

impl Simulation<'_> {
    fn run<K: Kernel>(&self, kernel: &K) -> Result<()> {
        let plan = load_plan(self.plan)?;
        let init = EdgeState::random(kernel, plan.graph.n_edges(), self.seed);
        let options = SimOptions {
            record_trace: self.trace.is_some(),
            overlap: self.overlap,
            abort_on_conflict: true,
        };
        let (folded, trace) = run_folded(&plan, kernel, &init, self.iters, options)?;
        if let Some(path) = self.trace {
            let mut w = create(path)?;
            trace.write_csv(&mut w)?;
            w.flush()?;
        }
        let reference = run_reference(&plan.graph, kernel, &init, self.iters);
        if let Some(e) = (0..folded.values.len()).find(|&e| folded.values[e] != reference.values[e])
        {
            let edge = plan.graph.edge(e);
            let mismatched = (e..folded.values.len())
                .filter(|&i| folded.values[i] != reference.values[i])
                .count();
            return Err(Failure {
                kind: "mismatch",
                message: format!(
                    "folded result differs from the reference at edge ({}, {}); {mismatched} edges differ",
                    edge.point, edge.hyperplane
                ),
                details: json!({ "edge": [edge.point, edge.hyperplane], "mismatched_edges": mismatched }),
            }
            .into());
        }
        let busy = trace.phase1_reads;
        print_json(&json!({
            "kernel": kernel.name(),
            "seed": self.seed,
            "iters": self.iters,
            "overlap": self.overlap,
            "units": plan.units(),
            "phase1_slots": trace.phase1_slots,
            "slots_per_iteration": trace.slots_per_iteration,
            "conflicts": trace.conflicts.len(),
            "idle_slots": trace.idle_slots,
            "busy_slots": busy,
            "reads": trace.reads,
            "writes": trace.writes,
            "matches_reference": true,
        }));
        Ok(())
    }
}
