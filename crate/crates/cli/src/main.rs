//! `flowdec`: parse flow specs, derive decompositions, emit rate-region
//! constraint systems, run shifts and covering loops, and drive the
//! boundary-coverage experiment.
//!
//! Exit codes: 0 on success, 1 on a domain error (invalid flow file, rate
//! vector outside the region, failing fixture), 2 on a usage error.
//! Diagnostics go to stderr, results to stdout; identical arguments and
//! seed produce byte-identical output.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};

use flowdec_core::channel::{
    eval_region, joint_distribution, load_channel_json, sample_boundary, RateVector,
};
use flowdec_core::decomposition::{FlowDecomposition, LayeredPartition};
use flowdec_core::fixtures::{fixture_names, load_fixture, run_fixture};
use flowdec_core::node::{ChannelRoles, NodeId};
use flowdec_core::region::{
    df_region, df_region_side_info, outer_region, render_decoding_plan,
};
use flowdec_core::shift::{cover, default_max_steps, shift, CoverError};
use flowdec_core::text::{parse_flow_file, parse_partition_literal, parse_set_literal};
use flowdec_core::FlowSet;

#[derive(Parser)]
#[command(name = "flowdec", version, about = "Flow decompositions and decode-forward regions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a flow file against every structural invariant.
    Validate {
        /// Flow-spec file (one `flow s -> d : {..} k=..` line per flow).
        flows: PathBuf,
    },
    /// Derive virtual sources, virtual flows, decode offsets, and the
    /// per-layer decoding plan of a decomposition.
    Derive {
        flows: PathBuf,
        /// Destination node.
        #[arg(short = 'd')]
        dest: u32,
        /// Layered partition literal, e.g. `({3,4},{},{2},{1})`.
        #[arg(short = 'L')]
        partition: String,
    },
    /// Print a region: the outer bound, or with `-L` the decode-forward
    /// region of that decomposition.
    Region {
        flows: PathBuf,
        #[arg(short = 'd')]
        dest: u32,
        /// Layered partition literal; omit for the outer bound.
        #[arg(short = 'L')]
        partition: Option<String>,
        /// Also print the side-information variant where it differs.
        #[arg(long)]
        annotate: bool,
    },
    /// Shift a decomposition by a source subset and print the resulting
    /// partition (bifurcated subsets echo the input).
    Shift {
        flows: PathBuf,
        #[arg(short = 'd')]
        dest: u32,
        #[arg(short = 'L')]
        partition: String,
        /// Source subset literal, e.g. `{2}`.
        #[arg(short = 'S')]
        subset: String,
    },
    /// Run the covering loop for one rate vector; prints the shift trace
    /// and the terminal region.
    Cover {
        flows: PathBuf,
        #[arg(short = 'd')]
        dest: u32,
        /// Channel file (JSON).
        #[arg(long)]
        channel: PathBuf,
        /// Rate vector as `source:rate` pairs, e.g. `1:0.25,2:0.1`.
        #[arg(short = 'R', long)]
        rates: String,
        /// Strictness slack in bits.
        #[arg(long, default_value_t = 1e-6)]
        eps: f64,
        /// Step guard; defaults to a generous structural bound.
        #[arg(long)]
        max_steps: Option<usize>,
    },
    /// Boundary-coverage experiment: sample near-boundary rate vectors
    /// and cover each one; CSV on stdout, one row per sample.
    Verify {
        flows: PathBuf,
        #[arg(short = 'd')]
        dest: u32,
        #[arg(long)]
        channel: PathBuf,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        /// Fraction of the boundary distance to sample at.
        #[arg(long, default_value_t = 0.99)]
        alpha: f64,
        #[arg(long, default_value_t = 1e-6)]
        eps: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run golden fixtures (`--run all` or `--run <name>`).
    Fixtures {
        #[arg(long)]
        run: String,
        /// List the catalog instead of running.
        #[arg(long)]
        list: bool,
    },
}

fn load_flows(path: &PathBuf) -> Result<(FlowSet, ChannelRoles)> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let flows = parse_flow_file(&text)?;
    if flows.is_empty() {
        bail!("{} contains no flows", path.display());
    }
    let roles = ChannelRoles::infer(&flows);
    Ok((flows, roles))
}

fn decomposition_from(
    flows: &FlowSet,
    dest: u32,
    partition: &str,
) -> Result<FlowDecomposition> {
    let layers = parse_partition_literal(partition)?;
    let partition = LayeredPartition::new(NodeId(dest), layers)?;
    Ok(FlowDecomposition::new(flows.clone(), partition)?)
}

fn parse_rates(text: &str) -> Result<RateVector> {
    let mut rates = std::collections::BTreeMap::new();
    for part in text.split(',') {
        let (node, rate) = part
            .split_once(':')
            .ok_or_else(|| anyhow!("rate entry `{part}` is not `source:rate`"))?;
        let node: u32 = node.trim().parse().context("rate entry source id")?;
        let rate: f64 = rate.trim().parse().context("rate entry value")?;
        if rate < 0.0 {
            bail!("rates must be non-negative, got {rate}");
        }
        rates.insert(NodeId(node), rate);
    }
    Ok(RateVector::new(rates))
}

fn cmd_validate(flows: PathBuf) -> Result<()> {
    let (set, roles) = load_flows(&flows)?;
    let violations = set.validate(&roles);
    if violations.is_empty() {
        println!("valid: {} flows", set.iter().count());
        return Ok(());
    }
    for v in &violations {
        eprintln!("violation: {v}");
    }
    bail!("{} invariant(s) violated", violations.len());
}

fn cmd_derive(flows: PathBuf, dest: u32, partition: String) -> Result<()> {
    let (set, _) = load_flows(&flows)?;
    let decomp = decomposition_from(&set, dest, &partition)?;
    let mut out = String::new();
    for s in decomp.sources() {
        let vs = decomp.virtual_source(s)?;
        writeln!(
            out,
            "v({s}) = {} (layer {}, delay {})",
            flowdec_core::node::render_set(&vs.v_set),
            vs.layer_of_v,
            vs.delay_to_v
        )?;
    }
    for s in decomp.sources() {
        writeln!(out, "{}", decomp.virtual_flow(s)?)?;
    }
    out.push_str(&render_decoding_plan(&decomp));
    writeln!(out, "complete: {}", decomp.is_complete())?;
    print!("{out}");
    Ok(())
}

fn cmd_region(flows: PathBuf, dest: u32, partition: Option<String>, annotate: bool) -> Result<()> {
    let (set, roles) = load_flows(&flows)?;
    match partition {
        None => println!("{}", outer_region(&set, &roles, NodeId(dest)).render()),
        Some(p) => {
            let decomp = decomposition_from(&set, dest, &p)?;
            let region = df_region(&decomp, &roles);
            println!("{}", region.render());
            if annotate {
                let variant = df_region_side_info(&decomp, &roles);
                for (main, side) in region.constraints.iter().zip(&variant.constraints) {
                    if main != side {
                        println!("# with side information: {side}");
                    }
                }
            }
        }
    }
    Ok(())
}

fn cmd_shift(flows: PathBuf, dest: u32, partition: String, subset: String) -> Result<()> {
    let (set, _) = load_flows(&flows)?;
    let decomp = decomposition_from(&set, dest, &partition)?;
    let subset = parse_set_literal(&subset)?;
    let shifted = shift(&decomp, &subset)?;
    println!("{}", shifted.partition());
    Ok(())
}

fn cmd_cover(
    flows: PathBuf,
    dest: u32,
    channel: PathBuf,
    rates: String,
    eps: f64,
    max_steps: Option<usize>,
) -> Result<()> {
    let (set, roles) = load_flows(&flows)?;
    let text = std::fs::read_to_string(&channel)
        .with_context(|| format!("reading {}", channel.display()))?;
    let (ch, inputs) = load_channel_json(&text)?;
    let rates = parse_rates(&rates)?;
    let max_steps = max_steps.unwrap_or_else(|| default_max_steps(&set, NodeId(dest)));
    match cover(&set, &roles, NodeId(dest), &rates, &ch, &inputs, eps, max_steps) {
        Ok(trace) => {
            print!("{trace}");
            println!("{}", df_region(&trace.terminal, &roles).render());
            Ok(())
        }
        Err(CoverError::MaxStepsExceeded { max_steps, trace }) => {
            print!("{trace}");
            bail!("covering loop exceeded {max_steps} steps (full trace above)");
        }
        Err(e) => Err(e.into()),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_verify(
    flows: PathBuf,
    dest: u32,
    channel: PathBuf,
    samples: usize,
    alpha: f64,
    eps: f64,
    seed: u64,
) -> Result<()> {
    if !(alpha > 0.0) {
        bail!("alpha must be positive");
    }
    let (set, roles) = load_flows(&flows)?;
    let text = std::fs::read_to_string(&channel)
        .with_context(|| format!("reading {}", channel.display()))?;
    let (ch, inputs) = load_channel_json(&text)?;
    let joint = joint_distribution(&ch, &inputs)?;
    let dest = NodeId(dest);
    let outer = outer_region(&set, &roles, dest);
    let max_steps = default_max_steps(&set, dest);
    let sources: Vec<NodeId> = outer.sources.iter().copied().collect();

    let mut writer = csv::Writer::from_writer(std::io::stdout());
    let mut header = vec!["sample_index".to_string()];
    header.extend(sources.iter().map(|s| format!("rate_{s}")));
    header.extend(
        ["covered", "covering_scheme", "steps"]
            .iter()
            .map(|s| s.to_string()),
    );
    writer.write_record(&header)?;

    let mut covered_count = 0usize;
    if samples > 0 {
        let points = sample_boundary(&outer, &joint, alpha, samples, seed)?;
        for (idx, rates) in points.iter().enumerate() {
            let mut row = vec![idx.to_string()];
            row.extend(sources.iter().map(|s| format!("{:.10}", rates.rate(*s))));
            let in_outer = eval_region(&outer, &joint, rates, eps)?.member;
            if !in_outer {
                row.extend(["0".to_string(), "outside_outer_region".to_string(), "0".to_string()]);
            } else {
                match cover(&set, &roles, dest, rates, &ch, &inputs, eps, max_steps) {
                    Ok(trace) => {
                        covered_count += 1;
                        row.extend([
                            "1".to_string(),
                            trace.terminal.partition().to_string(),
                            trace.shift_count().to_string(),
                        ]);
                    }
                    Err(CoverError::MaxStepsExceeded { trace, .. }) => {
                        row.extend([
                            "0".to_string(),
                            "max_steps_exceeded".to_string(),
                            trace.shift_count().to_string(),
                        ]);
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            writer.write_record(&row)?;
        }
    }
    writer.flush()?;
    if samples == 0 {
        println!("# coverage=NaN");
    } else {
        println!("# coverage={:.6}", covered_count as f64 / samples as f64);
    }
    Ok(())
}

fn cmd_fixtures(run: String, list: bool) -> Result<()> {
    if list {
        for name in fixture_names() {
            println!("{name}");
        }
        return Ok(());
    }
    let names: Vec<&str> = if run == "all" {
        fixture_names()
    } else {
        vec![fixture_names()
            .into_iter()
            .find(|n| *n == run)
            .ok_or_else(|| anyhow!("unknown fixture `{run}` (try --list)"))?]
    };
    let mut failed = 0usize;
    for name in names {
        let fixture = load_fixture(name)?;
        let report = run_fixture(&fixture);
        print!("{}", report.render());
        if !report.passed() {
            failed += 1;
        }
    }
    if failed > 0 {
        bail!("{failed} fixture(s) failed");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { flows } => cmd_validate(flows),
        Command::Derive {
            flows,
            dest,
            partition,
        } => cmd_derive(flows, dest, partition),
        Command::Region {
            flows,
            dest,
            partition,
            annotate,
        } => cmd_region(flows, dest, partition, annotate),
        Command::Shift {
            flows,
            dest,
            partition,
            subset,
        } => cmd_shift(flows, dest, partition, subset),
        Command::Cover {
            flows,
            dest,
            channel,
            rates,
            eps,
            max_steps,
        } => cmd_cover(flows, dest, channel, rates, eps, max_steps),
        Command::Verify {
            flows,
            dest,
            channel,
            samples,
            alpha,
            eps,
            seed,
        } => cmd_verify(flows, dest, channel, samples, alpha, eps, seed),
        Command::Fixtures { run, list } => cmd_fixtures(run, list),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
