//! Subcommand handlers.

use crate::{
    CapacityArgs, Failure, PlotArgs, RegionArgs, SimulateArgs, SweepArgs, TopologyArgs,
};
use qswitch::error::Error;
use qswitch::linkgen::{direct_capacity, herald_prob};
use qswitch::model::{build_scenario, SwitchTopology, TopologyConfig};
use qswitch::region::{analytic_region, RateRegion, MAX_GEOMETRY_FLOWS};
use qswitch::scheduler::ServiceRule;
use qswitch::simulator::{run, ArrivalModel, SimConfig};
use qswitch::stability::{classify, SlopeBasis};
use qswitch::sweep::{
    agreement_report, run_sweep_with_progress, GridRange, SweepSpec, PAPER_DLAM, PAPER_HORIZON,
};

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn config_err(e: impl std::fmt::Display) -> Failure {
    Failure::Config(e.to_string())
}

/// Map library errors in a file/topology context.
fn from_config_context(e: Error) -> Failure {
    match e {
        Error::ResourceCap { .. } => Failure::Resource(e.to_string()),
        _ => Failure::Config(e.to_string()),
    }
}

fn parse_rule(rule: &str) -> Result<ServiceRule, Failure> {
    rule.parse().map_err(usage)
}

fn resolve_topology(args: &TopologyArgs) -> Result<SwitchTopology, Failure> {
    if let Some(path) = &args.config {
        if args.scenario.is_some() {
            return Err(usage("pass either --config or --scenario, not both"));
        }
        return TopologyConfig::from_path(path).map_err(from_config_context);
    }
    let Some(tag) = &args.scenario else {
        return Err(usage("one of --config or --scenario is required"));
    };
    let tag = tag.parse().map_err(usage)?;
    let p = match (args.p, args.pnla) {
        (_, Some(pnla)) => {
            let m = args
                .m
                .unwrap_or_else(|| ((1.0 / pnla).round() as u64).max(1));
            herald_prob(pnla, m).map_err(usage)?
        }
        (Some(p), None) => p,
        (None, None) => 0.632,
    };
    Ok(build_scenario(tag, p, args.q).map_err(usage)?.topology)
}

fn write_or_stdout(out: &Option<std::path::PathBuf>, content: &str) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, content)
            .map_err(|e| config_err(format!("{}: {e}", path.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

pub fn region(args: RegionArgs) -> Result<(), Failure> {
    let topology = resolve_topology(&args.topology)?;
    let rule = parse_rule(&args.rule)?;
    let region = analytic_region(&topology, rule).map_err(from_config_context)?;

    // Binding report to stdout; geometry is capped, so degrade gracefully.
    let binding = if region.n_flows <= MAX_GEOMETRY_FLOWS {
        Some(region.binding_facets().map_err(from_config_context)?)
    } else {
        None
    };
    println!(
        "rule: {}",
        match rule {
            ServiceRule::AnyOrientation => "any_orientation",
            ServiceRule::OppositeParity => "opposite_parity",
        }
    );
    for (idx, b) in region.bounds.iter().enumerate() {
        let ids: Vec<String> = b.flow_ids().iter().map(|i| i.to_string()).collect();
        let status = match &binding {
            Some(flags) if flags[idx] => " [binding]",
            Some(_) => " [redundant]",
            None => "",
        };
        println!("facet {{{}}}: {:.6}{status}", ids.join(","), b.bound);
    }

    match args.format.as_str() {
        "json" => {
            let mut text = serde_json::to_string_pretty(&region.to_json())
                .expect("region serializes");
            text.push('\n');
            write_or_stdout(&args.out, &text)
        }
        "csv" => {
            let q = topology.swap_probs();
            let mut buf = Vec::new();
            region
                .write_boundary_samples_csv(&q, 1.0, args.dlam, &mut buf)
                .map_err(from_config_context)?;
            write_or_stdout(&args.out, &String::from_utf8(buf).expect("ascii csv"))
        }
        other => Err(usage(format!("unknown format '{other}'"))),
    }
}

fn parse_rates(text: &str, n_flows: usize) -> Result<Vec<f64>, Failure> {
    let rates: Result<Vec<f64>, _> = text.split(',').map(|s| s.trim().parse::<f64>()).collect();
    let rates = rates.map_err(|e| usage(format!("bad --lam: {e}")))?;
    if rates.len() != n_flows {
        return Err(usage(format!(
            "--lam has {} entries but the topology has {n_flows} flows",
            rates.len()
        )));
    }
    Ok(rates)
}

pub fn simulate(args: SimulateArgs) -> Result<(), Failure> {
    let topology = resolve_topology(&args.topology)?;
    let rule = parse_rule(&args.rule)?;
    let rates = parse_rates(&args.lam, topology.n_flows())?;
    let arrivals = match args.arrival.as_str() {
        "bernoulli" => ArrivalModel::bernoulli(rates).map_err(usage)?,
        "poisson" => ArrivalModel::poisson(rates).map_err(usage)?,
        other => return Err(usage(format!("unknown arrival kind '{other}'"))),
    };
    let cfg = SimConfig::new(topology, arrivals, rule, args.steps, args.seed);
    cfg.check().map_err(from_config_context)?;
    let trace = run(&cfg).map_err(from_config_context)?;
    let verdict = classify(&trace, args.threshold, SlopeBasis::Total)
        .map_err(from_config_context)?;

    let trace_path = format!("{}.trace.csv", args.out);
    let mut file = std::fs::File::create(&trace_path)
        .map_err(|e| config_err(format!("{trace_path}: {e}")))?;
    trace
        .write_csv(&mut file)
        .map_err(|e| config_err(format!("{trace_path}: {e}")))?;

    let verdict_path = format!("{}.verdict.json", args.out);
    let report = serde_json::json!({
        "verdict": verdict,
        "summary": trace.summary_json(&cfg),
    });
    std::fs::write(
        &verdict_path,
        serde_json::to_string_pretty(&report).expect("verdict serializes") + "\n",
    )
    .map_err(|e| config_err(format!("{verdict_path}: {e}")))?;

    println!(
        "stable: {} (slope {:.3e}, threshold {:.1e}); wrote {trace_path}, {verdict_path}",
        verdict.stable, verdict.slope, verdict.threshold
    );
    Ok(())
}

pub fn sweep(args: SweepArgs) -> Result<(), Failure> {
    let topology = resolve_topology(&args.topology)?;
    let rule = parse_rule(&args.rule)?;
    let k = topology.n_flows();
    let base = SimConfig::new(
        topology.clone(),
        ArrivalModel::bernoulli(vec![0.0; k]).map_err(usage)?,
        rule,
        if args.paper_exact { PAPER_HORIZON } else { args.steps },
        args.seed,
    );
    let dlam = if args.paper_exact { PAPER_DLAM } else { args.dlam };
    let range = GridRange::new(args.lam_min, args.lam_max, dlam).map_err(usage)?;
    let mut spec = SweepSpec::uniform_grid(base, range);
    spec.reps = args.reps;
    spec.threshold = args.threshold;
    if let Some(cap) = args.max_steps {
        spec.max_total_steps = cap;
    } else if args.paper_exact {
        spec.max_total_steps = u64::MAX;
    }
    if !args.no_compare {
        spec.region = Some(analytic_region(&topology, rule).map_err(from_config_context)?);
    }

    let total_points = spec.n_points() as usize * spec.reps as usize;
    let milestone = (total_points / 20).max(1);
    let result = run_sweep_with_progress(&spec, |done, total| {
        if done % milestone == 0 || done == total {
            eprintln!("sweep: {done}/{total} points");
        }
    })
    .map_err(|e| match e {
        Error::ResourceCap { .. } => Failure::Resource(e.to_string()),
        other => Failure::Config(other.to_string()),
    })?;

    let mut csv = Vec::new();
    result.write_csv(&mut csv).expect("in-memory write");
    std::fs::write(&args.out, &csv)
        .map_err(|e| config_err(format!("{}: {e}", args.out.display())))?;

    let mut summary = result.summary_json();
    if let Some(region) = &spec.region {
        let report = agreement_report(&result, region).map_err(from_config_context)?;
        summary["agreement"] = serde_json::to_value(&report).expect("report serializes");
        println!(
            "{} points, disagreement {:.3}% overall, {}/{} far from boundary; wrote {}",
            report.total,
            report.disagreement * 100.0,
            report.far_disagreements,
            report.far_total,
            args.out.display()
        );
    } else {
        let stable = result.points.iter().filter(|p| p.stable).count();
        println!(
            "{} points, {stable} stable; wrote {}",
            result.points.len(),
            args.out.display()
        );
    }
    std::fs::write(
        &args.summary,
        serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n",
    )
    .map_err(|e| config_err(format!("{}: {e}", args.summary.display())))?;
    Ok(())
}

pub fn plot(args: PlotArgs) -> Result<(), Failure> {
    let points = crate::plot::read_sweep_csv(&args.sweep)?;
    let region = match &args.region {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
            RateRegion::from_json(&text).map_err(from_config_context)?
        }
        None => {
            let topology = resolve_topology(&args.topology)?;
            let rule = parse_rule(&args.rule)?;
            analytic_region(&topology, rule).map_err(from_config_context)?
        }
    };
    if region.n_flows != 3 {
        return Err(config_err(format!(
            "plotting supports 3 flows, region has {} (CSV output remains available)",
            region.n_flows
        )));
    }
    let svg = crate::plot::render_svg(&points, &region)?;
    std::fs::write(&args.out, svg)
        .map_err(|e| config_err(format!("{}: {e}", args.out.display())))?;
    println!(
        "wrote {} ({} stable, {} unstable points)",
        args.out.display(),
        points.iter().filter(|p| p.stable).count(),
        points.iter().filter(|p| !p.stable).count()
    );
    Ok(())
}

pub fn capacity(args: CapacityArgs) -> Result<(), Failure> {
    let value = direct_capacity(args.eta).map_err(usage)?;
    println!("{value}");
    Ok(())
}
