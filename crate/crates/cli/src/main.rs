use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use nodalab::frequency::{frequency_and_h, frequency_checks};
use nodalab::harnack::{build_chains, calibrate_theta, chain_zero_set, ChainBatch};
use nodalab::nodal::{boundary_geometry_report, nodal_domains, GeometryConfig};
use nodalab::scenario::{build_scenario, run_suite_with_workers, SuiteConfig, SummaryTable, WORKERS_ENV};
use nodalab::{Ball, CoefficientField, DistanceField, Point, ScalarField};

#[derive(Parser)]
#[command(name = "nodalab", version, about = "Quantitative unique continuation lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    U,
    V,
    Level,
}

#[derive(Subcommand)]
enum Command {
    /// Build one scenario of a suite config and write a field to a .nfield file.
    Solve {
        config: PathBuf,
        /// Scenario id; may be omitted when the config has a single scenario.
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long, value_enum, default_value = "u")]
        field: Which,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Frequency profile (and optionally nodal geometry) of a field file, with A = I.
    Analyze {
        field: PathBuf,
        /// Center as comma-separated coordinates.
        #[arg(long, value_parser = parse_point, default_value = "0,0,0")]
        center: Point,
        /// Comma-separated radii; default 0.25·2^k while the ball fits the grid.
        #[arg(long, value_delimiter = ',')]
        radii: Vec<f64>,
        /// Profile CSV `radius,H,N,N_D`; stdout when omitted.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Profile and certificate report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Geometry report of the nodal domain containing `--point`, as JSON.
        #[arg(long, requires = "point")]
        geometry: Option<PathBuf>,
        #[arg(long, value_parser = parse_point)]
        point: Option<Point>,
        /// Radius of the region for the nodal partition.
        #[arg(long)]
        region: Option<f64>,
    },
    /// Modified Harnack chains from a CSV of start points (`x,y[,z]`).
    Chain {
        field: PathBuf,
        starts: PathBuf,
        /// Fixed θ; calibrated over the default grid when omitted.
        #[arg(long)]
        theta: Option<f64>,
        /// Chain CSV `chain,step,x,y,z,abs_w,delta,ratio`; stdout when omitted.
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Batch fit (ξ₁, ξ₂, R², c₄) as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Run a suite config; exit 0 iff every mandatory check passes.
    Verify {
        config: PathBuf,
        /// Report bundle JSON.
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Summary CSV.
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Worker threads; overrides the environment variable and the config.
        #[arg(long)]
        workers: Option<usize>,
        #[arg(short, long)]
        quiet: bool,
    },
    /// Render a report bundle as a text table or summary CSV.
    Report {
        bundle: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn parse_point(s: &str) -> std::result::Result<Point, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}")))
        .collect::<std::result::Result<_, _>>()?;
    if v.is_empty() || v.len() > 3 {
        return Err(format!("expected 1 to 3 coordinates, got {}", v.len()));
    }
    let mut p = [0.0; 3];
    p[..v.len()].copy_from_slice(&v);
    Ok(p)
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn load_config(path: &Path) -> Result<SuiteConfig> {
    let cfg = SuiteConfig::load(path)?;
    cfg.validate()?;
    Ok(cfg)
}

fn solve(config: &Path, scenario: Option<&str>, which: Which, out: &Path) -> Result<u8> {
    let cfg = load_config(config)?;
    let spec = match scenario {
        Some(id) => cfg
            .scenario
            .iter()
            .find(|s| s.id == id)
            .ok_or_else(|| nodalab::Error::Config(format!("no scenario '{id}'")))?,
        None if cfg.scenario.len() == 1 => &cfg.scenario[0],
        None => return Err(nodalab::Error::Config("several scenarios; pass --scenario".into()).into()),
    };
    let sc = build_scenario(&spec.kind, &cfg.resolved_params(spec))?;
    let (field, residual) = match which {
        Which::U => (&sc.u, sc.residual_u),
        Which::V => (sc.partner()?, sc.residual_v.unwrap_or(f64::NAN)),
        Which::Level => (sc.level(), f64::NAN),
    };
    field.save(out)?;
    eprintln!(
        "{}: {} nodes, h = {}, residual {:e} -> {}",
        sc.label,
        sc.grid.node_count(),
        sc.h(),
        residual,
        out.display()
    );
    Ok(0)
}

fn default_radii(field: &ScalarField, center: &Point) -> Vec<f64> {
    let room = field.grid().box_distance(center);
    (0..)
        .map(|k| 0.25 * f64::from(1u32 << k))
        .take_while(|r| *r <= room * (1.0 + 1e-12))
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn analyze(
    path: &Path,
    center: Point,
    radii: Vec<f64>,
    csv: Option<&Path>,
    json_out: Option<&Path>,
    geometry: Option<&Path>,
    point: Option<Point>,
    region: Option<f64>,
) -> Result<u8> {
    let field = ScalarField::load(path)?;
    let op = CoefficientField::identity(field.grid());
    let radii = if radii.is_empty() {
        default_radii(&field, &center)
    } else {
        radii
    };
    if radii.is_empty() {
        bail!("no radius fits the grid around {center:?}");
    }
    let profile = frequency_and_h(&field, &op, &center, &radii)?;
    profile.write_csv(sink(csv)?)?;
    if let Some(p) = json_out {
        let certificates = frequency_checks(&profile, &field, &op).map_err(|e| e.to_string());
        let report = match certificates {
            Ok(c) => json!({ "profile": profile, "certificates": c }),
            Err(e) => json!({ "profile": profile, "certificates": null, "certificate_error": e }),
        };
        write_json(p, &report)?;
    }
    if let Some(out) = geometry {
        let point = point.expect("clap enforces --point");
        let g = field.grid();
        let radius = region.unwrap_or_else(|| g.box_distance(&[0.0; 3]) - 0.05);
        let part = nodal_domains(&field, &Ball::centered(radius)?)?;
        let id = part
            .domain_at(&field, &point)
            .ok_or_else(|| anyhow::anyhow!("no nodal domain at {point:?}"))?;
        let delta = DistanceField::from_zero_set(g, &part.zero_set, None)?;
        let cfg = GeometryConfig {
            ahlfors_max_scale: (radius / 4.0).min(1.0),
            ..GeometryConfig::default()
        };
        let rep = boundary_geometry_report(&field, &part, id, &delta, &cfg)?;
        std::fs::write(out, rep.to_json() + "\n")?;
    }
    Ok(0)
}

fn read_starts(path: &Path) -> Result<Vec<Point>> {
    let mut rd = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .flexible(true)
        .from_path(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let mut out = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let joined = rec.iter().collect::<Vec<_>>().join(",");
        match parse_point(&joined) {
            Ok(p) => out.push(p),
            // a header line
            Err(_) if i == 0 => {}
            Err(e) => bail!("{}: line {}: {e}", path.display(), i + 1),
        }
    }
    if out.is_empty() {
        bail!("{}: no start points", path.display());
    }
    Ok(out)
}

fn write_chains(batch: &ChainBatch, w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["chain", "step", "x", "y", "z", "abs_w", "delta", "ratio"])?;
    for (k, c) in batch.chains.iter().enumerate() {
        for (i, p) in c.points.iter().enumerate() {
            let ratio = if i == 0 {
                String::new()
            } else {
                c.growth_ratios[i - 1].to_string()
            };
            out.write_record([
                k.to_string(),
                i.to_string(),
                p[0].to_string(),
                p[1].to_string(),
                p[2].to_string(),
                c.values[i].to_string(),
                c.deltas[i].to_string(),
                ratio,
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

fn chain(field: &Path, starts: &Path, theta: Option<f64>, out: Option<&Path>, json_out: Option<&Path>) -> Result<u8> {
    let field = ScalarField::load(field)?;
    let starts = read_starts(starts)?;
    let zs = chain_zero_set(&field)?;
    let batch = match theta {
        Some(t) => build_chains(&field, &zs, &starts, t)?,
        None => calibrate_theta(&field, &zs, &starts)?,
    };
    write_chains(&batch, sink(out)?)?;
    if let Some(p) = json_out {
        write_json(
            p,
            &json!({
                "theta": batch.theta,
                "chains": batch.chains.len(),
                "lengths": batch.chains.iter().map(|c| c.len()).collect::<Vec<_>>(),
                "failures": batch.failures,
                "xi1": batch.xi1,
                "xi2": batch.xi2,
                "r_squared": batch.r_squared,
                "c4": batch.c4,
                "min_ratio": batch.min_ratio,
            }),
        )?;
    }
    for (i, e) in &batch.failures {
        eprintln!("start {i}: {e}");
    }
    Ok(u8::from(!batch.failures.is_empty()))
}

fn verify(
    config: &Path,
    out: Option<&Path>,
    summary: Option<&Path>,
    workers: Option<usize>,
    quiet: bool,
) -> Result<u8> {
    let cfg = load_config(config)?;
    let workers = match workers {
        Some(n) => Some(n),
        None => match std::env::var(WORKERS_ENV) {
            Ok(s) => Some(
                s.parse()
                    .map_err(|_| nodalab::Error::Config(format!("{WORKERS_ENV}='{s}' is not a count")))?,
            ),
            Err(_) => cfg.global.workers,
        },
    };
    let bundle = run_suite_with_workers(&cfg, workers)?;
    if let Some(p) = out {
        bundle.write_json(p)?;
    }
    if let Some(p) = summary {
        bundle.write_summary_csv(File::create(p)?)?;
    }
    if !quiet {
        print!("{}", bundle.render_text());
    }
    Ok(bundle.exit_code() as u8)
}

fn report(bundle: &Path, csv: Option<&Path>) -> Result<u8> {
    let text = std::fs::read_to_string(bundle).with_context(|| format!("cannot read {}", bundle.display()))?;
    let table = SummaryTable::from_bundle_json(&text)?;
    match csv {
        Some(p) => table.write_csv(File::create(p)?)?,
        None => print!("{}", table.render_text()),
    }
    Ok(table.exit_code() as u8)
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Solve {
            config,
            scenario,
            field,
            out,
        } => solve(&config, scenario.as_deref(), field, &out),
        Command::Analyze {
            field,
            center,
            radii,
            csv,
            json,
            geometry,
            point,
            region,
        } => analyze(
            &field,
            center,
            radii,
            csv.as_deref(),
            json.as_deref(),
            geometry.as_deref(),
            point,
            region,
        ),
        Command::Chain {
            field,
            starts,
            theta,
            out,
            json,
        } => chain(&field, &starts, theta, out.as_deref(), json.as_deref()),
        Command::Verify {
            config,
            out,
            summary,
            workers,
            quiet,
        } => verify(&config, out.as_deref(), summary.as_deref(), workers, quiet),
        Command::Report { bundle, csv } => report(&bundle, csv.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let config = matches!(e.downcast_ref::<nodalab::Error>(), Some(nodalab::Error::Config(_)));
            ExitCode::from(if config { 2 } else { 1 })
        }
    }
}
