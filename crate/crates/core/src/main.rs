use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qdcover::cli::config::{parse_list, parse_pair, read_coefficients};
use qdcover::cli::{run_inspect, run_pipeline, run_sweep, PipelineConfig};
use qdcover::mesh::io::MeshFormat;
use qdcover::pipeline::PhiChoice;
use qdcover::{Error, Result};

/// Coverage paths from holomorphic quadratic differentials.
#[derive(Parser)]
#[command(name = "qdcover", version)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Plan a coverage path and evaluate it.
    Plan(Common),
    /// Plan for every ε and evaluate for every δ; writes sweep.csv.
    Sweep(Common),
    /// Topology, zeros and cells only.
    Inspect(Common),
}

#[derive(Args)]
struct Common {
    /// Key = value config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Triangle mesh (OBJ or OFF).
    #[arg(long)]
    input: Option<PathBuf>,
    /// obj or off (default: from the file extension).
    #[arg(long)]
    format: Option<String>,
    /// auto, closed or bordered.
    #[arg(long)]
    surface: Option<String>,
    /// Density step in natural units (comma separated list for sweep).
    #[arg(long)]
    epsilon: Option<String>,
    /// Robot radius in ambient units (comma separated list for sweep).
    #[arg(long)]
    delta: Option<String>,
    /// Φ = ζ_i ζ_j.
    #[arg(long, value_name = "I,J", conflicts_with = "phi_coeffs")]
    phi: Option<String>,
    /// File of `i j re im` lines; Φ = Σ c ζ_i ζ_j.
    #[arg(long, value_name = "FILE")]
    phi_coeffs: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write path.svg for planar inputs (default).
    #[arg(long, overrides_with = "no_svg")]
    svg: bool,
    /// Skip path.svg.
    #[arg(long)]
    no_svg: bool,
    /// Skip path.obj and critical_arcs.obj.
    #[arg(long)]
    no_obj: bool,
    /// Skip cells.obj.
    #[arg(long)]
    no_cells_obj: bool,
    /// Seed of the Monte Carlo coverage spot check.
    #[arg(long)]
    seed: Option<u64>,
    /// Coverage samples per δ.
    #[arg(long)]
    resolution: Option<usize>,
    /// Natural units per ambient unit of the outer boundary (or √area).
    #[arg(long)]
    natural_scale: Option<f64>,
}

impl Common {
    fn config(&self) -> Result<PipelineConfig> {
        let mut c = PipelineConfig::default();
        if let Some(file) = &self.config {
            c.load_file(file)?;
        }
        if let Some(p) = &self.input {
            c.input = p.clone();
        }
        if let Some(f) = &self.format {
            c.format = Some(f.parse::<MeshFormat>()?);
        }
        if let Some(s) = &self.surface {
            c.surface = s.parse()?;
        }
        if let Some(e) = &self.epsilon {
            c.epsilon = parse_list("epsilon", e)?;
        }
        if let Some(d) = &self.delta {
            c.delta = parse_list("delta", d)?;
        }
        if let Some(p) = &self.phi {
            c.phi = parse_pair(p)?;
            c.phi_source = None;
        }
        if let Some(p) = &self.phi_coeffs {
            c.phi = PhiChoice::Coefficients(read_coefficients(p)?);
            c.phi_source = Some(p.clone());
        }
        if let Some(o) = &self.out {
            c.out = o.clone();
        }
        if self.svg {
            c.exports.svg = true;
        }
        if self.no_svg {
            c.exports.svg = false;
        }
        if self.no_obj {
            c.exports.obj_path = false;
        }
        if self.no_cells_obj {
            c.exports.cells_obj = false;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(r) = self.resolution {
            c.resolution = r;
        }
        if let Some(s) = self.natural_scale {
            c.natural_scale = s;
        }
        Ok(c)
    }
}

fn run(verb: Verb) -> Result<()> {
    match verb {
        Verb::Plan(args) => {
            let out = run_pipeline(&args.config()?)?;
            let a = &out.analysis;
            println!(
                "zeros {}  cells {}  dual {} nodes / {} edges  route {} traversals",
                a.zeros.len(),
                a.decomposition.cells.len(),
                a.dual.nodes.len(),
                a.dual.edges.len(),
                a.route.traversals.len()
            );
            if let Some(note) = &out.plan.special_case {
                println!("{note}");
            }
            println!(
                "path length {:.6}  coverage {:.6}  overlap {:.6}",
                out.coverage.path_length, out.coverage.coverage_rate, out.coverage.overlap_rate
            );
            for p in &out.artifacts {
                println!("wrote {}", p.display());
            }
        }
        Verb::Sweep(args) => {
            let c = args.config()?;
            let rows = run_sweep(&c)?;
            for r in &rows {
                println!(
                    "epsilon {} delta {}: coverage {:.6} overlap {:.6} length {:.6}",
                    r.epsilon, r.delta, r.coverage_rate, r.overlap_rate, r.path_length
                );
            }
            println!("wrote {}", c.out.join("sweep.csv").display());
        }
        Verb::Inspect(args) => {
            let c = args.config()?;
            let report = run_inspect(&c)?;
            let s = &report["surface"];
            let a = &report["analysis"];
            println!(
                "genus {}  boundaries {}  zeros {}  cells {}",
                s["genus"],
                s["boundary_count"],
                a["zeros"].as_array().map_or(0, Vec::len),
                a["cells"].as_array().map_or(0, Vec::len)
            );
            println!("wrote {}", c.out.join("inspect.json").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(Error::Config(String::new()).exit_code() as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.verb) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
