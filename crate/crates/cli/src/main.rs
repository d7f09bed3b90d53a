use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use concave_tent::bnb::{self, BnBConfig, RoundingMode};
use concave_tent::generator::{generate, GenerationRecipe};
use concave_tent::objective::{evaluate_f_sdp, RobustQuadraticInstance};
use concave_tent::rounding::RoundingMethod;
use concave_tent::tent::{build_tent, build_tent01, evaluate_tent, TentProgram};
use nalgebra::DVector;
use serde::Deserialize;
use std::fs;
use std::path::PathBuf;

const SOLVER_TOL: f64 = 1e-8;

#[derive(Parser)]
#[command(name = "tent", about = "Concave tents over discrete sets: evaluation, bounding, search")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Classical,
    Tent,
}

impl Mode {
    fn rounding(self) -> RoundingMode {
        match self {
            Mode::Classical => RoundingMode::Classical,
            Mode::Tent => RoundingMode::TentGuided,
        }
    }

    fn label(self) -> &'static str {
        match self {
            Mode::Classical => "classical",
            Mode::Tent => "tent",
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Draw a random instance and write it as JSON.
    Generate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        q: usize,
        #[arg(long, allow_hyphen_values = true)]
        l: i64,
        #[arg(long, allow_hyphen_values = true)]
        u: i64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Stream index for independent draws under the same seed.
        #[arg(long, default_value_t = 0)]
        stream: u64,
        /// Output file; stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Evaluate f at a point.
    Evaluate {
        #[arg(long)]
        instance: PathBuf,
        /// Comma-separated coordinates.
        #[arg(long, allow_hyphen_values = true)]
        point: String,
    },
    /// Evaluate the tent (value, supergradient, certificate gap) at a point.
    Tent {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        point: String,
        /// Build the tent without the second-order-cone cuts.
        #[arg(long)]
        no_cuts: bool,
    },
    /// Branch and bound.
    Solve {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, value_enum, default_value = "tent")]
        mode: Mode,
        #[arg(long, default_value_t = 10_000)]
        max_nodes: usize,
        /// Write the per-node log as CSV.
        #[arg(long)]
        node_log: Option<PathBuf>,
    },
    /// Run a batch of random instances from a spec file and tabulate results.
    Experiment {
        #[arg(long)]
        spec: PathBuf,
        /// Output CSV; overrides the path in the spec.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Sample tent values on a grid and write them as CSV.
    SampleTent {
        /// Instance JSON; mutually exclusive with --two-piece.
        #[arg(long)]
        instance: Option<PathBuf>,
        /// Sample the scalar 0/1 tent of max(w1.(1,x), w2.(1,x)); pass
        /// "w10,w11,w20,w21".
        #[arg(long, allow_hyphen_values = true)]
        two_piece: Option<String>,
        /// Grid as start:step:end.
        #[arg(long, default_value = "0:0.1:1")]
        grid: String,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn parse_point(s: &str) -> Result<DVector<f64>> {
    let vals: Result<Vec<f64>, _> = s.split(',').map(|t| t.trim().parse::<f64>()).collect();
    Ok(DVector::from_vec(vals.context("bad coordinate list")?))
}

fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        bail!("grid must be start:step:end");
    }
    let (start, step, end): (f64, f64, f64) =
        (parts[0].parse()?, parts[1].parse()?, parts[2].parse()?);
    if step <= 0.0 {
        bail!("grid step must be positive");
    }
    let mut out = Vec::new();
    let mut k = 0usize;
    loop {
        let v = start + step * k as f64;
        if v > end + 1e-12 {
            break;
        }
        out.push(v);
        k += 1;
    }
    Ok(out)
}

fn load_instance(path: &PathBuf) -> Result<RobustQuadraticInstance> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    RobustQuadraticInstance::from_json(&text).map_err(|e| anyhow::anyhow!(e))
}

fn fmt(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.12}")
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else {
        "nan".into()
    }
}

fn write_out(path: &Option<PathBuf>, content: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, content).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{content}"),
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Generate { n, q, l, u, seed, stream, output } => {
            let inst = generate(&GenerationRecipe::default(), n, q, l, u, seed, stream)
                .map_err(|e| anyhow::anyhow!(e.to_string()))?;
            write_out(&output, &(inst.to_json() + "\n"))
        }
        Command::Evaluate { instance, point } => {
            let inst = load_instance(&instance)?;
            let x = parse_point(&point)?;
            if x.len() != inst.n {
                bail!("point has {} coordinates, instance has n = {}", x.len(), inst.n);
            }
            let (value, cert) = evaluate_f_sdp(&inst, &x)?;
            println!("f = {}", fmt(value));
            println!("sup-term certificate: alpha = {}, lambda = {}", fmt(cert.alpha), fmt(cert.lambda));
            Ok(())
        }
        Command::Tent { instance, point, no_cuts } => {
            let inst = load_instance(&instance)?;
            let x = parse_point(&point)?;
            if x.len() != inst.n {
                bail!("point has {} coordinates, instance has n = {}", x.len(), inst.n);
            }
            let tent = build_tent(&inst, !no_cuts).map_err(|e| anyhow::anyhow!(e.to_string()))?;
            let eval = evaluate_tent(&tent, &x, SOLVER_TOL)?;
            if !eval.is_finite() {
                println!("g = -inf (point outside the tent's domain)");
                return Ok(());
            }
            println!("g = {}", fmt(eval.value));
            let grad: Vec<String> = eval.supergradient.iter().map(|&v| fmt(v)).collect();
            println!("supergradient = [{}]", grad.join(", "));
            println!("epsilon = {}", fmt(eval.epsilon));
            Ok(())
        }
        Command::Solve { instance, mode, max_nodes, node_log } => {
            let inst = load_instance(&instance)?;
            let cfg = BnBConfig { mode: mode.rounding(), max_nodes, ..Default::default() };
            let res = bnb::solve(&inst, &cfg)?;
            println!("optimum = {}", fmt(res.optimum));
            let xs: Vec<String> = res.x_star.iter().map(|&v| format!("{v:.0}")).collect();
            println!("x* = [{}]", xs.join(", "));
            println!("nodes = {}", res.node_count);
            println!("wall_time_s = {:.3}", res.wall_time_s);
            println!("proven = {}", res.proven);
            if let Some(path) = node_log {
                let mut csv = String::from(
                    "node_id,depth,bound,incumbent,pruned,rounding_method,rounded_value\n",
                );
                for r in &res.node_log {
                    let method = match r.rounding_method {
                        Some(RoundingMethod::TentGuided) => "tent",
                        Some(RoundingMethod::Classical) => "classical",
                        None => "",
                    };
                    let rounded = r.rounded_value.map(fmt).unwrap_or_default();
                    csv.push_str(&format!(
                        "{},{},{},{},{},{},{}\n",
                        r.node_id,
                        r.depth,
                        fmt(r.bound),
                        fmt(r.incumbent),
                        r.pruned,
                        method,
                        rounded
                    ));
                }
                fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(())
        }
        Command::Experiment { spec, output } => run_experiment(&spec, output),
        Command::SampleTent { instance, two_piece, grid, output } => {
            let grid = parse_grid(&grid)?;
            let csv = match (instance, two_piece) {
                (Some(path), None) => sample_instance(&load_instance(&path)?, &grid)?,
                (None, Some(w)) => sample_two_piece(&w, &grid)?,
                _ => bail!("pass exactly one of --instance or --two-piece"),
            };
            write_out(&output, &csv)
        }
    }
}

#[derive(Deserialize)]
struct InstanceType {
    n: usize,
    q: usize,
    l: i64,
    u: i64,
}

#[derive(Deserialize)]
struct ExperimentSpec {
    instance_types: Vec<InstanceType>,
    instances_per_type: usize,
    seed: u64,
    /// Subset of ["classical", "tent"]; both when omitted.
    modes: Option<Vec<String>>,
    output: Option<String>,
    max_nodes: Option<usize>,
}

fn run_experiment(spec_path: &PathBuf, output: Option<PathBuf>) -> Result<()> {
    let text = fs::read_to_string(spec_path)
        .with_context(|| format!("reading {}", spec_path.display()))?;
    let spec: ExperimentSpec = serde_json::from_str(&text).context("parsing experiment spec")?;
    if spec.instances_per_type == 0 {
        bail!("instances_per_type must be at least 1");
    }
    let modes: Vec<Mode> = match &spec.modes {
        None => vec![Mode::Classical, Mode::Tent],
        Some(names) => names
            .iter()
            .map(|m| match m.as_str() {
                "classical" => Ok(Mode::Classical),
                "tent" => Ok(Mode::Tent),
                other => bail!("unknown mode {other:?}"),
            })
            .collect::<Result<_>>()?,
    };

    let mut csv =
        String::from("instance_id,n,q,l,u,seed,mode,node_count,wall_time_s,optimum,x_star\n");
    let mut stream = 0u64;
    for ty in &spec.instance_types {
        for rep in 0..spec.instances_per_type {
            stream += 1;
            let id = format!("{}_{}_{}_{}#{}", ty.n, ty.q, ty.l, ty.u, rep);
            let inst = match generate(
                &GenerationRecipe::default(),
                ty.n,
                ty.q,
                ty.l,
                ty.u,
                spec.seed,
                stream,
            ) {
                Ok(i) => i,
                Err(e) => {
                    eprintln!("skipping {id}: {e}");
                    continue;
                }
            };
            for &mode in &modes {
                let cfg = BnBConfig {
                    mode: mode.rounding(),
                    max_nodes: spec.max_nodes.unwrap_or(10_000),
                    ..Default::default()
                };
                match bnb::solve(&inst, &cfg) {
                    Ok(res) => {
                        let xs: Vec<String> =
                            res.x_star.iter().map(|&v| format!("{v:.0}")).collect();
                        csv.push_str(&format!(
                            "{},{},{},{},{},{},{},{},{:.3},{},{}\n",
                            id,
                            ty.n,
                            ty.q,
                            ty.l,
                            ty.u,
                            spec.seed,
                            mode.label(),
                            res.node_count,
                            res.wall_time_s,
                            fmt(res.optimum),
                            xs.join(" ")
                        ));
                    }
                    Err(e) => eprintln!("{id} [{}] failed: {e}", mode.label()),
                }
            }
        }
    }
    let out = output.or_else(|| spec.output.as_ref().map(PathBuf::from));
    write_out(&out, &csv)
}

fn sample_rows(
    with_cuts: &TentProgram,
    without_cuts: &TentProgram,
    f_at: impl Fn(&DVector<f64>) -> Option<f64>,
    points: Vec<DVector<f64>>,
) -> Result<String> {
    let n = with_cuts.n;
    let mut csv = String::new();
    let xcols: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
    let gcols: Vec<String> = (0..n).map(|i| format!("supergradient{i}")).collect();
    csv.push_str(&format!(
        "{},g_with_cuts,g_without_cuts,f,{},epsilon\n",
        xcols.join(","),
        gcols.join(",")
    ));
    for x in points {
        let ew = evaluate_tent(with_cuts, &x, SOLVER_TOL)?;
        let eo = evaluate_tent(without_cuts, &x, SOLVER_TOL)?;
        let xs: Vec<String> = x.iter().map(|&v| fmt(v)).collect();
        if ew.is_finite() {
            let f = f_at(&x).map(fmt).unwrap_or_else(|| "nan".into());
            let gs: Vec<String> = ew.supergradient.iter().map(|&v| fmt(v)).collect();
            csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                xs.join(","),
                fmt(ew.value),
                fmt(eo.value),
                f,
                gs.join(","),
                fmt(ew.epsilon)
            ));
        } else {
            let nans: Vec<String> = (0..n).map(|_| "nan".to_string()).collect();
            csv.push_str(&format!(
                "{},-inf,{},nan,{},nan\n",
                xs.join(","),
                fmt(eo.value),
                nans.join(",")
            ));
        }
    }
    Ok(csv)
}

fn sample_instance(inst: &RobustQuadraticInstance, grid: &[f64]) -> Result<String> {
    let with_cuts = build_tent(inst, true).map_err(|e| anyhow::anyhow!(e.to_string()))?;
    let without = build_tent(inst, false).map_err(|e| anyhow::anyhow!(e.to_string()))?;
    let points: Vec<DVector<f64>> = match inst.n {
        1 => grid.iter().map(|&t| DVector::from_element(1, t)).collect(),
        2 => {
            let mut pts = Vec::new();
            for &t1 in grid {
                for &t2 in grid {
                    pts.push(DVector::from_vec(vec![t1, t2]));
                }
            }
            pts
        }
        // higher dimensions: sample along the diagonal segment t * (1, ..., 1)
        n => grid.iter().map(|&t| DVector::from_element(n, t)).collect(),
    };
    let inst = inst.clone();
    sample_rows(
        &with_cuts,
        &without,
        move |x| evaluate_f_sdp(&inst, x).ok().map(|(v, _)| v),
        points,
    )
}

fn sample_two_piece(w: &str, grid: &[f64]) -> Result<String> {
    let vals: Vec<f64> = w
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .context("bad --two-piece weights")?;
    if vals.len() != 4 {
        bail!("--two-piece needs four numbers: w10,w11,w20,w21");
    }
    let (w1, w2) = ([vals[0], vals[1]], [vals[2], vals[3]]);
    let full = build_tent01(w1, w2, false);
    let relaxed = build_tent01(w1, w2, true);
    let points: Vec<DVector<f64>> = grid.iter().map(|&t| DVector::from_element(1, t)).collect();
    sample_rows(
        &full,
        &relaxed,
        move |x| {
            let t = x[0];
            Some((w1[0] + w1[1] * t).max(w2[0] + w2[1] * t))
        },
        points,
    )
}
