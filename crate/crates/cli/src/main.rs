mod config;
mod error;
mod output;
mod report;
mod run;

use std::path::{Path, PathBuf};
use std::time::Instant;

use aecm_core::aecm;
use aecm_core::cm::extract_centroids;
use aecm_core::data::{gen_five_gaussians, gen_toy, save_csv, ToyKind};
use aecm_core::model_io::{load_model, save_model, Model};
use aecm_core::Matrix;
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::{json, Value};

use config::{apply_overrides, load_dataset, parse_config, read_config_value, resolve, set_path, FIVE_GAUSSIANS};
use error::{CliError, CliResult};
use report::{aggregate, record, select_run, DatasetInfo, Report, METRICS};

#[derive(Parser)]
#[command(name = "aecm", version, about = "Clustering with the clustering module (CM) and its autoencoder extension (AE-CM)")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Global {
    /// Base seed; run i uses seed + i.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of independent runs.
    #[arg(long, global = true)]
    runs: Option<usize>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads for parallel runs (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset as CSV with a trailing label column.
    Gen {
        /// five-gaussians, moons, circles, blobs, varied, aniso or no-structure.
        #[arg(long)]
        kind: String,
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model from a JSON run configuration.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Override a configuration key, e.g. `--set dataset.n=500`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Score predicted labels against ground truth.
    Eval {
        pred: PathBuf,
        truth: PathBuf,
        /// 0-based label column of TRUTH (default: last).
        #[arg(long)]
        truth_column: Option<usize>,
        #[arg(long)]
        truth_header: bool,
    },
    /// Train every combination of a parameter grid.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// `param=v1,v2,...` for alpha, batch_size, beta or lambda.
        #[arg(long = "grid", value_name = "PARAM=VALUES")]
        grid: Vec<String>,
    },
    /// Pick the run with the smallest sparsity score in each report.
    Select {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Decode points on the segment between two centroids.
    Interpolate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        k1: usize,
        #[arg(long)]
        k2: usize,
        #[arg(long, default_value_t = 10)]
        steps: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        image_width: Option<usize>,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = dispatch(cli) {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}

fn dispatch(cli: Cli) -> CliResult<()> {
    let g = cli.global;
    match cli.command {
        Command::Gen { kind, n, noise, out } => gen(&kind, n, noise, g.seed.unwrap_or(0), &out),
        Command::Train { config, overrides } => {
            let mut v = read_config_value(&config)?;
            apply_overrides(&mut v, &overrides)?;
            let report = train_job(v, &g, &g.out_dir)?;
            if !g.quiet {
                print_summary(&report);
            }
            Ok(())
        }
        Command::Eval {
            pred,
            truth,
            truth_column,
            truth_header,
        } => eval(&pred, &truth, truth_column, truth_header),
        Command::Sweep { config, overrides, grid } => {
            let mut v = read_config_value(&config)?;
            apply_overrides(&mut v, &overrides)?;
            sweep(v, &grid, &g)
        }
        Command::Select { reports, json } => select(&reports, json),
        Command::Interpolate {
            model,
            k1,
            k2,
            steps,
            out,
            image_width,
        } => interpolate(&model, k1, k2, steps, &out, image_width),
    }
}

fn gen(kind: &str, n: usize, noise: Option<f64>, seed: u64, out: &Path) -> CliResult<()> {
    let key = kind.to_ascii_lowercase().replace('_', "-");
    let ds = if key == FIVE_GAUSSIANS {
        if noise.is_some() {
            return Err(CliError::config("five-gaussians has no noise parameter"));
        }
        gen_five_gaussians(n, seed)?
    } else {
        gen_toy(key.parse::<ToyKind>()?, n, noise, seed)?
    };
    save_csv(out, &ds.features, ds.labels.as_deref(), None)?;
    Ok(())
}

fn train_job(mut v: Value, g: &Global, out_dir: &Path) -> CliResult<Report> {
    if let Some(s) = g.seed {
        set_path(&mut v, "seed", json!(s))?;
    }
    if let Some(r) = g.runs {
        set_path(&mut v, "runs", json!(r))?;
    }
    let cfg = parse_config(v)?;
    let data = load_dataset(&cfg.dataset)?;
    let resolved = resolve(&cfg, &data)?;
    let start = Instant::now();
    let seeds: Vec<u64> = (0..resolved.runs as u64).map(|i| resolved.seed + i).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(g.threads)
        .build()
        .map_err(|e| CliError::config(format!("cannot start thread pool: {e}")))?;
    let outputs = pool.install(|| {
        seeds
            .par_iter()
            .map(|&s| {
                let r = run::execute(&resolved, &data.x, s);
                if !g.quiet {
                    eprintln!("run with seed {s} finished");
                }
                r
            })
            .collect::<CliResult<Vec<_>>>()
    })?;

    output::create_dir(out_dir)?;
    let truth = data.raw.labels.as_deref();
    let config_value = serde_json::to_value(&resolved).expect("configuration serialises");
    let mut runs = Vec::with_capacity(outputs.len());
    for (i, o) in outputs.iter().enumerate() {
        let dir = out_dir.join(format!("run-{i:03}"));
        output::create_dir(&dir)?;
        output::write(&dir.join("assignments.csv"), output::assignments_csv(&o.labels))?;
        output::write(&dir.join("centroids.csv"), output::centroids_csv(&o.centroids))?;
        output::write(&dir.join("history.csv"), output::table_csv(&o.history_header, &o.history))?;
        if data.x.cols() == 2 {
            output::write(&dir.join("scatter.svg"), output::scatter_svg(&data.x, &o.labels, &o.centroids))?;
        }
        if let Some(m) = &o.model {
            let mut cv = config_value.clone();
            cv["seed"] = json!(o.seed);
            save_model(dir.join("model.bin"), m, cv)?;
        }
        runs.push(record(o, truth)?);
    }
    let report = Report {
        config: resolved,
        dataset: DatasetInfo {
            name: data.raw.name.clone(),
            n: data.x.rows(),
            d: data.x.cols(),
            k_true: data.raw.k_true,
        },
        aggregate: aggregate(&runs),
        selected_run: select_run(&runs),
        runs,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    let text = serde_json::to_string_pretty(&report).expect("report serialises");
    output::write(&out_dir.join("report.json"), text + "\n")?;
    Ok(report)
}

fn print_summary(r: &Report) {
    println!("{} on {} ({} runs)", serde_json::to_value(r.config.model).unwrap().as_str().unwrap_or(""), r.dataset.name, r.runs.len());
    for (m, a) in &r.aggregate {
        println!("  {m:<12} mean {:.4}  std {:.4}  best {:.4}", a.mean, a.std, a.best);
    }
    if let Some(i) = r.selected_run {
        println!("  selected run {i} (seed {})", r.runs[i].seed);
    }
}

fn score_x100(v: f64) -> f64 {
    (v * 1000.0).round() / 10.0
}

/// Prediction files may carry a header row; it is detected by a non-integer last cell.
fn pred_has_header(path: &Path) -> CliResult<bool> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    let first = text.lines().next().unwrap_or_default();
    let last = first.rsplit(',').next().unwrap_or_default().trim();
    Ok(last.parse::<usize>().is_err())
}

fn eval(pred: &Path, truth: &Path, column: Option<usize>, header: bool) -> CliResult<()> {
    let p = output::read_label_column(pred, pred_has_header(pred)?, None)?;
    let t = output::read_label_column(truth, header, column)?;
    if p.len() != t.len() {
        return Err(CliError::data(format!("{} predictions for {} true labels", p.len(), t.len())));
    }
    use aecm_core::metrics::{acc, ari, homogeneity, nmi};
    let out = json!({
        "ari": score_x100(ari(&t, &p)?),
        "nmi": score_x100(nmi(&t, &p)?),
        "acc": score_x100(acc(&t, &p)?),
        "homogeneity": score_x100(homogeneity(&t, &p)?),
    });
    println!("{out}");
    Ok(())
}

const GRID_PARAMS: [&str; 4] = ["alpha", "batch_size", "beta", "lambda"];

fn parse_grid(grid: &[String]) -> CliResult<Vec<(String, Vec<Value>)>> {
    if grid.is_empty() {
        return Err(CliError::config("sweep needs at least one --grid"));
    }
    let mut out: Vec<(String, Vec<Value>)> = Vec::new();
    for g in grid {
        let (name, values) = g
            .split_once('=')
            .ok_or_else(|| CliError::config(format!("grid `{g}` is not PARAM=V1,V2,...")))?;
        if !GRID_PARAMS.contains(&name) {
            return Err(CliError::config(format!("cannot sweep `{name}` (allowed: {})", GRID_PARAMS.join(", "))));
        }
        if out.iter().any(|(n, _)| n == name) {
            return Err(CliError::config(format!("`{name}` appears twice in the grid")));
        }
        let vals: Vec<Value> = values
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| serde_json::from_str(s.trim()).map_err(|_| CliError::config(format!("grid value `{s}` is not a number"))))
            .collect::<CliResult<_>>()?;
        if vals.is_empty() {
            return Err(CliError::config(format!("grid for `{name}` has no values")));
        }
        out.push((name.to_string(), vals));
    }
    Ok(out)
}

fn cells(grid: &[(String, Vec<Value>)]) -> Vec<Vec<Value>> {
    grid.iter().fold(vec![Vec::new()], |acc, (_, vals)| {
        acc.iter()
            .flat_map(|prefix| {
                vals.iter().map(move |v| {
                    let mut c = prefix.clone();
                    c.push(v.clone());
                    c
                })
            })
            .collect()
    })
}

fn sweep(base: Value, grid: &[String], g: &Global) -> CliResult<()> {
    let grid = parse_grid(grid)?;
    let mut header: Vec<String> = grid.iter().map(|(n, _)| n.clone()).collect();
    let mut metric_cols: Vec<&str> = Vec::new();
    let mut lines = Vec::new();
    for (i, cell) in cells(&grid).into_iter().enumerate() {
        let mut v = base.clone();
        for ((name, _), val) in grid.iter().zip(&cell) {
            set_path(&mut v, name, val.clone())?;
        }
        let report = train_job(v, g, &g.out_dir.join(format!("cell-{i:03}")))?;
        if i == 0 {
            metric_cols = METRICS.iter().copied().filter(|m| report.aggregate.contains_key(*m)).collect();
            for m in &metric_cols {
                header.push(format!("{m}_mean"));
                header.push(format!("{m}_std"));
            }
        }
        let mut row: Vec<String> = cell.iter().map(|v| v.to_string()).collect();
        for m in &metric_cols {
            let a = report.aggregate[*m];
            row.push(a.mean.to_string());
            row.push(a.std.to_string());
        }
        if !g.quiet {
            eprintln!("cell {i}: {}", row.join(","));
        }
        lines.push(row.join(","));
    }
    let mut text = header.join(",") + "\n";
    for l in lines {
        text.push_str(&l);
        text.push('\n');
    }
    output::create_dir(&g.out_dir)?;
    output::write(&g.out_dir.join("grid.csv"), text)
}

fn select(paths: &[PathBuf], as_json: bool) -> CliResult<()> {
    let mut rows = Vec::new();
    for path in paths {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
        let v: Value = serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        let runs = v["runs"]
            .as_array()
            .filter(|r| !r.is_empty())
            .ok_or_else(|| CliError::data(format!("{}: no runs", path.display())))?;
        let l_sp: Vec<f64> = runs
            .iter()
            .map(|r| r["l_sp"].as_f64())
            .collect::<Option<_>>()
            .ok_or_else(|| CliError::data(format!("{}: runs lack l_sp; only cm and aecm reports can be selected from", path.display())))?;
        let i = l_sp
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .expect("non-empty");
        rows.push(json!({
            "report": path.display().to_string(),
            "selected_run": i,
            "seed": runs[i]["seed"],
            "l_sp": l_sp[i],
            "ari": runs[i]["ari"],
            "mean_ari": v["aggregate"]["ari"]["mean"],
            "best_ari": v["aggregate"]["ari"]["best"],
        }));
    }
    if as_json {
        println!("{}", Value::Array(rows));
        return Ok(());
    }
    let fmt = |v: &Value| v.as_f64().map_or("-".to_string(), |x| format!("{x:.4}"));
    for r in &rows {
        println!(
            "{}: selected run {} (seed {}, l_sp {}) ari {} | mean ari {} | best ari {}",
            r["report"].as_str().unwrap_or_default(),
            r["selected_run"],
            r["seed"],
            fmt(&r["l_sp"]),
            fmt(&r["ari"]),
            fmt(&r["mean_ari"]),
            fmt(&r["best_ari"])
        );
    }
    Ok(())
}

fn interpolate(model: &Path, k1: usize, k2: usize, steps: usize, out: &Path, width: Option<usize>) -> CliResult<()> {
    let (m, _) = load_model(model)?;
    let path = match &m {
        Model::Aecm(p) => aecm::interpolate(p, k1, k2, steps)?,
        Model::Cm(p) => {
            let k = p.k();
            if k1 >= k || k2 >= k {
                return Err(CliError::config(format!("centroid index out of range for K = {k}")));
            }
            if steps < 2 {
                return Err(CliError::config("interpolation needs at least 2 steps"));
            }
            let mu = extract_centroids(p);
            let (a, b) = (mu.row(k1), mu.row(k2));
            Matrix::from_fn(steps, p.d(), |i, j| {
                let t = i as f64 / (steps - 1) as f64;
                (1.0 - t) * a[j] + t * b[j]
            })
        }
    };
    let header: Vec<String> = (0..path.cols()).map(|j| format!("x{j}")).collect();
    output::write(out, output::matrix_csv(&header, &path))?;
    if let Some(w) = width.or_else(|| output::square_side(path.cols())) {
        output::write(&out.with_extension("pgm"), output::pgm(&path, w)?)?;
    }
    Ok(())
}
