//! The `fig` command-line front end.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::cache::{cache_dir, cached_distance, read_cache, write_cache, distance_key};
use crate::config::{PipelineConfig, META_PREFIX};
use crate::data::{DistanceMatrix, Method, TimeSeries};
use crate::distance::euclidean_distance_matrix;
use crate::embed::embed;
use crate::error::{FigError, Result};
use crate::eval::{
    bench_input, benchmark_distance_stage, mantel, noise_sweep, summarize, window_sweep, RAW_LABEL,
};
use crate::io::{
    embedding_csv, grid_csv, grid_summary_csv, load_timeseries, records_csv, sidecar_text, summary_csv,
    theta_csv, timeseries_csv, timings_csv, write_text,
};
use crate::simulate::{simulate_sphere_walk, simulate_staged_surrogate};
use crate::svg::{heatmap_svg, line_chart_svg, scatter_svg, Series};

pub const THREADS_ENV: &str = "FIG_THREADS";

#[derive(Parser, Debug)]
#[command(name = "fig", version, about = "Functional information geometry distances and embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Pipeline settings shared by every subcommand. Flags override the config
/// file, and `--set` overrides both.
#[derive(Args, Debug, Default)]
struct ConfigArgs {
    /// Config file of `key = value` lines (an output sidecar also works).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Extra `key=value` override; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long, global = true)]
    method: Option<String>,
    #[arg(long, global = true)]
    l1: Option<usize>,
    #[arg(long, global = true)]
    l2: Option<usize>,
    #[arg(long, global = true)]
    stride: Option<usize>,
    /// Basis functions per input dimension.
    #[arg(long = "basis", global = true)]
    basis_b: Option<usize>,
    /// Retained components, or `full`.
    #[arg(long, global = true)]
    k: Option<String>,
    #[arg(long, global = true)]
    normalization: Option<String>,
    #[arg(long, global = true)]
    bins: Option<usize>,
    #[arg(long, global = true)]
    knn: Option<usize>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Diffusion time, or `auto`.
    #[arg(long, global = true)]
    t: Option<String>,
    /// Embedding dimension.
    #[arg(long, global = true)]
    r: Option<usize>,
    /// Comma-separated seeds.
    #[arg(long, global = true)]
    seeds: Option<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        let flags: [(&str, Option<String>); 13] = [
            ("method", self.method.clone()),
            ("windows.l1", self.l1.map(|v| v.to_string())),
            ("windows.l2", self.l2.map(|v| v.to_string())),
            ("windows.stride", self.stride.map(|v| v.to_string())),
            ("basis.b", self.basis_b.map(|v| v.to_string())),
            ("fpca.k", self.k.clone()),
            ("fpca.normalization", self.normalization.clone()),
            ("dig.bins", self.bins.map(|v| v.to_string())),
            ("embed.knn", self.knn.map(|v| v.to_string())),
            ("embed.alpha", self.alpha.map(|v| v.to_string())),
            ("embed.t", self.t.clone()),
            ("embed.r", self.r.map(|v| v.to_string())),
            ("seeds", self.seeds.clone()),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, &v)?;
            }
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| FigError::InvalidConfig(format!("--set expects KEY=VALUE, got '{kv}'")))?;
            cfg.set(k.trim(), v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate the sphere walk (or the staged surrogate) and write CSVs.
    Simulate {
        #[arg(long)]
        n: Option<usize>,
        /// Observation noise standard deviation.
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        sigma_step: Option<f64>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// `sphere` or `surrogate`.
        #[arg(long, default_value = "sphere")]
        kind: String,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Compute (or load from cache) a distance matrix.
    Distance {
        input: PathBuf,
        /// Also copy the matrix to this file.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Distances followed by the diffusion-potential embedding.
    Embed {
        input: PathBuf,
        #[arg(long, default_value = "embedding.csv")]
        out: PathBuf,
        /// Also render a scatter plot.
        #[arg(long)]
        svg: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Mantel correlation between two distance caches or coordinate CSVs.
    Mantel {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 0)]
        n_perm: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Mantel agreement with the true angles across noise levels.
    SweepNoise {
        #[arg(long, default_value = "noise-sweep")]
        out_dir: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Pairwise Mantel agreement between embeddings across window lengths.
    SweepWindow {
        #[arg(long, default_value = "window-sweep")]
        out_dir: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Time the distance stage of FIG and DIG.
    Bench {
        /// Input CSV; synthetic data of `bench.n` × `bench.d` when omitted.
        input: Option<PathBuf>,
        #[arg(long)]
        repetitions: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Render an embedding CSV as an SVG scatter plot.
    Plot {
        input: PathBuf,
        #[arg(long, default_value = "embedding.svg")]
        out: PathBuf,
    },
}

fn sidecar(cfg: &PipelineConfig, extra: &[(&str, String)]) -> String {
    let mut meta = BTreeMap::new();
    meta.insert(format!("{META_PREFIX}config_hash"), cfg.hash());
    for (k, v) in extra {
        meta.insert(format!("{META_PREFIX}{k}"), v.clone());
    }
    format!("{}{}", cfg.to_text(), sidecar_text(&meta))
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

/// A distance matrix from a `.figd` cache or the Euclidean distances between
/// the numeric rows of a CSV.
fn load_distances(path: &Path) -> Result<DistanceMatrix> {
    if path.extension().is_some_and(|e| e == "figd") {
        Ok(read_cache(path)?.0)
    } else {
        Ok(euclidean_distance_matrix(&load_timeseries(path)?))
    }
}

fn labels_for_plot(x: &TimeSeries) -> Option<Vec<String>> {
    x.labels().filter(|l| l.iter().any(|s| !s.is_empty())).map(|l| l.to_vec())
}

fn run_command(cmd: Command) -> Result<()> {
    match cmd {
        Command::Simulate { n, sigma, sigma_step, seed, kind, out_dir, cfg } => {
            let mut cfg = cfg.resolve()?;
            if let Some(n) = n {
                cfg.sim_n = n;
            }
            if let Some(s) = sigma {
                cfg.sim_sigma_noise = s;
            }
            if let Some(s) = sigma_step {
                cfg.sim_sigma_step = s;
            }
            cfg.seeds = vec![seed];
            cfg.validate()?;
            let x_path = out_dir.join("X.csv");
            match kind.as_str() {
                "sphere" => {
                    let w = simulate_sphere_walk(cfg.sim_n, cfg.sim_sigma_step, cfg.sim_sigma_noise, seed)?;
                    write_text(&x_path, &timeseries_csv(&w.observations()))?;
                    write_text(&out_dir.join("theta.csv"), &theta_csv(&w.theta))?;
                }
                "surrogate" => {
                    let s = simulate_staged_surrogate(&cfg.surrogate(), seed)?;
                    write_text(&x_path, &timeseries_csv(&s.series))?;
                }
                other => return Err(FigError::InvalidConfig(format!("unknown simulation kind '{other}'"))),
            }
            let meta = sidecar(&cfg, &[("command", "simulate".into()), ("kind", kind), ("seed", seed.to_string())]);
            write_text(&sidecar_path(&x_path), &meta)?;
            println!("wrote {}", x_path.display());
        }
        Command::Distance { input, out, cfg } => {
            let cfg = cfg.resolve()?;
            let x = load_timeseries(&input)?;
            let dir = cache_dir(&cfg);
            let (d, hit) = cached_distance(&x, &cfg, cfg.method, &dir)?;
            println!("{} distances for {} points ({})", cfg.method, d.n(), if hit { "cache hit" } else { "computed" });
            if let Some(out) = out {
                write_cache(&out, &d, &distance_key(&x, &cfg, cfg.method))?;
                let meta = sidecar(&cfg, &[("command", "distance".into()), ("input", input.display().to_string())]);
                write_text(&sidecar_path(&out), &meta)?;
            }
        }
        Command::Embed { input, out, svg, cfg } => {
            let cfg = cfg.resolve()?;
            let x = load_timeseries(&input)?;
            let (d, _) = cached_distance(&x, &cfg, cfg.method, &cache_dir(&cfg))?;
            let key = hex::encode(distance_key(&x, &cfg, cfg.method));
            let e = embed(&d, &cfg.embed)?;
            let labels = labels_for_plot(&x).map(|l| {
                if cfg.stride > 1 {
                    l.into_iter().step_by(cfg.stride).collect()
                } else {
                    l
                }
            });
            write_text(&out, &embedding_csv(&e, labels.as_deref()))?;
            let mut extra: Vec<(&str, String)> =
                vec![("command", "embed".into()), ("input", input.display().to_string()), ("distance_key", key)];
            let emb_meta: Vec<(String, String)> = e.metadata.iter().map(|(k, v)| (format!("embedding.{k}"), v.clone())).collect();
            extra.extend(emb_meta.iter().map(|(k, v)| (k.as_str(), v.clone())));
            extra.push(("final_stress", e.final_stress().to_string()));
            write_text(&sidecar_path(&out), &sidecar(&cfg, &extra))?;
            if let Some(svg) = svg {
                write_text(&svg, &scatter_svg(&e.coords, labels.as_deref(), &format!("{} embedding", cfg.method))?)?;
            }
            println!("wrote {} ({} points, t = {})", out.display(), e.n(), e.metadata["t"]);
        }
        Command::Mantel { a, b, n_perm, seed } => {
            let res = mantel(&load_distances(&a)?, &load_distances(&b)?, n_perm, seed)?;
            match res.p_value {
                Some(p) => println!("r={:?} p={:?} n_perm={}", res.r, p, res.n_perm),
                None => println!("r={:?}", res.r),
            }
        }
        Command::SweepNoise { out_dir, cfg } => {
            let cfg = cfg.resolve()?;
            let start = Instant::now();
            let records = noise_sweep(&cfg.sweep_sigmas, &cfg.seeds, &cfg)?;
            let summary = summarize(&records);
            write_text(&out_dir.join("noise_results.csv"), &records_csv(&records))?;
            write_text(&out_dir.join("noise_summary.csv"), &summary_csv(&summary))?;
            write_text(&out_dir.join("noise_timings.csv"), &timings_csv(&records))?;
            let series: Vec<Series> = [RAW_LABEL, "fig", "dig"]
                .iter()
                .map(|m| Series {
                    name: m.to_string(),
                    points: summary.iter().filter(|r| r.method == *m).map(|r| (r.setting, r.mean, r.std)).collect(),
                })
                .collect();
            let chart = line_chart_svg("Mantel correlation with the true angles", "noise sigma", "Mantel r", &series);
            write_text(&out_dir.join("noise.svg"), &chart)?;
            write_text(&out_dir.join("noise.meta"), &sidecar(&cfg, &[("command", "sweep-noise".into())]))?;
            for r in &summary {
                println!("{:<6} sigma={:<6} mean={:.4} std={:.4}", r.method, r.setting, r.mean, r.std);
            }
            println!("finished in {:.1} s; results in {}", start.elapsed().as_secs_f64(), out_dir.display());
        }
        Command::SweepWindow { out_dir, cfg } => {
            let cfg = cfg.resolve()?;
            let grids = window_sweep(&cfg.sweep_l2_values, &cfg.seeds, &cfg.surrogate(), &cfg)?;
            write_text(&out_dir.join("window_results.csv"), &grid_csv(&grids))?;
            write_text(&out_dir.join("window_summary.csv"), &grid_summary_csv(&grids))?;
            let ticks: Vec<String> = cfg.sweep_l2_values.iter().map(|v| v.to_string()).collect();
            for g in &grids {
                let title = format!("{} pairwise Mantel across window lengths", g.method);
                write_text(&out_dir.join(format!("window_{}.svg", g.method)), &heatmap_svg(&title, &ticks, &g.m))?;
                println!("{:<4} mean={:.4} std={:.4}", g.method, g.summary_mean, g.summary_std);
            }
            write_text(&out_dir.join("window.meta"), &sidecar(&cfg, &[("command", "sweep-window".into())]))?;
        }
        Command::Bench { input, repetitions, out, cfg } => {
            let mut cfg = cfg.resolve()?;
            if let Some(r) = repetitions {
                cfg.bench_repetitions = r;
            }
            let x = match &input {
                Some(p) => load_timeseries(p)?,
                None => bench_input(cfg.bench_n, cfg.bench_d, cfg.seeds.first().copied().unwrap_or(0))?,
            };
            let res = benchmark_distance_stage(&x, &cfg, &[Method::Fig, Method::Dig], cfg.bench_repetitions)?;
            let mut csv = String::from("method,repetition,seconds\n");
            for b in &res {
                for (k, s) in b.seconds.iter().enumerate() {
                    csv.push_str(&format!("{},{},{}\n", b.method, k + 1, s));
                }
                println!("{:<4} n={} median={:.3} s runs={:?}", b.method, b.n, b.median(), b.seconds);
            }
            if let Some(out) = out {
                write_text(&out, &csv)?;
                write_text(&sidecar_path(&out), &sidecar(&cfg, &[("command", "bench".into())]))?;
            }
        }
        Command::Plot { input, out } => {
            let x = load_timeseries(&input)?;
            let labels = labels_for_plot(&x);
            write_text(&out, &scatter_svg(x.data(), labels.as_deref(), "embedding")?)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn configure_threads() {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        match v.trim().parse::<usize>() {
            Ok(0) => {}
            Ok(n) => {
                // fails harmlessly when a pool already exists
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            Err(_) => log::warn!("ignoring {THREADS_ENV}={v}: not a number"),
        }
    }
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code: 0 on success, 1 for invalid data,
/// configuration or usage, 2 for anything else.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    configure_threads();
    match std::panic::catch_unwind(move || run_command(cli.command)) {
        Ok(Ok(())) => 0,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
        Err(_) => 2,
    }
}
