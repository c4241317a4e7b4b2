use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use mlkr::config::{parse_value, read_config_file};
use mlkr::run::{error_record, run, Provenance};
use mlkr::Error;

/// Classical and quantum simulations of two momentum-coupled linear kicked
/// rotors. Flags override values from `--config`.
#[derive(Parser, Debug)]
#[command(name = "mlkr", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Ensemble mean energy and final momentum histograms.
    Classical {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        ensemble: Option<u64>,
        #[arg(long)]
        bins: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        record_every: Option<u64>,
    },
    /// Stroboscopic (x1, p1) section for a few trajectories.
    Poincare {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        trajectories: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Largest Lyapunov exponent, optionally scanned over Ks at fixed k_p.
    Lyapunov {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        samples: Option<u64>,
        #[arg(long)]
        renorm_every: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "ks-values", value_delimiter = ',')]
        ks_values: Option<Vec<f64>>,
    },
    /// Quantum evolution from the zero-momentum state.
    Quantum {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        record_every: Option<u64>,
        /// Also write the final amplitudes.
        #[arg(long)]
        snapshot: bool,
    },
    /// Transport exponent and regime over a (K, k_p) grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: GridArgs,
        /// `MIN,MAX`: size each cell's grid from its K instead of `--grid`.
        #[arg(long = "auto-grid", value_delimiter = ',')]
        auto_grid: Option<Vec<u64>>,
        #[arg(long)]
        record_every: Option<u64>,
        #[arg(long = "k-values", value_delimiter = ',')]
        k_values: Option<Vec<f64>>,
        #[arg(long = "kp-values", value_delimiter = ',')]
        kp_values: Option<Vec<f64>>,
        #[arg(long = "k-range", value_delimiter = ',')]
        k_range: Option<Vec<f64>>,
        #[arg(long = "kp-range", value_delimiter = ',')]
        kp_range: Option<Vec<f64>>,
        #[arg(long)]
        resolution: Option<u64>,
        #[arg(long)]
        alpha1: Option<f64>,
        #[arg(long)]
        alpha2: Option<f64>,
    },
    /// Entanglement entropy between the rotors.
    Entangle {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        record_every: Option<u64>,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// JSON config file; the source of record in the manifest.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    n_kicks: Option<u64>,
}

#[derive(Args, Debug)]
struct ParamArgs {
    #[arg(long = "K")]
    k: Option<f64>,
    #[arg(long = "k-p")]
    k_p: Option<f64>,
    #[arg(long)]
    alpha1: Option<f64>,
    #[arg(long)]
    alpha2: Option<f64>,
    #[arg(long = "T")]
    period: Option<f64>,
    #[arg(long)]
    hbar: Option<f64>,
}

#[derive(Args, Debug)]
struct GridArgs {
    /// `N` for a square grid or `N1,N2`.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<u64>>,
    #[arg(long)]
    edge_limit: Option<f64>,
}

#[derive(Default)]
struct Overrides(Vec<(&'static str, Value)>);

impl Overrides {
    fn set<T: Into<Value>>(&mut self, key: &'static str, v: Option<T>) {
        if let Some(v) = v {
            self.0.push((key, v.into()));
        }
    }

    fn common(&mut self, c: &Common) {
        self.set("output_dir", c.output_dir.as_ref().map(|p| p.display().to_string()));
        self.set("n_kicks", c.n_kicks);
    }

    fn params(&mut self, p: &ParamArgs) {
        self.set("K", p.k);
        self.set("k_p", p.k_p);
        self.set("alpha1", p.alpha1);
        self.set("alpha2", p.alpha2);
        self.set("T", p.period);
        self.set("hbar", p.hbar);
    }

    fn grid(&mut self, g: &GridArgs) {
        self.set(
            "grid",
            g.grid.as_ref().map(|v| match v.as_slice() {
                [n] => json!(n),
                other => json!(other),
            }),
        );
        self.set("edge_limit", g.edge_limit);
    }
}

fn collect(cmd: &Command) -> (&'static str, &Common, Overrides) {
    let mut o = Overrides::default();
    let (mode, common) = match cmd {
        Command::Classical {
            common,
            params,
            ensemble,
            bins,
            seed,
            record_every,
        } => {
            o.params(params);
            o.set("ensemble", *ensemble);
            o.set("bins", *bins);
            o.set("seed", *seed);
            o.set("record_every", *record_every);
            ("classical", common)
        }
        Command::Poincare {
            common,
            params,
            trajectories,
            seed,
        } => {
            o.params(params);
            o.set("trajectories", *trajectories);
            o.set("seed", *seed);
            ("poincare", common)
        }
        Command::Lyapunov {
            common,
            params,
            samples,
            renorm_every,
            seed,
            ks_values,
        } => {
            o.params(params);
            o.set("samples", *samples);
            o.set("renorm_every", *renorm_every);
            o.set("seed", *seed);
            o.set("Ks_values", ks_values.clone());
            ("lyapunov", common)
        }
        Command::Quantum {
            common,
            params,
            grid,
            record_every,
            snapshot,
        } => {
            o.params(params);
            o.grid(grid);
            o.set("record_every", *record_every);
            o.set("snapshot", snapshot.then_some(true));
            ("quantum", common)
        }
        Command::Sweep {
            common,
            grid,
            auto_grid,
            record_every,
            k_values,
            kp_values,
            k_range,
            kp_range,
            resolution,
            alpha1,
            alpha2,
        } => {
            o.grid(grid);
            o.set("auto_grid", auto_grid.clone());
            o.set("record_every", *record_every);
            o.set("K_values", k_values.clone());
            o.set("kp_values", kp_values.clone());
            o.set("K_range", k_range.clone());
            o.set("kp_range", kp_range.clone());
            o.set("resolution", *resolution);
            o.set("alpha1", *alpha1);
            o.set("alpha2", *alpha2);
            ("sweep", common)
        }
        Command::Entangle {
            common,
            params,
            grid,
            record_every,
        } => {
            o.params(params);
            o.grid(grid);
            o.set("record_every", *record_every);
            ("entanglement", common)
        }
    };
    o.common(common);
    (mode, common, o)
}

fn merged_config(cmd: &Command) -> Result<(Value, Provenance), Error> {
    let (mode, common, overrides) = collect(cmd);
    let mut map = match &common.config {
        Some(path) => read_config_file(path)?,
        None => Map::new(),
    };
    if let Some(file_mode) = map.get("mode") {
        let same = file_mode
            .as_str()
            .is_some_and(|m| m == mode || (mode == "entanglement" && m == "entangle"));
        if !same {
            return Err(Error::Config {
                path: "mode".into(),
                msg: format!("config file says {file_mode} but the subcommand is `{mode}`"),
            });
        }
    }
    map.insert("mode".into(), mode.into());
    let mut keys = Vec::new();
    for (k, v) in overrides.0 {
        keys.push(k.to_string());
        map.insert(k.into(), v);
    }
    Ok((
        Value::Object(map),
        Provenance {
            config_file: common.config.clone(),
            overrides: keys,
        },
    ))
}

fn is_usage_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Config { .. } | Error::UnknownKeys(_) | Error::InvalidParam { .. } | Error::OutputExists(_)
    )
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = merged_config(&cli.command).and_then(|(value, provenance)| {
        let cfg = parse_value(&value)?;
        run(&cfg, &provenance)
    });
    match result {
        Ok(report) => {
            for c in report.invariants.iter().filter(|c| !c.ok) {
                log::warn!("invariant {} failed: {:e} > {:e}", c.name, c.value, c.limit);
            }
            log::info!(
                "wrote {} ({} files) in {:.2} s",
                report.output_dir.display(),
                report.files.len(),
                report.wall_time_s
            );
            println!(
                "{}",
                json!({"status": "ok", "output_dir": report.output_dir, "summary": report.summary})
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", error_record(&e));
            ExitCode::from(if is_usage_error(&e) { 2 } else { 1 })
        }
    }
}
