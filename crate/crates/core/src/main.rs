use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cauchy_euler::diagnostics::{
    clean_window_fit, default_delta_window, fit_analyticity_delta, fit_log_linear,
    radius_estimators, vorticity_spectrum,
};
use cauchy_euler::runner::io::{read_field, Table};
use cauchy_euler::runner::{compare_dirs, run, RunConfig};
use cauchy_euler::{Error, Result, Spectral};

#[derive(Parser)]
#[command(
    name = "cauchy-euler",
    version,
    about = "2D Euler solver with Lagrangian time-Taylor stepping"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a flow and write its artifacts.
    Run(RunArgs),
    /// Compare the vorticity fields of two run directories.
    Compare {
        run_a: PathBuf,
        run_b: PathBuf,
        #[arg(long)]
        output_dir: PathBuf,
    },
    /// Fit the radius of convergence of a coefficient-norm table.
    Radius {
        /// CSV with a column of norms indexed by order (e.g. norms_*.csv).
        norms: PathBuf,
        #[arg(long, default_value = "lagrangian")]
        column: String,
        /// Explicit fit window; the clean window is detected otherwise.
        #[arg(long, requires = "s_max")]
        s_min: Option<usize>,
        #[arg(long, requires = "s_min")]
        s_max: Option<usize>,
        #[arg(long)]
        output_dir: PathBuf,
    },
    /// Enstrophy spectrum and analyticity-strip fit of a field file.
    Spectrum {
        field: PathBuf,
        #[arg(long)]
        output_dir: PathBuf,
    },
}

/// Flags override the values read from `--config`.
#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    output_dir: PathBuf,
    /// CL, RK2, RK4 or ET.
    #[arg(long)]
    method: Option<String>,
    /// Taylor order, or "auto" for CL.
    #[arg(long)]
    order: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Fixed step (RK/ET) or step cap (CL).
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    /// four_mode, ab, random or file:PATH.
    #[arg(long)]
    initial: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated times at which fields are written.
    #[arg(long)]
    output_times: Option<String>,
    #[arg(long)]
    fields_cadence: Option<usize>,
    #[arg(long)]
    spectra_cadence: Option<usize>,
    #[arg(long)]
    norms_cadence: Option<usize>,
    #[arg(long)]
    conservation_cadence: Option<usize>,
    #[arg(long)]
    checkpoint_cadence: Option<usize>,
    #[arg(long)]
    radius_cadence: Option<usize>,
    #[arg(long)]
    radius_depth: Option<usize>,
    #[arg(long)]
    max_halvings: Option<usize>,
    /// Checkpoint to resume from.
    #[arg(long)]
    restart: Option<PathBuf>,
}

fn text<T: ToString>(v: Option<T>) -> Option<String> {
    v.map(|v| v.to_string())
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig> {
        let mut pairs = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
                RunConfig::parse_text(&text)?
            }
            None => BTreeMap::new(),
        };
        let mut set = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                pairs.insert(k.to_string(), v);
            }
        };
        set("method", self.method.clone());
        set("order", self.order.clone());
        set("n", text(self.n));
        set("epsilon", text(self.epsilon));
        set("dt", text(self.dt));
        set("t_end", text(self.t_end));
        set("initial", self.initial.clone());
        set("seed", text(self.seed));
        set("output_times", self.output_times.clone());
        set("fields_cadence", text(self.fields_cadence));
        set("spectra_cadence", text(self.spectra_cadence));
        set("norms_cadence", text(self.norms_cadence));
        set("conservation_cadence", text(self.conservation_cadence));
        set("checkpoint_cadence", text(self.checkpoint_cadence));
        set("radius_cadence", text(self.radius_cadence));
        set("radius_depth", text(self.radius_depth));
        set("max_halvings", text(self.max_halvings));
        set(
            "restart",
            self.restart.as_ref().map(|p| p.display().to_string()),
        );
        RunConfig::from_pairs(&pairs)
    }
}

fn run_command(args: &RunArgs) -> Result<()> {
    let cfg = args.config()?;
    let art = run(&cfg, Some(&args.output_dir))?;
    println!(
        "{} steps to t = {}; artifacts in {}",
        art.step_count(),
        art.final_state.t,
        args.output_dir.display()
    );
    Ok(())
}

fn radius_command(
    norms: &Path,
    column: &str,
    window: Option<(usize, usize)>,
    out: &Path,
) -> Result<()> {
    let table = Table::read(norms)?;
    let values = table.f64_column(column)?;
    let (fit, transition) = match window {
        Some(w) => (fit_log_linear(&values, w)?, None),
        None => clean_window_fit(&values)?,
    };
    let clean = &values[..fit.window.1];
    let est = radius_estimators(clean)?;
    fs::create_dir_all(out)?;
    let mut t = Table::new(&[
        "radius",
        "alpha",
        "beta",
        "log_gamma",
        "s_min",
        "s_max",
        "transition",
        "hadamard",
        "ratio",
    ]);
    t.push(vec![
        fit.radius.to_string(),
        fit.alpha.to_string(),
        fit.beta.to_string(),
        fit.log_gamma.to_string(),
        fit.window.0.to_string(),
        fit.window.1.to_string(),
        transition
            .map(|s| s.to_string())
            .unwrap_or_else(|| "none".into()),
        est.hadamard.to_string(),
        est.ratio.to_string(),
    ]);
    t.write(&out.join("radius_fit.csv"))?;
    let mut ds = Table::new(&["inv_s", "ratio"]);
    for (x, y) in &est.domb_sykes {
        ds.push(vec![x.to_string(), y.to_string()]);
    }
    ds.write(&out.join("domb_sykes.csv"))?;
    println!(
        "R = {} (window {}..={})",
        fit.radius, fit.window.0, fit.window.1
    );
    Ok(())
}

fn spectrum_command(field: &Path, out: &Path) -> Result<()> {
    let (g, t) = read_field(field)?;
    let sp = Spectral::new(g.n())?;
    let omega = sp.forward(&g)?;
    let spec = vorticity_spectrum(&sp, &omega)?;
    let window = default_delta_window(&sp, &spec);
    fs::create_dir_all(out)?;
    let mut text = format!("# t={t}\n");
    text.push_str(&spec.to_csv());
    match fit_analyticity_delta(&spec, window) {
        Ok(fitted) => {
            let delta = fitted.delta.unwrap_or(f64::NAN);
            text.push_str(&format!(
                "# delta={delta} exponent={} truncation_estimate={}\n",
                fitted.exponent.unwrap_or(f64::NAN),
                fitted.truncation_estimate(sp.kmax()).unwrap_or(f64::NAN)
            ));
            println!("delta = {delta}");
        }
        Err(e) => println!("no delta fit: {e}"),
    }
    fs::write(out.join("spectrum.csv"), text)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => run_command(args),
        Command::Compare {
            run_a,
            run_b,
            output_dir,
        } => compare_dirs(run_a, run_b).and_then(|t| {
            fs::create_dir_all(output_dir)?;
            t.write(&output_dir.join("compare.csv"))?;
            print!("{}", t.to_csv());
            Ok(())
        }),
        Command::Radius {
            norms,
            column,
            s_min,
            s_max,
            output_dir,
        } => radius_command(norms, column, s_min.zip(*s_max), output_dir),
        Command::Spectrum { field, output_dir } => spectrum_command(field, output_dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
