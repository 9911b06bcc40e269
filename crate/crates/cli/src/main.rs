use cdds_core::afdm::AfdmConfig;
use cdds_core::cdds::{check_non_overlap, overhead, plan_steps, DdProfile, OverheadParams, Scheme, SearchWindow};
use cdds_core::estimate::build_layout;
use cdds_core::frame::{FrameConfig, Waveform};
use cdds_core::harness::{diversity_report, run_ber_with_workers, SimConfig};
use cdds_core::otfs::{OtfsConfig, Pulse};
use cdds_core::Error;
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "cdds", version, about = "CDDS transmit-diversity simulator for AFDM and OTFS")]
struct Cli {
    /// Overrides (or supplies) `master_seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for Monte-Carlo runs (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a BER simulation and emit the curve as CSV.
    Simulate { config: PathBuf },
    /// Find a minimum-overhead non-overlapping CDDS plan for a DD profile.
    Plan(PlanArgs),
    /// Estimation overhead of one scheme, or a sweep comparing all of them.
    Overhead(OverheadArgs),
    /// Rank-criterion diversity report for a fixed-profile config.
    Analyze {
        config: PathBuf,
        /// Random pairs for alphabets too large to enumerate.
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
    },
    /// Print the pilot/guard/data role of every frame position.
    Layout(LayoutArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum WaveformArg {
    Afdm,
    Otfs,
}

impl From<WaveformArg> for Waveform {
    fn from(w: WaveformArg) -> Self {
        match w {
            WaveformArg::Afdm => Waveform::Afdm,
            WaveformArg::Otfs => Waveform::Otfs,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Siso,
    Mimo,
    Cdd,
    Dodd,
    Cdds,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Siso => Scheme::Siso,
            SchemeArg::Mimo => Scheme::Mimo,
            SchemeArg::Cdd => Scheme::Cdd,
            SchemeArg::Dodd => Scheme::Dodd,
            SchemeArg::Cdds => Scheme::Cdds,
        }
    }
}

#[derive(Args)]
struct PlanArgs {
    /// Paths as `k,l` pairs separated by `;`, e.g. `0,0;-1,1`.
    #[arg(allow_hyphen_values = true)]
    profile: String,
    #[arg(long, default_value_t = 2)]
    nt: usize,
    /// `k_lo:k_hi:l_hi`; defaults to ±(k_max+N_t) and 0..=N_t(l_max+1).
    #[arg(long, allow_hyphen_values = true)]
    window: Option<String>,
    #[arg(long, value_enum, default_value = "afdm")]
    waveform: WaveformArg,
    /// Frame size for the `N_t·P ≤ N` check.
    #[arg(long, default_value_t = 1024)]
    frame_size: usize,
}

#[derive(Args)]
struct ExtentArgs {
    #[arg(long, default_value_t = 4)]
    lmax: u64,
    #[arg(long, default_value_t = 3)]
    kmax: u64,
    #[arg(long, default_value_t = 1)]
    nt: u64,
    /// CDDS delay extent `l̃_max`.
    #[arg(long, default_value_t = 1)]
    lt: u64,
    /// CDDS Doppler extent `k̃_max`.
    #[arg(long, default_value_t = 1)]
    kt: u64,
}

impl ExtentArgs {
    fn params(&self, nt: u64) -> OverheadParams {
        OverheadParams::new(self.lmax, self.kmax, nt).with_cdds(self.lt, self.kt)
    }
}

#[derive(Args)]
struct OverheadArgs {
    /// Emit a CSV over `N_t = 1..=nt-max` for every waveform and scheme.
    #[arg(long)]
    sweep: bool,
    #[arg(long, default_value_t = 8)]
    nt_max: u64,
    #[arg(long, value_enum, default_value = "afdm")]
    waveform: WaveformArg,
    #[arg(long, value_enum, default_value = "cdds")]
    scheme: SchemeArg,
    #[command(flatten)]
    ext: ExtentArgs,
}

#[derive(Args)]
struct LayoutArgs {
    #[arg(long, value_enum, default_value = "afdm")]
    waveform: WaveformArg,
    /// AFDM frame size.
    #[arg(long, default_value_t = 64)]
    n: usize,
    /// OTFS Doppler bins.
    #[arg(long, default_value_t = 16)]
    doppler_bins: usize,
    /// OTFS delay bins.
    #[arg(long, default_value_t = 16)]
    delay_bins: usize,
    #[arg(long, value_enum, default_value = "siso")]
    scheme: SchemeArg,
    #[command(flatten)]
    ext: ExtentArgs,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Config(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn read(path: &PathBuf) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn load_config(path: &PathBuf, seed: Option<u64>) -> Result<SimConfig, Failure> {
    let text = read(path)?;
    let text = match seed {
        None => text,
        Some(s) => {
            let mut v: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| Failure::Config(format!("invalid configuration: {e}")))?;
            let obj = v
                .as_object_mut()
                .ok_or_else(|| Failure::Config("invalid configuration: top level must be an object".into()))?;
            obj.insert("master_seed".into(), s.into());
            v.to_string()
        }
    };
    Ok(SimConfig::from_json(&text)?)
}

fn parse_profile(s: &str) -> Result<DdProfile, Failure> {
    let bad = || Failure::Config(format!("invalid configuration: profile '{s}' must look like '0,0;-1,1'"));
    let paths = s
        .split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let (k, l) = p.split_once(',').ok_or_else(bad)?;
            Ok((k.trim().parse().map_err(|_| bad())?, l.trim().parse().map_err(|_| bad())?))
        })
        .collect::<Result<Vec<(i64, i64)>, Failure>>()?;
    Ok(DdProfile::new(paths)?)
}

fn parse_window(s: &str, frame_size: usize) -> Result<SearchWindow, Failure> {
    let bad = || Failure::Config(format!("invalid configuration: window '{s}' must look like '-3:3:2'"));
    let parts: Vec<i64> = s.split(':').map(|p| p.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?;
    match parts[..] {
        [k_lo, k_hi, l_hi] => Ok(SearchWindow { k_lo, k_hi, l_hi, frame_size: Some(frame_size) }),
        _ => Err(bad()),
    }
}

fn run(cli: &Cli) -> Result<String, Failure> {
    let workers = cli.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    match &cli.cmd {
        Command::Simulate { config } => {
            let cfg = load_config(config, cli.seed)?;
            Ok(run_ber_with_workers(&cfg, workers)?.to_csv())
        }
        Command::Analyze { config, samples } => {
            let cfg = load_config(config, cli.seed)?;
            let report = diversity_report(&cfg, *samples)?;
            let target = cfg.n_t() * cfg.channel.num_paths();
            let argmin: Vec<String> = report.argmin_pair.iter().map(|z| format!("{}{:+}j", z.re, z.im)).collect();
            Ok(format!(
                "theta_min,full_diversity,pairs_checked\n{},{},{}\nargmin_difference: {}\n",
                report.theta_min,
                target,
                report.pairs_checked,
                argmin.join(" ")
            ))
        }
        Command::Plan(a) => {
            let profile = parse_profile(&a.profile)?;
            let window = match &a.window {
                Some(w) => parse_window(w, a.frame_size)?,
                None => {
                    let delay_bins = match a.waveform {
                        WaveformArg::Afdm => a.frame_size,
                        WaveformArg::Otfs => (profile.l_max() as usize + 1) * (a.nt + 1),
                    };
                    SearchWindow::default_for(&profile, a.nt, delay_bins, a.frame_size)
                }
            };
            let planned = plan_steps(&profile, a.nt, &window, a.waveform.into())?;
            let out = serde_json::json!({
                "plan": planned.plan,
                "k_tilde_max": planned.k_tilde_max,
                "l_tilde_max": planned.l_tilde_max,
                "union_size": planned.union_size,
                "non_overlapping": check_non_overlap(&profile, &planned.plan, a.frame_size),
                "overhead": planned.overhead,
            });
            Ok(format!("{}\n", serde_json::to_string_pretty(&out).expect("plan serializes")))
        }
        Command::Overhead(a) => {
            if !a.sweep {
                return Ok(format!("{}\n", overhead(a.waveform.into(), a.scheme.into(), &a.ext.params(a.ext.nt))?));
            }
            let schemes = [Scheme::Siso, Scheme::Mimo, Scheme::Cdd, Scheme::Dodd, Scheme::Cdds];
            let mut header = vec!["n_t".to_string()];
            for w in [Waveform::Afdm, Waveform::Otfs] {
                for s in schemes {
                    header.push(format!("{w}_{}", format!("{s:?}").to_lowercase()));
                }
            }
            let mut csv = header.join(",") + "\n";
            for nt in 1..=a.nt_max {
                let mut row = vec![nt.to_string()];
                for w in [Waveform::Afdm, Waveform::Otfs] {
                    for s in schemes {
                        row.push(overhead(w, s, &a.ext.params(nt))?.to_string());
                    }
                }
                csv += &(row.join(",") + "\n");
            }
            Ok(csv)
        }
        Command::Layout(a) => {
            let e = &a.ext;
            let frame = match a.waveform {
                WaveformArg::Afdm => FrameConfig::Afdm(AfdmConfig::optimal(a.n, e.kmax as i64, e.kt as i64, e.lmax as usize)?),
                WaveformArg::Otfs => FrameConfig::Otfs(OtfsConfig::new(a.doppler_bins, a.delay_bins, Pulse::Rectangular)?),
            };
            let layout = build_layout(&frame, a.scheme.into(), &e.params(e.nt))?;
            Ok(layout.to_text())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(text) => {
            if let Some(path) = &cli.out {
                if let Err(e) = std::fs::write(path, text) {
                    eprintln!("error: {}: {e}", path.display());
                    return ExitCode::from(1);
                }
            } else {
                print!("{text}");
            }
            ExitCode::SUCCESS
        }
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
