use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use wpb_core::bounds::{evaluate_bound, BoundInputs};
use wpb_core::bwsgd::{bwsgd_run, vi_reference, BwSgdConfig, ViReferenceConfig};
use wpb_core::geometry::{empirical_w1, rad_radius};
use wpb_core::gibbs::{gibbs_closed_form, ula_sample, GibbsPotential, UlaConfig};
use wpb_core::harness::{
    end_to_end_sgd_generalisation, sgd_convergence_experiment, validate_bound, ConvergenceConfig, EndToEndConfig,
    ExperimentConfig, GaussianSpec, LossSpec,
};
use wpb_core::loss::DataModel;
use wpb_core::{aux_stream, CompactClass, Error, SampleCloud};

#[derive(Parser)]
#[command(name = "wpb", version, about = "Wasserstein PAC-Bayes bounds, BW-SGD and validation campaigns")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

/// Flags shared by every subcommand.
#[derive(Args, Clone, Default)]
struct Common {
    /// JSON config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file (or stem for campaigns, which write `.json` and `.csv`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Gaussian tail radius R for the class (alpha, beta, M).
    Radius {
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long = "bigM")]
        big_m: Option<f64>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        d: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluates a bound and prints its report as JSON.
    Bound {
        name: String,
        #[command(flatten)]
        inputs: BoundFlags,
        #[command(flatten)]
        common: Common,
    },
    /// Runs BW-SGD and writes the trajectory as CSV.
    Bwsgd {
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long = "N")]
        n_iter: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long = "bigM")]
        big_m: Option<f64>,
        #[arg(long)]
        record_every: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Samples the Gibbs measure with ULA and writes the cloud as CSV.
    GibbsSample {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        step: Option<f64>,
        #[arg(long)]
        burn_in: Option<usize>,
        #[arg(long)]
        thinning: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Exact W1 between two cloud CSV files of equal size.
    EstimateW1 {
        a: PathBuf,
        b: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Bound-violation campaign.
    Validate {
        #[arg(long)]
        trials: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// End-to-end SGD generalisation pipeline.
    SgdGen {
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        delta: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// BW-SGD convergence curves on the quadratic problem.
    Convergence {
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        prior_variance: Option<f64>,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long = "N")]
        n_iter: Option<usize>,
        #[arg(long)]
        seeds: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
}

/// Bound inputs as flags; the names match the config keys.
#[derive(Args, Default)]
struct BoundFlags {
    #[arg(long = "K")]
    k: Option<f64>,
    #[arg(long = "L")]
    l: Option<f64>,
    #[arg(long = "D")]
    d_const: Option<f64>,
    #[arg(long = "D_ell")]
    d_ell: Option<f64>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long = "R")]
    r: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    w1: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long = "bigM")]
    big_m: Option<f64>,
    #[arg(long = "f_R")]
    f_r: Option<f64>,
    #[arg(long)]
    beta_m: Option<f64>,
    #[arg(long)]
    c_dp: Option<f64>,
    #[arg(long)]
    prior_strong_convexity: Option<f64>,
}

/// Gibbs potential `lambda R_S - log P` on a dataset drawn from `data` with
/// the auxiliary stream of the seed.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct PotentialSpec {
    loss: LossSpec,
    data: DataModel,
    d: usize,
    m: usize,
    lambda: f64,
    #[serde(default = "standard")]
    prior: GaussianSpec,
    #[serde(default)]
    scale_by_2k: bool,
}

fn standard() -> GaussianSpec {
    GaussianSpec { mean: None, variance: 1.0 }
}

impl PotentialSpec {
    fn build(&self, seed: u64) -> wpb_core::Result<GibbsPotential> {
        self.data.validate()?;
        let s = self.data.sample_dataset(self.m, &mut aux_stream(seed, 1))?;
        GibbsPotential::new(self.loss.build()?, s, self.prior.build(self.d)?, self.lambda, self.scale_by_2k)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RadiusCfg {
    alpha: f64,
    beta: f64,
    #[serde(rename = "bigM")]
    big_m: f64,
    m: usize,
    d: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BwsgdCfg {
    potential: PotentialSpec,
    eta: f64,
    #[serde(rename = "N")]
    n_iter: usize,
    /// Lower Hessian bound of the potential when absent.
    #[serde(default)]
    alpha: Option<f64>,
    #[serde(rename = "bigM")]
    big_m: f64,
    init: GaussianSpec,
    #[serde(default = "one")]
    record_every: usize,
    /// Adds the W2^2 distance of each iterate to the Gaussian minimiser.
    #[serde(default)]
    reference: bool,
    #[serde(default)]
    vi: ViReferenceConfig,
    #[serde(default)]
    seed: u64,
}

fn one() -> usize {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GibbsCfg {
    potential: PotentialSpec,
    ula: UlaConfig,
    #[serde(default)]
    seed: u64,
}

enum Failure {
    Config(String),
    Numeric(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numeric() {
            Failure::Numeric(e.to_string())
        } else {
            Failure::Config(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

type Outcome = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Numeric(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(2)
        }
    }
}

/// Config file as a JSON object, or an empty one.
fn base_config(common: &Common) -> std::result::Result<Map<String, Value>, Failure> {
    let Some(path) = &common.config else {
        return Ok(Map::new());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read config {}: {e}", path.display())))?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(Failure::Config(format!("config {} is not a JSON object", path.display()))),
        Err(e) => Err(Failure::Config(format!("config {}: {e}", path.display()))),
    }
}

/// Sets `path` (nested keys) to `v` when the flag was given.
fn set<T: Serialize>(obj: &mut Map<String, Value>, path: &[&str], v: Option<T>) {
    let Some(v) = v else { return };
    let (last, parents) = path.split_last().expect("non-empty key path");
    let mut cur = obj;
    for key in parents {
        let entry = cur.entry(key.to_string()).or_insert_with(|| Value::Object(Map::new()));
        if !entry.is_object() {
            *entry = Value::Object(Map::new());
        }
        cur = entry.as_object_mut().unwrap();
    }
    cur.insert(last.to_string(), serde_json::to_value(v).expect("flag values serialise"));
}

fn parse<T: DeserializeOwned>(obj: Map<String, Value>, what: &str) -> std::result::Result<T, Failure> {
    serde_json::from_value(Value::Object(obj)).map_err(|e| Failure::Config(format!("{what} config: {e}")))
}

fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> Outcome {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Config(e.to_string()))?;
    println!("{text}");
    if let Some(p) = out {
        write_file(p, |w| writeln!(w, "{text}").map_err(Error::from))?;
    }
    Ok(())
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> wpb_core::Result<()>) -> Outcome {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = BufWriter::new(File::create(path)?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Drops a bulky per-trial array from a summary printed to stdout.
fn without(value: impl Serialize, key: &str) -> Value {
    let mut v = serde_json::to_value(value).expect("reports serialise");
    if let Some(o) = v.as_object_mut() {
        o.remove(key);
    }
    v
}

fn read_cloud(path: &Path) -> std::result::Result<SampleCloud, Failure> {
    let f = File::open(path).map_err(|e| Failure::Config(format!("cannot open {}: {e}", path.display())))?;
    SampleCloud::read_csv(BufReader::new(f))
        .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn run(cmd: Cmd) -> Outcome {
    match cmd {
        Cmd::Radius { alpha, beta, big_m, m, d, common } => {
            let mut c = base_config(&common)?;
            set(&mut c, &["alpha"], alpha);
            set(&mut c, &["beta"], beta);
            set(&mut c, &["bigM"], big_m);
            set(&mut c, &["m"], m);
            set(&mut c, &["d"], d);
            let cfg: RadiusCfg = parse(c, "radius")?;
            let r = rad_radius(&CompactClass::new(cfg.alpha, cfg.beta, cfg.big_m)?, cfg.m, cfg.d)?;
            println!("{r}");
            if let Some(p) = &common.out {
                let v = serde_json::json!({"R": r, "alpha": cfg.alpha, "beta": cfg.beta, "bigM": cfg.big_m, "m": cfg.m, "d": cfg.d});
                write_file(p, |w| writeln!(w, "{v}").map_err(Error::from))?;
            }
            Ok(())
        }
        Cmd::Bound { name, inputs: f, common } => {
            let mut c = base_config(&common)?;
            set(&mut c, &["K"], f.k);
            set(&mut c, &["L"], f.l);
            set(&mut c, &["D"], f.d_const);
            set(&mut c, &["D_ell"], f.d_ell);
            set(&mut c, &["m"], f.m);
            set(&mut c, &["d"], f.d);
            set(&mut c, &["delta"], f.delta);
            set(&mut c, &["R"], f.r);
            set(&mut c, &["epsilon"], f.epsilon);
            set(&mut c, &["lambda"], f.lambda);
            set(&mut c, &["w1"], f.w1);
            set(&mut c, &["alpha"], f.alpha);
            set(&mut c, &["beta"], f.beta);
            set(&mut c, &["bigM"], f.big_m);
            set(&mut c, &["f_R"], f.f_r);
            set(&mut c, &["beta_m"], f.beta_m);
            set(&mut c, &["c_dp"], f.c_dp);
            set(&mut c, &["prior_strong_convexity"], f.prior_strong_convexity);
            let inputs: BoundInputs = parse(c, "bound")?;
            let report = evaluate_bound(&name, &inputs)?;
            emit_json(&report, common.out.as_deref())
        }
        Cmd::Bwsgd { eta, n_iter, alpha, big_m, record_every, common } => {
            let mut c = base_config(&common)?;
            set(&mut c, &["eta"], eta);
            set(&mut c, &["N"], n_iter);
            set(&mut c, &["alpha"], alpha);
            set(&mut c, &["bigM"], big_m);
            set(&mut c, &["record_every"], record_every);
            set(&mut c, &["seed"], common.seed);
            let cfg: BwsgdCfg = parse(c, "bwsgd")?;
            let gp = cfg.potential.build(cfg.seed)?;
            let alpha = match cfg.alpha {
                Some(a) => a,
                None => gp.hessian_bounds()?.lower,
            };
            let init = cfg.init.build(cfg.potential.d)?;
            let reference = if cfg.reference {
                Some(match gibbs_closed_form(&gp) {
                    Ok(q) => q,
                    Err(Error::Unsupported(_)) => vi_reference(&gp, &init, &cfg.vi)?,
                    Err(e) => return Err(e.into()),
                })
            } else {
                None
            };
            let mut sgd = BwSgdConfig::new(cfg.eta, cfg.n_iter, alpha, cfg.big_m, init, cfg.seed);
            sgd.record_every = cfg.record_every;
            let traj = bwsgd_run(&gp, &sgd, reference.as_ref())?;
            match &common.out {
                Some(p) => write_file(p, |w| traj.write_csv(w)),
                None => Ok(traj.write_csv(std::io::stdout().lock())?),
            }
        }
        Cmd::GibbsSample { n, step, burn_in, thinning, common } => {
            let mut c = base_config(&common)?;
            set(&mut c, &["ula", "n"], n);
            set(&mut c, &["ula", "step"], step);
            set(&mut c, &["ula", "burn_in"], burn_in);
            set(&mut c, &["ula", "thinning"], thinning);
            set(&mut c, &["seed"], common.seed);
            let cfg: GibbsCfg = parse(c, "gibbs-sample")?;
            let gp = cfg.potential.build(cfg.seed)?;
            let cloud = ula_sample(&gp, &cfg.ula, &mut aux_stream(cfg.seed, 3))?;
            match &common.out {
                Some(p) => write_file(p, |w| cloud.write_csv(w)),
                None => Ok(cloud.write_csv(std::io::stdout().lock())?),
            }
        }
        Cmd::EstimateW1 { a, b, common } => {
            let w1 = empirical_w1(&read_cloud(&a)?, &read_cloud(&b)?)?;
            println!("{w1}");
            if let Some(p) = &common.out {
                let v = serde_json::json!({"w1": w1, "a": a, "b": b});
                write_file(p, |w| writeln!(w, "{v}").map_err(Error::from))?;
            }
            Ok(())
        }
        Cmd::Validate { trials, common } => {
            let mut c = base_config(&common)?;
            set(&mut c, &["trials"], trials);
            set(&mut c, &["seed"], common.seed);
            set(&mut c, &["output"], common.out.clone());
            let cfg: ExperimentConfig = parse(c, "validate")?;
            let summary = validate_bound(&cfg)?;
            emit_json(&without(&summary, "records"), None)
        }
        Cmd::SgdGen { trials, delta, common } => {
            let mut c = base_config(&common)?;
            set(&mut c, &["trials"], trials);
            set(&mut c, &["delta"], delta);
            set(&mut c, &["seed"], common.seed);
            set(&mut c, &["output"], common.out.clone());
            let cfg: EndToEndConfig = parse(c, "sgd-gen")?;
            let report = end_to_end_sgd_generalisation(&cfg)?;
            emit_json(&without(&report, "trials_detail"), None)
        }
        Cmd::Convergence { d, lambda, prior_variance, eta, n_iter, seeds, common } => {
            let mut c = base_config(&common)?;
            set(&mut c, &["d"], d);
            set(&mut c, &["lambda"], lambda);
            set(&mut c, &["prior_variance"], prior_variance);
            set(&mut c, &["eta"], eta);
            set(&mut c, &["N"], n_iter);
            set(&mut c, &["seeds"], seeds);
            set(&mut c, &["seed"], common.seed);
            set(&mut c, &["output"], common.out.clone());
            let cfg: ConvergenceConfig = parse(c, "convergence")?;
            let report = sgd_convergence_experiment(&cfg)?;
            emit_json(&without(&report, "rows"), None)
        }
    }
}
