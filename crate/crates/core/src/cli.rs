//! The `delay-attractor` command-line driver.
//!
//! Every subcommand writes its artifacts plus a `manifest.json` into the output
//! directory. Exit codes: 0 all enabled checks pass, 1 validation failure,
//! 2 falsified check, 3 divergence guard.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::bounds::{absorbing_radius, bound_at, optimize_bound_with, BoundReport};
use crate::config::{sha256_hex, RunConfig};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::harness::{
    absorbing_experiment, contraction_experiment, dimension_estimate, random_segment, stream_rng,
    AbsorbingReport,
};
use crate::integrator::{Segment, Semiflow};
use crate::model::validate;
use crate::spectral::build_spectral_data;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_FALSIFIED: i32 = 2;
pub const EXIT_DIVERGENCE: i32 = 3;

/// Stream family used for the `simulate` initial history.
const SIMULATE_STREAM_OFFSET: u64 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "delay-attractor",
    version,
    about = "Nonlocal delayed reaction-diffusion laboratory"
)]
pub struct Cli {
    /// Cap on worker threads (default: one per core)
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evolve one trajectory and write its norm log and final state
    Simulate(RunArgs),
    /// Dirichlet spectrum and dominant characteristic roots
    Spectrum(RunArgs),
    /// Absorbing radius, squeezing rates, contraction factor and dimension bound
    Bounds(RunArgs),
    /// Absorbing-set and squeezing-envelope experiments
    Verify(RunArgs),
    /// Correlation-dimension estimate compared with the bound
    Dims(RunArgs),
    /// Re-run a subcommand from its manifest and compare output hashes
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML config file (defaults apply when omitted)
    #[arg(short, long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Dotted-key override, repeatable (e.g. --set model.sigma=0.3)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,

    /// Output directory (overrides output.dir)
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Manifest written by a previous run
    pub manifest: PathBuf,

    /// Output directory for the re-run (default: <manifest dir>/replay)
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputHash {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config_hash: String,
    /// Effective configuration after overrides.
    pub config: String,
    pub exit_code: i32,
    pub outputs: Vec<OutputHash>,
}

/// Collects artifacts written into one output directory.
struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write_with(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut BufWriter<File>) -> Result<()>,
    ) -> Result<()> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let mut w = BufWriter::new(File::create(&path)?);
        f(&mut w)?;
        w.flush()?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        self.write_with(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)
                .map_err(|e| Error::Format(e.to_string()))?;
            writeln!(w)?;
            Ok(())
        })
    }

    fn hashes(&self) -> Result<Vec<OutputHash>> {
        self.files
            .iter()
            .map(|name| {
                Ok(OutputHash {
                    path: name.clone(),
                    sha256: sha256_hex(&fs::read(self.dir.join(name))?),
                })
            })
            .collect()
    }
}

pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Divergence { .. } => EXIT_DIVERGENCE,
        _ => EXIT_VALIDATION,
    }
}

fn load_config(args: &RunArgs) -> Result<RunConfig> {
    let text = match &args.config {
        Some(p) => fs::read_to_string(p)?,
        None => String::new(),
    };
    let (mut cfg, _) = RunConfig::from_toml_str(&text, &args.set)?;
    if let Some(out) = &args.out {
        cfg.output.dir = out.to_string_lossy().into_owned();
    }
    Ok(cfg)
}

/// Parses arguments from the process and runs; returns the exit code.
pub fn main_entry() -> i32 {
    run(Cli::parse())
}

pub fn run(cli: Cli) -> i32 {
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("warning: could not size thread pool: {e}");
        }
    }
    let result = match &cli.command {
        Command::Replay(args) => replay(args),
        Command::Simulate(a)
        | Command::Spectrum(a)
        | Command::Bounds(a)
        | Command::Verify(a)
        | Command::Dims(a) => load_config(a).and_then(|cfg| {
            let dir = PathBuf::from(&cfg.output.dir);
            execute(command_name(&cli.command), &cfg, &dir).map(|m| m.exit_code)
        }),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Simulate(_) => "simulate",
        Command::Spectrum(_) => "spectrum",
        Command::Bounds(_) => "bounds",
        Command::Verify(_) => "verify",
        Command::Dims(_) => "dims",
        Command::Replay(_) => "replay",
    }
}

/// Runs one subcommand into `dir` and writes its manifest.
pub fn execute(command: &str, cfg: &RunConfig, dir: &Path) -> Result<Manifest> {
    let mut out = Outputs::new(dir)?;
    let code = match command {
        "simulate" => simulate(cfg, &mut out)?,
        "spectrum" => spectrum(cfg, &mut out)?,
        "bounds" => bounds(cfg, &mut out)?,
        "verify" => verify(cfg, &mut out)?,
        "dims" => dims(cfg, &mut out)?,
        other => return Err(Error::Config(format!("unknown subcommand `{other}`"))),
    };
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        seed: cfg.seed,
        config_hash: cfg.hash()?,
        config: cfg.to_toml()?,
        exit_code: code,
        outputs: out.hashes()?,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(dir.join("manifest.json"), text + "\n")?;
    Ok(manifest)
}

#[derive(Debug, Serialize)]
pub struct ReplayDiff {
    pub path: String,
    pub expected: String,
    pub actual: Option<String>,
}

/// Re-runs the manifest's subcommand and lists outputs whose hashes differ.
pub fn replay_manifest(manifest: &Manifest, dir: &Path) -> Result<(Manifest, Vec<ReplayDiff>)> {
    let (cfg, _) = RunConfig::from_toml_str(&manifest.config, &[])?;
    if cfg.hash()? != manifest.config_hash {
        return Err(Error::Config(
            "embedded config does not match its hash".into(),
        ));
    }
    let fresh = execute(&manifest.command, &cfg, dir)?;
    let diffs = manifest
        .outputs
        .iter()
        .filter_map(|o| {
            let actual = fresh
                .outputs
                .iter()
                .find(|f| f.path == o.path)
                .map(|f| f.sha256.clone());
            (actual.as_deref() != Some(o.sha256.as_str())).then(|| ReplayDiff {
                path: o.path.clone(),
                expected: o.sha256.clone(),
                actual,
            })
        })
        .collect();
    Ok((fresh, diffs))
}

fn replay(args: &ReplayArgs) -> Result<i32> {
    let text = fs::read_to_string(&args.manifest)?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| Error::Format(e.to_string()))?;
    let dir = match &args.out {
        Some(d) => d.clone(),
        None => args
            .manifest
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join("replay"),
    };
    let (fresh, diffs) = replay_manifest(&manifest, &dir)?;
    for d in &diffs {
        eprintln!(
            "mismatch {}: expected {} got {}",
            d.path,
            d.expected,
            d.actual.as_deref().unwrap_or("<missing>")
        );
    }
    if !diffs.is_empty() || fresh.outputs.len() != manifest.outputs.len() {
        return Ok(EXIT_FALSIFIED);
    }
    println!("replay identical: {} outputs", fresh.outputs.len());
    Ok(fresh.exit_code)
}

fn simulate(cfg: &RunConfig, out: &mut Outputs) -> Result<i32> {
    let params = cfg.params()?;
    let report = validate(&params)?;
    let flow = Semiflow::new(params.clone(), cfg.integrator.n_tau)?;
    let grid = params.grid();
    let init = &cfg.initial;
    let phi = match init.kind {
        crate::config::InitialKind::Constant => Segment::constant(
            Field::constant(grid, init.value),
            cfg.integrator.n_tau,
            params.tau,
        )?,
        crate::config::InitialKind::Random => {
            let mut rng = stream_rng(cfg.seed.wrapping_add(SIMULATE_STREAM_OFFSET), 0);
            random_segment(
                flow.engine(),
                flow.n_tau(),
                params.tau,
                init.norm,
                &init.segment_spec(),
                &mut rng,
            )?
        }
    };
    let traj = flow.evolve(&phi, cfg.integrator.t_final)?;
    out.write_with("norms.csv", |w| traj.write_norms_csv(w))?;
    out.write_with("final_state.csv", |w| traj.state().write_csv(w))?;
    out.write_with("final_segment.bin", |w| traj.segment().write_binary(w))?;
    out.json(
        "simulate.json",
        &json!({
            "validation": report,
            "absorbing_radius": flow.absorbing_radius(),
            "dt": flow.dt(),
            "steps": traj.steps(),
            "t_final": traj.time(),
            "initial_norm": phi.norm(),
            "final_segment_norm": traj.segment_norm(),
        }),
    )?;
    Ok(EXIT_PASS)
}

fn spectrum(cfg: &RunConfig, out: &mut Outputs) -> Result<i32> {
    let params = cfg.params()?;
    let s = &cfg.spectral;
    let table = build_spectral_data(&params, s.cut, s.m_max, s.form())?;
    out.write_with("spectrum.csv", |w| table.write_csv(w))?;
    out.json("spectrum.json", &table)?;
    Ok(EXIT_PASS)
}

#[derive(Debug, Serialize)]
struct BoundsSummary {
    validation: crate::model::ValidationReport,
    absorbing_radius: Option<f64>,
    at_config: BoundReport,
    optimum: BoundReport,
}

fn bound_pair(cfg: &RunConfig) -> Result<BoundsSummary> {
    let params = cfg.params()?;
    let validation = validate(&params)?;
    let form = cfg.spectral.form();
    let m_max = cfg.spectral.m_max.max(cfg.bounds.m);
    let table = build_spectral_data(&params, 1, m_max, form)?;
    let at_config = bound_at(
        &params,
        &table,
        cfg.bounds.m,
        cfg.bounds.alpha,
        cfg.bounds.t_star,
    )?;
    let optimum = optimize_bound_with(&params, &table, &cfg.bounds.options(form))?;
    Ok(BoundsSummary {
        validation,
        absorbing_radius: absorbing_radius(&params).ok(),
        at_config,
        optimum,
    })
}

fn bounds(cfg: &RunConfig, out: &mut Outputs) -> Result<i32> {
    let summary = bound_pair(cfg)?;
    out.json("bounds.json", &summary)?;
    if let Some(param) = &cfg.bounds.sweep.param {
        let base = toml::Table::try_from(cfg).map_err(|e| Error::Config(e.to_string()))?;
        let mut rows = Vec::new();
        for &v in &cfg.bounds.sweep.values {
            let mut table = base.clone();
            crate::config::apply_override(&mut table, &format!("{param}={v:?}"))?;
            let point: RunConfig = table
                .try_into()
                .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
            rows.push((v, bound_pair(&point)?));
        }
        out.write_with("sweep.csv", |w| {
            writeln!(
                w,
                "{param},absorbing_radius,zeta,dim_bound,feasible,opt_m,opt_alpha,opt_zeta,opt_dim_bound,opt_feasible"
            )?;
            let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
            for (v, s) in &rows {
                writeln!(
                    w,
                    "{v},{},{},{},{},{},{},{},{},{}",
                    opt(s.absorbing_radius),
                    s.at_config.zeta,
                    opt(s.at_config.dim_bound),
                    s.at_config.feasible,
                    s.optimum.m,
                    s.optimum.alpha,
                    s.optimum.zeta,
                    opt(s.optimum.dim_bound),
                    s.optimum.feasible
                )?;
            }
            Ok(())
        })?;
    }
    Ok(EXIT_PASS)
}

fn write_absorbing(out: &mut Outputs, prefix: &str, report: &AbsorbingReport) -> Result<()> {
    out.write_with(&format!("{prefix}_norms.csv"), |w| {
        writeln!(w, "member,t,segment_norm,state_norm")?;
        for (i, hist) in report.histories.iter().enumerate() {
            for r in hist {
                writeln!(w, "{i},{},{},{}", r.t, r.segment_norm, r.state_norm)?;
            }
        }
        Ok(())
    })?;
    out.json(&format!("{prefix}.json"), report)
}

fn verify(cfg: &RunConfig, out: &mut Outputs) -> Result<i32> {
    let params = cfg.params()?;
    let validation = validate(&params)?;
    if cfg.verify.absorbing && !validation.absorbing_ok {
        out.json(
            "verify.json",
            &json!({
                "validation": validation,
                "absorbing_ok": false,
                "passed": false,
                "reason": "sigma*exp(mu*tau) >= mu; absorbing check needs a dissipative configuration",
            }),
        )?;
        return Ok(EXIT_VALIDATION);
    }
    let flow = Semiflow::new(params.clone(), cfg.integrator.n_tau)?;
    let mut passed = true;
    let mut summary = serde_json::Map::new();
    summary.insert("validation".into(), json!(validation));

    if cfg.verify.absorbing {
        let report = absorbing_experiment(&flow, &cfg.absorbing_options())?;
        passed &= report.passed;
        write_absorbing(out, "absorbing", &report)?;
        summary.insert(
            "absorbing".into(),
            json!({
                "passed": report.passed,
                "radius": report.radius,
                "max_entry_time": report.max_entry_time,
                "all_entered": report.all_entered,
                "none_exited": report.none_exited,
                "gronwall_ok": report.gronwall_ok,
            }),
        );
        if cfg.verify.l_doubling {
            let mut wide = cfg.clone();
            wide.grid.half_length *= 2.0;
            wide.grid.points *= 2;
            wide.model.trunc_radius = Some(params.trunc_radius);
            let wide_flow = Semiflow::new(wide.params()?, wide.integrator.n_tau)?;
            let wide_report = absorbing_experiment(&wide_flow, &wide.absorbing_options())?;
            write_absorbing(out, "absorbing_l2x", &wide_report)?;
            let final_max =
                |r: &AbsorbingReport| r.members.iter().map(|m| m.final_norm).fold(0.0, f64::max);
            summary.insert(
                "l_doubling".into(),
                json!({
                    "gated": false,
                    "passed": wide_report.passed,
                    "max_entry_time": wide_report.max_entry_time,
                    "max_final_norm": final_max(&wide_report),
                    "base_max_final_norm": final_max(&report),
                }),
            );
        }
    }

    if cfg.verify.contraction {
        let form = cfg.spectral.form();
        let m_max = cfg.spectral.m_max.max(cfg.bounds.m);
        let table = build_spectral_data(&params, 1, m_max, form)?;
        let bound = bound_at(
            &params,
            &table,
            cfg.bounds.m,
            cfg.bounds.alpha,
            cfg.bounds.t_star,
        )?;
        let report = contraction_experiment(&flow, &table, &bound, &cfg.contraction_options())?;
        passed &= report.passed;
        for (i, log) in report.logs.iter().enumerate() {
            out.write_with(&format!("pairs/pair_{i:03}.csv"), |w| log.write_csv(w))?;
        }
        out.json("contraction.json", &report)?;
        summary.insert(
            "contraction".into(),
            json!({
                "passed": report.passed,
                "zeta_theory": report.zeta_theory,
                "max_zeta_eff": report.max_zeta_eff,
                "max_prefactor": report.max_c,
                "zeta_ok": report.zeta_ok,
                "envelopes_ok": report.envelopes_ok,
            }),
        );
    }
    summary.insert("passed".into(), json!(passed));
    out.json("verify.json", &summary)?;
    Ok(if passed { EXIT_PASS } else { EXIT_FALSIFIED })
}

fn dims(cfg: &RunConfig, out: &mut Outputs) -> Result<i32> {
    let params = cfg.params()?;
    let summary = bound_pair(cfg)?;
    let flow = Semiflow::new(params, cfg.integrator.n_tau)?;
    let report = dimension_estimate(&flow, &cfg.dimension_options(), summary.optimum.dim_bound)?;
    out.write_with("dims_points.csv", |w| {
        let k = report.points.first().map_or(0, Vec::len);
        let header: Vec<String> = (1..=k).map(|j| format!("c{j}")).collect();
        writeln!(w, "{}", header.join(","))?;
        for p in &report.points {
            let row: Vec<String> = p.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    })?;
    out.json("dims.json", &report)?;
    Ok(if report.passed {
        EXIT_PASS
    } else {
        EXIT_FALSIFIED
    })
}
