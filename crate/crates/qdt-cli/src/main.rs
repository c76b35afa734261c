//! `qdt`: simulate, reconstruct and compare phase-sensitive detector POVMs.
//!
//! Configuration precedence, lowest first: the named preset (default
//! `desk`), then the JSON file given with `--config`, then individual flags.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use qdt_core::experiment::{self, Artifact, ExperimentConfig, Method, Sweep, SweepAxis};
use qdt_core::{metrics, probe, Execution, PovmSet, QdtError};

#[derive(Parser)]
#[command(
    name = "qdt",
    version,
    about = "Recursive tomography of phase-sensitive photodetectors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the ground-truth POVM and synthesise a click-count dataset.
    Simulate(CommonArgs),
    /// Reconstruct a POVM from a dataset (simulated on the fly if omitted).
    Reconstruct {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Run the pipeline over one swept parameter.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// gamma, m-p, trials, eta or reflectivity.
        #[arg(long)]
        axis: Option<String>,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
        /// Concurrent sweep points (0: all cores).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Check the jitter decay bound on the model's no-click element.
    JitterCheck {
        #[command(flatten)]
        common: CommonArgs,
        /// Jitter widths in degrees.
        #[arg(long, value_delimiter = ',', default_values_t = vec![5.0, 10.0, 20.0])]
        deltas: Vec<f64>,
    },
    /// Compare one outcome of two POVM files.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 0)]
        outcome: usize,
        #[arg(long)]
        l_max: Option<usize>,
        #[arg(long, env = "QDT_OUTPUT_DIR", default_value = ".")]
        out_dir: PathBuf,
    },
}

#[derive(Args, Clone)]
struct CommonArgs {
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, env = "QDT_OUTPUT_DIR", default_value = ".")]
    out_dir: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Shots per probe; 0 for exact probabilities.
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    l_max: Option<usize>,
    #[arg(long)]
    m_p: Option<usize>,
    #[arg(long)]
    max_photons: Option<f64>,
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    recon_dim: Option<usize>,
    #[arg(long)]
    reflectivity: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    lo_photons: Option<f64>,
    /// recursive, pfunction or full-joint.
    #[arg(long)]
    method: Option<String>,
    /// Run on the calling thread only.
    #[arg(long)]
    sequential: bool,
}

impl CommonArgs {
    fn exec(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }

    fn resolve(&self) -> Result<ExperimentConfig, QdtError> {
        let mut c = experiment::preset(self.preset.as_deref().unwrap_or("desk"))?;
        if let Some(path) = &self.config {
            let f = File::open(path)?;
            c = serde_json::from_reader(BufReader::new(f))
                .map_err(|e| QdtError::Parse(format!("{}: {e}", path.display())))?;
        }
        macro_rules! set {
            ($field:expr, $flag:expr) => {
                if let Some(v) = $flag {
                    $field = v;
                }
            };
        }
        set!(c.seed, self.seed);
        set!(c.trials, self.trials);
        set!(c.recon.gamma, self.gamma);
        set!(c.recon.l_max, self.l_max);
        set!(c.grid.phases, self.m_p);
        set!(c.grid.max_photons, self.max_photons);
        set!(c.grid.step, self.step);
        set!(c.detector.dim, self.dim);
        set!(c.detector.reflectivity, self.reflectivity);
        set!(c.detector.eta_apd, self.eta);
        set!(c.detector.lo_photons, self.lo_photons);
        if self.recon_dim.is_some() {
            c.recon_dim = self.recon_dim;
        }
        if let Some(m) = &self.method {
            c.method = m.parse::<Method>()?;
        }
        c.validate()?;
        Ok(c)
    }
}

fn exit_code(e: &QdtError) -> u8 {
    match e {
        QdtError::InvalidArgument(_)
        | QdtError::DimensionMismatch(_)
        | QdtError::Parse(_)
        | QdtError::Json(_)
        | QdtError::CapExceeded(_) => 2,
        QdtError::Solver(_)
        | QdtError::Infeasible { .. }
        | QdtError::MaxIterations { .. }
        | QdtError::InconsistentState { .. } => 3,
        QdtError::ModelInvalid(_) | QdtError::SeriesTruncation { .. } => 4,
        QdtError::Io(_) | QdtError::Csv(_) => 1,
    }
}

/// Exit code when a check ran but reported violations.
const CHECK_FAILED: u8 = 5;

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, QdtError> {
    std::fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json<T: serde::Serialize>(
    cfg: &ExperimentConfig,
    dir: &Path,
    name: &str,
    kind: &str,
    data: T,
) -> Result<(), QdtError> {
    let mut w = create(dir, name)?;
    Artifact::new(cfg, kind, data).write_json(&mut w)?;
    w.flush()?;
    Ok(())
}

fn read_povm(path: &Path) -> Result<PovmSet, QdtError> {
    let text = std::fs::read_to_string(path)?;
    if let Ok(a) = serde_json::from_str::<Artifact<PovmSet>>(&text) {
        return Ok(a.data);
    }
    serde_json::from_str::<PovmSet>(&text)
        .map_err(|e| QdtError::Parse(format!("{}: {e}", path.display())))
}

fn simulate(args: &CommonArgs) -> Result<u8, QdtError> {
    let cfg = args.resolve()?;
    let t = Instant::now();
    let sim = experiment::simulate(&cfg, args.exec())?;
    let hash = cfg.hash();
    let mut w = create(&args.out_dir, "dataset.csv")?;
    probe::write_dataset(&sim.dataset, Some(&hash), &mut w)?;
    w.flush()?;
    write_json(
        &cfg,
        &args.out_dir,
        "truth.json",
        "ground-truth-povm",
        &sim.truth,
    )?;
    write_json(&cfg, &args.out_dir, "config.json", "config", &cfg)?;
    let d = &sim.diagnostics;
    println!("config {hash} seed {}", cfg.seed);
    println!(
        "probes {} ({} magnitudes x {} phases), trials {}",
        sim.dataset.grid.n_probes(),
        sim.dataset.grid.m_a(),
        sim.dataset.grid.m_p(),
        sim.dataset.trials
    );
    println!(
        "max probe tail mass above d-1: {:.3e} (model), {:.3e} (reconstruction)",
        d.max_probe_tail_mass, d.max_probe_tail_mass_recon
    );
    println!(
        "no-click spectrum: [{:.6e}, {:.6e}]",
        d.truth_min_eigenvalue, d.truth_max_eigenvalue
    );
    println!("overall efficiency: {:.4}", d.overall_efficiency);
    eprintln!("simulate: {:.2}s", t.elapsed().as_secs_f64());
    Ok(0)
}

fn reconstruct(args: &CommonArgs, dataset: Option<&Path>) -> Result<u8, QdtError> {
    let cfg = args.resolve()?;
    let exec = args.exec();
    let t = Instant::now();
    let truth = experiment::ground_truth(&cfg)?;
    let ds = match dataset {
        Some(p) => {
            let (ds, header) = probe::read_dataset(BufReader::new(File::open(p)?))?;
            if header.config_hash.as_deref() != Some(cfg.hash().as_str()) {
                eprintln!("note: dataset was produced with a different config");
            }
            ds
        }
        None => experiment::simulate_with_truth(&cfg, &truth, exec)?.dataset,
    };
    let out = experiment::reconstruct(&cfg, &ds, Some(&truth), exec)?;
    if let Some(povm) = &out.povm {
        write_json(&cfg, &args.out_dir, "povm.json", "reconstructed-povm", povm)?;
    }
    write_json(
        &cfg,
        &args.out_dir,
        "report.json",
        "reconstruction-report",
        &out.method,
    )?;
    if let Some(c) = &out.comparison {
        write_json(&cfg, &args.out_dir, "comparison.json", "comparison", c)?;
        let mut w = create(&args.out_dir, "comparison.csv")?;
        c.write_csv(&mut w)?;
        w.flush()?;
        println!("config {} seed {}", cfg.hash(), cfg.seed);
        println!(
            "fidelity {:.4}%  relative error {:.4e}",
            100.0 * c.fidelity,
            c.relative_error
        );
    }
    if let experiment::MethodReport::Pfunction {
        elements,
        min_eigenvalue_hermitized,
        ..
    } = &out.method
    {
        let mut w = create(&args.out_dir, "pfunction_elements.csv")?;
        qdt_core::baseline::pfunction::write_element_errors(elements, &mut w)?;
        w.flush()?;
        println!("min eigenvalue of hermitized block {min_eigenvalue_hermitized:.4e}");
    }
    if let experiment::MethodReport::Recursive(rep) = &out.method {
        for d in &rep.diagonals {
            eprintln!("  l={}: {:.3}s", d.l, d.seconds);
        }
    }
    eprintln!("reconstruct: {:.2}s", t.elapsed().as_secs_f64());
    Ok(0)
}

fn sweep(
    args: &CommonArgs,
    axis: Option<&str>,
    values: &[f64],
    jobs: usize,
) -> Result<u8, QdtError> {
    let mut cfg = args.resolve()?;
    if let Some(a) = axis {
        let axis: SweepAxis = a.parse()?;
        let values = if values.is_empty() {
            cfg.sweep
                .as_ref()
                .map(|s| s.values.clone())
                .unwrap_or_default()
        } else {
            values.to_vec()
        };
        cfg.sweep = Some(Sweep { axis, values });
    } else if !values.is_empty() {
        let s = cfg.sweep.as_mut().ok_or_else(|| {
            QdtError::InvalidArgument("--values needs --axis or a sweep in the config".into())
        })?;
        s.values = values.to_vec();
    }
    cfg.validate()?;
    let t = Instant::now();
    let res = experiment::sweep(&cfg, jobs, args.exec())?;
    let mut w = create(&args.out_dir, "sweep.csv")?;
    res.write_csv(&cfg, &mut w)?;
    w.flush()?;
    println!("config {} seed {}", cfg.hash(), cfg.seed);
    print!("{}", res.summary());
    eprintln!("sweep: {:.2}s", t.elapsed().as_secs_f64());
    Ok(0)
}

fn jitter_check(args: &CommonArgs, deltas: &[f64]) -> Result<u8, QdtError> {
    let cfg = args.resolve()?;
    let checks = experiment::jitter_check(&cfg, deltas)?;
    write_json(&cfg, &args.out_dir, "jitter.json", "jitter-check", &checks)?;
    let mut ok = true;
    for c in &checks {
        let pass = c.report.passed();
        ok &= pass;
        println!(
            "delta {:>5.1} deg: {} ({} violations), w18/w0 = {:.4e}",
            c.delta_degrees,
            if pass {
                "bound holds"
            } else {
                "bound violated"
            },
            c.report.violations.len(),
            c.weight_ratio_l18
        );
    }
    Ok(if ok { 0 } else { CHECK_FAILED })
}

fn compare(
    a: &Path,
    b: &Path,
    outcome: usize,
    l_max: Option<usize>,
    out_dir: &Path,
) -> Result<u8, QdtError> {
    let (pa, pb) = (read_povm(a)?, read_povm(b)?);
    if outcome >= pa.len() || outcome >= pb.len() {
        return Err(QdtError::InvalidArgument(format!(
            "outcome {outcome} out of range"
        )));
    }
    let d = pa.dim().min(pb.dim());
    let oa = pa.outcomes[outcome].truncate(d);
    let ob = pb.outcomes[outcome].truncate(d);
    let report = metrics::compare(&oa, &ob, l_max.unwrap_or(d - 1).min(d - 1))?;
    let mut w = create(out_dir, "comparison.csv")?;
    report.write_csv(&mut w)?;
    w.flush()?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Simulate(c) => simulate(c),
        Command::Reconstruct { common, dataset } => reconstruct(common, dataset.as_deref()),
        Command::Sweep {
            common,
            axis,
            values,
            jobs,
        } => sweep(common, axis.as_deref(), values, *jobs),
        Command::JitterCheck { common, deltas } => jitter_check(common, deltas),
        Command::Compare {
            a,
            b,
            outcome,
            l_max,
            out_dir,
        } => compare(a, b, *outcome, *l_max, out_dir),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
