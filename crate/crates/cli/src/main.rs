//! `qcarleson`: run the pipeline stages from a JSON config.
//!
//! Precedence: built-in defaults, then `--config`, then flags.
//! Exit codes: 0 ok, 1 a check failed, 2 usage or input error.

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use qcarleson_core::decompose::{decompose, DecomposeParams, DecompositionReport, Universe};
use qcarleson_core::kernel::{sample_csv, telescoping_error};
use qcarleson_core::linefield::{masses, LineField, MassConfig, Occupancy};
use qcarleson_core::operator::{quad_carleson_direct, SampledFunction, TileOperator};
use qcarleson_core::render::{decomposition_groups, key_group, render_groups};
use qcarleson_core::report::{csv_header, json_artifact, VERSION};
use qcarleson_core::tile::{Line, Tile, TileKey};
use qcarleson_core::verify::{run_suite, SUITES};
use qcarleson_core::{decompose::stratum_index, Config};
use rand::SeedableRng;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "qcarleson", version, about = "Tiles, tree selection and estimate checks for the quadratic Carleson operator")]
struct Cli {
    /// JSON config; missing fields take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `out_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FieldKind {
    /// Piecewise-constant random lines.
    Random,
    /// A tree planted under the unit top.
    Planted,
    /// Every fiber far above the window: all `E(P)` empty.
    Empty,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Kernel telescoping check with a sample CSV.
    KernelCheck,
    /// Decompose the window universe for a line field.
    Decompose {
        /// Line field JSON; generated from the seed when absent.
        #[arg(long)]
        field: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "random")]
        kind: FieldKind,
    },
    /// Evaluate the linearized operator and the grid maximal operator on a
    /// seeded random function.
    Evaluate {
        #[arg(long)]
        field: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "random")]
        kind: FieldKind,
    },
    /// Masses and strata of the window universe.
    Mass {
        #[arg(long)]
        field: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "random")]
        kind: FieldKind,
    },
    /// Run a named verification suite.
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
    },
    /// SVG of a decomposition report or a JSON list of tile keys.
    Render {
        input: PathBuf,
    },
}

/// Every error is a usage or input problem and exits with 2; failed checks
/// are reported through `Ok(false)`.
fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow!(msg.into())
}

fn load_config(cli: &Cli) -> Result<Config> {
    let mut cfg = match &cli.config {
        Some(p) => {
            let s = std::fs::read_to_string(p).map_err(|e| usage(format!("cannot read {}: {e}", p.display())))?;
            let v: serde_json::Value = serde_json::from_str(&s).map_err(|e| usage(format!("malformed config: {e}")))?;
            serde_json::from_value(v).map_err(|e| usage(format!("malformed config: {e}")))?
        }
        None => Config::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out_dir = o.display().to_string();
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

struct Out {
    dir: PathBuf,
    hash: String,
}

impl Out {
    fn new(cfg: &Config) -> Result<Self> {
        let dir = PathBuf::from(&cfg.out_dir);
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { dir, hash: cfg.hash() })
    }

    fn write(&self, name: &str, body: &str) -> Result<PathBuf> {
        let p = self.dir.join(name);
        std::fs::write(&p, body).with_context(|| format!("writing {}", p.display()))?;
        Ok(p)
    }

    fn json(&self, name: &str, kind: &str, payload: &impl serde::Serialize) -> Result<PathBuf> {
        let v = json_artifact(&self.hash, kind, payload);
        self.write(name, &(serde_json::to_string_pretty(&v)? + "\n"))
    }

    fn csv(&self, name: &str, body: &str) -> Result<PathBuf> {
        self.write(name, &(csv_header(&self.hash) + body))
    }

    fn text(&self, name: &str, body: &str) -> Result<PathBuf> {
        self.write(name, &format!("# qcarleson {VERSION} config {}\n{body}", self.hash))
    }
}

fn load_field(cfg: &Config, path: &Option<PathBuf>, kind: FieldKind) -> Result<LineField> {
    if let Some(p) = path {
        let s = std::fs::read_to_string(p).map_err(|e| usage(format!("cannot read {}: {e}", p.display())))?;
        return serde_json::from_str(&s).map_err(|e| usage(format!("malformed line field: {e}")));
    }
    let res = 1usize << (cfg.k_max + 2);
    let far = Line::new(10.0 * (cfg.window[1].abs() + cfg.window[0].abs() + 1.0) * (1 << cfg.k_max) as f64, 0.0);
    Ok(match kind {
        FieldKind::Random => LineField::piecewise_random(res, 1 << cfg.k_max.min(6), cfg.window(), cfg.seed),
        FieldKind::Planted => LineField::adversarial(res, &Tile::new(0, 0, 0, 0), 1.0, far, cfg.seed),
        FieldKind::Empty => LineField::constant(res, far),
    })
}

fn universe(cfg: &Config) -> Universe {
    Universe::new(&cfg.universe_scales(), cfg.window())
}

fn cmd_kernel_check(cfg: &Config, out: &Out) -> Result<bool> {
    if cfg.telescoping_k_max == 0 {
        eprintln!("warning: telescoping_k_max = 0 covers only |y| ≥ 8·2⁰; the identity is checked where the scales cover");
    }
    let k = cfg.telescoping_k_max;
    let err = telescoping_error(k, 10_000);
    let passed = err < 1e-8;
    out.csv("kernel.csv", &sample_csv(0, k, -8.0, 8.0, 1601))?;
    out.json("kernel-check.json", "kernel-check", &serde_json::json!({ "k_max": k, "points": 10_000, "max_error": err, "passed": passed }))?;
    println!("telescoping k_max={k}: max error {err:.3e} ({})", if passed { "pass" } else { "FAIL" });
    Ok(passed)
}

fn cmd_decompose(cfg: &Config, out: &Out, field: &LineField) -> Result<bool> {
    let u = universe(cfg);
    let report = decompose(&u, field, DecomposeParams::from_config(cfg));
    out.json("decomposition.json", "decomposition", &report)?;
    out.csv("decomposition.csv", &report.summary_csv())?;
    out.write("decomposition.svg", &render_groups(&decomposition_groups(&report), cfg.window(), &out.hash))?;
    let trees: usize = report.forests().map(|f| f.trees.len()).sum();
    println!(
        "{} tiles, {} strata, {} trees, conservation missing={} duplicates={}, validators {}",
        u.len(),
        report.strata.len(),
        trees,
        report.conservation.missing,
        report.conservation.duplicates,
        if report.validation.passed() { "pass" } else { "FAIL" }
    );
    Ok(report.validation.passed() && report.conservation.missing == 0 && report.conservation.duplicates == 0)
}

fn cmd_evaluate(cfg: &Config, out: &Out, field: &LineField) -> Result<bool> {
    let op = TileOperator::new(field, cfg.n_x, cfg.k_max)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
    let f = SampledFunction::random(cfg.n_x, &mut rng);
    let lin = op.linearized_direct(&f);
    let max = quad_carleson_direct(&f, &cfg.a_grid(), &cfg.b_grid(), cfg.k_max);
    let mut s = String::from("x,re_f,im_f,re_Tlf,im_Tlf,maxTf\n");
    for j in 0..cfg.n_x {
        let _ = writeln!(
            s,
            "{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e}",
            f.x(j),
            f.values[j].re,
            f.values[j].im,
            lin.values[j].re,
            lin.values[j].im,
            max[j]
        );
    }
    out.csv("evaluate.csv", &s)?;
    let ratio = lin.norm2() / f.norm2();
    println!("‖T_l f‖/‖f‖ = {ratio:.4}, max over grid ‖Tf‖/‖f‖ = {:.4}", (max.iter().map(|v| v * v).sum::<f64>() / cfg.n_x as f64).sqrt() / f.norm2());
    Ok(true)
}

fn cmd_mass(cfg: &Config, out: &Out, field: &LineField) -> Result<bool> {
    let u = universe(cfg);
    let occ = Occupancy::build(field, u.max_scale());
    let m = masses(u.tiles(), &occ, &MassConfig { n: cfg.mass_n, tol: cfg.mass_tol });
    let mut s = String::from("scale,t,a,w,density,mass,stratum\n");
    for (p, a) in u.tiles().iter().zip(&m) {
        let k = p.key();
        let n = stratum_index(*a).map_or(String::new(), |n| n.to_string());
        let _ = writeln!(s, "{},{},{},{},{:.10e},{:.10e},{n}", k.scale, k.t, k.a, k.w, occ.measure_e(p) / p.time.length(), a);
    }
    out.csv("mass.csv", &s)?;
    println!("{} tiles, {} with positive mass", u.len(), m.iter().filter(|&&a| a > 0.0).count());
    Ok(true)
}

fn cmd_verify(cfg: &Config, out: &Out, suite: &str) -> Result<bool> {
    let Some(result) = run_suite(suite, cfg) else {
        return Err(usage(format!("unknown suite '{suite}'; available: {}", SUITES.join(", "))));
    };
    let mut summary = String::new();
    let mut passed = true;
    for r in &result.reports {
        out.json(&format!("{}.json", r.id), "estimate-report", r)?;
        summary.push_str(&r.summary());
        passed &= r.passed;
    }
    for (name, csv) in &result.files {
        out.csv(name, csv)?;
    }
    out.text("summary.txt", &summary)?;
    print!("{summary}");
    Ok(passed)
}

fn cmd_render(cfg: &Config, out: &Out, input: &Path) -> Result<bool> {
    let s = std::fs::read_to_string(input).map_err(|e| usage(format!("cannot read {}: {e}", input.display())))?;
    let v: serde_json::Value = serde_json::from_str(&s).map_err(|e| usage(format!("malformed input: {e}")))?;
    let payload = v.get("payload").cloned().unwrap_or(v);
    let groups = if payload.get("assignment").is_some() {
        let r: DecompositionReport = serde_json::from_value(payload).map_err(|e| usage(format!("malformed report: {e}")))?;
        decomposition_groups(&r)
    } else {
        let keys: Vec<TileKey> = serde_json::from_value(payload).map_err(|e| usage(format!("expected a report or a list of tile keys: {e}")))?;
        vec![key_group("tiles", &keys)]
    };
    let name = input.file_stem().map_or("render".into(), |s| s.to_string_lossy().into_owned());
    let p = out.write(&format!("{name}.svg"), &render_groups(&groups, cfg.window(), &out.hash))?;
    println!("wrote {}", p.display());
    Ok(true)
}

fn run(cli: &Cli) -> Result<bool> {
    let cfg = load_config(cli)?;
    let out = Out::new(&cfg)?;
    match &cli.cmd {
        Command::KernelCheck => cmd_kernel_check(&cfg, &out),
        Command::Decompose { field, kind } => cmd_decompose(&cfg, &out, &load_field(&cfg, field, *kind)?),
        Command::Evaluate { field, kind } => cmd_evaluate(&cfg, &out, &load_field(&cfg, field, *kind)?),
        Command::Mass { field, kind } => cmd_mass(&cfg, &out, &load_field(&cfg, field, *kind)?),
        Command::Verify { suite } => cmd_verify(&cfg, &out, suite),
        Command::Render { input } => cmd_render(&cfg, &out, input),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
