//! Command-line front end for `stl-grid-miner`.
//!
//! Exit codes are shared by every subcommand: 0 on success (or SAT), 1 on a
//! negative result (UNSAT, or mining stopped by the oracle budget), 2 on
//! usage or data errors.

mod config;

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use stl_grid_miner::attack::{generate_dataset, parse_profiles, EveningPeakDay};
use stl_grid_miner::classifier::{evaluate, train, ClassifierConfig, ClassifierModel, Metrics};
use stl_grid_miner::rng::SplitMix64;
use stl_grid_miner::stl::{eval_bool, eval_robust, parse};
use stl_grid_miner::synth::{
    check_monotone, learn_region, LearnConfig, Orientation, ParamSpec, ParametricFormula,
    QuorumOracle, DEFAULT_MAX_ORACLE_CALLS,
};
use stl_grid_miner::trace::{parse_csv, CsvSchema, LabeledDataset, SAMPLES_PER_DAY};

pub use config::{merge_config, parse_config};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

/// Tail-energy template used when `--template` is not given.
pub const DEFAULT_TEMPLATE: &str = "On[p1,48] Int x < p2";

#[derive(Debug, Parser)]
#[command(
    name = "stl-grid-miner",
    version,
    about = "Mine parametric STL validity domains from smart-meter traces and classify attacks",
    args_override_self = true
)]
pub struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Seed for every random choice of the run.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Flat `key = value` file supplying defaults for any flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// CSV column holding the samples.
    #[arg(long, global = true, default_value = "value")]
    value_col: String,
    /// CSV column holding class labels (default: `label` when present).
    #[arg(long, global = true)]
    label_col: Option<String>,
    /// CSV column grouping rows into traces (default: `group` when present,
    /// otherwise consecutive chunks of 48 rows).
    #[arg(long, global = true)]
    group_col: Option<String>,
    /// Output file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TemplateArgs {
    /// Parametric formula over the signal `x`.
    #[arg(long, default_value = DEFAULT_TEMPLATE)]
    template: String,
    /// Parameter declaration `name:lower:upper[:inc|dec]`, once per
    /// parameter. Defaults to `p1:0:48` and `p2:0:60` for the default template.
    #[arg(long = "param", value_name = "SPEC")]
    params: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate a ground formula on every trace of a CSV file.
    Monitor {
        formula: String,
        input: PathBuf,
        /// Evaluation time.
        #[arg(long, default_value_t = 0.0)]
        time: f64,
    },
    /// Learn the validity domain of a template over a set of traces.
    Mine {
        /// Trace CSV (omit with --synthetic).
        input: Option<PathBuf>,
        /// Use the built-in evening-peak day as the only trace.
        #[arg(long)]
        synthetic: bool,
        /// Only use traces with this class name.
        #[arg(long)]
        class: Option<String>,
        #[command(flatten)]
        template: TemplateArgs,
        /// Fraction of traces that must satisfy a valuation.
        #[arg(long, default_value_t = 1.0)]
        theta: f64,
        /// Stop once unknown volume is at most this fraction of the domain.
        #[arg(long, default_value_t = 0.01)]
        eps: f64,
        /// Diagonal search tolerance, as a fraction of the box diagonal.
        #[arg(long, default_value_t = 0.01)]
        delta: f64,
        #[arg(long, default_value_t = DEFAULT_MAX_ORACLE_CALLS)]
        max_calls: u64,
        /// Also export an N x N grid of G/R/U labels (2 parameters only).
        #[arg(long, value_name = "N")]
        grid: Option<usize>,
        /// Grid destination (default: next to --out, else stdout).
        #[arg(long)]
        grid_out: Option<PathBuf>,
        /// Sample N parameter pairs to check the declared orientations first.
        #[arg(long, value_name = "N")]
        check_monotone: Option<usize>,
    },
    /// Generate a labeled dataset of normal and attacked traces.
    Generate {
        /// Baseline trace CSV.
        #[arg(long, conflicts_with = "synthetic")]
        baseline: Option<PathBuf>,
        /// Use seeded households built from the evening-peak day.
        #[arg(long)]
        synthetic: bool,
        /// JSON array of attack profiles.
        #[arg(long)]
        profiles: PathBuf,
        #[arg(long)]
        per_class: usize,
        /// Synthetic households to cycle through (default: per-class count).
        #[arg(long)]
        households: Option<usize>,
        /// Relative variation between synthetic households.
        #[arg(long, default_value_t = 0.1)]
        spread: f64,
    },
    /// Train a nearest-centroid model on a labeled CSV.
    Train {
        input: PathBuf,
        #[command(flatten)]
        template: TemplateArgs,
        #[arg(long, default_value_t = 8)]
        rays: usize,
        /// Ray search tolerance.
        #[arg(long, default_value_t = 0.01)]
        delta: f64,
        /// Also mine a validity domain per class for export.
        #[arg(long)]
        mine_regions: bool,
        /// Quorum for --mine-regions.
        #[arg(long, default_value_t = 0.9)]
        theta: f64,
        #[arg(long, default_value_t = 0.05)]
        region_eps: f64,
        #[arg(long, default_value_t = 0.01)]
        region_delta: f64,
    },
    /// Predict a class for every trace of a CSV.
    Classify {
        input: PathBuf,
        #[arg(long)]
        model: PathBuf,
    },
    /// Report accuracy, precision/recall and the confusion matrix.
    Evaluate {
        input: PathBuf,
        #[arg(long)]
        model: PathBuf,
    },
}

/// Parses `args` (including the binary name), runs the subcommand and
/// returns the process exit code. Messages go to stdout/stderr.
pub fn run(args: Vec<String>) -> i32 {
    let args = match merge_config(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return EXIT_ERROR;
        }
    };
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    let meta = Meta::new(&cli.common, &args);
    match execute(&cli, &meta) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_ERROR
        }
    }
}

/// Provenance recorded in every output file.
struct Meta {
    seed: u64,
    flags: Vec<String>,
}

impl Meta {
    fn new(common: &Common, args: &[String]) -> Self {
        // Output locations are not part of the run's identity.
        let mut flags = Vec::new();
        let mut skip = false;
        for a in args.iter().skip(1) {
            if skip {
                skip = false;
                continue;
            }
            if a == "--out" || a == "--grid-out" {
                skip = true;
                continue;
            }
            if a.starts_with("--out=") || a.starts_with("--grid-out=") {
                continue;
            }
            flags.push(a.clone());
        }
        Self {
            seed: common.seed,
            flags,
        }
    }

    fn lines(&self) -> Vec<String> {
        vec![
            format!("stl-grid-miner {}", env!("CARGO_PKG_VERSION")),
            format!("seed: {}", self.seed),
            format!("flags: {}", self.flags.iter().map(|f| quote(f)).collect::<Vec<_>>().join(" ")),
        ]
    }

    fn json(&self) -> serde_json::Value {
        json!({
            "tool": "stl-grid-miner",
            "version": env!("CARGO_PKG_VERSION"),
            "seed": self.seed,
            "flags": self.flags,
        })
    }

    fn text_header(&self) -> String {
        self.lines().iter().map(|l| format!("# {l}\n")).collect()
    }
}

fn quote(arg: &str) -> String {
    if !arg.is_empty()
        && arg
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || "-_.,:/=+[]".contains(c))
    {
        arg.to_string()
    } else {
        format!("'{}'", arg.replace('\'', "'\\''"))
    }
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).with_context(|| format!("writing {}", path.display()))
}

fn execute(cli: &Cli, meta: &Meta) -> Result<i32> {
    let common = &cli.common;
    match &cli.command {
        Command::Monitor {
            formula,
            input,
            time,
        } => cmd_monitor(common, meta, formula, input, *time),
        Command::Mine {
            input,
            synthetic,
            class,
            template,
            theta,
            eps,
            delta,
            max_calls,
            grid,
            grid_out,
            check_monotone,
        } => {
            let opts = MineOptions {
                input: input.as_deref(),
                synthetic: *synthetic,
                class: class.as_deref(),
                template,
                theta: *theta,
                learn: LearnConfig {
                    eps_vol: *eps,
                    delta_diag: *delta,
                    max_oracle_calls: *max_calls,
                },
                grid: *grid,
                grid_out: grid_out.as_deref(),
                check_monotone: *check_monotone,
            };
            cmd_mine(common, meta, &opts)
        }
        Command::Generate {
            baseline,
            synthetic,
            profiles,
            per_class,
            households,
            spread,
        } => cmd_generate(
            common,
            meta,
            baseline.as_deref(),
            *synthetic,
            profiles,
            *per_class,
            *households,
            *spread,
        ),
        Command::Train {
            input,
            template,
            rays,
            delta,
            mine_regions,
            theta,
            region_eps,
            region_delta,
        } => {
            check_open_unit("delta", *delta)?;
            check_theta(*theta)?;
            if *rays == 0 {
                bail!("--rays must be at least 1");
            }
            let mine = if *mine_regions {
                check_open_unit("region-eps", *region_eps)?;
                check_open_unit("region-delta", *region_delta)?;
                Some(LearnConfig::new(*region_eps, *region_delta))
            } else {
                None
            };
            let pf = build_template(template)?;
            let config = ClassifierConfig {
                theta: *theta,
                mine_regions: mine,
                ..ClassifierConfig::shared(pf, *rays, *delta)
            };
            cmd_train(common, meta, input, &config)
        }
        Command::Classify { input, model } => cmd_classify(common, meta, input, model),
        Command::Evaluate { input, model } => cmd_evaluate(common, meta, input, model),
    }
}

fn check_open_unit(name: &str, value: f64) -> Result<()> {
    if !(value > 0.0 && value < 1.0) {
        bail!("--{name} must lie in (0, 1), got {value}");
    }
    Ok(())
}

fn check_theta(theta: f64) -> Result<()> {
    if !(theta > 0.0 && theta <= 1.0) {
        bail!("--theta must lie in (0, 1], got {theta}");
    }
    Ok(())
}

fn parse_param(spec: &str) -> Result<ParamSpec> {
    let parts: Vec<&str> = spec.split(':').map(str::trim).collect();
    if !(3..=4).contains(&parts.len()) {
        bail!("parameter `{spec}` must look like name:lower:upper[:inc|dec]");
    }
    let number = |s: &str| {
        s.parse::<f64>()
            .map_err(|_| anyhow!("parameter `{spec}`: `{s}` is not a number"))
    };
    let orientation = match parts.get(3).copied() {
        None | Some("inc") | Some("increasing") => Orientation::Increasing,
        Some("dec") | Some("decreasing") => Orientation::Decreasing,
        Some(other) => bail!("parameter `{spec}`: unknown orientation `{other}`"),
    };
    Ok(ParamSpec::new(parts[0], number(parts[1])?, number(parts[2])?, orientation))
}

fn build_template(args: &TemplateArgs) -> Result<ParametricFormula> {
    let params = if args.params.is_empty() {
        let names: BTreeSet<String> = stl_grid_miner::parse_parametric(&args.template)?
            .params()
            .into_iter()
            .collect();
        let defaults: BTreeSet<String> = ["p1", "p2"].iter().map(|s| s.to_string()).collect();
        if names != defaults {
            bail!("declare every template parameter with --param name:lower:upper[:inc|dec]");
        }
        vec![
            ParamSpec::new("p1", 0.0, SAMPLES_PER_DAY as f64, Orientation::Increasing),
            ParamSpec::new("p2", 0.0, 60.0, Orientation::Increasing),
        ]
    } else {
        args.params
            .iter()
            .map(|s| parse_param(s))
            .collect::<Result<_>>()?
    };
    Ok(ParametricFormula::parse(&args.template, params)?)
}

fn header_columns(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.split(',')
                .map(|c| c.trim().trim_matches('"').to_string())
                .collect()
        })
        .unwrap_or_default()
}

fn read_dataset(common: &Common, path: &Path, need_labels: bool) -> Result<LabeledDataset> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let columns = header_columns(&text);
    let pick = |given: &Option<String>, fallback: &str| {
        given
            .clone()
            .or_else(|| columns.iter().any(|c| c == fallback).then(|| fallback.to_string()))
    };
    let schema = CsvSchema {
        value_col: common.value_col.clone(),
        label_col: pick(&common.label_col, "label"),
        group_col: pick(&common.group_col, "group"),
        ..CsvSchema::default()
    };
    if need_labels && schema.label_col.is_none() {
        bail!("{} has no label column; name it with --label-col", path.display());
    }
    parse_csv(&text, &schema).with_context(|| format!("reading {}", path.display()))
}

fn group_name(ds: &LabeledDataset, i: usize) -> String {
    let label = ds.traces()[i].period_label();
    if label.is_empty() {
        format!("trace{i}")
    } else {
        label.to_string()
    }
}

fn emit(common: &Common, meta: &Meta, body: &str) -> Result<()> {
    print!("{body}");
    if let Some(out) = &common.out {
        write_file(out, &format!("{}{body}", meta.text_header()))?;
    }
    Ok(())
}

fn cmd_monitor(common: &Common, meta: &Meta, formula: &str, input: &Path, time: f64) -> Result<i32> {
    let formula = parse(formula)?;
    let ds = read_dataset(common, input, false)?;
    let mut body = String::new();
    let mut all_sat = true;
    for (i, trace) in ds.traces().iter().enumerate() {
        let rho = eval_robust(&formula, trace, time)?;
        let sat = eval_bool(&formula, trace, time)?;
        all_sat &= sat;
        let verdict = if sat { "SAT" } else { "UNSAT" };
        if ds.len() == 1 {
            let _ = writeln!(body, "{verdict} {rho:.6}");
        } else {
            let _ = writeln!(body, "{} {verdict} {rho:.6}", group_name(&ds, i));
        }
    }
    emit(common, meta, &body)?;
    Ok(if all_sat { EXIT_OK } else { EXIT_NEGATIVE })
}

struct MineOptions<'a> {
    input: Option<&'a Path>,
    synthetic: bool,
    class: Option<&'a str>,
    template: &'a TemplateArgs,
    theta: f64,
    learn: LearnConfig,
    grid: Option<usize>,
    grid_out: Option<&'a Path>,
    check_monotone: Option<usize>,
}

fn cmd_mine(common: &Common, meta: &Meta, opts: &MineOptions) -> Result<i32> {
    check_theta(opts.theta)?;
    check_open_unit("eps", opts.learn.eps_vol)?;
    check_open_unit("delta", opts.learn.delta_diag)?;
    if opts.learn.max_oracle_calls == 0 {
        bail!("--max-calls must be at least 1");
    }
    if opts.grid == Some(0) {
        bail!("--grid must be at least 1");
    }
    if opts.check_monotone == Some(0) {
        bail!("--check-monotone must be at least 1");
    }
    let pf = build_template(opts.template)?;
    if opts.grid.is_some() && pf.dim() != 2 {
        bail!("--grid needs a template with exactly 2 parameters");
    }
    let traces = match (opts.input, opts.synthetic) {
        (Some(_), true) => bail!("give either a trace CSV or --synthetic, not both"),
        (None, false) => bail!("give a trace CSV or --synthetic"),
        (None, true) => vec![EveningPeakDay::default().trace()],
        (Some(path), false) => {
            let ds = read_dataset(common, path, opts.class.is_some())?;
            match opts.class {
                None => ds.traces().to_vec(),
                Some(name) => {
                    let selected: Vec<_> = ds
                        .iter()
                        .filter(|(_, l)| ds.class_name(*l) == Some(name))
                        .map(|(t, _)| t.clone())
                        .collect();
                    if selected.is_empty() {
                        bail!("no traces of class {name} in {}", path.display());
                    }
                    selected
                }
            }
        }
    };
    if let Some(n) = opts.check_monotone {
        let violations = check_monotone(&pf, &traces, n, common.seed)?;
        if let Some(v) = violations.first() {
            bail!(
                "template is not monotone under the declared orientations: {} violating pairs, \
                 e.g. trace {} holds at {:?} but fails at {:?}",
                violations.len(),
                v.trace,
                v.lower,
                v.upper
            );
        }
    }
    let oracle = QuorumOracle::new(&pf, &traces, opts.theta)?;
    let vd = learn_region(&oracle, &pf, &opts.learn)?;
    let (g, r, u) = vd.volumes();
    let mut body = String::new();
    let _ = writeln!(body, "green_volume {g:.6}");
    let _ = writeln!(body, "red_volume {r:.6}");
    let _ = writeln!(body, "unknown_volume {u:.6}");
    let _ = writeln!(body, "unknown_fraction {:.6}", vd.unknown_fraction());
    let _ = writeln!(body, "oracle_calls {}", vd.oracle_calls);
    let _ = writeln!(body, "status {}", if vd.incomplete { "incomplete" } else { "complete" });
    print!("{body}");
    if let Some(out) = &common.out {
        let doc = json!({
            "meta": meta.json(),
            "template": pf.source(),
            "params": pf.params(),
            "theta": opts.theta,
            "traces": traces.len(),
            "validity_domain": vd.to_json_value(),
        });
        write_file(out, &format!("{}\n", serde_json::to_string_pretty(&doc)?))?;
    }
    if let Some(n) = opts.grid {
        let grid = vd.grid(n)?;
        let mut lines = meta.lines();
        lines.push(format!("template: {}", pf.source()));
        let text = grid.to_text(&lines);
        match (opts.grid_out, &common.out) {
            (Some(path), _) => write_file(path, &text)?,
            (None, Some(out)) => write_file(&out.with_extension("grid.txt"), &text)?,
            (None, None) => print!("{text}"),
        }
    }
    Ok(if vd.incomplete { EXIT_NEGATIVE } else { EXIT_OK })
}

#[allow(clippy::too_many_arguments)]
fn cmd_generate(
    common: &Common,
    meta: &Meta,
    baseline: Option<&Path>,
    synthetic: bool,
    profiles: &Path,
    per_class: usize,
    households: Option<usize>,
    spread: f64,
) -> Result<i32> {
    if per_class == 0 {
        bail!("--per-class must be at least 1");
    }
    if households == Some(0) {
        bail!("--households must be at least 1");
    }
    if !(0.0..1.0).contains(&spread) {
        bail!("--spread must lie in [0, 1), got {spread}");
    }
    let text = std::fs::read_to_string(profiles)
        .with_context(|| format!("reading {}", profiles.display()))?;
    let profiles = parse_profiles(&text)?;
    let baselines = match (baseline, synthetic) {
        (None, false) => bail!("give --baseline CSV or --synthetic"),
        (Some(path), _) => read_dataset(common, path, false)?.traces().to_vec(),
        (None, true) => {
            let seed = SplitMix64::derive(common.seed, &[u64::MAX]).next_u64();
            EveningPeakDay::default().households(households.unwrap_or(per_class), spread, seed)
        }
    };
    for p in &profiles {
        for b in &baselines {
            p.profile.validate(Some(b.len()))?;
        }
    }
    let ds = generate_dataset(&baselines, &profiles, per_class, common.seed)?;
    let mut buf = Vec::new();
    ds.write_csv(&mut buf, &meta.lines())?;
    match &common.out {
        Some(out) => std::fs::write(out, &buf).with_context(|| format!("writing {}", out.display()))?,
        None => print!("{}", String::from_utf8(buf)?),
    }
    if common.out.is_some() {
        println!("wrote {} traces in {} classes", ds.len(), ds.class_names().len());
    }
    Ok(EXIT_OK)
}

fn cmd_train(common: &Common, meta: &Meta, input: &Path, config: &ClassifierConfig) -> Result<i32> {
    let ds = read_dataset(common, input, true)?;
    let model = train(&ds, config)?;
    let mut doc = model.to_json();
    doc["meta"] = meta.json();
    let text = format!("{}\n", serde_json::to_string_pretty(&doc)?);
    match &common.out {
        Some(out) => write_file(out, &text)?,
        None => print!("{text}"),
    }
    for class in &model.classes {
        let n = ds.labels().iter().filter(|&&l| l == class.id).count();
        eprintln!("class {} ({} traces)", class.name, n);
    }
    Ok(EXIT_OK)
}

fn load_model(path: &Path) -> Result<ClassifierModel> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(ClassifierModel::from_json(&value)?)
}

fn cmd_classify(common: &Common, meta: &Meta, input: &Path, model: &Path) -> Result<i32> {
    let model = load_model(model)?;
    let ds = read_dataset(common, input, false)?;
    let predictions = model.classify_all(ds.traces())?;
    let mut body = String::new();
    for (i, p) in predictions.iter().enumerate() {
        let name = model.class_name(p.class).unwrap_or("?");
        let _ = writeln!(body, "{} {name} {:.6}", group_name(&ds, i), p.distance);
    }
    emit(common, meta, &body)?;
    Ok(EXIT_OK)
}

fn format_ratio(r: Option<f64>) -> String {
    r.map_or_else(|| "n/a".to_string(), |v| format!("{v:.3}"))
}

/// Human-readable metrics report.
pub fn format_metrics(m: &Metrics) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "accuracy: {:.3}", m.accuracy);
    let _ = writeln!(out, "traces: {}", m.total);
    let _ = writeln!(out, "confusion (rows: true, columns: predicted):");
    let width = m
        .class_names
        .iter()
        .map(String::len)
        .chain(m.confusion.iter().flatten().map(|c| c.to_string().len()))
        .max()
        .unwrap_or(1);
    let _ = write!(out, "{:width$}", "");
    for name in &m.class_names {
        let _ = write!(out, " {name:>width$}");
    }
    out.push('\n');
    for (name, row) in m.class_names.iter().zip(&m.confusion) {
        let _ = write!(out, "{name:width$}");
        for c in row {
            let _ = write!(out, " {c:>width$}");
        }
        out.push('\n');
    }
    for (i, name) in m.class_names.iter().enumerate() {
        let _ = writeln!(
            out,
            "{name}: precision {} recall {}",
            format_ratio(m.precision[i]),
            format_ratio(m.recall[i])
        );
    }
    out
}

fn cmd_evaluate(common: &Common, meta: &Meta, input: &Path, model: &Path) -> Result<i32> {
    let model = load_model(model)?;
    let ds = read_dataset(common, input, true)?;
    let metrics = evaluate(&model, &ds)?;
    emit(common, meta, &format_metrics(&metrics))?;
    Ok(EXIT_OK)
}
