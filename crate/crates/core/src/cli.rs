//! Command-line front end.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::bifurcation::{
    scan_curve, scan_plane, staircase, CurveFamily, ParamCurve, PlaneGrid, ScanOptions, StairStep,
};
use crate::circlemap::{self, reduce, CircleLift, DEFAULT_ITERATIONS, DEFAULT_Q_MAX};
use crate::farey::{farey_parents, farey_sequence, Rational};
use crate::models::{
    firing_number_scan, if_plane_scan, planar_scan, IfModel, PlanarRelayModel, RelayModel1D, RelaySweep, ScalarField,
};
use crate::pwmap::{MapSpec, PiecewiseMap1D};
use crate::report::{self, fmt_f64, CsvTable, RasterCell};
use crate::symbolic::{farey_word, SymbolicWord};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "pwdyn", version, about = "Piecewise-smooth discontinuous maps: rotation numbers, Farey words and bifurcation scans")]
pub struct Cli {
    /// key=value file; flags given on the command line win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: logical CPUs).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Write the main output here instead of stdout.
    #[arg(long, short = 'o', global = true)]
    pub output: Option<PathBuf>,
    /// Also write an SVG figure (scan commands)
    #[arg(long, global = true)]
    pub svg: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Farey sequences and parents.
    #[command(subcommand)]
    Farey(FareyCmd),
    /// Farey words and word checks.
    #[command(subcommand)]
    Symbolic(SymbolicCmd),
    /// Iteration and codimension-two reduction of a map.
    #[command(subcommand)]
    Pwmap(PwmapCmd),
    /// Rotation numbers.
    #[command(subcommand)]
    Circle(CircleCmd),
    /// One- and two-parameter scans.
    #[command(subcommand)]
    Scan(ScanCmd),
    /// Applied models.
    #[command(subcommand)]
    Model(ModelCmd),
    /// Regenerate figure data and SVG.
    Repro(ReproArgs),
}

#[derive(Debug, Subcommand)]
pub enum FareyCmd {
    Seq {
        #[arg(long)]
        order: u64,
    },
    Parents { fraction: String },
}

#[derive(Debug, Subcommand)]
pub enum SymbolicCmd {
    Word { fraction: String },
    Check { word: String },
}

#[derive(Debug, Subcommand)]
pub enum PwmapCmd {
    /// CSV `k,x,symbol`.
    Iterate {
        /// Map spec (JSON)
        #[arg(long)]
        map: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        x0: f64,
        #[arg(long)]
        n: usize,
    },
    /// Composes branches along two words and expands periodic orbits of the
    /// composed map back to the source.
    Codim2 {
        /// Map spec (JSON)
        #[arg(long)]
        map: PathBuf,
        /// Source word for the composed L branch
        #[arg(long)]
        word_x: String,
        /// Source word for the composed R branch
        #[arg(long)]
        word_y: String,
        /// Orbit words of the composed map.
        #[arg(long = "orbit", required = true)]
        orbits: Vec<String>,
    },
}

#[derive(Debug, Subcommand)]
pub enum CircleCmd {
    /// CSV `seed,estimate,error_bound,locked,residual`.
    Rho {
        /// Map spec (JSON)
        #[arg(long)]
        map: PathBuf,
        #[command(flatten)]
        budget: Budget,
        /// Evenly spaced seeds on the circle.
        #[arg(long)]
        seeds: Option<usize>,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct Budget {
    /// Parameter samples along the sweep
    #[arg(long)]
    pub samples: Option<usize>,
    /// Iterations for rotation numbers.
    #[arg(long)]
    pub n: Option<usize>,
    /// Largest denominator tried when locking
    #[arg(long)]
    pub qmax: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum ScanCmd {
    /// Quarter-circle curve through the (μ_L, μ_R) quadrant.
    Curve {
        /// Map spec (JSON)
        #[arg(long)]
        map: PathBuf,
        #[command(flatten)]
        budget: Budget,
        #[arg(long)]
        staircase: bool,
        #[arg(long)]
        radius: Option<f64>,
    },
    /// Raster over (μ_L, μ_R).
    Plane {
        /// Map spec (JSON)
        #[arg(long)]
        map: PathBuf,
        #[command(flatten)]
        budget: Budget,
        /// `WxH`
        #[arg(long)]
        grid: Option<String>,
        /// `l0:l1,r0:r1`
        #[arg(long)]
        range: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Verb {
    Scan,
    Staircase,
}

#[derive(Debug, Subcommand)]
pub enum ModelCmd {
    /// First-order relay, sweeping y* between the virtual fixed points.
    Relay(ModelArgs),
    /// Integrate-and-fire, sweeping the pulse amplitude.
    If(ModelArgs),
    /// Planar relay, sweeping y* across the both-virtual interval.
    Planar(ModelArgs),
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(value_enum)]
    pub verb: Verb,
    /// key=value parameter file.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[command(flatten)]
    pub budget: Budget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    FigAdding,
    FigIncrementing,
    FigStaircase,
    FigIfPlane,
}

impl Figure {
    fn name(self) -> &'static str {
        match self {
            Figure::FigAdding => "fig-adding",
            Figure::FigIncrementing => "fig-incrementing",
            Figure::FigStaircase => "fig-staircase",
            Figure::FigIfPlane => "fig-if-plane",
        }
    }
}

#[derive(Debug, Args)]
pub struct ReproArgs {
    #[arg(value_enum)]
    pub figure: Figure,
    #[command(flatten)]
    pub budget: Budget,
    /// Raster size for plane figures, `WxH`.
    #[arg(long)]
    pub grid: Option<String>,
    /// Directory for the CSV and SVG files
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

/// Result of a command: the main text plus any extra files.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Output {
    pub primary: String,
    pub files: Vec<(PathBuf, String)>,
}

const CONFIG_KEYS: &[&str] = &["samples", "n", "qmax", "jobs", "format", "radius", "grid", "range", "seeds"];

/// Flat `key=value` settings; `#` starts a comment.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeyValues(pub BTreeMap<String, String>);

impl KeyValues {
    pub fn parse(text: &str, allowed: &[&str]) -> CliResult<Self> {
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key=value", lineno + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if !allowed.contains(&k) {
                return Err(CliError::Config(format!("line {}: unknown key '{k}'", lineno + 1)));
            }
            map.insert(k.to_string(), v.to_string());
        }
        Ok(KeyValues(map))
    }

    pub fn load(path: &Path, allowed: &[&str]) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, allowed)
    }

    /// Flag value, else file value, else default.
    pub fn get<T: FromStr>(&self, key: &str, flag: Option<T>, default: T) -> CliResult<T> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.0.get(key) {
            Some(s) => s
                .parse()
                .map_err(|_| CliError::Config(format!("invalid value '{s}' for '{key}'"))),
            None => Ok(default),
        }
    }
}

/// Resolved settings echoed into the CSV comment line, in insertion order.
#[derive(Debug, Default)]
struct Echo(Vec<(String, String)>);

impl Echo {
    fn add(&mut self, k: &str, v: impl ToString) {
        self.0.push((k.to_string(), v.to_string()));
    }

    fn line(&self) -> String {
        self.0.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(" ")
    }
}

fn positive<T: PartialOrd + Default + std::fmt::Display>(key: &str, v: T) -> CliResult<T> {
    if v > T::default() {
        Ok(v)
    } else {
        Err(CliError::Config(format!("'{key}' must be positive (got {v})")))
    }
}

fn parse_fraction(s: &str) -> CliResult<Rational> {
    s.parse().map_err(|e: crate::Error| CliError::Config(format!("'{s}': {e}")))
}

fn parse_word(s: &str) -> CliResult<SymbolicWord> {
    s.parse().map_err(|e: crate::Error| CliError::Config(format!("'{s}': {e}")))
}

fn parse_grid(s: &str) -> CliResult<(usize, usize)> {
    let bad = || CliError::Config(format!("grid '{s}' must look like WxH"));
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let w: usize = w.trim().parse().map_err(|_| bad())?;
    let h: usize = h.trim().parse().map_err(|_| bad())?;
    Ok((positive("grid", w)?, positive("grid", h)?))
}

fn parse_range(s: &str) -> CliResult<((f64, f64), (f64, f64))> {
    let bad = || CliError::Config(format!("range '{s}' must look like l0:l1,r0:r1"));
    let pair = |p: &str| -> CliResult<(f64, f64)> {
        let (a, b) = p.split_once(':').ok_or_else(bad)?;
        Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
    };
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    Ok((pair(a)?, pair(b)?))
}

fn load_map(path: &Path) -> CliResult<(MapSpec, PiecewiseMap1D)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let spec = MapSpec::from_json(&text).map_err(|e| CliError::Config(e.to_string()))?;
    let map = spec.build().map_err(|e| CliError::Config(e.to_string()))?;
    Ok((spec, map))
}

fn spec_echo(spec: &MapSpec) -> String {
    serde_json::to_string(spec).unwrap_or_default().replace(',', ";")
}

struct Ctx {
    kv: KeyValues,
    format: Format,
}

impl Ctx {
    fn scan_options(&self, budget: &Budget, echo: &mut Echo) -> CliResult<ScanOptions> {
        let iterations = positive("n", self.kv.get("n", budget.n, DEFAULT_ITERATIONS)?)?;
        let q_max = positive("qmax", self.kv.get("qmax", budget.qmax, DEFAULT_Q_MAX)?)?;
        echo.add("n", iterations);
        echo.add("qmax", q_max);
        Ok(ScanOptions {
            iterations,
            q_max,
            ..ScanOptions::default()
        })
    }

    fn samples(&self, budget: &Budget, default: usize, echo: &mut Echo) -> CliResult<usize> {
        let s = positive("samples", self.kv.get("samples", budget.samples, default)?)?;
        echo.add("samples", s);
        Ok(s)
    }

    fn render<T: serde::Serialize + ?Sized>(&self, table: CsvTable, value: &T, echo: &Echo) -> CliResult<String> {
        match self.format {
            Format::Csv => Ok(table.to_string_with(&echo.line())),
            Format::Json => report::to_json(value).map(|s| s + "\n").map_err(|e| CliError::Runtime(e.to_string())),
        }
    }

    fn render_table(&self, table: CsvTable, echo: &Echo) -> CliResult<String> {
        let rows = table.to_json_rows();
        self.render(table, &rows, echo)
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let output_path = cli.output.clone();
    match execute(&cli) {
        Ok(out) => match write_output(&out, output_path.as_deref()) {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("error: {e}");
                e.exit_code()
            }
        },
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn write_output(out: &Output, path: Option<&Path>) -> CliResult<()> {
    let write = |p: &Path, s: &str| {
        std::fs::write(p, s).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", p.display())))
    };
    for (p, s) in &out.files {
        if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
        }
        write(p, s)?;
    }
    match path {
        Some(p) => write(p, &out.primary),
        None => {
            print!("{}", out.primary);
            Ok(())
        }
    }
}

/// Runs a parsed command on a pool sized by `--jobs` and returns its output
/// without touching stdout.
pub fn execute(cli: &Cli) -> CliResult<Output> {
    let kv = match &cli.config {
        Some(p) => KeyValues::load(p, CONFIG_KEYS)?,
        None => KeyValues::default(),
    };
    let jobs = kv.get("jobs", cli.jobs, 0usize)?;
    let format = match cli.format {
        Some(f) => f,
        None => match kv.0.get("format").map(String::as_str) {
            None | Some("csv") => Format::Csv,
            Some("json") => Format::Json,
            Some(other) => return Err(CliError::Config(format!("unknown format '{other}'"))),
        },
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let ctx = Ctx { kv, format };
    pool.install(|| dispatch(cli, &ctx))
}

fn dispatch(cli: &Cli, ctx: &Ctx) -> CliResult<Output> {
    let mut out = Output::default();
    match &cli.command {
        Command::Farey(FareyCmd::Seq { order }) => {
            for r in farey_sequence(*order).map_err(|e| CliError::Config(e.to_string()))? {
                let _ = writeln!(out.primary, "{r}");
            }
        }
        Command::Farey(FareyCmd::Parents { fraction }) => {
            let p = farey_parents(parse_fraction(fraction)?).map_err(|e| CliError::Config(e.to_string()))?;
            let _ = writeln!(out.primary, "{}\n{}", p.left, p.right);
        }
        Command::Symbolic(SymbolicCmd::Word { fraction }) => {
            let w = farey_word(parse_fraction(fraction)?).map_err(|e| CliError::Config(e.to_string()))?;
            let _ = writeln!(out.primary, "{w}");
        }
        Command::Symbolic(SymbolicCmd::Check { word }) => {
            out.primary = check_word(&parse_word(word)?);
        }
        Command::Pwmap(PwmapCmd::Iterate { map, x0, n }) => {
            let (_, m) = load_map(map)?;
            let it = m.itinerary(*x0, positive("n", *n)?)?;
            let mut t = CsvTable::new(vec!["k", "x", "symbol"]);
            for (k, x) in it.states.iter().enumerate() {
                let sym = it.symbols.get(k).map(|s| s.as_char().to_string()).unwrap_or_default();
                t.push(vec![k.to_string(), fmt_f64(*x), sym]);
            }
            let mut echo = Echo::default();
            echo.add("command", "pwmap-iterate");
            echo.add("x0", fmt_f64(*x0));
            echo.add("n", n);
            out.primary = ctx.render_table(t, &echo)?;
            if let Some(k) = it.border_collision {
                eprintln!("warning: border collision at step {k}");
            }
        }
        Command::Pwmap(PwmapCmd::Codim2 { map, word_x, word_y, orbits }) => {
            let (spec, m) = load_map(map)?;
            out.primary = codim2_csv(ctx, &m, &spec, word_x, word_y, orbits)?;
        }
        Command::Circle(CircleCmd::Rho { map, budget, seeds }) => {
            let (spec, m) = load_map(map)?;
            let mut echo = Echo::default();
            echo.add("command", "circle-rho");
            echo.add("map", spec_echo(&spec));
            let opts = ctx.scan_options(budget, &mut echo)?;
            let seeds = positive("seeds", ctx.kv.get("seeds", *seeds, 1usize)?)?;
            echo.add("seeds", seeds);
            let lift = reduce(&m)?.lift();
            let mut t = CsvTable::new(vec!["seed", "estimate", "error_bound", "locked", "residual"]);
            for i in 0..seeds {
                let x0 = if seeds == 1 { lift.seed() } else { i as f64 / seeds as f64 };
                let r = circlemap::rotation_number_from(&lift, x0, opts.iterations, opts.q_max)?;
                t.push(vec![
                    fmt_f64(x0),
                    fmt_f64(r.estimate),
                    fmt_f64(r.error_bound),
                    r.locked().map(|l| l.to_string()).unwrap_or_default(),
                    r.lock.map(|l| fmt_f64(l.residual)).unwrap_or_default(),
                ]);
            }
            out.primary = ctx.render_table(t, &echo)?;
        }
        Command::Scan(ScanCmd::Curve { map, budget, staircase: stair, radius }) => {
            let (spec, m) = load_map(map)?;
            let mut echo = Echo::default();
            echo.add("command", if *stair { "scan-curve-staircase" } else { "scan-curve" });
            echo.add("map", spec_echo(&spec));
            let radius = positive("radius", ctx.kv.get("radius", *radius, 1.0)?)?;
            echo.add("radius", radius);
            let samples = ctx.samples(budget, 2000, &mut echo)?;
            let opts = ctx.scan_options(budget, &mut echo)?;
            let family = CurveFamily {
                base: m,
                curve: ParamCurve::quarter_circle(radius),
            };
            let records = scan_curve(&family, samples, &opts)?;
            let steps = staircase(&records);
            out.primary = if *stair {
                ctx.render(report::staircase_table(&steps), &steps, &echo)?
            } else {
                ctx.render(report::scan_table(&records), &records, &echo)?
            };
            if let Some(p) = &cli.svg {
                out.files.push((p.clone(), report::staircase_svg(&steps, "eta along the curve")));
            }
        }
        Command::Scan(ScanCmd::Plane { map, budget, grid, range }) => {
            let (spec, m) = load_map(map)?;
            let mut echo = Echo::default();
            echo.add("command", "scan-plane");
            echo.add("map", spec_echo(&spec));
            let grid_s = ctx.kv.get("grid", grid.clone(), "64x64".to_string())?;
            let range_s = ctx.kv.get("range", range.clone(), "0.01:1,0.01:1".to_string())?;
            let (w, h) = parse_grid(&grid_s)?;
            let (rl, rr) = parse_range(&range_s)?;
            echo.add("grid", &grid_s);
            echo.add("range", &range_s);
            let opts = ctx.scan_options(budget, &mut echo)?;
            let g = PlaneGrid {
                mu_left: rl,
                mu_right: rr,
                width: w,
                height: h,
            };
            let cells = scan_plane(&m, &g, &opts)?;
            out.primary = ctx.render(report::plane_table(&cells), &cells, &echo)?;
            if let Some(p) = &cli.svg {
                out.files.push((p.clone(), report::plane_svg(&cells, w, h, "periods over (mu_L, mu_R)")));
            }
        }
        Command::Model(cmd) => model(cli, ctx, cmd, &mut out)?,
        Command::Repro(args) => repro(ctx, args, &mut out)?,
    }
    Ok(out)
}

fn check_word(w: &SymbolicWord) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "word={w}");
    let _ = writeln!(s, "eta={}", w.eta_number());
    let flag = |r: crate::Result<bool>| match r {
        Ok(b) => b.to_string(),
        Err(e) => format!("unavailable ({e})"),
    };
    match w.pq_ordering() {
        Ok(Some(k)) => {
            let _ = writeln!(s, "pq_ordered=true k={k}");
        }
        Ok(None) => {
            let _ = writeln!(s, "pq_ordered=false");
        }
        Err(e) => {
            let _ = writeln!(s, "pq_ordered=unavailable ({e})");
        }
    }
    let _ = writeln!(s, "maximin={}", flag(w.is_maximin()));
    let _ = writeln!(s, "minimax={}", flag(w.is_minimax()));
    s
}

fn codim2_csv(ctx: &Ctx, m: &PiecewiseMap1D, spec: &MapSpec, word_x: &str, word_y: &str, orbits: &[String]) -> CliResult<String> {
    let (wx, wy) = (parse_word(word_x)?, parse_word(word_y)?);
    let composed = crate::bifurcation::codim2_reduce(m, &wx, &wy)?;
    let mut t = CsvTable::new(vec!["composed_word", "composed_index", "composed_x", "source_word", "source_index", "source_x"]);
    for o in orbits {
        let w = parse_word(o)?;
        let orbit = composed.map.solve_orbit(&w, None)?;
        let expanded = composed.expand_orbit(&orbit)?;
        let mut ci = 0;
        let mut offset = 0;
        for (k, x) in expanded.points.iter().enumerate() {
            let block = if orbit.word.get(ci) == crate::Symbol::L { wx.len() } else { wy.len() };
            t.push(vec![
                orbit.word.to_string(),
                ci.to_string(),
                fmt_f64(orbit.points[ci]),
                expanded.word.to_string(),
                k.to_string(),
                fmt_f64(*x),
            ]);
            offset += 1;
            if offset == block {
                offset = 0;
                ci += 1;
            }
        }
    }
    let mut echo = Echo::default();
    echo.add("command", "pwmap-codim2");
    echo.add("map", spec_echo(spec));
    echo.add("word_x", word_x);
    echo.add("word_y", word_y);
    echo.add("orbits", orbits.join(" "));
    ctx.render_table(t, &echo)
}

const RELAY_KEYS: &[&str] = &["slope", "offset", "k", "T"];
const IF_KEYS: &[&str] = &["slope", "offset", "theta", "T", "d", "a_min", "a_max"];
const PLANAR_KEYS: &[&str] = &["a0", "a1", "b", "c1", "T", "k"];

fn load_params(path: Option<&Path>, allowed: &[&str]) -> CliResult<KeyValues> {
    match path {
        Some(p) => KeyValues::load(p, allowed),
        None => Ok(KeyValues::default()),
    }
}

fn model(cli: &Cli, ctx: &Ctx, cmd: &ModelCmd, out: &mut Output) -> CliResult<()> {
    let mut echo = Echo::default();
    match cmd {
        ModelCmd::Relay(args) => {
            let p = load_params(args.params.as_deref(), RELAY_KEYS)?;
            let slope = p.get("slope", None, -0.2)?;
            let offset = p.get("offset", None, 0.0)?;
            let k = p.get("k", None, -1.0)?;
            let period = positive("T", p.get("T", None, 0.1)?)?;
            echo.add("command", "model-relay");
            for (key, v) in [("slope", slope), ("offset", offset), ("k", k), ("T", period)] {
                echo.add(key, v);
            }
            let samples = ctx.samples(&args.budget, 2000, &mut echo)?;
            let opts = ctx.scan_options(&args.budget, &mut echo)?;
            let sweep = RelaySweep::new(RelayModel1D {
                field: ScalarField::affine(slope, offset),
                k,
                period,
                y_star: 0.0,
            })?;
            let records = scan_curve(&sweep, samples, &opts)?;
            let steps = staircase(&records);
            out.primary = match args.verb {
                Verb::Scan => ctx.render(report::scan_table(&records), &records, &echo)?,
                Verb::Staircase => ctx.render(report::staircase_table(&steps), &steps, &echo)?,
            };
            if let Some(path) = &cli.svg {
                out.files.push((path.clone(), report::staircase_svg(&steps, "relay: eta against y*")));
            }
        }
        ModelCmd::If(args) => {
            let p = load_params(args.params.as_deref(), IF_KEYS)?;
            let base = IfModel {
                field: ScalarField::affine(p.get("slope", None, -0.5)?, p.get("offset", None, 0.2)?),
                theta: positive("theta", p.get("theta", None, 1.0)?)?,
                amplitude: 0.0,
                duty: p.get("d", None, 0.5)?,
                period: positive("T", p.get("T", None, 1.9)?)?,
            };
            let (a_min, a_max) = (p.get("a_min", None, 2.2)?, p.get("a_max", None, 3.2)?);
            if !(a_max > a_min) {
                return Err(CliError::Config("a_max must exceed a_min".into()));
            }
            echo.add("command", "model-if");
            echo.add("field", format!("{:?}", base.field));
            for (key, v) in [("theta", base.theta), ("T", base.period), ("d", base.duty), ("a_min", a_min), ("a_max", a_max)] {
                echo.add(key, v);
            }
            let samples = ctx.samples(&args.budget, 400, &mut echo)?;
            let opts = ctx.scan_options(&args.budget, &mut echo)?;
            let amps = grid_points(a_min, a_max, samples);
            let records = firing_number_scan(&base, &amps, &opts);
            let steps: Vec<StairStep> = records
                .iter()
                .map(|r| StairStep {
                    lambda: r.amplitude,
                    eta: r.eta,
                })
                .collect();
            out.primary = match args.verb {
                Verb::Scan => ctx.render(report::firing_table(&records, base.period), &records, &echo)?,
                Verb::Staircase => ctx.render(report::staircase_table(&steps), &steps, &echo)?,
            };
            if let Some(path) = &cli.svg {
                out.files.push((path.clone(), report::staircase_svg(&steps, "IF: firing number against A")));
            }
        }
        ModelCmd::Planar(args) => {
            let p = load_params(args.params.as_deref(), PLANAR_KEYS)?;
            let base = PlanarRelayModel {
                a0: p.get("a0", None, -2.0)?,
                a1: p.get("a1", None, -5.0)?,
                b: p.get("b", None, 1.0)?,
                k: p.get("k", None, -1.0)?,
                period: positive("T", p.get("T", None, 0.1)?)?,
                c1: p.get("c1", None, 1.5)?,
                y_star: 0.0,
            };
            echo.add("command", "model-planar");
            for (key, v) in [("a0", base.a0), ("a1", base.a1), ("b", base.b), ("c1", base.c1), ("T", base.period), ("k", base.k)] {
                echo.add(key, v);
            }
            let samples = ctx.samples(&args.budget, 200, &mut echo)?;
            let points = planar_sweep(&base, samples)?;
            let results = planar_scan(&base, &points);
            let steps: Vec<StairStep> = results
                .iter()
                .map(|r| StairStep {
                    lambda: r.y_star,
                    eta: r
                        .analysis
                        .as_ref()
                        .filter(|a| a.orbits.len() == 1)
                        .map(|a| a.orbits[0].eta),
                })
                .collect();
            out.primary = match args.verb {
                Verb::Scan => ctx.render(report::planar_table(&results), &results, &echo)?,
                Verb::Staircase => ctx.render(report::staircase_table(&steps), &steps, &echo)?,
            };
            if let Some(path) = &cli.svg {
                out.files.push((path.clone(), report::staircase_svg(&steps, "planar relay: eta against y*")));
            }
        }
    }
    Ok(())
}

/// `samples` points from `lo` to `hi` inclusive.
fn grid_points(lo: f64, hi: f64, samples: usize) -> Vec<f64> {
    if samples == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..samples).map(|i| lo + (hi - lo) * i as f64 / (samples - 1) as f64).collect()
}

/// Midpoints of `samples` equal cells across the open both-virtual interval
/// of `y*` for the model's gain.
pub fn planar_sweep(base: &PlanarRelayModel, samples: usize) -> CliResult<Vec<(f64, f64)>> {
    let pm = base.planar_map()?;
    // σ(ȳ) = ȳ_1 - y* + c1 ȳ_2, so both-virtual means y* strictly between
    // the σ-values of the two fixed points at y* = 0.
    let lo = pm.fixed_right[0] + base.c1 * pm.fixed_right[1];
    let hi = pm.fixed_left[0] + base.c1 * pm.fixed_left[1];
    if !(hi > lo) {
        return Err(CliError::Config(format!("k = {} admits no both-virtual interval", base.k)));
    }
    Ok((0..samples)
        .map(|i| (base.k, lo + (hi - lo) * (i as f64 + 0.5) / samples as f64))
        .collect())
}

fn repro(ctx: &Ctx, args: &ReproArgs, out: &mut Output) -> CliResult<()> {
    let mut echo = Echo::default();
    let name = args.figure.name();
    echo.add("command", format!("repro-{name}"));
    let grid_s = ctx.kv.get("grid", args.grid.clone(), "64x64".to_string())?;
    let (csv, svg) = match args.figure {
        Figure::FigAdding | Figure::FigIncrementing => {
            let b = if args.figure == Figure::FigAdding { 0.5 } else { -0.5 };
            let m = PiecewiseMap1D::linear(0.5, b, 1.0, 1.0)?;
            let (w, h) = parse_grid(&grid_s)?;
            echo.add("a", 0.5);
            echo.add("b", b);
            echo.add("grid", &grid_s);
            let opts = ctx.scan_options(&args.budget, &mut echo)?;
            let g = PlaneGrid {
                mu_left: (0.01, 1.0),
                mu_right: (0.01, 1.0),
                width: w,
                height: h,
            };
            let cells = scan_plane(&m, &g, &opts)?;
            let title = if b > 0.0 { "period adding (a=b=0.5)" } else { "period incrementing (a=0.5, b=-0.5)" };
            (
                report::plane_table(&cells).to_string_with(&echo.line()),
                report::plane_svg(&cells, w, h, title),
            )
        }
        Figure::FigStaircase => {
            let m = PiecewiseMap1D::linear(0.5, 0.5, 1.0, 1.0)?;
            echo.add("a", 0.5);
            echo.add("b", 0.5);
            let samples = ctx.samples(&args.budget, 500, &mut echo)?;
            let opts = ctx.scan_options(&args.budget, &mut echo)?;
            let family = CurveFamily {
                base: m,
                curve: ParamCurve::quarter_circle(1.0),
            };
            let records = scan_curve(&family, samples, &opts)?;
            let steps = staircase(&records);
            (
                report::staircase_table(&steps).to_string_with(&echo.line()),
                report::staircase_svg(&steps, "devil's staircase (a=b=0.5)"),
            )
        }
        Figure::FigIfPlane => {
            let base = IfModel {
                field: ScalarField::affine(-0.5, 0.2),
                theta: 1.0,
                amplitude: 0.0,
                duty: 0.5,
                period: 1.9,
            };
            let (w, h) = parse_grid(&grid_s)?;
            echo.add("grid", &grid_s);
            let opts = ctx.scan_options(&args.budget, &mut echo)?;
            let cells = if_plane_scan(&base, (0.05, 0.95), (0.2, 2.0), w, h, &opts)?;
            let raster: Vec<RasterCell> = cells
                .iter()
                .map(|c| RasterCell {
                    i: c.i,
                    j: c.j,
                    period: c.period,
                    hatched: false,
                })
                .collect();
            (
                report::if_plane_table(&cells).to_string_with(&echo.line()),
                report::raster_svg(w, h, &raster, "IF firing periods over (d, 1/A)", "d", "1/A"),
            )
        }
    };
    out.files.push((args.out_dir.join(format!("{name}.csv")), csv));
    out.files.push((args.out_dir.join(format!("{name}.svg")), svg));
    let _ = writeln!(
        out.primary,
        "wrote {} and {}",
        args.out_dir.join(format!("{name}.csv")).display(),
        args.out_dir.join(format!("{name}.svg")).display()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exec(args: &[&str]) -> CliResult<Output> {
        let cli = Cli::try_parse_from(std::iter::once("pwdyn").chain(args.iter().copied()))
            .map_err(|e| CliError::Config(e.to_string()))?;
        execute(&cli)
    }

    #[test]
    fn farey_seq_order_six() {
        let out = exec(&["farey", "seq", "--order", "6"]).unwrap();
        assert_eq!(out.primary.lines().count(), 13);
        assert_eq!(out.primary.lines().nth(1), Some("1/6"));
    }

    #[test]
    fn farey_parents_lines() {
        let out = exec(&["farey", "parents", "8/11"]).unwrap();
        assert_eq!(out.primary, "5/7\n3/4\n");
    }

    #[test]
    fn symbolic_commands() {
        assert_eq!(exec(&["symbolic", "word", "2/5"]).unwrap().primary, "LLRLR\n");
        let s = exec(&["symbolic", "check", "LLRLR"]).unwrap().primary;
        assert!(s.contains("eta=2/5") && s.contains("pq_ordered=true k=3") && s.contains("maximin=true"));
        let s = exec(&["symbolic", "check", "LLLRR"]).unwrap().primary;
        assert!(s.contains("pq_ordered=false") && s.contains("maximin=false"));
    }

    #[test]
    fn config_errors_exit_two() {
        let e = exec(&["symbolic", "word", "3/2"]).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(KeyValues::parse("bogus=1", CONFIG_KEYS).is_err());
        assert!(KeyValues::parse("samples", CONFIG_KEYS).is_err());
        let kv = KeyValues::parse("samples = 12 # twelve\n\n# note\n", CONFIG_KEYS).unwrap();
        assert_eq!(kv.get("samples", None, 1usize).unwrap(), 12);
        assert_eq!(kv.get("samples", Some(3usize), 1).unwrap(), 3);
        assert_eq!(parse_grid("4x3").unwrap(), (4, 3));
        assert!(parse_grid("0x3").is_err());
        assert_eq!(parse_range("0:1,2:3").unwrap(), ((0.0, 1.0), (2.0, 3.0)));
    }

    #[test]
    fn planar_sweep_stays_inside() {
        let base = PlanarRelayModel {
            a0: -2.0,
            a1: -5.0,
            b: 1.0,
            k: -1.0,
            period: 0.1,
            c1: 1.5,
            y_star: 0.0,
        };
        let pts = planar_sweep(&base, 4).unwrap();
        assert_eq!(pts.len(), 4);
        assert!(pts.iter().all(|&(_, y)| y > -0.5 && y < 0.5));
        assert!(planar_sweep(&PlanarRelayModel { k: 1.0, ..base }, 4).is_err());
    }
}
