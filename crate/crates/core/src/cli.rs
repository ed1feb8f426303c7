//! `fastmap` command line front end.
//!
//! Exit codes: 0 on success, 1 for usage errors, 2 for data errors.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use crate::batch::{available_threads, DEFAULT_CHUNK};
use crate::cell_index::{
    self, build_cover, index_stats, load_index, query_parallel, save_index, CellError, CellIndex,
    CoverParams, Fanout, QueryMode,
};
use crate::geometry::Point;
use crate::hierarchy::{
    clustered_points, generate_synthetic, load_boundaries, load_hierarchy, save_hierarchy,
    uniform_points, write_geojson, HierarchyError, RegionHierarchy,
};
use crate::simple_mapper::{assign_parallel, pip_fraction, AssignmentResult, Mode};

/// Exact covers stop refining boundary cells at this level by default.
pub const DEFAULT_EXACT_LEVEL: u8 = 16;
pub const DEFAULT_EPSILON: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl From<HierarchyError> for CliError {
    fn from(e: HierarchyError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<CellError> for CliError {
    fn from(e: CellError) -> Self {
        match e {
            CellError::IncompatibleMode | CellError::BadEpsilon(_) | CellError::BadLevel(_) => {
                CliError::Usage(e.to_string())
            }
            CellError::EpsilonTooSmall { .. } => CliError::Usage(e.to_string()),
            e => CliError::Data(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Parser)]
#[command(
    name = "fastmap",
    version,
    about = "Assign lon/lat points to state, county and block group polygons"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert a state / county / block group GeoJSON triple to a hierarchy file.
    Ingest(IngestArgs),
    /// Build a cell index file for a hierarchy.
    Index(IndexArgs),
    /// Assign FIPS codes to a file of points.
    Assign(AssignArgs),
    /// Write a synthetic GeoJSON triple, sample points and oracle assignments.
    Generate(GenerateArgs),
    /// Time assignment over point counts and thread counts.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub state: PathBuf,
    #[arg(long)]
    pub county: PathBuf,
    #[arg(long)]
    pub block: PathBuf,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct CoverOpts {
    /// Build an approximate cover with this cell diagonal bound in degrees.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Finest level of boundary cells in an exact cover.
    #[arg(long, default_value_t = DEFAULT_EXACT_LEVEL)]
    pub max_level: u8,
    /// Quadtree levels per trie node: 1, 2 or 4.
    #[arg(long, default_value_t = 4, value_parser = parse_fanout_levels)]
    pub fanout: u32,
}

impl CoverOpts {
    fn params(&self) -> CoverParams {
        match self.epsilon {
            Some(e) => CoverParams::approx(e),
            None => CoverParams::exact(self.max_level),
        }
    }

    fn fanout(&self) -> Fanout {
        Fanout::from_levels(self.fanout).expect("validated by clap")
    }
}

fn parse_fanout_levels(s: &str) -> Result<u32, String> {
    match s.parse::<u32>() {
        Ok(v @ (1 | 2 | 4)) => Ok(v),
        _ => Err(format!("fanout must be 1, 2 or 4, got {s:?}")),
    }
}

#[derive(Debug, Clone, Args)]
pub struct IndexArgs {
    #[arg(long)]
    pub hierarchy: PathBuf,
    #[arg(long, short)]
    pub out: PathBuf,
    #[command(flatten)]
    pub cover: CoverOpts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AssignMode {
    Simple,
    FastExact,
    FastApprox,
}

impl AssignMode {
    pub fn name(self) -> &'static str {
        match self {
            AssignMode::Simple => "simple",
            AssignMode::FastExact => "fast-exact",
            AssignMode::FastApprox => "fast-approx",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct AssignArgs {
    #[arg(long)]
    pub hierarchy: PathBuf,
    /// Prebuilt cell index; fast modes build one in memory if absent.
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// CSV with a `lon,lat` header, or little-endian f64 pairs with `--binary`.
    #[arg(long)]
    pub points: PathBuf,
    #[arg(long)]
    pub binary: bool,
    #[arg(long, value_enum, default_value_t = AssignMode::Simple)]
    pub mode: AssignMode,
    /// Verify every candidate polygon in simple mode.
    #[arg(long)]
    pub strict: bool,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_CHUNK)]
    pub chunk: usize,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// States x counties per state x block groups per county.
    #[arg(long, default_value = "4x4x25", value_parser = parse_shape)]
    pub shape: Shape,
    #[arg(long, default_value_t = 0.2)]
    pub jitter: f64,
    /// Number of sample points.
    #[arg(long, default_value_t = 1000)]
    pub points: usize,
    /// Cluster sample points around block group centres.
    #[arg(long)]
    pub clustered: bool,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub states: usize,
    pub counties: usize,
    pub blocks: usize,
}

fn parse_shape(s: &str) -> Result<Shape, String> {
    let parts: Vec<usize> = s
        .split('x')
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| format!("bad shape {s:?}: {e}"))?;
    match parts[..] {
        [states, counties, blocks]
            if (1..=99).contains(&states)
                && (1..=999).contains(&counties)
                && (1..=9 * 9999).contains(&blocks) =>
        {
            Ok(Shape {
                states,
                counties,
                blocks,
            })
        }
        _ => Err(format!("shape must be SxCxB within FIPS widths, got {s:?}")),
    }
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// Hierarchy file; a synthetic one is generated if absent.
    #[arg(long)]
    pub hierarchy: Option<PathBuf>,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [AssignMode::Simple, AssignMode::FastExact])]
    pub mode: Vec<AssignMode>,
    #[arg(long, value_delimiter = ',', default_values_t = [1000, 10_000, 100_000, 1_000_000])]
    pub points: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [1])]
    pub threads: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    pub repeat: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value = "4x4x25", value_parser = parse_shape)]
    pub shape: Shape,
    #[arg(long, default_value_t = 0.2)]
    pub jitter: f64,
    #[arg(long)]
    pub clustered: bool,
    #[arg(long)]
    pub strict: bool,
    #[arg(long, default_value_t = DEFAULT_CHUNK)]
    pub chunk: usize,
    #[command(flatten)]
    pub cover: CoverOpts,
    /// Write `<prefix>.csv`, `<prefix>.tsv` and `<prefix>.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// One benchmark measurement.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub mode: AssignMode,
    pub n_points: usize,
    pub threads: usize,
    pub build_seconds: f64,
    pub assign_seconds: f64,
    pub points_per_second: f64,
    pub pip_fraction: f64,
    pub index_bytes: usize,
}

/// Parses arguments and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Ingest(a) => cmd_ingest(&a),
        Command::Index(a) => cmd_index(&a),
        Command::Assign(a) => cmd_assign(&a).map(|s| {
            eprintln!(
                "assigned {} of {} points ({} skipped), {} polygon tests",
                s.assigned, s.points, s.skipped, s.pip_point_evaluations
            );
        }),
        Command::Generate(a) => cmd_generate(&a),
        Command::Bench(a) => cmd_bench(&a).and_then(|rows| {
            let mut out = io::stdout().lock();
            write_bench_csv(&rows, &mut out).map_err(|e| CliError::Data(e.to_string()))
        }),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("fastmap: {e}");
            e.exit_code()
        }
    }
}

pub fn cmd_ingest(args: &IngestArgs) -> Result<()> {
    let h = load_boundaries(&args.state, &args.county, &args.block)?;
    save_hierarchy(&h, &args.out)?;
    let c = h.counts();
    eprintln!(
        "{} states, {} counties, {} block groups -> {}",
        c.states,
        c.counties,
        c.blocks,
        args.out.display()
    );
    Ok(())
}

pub fn cmd_index(args: &IndexArgs) -> Result<()> {
    let h = load_hierarchy(&args.hierarchy)?;
    let index = CellIndex::build(&h, args.cover.params(), args.cover.fanout())?;
    save_index(&index, &args.out)?;
    let s = index_stats(&index.trie, &index.cover);
    eprintln!(
        "{} interior cells, {} boundary cells, {} trie nodes, {} bytes -> {}",
        s.interior_cells,
        s.boundary_cells,
        s.nodes,
        s.bytes,
        args.out.display()
    );
    Ok(())
}

/// Points read from an input file, with their input row numbers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointTable {
    pub rows: Vec<u64>,
    pub points: Vec<Point>,
    /// Rows dropped for non-finite coordinates.
    pub skipped: usize,
}

impl PointTable {
    fn push(&mut self, row: u64, lon: f64, lat: f64) {
        match Point::checked(lon, lat) {
            Ok(p) => {
                self.rows.push(row);
                self.points.push(p);
            }
            Err(_) => {
                eprintln!("warning: row {row}: non-finite coordinate ({lon}, {lat}), skipped");
                self.skipped += 1;
            }
        }
    }
}

pub fn read_points_csv(path: &Path) -> Result<PointTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| io_err(path, e))?;
    let headers = rdr.headers().map_err(|e| io_err(path, e))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| CliError::Data(format!("{}: missing `{name}` column", path.display())))
    };
    let (lon_col, lat_col) = (col("lon")?, col("lat")?);
    let mut table = PointTable::default();
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| io_err(path, e))?;
        let field = |k: usize| -> Result<f64> {
            let raw = record.get(k).unwrap_or("");
            raw.parse::<f64>().map_err(|_| {
                CliError::Data(format!(
                    "{}: row {row}: bad coordinate {raw:?}",
                    path.display()
                ))
            })
        };
        table.push(row as u64, field(lon_col)?, field(lat_col)?);
    }
    Ok(table)
}

pub fn read_points_binary(path: &Path) -> Result<PointTable> {
    let mut buf = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| io_err(path, e))?;
    if buf.len() % 16 != 0 {
        return Err(io_err(path, "length is not a multiple of 16 bytes"));
    }
    let mut table = PointTable::default();
    for (row, pair) in buf.chunks_exact(16).enumerate() {
        let lon = f64::from_le_bytes(pair[..8].try_into().unwrap());
        let lat = f64::from_le_bytes(pair[8..].try_into().unwrap());
        table.push(row as u64, lon, lat);
    }
    Ok(table)
}

pub fn write_points_binary(points: &[Point], path: &Path) -> Result<()> {
    let mut buf = Vec::with_capacity(points.len() * 16);
    for p in points {
        buf.extend_from_slice(&p.lon.to_le_bytes());
        buf.extend_from_slice(&p.lat.to_le_bytes());
    }
    fs::write(path, buf).map_err(|e| io_err(path, e))
}

pub fn write_points_csv(points: &[Point], path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let res = (|| {
        writeln!(w, "lon,lat")?;
        for p in points {
            writeln!(w, "{},{}", p.lon, p.lat)?;
        }
        w.flush()
    })();
    res.map_err(|e| io_err(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| io_err(path, e))
}

/// Writes `idx,lon,lat,fips` rows; unresolved points get an empty fips.
pub fn write_assignments(
    h: &RegionHierarchy,
    rows: &[u64],
    points: &[Point],
    result: &AssignmentResult,
    path: &Path,
) -> Result<()> {
    let mut w = create(path)?;
    let res = (|| {
        writeln!(w, "idx,lon,lat,fips")?;
        for (k, (row, p)) in rows.iter().zip(points).enumerate() {
            let fips = result.fips12(h, k);
            let fips = fips.as_ref().map_or("", |f| f.as_str());
            writeln!(w, "{row},{},{},{fips}", p.lon, p.lat)?;
        }
        w.flush()
    })();
    res.map_err(|e| io_err(path, e))
}

/// Thread count from the flag, else `FMCB_THREADS` or the hardware,
/// capped at the hardware. An explicit flag is not capped.
pub fn resolve_threads(flag: Option<usize>) -> Result<usize> {
    if let Some(t) = flag {
        return if t == 0 {
            Err(CliError::Usage("--threads must be at least 1".into()))
        } else {
            Ok(t)
        };
    }
    let hw = available_threads();
    match std::env::var("FMCB_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(t) if t >= 1 => Ok(t.min(hw)),
            _ => Err(CliError::Usage(format!(
                "FMCB_THREADS must be a positive integer, got {v:?}"
            ))),
        },
        Err(_) => Ok(hw),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AssignSummary {
    pub points: usize,
    pub skipped: usize,
    pub assigned: usize,
    pub pip_point_evaluations: u64,
}

/// Runs one assignment engine over `points`.
fn run_mode(
    h: &RegionHierarchy,
    index: Option<&CellIndex>,
    points: &[Point],
    mode: AssignMode,
    strict: bool,
    threads: usize,
    chunk: usize,
) -> Result<AssignmentResult> {
    match mode {
        AssignMode::Simple => {
            let m = if strict { Mode::Strict } else { Mode::Shortcut };
            Ok(assign_parallel(h, points, m, threads, chunk))
        }
        AssignMode::FastExact | AssignMode::FastApprox => {
            let q = if mode == AssignMode::FastExact {
                QueryMode::Exact
            } else {
                QueryMode::Approx
            };
            let index = index.expect("fast modes need an index");
            Ok(query_parallel(index, h, points, q, threads, chunk)?)
        }
    }
}

fn default_params(mode: AssignMode) -> CoverParams {
    match mode {
        AssignMode::FastApprox => CoverParams::approx(DEFAULT_EPSILON),
        _ => CoverParams::exact(DEFAULT_EXACT_LEVEL),
    }
}

pub fn cmd_assign(args: &AssignArgs) -> Result<AssignSummary> {
    let threads = resolve_threads(args.threads)?;
    if args.chunk == 0 {
        return Err(CliError::Usage("--chunk must be at least 1".into()));
    }
    if args.strict && args.mode != AssignMode::Simple {
        return Err(CliError::Usage(
            "--strict applies to --mode simple only".into(),
        ));
    }
    let h = load_hierarchy(&args.hierarchy)?;
    let index = match (args.mode, &args.index) {
        (AssignMode::Simple, _) => None,
        (_, Some(path)) => Some(load_index(path, &h)?),
        (mode, None) => Some(CellIndex::build(&h, default_params(mode), Fanout::F4)?),
    };
    let table = if args.binary {
        read_points_binary(&args.points)?
    } else {
        read_points_csv(&args.points)?
    };
    let result = run_mode(
        &h,
        index.as_ref(),
        &table.points,
        args.mode,
        args.strict,
        threads,
        args.chunk,
    )?;
    write_assignments(&h, &table.rows, &table.points, &result, &args.out)?;
    Ok(AssignSummary {
        points: table.points.len(),
        skipped: table.skipped,
        assigned: result
            .assignments
            .iter()
            .filter(|a| a.block.is_some())
            .count(),
        pip_point_evaluations: result.pip_point_evaluations,
    })
}

/// Leaf index of the first block group (in hierarchy order) containing `p`,
/// testing every leaf.
pub fn brute_force_leaf(h: &RegionHierarchy, p: Point) -> Option<usize> {
    h.leaves()
        .into_iter()
        .position(|r| h.leaf(r).geometry.contains(p))
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<()> {
    if !(0.0..0.5).contains(&args.jitter) {
        return Err(CliError::Usage(format!(
            "--jitter must be in [0, 0.5), got {}",
            args.jitter
        )));
    }
    let Shape {
        states,
        counties,
        blocks,
    } = args.shape;
    let h = generate_synthetic(args.seed, states, counties, blocks, args.jitter);
    let dir = &args.out_dir;
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    write_geojson(
        &h,
        dir.join("state.geojson"),
        dir.join("county.geojson"),
        dir.join("block.geojson"),
    )?;
    let points = if args.clustered {
        clustered_points(&h, args.points, args.seed)
    } else {
        uniform_points(&h, args.points, args.seed)
    };
    write_points_csv(&points, &dir.join("points.csv"))?;

    let leaves = h.leaves();
    let oracle_path = dir.join("oracle.csv");
    let mut w = create(&oracle_path)?;
    let res = (|| {
        writeln!(w, "idx,lon,lat,fips")?;
        for (k, p) in points.iter().enumerate() {
            let fips = brute_force_leaf(&h, *p).and_then(|l| h.leaf(leaves[l]).fips12);
            let fips = fips.as_ref().map_or("", |f| f.as_str());
            writeln!(w, "{k},{},{},{fips}", p.lon, p.lat)?;
        }
        w.flush()
    })();
    res.map_err(|e| io_err(&oracle_path, e))?;
    eprintln!(
        "{} block groups and {} points -> {}",
        leaves.len(),
        points.len(),
        dir.display()
    );
    Ok(())
}

pub fn cmd_bench(args: &BenchArgs) -> Result<Vec<BenchReport>> {
    if args.repeat == 0 || args.threads.contains(&0) || args.chunk == 0 {
        return Err(CliError::Usage(
            "--repeat, --threads and --chunk must be at least 1".into(),
        ));
    }
    if !(0.0..0.5).contains(&args.jitter) {
        return Err(CliError::Usage(format!(
            "--jitter must be in [0, 0.5), got {}",
            args.jitter
        )));
    }
    let h = match &args.hierarchy {
        Some(path) => load_hierarchy(path)?,
        None => {
            let Shape {
                states,
                counties,
                blocks,
            } = args.shape;
            generate_synthetic(args.seed, states, counties, blocks, args.jitter)
        }
    };
    let n_max = args.points.iter().copied().max().unwrap_or(0);
    let all_points = if args.clustered {
        clustered_points(&h, n_max, args.seed)
    } else {
        uniform_points(&h, n_max, args.seed)
    };

    let mut rows = Vec::new();
    for &mode in &args.mode {
        let (index, build_seconds) = match mode {
            AssignMode::Simple => (None, 0.0),
            _ => {
                let params = match (mode, args.cover.epsilon) {
                    (AssignMode::FastApprox, None) => CoverParams::approx(DEFAULT_EPSILON),
                    (AssignMode::FastExact, _) => CoverParams::exact(args.cover.max_level),
                    _ => args.cover.params(),
                };
                let t = Instant::now();
                let cover = build_cover(&h, params)?;
                let index = CellIndex::from_cover(&h, cover, args.cover.fanout())?;
                (Some(index), t.elapsed().as_secs_f64())
            }
        };
        let index_bytes = index
            .as_ref()
            .map_or(0, |i| cell_index::index_stats(&i.trie, &i.cover).bytes);
        for &n in &args.points {
            let points = &all_points[..n];
            for &threads in &args.threads {
                let go = || {
                    run_mode(
                        &h,
                        index.as_ref(),
                        points,
                        mode,
                        args.strict,
                        threads,
                        args.chunk,
                    )
                };
                let warm = go()?;
                let mut best = f64::INFINITY;
                for _ in 0..args.repeat {
                    let t = Instant::now();
                    let r = go()?;
                    best = best.min(t.elapsed().as_secs_f64());
                    debug_assert_eq!(r.pip_point_evaluations, warm.pip_point_evaluations);
                }
                let best = best.max(1e-9);
                rows.push(BenchReport {
                    mode,
                    n_points: n,
                    threads,
                    build_seconds,
                    assign_seconds: best,
                    points_per_second: n as f64 / best,
                    pip_fraction: pip_fraction(&warm, n).unwrap_or(0.0),
                    index_bytes,
                });
            }
        }
    }
    if let Some(prefix) = &args.out {
        write_bench_files(&rows, prefix)?;
    }
    Ok(rows)
}

const BENCH_COLUMNS: [&str; 8] = [
    "mode",
    "n_points",
    "threads",
    "build_seconds",
    "assign_seconds",
    "points_per_second",
    "pip_fraction",
    "index_bytes",
];

fn bench_fields(r: &BenchReport) -> [String; 8] {
    [
        r.mode.name().to_string(),
        r.n_points.to_string(),
        r.threads.to_string(),
        format!("{:.6}", r.build_seconds),
        format!("{:.6}", r.assign_seconds),
        format!("{:.1}", r.points_per_second),
        format!("{:.6}", r.pip_fraction),
        r.index_bytes.to_string(),
    ]
}

pub fn write_bench_csv(rows: &[BenchReport], out: &mut impl Write) -> io::Result<()> {
    writeln!(out, "{}", BENCH_COLUMNS.join(","))?;
    for r in rows {
        writeln!(out, "{}", bench_fields(r).join(","))?;
    }
    Ok(())
}

/// Tab-separated with a `#` header line so gnuplot skips it.
pub fn write_bench_tsv(rows: &[BenchReport], out: &mut impl Write) -> io::Result<()> {
    writeln!(out, "# {}", BENCH_COLUMNS.join("\t"))?;
    for r in rows {
        writeln!(out, "{}", bench_fields(r).join("\t"))?;
    }
    Ok(())
}

fn with_suffix(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

pub fn write_bench_files(rows: &[BenchReport], prefix: &Path) -> Result<()> {
    let write = |ext: &str, f: &dyn Fn(&mut BufWriter<File>) -> io::Result<()>| -> Result<()> {
        let path = with_suffix(prefix, ext);
        let mut w = create(&path)?;
        f(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| io_err(&path, e))
    };
    write("csv", &|w| write_bench_csv(rows, w))?;
    write("tsv", &|w| write_bench_tsv(rows, w))?;
    write("json", &|w| {
        serde_json::to_writer_pretty(&mut *w, rows).map_err(io::Error::other)?;
        writeln!(w)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_parsing() {
        assert_eq!(
            parse_shape("4x4x25").unwrap(),
            Shape {
                states: 4,
                counties: 4,
                blocks: 25
            }
        );
        assert!(parse_shape("4x4").is_err());
        assert!(parse_shape("0x1x1").is_err());
        assert!(parse_shape("100x1x1").is_err());
        assert!(parse_shape("ax1x1").is_err());
    }

    #[test]
    fn fanout_flag() {
        assert_eq!(parse_fanout_levels("2"), Ok(2));
        assert!(parse_fanout_levels("3").is_err());
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(["fastmap", "frobnicate"]), 1);
        assert_eq!(run(["fastmap", "assign", "--mode", "sideways"]), 1);
        assert_eq!(run(["fastmap", "--help"]), 0);
    }

    #[test]
    fn explicit_threads_are_not_capped() {
        assert_eq!(resolve_threads(Some(512)).unwrap(), 512);
        assert!(resolve_threads(Some(0)).is_err());
    }

    #[test]
    fn bench_report_csv_and_tsv() {
        let r = BenchReport {
            mode: AssignMode::FastExact,
            n_points: 1000,
            threads: 2,
            build_seconds: 0.5,
            assign_seconds: 0.25,
            points_per_second: 4000.0,
            pip_fraction: 0.125,
            index_bytes: 77,
        };
        let mut csv = Vec::new();
        write_bench_csv(std::slice::from_ref(&r), &mut csv).unwrap();
        assert_eq!(
            String::from_utf8(csv).unwrap(),
            "mode,n_points,threads,build_seconds,assign_seconds,points_per_second,pip_fraction,index_bytes\n\
             fast-exact,1000,2,0.500000,0.250000,4000.0,0.125000,77\n"
        );
        let mut tsv = Vec::new();
        write_bench_tsv(&[r], &mut tsv).unwrap();
        let tsv = String::from_utf8(tsv).unwrap();
        assert!(tsv.starts_with("# mode\t"));
        assert!(tsv
            .lines()
            .nth(1)
            .unwrap()
            .starts_with("fast-exact\t1000\t2\t"));
    }
}
