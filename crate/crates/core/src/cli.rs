//! Run configuration and the `laakso` subcommands.
//!
//! A run is described by a TOML file (or flags) and produces CSV and JSON
//! artifacts in an output directory. Every artifact carries the tool version
//! and a hash of the normalized configuration.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::error::{LaaksoError, Result};
use crate::graph::ApproxGraph;
use crate::space::{Cell, Fiber, Identification, JSequence};
use crate::spectral::{eigendecompose, eigendecompose_lanczos, fit_hk_bounds, SpectralData, TimeScaling, TimeWindow};
use crate::stats::{linear_fit, mean_ci};
use crate::verify::{run_all, sample_centres, CheckKind, Thresholds};
use crate::walker::{coupling_runs, coupling_stats, exit_times, WalkConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
/// Default output directory when neither the config nor the flags name one.
pub const OUT_ENV: &str = "LAAKSO_OUT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub space: SpaceConfig,
    pub level: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<PathBuf>,
    /// Worker threads; 0 uses the available parallelism.
    #[serde(default)]
    pub threads: usize,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
    #[serde(default)]
    pub heatkernel: HeatKernelConfig,
    #[serde(default)]
    pub walk: WalkSection,
    #[serde(default)]
    pub couple: CoupleConfig,
    #[serde(default)]
    pub verify: VerifySection,
}

fn default_seed() -> u64 {
    1
}

/// Exactly one of `j`, `pattern`, `list`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub list: Option<Vec<u32>>,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub identification: Identification,
}

fn default_k() -> usize {
    1
}

impl SpaceConfig {
    pub fn sequence(&self) -> Result<JSequence> {
        match (&self.j, &self.pattern, &self.list) {
            (Some(j), None, None) => JSequence::constant(*j, self.k),
            (None, Some(p), None) => JSequence::periodic(p.clone(), self.k),
            (None, None, Some(l)) => JSequence::explicit(l.clone(), self.k),
            _ => Err(LaaksoError::Config("[space] needs exactly one of `j`, `pattern`, `list`".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumConfig {
    /// Modes kept when the graph is too large for a dense solve; 0 forces dense.
    pub modes: usize,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self { modes: crate::spectral::LANCZOS_DEFAULT_MODES }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeatKernelConfig {
    /// Time window; defaults to `[4/d_N², 1/4]`.
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
    pub times: usize,
    /// Centre vertices; defaults to a sample of 20.
    pub centres: Vec<usize>,
}

impl Default for HeatKernelConfig {
    fn default() -> Self {
        Self { t_min: None, t_max: None, times: 8, centres: vec![] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WalkSection {
    pub walkers: usize,
    pub time_cap: f64,
    /// Start vertex; defaults to the midpoint on fiber 0.
    pub start: Option<usize>,
    pub radii: Vec<f64>,
}

impl Default for WalkSection {
    fn default() -> Self {
        Self { walkers: 10_000, time_cap: 100.0, start: None, radii: vec![1.0 / 32.0, 1.0 / 16.0, 1.0 / 8.0, 1.0 / 4.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoupleConfig {
    pub walkers: usize,
    pub time_cap: f64,
    /// Wormhole levels `m`; the pair sits one edge before the first level-`m`
    /// wormhole on fibers differing in digit `m`.
    pub levels: Vec<usize>,
    /// Exit radius in edges.
    pub radius_edges: u32,
}

impl Default for CoupleConfig {
    fn default() -> Self {
        Self { walkers: 10_000, time_cap: 100.0, levels: vec![1, 2, 3, 4], radius_edges: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    pub checks: Vec<CheckKind>,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self { checks: CheckKind::ALL.to_vec() }
    }
}

impl RunConfig {
    /// `j = 2, k = 1` at the given level, everything else default.
    pub fn minimal(j: u32, level: usize) -> Self {
        Self {
            space: SpaceConfig { j: Some(j), pattern: None, list: None, k: 1, identification: Identification::default() },
            level,
            seed: default_seed(),
            output: None,
            thresholds: None,
            threads: 0,
            spectrum: SpectrumConfig::default(),
            heatkernel: HeatKernelConfig::default(),
            walk: WalkSection::default(),
            couple: CoupleConfig::default(),
            verify: VerifySection::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| LaaksoError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| LaaksoError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            LaaksoError::Config(msg) => LaaksoError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let seq = self.space.sequence()?;
        seq.check_level(self.level)?;
        if self.space.identification == Identification::Diagonal && self.space.k >= 2 {
            return Err(LaaksoError::Config("diagonal identification with k >= 2 gives a disconnected graph".into()));
        }
        Ok(())
    }

    /// The normalized form: defaults filled in, keys in a fixed order.
    pub fn normalized(&self) -> String {
        let mut c = self.clone();
        c.output = None;
        c.threads = 0;
        toml::to_string(&c).expect("config serializes")
    }

    /// First 16 hex digits of the SHA-256 of the normalized config. Output
    /// location and thread count do not enter.
    pub fn hash(&self) -> String {
        short_hash(self.normalized().as_bytes())
    }

    /// Key of the cached spectrum: space, level and spectrum settings only.
    pub fn spectrum_key(&self) -> String {
        let key = toml::to_string(&json!({ "space": self.space, "level": self.level, "spectrum": self.spectrum }))
            .expect("key serializes");
        short_hash(key.as_bytes())
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("laakso-out"))
    }

    pub fn load_thresholds(&self) -> Result<Thresholds> {
        match &self.thresholds {
            Some(p) => Thresholds::load(p),
            None => Ok(Thresholds::default()),
        }
    }

    pub fn graph(&self) -> Result<ApproxGraph> {
        ApproxGraph::build(self.space.sequence()?, self.level, self.space.identification)
    }
}

fn short_hash(bytes: &[u8]) -> String {
    hex::encode(&Sha256::digest(bytes)[..8])
}

#[derive(Debug, Parser)]
#[command(name = "laakso", version, about = "Graph approximations of Laakso spaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration.
    #[arg(long, short, global = true)]
    pub config: Option<PathBuf>,
    /// Constant j (used without a config file, or to override it).
    #[arg(long, global = true)]
    pub j: Option<u32>,
    #[arg(long, global = true)]
    pub k: Option<usize>,
    #[arg(long, short = 'n', global = true)]
    pub level: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Write the vertex and edge tables of G_N.
    Build,
    /// Eigendecompose the generator and cache the result.
    Spectrum,
    /// Fit two-sided heat-kernel bounds from the cached spectrum.
    Heatkernel,
    /// Exit-time sweep of the random walk.
    Walk,
    /// Coupling probabilities of folded-driver pairs.
    Couple,
    /// Run the configured checks.
    Verify,
    /// Collect the JSON artifacts of the output directory.
    Report,
}

impl Cli {
    /// The config file (if any) with flag overrides applied.
    pub fn run_config(&self) -> Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => {
                let (Some(j), Some(level)) = (self.j, self.level) else {
                    return Err(LaaksoError::Config("without --config, both --j and --level are required".into()));
                };
                RunConfig::minimal(j, level)
            }
        };
        if let Some(j) = self.j {
            config.space = SpaceConfig { j: Some(j), pattern: None, list: None, ..config.space };
        }
        if let Some(k) = self.k {
            config.space.k = k;
        }
        if let Some(level) = self.level {
            config.level = level;
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(out) = &self.output {
            config.output = Some(out.clone());
        }
        if let Some(threads) = self.threads {
            config.threads = threads;
        }
        config.validate()?;
        Ok(config)
    }
}

/// Exit status of a command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success = 0,
    CheckFailed = 1,
    ConfigError = 2,
}

fn is_config_error(e: &LaaksoError) -> bool {
    matches!(
        e,
        LaaksoError::Config(_)
            | LaaksoError::SequenceTooShort { .. }
            | LaaksoError::TooLarge { .. }
            | LaaksoError::LevelMismatch { .. }
            | LaaksoError::Input(_)
    )
}

/// Parse arguments, dispatch, print one summary line, return the exit code.
pub fn main_with(cli: Cli) -> ExitCode {
    let status = match cli.run_config() {
        Err(e) => {
            eprintln!("laakso: {e}");
            Status::ConfigError
        }
        Ok(config) => {
            if config.threads > 0 {
                // A second call in one process fails; the first pool stays.
                let _ = rayon::ThreadPoolBuilder::new().num_threads(config.threads).build_global();
            }
            match dispatch(cli.command, &config) {
                Ok(out) => {
                    println!("{}", out.summary);
                    if out.passed {
                        Status::Success
                    } else {
                        Status::CheckFailed
                    }
                }
                Err(e) if is_config_error(&e) => {
                    eprintln!("laakso: {e}");
                    Status::ConfigError
                }
                Err(e) => {
                    eprintln!("laakso: {e}");
                    Status::CheckFailed
                }
            }
        }
    };
    ExitCode::from(status as u8)
}

/// Result of one command.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutput {
    pub summary: String,
    pub passed: bool,
    pub artifacts: Vec<PathBuf>,
}

pub fn dispatch(command: Command, config: &RunConfig) -> Result<CommandOutput> {
    let out = Artifacts::new(config)?;
    match command {
        Command::Build => build(config, out),
        Command::Spectrum => spectrum(config, out).map(|(o, _)| o),
        Command::Heatkernel => heatkernel(config, out),
        Command::Walk => walk(config, out),
        Command::Couple => couple(config, out),
        Command::Verify => verify(config, out),
        Command::Report => report(config, out),
    }
}

/// Output directory plus the header every artifact carries.
struct Artifacts {
    dir: PathBuf,
    hash: String,
    written: Vec<PathBuf>,
}

impl Artifacts {
    fn new(config: &RunConfig) -> Result<Self> {
        let dir = config.output_dir();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir, hash: config.hash(), written: vec![] })
    }

    fn header(&self) -> String {
        format!("# laakso {VERSION} config={}", self.hash)
    }

    fn csv(&mut self, name: &str, columns: &str, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
        let path = self.dir.join(name);
        let mut w = BufWriter::new(File::create(&path)?);
        writeln!(w, "{}", self.header())?;
        writeln!(w, "{columns}")?;
        body(&mut w)?;
        w.flush()?;
        self.written.push(path);
        Ok(())
    }

    fn json(&mut self, name: &str, mut value: serde_json::Value) -> Result<()> {
        if let Some(map) = value.as_object_mut() {
            map.insert("laakso_version".into(), json!(VERSION));
            map.insert("config_hash".into(), json!(self.hash));
        }
        let path = self.dir.join(name);
        fs::write(&path, serde_json::to_string_pretty(&value)? + "\n")?;
        self.written.push(path);
        Ok(())
    }

    fn done(self, summary: String, passed: bool) -> CommandOutput {
        CommandOutput { summary, passed, artifacts: self.written }
    }
}

fn build(config: &RunConfig, mut out: Artifacts) -> Result<CommandOutput> {
    let g = config.graph()?;
    let form = g.default_form();
    let header = out.header();
    for (name, edges) in [("vertices.csv", false), ("edges.csv", true)] {
        let path = out.dir.join(name);
        let mut w = BufWriter::new(File::create(&path)?);
        if edges {
            g.write_edges_csv(&mut w, &form, Some(&header))?;
        } else {
            g.write_vertices_csv(&mut w, Some(&header))?;
        }
        w.flush()?;
        out.written.push(path);
    }
    let summary = format!("build: G_{} with {} vertices, {} edges", g.level(), g.n_vertices(), g.n_edges());
    Ok(out.done(summary, true))
}

fn spectrum(config: &RunConfig, mut out: Artifacts) -> Result<(CommandOutput, SpectralData)> {
    let g = config.graph()?;
    let (spec, cached) = cached_spectrum(config, &g, &out.dir)?;
    out.csv("spectrum.csv", "index,eigenvalue", |w| {
        for (m, l) in spec.eigenvalues.iter().enumerate() {
            writeln!(w, "{m},{l:.17e}")?;
        }
        Ok(())
    })?;
    let summary = format!(
        "spectrum: {} of {} eigenvalues, gap {:.6}, residual {:.1e}{}",
        spec.len(),
        spec.dimension,
        spec.spectral_gap(),
        spec.max_residual,
        if cached { " (cached)" } else { "" }
    );
    Ok((out.done(summary, true), spec))
}

/// Load the spectrum cached under the config's spectrum key, or compute and
/// store it.
pub fn cached_spectrum(config: &RunConfig, g: &ApproxGraph, dir: &Path) -> Result<(SpectralData, bool)> {
    let cache = dir.join("cache").join(format!("spectrum-{}.json", config.spectrum_key()));
    if let Ok(text) = fs::read_to_string(&cache) {
        if let Ok(spec) = serde_json::from_str::<SpectralData>(&text) {
            if spec.n_vertices() == g.n_vertices() {
                return Ok((spec, true));
            }
        }
    }
    let form = g.default_form();
    let spec = if config.spectrum.modes == 0 {
        crate::spectral::eigendecompose_dense(g, &form)?
    } else if g.n_vertices() > crate::graph::DENSE_LIMIT {
        eigendecompose_lanczos(g, &form, config.spectrum.modes)?
    } else {
        eigendecompose(g, &form)?
    };
    fs::create_dir_all(cache.parent().expect("cache has a parent"))?;
    fs::write(&cache, serde_json::to_string(&spec)?)?;
    Ok((spec, false))
}

fn heatkernel(config: &RunConfig, mut out: Artifacts) -> Result<CommandOutput> {
    let g = config.graph()?;
    let (spec, cached) = cached_spectrum(config, &g, &out.dir)?;
    let hk = &config.heatkernel;
    let default = TimeWindow::fit_default(&g);
    let window = TimeWindow {
        t_min: hk.t_min.unwrap_or(default.t_min),
        t_max: hk.t_max.unwrap_or(default.t_max),
        count: hk.times,
    };
    let centres = if hk.centres.is_empty() { sample_centres(&g, 20) } else { hk.centres.clone() };
    if let Some(&bad) = centres.iter().find(|&&x| x >= g.n_vertices()) {
        return Err(LaaksoError::Input(format!("centre {bad} is not a vertex")));
    }
    let fit = fit_hk_bounds(&g, &spec, &TimeScaling::default(), window, &centres)?;
    out.csv("heatkernel.csv", "t,x,y,p,lower,upper", |w| {
        for p in &fit.points {
            writeln!(w, "{:.10e},{},{},{:.10e},{:.10e},{:.10e}", p.t, p.x, p.y, p.p, p.lower, p.upper)?;
        }
        Ok(())
    })?;
    out.json(
        "heatkernel.json",
        json!({
            "c0": fit.c0, "c_lower": fit.c_lower, "c_upper": fit.c_upper,
            "window": fit.window, "warnings": fit.warnings, "points": fit.points.len(), "excluded": fit.excluded,
            "spectrum_cached": cached,
        }),
    )?;
    let summary = format!("heatkernel: c0 = {:.4} over {} points{}", fit.c0, fit.points.len(), if cached { " (cached spectrum)" } else { "" });
    Ok(out.done(summary, fit.passed))
}

fn walk(config: &RunConfig, mut out: Artifacts) -> Result<CommandOutput> {
    let g = config.graph()?;
    let form = g.default_form();
    let w = &config.walk;
    let cfg = WalkConfig { seed: config.seed, walkers: w.walkers, time_cap: w.time_cap };
    let start = w.start.unwrap_or_else(|| g.vertex_at(g.d() / 2, Fiber(0)));
    let mut rows = Vec::new();
    let mut raw = Vec::new();
    for &r in &w.radii {
        let times = exit_times(&cfg, &g, &form, start, r)?;
        let done: Vec<f64> = times.iter().flatten().copied().collect();
        rows.push(json!({ "radius": r, "exit_time": mean_ci(&done), "completed": done.len(), "walkers": w.walkers }));
        raw.push((r, times));
    }
    out.csv("exit_times.csv", "radius,walker,exit_time", |wr| {
        for (r, times) in &raw {
            for (id, t) in times.iter().enumerate() {
                match t {
                    Some(t) => writeln!(wr, "{r},{id},{t:.10e}")?,
                    None => writeln!(wr, "{r},{id},")?,
                }
            }
        }
        Ok(())
    })?;
    let means: Vec<f64> = rows.iter().map(|r| r["exit_time"]["mean"].as_f64().unwrap_or(f64::NAN)).collect();
    let slope = (w.radii.len() >= 2).then(|| {
        linear_fit(&w.radii.iter().map(|r| r.ln()).collect::<Vec<_>>(), &means.iter().map(|m| m.ln()).collect::<Vec<_>>()).slope
    });
    out.json("walk.json", json!({ "seed": config.seed, "start": start, "radii": rows, "slope": slope }))?;
    let summary = match slope {
        Some(s) => format!("walk: exit-time slope {s:.3} over {} radii, {} walkers each", w.radii.len(), w.walkers),
        None => format!("walk: {} radii, {} walkers each", w.radii.len(), w.walkers),
    };
    Ok(out.done(summary, true))
}

fn couple(config: &RunConfig, mut out: Artifacts) -> Result<CommandOutput> {
    let g = config.graph()?;
    let form = g.default_form();
    let c = &config.couple;
    let cfg = WalkConfig { seed: config.seed, walkers: c.walkers, time_cap: c.time_cap };
    let r = c.radius_edges as f64 / g.d() as f64;
    let layout = g.space().layout();
    let mut summaries = Vec::new();
    let mut raw = Vec::new();
    for &m in &c.levels {
        if m == 0 || m > g.level() {
            return Err(LaaksoError::Input(format!("coupling level {m} outside 1..={}", g.level())));
        }
        let p = g.d() / g.space().d_at(m);
        let x1 = g.vertex_at(p - 1, Fiber(0));
        let x2 = g.vertex_at(p - 1, Fiber(layout.digit_mask(m)));
        let cell = Cell::new(g.space(), m, 0, Fiber(0))?;
        let runs = coupling_runs(&cfg, &g, &form, x1, x2, &cell, r)?;
        summaries.push(json!({ "level": m, "x1": x1, "x2": x2, "stats": coupling_stats(&runs) }));
        raw.push((m, runs));
    }
    let opt = |t: Option<f64>| t.map(|t| format!("{t:.10e}")).unwrap_or_default();
    out.csv("couple.csv", "level,pair,coupling_time,tau1,tau2,coupled_before_exit", |w| {
        for (m, runs) in &raw {
            for (id, p) in runs.iter().enumerate() {
                writeln!(w, "{m},{id},{},{},{},{}", opt(p.coupling_time), opt(p.tau1), opt(p.tau2), p.coupled_before_exit)?;
            }
        }
        Ok(())
    })?;
    out.json("couple.json", json!({ "seed": config.seed, "radius": r, "levels": summaries }))?;
    let probs: Vec<String> = raw
        .iter()
        .map(|(m, runs)| format!("m={m}: {:.3}", coupling_stats(runs).probability.p))
        .collect();
    Ok(out.done(format!("couple: P(T_C < tau) {}", probs.join(", ")), true))
}

fn verify(config: &RunConfig, mut out: Artifacts) -> Result<CommandOutput> {
    let thresholds = config.load_thresholds()?;
    let checks = &config.verify.checks;
    let reports = if checks.is_empty() { vec![] } else { run_all(&config.graph()?, checks, &thresholds, config.seed) };
    let failed: Vec<&str> = reports.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
    out.json(
        "verify.json",
        json!({ "seed": config.seed, "thresholds_version": thresholds.version, "checks": reports }),
    )?;
    let summary = if failed.is_empty() {
        format!("verify: {} of {} checks passed", reports.len(), reports.len())
    } else {
        format!("verify: {} of {} checks failed ({})", failed.len(), reports.len(), failed.join(", "))
    };
    let passed = failed.is_empty();
    Ok(out.done(summary, passed))
}

fn report(config: &RunConfig, mut out: Artifacts) -> Result<CommandOutput> {
    let mut sections = serde_json::Map::new();
    let mut names: Vec<PathBuf> = fs::read_dir(&out.dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json") && p.file_name().is_some_and(|n| n != "report.json"))
        .collect();
    names.sort();
    for path in &names {
        let value: serde_json::Value = serde_json::from_str(&fs::read_to_string(path)?)?;
        let key = path.file_stem().expect("json file has a stem").to_string_lossy().into_owned();
        sections.insert(key, value);
    }
    let passed = sections
        .get("verify")
        .and_then(|v| v["checks"].as_array())
        .is_none_or(|checks| checks.iter().all(|c| c["passed"].as_bool() == Some(true)));
    let count = sections.len();
    out.json("report.json", json!({ "config": config.normalized(), "sections": sections }))?;
    Ok(out.done(format!("report: collected {count} artifacts, verdict {}", if passed { "pass" } else { "fail" }), passed))
}
