//! Configuration parsing, command dispatch and report serialization.

use std::f64::consts::PI;
use std::fmt;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::asymptotics::{classify, compare_with, AsymptoticReport, ComparisonTable};
use crate::coupling::{preset, st_to_ab, validate_ab, AbValidation, CouplingClass, CouplingError, StCoupling};
use crate::fiber::{oracle_match, FiberError, OracleConfig, OracleReport};
use crate::linalg::C64;
use crate::spectrum::{scan_bands, torus_extrema, ScanConfig, SpectrumError, SpectrumReport};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Coupling(#[from] CouplingError),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
    #[error("coupling fails self-adjointness: {0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("oracle mismatch: {0}")]
    Oracle(Box<FiberError>),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 2,
            CliError::Oracle(_) => 3,
            _ => 1,
        }
    }
}

fn config_err(msg: impl fmt::Display) -> CliError {
    CliError::Config(msg.to_string())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Validate,
    Scan,
    Classify,
    Compare,
    Presets,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Json,
    Csv,
    PlotData,
}

impl Format {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "json" => Some(Format::Json),
            "csv" => Some(Format::Csv),
            "plot-data" | "plot" => Some(Format::PlotData),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputSpec {
    pub format: Format,
    /// `-` is standard output.
    pub path: String,
}

impl OutputSpec {
    /// `format:path`, or a bare path whose extension picks the format.
    pub fn parse(s: &str) -> Result<Self, CliError> {
        if let Some((f, p)) = s.split_once(':') {
            if let Some(format) = Format::parse(f) {
                return Ok(OutputSpec {
                    format,
                    path: p.to_string(),
                });
            }
        }
        if s == "-" {
            return Ok(OutputSpec {
                format: Format::Json,
                path: s.into(),
            });
        }
        let ext = Path::new(s).extension().and_then(|e| e.to_str()).unwrap_or("");
        let format = match ext {
            "json" => Format::Json,
            "csv" => Format::Csv,
            "dat" | "txt" | "plot" => Format::PlotData,
            _ => return Err(config_err(format!("cannot infer output format of {s:?}; use json:, csv: or plot-data:"))),
        };
        Ok(OutputSpec { format, path: s.into() })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CouplingSpec {
    Explicit(StCoupling),
    Preset { class: CouplingClass, edge_length: f64 },
}

impl CouplingSpec {
    pub fn build(&self) -> Result<StCoupling, CliError> {
        match self {
            CouplingSpec::Explicit(c) => Ok(c.clone()),
            CouplingSpec::Preset { class, edge_length } => Ok(preset(class, *edge_length)?),
        }
    }

    pub fn edge_length(&self) -> f64 {
        match self {
            CouplingSpec::Explicit(c) => c.edge_length(),
            CouplingSpec::Preset { edge_length, .. } => *edge_length,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareRange {
    pub n_min: usize,
    pub n_max: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub coupling: CouplingSpec,
    pub scan: ScanConfig,
    pub compare: CompareRange,
    pub outputs: Vec<OutputSpec>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Number {
    Pair([f64; 2]),
    Real(f64),
}

impl Number {
    fn value(&self) -> C64 {
        match *self {
            Number::Pair([re, im]) => C64::new(re, im),
            Number::Real(re) => C64::new(re, 0.0),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PresetRef {
    name: String,
    #[serde(default)]
    params: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCoupling {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    m: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    a: Option<f64>,
    #[serde(default, rename = "S_upper", alias = "S", skip_serializing_if = "Option::is_none")]
    s: Option<Vec<Number>>,
    #[serde(default, rename = "T", skip_serializing_if = "Option::is_none")]
    t: Option<Vec<Number>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    preset: Option<PresetRef>,
}

const COUPLING_KEYS: [&str; 6] = ["m", "a", "S", "S_upper", "T", "preset"];
const TOP_KEYS: [&str; 5] = ["command", "scan", "compare", "outputs", "coupling"];

fn field<T: for<'de> Deserialize<'de>>(obj: &Map<String, Value>, key: &str) -> Result<Option<T>, CliError> {
    obj.get(key)
        .map(|v| serde_json::from_value(v.clone()).map_err(|e| config_err(format!("field `{key}`: {e}"))))
        .transpose()
}

fn parse_coupling(v: Value) -> Result<CouplingSpec, CliError> {
    let raw: RawCoupling = serde_json::from_value(v).map_err(|e| config_err(format!("field `coupling`: {e}")))?;
    let a = raw.a.unwrap_or(1.0);
    if let Some(p) = raw.preset {
        if raw.m.is_some() || raw.s.is_some() || raw.t.is_some() {
            return Err(config_err("field `preset` excludes `m`, `S` and `T`"));
        }
        let class = CouplingClass::from_tag(&p.name, &p.params)?;
        // fails early on bad parameters
        preset(&class, a)?;
        return Ok(CouplingSpec::Preset { class, edge_length: a });
    }
    let m = raw.m.ok_or_else(|| config_err("field `m` is required without `preset`"))?;
    if !(0..=4).contains(&m) {
        return Err(config_err(format!("m out of range: {m} (expected 0..=4)")));
    }
    let m = m as usize;
    let s: Vec<C64> = raw.s.unwrap_or_default().iter().map(Number::value).collect();
    let t: Vec<C64> = raw.t.unwrap_or_default().iter().map(Number::value).collect();
    Ok(CouplingSpec::Explicit(StCoupling::new(m, s, t, a)?))
}

/// Scan settings over the defaults for the edge length; a custom range
/// without `k_steps` keeps the default density.
fn parse_scan(v: Option<&Value>, a: f64) -> Result<ScanConfig, CliError> {
    let Some(v) = v else {
        return Ok(ScanConfig::for_edge_length(a));
    };
    let obj = v.as_object().ok_or_else(|| config_err("field `scan` must be an object"))?;
    let base = ScanConfig::for_edge_length(a);
    let k_min = field::<f64>(obj, "k_min")?.unwrap_or(base.k_min);
    let k_max = field::<f64>(obj, "k_max")?.unwrap_or(base.k_max);
    let mut merged = serde_json::to_value(ScanConfig::for_range(k_min, k_max, a)).expect("serializable");
    let known: Vec<String> = merged.as_object().unwrap().keys().cloned().collect();
    for (k, val) in obj {
        if !known.contains(k) {
            return Err(config_err(format!("field `scan.{k}` is unknown")));
        }
        merged[k] = val.clone();
    }
    let cfg: ScanConfig = serde_json::from_value(merged).map_err(|e| config_err(format!("field `scan`: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Parses a JSON run configuration. The coupling sits under `coupling` or
/// directly at the top level.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let root: Value = serde_json::from_str(text).map_err(|e| config_err(format!("not valid JSON: {e}")))?;
    let obj = root.as_object().ok_or_else(|| config_err("top level must be an object"))?;
    for k in obj.keys() {
        if !TOP_KEYS.contains(&k.as_str()) && !COUPLING_KEYS.contains(&k.as_str()) {
            return Err(config_err(format!("field `{k}` is unknown")));
        }
    }
    let coupling_value = match obj.get("coupling") {
        Some(v) => {
            if COUPLING_KEYS.iter().any(|k| obj.contains_key(*k)) {
                return Err(config_err("coupling fields given both under `coupling` and at the top level"));
            }
            v.clone()
        }
        None => Value::Object(
            obj.iter().filter(|(k, _)| COUPLING_KEYS.contains(&k.as_str())).map(|(k, v)| (k.clone(), v.clone())).collect(),
        ),
    };
    let coupling = parse_coupling(coupling_value)?;
    let a = coupling.edge_length();
    let scan = parse_scan(obj.get("scan"), a)?;
    let compare = match field::<CompareRange>(obj, "compare")? {
        Some(r) => r,
        None => default_compare(&scan, a),
    };
    if compare.n_min == 0 || compare.n_min > compare.n_max {
        return Err(config_err("field `compare`: need 1 <= n_min <= n_max"));
    }
    let outputs: Vec<OutputSpec> = field(obj, "outputs")?.unwrap_or_default();
    let command = field(obj, "command")?;
    Ok(RunConfig {
        command,
        coupling,
        scan,
        compare,
        outputs,
    })
}

fn default_compare(scan: &ScanConfig, a: f64) -> CompareRange {
    let top = ((scan.k_max * a / PI).floor() as usize).saturating_sub(1).max(1);
    CompareRange {
        n_min: (top / 2).max(1),
        n_max: top,
    }
}

fn coupling_value(spec: &CouplingSpec) -> Value {
    let raw = match spec {
        CouplingSpec::Preset { class, edge_length } => RawCoupling {
            m: None,
            a: Some(*edge_length),
            s: None,
            t: None,
            preset: Some(PresetRef {
                name: class.tag().to_string(),
                params: class.params(),
            }),
        },
        CouplingSpec::Explicit(c) => RawCoupling {
            m: Some(c.rank() as i64),
            a: Some(c.edge_length()),
            s: Some(c.s_upper().iter().map(|z| Number::Pair([z.re, z.im])).collect()),
            t: Some(c.t_entries().iter().map(|z| Number::Pair([z.re, z.im])).collect()),
            preset: None,
        },
    };
    serde_json::to_value(raw).expect("serializable")
}

/// Canonical JSON text of a configuration; [`parse_config`] inverts it.
pub fn serialize_config(cfg: &RunConfig) -> String {
    let mut obj = Map::new();
    if let Some(c) = cfg.command {
        obj.insert("command".into(), serde_json::to_value(c).unwrap());
    }
    obj.insert("coupling".into(), coupling_value(&cfg.coupling));
    obj.insert("scan".into(), serde_json::to_value(cfg.scan).unwrap());
    obj.insert("compare".into(), serde_json::to_value(cfg.compare).unwrap());
    obj.insert("outputs".into(), serde_json::to_value(&cfg.outputs).unwrap());
    to_json(&Value::Object(obj))
}

/// Writes every float with 17 significant digits.
struct PreciseFormatter(serde_json::ser::PrettyFormatter<'static>);

impl serde_json::ser::Formatter for PreciseFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(fmt_float(value).as_bytes())
    }
    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// 17 significant digits, exponent form; non-finite values become `null`.
pub fn fmt_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".into()
    }
}

/// Pretty JSON with 17-digit floats and a trailing newline.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, PreciseFormatter(serde_json::ser::PrettyFormatter::new()));
    value.serialize(&mut ser).expect("in-memory serialization");
    buf.push(b'\n');
    String::from_utf8(buf).expect("JSON is UTF-8")
}

fn csv_text(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).expect("in-memory CSV");
    for r in rows {
        w.write_record(&r).expect("in-memory CSV");
    }
    String::from_utf8(w.into_inner().expect("in-memory CSV")).expect("CSV is UTF-8")
}

fn opt_float(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

/// One band per row.
pub fn spectrum_csv(r: &SpectrumReport) -> String {
    csv_text(
        &["e_lo", "e_hi", "kind", "index_hint"],
        r.bands
            .iter()
            .map(|b| {
                vec![
                    fmt_float(b.e_lo),
                    fmt_float(b.e_hi),
                    b.kind.as_str().to_string(),
                    b.index_hint.map(|n| n.to_string()).unwrap_or_default(),
                ]
            })
            .collect(),
    )
}

/// Band rows read back from [`spectrum_csv`]: `(e_lo, e_hi, kind)`.
pub fn read_spectrum_csv(text: &str) -> Result<Vec<(f64, f64, String)>, CliError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.records()
        .map(|rec| {
            let rec = rec.map_err(config_err)?;
            let num = |i: usize| rec[i].parse::<f64>().map_err(config_err);
            Ok((num(0)?, num(1)?, rec[2].to_string()))
        })
        .collect()
}

pub fn classify_csv(r: &AsymptoticReport) -> String {
    let tag = |v: Value| v.as_str().unwrap_or_default().to_string();
    csv_text(
        &["regime", "anchor", "band_law", "gap_law", "quantity", "borderline", "case", "constants"],
        r.regimes
            .iter()
            .enumerate()
            .map(|(i, g)| {
                vec![
                    i.to_string(),
                    tag(serde_json::to_value(g.anchor).unwrap()),
                    tag(serde_json::to_value(g.band_law).unwrap()),
                    tag(serde_json::to_value(g.gap_law).unwrap()),
                    tag(serde_json::to_value(g.quantity).unwrap()),
                    g.borderline.to_string(),
                    g.case.clone(),
                    g.constants.iter().map(|c| format!("{}={}", c.name, fmt_float(c.value))).collect::<Vec<_>>().join(";"),
                ]
            })
            .collect(),
    )
}

pub fn compare_csv(t: &ComparisonTable) -> String {
    csv_text(
        &["regime", "n", "quantity", "numeric", "predicted", "ratio", "predicted_exponent", "fitted_exponent"],
        t.rows
            .iter()
            .map(|row| {
                let fit = &t.fits[row.regime];
                vec![
                    row.regime.to_string(),
                    row.n.to_string(),
                    match row.quantity {
                        crate::asymptotics::Quantity::Band => "band".into(),
                        crate::asymptotics::Quantity::Gap => "gap".into(),
                    },
                    opt_float(row.numeric),
                    fmt_float(row.predicted),
                    opt_float(row.ratio),
                    fit.predicted_exponent.map(|e| e.to_string()).unwrap_or_default(),
                    opt_float(fit.fitted_exponent),
                ]
            })
            .collect(),
    )
}

/// `k` against the torus minimum and maximum of the dispersion function,
/// as two blocks.
pub fn plot_data(c: &StCoupling, cfg: &ScanConfig) -> String {
    use rayon::prelude::*;
    let steps = cfg.k_steps.min(20_000);
    let h = (cfg.k_max - cfg.k_min) / steps as f64;
    let pts: Vec<(f64, f64, f64)> = (0..=steps)
        .into_par_iter()
        .map(|i| {
            let k = cfg.k_min + h * i as f64;
            let t = torus_extrema(c, k, cfg.theta_grid);
            (k, t.f_min, t.f_max)
        })
        .collect();
    let mut out = String::from("# f_min\n# k value\n");
    for (k, lo, _) in &pts {
        out.push_str(&format!("{} {}\n", fmt_float(*k), fmt_float(*lo)));
    }
    out.push_str("\n\n# f_max\n# k value\n");
    for (k, _, hi) in &pts {
        out.push_str(&format!("{} {}\n", fmt_float(*k), fmt_float(*hi)));
    }
    out
}

#[derive(Serialize)]
pub struct ValidateReport {
    pub m: usize,
    pub edge_length: f64,
    pub preset: String,
    pub ab: AbValidation,
    /// Absent for `m = 0`, which has no polynomial form.
    pub oracle: Option<OracleReport>,
}

#[derive(Serialize)]
struct PresetEntry {
    name: &'static str,
    params: &'static str,
}

/// Rendered artifacts of one command.
pub struct Artifacts {
    pub json: String,
    pub csv: Option<String>,
    pub plot: Option<String>,
}

/// Executes the command and renders every format it supports.
pub fn execute(command: Command, cfg: &RunConfig) -> Result<Artifacts, CliError> {
    if command == Command::Presets {
        let list: Vec<PresetEntry> =
            CouplingClass::catalogue().into_iter().map(|(name, params)| PresetEntry { name, params }).collect();
        let csv = csv_text(&["name", "params"], list.iter().map(|p| vec![p.name.into(), p.params.into()]).collect());
        return Ok(Artifacts {
            json: to_json(&list),
            csv: Some(csv),
            plot: None,
        });
    }
    let c = cfg.coupling.build()?;
    match command {
        Command::Validate => {
            let ab = st_to_ab(&c);
            let ab_report = validate_ab(&ab.a, &ab.b);
            if !ab_report.is_valid() {
                return Err(CliError::Invalid(format!("{:?}", ab_report.failures)));
            }
            let oracle = match oracle_match(&c, &OracleConfig::default()) {
                Ok(r) => Some(r),
                Err(FiberError::NoPolynomialForm) => None,
                Err(e) => return Err(CliError::Oracle(Box::new(e))),
            };
            let report = ValidateReport {
                m: c.rank(),
                edge_length: c.edge_length(),
                preset: crate::coupling::classify_coupling(&c).tag().to_string(),
                ab: ab_report,
                oracle,
            };
            Ok(Artifacts {
                json: to_json(&report),
                csv: None,
                plot: None,
            })
        }
        Command::Scan => {
            let r = scan_bands(&c, &cfg.scan)?;
            Ok(Artifacts {
                json: to_json(&r),
                csv: Some(spectrum_csv(&r)),
                plot: Some(plot_data(&c, &cfg.scan)),
            })
        }
        Command::Classify => {
            let r = classify(&c);
            Ok(Artifacts {
                json: to_json(&r),
                csv: Some(classify_csv(&r)),
                plot: None,
            })
        }
        Command::Compare => {
            let top = cfg.scan.k_max * c.edge_length() / PI - 1.0;
            if cfg.compare.n_max as f64 > top {
                return Err(config_err(format!(
                    "field `compare`: n_max = {} exceeds the scanned range (at most {})",
                    cfg.compare.n_max,
                    top.floor()
                )));
            }
            let spec = scan_bands(&c, &cfg.scan)?;
            let t = compare_with(&spec, &classify(&c), cfg.compare.n_min..=cfg.compare.n_max);
            Ok(Artifacts {
                json: to_json(&t),
                csv: Some(compare_csv(&t)),
                plot: None,
            })
        }
        Command::Presets => unreachable!(),
    }
}

fn write_out(path: &str, text: &str) -> Result<(), CliError> {
    if path == "-" {
        let mut out = io::stdout().lock();
        out.write_all(text.as_bytes()).and_then(|_| out.flush()).map_err(|source| CliError::Io {
            path: "<stdout>".into(),
            source,
        })
    } else {
        std::fs::write(path, text).map_err(|source| CliError::Io {
            path: path.into(),
            source,
        })
    }
}

/// Writes each requested artifact; JSON to standard output when none is requested.
pub fn run(command: Command, cfg: &RunConfig) -> Result<(), CliError> {
    let art = execute(command, cfg)?;
    let default = [OutputSpec {
        format: Format::Json,
        path: "-".into(),
    }];
    let outputs = if cfg.outputs.is_empty() { &default[..] } else { &cfg.outputs[..] };
    for o in outputs {
        let text = match o.format {
            Format::Json => Some(&art.json),
            Format::Csv => art.csv.as_ref(),
            Format::PlotData => art.plot.as_ref(),
        };
        let text = text.ok_or_else(|| config_err(format!("{:?} output is not available for {command:?}", o.format)))?;
        write_out(&o.path, text)?;
    }
    Ok(())
}

#[derive(Parser, Debug)]
#[command(name = "qlattice", version, about = "Band spectra of square-lattice quantum graphs")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// JSON configuration; `-` reads standard input.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `path`, or `format:path` with format json, csv or plot-data; `-` is stdout.
    #[arg(long = "out")]
    pub out: Vec<String>,
}

fn read_config(path: &Path) -> Result<String, CliError> {
    let io_err = |source| CliError::Io {
        path: path.display().to_string(),
        source,
    };
    if path == Path::new("-") {
        let mut s = String::new();
        io::Read::read_to_string(&mut io::stdin(), &mut s).map_err(io_err)?;
        Ok(s)
    } else {
        std::fs::read_to_string(path).map_err(io_err)
    }
}

/// Entry point behind the binary; returns the exit status.
pub fn main_with(cli: Cli) -> i32 {
    let result = (|| {
        let mut cfg = match &cli.config {
            Some(p) => parse_config(&read_config(p)?)?,
            None if cli.command == Command::Presets => RunConfig {
                command: None,
                coupling: CouplingSpec::Preset {
                    class: CouplingClass::Dirichlet,
                    edge_length: 1.0,
                },
                scan: ScanConfig::for_edge_length(1.0),
                compare: CompareRange { n_min: 1, n_max: 1 },
                outputs: vec![],
            },
            None => return Err(config_err("--config is required")),
        };
        if !cli.out.is_empty() {
            cfg.outputs = cli.out.iter().map(|s| OutputSpec::parse(s)).collect::<Result<_, _>>()?;
        }
        run(cli.command, &cfg)
    })();
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("qlattice: {e}");
            if let CliError::Oracle(inner) = &e {
                if let FiberError::OracleMismatch { report, .. } = inner.as_ref() {
                    eprintln!("{}", to_json(report.as_ref()));
                }
            }
            e.exit_code()
        }
    }
}

/// Sizes the global thread pool from `QLATTICE_THREADS`.
pub fn init_threads() {
    if let Some(n) = std::env::var("QLATTICE_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}
