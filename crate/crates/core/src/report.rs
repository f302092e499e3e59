//! Scenario configs, report bundles and plot-data export.
//!
//! A bundle is a pure function of the effective config: no timestamps, no
//! absolute paths, ordered maps only. Rerunning a config reproduces it byte
//! for byte.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::conjugacy::{
    check_critical_order, kneading_data, verify_conjugacy, Conjugacy, ConjugacyTable, CriticalOrderRecord, KneadingData,
    OrderStatus, Orientation, ResidualReport, LEVEL_CAP,
};
use crate::interval::Interval;
use crate::map_core::{MapError, MapFamilyConfig, MultimodalMap, Precision, ValidationReport};
use crate::orbit::{self, certify_expanding, estimate_mane_constants, hypothesis_gate, verify_witness, GateReport, ManeEstimate};
use crate::regularity::{
    c1_at_point, find_zooming_pair, holder_exponent, lrd_triple, smoothness_report, C1Verdict, DichotomyReport,
    DichotomyVerdict, HolderFit, LrdTriple, MultiplierRecord, RegularityError, SmoothnessConfig, UaaReport,
    ZoomingWitnessPair,
};
use crate::renormalization::{
    build_nice_set, compute_basin, find_renormalization_intervals, GapDecomposition, NiceSet, RenormalizationInterval,
};

pub const BUNDLE_FILE: &str = "bundle.json";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("config error: {0}")]
    Config(String),
    #[error("diagnostic `{0}` is not present in the bundle")]
    MissingDiagnostic(String),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io { path: path.to_path_buf(), source }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Diagnostic {
    Conjugacy,
    Lrd,
    Uaa,
    C1,
    Holder,
    Zooming,
    Multipliers,
    Renormalization,
    Mane,
    NiceSet,
}

impl Diagnostic {
    pub const ALL: [Diagnostic; 10] = [
        Diagnostic::Conjugacy,
        Diagnostic::Lrd,
        Diagnostic::Uaa,
        Diagnostic::C1,
        Diagnostic::Holder,
        Diagnostic::Zooming,
        Diagnostic::Multipliers,
        Diagnostic::Renormalization,
        Diagnostic::Mane,
        Diagnostic::NiceSet,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Diagnostic::Conjugacy => "conjugacy",
            Diagnostic::Lrd => "lrd",
            Diagnostic::Uaa => "uaa",
            Diagnostic::C1 => "c1",
            Diagnostic::Holder => "holder",
            Diagnostic::Zooming => "zooming",
            Diagnostic::Multipliers => "multipliers",
            Diagnostic::Renormalization => "renormalization",
            Diagnostic::Mane => "mane",
            Diagnostic::NiceSet => "nice_set",
        }
    }

    pub fn parse(s: &str) -> Option<Diagnostic> {
        Diagnostic::ALL.into_iter().find(|d| d.id() == s)
    }

    /// Diagnostics that evaluate `h` and so need the conjugacy first.
    fn needs_conjugacy(self) -> bool {
        !matches!(self, Diagnostic::Mane | Diagnostic::NiceSet | Diagnostic::Renormalization)
    }
}

/// Numerical parameters; every diagnostic has a usable default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Parameters {
    pub scales: usize,
    pub ratio_bounds: Vec<f64>,
    pub lrd_triples: usize,
    pub lrd_radius: f64,
    pub residual_samples: usize,
    pub period_max: usize,
    pub gate_period_max: usize,
    pub renormalization_n_max: usize,
    pub basin_n_max: usize,
    pub holder_interval: Option<[f64; 2]>,
    pub zooming_alpha: f64,
    pub zooming_k_max: usize,
    pub expanding_delta: f64,
    pub expanding_k_max: usize,
    pub mane_gamma: f64,
    pub mane_samples: usize,
    pub mane_n_max: usize,
    pub nice_epsilon: f64,
    pub nice_horizon: usize,
}

impl Default for Parameters {
    fn default() -> Self {
        Parameters {
            scales: 12,
            ratio_bounds: crate::regularity::DEFAULT_RATIOS.to_vec(),
            lrd_triples: 256,
            lrd_radius: 0.05,
            residual_samples: 1000,
            period_max: 4,
            gate_period_max: 8,
            renormalization_n_max: 4,
            basin_n_max: 64,
            holder_interval: None,
            zooming_alpha: 1.0,
            zooming_k_max: 10,
            expanding_delta: 0.05,
            expanding_k_max: 8,
            mane_gamma: 0.1,
            mane_samples: 64,
            mane_n_max: 12,
            nice_epsilon: 0.05,
            nice_horizon: 10_000,
        }
    }
}

/// Pass/fail thresholds applied to the records.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Residual bound as a multiple of the largest cell width.
    pub residual_factor: f64,
    /// Tolerance of the post-hoc witness check.
    pub witness: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { residual_factor: 2.0, witness: 1e-9 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub map_f: MapFamilyConfig,
    /// A family, or `family = "smooth_conjugate"` for a smooth conjugate of one.
    pub map_g: MapFamilyConfig,
    #[serde(default = "default_depth")]
    pub depth: usize,
    #[serde(default)]
    pub diagnostics: BTreeSet<Diagnostic>,
    /// Interior sample points; defaults to the grid `k / 8`.
    #[serde(default)]
    pub sample_points: Vec<f64>,
    #[serde(default)]
    pub parameters: Parameters,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub precision: Precision,
}

fn default_depth() -> usize {
    10
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, ReportError> {
        toml::from_str(text).map_err(|e| ReportError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ReportError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_toml(&text)
    }

    pub fn samples(&self, domain: Interval) -> Vec<f64> {
        if self.sample_points.is_empty() {
            (1..8).map(|k| domain.at(k as f64 / 8.0)).collect()
        } else {
            self.sample_points.clone()
        }
    }

    /// Canonical JSON of the effective config with the output location
    /// blanked, so a relocated rerun hashes identically.
    pub fn canonical_json(&self) -> String {
        let mut c = self.clone();
        c.out = PathBuf::new();
        serde_json::to_string(&c).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        hex_digest(self.canonical_json().as_bytes())
    }
}

fn hex_digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Builds both maps and checks every parameter the requested diagnostics need.
pub fn validate_config(cfg: &ScenarioConfig) -> Result<Vec<ValidationReport>, ReportError> {
    let bad = |m: &str| Err(ReportError::Config(m.to_string()));
    if cfg.depth == 0 || cfg.depth > LEVEL_CAP {
        return bad(&format!("depth must lie in 1..={LEVEL_CAP}"));
    }
    let f = cfg.map_f.build(cfg.precision)?;
    let g = cfg.map_g.build(cfg.precision)?;
    if f.branches().len() != g.branches().len() {
        return bad("map_f and map_g have different numbers of laps");
    }
    let d = f.domain();
    if cfg.samples(d).iter().any(|&x| !d.contains(x)) {
        return bad("sample point outside the domain of map_f");
    }
    let p = &cfg.parameters;
    let uses = |x: Diagnostic| cfg.diagnostics.contains(&x);
    if (uses(Diagnostic::Uaa) || uses(Diagnostic::C1) || uses(Diagnostic::Holder)) && !(2..=40).contains(&p.scales) {
        return bad("parameters.scales must lie in 2..=40");
    }
    if uses(Diagnostic::Uaa) && (p.ratio_bounds.is_empty() || p.ratio_bounds.iter().any(|&c| c <= 1.0)) {
        return bad("parameters.ratio_bounds must be non-empty with every bound > 1");
    }
    if uses(Diagnostic::Lrd) && (p.lrd_triples == 0 || p.lrd_radius <= 0.0) {
        return bad("parameters.lrd_triples and lrd_radius must be positive");
    }
    if uses(Diagnostic::Multipliers) && p.period_max == 0 {
        return bad("parameters.period_max must be positive");
    }
    if uses(Diagnostic::Renormalization) && p.renormalization_n_max < 2 {
        return bad("parameters.renormalization_n_max must be at least 2");
    }
    if uses(Diagnostic::Mane) && (p.mane_gamma <= 0.0 || p.mane_samples == 0 || p.mane_n_max == 0) {
        return bad("parameters.mane_gamma, mane_samples and mane_n_max must be positive");
    }
    if uses(Diagnostic::NiceSet) && (p.nice_epsilon <= 0.0 || p.nice_horizon == 0) {
        return bad("parameters.nice_epsilon and nice_horizon must be positive");
    }
    if uses(Diagnostic::Zooming) && (p.zooming_k_max < 3 || p.expanding_delta <= 0.0) {
        return bad("parameters.zooming_k_max must be at least 3 and expanding_delta positive");
    }
    if let Some([a, b]) = p.holder_interval {
        if !(a < b && d.contains(a) && d.contains(b)) {
            return bad("parameters.holder_interval must be an increasing pair inside the domain");
        }
    }
    Ok(vec![f.validate_multimodal(), g.validate_multimodal()])
}

/// Bit-exact float text: `0x1.8p-1`, `-0x0p+0`, `inf`, `nan`.
pub mod hexfloat {
    pub fn format(x: f64) -> String {
        if x.is_nan() {
            return "nan".into();
        }
        let sign = if x.is_sign_negative() { "-" } else { "" };
        if x.is_infinite() {
            return format!("{sign}inf");
        }
        let bits = x.to_bits();
        let exp = ((bits >> 52) & 0x7ff) as i64;
        let mant = bits & ((1u64 << 52) - 1);
        if exp == 0 && mant == 0 {
            return format!("{sign}0x0p+0");
        }
        let (lead, e) = if exp == 0 { (0, -1022) } else { (1, exp - 1023) };
        let mut frac = format!("{mant:013x}");
        while frac.ends_with('0') {
            frac.pop();
        }
        let dot = if frac.is_empty() { String::new() } else { format!(".{frac}") };
        format!("{sign}0x{lead}{dot}p{e:+}")
    }

    pub fn parse(s: &str) -> Option<f64> {
        let (neg, t) = match s.strip_prefix('-') {
            Some(t) => (true, t),
            None => (false, s),
        };
        let v = match t {
            "nan" => f64::NAN,
            "inf" => f64::INFINITY,
            _ => {
                let t = t.strip_prefix("0x")?;
                let (m, e) = t.split_once('p')?;
                let e: i64 = e.parse().ok()?;
                let (lead, frac) = m.split_once('.').unwrap_or((m, ""));
                if frac.len() > 13 || !matches!(lead, "0" | "1") {
                    return None;
                }
                let mant = if frac.is_empty() { 0 } else { u64::from_str_radix(&format!("{frac:0<13}"), 16).ok()? };
                let bits = match (lead, e) {
                    ("0", -1022) | ("0", 0) if mant == 0 => 0,
                    ("0", -1022) => mant,
                    ("1", -1022..=1023) => (((e + 1023) as u64) << 52) | mant,
                    _ => return None,
                };
                f64::from_bits(bits)
            }
        };
        Some(if neg { -v } else { v })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HexInterval {
    pub lo: String,
    pub hi: String,
}

impl HexInterval {
    pub fn of(iv: Interval) -> Self {
        HexInterval { lo: hexfloat::format(iv.lo), hi: hexfloat::format(iv.hi) }
    }

    pub fn decode(&self) -> Option<Interval> {
        Some(Interval { lo: hexfloat::parse(&self.lo)?, hi: hexfloat::parse(&self.hi)? })
    }
}

/// Success value or error text; errors in one diagnostic never abort the run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome<T> {
    Ok(T),
    Err(String),
}

impl<T> Outcome<T> {
    fn of<E: std::fmt::Display>(r: Result<T, E>) -> Self {
        match r {
            Ok(v) => Outcome::Ok(v),
            Err(e) => Outcome::Err(e.to_string()),
        }
    }

    pub fn ok(&self) -> Option<&T> {
        match self {
            Outcome::Ok(v) => Some(v),
            Outcome::Err(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateRecord {
    pub f: Outcome<GateReport>,
    pub g: Outcome<GateReport>,
    /// Filled once the conjugacy exists.
    pub critical_orders: Vec<CriticalOrderRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConjugacyRecord {
    pub orientation: Orientation,
    pub kneading_f: KneadingData,
    pub kneading_g: KneadingData,
    pub residual: ResidualReport,
    pub residual_within_tolerance: bool,
    pub table: ConjugacyTable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrdPointRecord {
    pub p: f64,
    pub count: usize,
    pub max: f64,
    pub mean: f64,
    pub worst: Option<LrdTriple>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapRecord {
    pub g: HexInterval,
    pub entry_time: usize,
    pub landing: usize,
    pub certified: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasinRecord {
    pub target: Vec<HexInterval>,
    pub gaps: Vec<GapRecord>,
    pub basin_fraction: f64,
    pub core: HexInterval,
    pub core_fraction: f64,
}

impl BasinRecord {
    fn of(d: &GapDecomposition) -> Self {
        BasinRecord {
            target: d.target.iter().copied().map(HexInterval::of).collect(),
            gaps: d
                .gaps
                .iter()
                .map(|g| GapRecord {
                    g: HexInterval::of(g.g),
                    entry_time: g.entry_time,
                    landing: g.landing,
                    certified: g.certified,
                })
                .collect(),
            basin_fraction: d.basin_fraction,
            core: HexInterval::of(d.core),
            core_fraction: d.core_fraction,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenormalizationRecord {
    pub intervals: Vec<RenormalizationInterval>,
    pub basin: Option<BasinRecord>,
    /// C¹ verdicts at the boundary of each interval.
    pub boundary_c1: Vec<C1Verdict>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NiceComponentRecord {
    pub turning_point: String,
    pub interval: HexInterval,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NiceSetRecord {
    pub epsilon: f64,
    pub horizon: usize,
    pub components: Vec<NiceComponentRecord>,
    pub recheck_horizon: usize,
    pub recheck_passed: bool,
}

impl NiceSetRecord {
    fn of(s: &NiceSet, recheck_horizon: usize, recheck_passed: bool) -> Self {
        NiceSetRecord {
            epsilon: s.epsilon,
            horizon: s.horizon,
            components: s
                .components
                .iter()
                .map(|c| NiceComponentRecord {
                    turning_point: hexfloat::format(c.turning_point),
                    interval: HexInterval::of(c.interval),
                })
                .collect(),
            recheck_horizon,
            recheck_passed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZoomingRecord {
    pub p: f64,
    pub pair: Outcome<ZoomingWitnessPair>,
    /// Post-hoc check of the `f`-side expansion witness at `p`.
    pub expansion_verified: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Records {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conjugacy: Option<ConjugacyRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lrd: Option<Vec<LrdPointRecord>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub uaa: Option<Vec<UaaReport>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c1: Option<Vec<C1Verdict>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub holder: Option<Outcome<HolderFit>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zooming: Option<Vec<ZoomingRecord>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub multipliers: Option<Vec<MultiplierRecord>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub renormalization: Option<RenormalizationRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mane: Option<Outcome<ManeEstimate>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nice_set: Option<Outcome<NiceSetRecord>>,
    /// Diagnostic id to error text.
    pub errors: BTreeMap<String, String>,
    /// Sample points left out, with the reason.
    pub skipped: Vec<(f64, String)>,
    pub notes: Vec<String>,
}

impl Records {
    pub fn has(&self, d: Diagnostic) -> bool {
        match d {
            Diagnostic::Conjugacy => self.conjugacy.is_some(),
            Diagnostic::Lrd => self.lrd.is_some(),
            Diagnostic::Uaa => self.uaa.is_some(),
            Diagnostic::C1 => self.c1.is_some(),
            Diagnostic::Holder => self.holder.is_some(),
            Diagnostic::Zooming => self.zooming.is_some(),
            Diagnostic::Multipliers => self.multipliers.is_some(),
            Diagnostic::Renormalization => self.renormalization.is_some(),
            Diagnostic::Mane => self.mane.is_some(),
            Diagnostic::NiceSet => self.nice_set.is_some(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    SmoothEverywhereConsistent,
    RenormalizationLocked,
    Inconclusive,
    HypothesisViolation,
    /// The dichotomy needs c1, multipliers and renormalization.
    NotEvaluated,
}

impl From<DichotomyVerdict> for Verdict {
    fn from(v: DichotomyVerdict) -> Self {
        match v {
            DichotomyVerdict::SmoothEverywhereConsistent => Verdict::SmoothEverywhereConsistent,
            DichotomyVerdict::RenormalizationLocked => Verdict::RenormalizationLocked,
            DichotomyVerdict::Inconclusive => Verdict::Inconclusive,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenario: String,
    pub verdict: Verdict,
    pub hypothesis_violation: Option<String>,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_sha256: String,
    pub crate_version: String,
    pub format_version: u32,
    pub seed: u64,
    pub precision: Precision,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative to the output directory.
    pub path: String,
    /// Absent for the bundle itself.
    pub sha256: Option<String>,
    pub bytes: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub summary: Summary,
    pub validation: Vec<ValidationReport>,
    pub gate: GateRecord,
    pub records: Records,
    pub provenance: Provenance,
    pub manifest: Vec<ManifestEntry>,
}

impl ReportBundle {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("bundle serializes");
        s.push('\n');
        s
    }

    pub fn load(path: &Path) -> Result<Self, ReportError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn lrd_samples(h: &ConjugacyTable, p: f64, cfg: &ScenarioConfig) -> LrdPointRecord {
    let d = h.domain();
    let r = cfg.parameters.lrd_radius;
    let ball = Interval::new(d.clamp(p - r), d.clamp(p + r));
    let mut rng = crate::rng::stream(cfg.seed, &format!("lrd:{p:e}"));
    let (mut count, mut sum, mut worst) = (0usize, 0.0, None::<LrdTriple>);
    for _ in 0..cfg.parameters.lrd_triples {
        let mut t = [0.0; 3].map(|_| ball.at(rng.gen::<f64>()));
        t.sort_by(f64::total_cmp);
        if let Ok(tr) = lrd_triple(|x| h.eval(x), t[0], t[1], t[2]) {
            count += 1;
            sum += tr.value;
            if worst.is_none_or(|w| tr.value > w.value) {
                worst = Some(tr);
            }
        }
    }
    LrdPointRecord {
        p,
        count,
        max: worst.map_or(0.0, |w| w.value),
        mean: if count > 0 { sum / count as f64 } else { 0.0 },
        worst,
    }
}

fn smoothness_config(cfg: &ScenarioConfig, points: Vec<f64>) -> SmoothnessConfig {
    let p = &cfg.parameters;
    SmoothnessConfig {
        sample_points: points,
        scales: p.scales,
        ratio_bounds: p.ratio_bounds.clone(),
        period_max: p.period_max,
        renormalization_n_max: p.renormalization_n_max,
        expanding_delta: p.expanding_delta,
        seed: cfg.seed,
    }
}

/// Runs the gate and the requested diagnostics in dependency order and
/// assembles the bundle; nothing is written.
pub fn assemble(cfg: &ScenarioConfig) -> Result<ReportBundle, ReportError> {
    let validation = validate_config(cfg)?;
    let f = cfg.map_f.build(cfg.precision)?;
    let g = cfg.map_g.build(cfg.precision)?;
    let par = &cfg.parameters;
    let uses = |x: Diagnostic| cfg.diagnostics.contains(&x);
    let mut rec = Records::default();
    let gp = par.gate_period_max;
    let (gf, gg) = rayon::join(
        || Outcome::of(hypothesis_gate(&f, gp, orbit::DEFAULT_GRID)),
        || Outcome::of(hypothesis_gate(&g, gp, orbit::DEFAULT_GRID)),
    );
    let mut gate = GateRecord { f: gf, g: gg, critical_orders: Vec::new() };
    let mut violation = None;
    for (name, o) in [("map_f", &gate.f), ("map_g", &gate.g)] {
        match o {
            Outcome::Ok(r) if !r.passed() => {
                let p = &r.offending[0];
                violation.get_or_insert(format!(
                    "{name} has a non-repelling period-{} point at {} (multiplier {})",
                    p.period, p.location, p.multiplier
                ));
            }
            Outcome::Err(e) => {
                rec.notes.push(format!("gate for {name} failed to run: {e}"));
            }
            _ => {}
        }
    }

    let conj = if cfg.diagnostics.iter().any(|d| d.needs_conjugacy()) {
        match Conjugacy::new(&f, &g, cfg.depth) {
            Ok(c) => Some(c),
            Err(e) => {
                rec.errors.insert("conjugacy".into(), e.to_string());
                None
            }
        }
    } else {
        None
    };
    if let Some(c) = &conj {
        gate.critical_orders = check_critical_order(&f, &g, c.table());
        if let Some(r) = gate.critical_orders.iter().find(|r| r.status != OrderStatus::Preserved) {
            violation.get_or_insert(format!("turning point {} has status {:?}", r.c_f, r.status));
        }
        if uses(Diagnostic::Conjugacy) {
            let residual = verify_conjugacy(c.table(), &f, &g, par.residual_samples);
            let within = residual.sup_residual <= cfg.tolerances.residual_factor * residual.max_cell_width;
            rec.conjugacy = Some(ConjugacyRecord {
                orientation: c.orientation,
                kneading_f: kneading_data(&f, cfg.depth),
                kneading_g: kneading_data(&g, cfg.depth),
                residual,
                residual_within_tolerance: within,
                table: c.table().clone(),
            });
        }
    }
    let points = cfg.samples(f.domain());

    let mut verdict = Verdict::NotEvaluated;
    let dichotomy = [Diagnostic::C1, Diagnostic::Uaa, Diagnostic::Multipliers, Diagnostic::Renormalization];
    if let Some(c) = &conj {
        if dichotomy.iter().any(|&d| uses(d)) {
            let report = smoothness_report(c, &smoothness_config(cfg, points.clone()));
            let (rep, evaluated): (DichotomyReport, bool) = match report {
                Ok(r) => (r, true),
                Err(RegularityError::HypothesisViolation { reason, partial }) => {
                    violation.get_or_insert(reason);
                    (*partial, false)
                }
                Err(e) => {
                    rec.errors.insert("dichotomy".into(), e.to_string());
                    (DichotomyReport::default(), false)
                }
            };
            if evaluated && [Diagnostic::C1, Diagnostic::Multipliers, Diagnostic::Renormalization].iter().all(|&d| uses(d)) {
                verdict = rep.verdict.into();
            }
            rec.skipped.extend(rep.skipped.iter().cloned());
            rec.notes.extend(rep.notes.iter().cloned());
            if uses(Diagnostic::Multipliers) && (evaluated || !rep.multipliers.is_empty()) {
                rec.multipliers = Some(rep.multipliers.clone());
            }
            if evaluated {
                if uses(Diagnostic::C1) {
                    rec.c1 = Some(rep.c1.clone());
                }
                if uses(Diagnostic::Uaa) {
                    rec.uaa = Some(rep.uaa.clone());
                }
            } else if uses(Diagnostic::C1) {
                // C¹ quotients of h are measurable without the hypotheses
                let c1: Result<Vec<_>, _> = points.iter().map(|&x| c1_at_point(c, x, par.scales)).collect();
                match c1 {
                    Ok(v) => rec.c1 = Some(v),
                    Err(e) => {
                        rec.errors.insert("c1".into(), e.to_string());
                    }
                }
            }
            if uses(Diagnostic::Renormalization) && evaluated {
                rec.renormalization = Some(RenormalizationRecord {
                    basin: basin_of(&f, &rep.renormalization, par.basin_n_max),
                    intervals: rep.renormalization.clone(),
                    boundary_c1: rep.boundary_c1.clone(),
                });
            }
        }
        if uses(Diagnostic::Lrd) {
            rec.lrd = Some(points.iter().map(|&p| lrd_samples(c.table(), p, cfg)).collect());
        }
        if uses(Diagnostic::Holder) {
            let iv = par.holder_interval.map_or(f.domain(), |[a, b]| Interval::new(a, b));
            rec.holder = Some(Outcome::of(holder_exponent(c, iv, par.scales)));
        }
        if uses(Diagnostic::Zooming) {
            rec.zooming = Some(
                points
                    .iter()
                    .map(|&p| {
                        let pair = Outcome::of(find_zooming_pair(c, p, par.zooming_alpha, par.zooming_k_max, par.expanding_delta));
                        let w = certify_expanding(&f, p, par.expanding_delta, par.expanding_k_max, true);
                        ZoomingRecord {
                            p,
                            pair,
                            expansion_verified: w.ok().map(|w| verify_witness(&f, &w, cfg.tolerances.witness)),
                        }
                    })
                    .collect(),
            );
        }
    }
    if uses(Diagnostic::Renormalization) && rec.renormalization.is_none() && !rec.errors.contains_key("conjugacy") {
        // the map-only part is safe without a dichotomy
        match find_renormalization_intervals(&f, par.renormalization_n_max, orbit::DEFAULT_GRID) {
            Ok(js) => {
                rec.renormalization = Some(RenormalizationRecord {
                    basin: basin_of(&f, &js, par.basin_n_max),
                    intervals: js,
                    boundary_c1: Vec::new(),
                })
            }
            Err(e) => {
                rec.errors.insert("renormalization".into(), e.to_string());
            }
        }
    }
    if uses(Diagnostic::Mane) {
        rec.mane = Some(Outcome::of(estimate_mane_constants(&f, par.mane_gamma, par.mane_samples, par.mane_n_max)));
    }
    if uses(Diagnostic::NiceSet) {
        let horizon = 2 * par.nice_horizon;
        rec.nice_set = Some(Outcome::of(
            build_nice_set(&f, par.nice_epsilon, par.nice_horizon).map(|s| NiceSetRecord::of(&s, horizon, s.recheck(&f, horizon))),
        ));
    }
    if violation.is_some() {
        verdict = Verdict::HypothesisViolation;
    }
    Ok(ReportBundle {
        summary: Summary {
            scenario: cfg.name.clone(),
            verdict,
            hypothesis_violation: violation,
            diagnostics: cfg.diagnostics.iter().copied().collect(),
        },
        validation,
        gate,
        records: rec,
        provenance: Provenance {
            config_sha256: cfg.hash(),
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            format_version: FORMAT_VERSION,
            seed: cfg.seed,
            precision: cfg.precision,
        },
        manifest: Vec::new(),
    })
}

fn basin_of(f: &MultimodalMap, js: &[RenormalizationInterval], n_max: usize) -> Option<BasinRecord> {
    let j = js.first()?;
    // the cycle of J: J, f(J), …, f^{n-1}(J)
    let mut target = vec![j.j];
    for k in 1..j.n {
        target.push(crate::renormalization::iterate_image(f, k, j.j).ok()?);
    }
    Some(BasinRecord::of(&compute_basin(f, &target, n_max, orbit::DEFAULT_GRID)))
}

/// CSV files for one diagnostic as `(file name, contents)` pairs.
pub fn plot_data(bundle: &ReportBundle, which: Diagnostic) -> Result<Vec<(String, String)>, ReportError> {
    let missing = || ReportError::MissingDiagnostic(which.id().to_string());
    let r = &bundle.records;
    let per_point = |stem: &str, i: usize| format!("{stem}_{i:03}.csv");
    let files = match which {
        Diagnostic::Conjugacy => vec![("conjugacy.csv".to_string(), r.conjugacy.as_ref().ok_or_else(missing)?.table.to_csv())],
        Diagnostic::Uaa => r
            .uaa
            .as_ref()
            .ok_or_else(missing)?
            .iter()
            .enumerate()
            .map(|(i, u)| {
                let mut s = String::from("scale,C,modulus\n");
                for c in &u.curves {
                    for (sc, m) in c.scales.iter().zip(&c.modulus) {
                        let _ = writeln!(s, "{sc:e},{},{m:e}", c.ratio_bound);
                    }
                }
                (per_point("uaa", i), s)
            })
            .collect(),
        Diagnostic::C1 => r
            .c1
            .as_ref()
            .ok_or_else(missing)?
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let mut s = String::from("scale,quotient\n");
                for (sc, q) in &v.quotients {
                    let _ = writeln!(s, "{sc:e},{q:e}");
                }
                (per_point("c1", i), s)
            })
            .collect(),
        Diagnostic::Holder => {
            let fit = r.holder.as_ref().and_then(Outcome::ok).ok_or_else(missing)?;
            let mut s = String::from("scale,oscillation\n");
            for (w, o) in &fit.oscillation {
                let _ = writeln!(s, "{w:e},{o:e}");
            }
            vec![("holder.csv".to_string(), s)]
        }
        Diagnostic::Multipliers => {
            let mut s = String::from("period,point_f,mult_f,point_g,mult_g,match\n");
            for m in r.multipliers.as_ref().ok_or_else(missing)? {
                let _ = writeln!(s, "{},{:e},{:e},{:e},{:e},{}", m.period, m.point_f, m.mult_f, m.point_g, m.mult_g, m.matched);
            }
            vec![("multipliers.csv".to_string(), s)]
        }
        Diagnostic::Lrd => {
            let mut s = String::from("p,count,max,mean\n");
            for l in r.lrd.as_ref().ok_or_else(missing)? {
                let _ = writeln!(s, "{:e},{},{:e},{:e}", l.p, l.count, l.max, l.mean);
            }
            vec![("lrd.csv".to_string(), s)]
        }
        Diagnostic::Renormalization => {
            let rr = r.renormalization.as_ref().ok_or_else(missing)?;
            let mut s = String::from("n,lo,hi\n");
            for j in &rr.intervals {
                let _ = writeln!(s, "{},{},{}", j.n, hexfloat::format(j.j.lo), hexfloat::format(j.j.hi));
            }
            let mut out = vec![("renormalization.csv".to_string(), s)];
            if let Some(b) = &rr.basin {
                let mut s = String::from("lo,hi,entry_time,landing,certified\n");
                for g in &b.gaps {
                    let _ = writeln!(s, "{},{},{},{},{}", g.g.lo, g.g.hi, g.entry_time, g.landing, g.certified);
                }
                out.push(("basin.csv".to_string(), s));
            }
            out
        }
        Diagnostic::NiceSet => {
            let n = r.nice_set.as_ref().and_then(Outcome::ok).ok_or_else(missing)?;
            let mut s = String::from("turning_point,lo,hi\n");
            for c in &n.components {
                let _ = writeln!(s, "{},{},{}", c.turning_point, c.interval.lo, c.interval.hi);
            }
            vec![("nice_set.csv".to_string(), s)]
        }
        Diagnostic::Zooming | Diagnostic::Mane => return Err(missing()),
    };
    Ok(files)
}

/// Whether a diagnostic has a flat plot-data form.
pub fn exportable(d: Diagnostic) -> bool {
    !matches!(d, Diagnostic::Zooming | Diagnostic::Mane)
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<ManifestEntry, ReportError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(io_err(&path))?;
    Ok(ManifestEntry {
        path: name.to_string(),
        sha256: Some(hex_digest(contents.as_bytes())),
        bytes: Some(contents.len() as u64),
    })
}

/// Writes the CSV files of one diagnostic into `dir`.
pub fn export_plot_data(bundle: &ReportBundle, which: Diagnostic, dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    plot_data(bundle, which)?
        .into_iter()
        .map(|(name, s)| write_file(dir, &name, &s).map(|_| dir.join(name)))
        .collect()
}

/// Assembles the bundle, writes it with the plot data of every present
/// diagnostic under `cfg.out`, and returns it.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ReportBundle, ReportError> {
    let mut bundle = assemble(cfg)?;
    let dir = &cfg.out;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut manifest = Vec::new();
    for d in Diagnostic::ALL {
        if bundle.records.has(d) && exportable(d) {
            if let Ok(files) = plot_data(&bundle, d) {
                for (name, s) in files {
                    manifest.push(write_file(dir, &name, &s)?);
                }
            }
        }
    }
    manifest.push(ManifestEntry { path: BUNDLE_FILE.to_string(), sha256: None, bytes: None });
    bundle.manifest = manifest;
    let path = dir.join(BUNDLE_FILE);
    fs::write(&path, bundle.to_json()).map_err(io_err(&path))?;
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TENT_VS_QUADRATIC: &str = r#"
        name = "tent-vs-quadratic"
        depth = 8
        diagnostics = ["conjugacy", "multipliers"]
        [map_f]
        family = "tent"
        slope = 2.0
        [map_g]
        family = "quadratic"
        lambda = 4.0
        [parameters]
        period_max = 2
    "#;

    #[test]
    fn hexfloat_examples() {
        assert_eq!(hexfloat::format(0.75), "0x1.8p-1");
        assert_eq!(hexfloat::format(1.0), "0x1p+0");
        assert_eq!(hexfloat::format(-0.0), "-0x0p+0");
        assert_eq!(hexfloat::format(f64::MIN_POSITIVE / 2.0), "0x0.8p-1022");
        for x in [0.1, -3.5e-300, 5e-324, f64::MAX, 0.0, 1.0 / 3.0] {
            assert_eq!(hexfloat::parse(&hexfloat::format(x)).unwrap().to_bits(), x.to_bits());
        }
        assert!(hexfloat::parse("0x2p+0").is_none());
    }

    #[test]
    fn config_parses_and_validates() {
        let cfg = ScenarioConfig::from_toml(TENT_VS_QUADRATIC).unwrap();
        assert_eq!(cfg.diagnostics.len(), 2);
        assert_eq!(validate_config(&cfg).unwrap().len(), 2);
        let bad = TENT_VS_QUADRATIC.replace("depth = 8", "depth = 0");
        assert!(matches!(validate_config(&ScenarioConfig::from_toml(&bad).unwrap()), Err(ReportError::Config(_))));
        assert!(ScenarioConfig::from_toml("depth = 3").is_err());
        let typo = TENT_VS_QUADRATIC.replace("\"multipliers\"", "\"multiplier\"");
        assert!(ScenarioConfig::from_toml(&typo).is_err());
    }

    #[test]
    fn tent_vs_quadratic_flags_violation_with_partial_records() {
        let cfg = ScenarioConfig::from_toml(TENT_VS_QUADRATIC).unwrap();
        let b = assemble(&cfg).unwrap();
        assert_eq!(b.summary.verdict, Verdict::HypothesisViolation);
        assert!(b.summary.hypothesis_violation.is_some());
        assert!(b.records.conjugacy.is_some());
        let m = b.records.multipliers.as_ref().unwrap();
        assert!(m.iter().any(|r| !r.matched && r.mult_f == 2.0));
        let csv = &plot_data(&b, Diagnostic::Multipliers).unwrap()[0].1;
        assert!(csv.starts_with("period,point_f,mult_f,point_g,mult_g,match\n"));
        assert!(matches!(plot_data(&b, Diagnostic::Uaa), Err(ReportError::MissingDiagnostic(_))));
    }

    #[test]
    fn empty_diagnostics_give_validation_only() {
        let text = TENT_VS_QUADRATIC.replace(r#"["conjugacy", "multipliers"]"#, "[]");
        let b = assemble(&ScenarioConfig::from_toml(&text).unwrap()).unwrap();
        assert_eq!(b.validation.len(), 2);
        assert_eq!(b.records, Records::default());
        assert_eq!(b.summary.verdict, Verdict::NotEvaluated);
    }
}
