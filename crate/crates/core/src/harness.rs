//! Experiment configs, runners and CSV/JSON output for the command-line tool.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::abelian::AbelianGroup;
use crate::error::Error;
use crate::group::{
    abelian_group_from_factors, alternating_group, dihedral_group, generated_subgroup, quaternion_group,
    symmetric_group, trivial_group, GroupRef, Subgroup,
};
use crate::lab::{
    cokernel_class_distribution, depth_census, equidistribution_gap, experiment_key, moment_estimate, stream_rng,
    AbelianHom, BalancedMatrixModel, BlockSampler, Partition,
};
use crate::measure::SignedMeasure;
use crate::spectral::{epsilon_balanced, second_singular_value, sigma_bound_abelian, sigma_bound_general};
use crate::walk::{
    a5_counterexample_probability, a5_instance, a5_uniform_reference, dihedral_instance, greedy_chain,
    normal_family_bound, random_feasible_instance, random_normal_tower, strong_walk_bound, BoundReport, QuotientChain,
    WalkInstance,
};

// ---------------------------------------------------------------------------
// Errors and exit codes

#[derive(Debug)]
pub enum HarnessError {
    ConfigInvalid(String),
    CapExceeded(Error),
    Io(std::io::Error),
}

impl fmt::Display for HarnessError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HarnessError::ConfigInvalid(m) => write!(f, "invalid config: {m}"),
            HarnessError::CapExceeded(e) => write!(f, "{e}"),
            HarnessError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for HarnessError {}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::ConfigInvalid(_) => 2,
            HarnessError::CapExceeded(_) => 3,
            HarnessError::Io(_) => 4,
        }
    }
}

impl From<Error> for HarnessError {
    // library errors during a run come from config values the library rejects
    fn from(e: Error) -> Self {
        match e {
            Error::CapExceeded { .. } | Error::DimensionCap { .. } => HarnessError::CapExceeded(e),
            other => HarnessError::ConfigInvalid(other.to_string()),
        }
    }
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Io(e)
    }
}

fn invalid(msg: impl Into<String>) -> HarnessError {
    HarnessError::ConfigInvalid(msg.into())
}

type HResult<T> = std::result::Result<T, HarnessError>;

// ---------------------------------------------------------------------------
// Config

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    WalkVerify,
    SigmaBound,
    MomentEstimate,
    ClassDistribution,
    DepthCensus,
    Equidistribution,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::WalkVerify => "walk-verify",
            Command::SigmaBound => "sigma-bound",
            Command::MomentEstimate => "moment-estimate",
            Command::ClassDistribution => "class-distribution",
            Command::DepthCensus => "depth-census",
            Command::Equidistribution => "equidistribution",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    description: Option<String>,
    command: Command,
    parameters: Value,
    seed: u64,
    #[serde(default = "one")]
    threads: usize,
    output_path: PathBuf,
    /// Free-form notes carried into the sidecar.
    #[serde(default)]
    metadata: Option<Value>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub name: String,
    pub description: Option<String>,
    pub command: Command,
    pub parameters: Parameters,
    pub seed: u64,
    pub threads: usize,
    pub output_path: PathBuf,
    pub metadata: Option<Value>,
    raw_parameters: Value,
}

#[derive(Debug, Clone)]
pub enum Parameters {
    WalkVerify(WalkVerifyParams),
    SigmaBound(SigmaBoundParams),
    MomentEstimate(MomentParams),
    ClassDistribution(ClassParams),
    DepthCensus(DepthCensusParams),
    Equidistribution(EquidistributionParams),
}

fn parse_params<T: for<'de> Deserialize<'de>>(v: &Value) -> HResult<T> {
    serde_json::from_value(v.clone()).map_err(|e| invalid(format!("parameters: {e}")))
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> HResult<ExperimentConfig> {
        let raw: RawConfig = serde_json::from_str(text).map_err(|e| invalid(e.to_string()))?;
        if raw.threads == 0 {
            return Err(invalid("threads must be positive"));
        }
        let parameters = match raw.command {
            Command::WalkVerify => Parameters::WalkVerify(parse_params(&raw.parameters)?),
            Command::SigmaBound => Parameters::SigmaBound(parse_params(&raw.parameters)?),
            Command::MomentEstimate => Parameters::MomentEstimate(parse_params(&raw.parameters)?),
            Command::ClassDistribution => Parameters::ClassDistribution(parse_params(&raw.parameters)?),
            Command::DepthCensus => Parameters::DepthCensus(parse_params(&raw.parameters)?),
            Command::Equidistribution => Parameters::Equidistribution(parse_params(&raw.parameters)?),
        };
        let cfg = ExperimentConfig {
            name: raw.name.unwrap_or_else(|| raw.command.as_str().to_string()),
            description: raw.description,
            command: raw.command,
            parameters,
            seed: raw.seed,
            threads: raw.threads,
            output_path: raw.output_path,
            metadata: raw.metadata,
            raw_parameters: raw.parameters,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> HResult<ExperimentConfig> {
        let text =
            std::fs::read_to_string(path).map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    /// Resolves `builtin:NAME` or a file path.
    pub fn resolve(spec: &str) -> HResult<ExperimentConfig> {
        match spec.strip_prefix("builtin:") {
            Some(name) => {
                let b = builtin(name).ok_or_else(|| invalid(format!("no builtin experiment {name:?}")))?;
                Self::from_json_str(b.json)
            }
            None => Self::load(Path::new(spec)),
        }
    }

    /// Semantic checks that need no heavy computation.
    pub fn validate(&self) -> HResult<()> {
        match &self.parameters {
            Parameters::WalkVerify(p) => p.validate(),
            Parameters::SigmaBound(p) => p.validate(),
            Parameters::MomentEstimate(p) => p.validate(),
            Parameters::ClassDistribution(p) => p.validate(),
            Parameters::DepthCensus(p) => p.validate(),
            Parameters::Equidistribution(p) => p.validate(),
        }
    }

    /// The effective config as JSON, including overrides.
    pub fn echo(&self) -> Value {
        serde_json::json!({
            "name": self.name,
            "description": self.description,
            "command": self.command,
            "parameters": self.raw_parameters,
            "seed": self.seed,
            "threads": self.threads,
            "output_path": self.output_path,
            "metadata": self.metadata,
        })
    }
}

/// Parses group names: "A5", "S4", "Q8", "D8" (dihedral of order 8),
/// "trivial", or an abelian group such as "Z/2 x Z/6".
pub fn parse_group(spec: &str) -> std::result::Result<GroupRef, String> {
    let s = spec.trim();
    let num = |t: &str| t.parse::<usize>().map_err(|_| format!("cannot parse group {spec:?}"));
    if s.eq_ignore_ascii_case("trivial") || s == "1" {
        return Ok(trivial_group());
    }
    if s == "Q8" {
        return Ok(quaternion_group());
    }
    if let Some(m) = s.strip_prefix('D') {
        let m = num(m)?;
        if m < 4 || m % 2 == 1 {
            return Err(format!("dihedral order must be even and ≥ 4, got {m}"));
        }
        return Ok(dihedral_group(m / 2));
    }
    if let Some(d) = s.strip_prefix('A') {
        let d = num(d)?;
        if !(1..=6).contains(&d) {
            return Err(format!("alternating degree {d} outside 1..=6"));
        }
        return Ok(alternating_group(d).group().clone());
    }
    if let Some(d) = s.strip_prefix('S') {
        let d = num(d)?;
        if !(1..=5).contains(&d) {
            return Err(format!("symmetric degree {d} outside 1..=5"));
        }
        return Ok(symmetric_group(d).group().clone());
    }
    let factors = abelian_factors(s)?;
    Ok(abelian_group_from_factors(&factors))
}

/// Invariant factors of a finite abelian group given as text.
pub fn abelian_factors(spec: &str) -> std::result::Result<Vec<u64>, String> {
    let a = AbelianGroup::from_str(spec).map_err(|e| e.to_string())?;
    if !a.is_finite() {
        return Err(format!("{spec:?} is infinite"));
    }
    let f = a
        .factors_u64()
        .ok_or_else(|| format!("{spec:?} has factors beyond 64 bits"))?;
    if f.iter().product::<u64>() > 4096 {
        return Err(format!("{spec:?} is too large for a Cayley table"));
    }
    Ok(f)
}

// ---------------------------------------------------------------------------
// Parameters

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum WalkVerifyParams {
    /// Odd steps `rotation_step` on ⟨r⟩, even steps {e: 1−p, s: p}, in D_{2n}.
    Dihedral {
        n: Vec<usize>,
        p: Vec<f64>,
        k_max: usize,
        rotation_step: Vec<(usize, f64)>,
    },
    A5Counterexample {},
    /// Random towers and steps forced onto the kernels.
    Random {
        groups: Vec<String>,
        trials: usize,
        #[serde(default = "two")]
        per_level: usize,
        #[serde(default = "two")]
        noise: usize,
    },
    /// A user-specified walk. `tower` lists generators of N₁ ⊊ … ⊊ N_k = G
    /// (normal in G); `family` lists generators of H₁, …, H_k for the
    /// subgroup-family form. Without either, the greedy chain is used.
    Explicit {
        group: String,
        steps: Vec<Vec<(usize, f64)>>,
        #[serde(default)]
        tower: Option<Vec<Vec<usize>>>,
        #[serde(default)]
        family: Option<Vec<Vec<usize>>>,
        #[serde(default = "one")]
        trials: usize,
    },
}

fn two() -> usize {
    2
}

impl WalkVerifyParams {
    fn validate(&self) -> HResult<()> {
        match self {
            WalkVerifyParams::Dihedral {
                n, p, rotation_step, ..
            } => {
                if n.iter().any(|&n| n < 2) {
                    return Err(invalid("dihedral n must be ≥ 2"));
                }
                if p.iter().any(|p| !(0.0..=1.0).contains(p)) {
                    return Err(invalid("p must lie in [0, 1]"));
                }
                for &n in n {
                    if rotation_step.iter().any(|&(x, _)| x >= n) {
                        return Err(invalid("rotation step must be supported on rotations"));
                    }
                }
                Ok(())
            }
            WalkVerifyParams::A5Counterexample {} => Ok(()),
            WalkVerifyParams::Random { groups, .. } => {
                for g in groups {
                    parse_group(g).map_err(invalid)?;
                }
                Ok(())
            }
            WalkVerifyParams::Explicit {
                group, tower, family, ..
            } => {
                parse_group(group).map_err(invalid)?;
                if tower.is_some() && family.is_some() {
                    return Err(invalid("give at most one of tower and family"));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SigmaFamily {
    Abelian,
    General,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SigmaBoundParams {
    pub family: SigmaFamily,
    pub groups: Vec<String>,
    pub trials: usize,
}

impl SigmaBoundParams {
    fn validate(&self) -> HResult<()> {
        if self.groups.is_empty() {
            return Err(invalid("sigma-bound needs at least one group"));
        }
        for g in &self.groups {
            let grp = parse_group(g).map_err(invalid)?;
            if self.family == SigmaFamily::Abelian && !grp.is_abelian() {
                return Err(invalid(format!("{g} is not abelian")));
            }
        }
        Ok(())
    }
}

/// A block model: contiguous `block_shape` = (h, w) blocks, all drawn from
/// `sampler`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: String,
    #[serde(default = "unit_block")]
    pub block_shape: (usize, usize),
    pub sampler: BlockSampler,
}

fn unit_block() -> (usize, usize) {
    (1, 1)
}

impl ModelSpec {
    pub fn build(&self, n: usize, u: usize) -> crate::Result<BalancedMatrixModel> {
        BalancedMatrixModel::blocked(n, u, self.block_shape.0, self.block_shape.1, self.sampler.clone())
    }

    fn validate(&self) -> HResult<()> {
        if self.block_shape.0 == 0 || self.block_shape.1 == 0 {
            return Err(invalid("block_shape entries must be positive"));
        }
        Ok(self.sampler.validate()?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentTarget {
    pub group: String,
    pub u: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentParams {
    pub n: usize,
    pub samples: u64,
    pub targets: Vec<MomentTarget>,
    pub models: Vec<ModelSpec>,
}

impl MomentParams {
    fn validate(&self) -> HResult<()> {
        if self.n == 0 || self.samples == 0 {
            return Err(invalid("n and samples must be positive"));
        }
        for t in &self.targets {
            abelian_factors(&t.group).map_err(invalid)?;
        }
        self.models.iter().try_for_each(ModelSpec::validate)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassParams {
    pub a: u64,
    pub n: usize,
    pub samples: u64,
    pub u_values: Vec<usize>,
    pub model: ModelSpec,
    /// Classes whose frequency is tested against the reference; others are
    /// reported only.
    #[serde(default)]
    pub check_classes: Vec<String>,
}

impl ClassParams {
    fn validate(&self) -> HResult<()> {
        if self.a < 2 || self.samples == 0 || self.n == 0 {
            return Err(invalid("class-distribution needs a ≥ 2, n > 0 and samples > 0"));
        }
        for c in &self.check_classes {
            AbelianGroup::from_str(c).map_err(|e| invalid(e.to_string()))?;
        }
        self.model.validate()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DepthCensusParams {
    pub n: usize,
    pub a: u64,
    pub groups: Vec<String>,
    pub deltas: Vec<f64>,
    #[serde(default = "one")]
    pub block_size: usize,
}

impl DepthCensusParams {
    fn validate(&self) -> HResult<()> {
        if self.block_size == 0 || self.a == 0 {
            return Err(invalid("block_size and a must be positive"));
        }
        for g in &self.groups {
            abelian_factors(g).map_err(invalid)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquidistributionCase {
    pub name: String,
    pub a: u64,
    pub group: String,
    pub n: usize,
    /// rows per row block
    pub row_block: usize,
    /// columns in the tested column block
    pub r: usize,
    pub sampler: BlockSampler,
    /// number of random surjective maps to test
    #[serde(default)]
    pub maps: usize,
    /// explicit maps, each a list of generator images in coordinates
    #[serde(default)]
    pub images: Vec<Vec<Vec<u64>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquidistributionParams {
    pub cases: Vec<EquidistributionCase>,
}

impl EquidistributionParams {
    fn validate(&self) -> HResult<()> {
        for c in &self.cases {
            abelian_factors(&c.group).map_err(invalid)?;
            if c.row_block == 0 || c.r == 0 || c.n == 0 {
                return Err(invalid("row_block, r and n must be positive"));
            }
            c.sampler.validate()?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Result rows

/// How `pass` follows from the other fields of a row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum PassRule {
    /// value ≤ bound + tol
    AtMostBound { tol: f64 },
    /// value ≥ bound − tol
    AtLeastBound { tol: f64 },
    /// |value − reference| ≤ tol
    Close { tol: f64 },
    /// |value − reference| ≤ k·stderr (exact equality when stderr is 0)
    WithinStderr { k: f64 },
    /// reported only
    Info,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub experiment_id: String,
    pub statistic_name: String,
    pub value: f64,
    pub stderr: Option<f64>,
    pub reference_value: Option<f64>,
    pub bound: Option<f64>,
    pub pass: bool,
    #[serde(skip)]
    pub rule: PassRule,
}

impl ResultRow {
    fn new(id: &str, stat: &str, value: f64, rule: PassRule) -> ResultRow {
        ResultRow {
            experiment_id: id.to_string(),
            statistic_name: stat.to_string(),
            value,
            stderr: None,
            reference_value: None,
            bound: None,
            pass: true,
            rule,
        }
    }

    pub fn info(id: &str, stat: &str, value: f64) -> ResultRow {
        Self::new(id, stat, value, PassRule::Info)
    }

    pub fn at_most(id: &str, stat: &str, value: f64, bound: f64, tol: f64) -> ResultRow {
        let mut r = Self::new(id, stat, value, PassRule::AtMostBound { tol });
        r.bound = Some(bound);
        r.finish()
    }

    pub fn at_least(id: &str, stat: &str, value: f64, bound: f64, tol: f64) -> ResultRow {
        let mut r = Self::new(id, stat, value, PassRule::AtLeastBound { tol });
        r.bound = Some(bound);
        r.finish()
    }

    pub fn close(id: &str, stat: &str, value: f64, reference: f64, tol: f64) -> ResultRow {
        let mut r = Self::new(id, stat, value, PassRule::Close { tol });
        r.reference_value = Some(reference);
        r.finish()
    }

    pub fn within_stderr(id: &str, stat: &str, value: f64, stderr: f64, reference: f64, k: f64) -> ResultRow {
        let mut r = Self::new(id, stat, value, PassRule::WithinStderr { k });
        r.stderr = Some(stderr);
        r.reference_value = Some(reference);
        r.finish()
    }

    fn with_reference(mut self, reference: f64) -> ResultRow {
        self.reference_value = Some(reference);
        self
    }

    /// Recomputes `pass` from the rule.
    pub fn finish(mut self) -> ResultRow {
        self.pass = self.evaluate();
        self
    }

    pub fn evaluate(&self) -> bool {
        let v = self.value;
        match self.rule {
            PassRule::AtMostBound { tol } => self.bound.is_some_and(|b| v <= b + tol),
            PassRule::AtLeastBound { tol } => self.bound.is_some_and(|b| v >= b - tol),
            PassRule::Close { tol } => self.reference_value.is_some_and(|r| (v - r).abs() <= tol),
            PassRule::WithinStderr { k } => match (self.reference_value, self.stderr) {
                (Some(r), Some(s)) if s > 0.0 => (v - r).abs() <= k * s,
                (Some(r), Some(_)) => v == r,
                _ => false,
            },
            PassRule::Info => true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub rows: Vec<ResultRow>,
}

impl RunOutput {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ResultRow> {
        self.rows.iter().filter(|r| !r.pass)
    }

    /// CSV bytes with a header row in `ResultRow` field order.
    pub fn to_csv(&self) -> HResult<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "experiment_id",
            "statistic_name",
            "value",
            "stderr",
            "reference_value",
            "bound",
            "pass",
        ])
        .map_err(csv_io)?;
        let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.experiment_id.clone(),
                r.statistic_name.clone(),
                fmt_f64(r.value),
                opt(r.stderr),
                opt(r.reference_value),
                opt(r.bound),
                r.pass.to_string(),
            ])
            .map_err(csv_io)?;
        }
        w.into_inner()
            .map_err(|e| HarnessError::Io(std::io::Error::other(e.to_string())))
    }
}

fn csv_io(e: csv::Error) -> HarnessError {
    HarnessError::Io(std::io::Error::other(e.to_string()))
}

/// Shortest round-trip decimal, with "inf"/"-inf"/"nan" for non-finite values.
fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:?}")
    }
}

// ---------------------------------------------------------------------------
// Runners

/// Runs the experiment on a pool of `cfg.threads` workers. Writes nothing.
pub fn run(cfg: &ExperimentConfig) -> HResult<RunOutput> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| invalid(format!("cannot build thread pool: {e}")))?;
    let rows = pool.install(|| match &cfg.parameters {
        Parameters::WalkVerify(p) => run_walk_verify(cfg, p),
        Parameters::SigmaBound(p) => run_sigma_bound(cfg, p),
        Parameters::MomentEstimate(p) => run_moment(cfg, p),
        Parameters::ClassDistribution(p) => run_class(cfg, p),
        Parameters::DepthCensus(p) => run_depth_census(p),
        Parameters::Equidistribution(p) => run_equidistribution(cfg, p),
    })?;
    Ok(RunOutput { rows })
}

const WALK_TOL: f64 = 1e-8;

fn bound_rows(id: &str, rep: &BoundReport) -> Vec<ResultRow> {
    let mut rows = vec![
        ResultRow::close(id, "feasible", rep.feasible as u8 as f64, 1.0, 0.0),
        ResultRow::at_most(id, "lhs", rep.lhs, rep.rhs, WALK_TOL),
    ];
    for l in &rep.levels {
        rows.push(ResultRow::info(
            id,
            &format!("level{}_sigma_sq_product", l.level),
            l.sigma_sq_product,
        ));
    }
    if let Some(c) = rep.family_bound {
        rows.push(ResultRow::at_most(id, "lhs_vs_family", rep.lhs, c, WALK_TOL));
    }
    rows
}

fn subgroup_from_gens(g: &GroupRef, gens: &[usize]) -> HResult<Subgroup> {
    if let Some(&x) = gens.iter().find(|&&x| x >= g.order()) {
        return Err(invalid(format!("element {x} outside the group")));
    }
    Ok(generated_subgroup(g, gens)?)
}

fn run_walk_verify(cfg: &ExperimentConfig, p: &WalkVerifyParams) -> HResult<Vec<ResultRow>> {
    let mut rows = Vec::new();
    match p {
        WalkVerifyParams::Dihedral {
            n,
            p,
            k_max,
            rotation_step,
        } => {
            for &n in n {
                for &prob in p {
                    for k in 1..=*k_max {
                        let id = format!("dihedral-n{n}-p{prob}-k{k}");
                        let (w, chain) = dihedral_instance(n, rotation_step, prob, k)?;
                        let rep = strong_walk_bound(&w, &chain)?;
                        let flip = 1.0 - 2.0 * prob;
                        let level2 = rep.levels.get(1).and_then(|l| l.sigmas.first().copied());
                        let level1 = rep.levels.first().and_then(|l| l.sigmas.first().copied());
                        match level2 {
                            Some(s) => rows.push(ResultRow::close(&id, "sigma_even", s, flip.abs(), 1e-10)),
                            // p ∈ {0, 1}: even steps are Dirac masses and land in no I_j
                            None => rows.push(ResultRow::info(&id, "sigma_even", f64::NAN).with_reference(flip.abs())),
                        }
                        let sigma = level1.unwrap_or(1.0);
                        let example = sigma.powi(k as i32) + flip.abs().powi(k as i32);
                        rows.push(ResultRow::at_most(
                            &id,
                            "lhs_vs_example_bound",
                            rep.lhs,
                            example,
                            WALK_TOL,
                        ));
                        rows.extend(bound_rows(&id, &rep));
                    }
                }
            }
        }
        WalkVerifyParams::A5Counterexample {} => {
            let id = "a5";
            let (_, w, subs) = a5_instance()?;
            rows.push(ResultRow::close(
                id,
                "prob_3_to_4",
                a5_counterexample_probability()?,
                0.0,
                1e-15,
            ));
            rows.push(ResultRow::close(
                id,
                "uniform_reference_3_to_4",
                a5_uniform_reference(),
                0.2,
                1e-15,
            ));
            for (i, s) in w.steps().iter().enumerate() {
                let sigma = second_singular_value(s)?.second_largest;
                rows.push(ResultRow::close(id, &format!("sigma_step{}", i + 1), sigma, 0.0, 1e-10));
            }
            let lhs = crate::walk::exact_walk_distance(&w)?;
            rows.push(ResultRow::at_least(id, "lhs_positive", lhs, 0.0, -1e-12));
            let rejected = matches!(normal_family_bound(&w, &subs), Err(Error::NotNormalInQuotient { .. }));
            rows.push(ResultRow::close(
                id,
                "family_hypothesis_rejected",
                rejected as u8 as f64,
                1.0,
                0.0,
            ));
        }
        WalkVerifyParams::Random {
            groups,
            trials,
            per_level,
            noise,
        } => {
            let groups: Vec<(String, GroupRef)> = groups
                .iter()
                .map(|s| Ok((s.clone(), parse_group(s).map_err(invalid)?)))
                .collect::<HResult<_>>()?;
            let key = experiment_key(&cfg.name);
            let per_trial: Vec<Vec<ResultRow>> = (0..*trials)
                .into_par_iter()
                .map(|i| {
                    let (gname, g) = &groups[i % groups.len()];
                    let mut rng = stream_rng(cfg.seed, key, i as u64);
                    let tower = random_normal_tower(g, &mut rng)?;
                    let w = random_feasible_instance(g, &tower, *per_level, *noise, &mut rng)?;
                    let chain = QuotientChain::from_normal_tower(g, &tower)?;
                    let rep = strong_walk_bound(&w, &chain)?;
                    Ok(bound_rows(&format!("trial{i:04}-{gname}"), &rep))
                })
                .collect::<HResult<_>>()?;
            rows.extend(per_trial.into_iter().flatten());
        }
        WalkVerifyParams::Explicit {
            group,
            steps,
            tower,
            family,
            trials,
        } => {
            let g = parse_group(group).map_err(invalid)?;
            let measures = steps
                .iter()
                .map(|s| SignedMeasure::from_pairs(&g, s))
                .collect::<crate::Result<Vec<_>>>()?;
            let w = WalkInstance::new(&g, measures)?;
            for t in 0..*trials {
                let id = format!("{}-{t}", cfg.name);
                let rep = if let Some(fam) = family {
                    let subs = fam
                        .iter()
                        .map(|gens| subgroup_from_gens(&g, gens))
                        .collect::<HResult<Vec<_>>>()?;
                    normal_family_bound(&w, &subs)?
                } else if let Some(tw) = tower {
                    let subs = tw
                        .iter()
                        .map(|gens| subgroup_from_gens(&g, gens))
                        .collect::<HResult<Vec<_>>>()?;
                    strong_walk_bound(&w, &QuotientChain::from_normal_tower(&g, &subs)?)?
                } else {
                    strong_walk_bound(&w, &greedy_chain(&g)?)?
                };
                rows.extend(bound_rows(&id, &rep));
            }
        }
    }
    Ok(rows)
}

/// Random probability measure with ε > 0: random support size, random
/// elements, random weights; supports inside a coset of a proper subgroup
/// are redrawn, and the last attempt uses full support.
pub fn random_balanced_measure<R: Rng + ?Sized>(g: &GroupRef, rng: &mut R) -> crate::Result<(SignedMeasure, f64)> {
    let n = g.order();
    for attempt in 0..64 {
        let k = if attempt < 63 { rng.random_range(1..=n) } else { n };
        let support = sample_indices(rng, n, k).into_vec();
        let skew: f64 = rng.random_range(0.5..3.0);
        let raw: Vec<f64> = support
            .iter()
            .map(|_| rng.random_range(0.01f64..1.0).powf(skew))
            .collect();
        let total: f64 = raw.iter().sum();
        let pairs: Vec<(usize, f64)> = support.iter().zip(&raw).map(|(&x, &w)| (x, w / total)).collect();
        // supp lies in a coset of a proper subgroup iff s₀⁻¹·supp generates one
        let s0 = g.inv(support[0]);
        let shifted: Vec<usize> = support.iter().map(|&x| g.mul(s0, x)).collect();
        if !generated_subgroup(g, &shifted)?.is_whole() {
            continue;
        }
        let mu = SignedMeasure::from_pairs(g, &pairs)?;
        let eps = epsilon_balanced(&mu)?;
        return Ok((mu, eps));
    }
    let mu = SignedMeasure::uniform(g);
    let eps = epsilon_balanced(&mu)?;
    Ok((mu, eps))
}

fn run_sigma_bound(cfg: &ExperimentConfig, p: &SigmaBoundParams) -> HResult<Vec<ResultRow>> {
    let groups: Vec<(String, GroupRef)> = p
        .groups
        .iter()
        .map(|s| Ok((s.clone(), parse_group(s).map_err(invalid)?)))
        .collect::<HResult<_>>()?;
    let key = experiment_key(&cfg.name);
    let per_trial: Vec<Vec<ResultRow>> = (0..p.trials)
        .into_par_iter()
        .map(|i| {
            let (gname, g) = &groups[i % groups.len()];
            let mut rng = stream_rng(cfg.seed, key, i as u64);
            let (mu, eps) = random_balanced_measure(g, &mut rng)?;
            let sigma = second_singular_value(&mu)?.second_largest;
            let bound = match p.family {
                SigmaFamily::Abelian => sigma_bound_abelian(eps, g.exponent() as u64),
                SigmaFamily::General => sigma_bound_general(eps, g.order()),
            };
            let id = format!("trial{i:04}-{gname}");
            Ok(vec![
                ResultRow::info(&id, "epsilon", eps),
                ResultRow::at_most(&id, "sigma", sigma, bound, 1e-8),
            ])
        })
        .collect::<HResult<_>>()?;
    Ok(per_trial.into_iter().flatten().collect())
}

fn run_moment(cfg: &ExperimentConfig, p: &MomentParams) -> HResult<Vec<ResultRow>> {
    let mut rows = Vec::new();
    for m in &p.models {
        for t in &p.targets {
            let g = AbelianGroup::from_str(&t.group)?;
            let model = m.build(p.n, t.u)?;
            let id = format!("{}-{}-u{}", m.name, g.canonical_string().replace(' ', ""), t.u);
            let est = moment_estimate(&model, &g, p.samples, cfg.seed, experiment_key(&id))?;
            rows.push(ResultRow::within_stderr(
                &id,
                "moment",
                est.mean,
                est.stderr,
                est.reference,
                3.0,
            ));
            rows.push(ResultRow::info(&id, "samples", est.samples_used as f64));
        }
    }
    Ok(rows)
}

fn run_class(cfg: &ExperimentConfig, p: &ClassParams) -> HResult<Vec<ResultRow>> {
    let checks: Vec<AbelianGroup> = p
        .check_classes
        .iter()
        .map(|c| AbelianGroup::from_str(c))
        .collect::<crate::Result<_>>()?;
    let check_keys: Vec<String> = checks.iter().map(AbelianGroup::canonical_string).collect();
    let mut rows = Vec::new();
    for &u in &p.u_values {
        let model = p.model.build(p.n, u)?;
        let id = format!("{}-a{}-u{u}", p.model.name, p.a);
        let dist = cokernel_class_distribution(&model, p.a, p.samples, cfg.seed, experiment_key(&id), &checks)?;
        for r in &dist.rows {
            let stat = format!("P[{}]", r.class);
            if check_keys.contains(&r.class) {
                rows.push(ResultRow::within_stderr(
                    &id,
                    &stat,
                    r.frequency,
                    r.stderr,
                    r.reference,
                    3.0,
                ));
            } else {
                let mut row = ResultRow::info(&id, &stat, r.frequency).with_reference(r.reference);
                row.stderr = Some(r.stderr);
                rows.push(row);
            }
        }
        let total: f64 = dist.rows.iter().map(|r| r.frequency).sum();
        rows.push(ResultRow::close(&id, "frequency_total", total, 1.0, 1e-9));
    }
    Ok(rows)
}

fn run_depth_census(p: &DepthCensusParams) -> HResult<Vec<ResultRow>> {
    let part = Partition::contiguous(p.n, p.block_size)?;
    let mut rows = Vec::new();
    for gs in &p.groups {
        let factors = abelian_factors(gs).map_err(invalid)?;
        let gname = AbelianGroup::from_factors(0, &factors)
            .canonical_string()
            .replace(' ', "");
        for &delta in &p.deltas {
            let c = depth_census(p.n, p.a, &factors, &part, delta)?;
            let id = format!("{gname}-delta{delta}");
            rows.push(ResultRow::info(&id, "maps", c.total_maps as f64));
            for (&d, &bound) in &c.bounds {
                let count = c.counts.get(&d).copied().unwrap_or(0) as f64;
                rows.push(ResultRow::at_most(&id, &format!("count_D{d}"), count, bound, 0.0));
            }
        }
    }
    Ok(rows)
}

fn run_equidistribution(cfg: &ExperimentConfig, p: &EquidistributionParams) -> HResult<Vec<ResultRow>> {
    let mut rows = Vec::new();
    for case in &p.cases {
        let factors = abelian_factors(&case.group).map_err(invalid)?;
        let g = abelian_group_from_factors(&factors);
        let model = BalancedMatrixModel::new(
            Partition::contiguous(case.n, case.row_block)?,
            Partition::contiguous(case.r, case.r)?,
            case.a,
            vec![case.sampler.clone()],
        )?;
        let mut maps: Vec<AbelianHom> = case
            .images
            .iter()
            .map(|im| AbelianHom::new(case.a, &factors, im))
            .collect::<crate::Result<_>>()?;
        // random surjective maps
        let allowed: Vec<usize> = (0..g.order())
            .filter(|&x| case.a % g.element_order(x) as u64 == 0)
            .collect();
        let key = experiment_key(&case.name);
        let mut j = 0u64;
        let mut made = 0;
        while made < case.maps {
            if j > 1000 * (case.maps as u64 + 1) {
                return Err(invalid(format!("case {}: no surjective maps found", case.name)));
            }
            let mut rng = stream_rng(cfg.seed, key, j);
            j += 1;
            let images: Vec<Vec<u64>> = (0..case.n)
                .map(|_| coords(allowed[rng.random_range(0..allowed.len())], &factors))
                .collect();
            let f = AbelianHom::new(case.a, &factors, &images)?;
            if f.index_without(&vec![false; case.n]) == 1 {
                maps.push(f);
                made += 1;
            }
        }
        for (k, f) in maps.iter().enumerate() {
            let id = format!("{}-map{k}", case.name);
            let rep = equidistribution_gap(f, &model, 0, &[], None)?;
            rows.push(ResultRow::info(&id, "epsilon", rep.epsilon));
            rows.push(ResultRow::info(&id, "code_distance", rep.code_distance));
            rows.push(ResultRow::at_most(&id, "gap", rep.max_gap, rep.bound, 1e-12));
        }
    }
    Ok(rows)
}

fn coords(mut idx: usize, factors: &[u64]) -> Vec<u64> {
    let mut v = vec![0u64; factors.len()];
    for (slot, &d) in v.iter_mut().zip(factors).rev() {
        *slot = (idx % d as usize) as u64;
        idx /= d as usize;
    }
    v
}

// ---------------------------------------------------------------------------
// Output

/// Sidecar path next to the CSV: `x.csv` → `x.json`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

fn git_hash() -> String {
    std::process::Command::new("git")
        .args(["rev-parse", "HEAD"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .unwrap_or_else(|| "unknown".into())
}

pub fn write_outputs(cfg: &ExperimentConfig, out: &RunOutput) -> HResult<()> {
    let csv = out.to_csv()?;
    if let Some(dir) = cfg.output_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(&cfg.output_path, csv)?;
    let mut rules: BTreeMap<&str, PassRule> = BTreeMap::new();
    for r in &out.rows {
        rules.entry(r.statistic_name.as_str()).or_insert(r.rule);
    }
    let sidecar = serde_json::json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "git_hash": git_hash(),
        "seed": cfg.seed,
        "threads": cfg.threads,
        "rows": out.rows.len(),
        "failed_rows": out.failures().count(),
        "pass_rules": rules,
        "config": cfg.echo(),
    });
    let text = serde_json::to_string_pretty(&sidecar).map_err(|e| HarnessError::Io(std::io::Error::other(e)))?;
    std::fs::write(sidecar_path(&cfg.output_path), text)?;
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub output_path: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn apply(&mut self, o: &Overrides) -> HResult<()> {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(t) = o.threads {
            if t == 0 {
                return Err(invalid("threads must be positive"));
            }
            self.threads = t;
        }
        if let Some(p) = &o.output_path {
            self.output_path = p.clone();
        }
        Ok(())
    }
}

/// Loads, runs and writes; returns the process exit code (0 all pass, 1 some
/// row failed, 2 invalid config, 3 cap exceeded, 4 i/o error).
pub fn execute(config: &str, overrides: &Overrides) -> (i32, Option<RunOutput>) {
    let result = (|| {
        let mut cfg = ExperimentConfig::resolve(config)?;
        cfg.apply(overrides)?;
        let out = run(&cfg)?;
        write_outputs(&cfg, &out)?;
        Ok::<_, HarnessError>(out)
    })();
    match result {
        Ok(out) => (if out.all_pass() { 0 } else { 1 }, Some(out)),
        Err(e) => {
            eprintln!("error: {e}");
            (e.exit_code(), None)
        }
    }
}

// ---------------------------------------------------------------------------
// Builtin experiments

pub struct Builtin {
    pub name: &'static str,
    pub description: &'static str,
    pub json: &'static str,
}

macro_rules! builtin {
    ($name:literal, $desc:literal) => {
        Builtin {
            name: $name,
            description: $desc,
            json: include_str!(concat!("../configs/", $name, ".json")),
        }
    };
}

pub const BUILTINS: &[Builtin] = &[
    builtin!(
        "a5-counterexample",
        "A5 walk on three 3-cycle subgroups: zero probability of 3 -> 4"
    ),
    builtin!(
        "dihedral-golden",
        "dihedral walk: even-step sigma = |1-2p| and the two-term bound"
    ),
    builtin!(
        "walk-soundness",
        "500 random feasible walks on small groups against the chain bound"
    ),
    builtin!(
        "sigma-bound-abelian",
        "1000 random balanced measures on abelian groups, exponent <= 12"
    ),
    builtin!(
        "sigma-bound-general",
        "200 random balanced measures on nonabelian groups of order <= 24"
    ),
    builtin!("moment-z2", "quick moment check: G = Z/2, u = 0, n = 40"),
    builtin!(
        "moment-convergence",
        "surjection moments at n = 100 for five (G, u) pairs and two models"
    ),
    builtin!(
        "class-distribution",
        "frequency of trivial coker tensor Z/2 at n = 100, u = 0 and 1"
    ),
    builtin!(
        "depth-census",
        "exhaustive depth census over Hom((Z/2)^6, G) against the count bound"
    ),
    builtin!(
        "equidistribution",
        "exact image gap of codes against the exponential bound"
    ),
];

pub const CONFIG_SCHEMA: &str = include_str!("../configs/schema.json");

pub fn builtin(name: &str) -> Option<&'static Builtin> {
    BUILTINS.iter().find(|b| b.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_load() {
        for b in BUILTINS {
            let cfg = ExperimentConfig::from_json_str(b.json).unwrap_or_else(|e| panic!("{}: {e}", b.name));
            assert_eq!(cfg.name, b.name);
        }
        assert!(builtin("a5-counterexample").is_some());
        assert!(builtin("dihedral-golden").is_some());
        let schema: Value = serde_json::from_str(CONFIG_SCHEMA).unwrap();
        assert!(schema.get("properties").is_some());
    }

    #[test]
    fn unknown_fields_rejected() {
        let ok =
            r#"{"command":"walk-verify","parameters":{"mode":"a5-counterexample"},"seed":1,"output_path":"x.csv"}"#;
        assert!(ExperimentConfig::from_json_str(ok).is_ok());
        let extra = r#"{"command":"walk-verify","parameters":{"mode":"a5-counterexample"},"seed":1,"output_path":"x.csv","colour":1}"#;
        assert!(matches!(
            ExperimentConfig::from_json_str(extra),
            Err(HarnessError::ConfigInvalid(_))
        ));
        let extra_param = r#"{"command":"walk-verify","parameters":{"mode":"a5-counterexample","x":1},"seed":1,"output_path":"x.csv"}"#;
        assert!(matches!(
            ExperimentConfig::from_json_str(extra_param),
            Err(HarnessError::ConfigInvalid(_))
        ));
        let zero_threads = r#"{"command":"walk-verify","parameters":{"mode":"a5-counterexample"},"seed":1,"threads":0,"output_path":"x.csv"}"#;
        assert!(ExperimentConfig::from_json_str(zero_threads).is_err());
    }

    #[test]
    fn group_names() {
        assert_eq!(parse_group("D8").unwrap().order(), 8);
        assert_eq!(parse_group("Q8").unwrap().order(), 8);
        assert_eq!(parse_group("A5").unwrap().order(), 60);
        assert_eq!(parse_group("S4").unwrap().order(), 24);
        assert_eq!(parse_group("Z/2 x Z/6").unwrap().order(), 12);
        assert_eq!(parse_group("trivial").unwrap().order(), 1);
        assert!(parse_group("D7").is_err());
        assert!(parse_group("Z").is_err());
    }

    #[test]
    fn pass_rules() {
        assert!(ResultRow::at_most("e", "s", 1.0, 1.0, 0.0).pass);
        assert!(!ResultRow::at_most("e", "s", 1.1, 1.0, 0.0).pass);
        assert!(ResultRow::within_stderr("e", "s", 1.0, 0.0, 1.0, 3.0).pass);
        assert!(!ResultRow::within_stderr("e", "s", 1.5, 0.1, 1.0, 3.0).pass);
        assert!(ResultRow::close("e", "s", 0.0, 0.0, 0.0).pass);
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
        assert_eq!(fmt_f64(0.5), "0.5");
    }

    #[test]
    fn a5_rows_pass() {
        let cfg = ExperimentConfig::resolve("builtin:a5-counterexample").unwrap();
        let out = run(&cfg).unwrap();
        assert!(out.all_pass(), "{:?}", out.failures().collect::<Vec<_>>());
    }
}
