//! Run configuration, the suite runner and report files.
//!
//! A run is described by a TOML document whose sections are suites. Every
//! suite turns its section into [`EstimateReport`]s; the runner collects them
//! into a CSV summary and one JSON file per experiment.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::estimates::{
    dual_norm_defect, equivalence_constants, hardy_constant, hardy_quotient,
    hardy_quotient_periodic, morawetz_experiment, norm_equivalence_experiment,
    schrodinger_admissible, smoothing_constant, smoothing_experiment, strichartz_experiment,
    strichartz_norms, wave_admissible, AdmissiblePair, Convergence, Criterion, EquivalenceRun,
    EstimateReport, Profile,
};
use crate::evolution::{
    kato_jensen_experiment, pseudo_conformal_apply, schrodinger_evolve, schrodinger_evolve_many,
    wave_energy, wave_evolve, wave_velocity, write_snapshots, TimeGrid, WaveDataPair,
};
use crate::hankel::{
    diagonalization_defect, involution_defect, isometry_defect, make_plan, self_adjointness_defect,
    HankelPair,
};
use crate::localization::{
    j_weighted_decay, m_weighted_decay, mjk, mn_decay_experiment, newtonian_decay_experiment,
    op_norm, LatticeSpec, LogLattice,
};
use crate::operator::{
    apply_frac_power, conjugation_apply, conjugation_kernel, frac_kernel, make_context,
    HarmonicContext, KernelSpec,
};
use crate::profiles::{
    annulus_bump, chi, gaussian, gaussian_poly, random_annulus_profile, sector_gaussian,
    standard_bump,
};
use crate::quad::GaussRule;
use crate::radial::{make_grid, RadialGrid, SectorField, Side};

/// First line of every CSV summary.
pub const SCHEMA: &str = "# schema=1";
/// CSV summary columns.
pub const COLUMNS: [&str; 8] = [
    "suite",
    "experiment",
    "param_json",
    "computed",
    "reference",
    "rel_dev",
    "tolerance",
    "pass",
];
/// Defects below this count as converged in doubling checks (rounding level).
pub const DOUBLING_FLOOR: f64 = 1e-10;
/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "INVSQ_THREADS";

/// A named battery of experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Hankel,
    Kernel,
    Smoothing,
    Morawetz,
    Strichartz,
    Hardy,
    Equivalence,
    Conservation,
    Katojensen,
    Localization,
    Constants,
}

impl Suite {
    pub const ALL: [Suite; 11] = [
        Suite::Hankel,
        Suite::Kernel,
        Suite::Smoothing,
        Suite::Morawetz,
        Suite::Strichartz,
        Suite::Hardy,
        Suite::Equivalence,
        Suite::Conservation,
        Suite::Katojensen,
        Suite::Localization,
        Suite::Constants,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Hankel => "hankel",
            Suite::Kernel => "kernel",
            Suite::Smoothing => "smoothing",
            Suite::Morawetz => "morawetz",
            Suite::Strichartz => "strichartz",
            Suite::Hardy => "hardy",
            Suite::Equivalence => "equivalence",
            Suite::Conservation => "conservation",
            Suite::Katojensen => "katojensen",
            Suite::Localization => "localization",
            Suite::Constants => "constants",
        }
    }

    pub fn from_name(name: &str) -> Option<Suite> {
        Suite::ALL.into_iter().find(|s| s.name() == name)
    }

    /// Experiment names the suite can emit; tolerance overrides must use one.
    pub fn experiments(self) -> &'static [&'static str] {
        match self {
            Suite::Hankel => &[
                "involution",
                "isometry",
                "self_adjointness",
                "diagonalization",
                "involution_doubling",
                "isometry_doubling",
                "self_adjointness_doubling",
                "diagonalization_doubling",
            ],
            Suite::Kernel => &[
                "composition",
                "kernel_element",
                "conjugation_element",
                "kernel_symmetry",
                "kernel_homogeneity",
            ],
            Suite::Smoothing => &["smoothing_ratio", "data_independence"],
            Suite::Morawetz => &["morawetz_ratio"],
            Suite::Strichartz => &["strichartz_ratio", "scale_invariance", "admissibility"],
            Suite::Hardy => &["closed_form", "near_extremizer", "plane_bound"],
            Suite::Equivalence => &["norm_equivalence", "s1_identity", "dual_defect"],
            Suite::Conservation => &["mass_drift", "energy_drift", "pseudo_conformal_drift"],
            Suite::Katojensen => &["kato_jensen", "weighted_ratio_stability"],
            Suite::Localization => &[
                "mn_decay",
                "m_weighted_decay",
                "j_weighted_decay",
                "newtonian_decay_up",
                "newtonian_decay_down",
                "free_cross_terms",
            ],
            Suite::Constants => &[
                "constant",
                "closed_form",
                "monotone_in_nu",
                "endpoint_divergence",
            ],
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One sector `(n, a, l)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectorSpec {
    pub n: usize,
    pub a: f64,
    pub l: usize,
}

impl SectorSpec {
    pub fn context(&self) -> Result<HarmonicContext> {
        make_context(self.n, self.a, self.l)
    }
}

fn sector(n: usize, a: f64, l: usize) -> SectorSpec {
    SectorSpec { n, a, l }
}

/// `[hankel]`: transform battery on the standard annulus bump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HankelConfig {
    pub sectors: Vec<SectorSpec>,
    /// Node counts, coarse to fine; the first is the acceptance resolution.
    pub grids: Vec<usize>,
    pub r_min: f64,
    pub r_max: f64,
    pub rho_max: f64,
    /// Outer radius of the shared grid used for self-adjointness.
    pub shared_max: f64,
    pub fd_order: usize,
}

impl Default for HankelConfig {
    fn default() -> Self {
        Self {
            sectors: vec![sector(3, 1.0, 0), sector(2, 1.0, 1), sector(4, 0.0, 2)],
            grids: vec![1024, 2048],
            r_min: 1e-3,
            r_max: 4.0,
            rho_max: 120.0,
            shared_max: 50.0,
            fd_order: 4,
        }
    }
}

/// `[kernel]`: fractional powers and the conjugation operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelConfig {
    pub sector: SectorSpec,
    pub alpha: f64,
    /// Log-periodic node counts for composition and matrix elements (odd).
    pub composition_len: usize,
    pub element_len: usize,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            sector: sector(3, 1.0, 0),
            alpha: 0.25,
            composition_len: 1025,
            element_len: 2049,
        }
    }
}

/// Time quadrature `[0, t_switch]` linear then geometric to `t_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimePolicy {
    pub t_switch: f64,
    pub n_linear: usize,
    pub t_max: f64,
    pub n_geometric: usize,
}

impl TimePolicy {
    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::hybrid(self.t_switch, self.n_linear, self.t_max, self.n_geometric)
    }
}

/// `[smoothing]`: the spacetime smoothing ratio against `C_{ν,α}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SmoothingConfig {
    pub n: usize,
    pub a: f64,
    pub sectors: Vec<usize>,
    pub alpha: Vec<f64>,
    /// Also run the free sectors (`a = 0`).
    pub free: bool,
    pub grids: Vec<usize>,
    pub r_min: f64,
    pub r_max: f64,
    pub rho_max: f64,
    pub time: TimePolicy,
    /// Polynomial coefficients of the second profile in the data-independence check.
    pub second_profile: Vec<f64>,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        Self {
            n: 3,
            a: 1.0,
            sectors: vec![0],
            alpha: vec![0.25],
            free: true,
            grids: vec![1024, 2048],
            r_min: 1e-3,
            r_max: 100.0,
            rho_max: 7.0,
            time: TimePolicy {
                t_switch: 1.0,
                n_linear: 40,
                t_max: 10.0,
                n_geometric: 60,
            },
            second_profile: vec![0.3, -1.0, 0.6],
        }
    }
}

/// `[morawetz]`: the wave spacetime ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MorawetzConfig {
    pub sector: SectorSpec,
    pub alpha: f64,
    pub grids: Vec<usize>,
    pub r_min: f64,
    pub r_max: f64,
    pub time: TimePolicy,
}

impl Default for MorawetzConfig {
    fn default() -> Self {
        Self {
            sector: sector(3, 1.0, 0),
            alpha: 0.25,
            grids: vec![2048, 4096],
            r_min: 1e-3,
            r_max: 60.0,
            time: TimePolicy {
                t_switch: 4.0,
                n_linear: 80,
                t_max: 30.0,
                n_geometric: 60,
            },
        }
    }
}

/// `[strichartz]`: Schrödinger Strichartz ratio and admissibility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StrichartzConfig {
    pub sector: SectorSpec,
    pub p: f64,
    pub q: f64,
    pub grids: Vec<usize>,
    pub r_min: f64,
    pub r_max: f64,
    pub rho_max: f64,
    pub time: TimePolicy,
}

impl Default for StrichartzConfig {
    fn default() -> Self {
        Self {
            sector: sector(3, 1.0, 0),
            p: 2.0,
            q: 6.0,
            grids: vec![1024, 2048],
            r_min: 1e-3,
            r_max: 100.0,
            rho_max: 7.0,
            time: TimePolicy {
                t_switch: 1.0,
                n_linear: 40,
                t_max: 10.0,
                n_geometric: 60,
            },
        }
    }
}

/// `[hardy]`: quotients against the sharp constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HardyConfig {
    /// `ε` values of the `n = 3` near-extremizers `r^{−1/2+ε} χ(r)`.
    pub epsilons: Vec<f64>,
    /// Random profiles in the `n = 2, l = 1` check.
    pub plane_samples: u64,
}

impl Default for HardyConfig {
    fn default() -> Self {
        Self {
            epsilons: vec![0.05, 0.01, 0.005, 0.004],
            plane_samples: 12,
        }
    }
}

/// `[equivalence]`: `Ḣ^s` norms with and without the potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EquivalenceConfig {
    pub n: usize,
    pub a: Vec<f64>,
    pub sectors: Vec<usize>,
    pub s: Vec<f64>,
    pub grids: Vec<usize>,
    /// Seeded random annulus profiles added to the standard bump.
    pub random_profiles: u64,
    /// Log-periodic node count for the dual-norm check (odd).
    pub dual_len: usize,
}

impl Default for EquivalenceConfig {
    fn default() -> Self {
        Self {
            n: 3,
            a: vec![1.0, -0.2],
            sectors: vec![0, 1],
            s: vec![1.0, 0.5, -0.5, -1.0],
            grids: vec![1024, 2048],
            random_profiles: 3,
            dual_len: 1025,
        }
    }
}

/// `[conservation]`: conserved quantities along the flows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConservationConfig {
    pub sector: SectorSpec,
    pub t_max: f64,
    /// Sector of the pseudo-conformal check (`n ≥ 3`).
    pub pseudo_conformal: SectorSpec,
    pub pseudo_conformal_t_max: f64,
}

impl Default for ConservationConfig {
    fn default() -> Self {
        Self {
            sector: sector(3, 1.0, 0),
            t_max: 10.0,
            pseudo_conformal: sector(5, 1.0, 0),
            pseudo_conformal_t_max: 5.0,
        }
    }
}

/// `[katojensen]`: decay of `‖u(t)/r²‖`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KatoJensenConfig {
    pub sector: SectorSpec,
    pub t_min: f64,
    pub t_max: f64,
    pub times: usize,
}

impl Default for KatoJensenConfig {
    fn default() -> Self {
        Self {
            sector: sector(5, 1.0, 0),
            t_min: 10.0,
            t_max: 100.0,
            times: 11,
        }
    }
}

/// `[localization]`: dyadic decay exponents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LocalizationConfig {
    pub j_min: i32,
    pub j_max: i32,
    /// Lattice spacings, coarse to fine.
    pub spacings: Vec<f64>,
    pub margin: f64,
    pub mn_sector: SectorSpec,
    pub weighted_sector: SectorSpec,
    pub eta: Vec<f64>,
    pub n: usize,
    pub d: usize,
    pub zeta: Vec<f64>,
}

impl Default for LocalizationConfig {
    fn default() -> Self {
        Self {
            j_min: -4,
            j_max: 4,
            spacings: vec![0.04, 0.02],
            margin: 14.0,
            mn_sector: sector(3, 1.0, 0),
            weighted_sector: sector(3, 1.0, 1),
            eta: vec![1.0],
            n: 3,
            d: 1,
            zeta: vec![1.0],
        }
    }
}

impl LocalizationConfig {
    fn specs(&self) -> Vec<LatticeSpec> {
        self.spacings
            .iter()
            .map(|&h| LatticeSpec {
                h,
                margin: self.margin,
            })
            .collect()
    }
}

/// `[constants]`: the `C_{ν,α}` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstantsConfig {
    pub nu: Vec<f64>,
    pub alpha: Vec<f64>,
}

impl Default for ConstantsConfig {
    fn default() -> Self {
        Self {
            nu: vec![0.5, 1.25f64.sqrt(), 1.5, 2.0, 2.5, 3.5],
            alpha: vec![0.25],
        }
    }
}

/// Which flow `evolve` integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Equation {
    Schrodinger,
    Wave,
}

/// Initial data of `evolve`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataProfile {
    /// `e^{−r²/(2w²)}`.
    Gaussian,
    /// `r^{ν−λ} e^{−r²/(2w²)}`.
    SectorGaussian,
    /// Standard bump on `[1, 2]`.
    Bump,
}

/// `[evolve]`: snapshot dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveConfig {
    pub sector: SectorSpec,
    pub equation: Equation,
    pub profile: DataProfile,
    pub width: f64,
    pub times: Vec<f64>,
    pub len: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    pub out: Option<PathBuf>,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self {
            sector: sector(3, 0.0, 0),
            equation: Equation::Schrodinger,
            profile: DataProfile::Gaussian,
            width: 1.0,
            times: vec![0.0, 1.0, 2.0],
            len: 1024,
            r_min: 1e-3,
            r_max: 50.0,
            rho_min: 1e-3,
            rho_max: 50.0,
            out: None,
        }
    }
}

/// A whole run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Suites to run; empty runs every suite.
    pub suites: Vec<Suite>,
    pub out: Option<PathBuf>,
    /// Seed of the random profiles.
    pub seed: u64,
    /// `"suite.experiment" = tolerance` overrides.
    pub tolerances: BTreeMap<String, f64>,
    pub hankel: HankelConfig,
    pub kernel: KernelConfig,
    pub smoothing: SmoothingConfig,
    pub morawetz: MorawetzConfig,
    pub strichartz: StrichartzConfig,
    pub hardy: HardyConfig,
    pub equivalence: EquivalenceConfig,
    pub conservation: ConservationConfig,
    pub katojensen: KatoJensenConfig,
    pub localization: LocalizationConfig,
    pub constants: ConstantsConfig,
    pub evolve: EvolveConfig,
}

impl RunConfig {
    /// Selected suites in canonical order.
    pub fn selected(&self) -> Vec<Suite> {
        if self.suites.is_empty() {
            Suite::ALL.to_vec()
        } else {
            Suite::ALL
                .into_iter()
                .filter(|s| self.suites.contains(s))
                .collect()
        }
    }
}

/// A configuration problem, with the offending line when known.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Parses and validates a run configuration.
pub fn parse_config(text: &str) -> std::result::Result<RunConfig, ConfigError> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError {
        line: e.span().map(|s| line_at(text, s.start)),
        message: e.message().trim().to_string(),
    })?;
    validate(&cfg).map_err(|(section, key, message)| ConfigError {
        line: line_of(text, section, key),
        message,
    })?;
    Ok(cfg)
}

fn line_at(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of `key` inside `[section]` (top level when `None`).
fn line_of(text: &str, section: Option<&str>, key: &str) -> Option<usize> {
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            current = Some(
                line.trim_matches(|c| c == '[' || c == ']')
                    .trim()
                    .to_string(),
            );
            continue;
        }
        let in_section = match section {
            None => current.is_none(),
            Some(s) => {
                current.as_deref() == Some(s)
                    || current
                        .as_deref()
                        .is_some_and(|c| c.starts_with(&format!("{s}.")))
            }
        };
        if in_section {
            if let Some(rest) = line.strip_prefix(key) {
                if rest.trim_start().starts_with('=') || rest.starts_with('.') {
                    return Some(i + 1);
                }
            }
        }
    }
    section.and_then(|s| {
        text.lines()
            .position(|l| l.trim() == format!("[{s}]"))
            .map(|i| i + 1)
    })
}

type Invalid = (Option<&'static str>, &'static str, String);

fn check(
    ok: bool,
    section: &'static str,
    key: &'static str,
    msg: impl FnOnce() -> String,
) -> std::result::Result<(), Invalid> {
    if ok {
        Ok(())
    } else {
        Err((Some(section), key, msg()))
    }
}

fn check_ctx(
    section: &'static str,
    key: &'static str,
    s: &SectorSpec,
) -> std::result::Result<HarmonicContext, Invalid> {
    s.context().map_err(|e| {
        (
            Some(section),
            key,
            format!("sector ({}, {}, {}): {e}", s.n, s.a, s.l),
        )
    })
}

fn check_grids(section: &'static str, grids: &[usize]) -> std::result::Result<(), Invalid> {
    check(
        !grids.is_empty() && grids.iter().all(|&g| g >= 16),
        section,
        "grids",
        || "grids must list at least one node count >= 16".into(),
    )?;
    check(
        grids.windows(2).all(|w| w[1] > w[0]),
        section,
        "grids",
        || "grids must increase".into(),
    )
}

fn check_alpha_in(
    section: &'static str,
    ctx: &HarmonicContext,
    alpha: f64,
) -> std::result::Result<(), Invalid> {
    let end = 0.25 + ctx.nu() / 2.0;
    check(alpha > 0.0 && alpha < end, section, "alpha", || {
        format!(
            "alpha = {alpha} violates 0 < alpha < 1/4 + nu/2 = {end} for sector (n, a, l) = ({}, {}, {}) with nu = {}",
            ctx.n(),
            ctx.a(),
            ctx.l(),
            ctx.nu()
        )
    })
}

fn validate(cfg: &RunConfig) -> std::result::Result<(), Invalid> {
    for (key, tol) in &cfg.tolerances {
        let known = key
            .split_once('.')
            .and_then(|(s, e)| Suite::from_name(s).map(|s| s.experiments().contains(&e)))
            .unwrap_or(false);
        check(known, "tolerances", "", || {
            format!("unknown tolerance key \"{key}\"")
        })?;
        check(tol.is_finite() && *tol >= 0.0, "tolerances", "", || {
            format!("tolerance for {key} must be >= 0")
        })?;
    }

    let h = &cfg.hankel;
    for s in &h.sectors {
        check_ctx("hankel", "sectors", s)?;
    }
    check_grids("hankel", &h.grids)?;
    check(
        0.0 < h.r_min && h.r_min < h.r_max && h.rho_max > 0.0 && h.shared_max > h.r_min,
        "hankel",
        "r_max",
        || "hankel grids need 0 < r_min < r_max and positive rho_max, shared_max".into(),
    )?;
    check(
        [2, 4, 6, 8].contains(&h.fd_order),
        "hankel",
        "fd_order",
        || "fd_order must be 2, 4, 6 or 8".into(),
    )?;

    let k = &cfg.kernel;
    let kctx = check_ctx("kernel", "sector", &k.sector)?;
    check_alpha_in("kernel", &kctx, k.alpha)?;
    check(
        k.composition_len % 2 == 1 && k.element_len % 2 == 1,
        "kernel",
        "composition_len",
        || "log-periodic node counts must be odd".into(),
    )?;

    let s = &cfg.smoothing;
    check(
        !s.sectors.is_empty() && !s.alpha.is_empty(),
        "smoothing",
        "sectors",
        || "smoothing needs at least one sector and one alpha".into(),
    )?;
    check_grids("smoothing", &s.grids)?;
    s.time
        .grid()
        .map_err(|e| (Some("smoothing"), "time", e.to_string()))?;
    for &l in &s.sectors {
        for a in std::iter::once(s.a).chain(s.free.then_some(0.0)) {
            let ctx = check_ctx("smoothing", "sectors", &sector(s.n, a, l))?;
            for &alpha in &s.alpha {
                check_alpha_in("smoothing", &ctx, alpha)?;
            }
        }
    }

    let m = &cfg.morawetz;
    let mctx = check_ctx("morawetz", "sector", &m.sector)?;
    check_alpha_in("morawetz", &mctx, m.alpha)?;
    check_grids("morawetz", &m.grids)?;
    m.time
        .grid()
        .map_err(|e| (Some("morawetz"), "time", e.to_string()))?;

    let st = &cfg.strichartz;
    let sctx = check_ctx("strichartz", "sector", &st.sector)?;
    check(
        schrodinger_admissible(sctx.n(), st.p, st.q) && st.p.is_finite() && st.q.is_finite(),
        "strichartz",
        "q",
        || {
            format!(
                "(p, q) = ({}, {}) is not a finite Schrödinger-admissible pair in n = {}",
                st.p,
                st.q,
                sctx.n()
            )
        },
    )?;
    check_grids("strichartz", &st.grids)?;
    st.time
        .grid()
        .map_err(|e| (Some("strichartz"), "time", e.to_string()))?;

    let hd = &cfg.hardy;
    check(
        !hd.epsilons.is_empty() && hd.epsilons.iter().all(|&e| e > 0.0 && e < 0.5),
        "hardy",
        "epsilons",
        || "epsilons must lie in (0, 1/2)".into(),
    )?;

    let e = &cfg.equivalence;
    check_grids("equivalence", &e.grids)?;
    check(e.dual_len % 2 == 1, "equivalence", "dual_len", || {
        "dual_len must be odd".into()
    })?;
    check(
        !e.a.is_empty() && !e.sectors.is_empty() && !e.s.is_empty(),
        "equivalence",
        "s",
        || "equivalence needs a, sectors and s".into(),
    )?;
    for &a in &e.a {
        for &l in &e.sectors {
            check_ctx("equivalence", "sectors", &sector(e.n, a, l))?;
        }
        for &s in &e.s {
            equivalence_constants(e.n, a, s)
                .map_err(|err| (Some("equivalence"), "s", err.to_string()))?;
        }
    }

    let c = &cfg.conservation;
    check_ctx("conservation", "sector", &c.sector)?;
    let pc = check_ctx("conservation", "pseudo_conformal", &c.pseudo_conformal)?;
    check(pc.n() >= 3, "conservation", "pseudo_conformal", || {
        "the pseudo-conformal check needs n >= 3".into()
    })?;
    check(
        c.t_max > 0.0 && c.pseudo_conformal_t_max > 0.0,
        "conservation",
        "t_max",
        || "t_max must be positive".into(),
    )?;

    let kj = &cfg.katojensen;
    let kjctx = check_ctx("katojensen", "sector", &kj.sector)?;
    check(kjctx.n() >= 5, "katojensen", "sector", || {
        "the Kato–Jensen estimate needs n >= 5".into()
    })?;
    check(
        0.0 < kj.t_min && kj.t_min < kj.t_max && kj.times >= 3,
        "katojensen",
        "t_max",
        || "need 0 < t_min < t_max and at least 3 times".into(),
    )?;

    let lc = &cfg.localization;
    check(lc.j_max - lc.j_min >= 8, "localization", "j_max", || {
        "the j range must span at least 8 to realise every fitted separation".into()
    })?;
    check(
        !lc.spacings.is_empty() && lc.spacings.iter().all(|&h| h > 0.0 && h <= 0.2),
        "localization",
        "spacings",
        || "spacings must lie in (0, 0.2]".into(),
    )?;
    let mnctx = check_ctx("localization", "mn_sector", &lc.mn_sector)?;
    check(mnctx.a() != 0.0, "localization", "mn_sector", || {
        "the mn decay needs a != 0".into()
    })?;
    check_ctx("localization", "weighted_sector", &lc.weighted_sector)?;
    check(
        lc.eta.iter().all(|e| (0.0..=2.0).contains(e)),
        "localization",
        "eta",
        || "eta must lie in [0, 2]".into(),
    )?;
    check(
        lc.zeta.iter().all(|z| (0.0..=2.0).contains(z)),
        "localization",
        "zeta",
        || "zeta must lie in [0, 2]".into(),
    )?;
    let free = check_ctx("localization", "d", &sector(lc.n, 0.0, lc.d))?;
    check(lc.d >= free.d0(), "localization", "d", || {
        format!("d must be at least d0 = {}", free.d0())
    })?;

    let k = &cfg.constants;
    check(k.nu.iter().all(|&v| v > 0.0), "constants", "nu", || {
        "nu values must be positive".into()
    })?;
    for &nu in &k.nu {
        for &alpha in &k.alpha {
            check(
                alpha > 0.0 && alpha < 0.25 + nu / 2.0,
                "constants",
                "alpha",
                || {
                    format!(
                        "alpha = {alpha} violates 0 < alpha < 1/4 + nu/2 = {} for nu = {nu}",
                        0.25 + nu / 2.0
                    )
                },
            )?;
        }
    }

    let ev = &cfg.evolve;
    check_ctx("evolve", "sector", &ev.sector)?;
    check(
        !ev.times.is_empty() && ev.times.iter().all(|t| t.is_finite()),
        "evolve",
        "times",
        || "times must be a nonempty list of finite values".into(),
    )?;
    check(ev.len >= 16 && ev.width > 0.0, "evolve", "len", || {
        "need len >= 16 and width > 0".into()
    })?;
    check(
        0.0 < ev.r_min && ev.r_min < ev.r_max && 0.0 < ev.rho_min && ev.rho_min < ev.rho_max,
        "evolve",
        "r_max",
        || "need 0 < r_min < r_max and 0 < rho_min < rho_max".into(),
    )?;
    Ok(())
}

/// One line of the summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub suite: Suite,
    pub report: EstimateReport,
}

impl Row {
    pub fn experiment(&self) -> &str {
        &self.report.experiment
    }
    pub fn pass(&self) -> bool {
        self.report.pass
    }
}

/// All rows of a run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Summary {
    pub rows: Vec<Row>,
}

impl Summary {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(Row::pass)
    }

    pub fn find(&self, suite: Suite, experiment: &str) -> Vec<&Row> {
        self.rows
            .iter()
            .filter(|r| r.suite == suite && r.experiment() == experiment)
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        w.write_record(COLUMNS).expect("in-memory write");
        for row in &self.rows {
            let r = &row.report;
            w.write_record([
                row.suite.name().to_string(),
                r.experiment.clone(),
                serde_json::to_string(&r.params).expect("params serialise"),
                number(r.computed),
                number(r.reference),
                number(r.rel_dev),
                number(r.tolerance),
                r.pass.to_string(),
            ])
            .expect("in-memory write");
        }
        let body = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv");
        format!("{SCHEMA}\n{body}")
    }

    /// Writes `summary.csv` and `json/NNN_suite_experiment.json` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let json_dir = dir.join("json");
        std::fs::create_dir_all(&json_dir).map_err(io_error)?;
        for (i, row) in self.rows.iter().enumerate() {
            let name = format!("{i:03}_{}_{}.json", row.suite, row.experiment());
            let body = serde_json::to_string_pretty(row).expect("rows serialise");
            write_atomic(&json_dir.join(name), body.as_bytes())?;
        }
        write_atomic(&dir.join("summary.csv"), self.to_csv().as_bytes())
    }
}

fn number(x: f64) -> String {
    format!("{x:.12e}")
}

fn io_error(e: std::io::Error) -> Error {
    Error::Resource(format!("file system: {e}"))
}

/// Writes through a temporary sibling and renames, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.{}.tmp", std::process::id()));
    let mut file = std::fs::File::create(&tmp).map_err(io_error)?;
    file.write_all(bytes).map_err(io_error)?;
    file.sync_all().map_err(io_error)?;
    drop(file);
    std::fs::rename(&tmp, path).map_err(io_error)
}

/// Runs the selected suites in canonical order and applies tolerance overrides.
pub fn run(cfg: &RunConfig) -> Result<Summary> {
    use rayon::prelude::*;
    let per_suite = cfg
        .selected()
        .into_par_iter()
        .map(|suite| run_suite(suite, cfg).map(|reports| (suite, reports)))
        .collect::<Result<Vec<_>>>()?;
    let rows = per_suite
        .into_iter()
        .flat_map(|(suite, reports)| reports.into_iter().map(move |r| (suite, r)))
        .map(|(suite, report)| Row {
            suite,
            report: apply_override(cfg, suite, report),
        })
        .collect();
    Ok(Summary { rows })
}

fn apply_override(cfg: &RunConfig, suite: Suite, mut r: EstimateReport) -> EstimateReport {
    if let Some(&tol) = cfg.tolerances.get(&format!("{suite}.{}", r.experiment)) {
        r.tolerance = tol;
        r.pass = r.convergence.converged && r.criterion.holds(r.computed, r.reference, tol);
    }
    r
}

/// Runs one suite.
pub fn run_suite(suite: Suite, cfg: &RunConfig) -> Result<Vec<EstimateReport>> {
    match suite {
        Suite::Hankel => hankel_suite(&cfg.hankel),
        Suite::Kernel => kernel_suite(&cfg.kernel),
        Suite::Smoothing => smoothing_suite(&cfg.smoothing),
        Suite::Morawetz => morawetz_suite(&cfg.morawetz),
        Suite::Strichartz => strichartz_suite(&cfg.strichartz),
        Suite::Hardy => hardy_suite(&cfg.hardy, cfg.seed),
        Suite::Equivalence => equivalence_suite(&cfg.equivalence, cfg.seed),
        Suite::Conservation => conservation_suite(&cfg.conservation),
        Suite::Katojensen => katojensen_suite(&cfg.katojensen),
        Suite::Localization => localization_suite(&cfg.localization),
        Suite::Constants => constants_suite(&cfg.constants),
    }
}

/// Convergence record of a check with no refinement parameter.
fn exact(quantity: &str) -> Convergence {
    Convergence {
        quantity: quantity.to_string(),
        resolutions: Vec::new(),
        values: Vec::new(),
        deltas: Vec::new(),
        tolerance: 0.0,
        horizon: None,
        converged: true,
    }
}

/// A defect row: `computed` against 0 with an absolute bound.
fn defect(name: &str, params: &[(&str, f64)], value: f64, bound: f64) -> EstimateReport {
    EstimateReport::new(
        name,
        params,
        value,
        0.0,
        bound,
        Criterion::Absolute,
        exact("defect"),
    )
}

fn sector_params(ctx: &HarmonicContext) -> Vec<(&'static str, f64)> {
    vec![("n", ctx.n() as f64), ("a", ctx.a()), ("l", ctx.l() as f64)]
}

fn with(
    mut p: Vec<(&'static str, f64)>,
    extra: &[(&'static str, f64)],
) -> Vec<(&'static str, f64)> {
    p.extend_from_slice(extra);
    p
}

fn grid(n: usize, lo: f64, hi: f64, len: usize) -> Result<Arc<RadialGrid>> {
    Ok(Arc::new(make_grid(n, lo, hi, len)?))
}

fn quadrature_pair(
    ctx: HarmonicContext,
    phys: (f64, f64),
    spec: (f64, f64),
    len: usize,
) -> Result<HankelPair> {
    HankelPair::quadrature(
        ctx,
        grid(ctx.n(), phys.0, phys.1, len)?,
        grid(ctx.n(), spec.0, spec.1, len)?,
    )
}

/// Log-periodic pair over `[1e−3, 1e2]` for data near `[1, 2]`.
fn periodic_pair(ctx: HarmonicContext, len: usize) -> Result<HankelPair> {
    let phys = Arc::new(RadialGrid::periodic_span(ctx.n(), 1e-3, 1e2, len)?);
    let spec = Arc::new(RadialGrid::periodic(
        ctx.n(),
        (1e-2f64).ln(),
        phys.spacing(),
        len,
    )?);
    HankelPair::log_periodic(ctx, phys, spec)
}

fn field(pair: &HankelPair, f: impl Fn(f64) -> f64) -> Result<SectorField> {
    SectorField::from_real(*pair.context(), pair.physical().clone(), Side::Physical, f)
}

/// Ratio of consecutive defects under doubling; defects at the rounding floor count as 0.
fn doubling_row(
    name: &str,
    params: &[(&str, f64)],
    grids: &[usize],
    values: &[f64],
) -> EstimateReport {
    let worst = values
        .windows(2)
        .map(|w| {
            if w[1] <= DOUBLING_FLOOR {
                0.0
            } else {
                w[1] / w[0]
            }
        })
        .fold(0.0, f64::max);
    let conv = Convergence {
        quantity: "defect".into(),
        resolutions: grids.to_vec(),
        values: values.to_vec(),
        deltas: Vec::new(),
        tolerance: 0.0,
        horizon: None,
        converged: values.len() >= 2,
    };
    EstimateReport::new(name, params, worst, 1.0, 0.0, Criterion::AtMost, conv)
        .diagnostic("floor", DOUBLING_FLOOR)
}

fn hankel_suite(cfg: &HankelConfig) -> Result<Vec<EstimateReport>> {
    const BOUND: f64 = 1e-4;
    let mut out = Vec::new();
    for s in &cfg.sectors {
        let ctx = s.context()?;
        let mut series: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        for &len in &cfg.grids {
            let pair = quadrature_pair(ctx, (cfg.r_min, cfg.r_max), (cfg.r_min, cfg.rho_max), len)?;
            let f = field(&pair, standard_bump)?;
            let shared = grid(ctx.n(), cfg.r_min, cfg.shared_max, len)?;
            let plan = make_plan(ctx, shared.clone(), shared.clone())?;
            let u = SectorField::from_real(ctx, shared.clone(), Side::Physical, standard_bump)?;
            let v = SectorField::from_real(ctx, shared, Side::Physical, |r| {
                gaussian_poly(r, ctx.nu(), ctx.lambda(), &[1.0, 0.3])
            })?;
            series
                .entry("involution")
                .or_default()
                .push(involution_defect(&pair, &f)?);
            series
                .entry("isometry")
                .or_default()
                .push(isometry_defect(pair.forward(), &f)?);
            series
                .entry("self_adjointness")
                .or_default()
                .push(self_adjointness_defect(&plan, &u, &v)?);
            series
                .entry("diagonalization")
                .or_default()
                .push(diagonalization_defect(pair.forward(), &f, cfg.fd_order)?);
        }
        for name in [
            "involution",
            "isometry",
            "self_adjointness",
            "diagonalization",
        ] {
            let values = &series[name];
            let params = with(sector_params(&ctx), &[("N", cfg.grids[0] as f64)]);
            out.push(defect(name, &params, values[0], BOUND));
        }
        for name in [
            "involution",
            "isometry",
            "self_adjointness",
            "diagonalization",
        ] {
            let label = format!("{name}_doubling");
            out.push(doubling_row(
                &label,
                &sector_params(&ctx),
                &cfg.grids,
                &series[name],
            ));
        }
    }
    Ok(out)
}

/// `∫ k(s) φ(s) s^{n−1} ds` over `[a, b]` by composite Gauss–Legendre.
fn integrate_against(
    k: impl Fn(f64) -> f64,
    phi: impl Fn(f64) -> f64,
    n: usize,
    a: f64,
    b: f64,
) -> f64 {
    let rule = GaussRule::new(32);
    let pieces = 16;
    let step = (b - a) / pieces as f64;
    (0..pieces)
        .map(|p| {
            let lo = a + p as f64 * step;
            rule.integrate(lo, lo + step, |s| k(s) * phi(s) * s.powi(n as i32 - 1))
        })
        .sum()
}

/// Largest deviation on nodes in `window`, relative to the largest expected value there.
fn max_rel_on(x: &SectorField, expect: impl Fn(f64) -> f64, window: (f64, f64)) -> f64 {
    let (mut num, mut den) = (0.0f64, 0.0f64);
    for (r, v) in x.grid().nodes().iter().zip(x.values()) {
        if (window.0..window.1).contains(r) {
            let e = expect(*r);
            num = num.max((v.re - e).abs());
            den = den.max(e.abs());
        }
    }
    num / den
}

fn kernel_suite(cfg: &KernelConfig) -> Result<Vec<EstimateReport>> {
    let ctx = cfg.sector.context()?;
    let p = sector_params(&ctx);
    let mut out = Vec::new();

    let s = -0.5 - 2.0 * cfg.alpha;
    let pair = periodic_pair(ctx, cfg.composition_len)?;
    let f = field(&pair, standard_bump)?;
    let twice = apply_frac_power(&pair, &apply_frac_power(&pair, &f, s)?, s)?;
    let once = apply_frac_power(&pair, &f, 2.0 * s)?;
    out.push(defect(
        "composition",
        &with(p.clone(), &[("sigma", s)]),
        twice.rel_distance(&once)?,
        1e-7,
    ));

    let (a, b) = (0.95, 1.05);
    let bump = |r: f64| annulus_bump(r, a, b, 0.3, 1.0);
    let spec = KernelSpec::new(ctx, -1.0);
    let pair = periodic_pair(ctx, cfg.element_len)?;
    let f = field(&pair, bump)?;
    let routed = apply_frac_power(&pair, &f, -1.0)?;
    let expect = |r: f64| {
        integrate_against(
            |s| frac_kernel(&spec, r, s).unwrap_or(f64::NAN),
            bump,
            ctx.n(),
            a,
            b,
        )
    };
    let err = max_rel_on(&routed, expect, (1.9, 2.1));
    out.push(defect(
        "kernel_element",
        &with(p.clone(), &[("sigma", -1.0)]),
        err,
        1e-4,
    ));

    let to = ctx.free()?;
    let free_pair = periodic_pair(to, cfg.element_len)?;
    let k0 = conjugation_apply(&pair, &free_pair, &f)?;
    let expect = |r: f64| {
        integrate_against(
            |s| conjugation_kernel(&ctx, &to, r, s).unwrap_or(f64::NAN),
            bump,
            ctx.n(),
            a,
            b,
        )
    };
    let err = max_rel_on(&k0, expect, (2.0, 3.0)).max(max_rel_on(&k0, expect, (0.3, 0.5)));
    out.push(defect("conjugation_element", &p, err, 1e-4));

    let mut sym = 0.0f64;
    let mut hom = 0.0f64;
    for sigma in [-1.0 - 4.0 * cfg.alpha, -1.0, -0.5] {
        let spec = KernelSpec::new(ctx, sigma);
        for (r, s) in [(0.3, 1.7), (1.0, 2.5), (2.0, 0.7), (0.05, 0.9)] {
            let k = frac_kernel(&spec, r, s)?;
            sym = sym.max(((k - frac_kernel(&spec, s, r)?) / k).abs());
            let scaled = frac_kernel(&spec, 2.0 * r, 2.0 * s)?;
            hom = hom.max((scaled / (k * 2f64.powf(spec.degree())) - 1.0).abs());
        }
    }
    out.push(defect("kernel_symmetry", &p, sym, 1e-12));
    out.push(defect("kernel_homogeneity", &p, hom, 1e-12));
    Ok(out)
}

fn smoothing_suite(cfg: &SmoothingConfig) -> Result<Vec<EstimateReport>> {
    let time = cfg.time.grid()?;
    let mut out = Vec::new();
    let pairs_for = |ctx: HarmonicContext| -> Result<Vec<HankelPair>> {
        cfg.grids
            .iter()
            .map(|&len| quadrature_pair(ctx, (cfg.r_min, cfg.r_max), (cfg.r_min, cfg.rho_max), len))
            .collect()
    };
    for &l in &cfg.sectors {
        for a in std::iter::once(cfg.a).chain(cfg.free.then_some(0.0)) {
            let ctx = make_context(cfg.n, a, l)?;
            let pairs = pairs_for(ctx)?;
            let (nu, la) = (ctx.nu(), ctx.lambda());
            let first = move |r: f64| sector_gaussian(r, nu, la, 1.0);
            for &alpha in &cfg.alpha {
                let mut r = smoothing_experiment(&pairs, alpha, &first, &time)?;
                r.experiment = "smoothing_ratio".into();
                r.params.insert("alpha".into(), alpha);
                out.push(r);
            }
            if a == cfg.a {
                let coeffs = cfg.second_profile.clone();
                let second = move |r: f64| gaussian_poly(r, nu, la, &coeffs);
                let alpha = cfg.alpha[0];
                let x = smoothing_experiment(&pairs[..1], alpha, &first, &time)?;
                let y = smoothing_experiment(&pairs[..1], alpha, &second, &time)?;
                let params = with(sector_params(&ctx), &[("alpha", alpha)]);
                out.push(
                    EstimateReport::new(
                        "data_independence",
                        &params,
                        x.computed / y.computed,
                        1.0,
                        0.03,
                        Criterion::Relative,
                        exact("ratio of ratios"),
                    )
                    .diagnostic("first", x.computed)
                    .diagnostic("second", y.computed),
                );
            }
        }
    }
    Ok(out)
}

fn morawetz_suite(cfg: &MorawetzConfig) -> Result<Vec<EstimateReport>> {
    let ctx = cfg.sector.context()?;
    let pairs = cfg
        .grids
        .iter()
        .map(|&len| HankelPair::symmetric(ctx, grid(ctx.n(), cfg.r_min, cfg.r_max, len)?))
        .collect::<Result<Vec<_>>>()?;
    let zero = |_: f64| 0.0;
    let mut r = morawetz_experiment(
        &pairs,
        cfg.alpha,
        &standard_bump,
        &zero,
        &cfg.time.grid()?,
        Criterion::Relative,
    )?;
    r.experiment = "morawetz_ratio".into();
    r.params.insert("alpha".into(), cfg.alpha);
    Ok(vec![r])
}

fn strichartz_suite(cfg: &StrichartzConfig) -> Result<Vec<EstimateReport>> {
    let ctx = cfg.sector.context()?;
    let adm = AdmissiblePair::schrodinger(ctx.n(), cfg.p, cfg.q)?;
    let time = cfg.time.grid()?;
    let pairs = cfg
        .grids
        .iter()
        .map(|&len| quadrature_pair(ctx, (cfg.r_min, cfg.r_max), (cfg.r_min, cfg.rho_max), len))
        .collect::<Result<Vec<_>>>()?;
    let (nu, la) = (ctx.nu(), ctx.lambda());
    let profile = move |r: f64| sector_gaussian(r, nu, la, 1.0);
    let zero = |_: f64| 0.0;
    let mut out = Vec::new();
    let mut r = strichartz_experiment(&pairs, &adm, &profile, &zero, &time)?;
    r.experiment = "strichartz_ratio".into();
    out.push(r);

    let pair = &pairs[0];
    let data = WaveDataPair::new(field(pair, profile)?, field(pair, zero)?)?;
    let (lhs, rhs, _) = strichartz_norms(pair, &adm, &data, &time)?;
    let scaled = HankelPair::quadrature(
        ctx,
        Arc::new(pair.physical().dilate(0.5)),
        Arc::new(pair.spectral().dilate(2.0)),
    )?;
    let data2 = WaveDataPair::new(field(&scaled, |r| profile(2.0 * r))?, field(&scaled, zero)?)?;
    let (lhs2, rhs2, _) = strichartz_norms(&scaled, &adm, &data2, &time.scaled(0.25))?;
    let dev = ((lhs2 / rhs2) / (lhs / rhs) - 1.0).abs();
    out.push(defect(
        "scale_invariance",
        &with(sector_params(&ctx), &[("p", cfg.p), ("q", cfg.q)]),
        dev,
        1e-12,
    ));

    // Tabulated admissibility facts: each mismatch counts once.
    let mut mismatches = 0.0;
    let sigma = wave_admissible(4, 2.0, 6.0, 1.0 / 6.0);
    if !matches!(sigma, Ok(s) if (s + 2.0 / 3.0).abs() < 1e-15) {
        mismatches += 1.0;
    }
    if schrodinger_admissible(2, 2.0, f64::INFINITY)
        || AdmissiblePair::schrodinger(2, 2.0, f64::INFINITY).is_ok()
    {
        mismatches += 1.0;
    }
    if wave_admissible(3, 2.0, f64::MAX, 1.0).is_ok() || wave_admissible(3, 2.0, 6.0, 1.0).is_ok() {
        mismatches += 1.0;
    }
    if !schrodinger_admissible(3, 2.0, 6.0) {
        mismatches += 1.0;
    }
    out.push(defect("admissibility", &[], mismatches, 0.0));
    Ok(out)
}

fn hardy_suite(cfg: &HardyConfig, seed: u64) -> Result<Vec<EstimateReport>> {
    let mut out = Vec::new();

    let ctx4 = make_context(4, 0.0, 0)?;
    let pair =
        HankelPair::quadrature(ctx4, grid(4, 1e-4, 40.0, 2048)?, grid(4, 1e-4, 30.0, 2048)?)?;
    let q = hardy_quotient(&pair, &field(&pair, |r| r * (-r).exp())?)?;
    out.push(EstimateReport::new(
        "closed_form",
        &sector_params(&ctx4),
        q,
        0.5f64.sqrt(),
        1e-3,
        Criterion::Absolute,
        exact("quotient"),
    ));

    let ctx3 = make_context(3, 0.0, 0)?;
    let bound = hardy_constant(&ctx3)?;
    let (h, x0) = (0.05, -700.0);
    let lattice = Arc::new(RadialGrid::periodic(
        3,
        x0,
        h,
        (((3.0 - x0) / h) as usize) | 1,
    )?);
    let mut eps = cfg.epsilons.clone();
    eps.sort_by(|a, b| b.total_cmp(a));
    let mut quotients = Vec::new();
    for &e in &eps {
        let f = SectorField::from_real(ctx3, lattice.clone(), Side::Physical, |r| {
            r.powf(-0.5 + e) * chi(r)
        })?;
        quotients.push(hardy_quotient_periodic(&f)?);
    }
    let best = quotients.iter().cloned().fold(0.0, f64::max);
    let monotone = quotients.windows(2).all(|w| w[1] > w[0]);
    let conv = Convergence {
        quantity: "quotient along the sweep".into(),
        resolutions: (0..quotients.len()).collect(),
        values: quotients.clone(),
        deltas: Vec::new(),
        tolerance: 0.0,
        horizon: None,
        converged: monotone,
    };
    out.push(
        EstimateReport::new(
            "near_extremizer",
            &with(
                sector_params(&ctx3),
                &[("epsilon_min", *eps.last().expect("nonempty"))],
            ),
            best / bound,
            0.95,
            0.0,
            Criterion::AtLeast,
            conv,
        )
        .diagnostic("quotient", best)
        .diagnostic("sharp_constant", bound),
    );

    let ctx2 = make_context(2, 0.0, 1)?;
    let pair =
        HankelPair::quadrature(ctx2, grid(2, 1e-3, 4.0, 1024)?, grid(2, 1e-3, 120.0, 2048)?)?;
    let mut worst = 0.0f64;
    for k in 0..cfg.plane_samples {
        let (a, b) = (0.3 + 0.1 * (k % 12) as f64, 1.5 + 0.2 * (k % 12) as f64);
        let f = field(&pair, random_annulus_profile(seed.wrapping_add(k), a, b, 5))?;
        worst = worst.max(hardy_quotient(&pair, &f)?);
    }
    out.push(EstimateReport::new(
        "plane_bound",
        &with(
            sector_params(&ctx2),
            &[("samples", cfg.plane_samples as f64)],
        ),
        worst,
        hardy_constant(&ctx2)?,
        1e-6,
        Criterion::AtMost,
        exact("largest quotient"),
    ));
    Ok(out)
}

fn equivalence_suite(cfg: &EquivalenceConfig, seed: u64) -> Result<Vec<EstimateReport>> {
    let mut owned: Vec<Box<dyn Fn(f64) -> f64 + Sync>> = vec![Box::new(standard_bump)];
    for k in 0..cfg.random_profiles {
        owned.push(Box::new(random_annulus_profile(
            seed.wrapping_add(k),
            0.5,
            3.0,
            4,
        )));
    }
    let profiles: Vec<Profile> = owned.iter().map(|p| p.as_ref() as Profile).collect();
    let mut out = Vec::new();
    for &a in &cfg.a {
        let sets = cfg
            .sectors
            .iter()
            .map(|&l| {
                let pot = make_context(cfg.n, a, l)?;
                let free = pot.free()?;
                let build = |ctx| -> Result<Vec<HankelPair>> {
                    cfg.grids
                        .iter()
                        .map(|&len| quadrature_pair(ctx, (1e-3, 60.0), (1e-3, 60.0), len))
                        .collect()
                };
                Ok((build(pot)?, build(free)?))
            })
            .collect::<Result<Vec<(Vec<HankelPair>, Vec<HankelPair>)>>>()?;
        let runs: Vec<EquivalenceRun> = sets
            .iter()
            .map(|(p, f)| EquivalenceRun {
                potential: p,
                free: f,
            })
            .collect();
        for &s in &cfg.s {
            let mut r = norm_equivalence_experiment(&runs, s, &profiles)?;
            r.experiment = "norm_equivalence".into();
            if s == 1.0 {
                let d = r.diagnostics["s1_identity_defect"];
                out.push(defect(
                    "s1_identity",
                    &[("n", cfg.n as f64), ("a", a)],
                    d,
                    1e-8,
                ));
            }
            out.push(r);
        }
        for &l in &cfg.sectors {
            let ctx = make_context(cfg.n, a, l)?;
            let pair = periodic_pair(ctx, cfg.dual_len)?;
            let d = dual_norm_defect(&pair, &field(&pair, standard_bump)?)?;
            out.push(defect("dual_defect", &sector_params(&ctx), d, 1e-4));
        }
    }
    Ok(out)
}

fn conservation_suite(cfg: &ConservationConfig) -> Result<Vec<EstimateReport>> {
    let ctx = cfg.sector.context()?;
    let p = sector_params(&ctx);
    let mut out = Vec::new();

    let pair = quadrature_pair(ctx, (1e-3, 200.0), (1e-3, 8.0), 2048)?;
    let f = field(&pair, |r| sector_gaussian(r, ctx.nu(), ctx.lambda(), 1.0))?;
    let times = TimeGrid::linear(0.0, cfg.t_max, 21)?;
    let us = schrodinger_evolve_many(&pair, &f, times.times())?;
    let drift = us
        .iter()
        .map(|u| (u.norm() / f.norm() - 1.0).abs())
        .fold(0.0, f64::max);
    out.push(defect(
        "mass_drift",
        &with(p.clone(), &[("t_max", cfg.t_max)]),
        drift,
        1e-6,
    ));

    let pair = periodic_pair(ctx, 1025)?;
    let data = WaveDataPair::new(
        field(&pair, standard_bump)?,
        field(&pair, |r| annulus_bump(r, 1.0, 2.0, 0.3, 0.1))?,
    )?;
    let energy = |t: f64| -> Result<f64> {
        wave_energy(
            &pair,
            &wave_evolve(&pair, &data, t)?,
            &wave_velocity(&pair, &data, t)?,
        )
    };
    let e0 = energy(0.0)?;
    let mut drift = 0.0f64;
    for k in 1..=20 {
        drift = drift.max((energy(cfg.t_max * k as f64 / 20.0)? / e0 - 1.0).abs());
    }
    out.push(defect(
        "energy_drift",
        &with(p, &[("t_max", cfg.t_max)]),
        drift,
        1e-6,
    ));

    let pc = cfg.pseudo_conformal.context()?;
    let pair = quadrature_pair(pc, (1e-3, 100.0), (1e-4, 6.0), 1024)?;
    let f = field(&pair, |r| sector_gaussian(r, pc.nu(), pc.lambda(), 2.0))?;
    let mask = pair.physical().interior(8);
    let c0 = pseudo_conformal_apply(&pair, &f, 0.0)?.masked_norm(&mask);
    let mut drift = 0.0f64;
    for k in 1..=10 {
        let t = cfg.pseudo_conformal_t_max * k as f64 / 10.0;
        let u = schrodinger_evolve(&pair, &f, t)?;
        drift =
            drift.max((pseudo_conformal_apply(&pair, &u, t)?.masked_norm(&mask) / c0 - 1.0).abs());
    }
    out.push(defect(
        "pseudo_conformal_drift",
        &with(sector_params(&pc), &[("t_max", cfg.pseudo_conformal_t_max)]),
        drift,
        1e-4,
    ));
    Ok(out)
}

fn katojensen_suite(cfg: &KatoJensenConfig) -> Result<Vec<EstimateReport>> {
    let ctx = cfg.sector.context()?;
    let pairs = [1, 2]
        .iter()
        .map(|&k| {
            HankelPair::quadrature(
                ctx,
                grid(ctx.n(), 1e-2, 600.0, 600 * k)?,
                grid(ctx.n(), 1e-4, 4.0, 2400 * k)?,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let (nu, la) = (ctx.nu(), ctx.lambda());
    let profile = move |r: f64| sector_gaussian(r, nu, la, 2.0);
    let times = TimeGrid::geometric(cfg.t_min, cfg.t_max, cfg.times)?;
    let mut r = kato_jensen_experiment(&pairs, &profile, &times)?;
    r.experiment = "kato_jensen".into();
    let change = r.convergence.deltas.first().copied().unwrap_or(f64::NAN);
    let stability = defect(
        "weighted_ratio_stability",
        &sector_params(&ctx),
        change,
        0.05,
    );
    Ok(vec![r, stability])
}

fn localization_suite(cfg: &LocalizationConfig) -> Result<Vec<EstimateReport>> {
    let range = (cfg.j_min, cfg.j_max);
    let specs = cfg.specs();
    let mut out = Vec::new();
    out.push(mn_decay_experiment(&cfg.mn_sector.context()?, range, &specs)?.0);
    let weighted = cfg.weighted_sector.context()?;
    for &eta in &cfg.eta {
        out.push(m_weighted_decay(&weighted, eta, range, &specs)?.0);
    }
    for &zeta in &cfg.zeta {
        out.push(j_weighted_decay(cfg.n, cfg.d, zeta, range, &specs)?.0);
    }
    let [up, down] = newtonian_decay_experiment(cfg.n, cfg.d, &cfg.spacings)?;
    out.push(up.0);
    out.push(down.0);

    let free = make_context(cfg.mn_sector.n, 0.0, cfg.mn_sector.l)?;
    let lattice =
        LogLattice::for_bands(free.n(), cfg.j_min, cfg.j_max, cfg.margin, cfg.spacings[0])?;
    let mut worst = 0.0f64;
    for sep in 2..=4 {
        for (j, k) in [(cfg.j_min, cfg.j_min + sep), (cfg.j_min + sep, cfg.j_min)] {
            worst = worst.max(op_norm(&mjk(&free, &lattice, j, k)?)?.value);
        }
    }
    out.push(defect(
        "free_cross_terms",
        &sector_params(&free),
        worst,
        1e-10,
    ));
    Ok(out)
}

fn constants_suite(cfg: &ConstantsConfig) -> Result<Vec<EstimateReport>> {
    let mut out = Vec::new();
    for &alpha in &cfg.alpha {
        for &nu in &cfg.nu {
            let c = smoothing_constant(nu, alpha)?;
            let params = [("nu", nu), ("alpha", alpha)];
            if alpha == 0.25 {
                let closed = (std::f64::consts::PI / nu).sqrt();
                out.push(EstimateReport::new(
                    "closed_form",
                    &params,
                    c,
                    closed,
                    1e-12,
                    Criterion::Relative,
                    exact("constant"),
                ));
            } else {
                out.push(EstimateReport::new(
                    "constant",
                    &params,
                    c,
                    c,
                    0.0,
                    Criterion::Relative,
                    exact("constant"),
                ));
            }
        }
        // Monotone decrease on an 81-point log grid of admissible ν.
        let nus: Vec<f64> = (0..=80)
            .map(|k| 0.1 * 200f64.powf(k as f64 / 80.0))
            .filter(|&nu| alpha < 0.25 + nu / 2.0)
            .collect();
        let cs = nus
            .iter()
            .map(|&nu| smoothing_constant(nu, alpha))
            .collect::<Result<Vec<_>>>()?;
        let rises = cs.windows(2).filter(|w| w[1] >= w[0]).count();
        out.push(defect(
            "monotone_in_nu",
            &[("alpha", alpha), ("points", cs.len() as f64)],
            rises as f64,
            0.0,
        ));
    }
    for nu in [0.2, 0.5, 1.0, 2.5] {
        let end = 0.25 + nu / 2.0;
        let growth = smoothing_constant(nu, end - 1e-4)? / smoothing_constant(nu, end - 0.1)?;
        out.push(EstimateReport::new(
            "endpoint_divergence",
            &[("nu", nu)],
            growth,
            10.0,
            0.0,
            Criterion::AtLeast,
            exact("growth factor"),
        ));
    }
    Ok(out)
}

/// `C_{ν,α}` for every pair, with `None` outside the admissible range.
pub fn constants_table(nus: &[f64], alphas: &[f64]) -> Vec<(f64, f64, Option<f64>)> {
    alphas
        .iter()
        .flat_map(|&alpha| {
            nus.iter()
                .map(move |&nu| (nu, alpha, smoothing_constant(nu, alpha).ok()))
        })
        .collect()
}

/// Snapshot CSV `t,r,re,im,abs` of the configured evolution.
pub fn evolve_dump(cfg: &EvolveConfig) -> Result<String> {
    let ctx = cfg.sector.context()?;
    let pair = quadrature_pair(
        ctx,
        (cfg.r_min, cfg.r_max),
        (cfg.rho_min, cfg.rho_max),
        cfg.len,
    )?;
    let w = cfg.width;
    let (nu, la) = (ctx.nu(), ctx.lambda());
    let f = field(&pair, |r| match cfg.profile {
        DataProfile::Gaussian => gaussian(r, w),
        DataProfile::SectorGaussian => sector_gaussian(r, nu, la, w),
        DataProfile::Bump => standard_bump(r),
    })?;
    let snapshots = match cfg.equation {
        Equation::Schrodinger => cfg
            .times
            .iter()
            .map(|&t| {
                Ok((
                    t,
                    if t == 0.0 {
                        f.clone()
                    } else {
                        schrodinger_evolve(&pair, &f, t)?
                    },
                ))
            })
            .collect::<Result<Vec<_>>>()?,
        Equation::Wave => {
            let zero = f.scale(Complex64::new(0.0, 0.0));
            let data = WaveDataPair::new(f.clone(), zero)?;
            cfg.times
                .iter()
                .map(|&t| {
                    Ok((
                        t,
                        if t == 0.0 {
                            f.clone()
                        } else {
                            wave_evolve(&pair, &data, t)?
                        },
                    ))
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    let mut buf = Vec::new();
    write_snapshots(&mut buf, &snapshots)?;
    Ok(String::from_utf8(buf).expect("utf-8 csv"))
}

/// The default configuration as TOML, for `--help`.
pub fn default_config_toml() -> String {
    toml::to_string(&RunConfig::default()).expect("defaults serialise")
}

/// Exit status of a finished run: 0 when every row passes, 1 otherwise.
pub fn exit_status(summary: &Summary) -> i32 {
    if summary.all_pass() {
        0
    } else {
        1
    }
}

/// Exit status of a failed run: 2 for configuration errors, 1 for numerical failures.
pub fn error_status(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::SectorExcluded => 2,
        _ => 1,
    }
}

/// Checks that a path's parent exists, for early config errors.
pub fn check_output_dir(dir: &Path) -> Result<()> {
    if dir.exists() && !dir.is_dir() {
        return config(format!("{} exists and is not a directory", dir.display()));
    }
    Ok(())
}
