//! Seeded Monte Carlo sweeps and CSV output.
//!
//! Every trial draws its channel from `trial_seed(master, t)`, so all sweep
//! points and systems see the same realizations (paired comparisons). Jobs
//! run on a worker pool; results are reduced in trial order, so the CSV is
//! byte-identical for any worker count.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::{noise_free_problem, noise_free_upper_bound, solve_baseline, BaselineKind, BaselineTag, Objective};
use crate::channel::{effective_cnrs, generate, trial_seed, ChannelRealization};
use crate::config::{dbm_to_watt, watt_to_dbm, SystemConfig};
use crate::error::{Error, Result};
use crate::solver::{dinkelbach_solve, solve_problem, sudas_problem, tp_max_solve, SolveReport, SolverOptions, Variant};

/// Relative tolerance used when counting a trial as feasible.
pub const FEASIBILITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Convergence,
    EeVsPt,
    TimeSplitVsPt,
    TputVsPt,
    EeVsM,
    TputVsM,
    Custom,
}

impl Preset {
    pub const ALL: [Preset; 7] =
        [Preset::Convergence, Preset::EeVsPt, Preset::TimeSplitVsPt, Preset::TputVsPt, Preset::EeVsM, Preset::TputVsM, Preset::Custom];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Convergence => "convergence",
            Preset::EeVsPt => "ee_vs_pt",
            Preset::TimeSplitVsPt => "time_split_vs_pt",
            Preset::TputVsPt => "tput_vs_pt",
            Preset::EeVsM => "ee_vs_m",
            Preset::TputVsM => "tput_vs_m",
            Preset::Custom => "custom",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| {
            let names: Vec<_> = Self::ALL.iter().map(|p| p.name()).collect();
            Error::Config(format!("unknown preset `{s}`; expected one of {}", names.join(", ")))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    SudasOptimal,
    SudasSuboptimal,
    MimoBenchmark,
    NoSudas,
    /// Noise-free bound of the SUDAS problem; objective is ignored.
    NoiseFreeBound,
}

impl SystemKind {
    pub fn name(self) -> &'static str {
        match self {
            SystemKind::SudasOptimal => "sudas_optimal",
            SystemKind::SudasSuboptimal => "sudas_suboptimal",
            SystemKind::MimoBenchmark => "mimo_benchmark",
            SystemKind::NoSudas => "no_sudas",
            SystemKind::NoiseFreeBound => "noise_free_bound",
        }
    }
}

fn objective_name(o: Objective) -> &'static str {
    match o {
        Objective::EeMax => "ee_max",
        Objective::TpMax => "tp_max",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SystemSpec {
    pub system: SystemKind,
    #[serde(with = "objective_serde")]
    pub objective: Objective,
}

mod objective_serde {
    use super::Objective;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(o: &Objective, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(super::objective_name(*o))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Objective, D::Error> {
        match String::deserialize(d)?.as_str() {
            "ee_max" => Ok(Objective::EeMax),
            "tp_max" => Ok(Objective::TpMax),
            other => Err(serde::de::Error::custom(format!("unknown objective `{other}`, expected ee_max or tp_max"))),
        }
    }
}

impl SystemSpec {
    pub fn new(system: SystemKind, objective: Objective) -> Self {
        Self { system, objective }
    }

    /// `name` or `name:objective`, objective defaulting to ee_max.
    pub fn parse(s: &str) -> Result<Self> {
        let (sys, obj) = s.split_once(':').unwrap_or((s, "ee_max"));
        let system = [
            SystemKind::SudasOptimal,
            SystemKind::SudasSuboptimal,
            SystemKind::MimoBenchmark,
            SystemKind::NoSudas,
            SystemKind::NoiseFreeBound,
        ]
        .into_iter()
        .find(|k| k.name() == sys)
        .ok_or_else(|| Error::Config(format!("unknown system `{sys}`")))?;
        let objective = match obj {
            "ee_max" => Objective::EeMax,
            "tp_max" => Objective::TpMax,
            _ => return Err(Error::Config(format!("unknown objective `{obj}`"))),
        };
        Ok(Self { system, objective })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVar {
    /// Dinkelbach iteration index; one solve per trial, read off its trace.
    Iteration,
    /// BS budget in dBm.
    PtDbm,
    /// Number of SUDACs.
    NSudacs,
}

impl SweepVar {
    fn name(self) -> &'static str {
        match self {
            SweepVar::Iteration => "iteration",
            SweepVar::PtDbm => "pt_dbm",
            SweepVar::NSudacs => "n_sudacs",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub preset: Preset,
    pub sweep: SweepVar,
    pub values: Vec<f64>,
    pub trials: usize,
    pub master_seed: u64,
    pub systems: Vec<SystemSpec>,
    pub out: PathBuf,
    /// Worker threads; 0 lets the pool decide.
    pub workers: usize,
    pub system: SystemConfig,
    pub solver: SolverOptions,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self::preset(Preset::Custom)
    }
}

fn pt_grid() -> Vec<f64> {
    vec![19.0, 25.0, 31.0, 37.0, 40.0, 43.0, 46.0]
}

impl ExperimentSpec {
    /// Built-in definition of `preset` with full-scale system constants.
    pub fn preset(preset: Preset) -> Self {
        use Objective::{EeMax, TpMax};
        use SystemKind::*;
        let s = SystemSpec::new;
        let mut system = SystemConfig::default();
        let (sweep, values, systems) = match preset {
            Preset::Convergence => {
                system.p_bs_max = dbm_to_watt(46.0);
                let values = (1..=30).map(f64::from).collect();
                (SweepVar::Iteration, values, vec![s(SudasOptimal, EeMax), s(SudasSuboptimal, EeMax), s(NoiseFreeBound, EeMax)])
            }
            Preset::EeVsPt | Preset::TputVsPt => (
                SweepVar::PtDbm,
                pt_grid(),
                vec![
                    s(SudasOptimal, EeMax),
                    s(SudasOptimal, TpMax),
                    s(SudasSuboptimal, EeMax),
                    s(MimoBenchmark, EeMax),
                    s(MimoBenchmark, TpMax),
                    s(NoSudas, EeMax),
                    s(NoSudas, TpMax),
                ],
            ),
            Preset::TimeSplitVsPt => {
                (SweepVar::PtDbm, pt_grid(), vec![s(SudasOptimal, EeMax), s(SudasOptimal, TpMax), s(MimoBenchmark, EeMax)])
            }
            Preset::EeVsM | Preset::TputVsM => (
                SweepVar::NSudacs,
                vec![2.0, 4.0, 6.0, 8.0],
                vec![s(SudasOptimal, EeMax), s(SudasOptimal, TpMax), s(SudasSuboptimal, EeMax)],
            ),
            Preset::Custom => (SweepVar::PtDbm, vec![watt_to_dbm(system.p_bs_max)], vec![s(SudasOptimal, EeMax)]),
        };
        Self {
            preset,
            sweep,
            values,
            trials: 10_000,
            master_seed: 1,
            systems,
            out: PathBuf::from("."),
            workers: 0,
            system,
            solver: SolverOptions::default(),
        }
    }

    /// Desk-scale overrides: 64 subcarriers, 200 trials.
    pub fn desk_scale(mut self) -> Self {
        self.system.shrink_subcarriers(64);
        self.trials = 200;
        self
    }

    /// Reads a TOML file; its keys override the preset it names.
    pub fn from_toml(text: &str, origin: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Head {
            preset: Option<Preset>,
        }
        let head: Head = toml::from_str::<toml::Table>(text)
            .map_err(|e| Error::Config(format!("{origin}: {e}")))?
            .try_into()
            .unwrap_or(Head { preset: None });
        let base = Self::preset(head.preset.unwrap_or(Preset::Custom));
        let mut merged = toml::Table::try_from(&base).map_err(|e| Error::Config(e.to_string()))?;
        let user: toml::Table = toml::from_str(text).map_err(|e| Error::Config(format!("{origin}: {e}")))?;
        merge(&mut merged, user);
        let spec: Self = toml::Value::Table(merged).try_into().map_err(|e| Error::Config(format!("{origin}: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.values.is_empty() || self.values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config("values must be nonempty and strictly increasing".into()));
        }
        if self.systems.is_empty() {
            return Err(Error::Config("systems must not be empty".into()));
        }
        if self.sweep == SweepVar::NSudacs && self.values.iter().any(|&v| v < 1.0 || v.fract() != 0.0) {
            return Err(Error::Config("n_sudacs sweep values must be positive integers".into()));
        }
        if self.sweep == SweepVar::Iteration && self.values.iter().any(|&v| v < 1.0 || v.fract() != 0.0) {
            return Err(Error::Config("iteration sweep values must be positive integers".into()));
        }
        self.system.validate()?;
        self.solver.validate()
    }

    /// System constants at sweep point `v`.
    pub fn config_at(&self, v: f64) -> SystemConfig {
        let mut cfg = self.system.clone();
        match self.sweep {
            SweepVar::Iteration => {}
            SweepVar::PtDbm => cfg.p_bs_max = dbm_to_watt(v),
            SweepVar::NSudacs => cfg.n_sudacs = v as usize,
        }
        cfg
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Outcome of one system on one trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub ee: f64,
    pub throughput: f64,
    pub alpha: f64,
    pub beta: f64,
    pub iterations: f64,
    pub feasible: bool,
}

fn outcome(r: &SolveReport, cfg: &SystemConfig) -> TrialOutcome {
    TrialOutcome {
        ee: r.ee,
        throughput: r.throughput,
        alpha: r.final_policy.alpha,
        beta: r.final_policy.beta,
        iterations: r.iterations_used as f64,
        feasible: r.residuals.holds(cfg, FEASIBILITY_TOL),
    }
}

/// Solves one system on one channel realization.
pub fn solve_system(spec: SystemSpec, ch: &ChannelRealization, cfg: &SystemConfig, opts: &SolverOptions) -> Result<SolveReport> {
    let sudas = |variant: Variant| -> Result<SolveReport> {
        let eff = effective_cnrs(ch, cfg);
        match spec.objective {
            Objective::EeMax => dinkelbach_solve(&eff, cfg, opts, variant),
            Objective::TpMax => tp_max_solve(&sudas_problem(&eff, cfg, variant)?, opts),
        }
    };
    match spec.system {
        SystemKind::SudasOptimal => sudas(Variant::Optimal),
        SystemKind::SudasSuboptimal => sudas(Variant::Suboptimal),
        SystemKind::MimoBenchmark => solve_baseline(BaselineKind { tag: BaselineTag::MimoBenchmark, objective: spec.objective }, ch, cfg, opts),
        SystemKind::NoSudas => solve_baseline(BaselineKind { tag: BaselineTag::NoSudas, objective: spec.objective }, ch, cfg, opts),
        SystemKind::NoiseFreeBound => {
            let eff = effective_cnrs(ch, cfg);
            solve_problem(&noise_free_problem(&eff, cfg)?, opts)
        }
    }
}

/// Per-sweep-value outcomes of all systems for trial `t`, `[value][system]`.
/// Infeasible or failed solves yield `None`.
fn run_trial(spec: &ExperimentSpec, t: usize) -> Vec<Vec<Option<TrialOutcome>>> {
    let seed = trial_seed(spec.master_seed, t as u64);
    if spec.sweep == SweepVar::Iteration {
        let cfg = spec.system.clone();
        let ch = generate(&cfg, seed);
        let reports: Vec<Option<SolveReport>> = spec.systems.iter().map(|&s| solve_system(s, &ch, &cfg, &spec.solver).ok()).collect();
        return spec
            .values
            .iter()
            .map(|&v| {
                let it = v as usize;
                reports
                    .iter()
                    .map(|r| {
                        r.as_ref().map(|r| {
                            let mut o = outcome(r, &cfg);
                            // past the last iteration the solve has stopped at its final
                            // point; throughput is always the final one
                            if let Some(tp) = r.trace.get(it - 1) {
                                o.ee = tp.eta;
                            }
                            o.iterations = it.min(r.iterations_used) as f64;
                            o
                        })
                    })
                    .collect()
            })
            .collect();
    }
    spec.values
        .iter()
        .map(|&v| {
            let cfg = spec.config_at(v);
            let ch = generate(&cfg, seed);
            spec.systems.iter().map(|&s| solve_system(s, &ch, &cfg, &spec.solver).ok().map(|r| outcome(&r, &cfg))).collect()
        })
        .collect()
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub sweep: f64,
    pub system: SystemSpec,
    pub ee: f64,
    pub throughput: f64,
    pub alpha: f64,
    pub beta: f64,
    pub mean_iters: f64,
    pub feasible_frac: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub sweep_name: &'static str,
    pub rows: Vec<Row>,
    /// Raw outcomes `[trial][value][system]` for paired analyses.
    pub trials: Vec<Vec<Vec<Option<TrialOutcome>>>>,
}

#[cfg(feature = "parallel")]
fn map_trials(spec: &ExperimentSpec) -> Result<Vec<Vec<Vec<Option<TrialOutcome>>>>> {
    use rayon::prelude::*;
    let work = || (0..spec.trials).into_par_iter().map(|t| run_trial(spec, t)).collect();
    if spec.workers == 0 {
        return Ok(work());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    Ok(pool.install(work))
}

#[cfg(not(feature = "parallel"))]
fn map_trials(spec: &ExperimentSpec) -> Result<Vec<Vec<Vec<Option<TrialOutcome>>>>> {
    Ok((0..spec.trials).map(|t| run_trial(spec, t)).collect())
}

/// Trial-ordered reduction; order and worker count do not matter.
fn reduce(spec: &ExperimentSpec, trials: &[Vec<Vec<Option<TrialOutcome>>>]) -> Vec<Row> {
    let mut rows = Vec::new();
    for (vi, &v) in spec.values.iter().enumerate() {
        for (si, &sys) in spec.systems.iter().enumerate() {
            let mut acc = [0.0; 5];
            let mut ok = 0usize;
            let mut feasible = 0usize;
            for t in trials {
                if let Some(o) = t[vi][si] {
                    ok += 1;
                    feasible += o.feasible as usize;
                    for (a, x) in acc.iter_mut().zip([o.ee, o.throughput, o.alpha, o.beta, o.iterations]) {
                        *a += x;
                    }
                }
            }
            let mean = |x: f64| if ok == 0 { f64::NAN } else { x / ok as f64 };
            rows.push(Row {
                sweep: v,
                system: sys,
                ee: mean(acc[0]),
                throughput: mean(acc[1]),
                alpha: mean(acc[2]),
                beta: mean(acc[3]),
                mean_iters: mean(acc[4]),
                feasible_frac: feasible as f64 / trials.len() as f64,
            });
        }
    }
    rows
}

pub fn run(spec: &ExperimentSpec) -> Result<ResultTable> {
    spec.validate()?;
    let trials = map_trials(spec)?;
    Ok(ResultTable { sweep_name: spec.sweep.name(), rows: reduce(spec, &trials), trials })
}

/// `%.6e` formatting.
pub fn sci(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let s = format!("{x:.6e}");
    // Rust prints e7 / e-7; pad the exponent to two digits with a sign
    let (mant, exp) = s.split_once('e').expect("exponent present");
    let (sign, digits) = exp.strip_prefix('-').map_or(("+", exp), |d| ("-", d));
    format!("{mant}e{sign}{digits:0>2}")
}

pub fn to_csv(table: &ResultTable) -> String {
    let mut out = String::from("sweep,system,objective,ee_bits_per_joule,throughput_bps,alpha,beta,mean_iters,feasible_frac\n");
    for r in &table.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            sci(r.sweep),
            r.system.system.name(),
            objective_name(r.system.objective),
            sci(r.ee),
            sci(r.throughput),
            sci(r.alpha),
            sci(r.beta),
            sci(r.mean_iters),
            sci(r.feasible_frac)
        );
    }
    out
}

/// Runs `spec` and writes `<out>/<preset>.csv`; returns the path.
pub fn run_to_file(spec: &ExperimentSpec) -> Result<PathBuf> {
    let table = run(spec)?;
    write_csv(&table, &spec.out, spec.preset.name())
}

pub fn write_csv(table: &ResultTable, dir: &Path, stem: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(format!("{stem}.csv"));
    std::fs::write(&path, to_csv(table)).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(path)
}

/// Noise-free bound of one trial, for convergence studies.
pub fn trial_bound(cfg: &SystemConfig, seed: u64, opts: &SolverOptions) -> Result<f64> {
    let ch = generate(cfg, seed);
    noise_free_upper_bound(&effective_cnrs(&ch, cfg), cfg, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scientific_format_matches_printf() {
        assert_eq!(sci(1234.5), "1.234500e+03");
        assert_eq!(sci(0.0), "0.000000e+00");
        assert_eq!(sci(-2.5e-7), "-2.500000e-07");
        assert_eq!(sci(1e100), "1.000000e+100");
    }

    #[test]
    fn preset_names_round_trip() {
        for p in Preset::ALL {
            assert_eq!(Preset::parse(p.name()).unwrap(), p);
        }
        assert!(matches!(Preset::parse("fig9"), Err(Error::Config(_))));
    }

    #[test]
    fn system_spec_parsing() {
        assert_eq!(SystemSpec::parse("no_sudas:tp_max").unwrap(), SystemSpec::new(SystemKind::NoSudas, Objective::TpMax));
        assert_eq!(SystemSpec::parse("sudas_optimal").unwrap().objective, Objective::EeMax);
        assert!(SystemSpec::parse("relay").is_err());
    }

    #[test]
    fn unknown_key_is_config_error() {
        let err = ExperimentSpec::from_toml("trials = 3\n[system]\nn_antenas = 4\n", "test.toml").unwrap_err();
        match err {
            Error::Config(msg) => assert!(msg.contains("n_antenas"), "{msg}"),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn toml_overrides_preset() {
        let spec = ExperimentSpec::from_toml("preset = \"ee_vs_m\"\ntrials = 3\n[system]\nn_antennas = 4\n", "t").unwrap();
        assert_eq!(spec.sweep, SweepVar::NSudacs);
        assert_eq!(spec.trials, 3);
        assert_eq!(spec.system.n_antennas, 4);
        assert_eq!(spec.system.n_ues, 4);
    }
}
