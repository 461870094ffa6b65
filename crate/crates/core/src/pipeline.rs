//! End-to-end offline planning: abstraction, robust synthesis and artifacts.

use std::fmt::Write as _;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;

use crate::abstraction::{abstract_model, Abstraction, AbstractionParams};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::geometry::Partition;
use crate::imdp::{export_interval_model, robust_value_iteration, PolicyTable};
use crate::model::{ActionTargets, ParametricLinearModel};
use crate::runtime::Controller;

/// Artifact file names inside the output directory.
pub const IMDP_FILE: &str = "imdp.txt";
pub const POLICY_FILE: &str = "policy.csv";
pub const BOUNDS_FILE: &str = "bounds.csv";
pub const REPORT_FILE: &str = "report.txt";

/// Everything produced by one planning run, kept in memory for simulation.
#[derive(Debug, Clone)]
pub struct Synthesis {
    pub model: ParametricLinearModel,
    pub partition: Partition,
    pub targets: ActionTargets,
    pub abstraction: Abstraction,
    pub policy: PolicyTable,
    pub controller: Controller,
    pub seconds: f64,
}

impl Synthesis {
    /// Lower bound `λ` per region, indexed by region (state minus one).
    pub fn region_bounds(&self) -> &[f64] {
        &self.policy.initial_values()[1..]
    }

    /// `region,c0..,lambda` with one row per region.
    pub fn bounds_csv(&self) -> String {
        let n = self.partition.dim();
        let mut out = String::from("region");
        for d in 0..n {
            write!(out, ",c{d}").expect("string write");
        }
        out.push_str(",lambda\n");
        for (i, lambda) in self.region_bounds().iter().enumerate() {
            write!(out, "{i}").expect("string write");
            for c in self.partition.regions()[i].center() {
                write!(out, ",{c}").expect("string write");
            }
            writeln!(out, ",{lambda}").expect("string write");
        }
        out
    }

    /// Human-readable summary with the overall confidence statement.
    pub fn report(&self) -> String {
        let imdp = &self.abstraction.imdp;
        let ledger = &self.abstraction.ledger;
        let bounds = self.region_bounds();
        let positive = bounds.iter().filter(|v| **v > 0.0).count();
        let best = bounds.iter().copied().fold(0.0, f64::max);
        let mut out = String::new();
        let w = &mut out;
        writeln!(w, "states: {}", imdp.num_states()).expect("string write");
        writeln!(w, "regions: {}", self.partition.len()).expect("string write");
        writeln!(w, "actions: {}", self.targets.len()).expect("string write");
        writeln!(w, "enabled pairs: {}", imdp.num_choices()).expect("string write");
        writeln!(w, "transitions: {}", imdp.num_transitions()).expect("string write");
        writeln!(w, "horizon: {}", imdp.horizon()).expect("string write");
        writeln!(w, "mean merged boxes per batch: {:.1}", self.abstraction.mean_merged_boxes)
            .expect("string write");
        writeln!(w, "widened intervals: {}", self.abstraction.widened_intervals)
            .expect("string write");
        writeln!(w, "intervals: {}", ledger.interval_count).expect("string write");
        writeln!(w, "per-interval beta: {:e}", ledger.per_interval_beta).expect("string write");
        writeln!(w, "regions with positive bound: {positive}").expect("string write");
        writeln!(w, "largest bound: {best}").expect("string write");
        writeln!(
            w,
            "With probability at least {} over the noise samples, every region's bound \
             lambda in {BOUNDS_FILE} is a lower bound on the probability that the \
             controller satisfies the specification from any state in that region, for \
             every parameter in the uncertainty set.",
            ledger.certified_confidence()
        )
        .expect("string write");
        writeln!(w, "wall time: {:.2} s", self.seconds).expect("string write");
        out
    }
}

/// Builds the abstraction and the robust policy for `config`.
pub fn synthesize(config: &RunConfig) -> Result<Synthesis> {
    let start = Instant::now();
    let model = config.build_model().map_err(|e| e.in_stage("model"))?;
    let partition = config
        .build_partition()
        .map_err(|e| e.in_stage("partition"))?;
    let targets = config
        .build_targets(&partition)
        .map_err(|e| e.in_stage("targets"))?;
    synthesize_parts(config, model, partition, targets, start)
}

/// Like [`synthesize`] with the model, partition and targets supplied.
pub fn synthesize_with(
    config: &RunConfig,
    model: ParametricLinearModel,
    partition: Partition,
    targets: ActionTargets,
) -> Result<Synthesis> {
    synthesize_parts(config, model, partition, targets, Instant::now())
}

fn synthesize_parts(
    config: &RunConfig,
    model: ParametricLinearModel,
    partition: Partition,
    targets: ActionTargets,
    start: Instant,
) -> Result<Synthesis> {
    let params = AbstractionParams {
        samples: config.samples,
        merge_radius: config.merge_radius,
        confidence: config.confidence,
        seed: config.seed,
        objective: config.objective,
    };
    let abstraction = abstract_model(&model, &partition, &targets, &params)
        .map_err(|e| e.in_stage("abstraction"))?;
    info!(
        "confidence ledger: {} intervals at beta = {:e}, certified {}",
        abstraction.ledger.interval_count,
        abstraction.ledger.per_interval_beta,
        abstraction.ledger.certified_confidence()
    );
    let policy = robust_value_iteration(&abstraction.imdp);
    let controller = Controller::new(&model, &targets).map_err(|e| e.in_stage("controller"))?;
    Ok(Synthesis {
        model,
        partition,
        targets,
        abstraction,
        policy,
        controller,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Paths of the written artifacts.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub imdp: PathBuf,
    pub policy: PathBuf,
    pub bounds: PathBuf,
    pub report: PathBuf,
}

impl Artifacts {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            imdp: dir.join(IMDP_FILE),
            policy: dir.join(POLICY_FILE),
            bounds: dir.join(BOUNDS_FILE),
            report: dir.join(REPORT_FILE),
        }
    }
}

/// Writes the interval model, policy, bounds and report into `dir`.
pub fn write_artifacts(synthesis: &Synthesis, dir: &Path) -> Result<Artifacts> {
    fs::create_dir_all(dir).map_err(|e| Error::from(e).in_stage("output"))?;
    let paths = Artifacts::in_dir(dir);
    let write_imdp = || -> Result<()> {
        let mut sink = BufWriter::new(fs::File::create(&paths.imdp)?);
        export_interval_model(&synthesis.abstraction.imdp, &mut sink)?;
        std::io::Write::flush(&mut sink)?;
        Ok(())
    };
    write_imdp().map_err(|e| e.in_stage("export"))?;
    fs::write(&paths.policy, synthesis.policy.to_csv())
        .map_err(|e| Error::from(e).in_stage("export"))?;
    fs::write(&paths.bounds, synthesis.bounds_csv())
        .map_err(|e| Error::from(e).in_stage("export"))?;
    fs::write(&paths.report, synthesis.report())
        .map_err(|e| Error::from(e).in_stage("export"))?;
    Ok(paths)
}

/// Runs the whole offline pipeline and writes its artifacts to `out`, or to
/// the configured output directory.
pub fn run_pipeline(config: &RunConfig, out: Option<&Path>) -> Result<(Synthesis, Artifacts)> {
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| config.output.clone())
        .ok_or_else(|| Error::Config("no output directory given".into()))?;
    let synthesis = synthesize(config)?;
    let artifacts = write_artifacts(&synthesis, &dir)?;
    Ok((synthesis, artifacts))
}
