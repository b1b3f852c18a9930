//! Command-line front end. Every subcommand maps onto the public operations
//! of one module and emits a [`Report`] as JSON or CSV.

mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

pub use report::{emit_report, Format, Metadata, Report, Table};

use crate::bolthausen::simulate_bs_rrt;
use crate::csbp::{
    csbp_speed, extinction_prob, feller_simulate, grey_test, lamperti_csbp, survival_prob,
    u_t_lambda_with, BranchingMechanism, CsbpPath, U_TOL,
};
use crate::kingman::simulate_kingman;
use crate::lambda::{
    cdi_test, dust_test, first_coagulation_observables, lambda_bk, parse_measure, psi,
    rate_summaries, speed_v, transition_law, LambdaSimulator,
};
use crate::mutation::{allelic_partition, site_spectrum, throw_mutations};
use crate::numerics::{ks_one_sample, mean_se, RngStream};
use crate::partition::{crp_sample, ewens_block_count_law, ewens_expected_blocks};
use crate::popmodels::{
    cannings_diagnostics, duality_check, gw_pmerger_prediction, wf_absorption, wf_diffusion,
    wf_expected_absorption_time, CanningsSpec, GwSpec,
};
use crate::spatial::{
    arratia_dispersion_test, limic_sturm_bound, limic_sturm_time, log_star, origin_escape_count,
    simulate_crw, simulate_spatial_lambda, Initial, SpatialRun, TorusConfig,
};
use crate::{invalid, CoalescentHistory, Error, LambdaMeasure, Partition, PdParams, Result};

#[derive(Debug, Parser)]
#[command(
    name = "coalkit",
    version,
    about = "Exact formulas and simulators for coalescent processes"
)]
pub struct Cli {
    /// Master seed; every output records it.
    #[arg(long, global = true, env = "COALKIT_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Stream id, selecting an independent random stream for the same seed.
    #[arg(long, global = true, default_value_t = 0)]
    pub stream: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Output file; stdout when absent.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    /// Worker threads for replicates. Results do not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample partitions and coalescent histories.
    Sample(SampleArgs),
    /// Exact rates, laws and transforms.
    #[command(subcommand)]
    Exact(ExactCmd),
    /// Monte Carlo and analytic checks.
    #[command(subcommand)]
    Check(CheckCmd),
    /// Forward population models.
    #[command(subcommand)]
    Popmodel(PopCmd),
    /// Particle systems on tori.
    #[command(subcommand)]
    Spatial(SpatialCmd),
    /// Continuous-state branching processes.
    #[command(subcommand)]
    Csbp(CsbpCmd),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    /// Jump chain with exponential holding times.
    Jump,
    /// Random recursive tree cutting (Bolthausen-Sznitman only).
    Rrt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum What {
    History,
    /// Partition at time `--t` (coalescents) or the sampled partition (crp).
    Partition,
    /// Site frequency spectrum under infinite sites, averaged over replicates.
    Spectrum,
    /// Allelic partition under infinite alleles.
    Alleles,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Measure (kingman, bs, beta:a, dirac:p, mix:..., sweep:[...]) or crp:alpha,theta.
    #[arg(long)]
    pub model: String,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
    #[arg(long, value_enum, default_value_t = Method::Jump)]
    pub method: Method,
    /// Mutation rate per lineage; required for spectrum and alleles.
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long, value_enum, default_value_t = What::History)]
    pub what: What,
}

#[derive(Debug, Subcommand)]
pub enum ExactCmd {
    /// Merger rates lambda_{b,k}, lambda_b and gamma_b.
    Rates {
        #[arg(long)]
        model: String,
        #[arg(long)]
        b: usize,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Speed of coming down v(t).
    Speed {
        #[arg(long)]
        model: String,
        #[arg(long)]
        t: f64,
    },
    /// Law of the partition of [n] at time t.
    Transition {
        #[arg(long)]
        model: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        t: f64,
    },
    /// Law of the number of blocks of an Ewens(theta) partition of [n].
    Ewens {
        #[arg(long)]
        theta: f64,
        #[arg(long)]
        n: usize,
    },
    /// Laplace exponent psi(q).
    Psi {
        #[arg(long)]
        model: String,
        #[arg(long, num_args = 1.., value_delimiter = ',')]
        q: Vec<f64>,
    },
}

#[derive(Debug, Subcommand)]
pub enum CheckCmd {
    /// Moment duality between the Wright-Fisher diffusion and Kingman's coalescent.
    Duality {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        t: f64,
        /// Largest moment checked.
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 10_000)]
        reps: usize,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
    },
    /// Dust and coming-down-from-infinity verdicts.
    Criteria {
        #[arg(long)]
        model: String,
        #[arg(long, default_value_t = 1 << 16)]
        b_max: usize,
    },
    /// First coagulation time of 1 and 2 and the fraction of blocks merging then.
    FirstCoagulation {
        #[arg(long)]
        model: String,
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value_t = 10_000)]
        reps: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CanningsKind {
    Wf,
    Moran,
    Gw,
}

#[derive(Debug, Subcommand)]
pub enum PopCmd {
    /// Offspring-vector diagnostics of a Cannings model.
    Cannings {
        #[arg(long, value_enum)]
        kind: CanningsKind,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 10_000)]
        generations: usize,
        /// Tail index of the Galton-Watson offspring law.
        #[arg(long, default_value_t = 1.5)]
        alpha: f64,
        /// Tail constant: P(X >= k) ~ c k^{-alpha}.
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        /// Mean offspring number.
        #[arg(long, default_value_t = 2.0)]
        mu: f64,
        /// Thresholds p for P(nu_1 >= p N).
        #[arg(long, value_delimiter = ',', default_value = "0.2")]
        threshold: Vec<f64>,
    },
    /// Fixation probability and absorption time of the Wright-Fisher diffusion.
    Absorption {
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 10_000)]
        reps: usize,
        #[arg(long, default_value_t = 100.0)]
        max_time: f64,
    },
    /// One path of the Wright-Fisher diffusion.
    Diffusion {
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long)]
        horizon: f64,
    },
}

#[derive(Debug, Args)]
pub struct TorusArgs {
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    #[arg(long, default_value_t = 16)]
    pub l: usize,
    /// Walk rate per particle.
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
}

impl TorusArgs {
    fn config(&self) -> Result<TorusConfig> {
        TorusConfig::new(self.d, self.l, self.rho)
    }
}

#[derive(Debug, Subcommand)]
pub enum SpatialCmd {
    /// Instantaneously coalescing random walks.
    Crw {
        #[command(flatten)]
        torus: TorusArgs,
        #[arg(long)]
        t: f64,
        /// `full` or `origin:<n>`.
        #[arg(long, default_value = "full")]
        initial: String,
    },
    /// Spatial Lambda-coalescent.
    Lambda {
        #[arg(long)]
        model: String,
        #[command(flatten)]
        torus: TorusArgs,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value = "full")]
        initial: String,
    },
    /// Number of particles that ever leave the origin.
    Escape {
        #[arg(long, default_value = "kingman")]
        model: String,
        #[command(flatten)]
        torus: TorusArgs,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 10_000)]
        reps: usize,
    },
    /// Poisson dispersion test of coalescing walks from full occupancy.
    Dispersion {
        #[command(flatten)]
        torus: TorusArgs,
        #[arg(long)]
        t: f64,
    },
    /// Mean time until the origin holds at most k particles, against its bound.
    LimicSturm {
        #[arg(long)]
        model: String,
        #[command(flatten)]
        torus: TorusArgs,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value_t = 100)]
        reps: usize,
    },
    /// Iterated logarithm.
    Logstar {
        #[arg(long)]
        x: f64,
    },
}

#[derive(Debug, Subcommand)]
pub enum CsbpCmd {
    /// u_t(lambda) = -log E exp(-lambda Z_t) from Z_0 = 1.
    U {
        /// feller, feller:<scale>, neveu, or a Lambda measure.
        #[arg(long)]
        mechanism: String,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value_t = U_TOL)]
        tol: f64,
    },
    /// Grey's criterion for extinction in finite time.
    Grey {
        #[arg(long)]
        mechanism: String,
    },
    /// P(Z_t = 0) from Z_0 = z.
    Extinction {
        #[arg(long)]
        mechanism: String,
        #[arg(long)]
        z: f64,
        #[arg(long)]
        t: f64,
    },
    /// Euler path of the Feller diffusion.
    Feller {
        #[arg(long, default_value_t = 1.0)]
        z0: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long)]
        horizon: f64,
    },
    /// Exact path of the CSBP of a purely atomic Lambda.
    Lamperti {
        #[arg(long)]
        model: String,
        #[arg(long, default_value_t = 1.0)]
        z0: f64,
        #[arg(long)]
        horizon: f64,
    },
}

/// Exit status for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse(_)
        | Error::InvalidArgument(_)
        | Error::NeedsHint(_)
        | Error::Unsupported(_) => 2,
        Error::Io(_) | Error::Json(_) | Error::Csv(_) => 4,
        Error::Numerical(_)
        | Error::NoConvergence { .. }
        | Error::Diverges { .. }
        | Error::Bracket { .. }
        | Error::CriteriaDisagree(_)
        | Error::Gof(_) => 3,
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    if let Some(n) = cli.threads {
        // a second initialisation in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    match dispatch(&cli).and_then(|r| emit_report(&r, cli.format, cli.output.as_deref())) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

struct Ctx {
    seed: u64,
    stream: u64,
}

impl Ctx {
    fn rng_stream(&self) -> RngStream {
        RngStream::new(self.seed, self.stream)
    }

    fn report(&self, op: &str, formula: &str) -> Report {
        Report::new(op, formula, self.seed, self.stream)
    }
}

/// Builds the report for a parsed command line.
pub fn dispatch(cli: &Cli) -> Result<Report> {
    let ctx = Ctx {
        seed: cli.seed,
        stream: cli.stream,
    };
    match &cli.command {
        Command::Sample(a) => sample(&ctx, a),
        Command::Exact(c) => exact(&ctx, c),
        Command::Check(c) => check(&ctx, c),
        Command::Popmodel(c) => popmodel(&ctx, c),
        Command::Spatial(c) => spatial(&ctx, c),
        Command::Csbp(c) => csbp(&ctx, c),
    }
}

fn blocks_string(p: &Partition) -> String {
    p.to_string()
}

fn require_positive(name: &str, x: usize) -> Result<()> {
    if x == 0 {
        return Err(invalid(format!("{name} must be positive")));
    }
    Ok(())
}

#[derive(Debug)]
enum SampleModel {
    Crp(PdParams),
    Coalescent(LambdaMeasure),
}

fn parse_sample_model(s: &str) -> Result<SampleModel> {
    match s.trim().strip_prefix("crp:") {
        Some(rest) => {
            let (a, t) = rest
                .split_once(',')
                .ok_or_else(|| Error::Parse("crp takes two parameters: crp:alpha,theta".into()))?;
            let num = |x: &str| {
                x.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("expected a number, found '{x}'")))
            };
            Ok(SampleModel::Crp(PdParams::new(num(a)?, num(t)?)?))
        }
        None => Ok(SampleModel::Coalescent(parse_measure(s)?)),
    }
}

/// Simulator for one coalescent history, fixed before the replicates run.
enum HistorySampler {
    Kingman,
    Rrt,
    Lambda(LambdaSimulator),
}

impl HistorySampler {
    fn new(m: &LambdaMeasure, n: usize, method: Method) -> Result<Self> {
        let label = m.label();
        match method {
            Method::Rrt if label == "bs" => Ok(Self::Rrt),
            Method::Rrt => Err(Error::Unsupported(format!(
                "tree cutting samples the Bolthausen-Sznitman coalescent only, not {label}"
            ))),
            Method::Jump if label == "kingman" => Ok(Self::Kingman),
            Method::Jump => Ok(Self::Lambda(LambdaSimulator::new(m, n)?)),
        }
    }

    fn sample(&self, n: usize, rng: &mut rand_chacha::ChaCha8Rng) -> Result<CoalescentHistory> {
        match self {
            Self::Kingman => Ok(simulate_kingman(n, rng)),
            Self::Rrt => simulate_bs_rrt(n, rng),
            Self::Lambda(sim) => sim.history(n, rng),
        }
    }
}

fn sample(ctx: &Ctx, a: &SampleArgs) -> Result<Report> {
    require_positive("n", a.n)?;
    require_positive("reps", a.reps)?;
    let stream = ctx.rng_stream();
    let m = match parse_sample_model(&a.model)? {
        SampleModel::Crp(p) => {
            if a.what != What::Partition {
                return Err(Error::Unsupported(
                    "crp models sample partitions only; use --what partition".into(),
                ));
            }
            let parts = stream.par_replicates(a.reps, |rng| crp_sample(p, a.n, rng));
            return partitions_report(
                ctx,
                "sample.crp",
                "Chinese restaurant process seating",
                a,
                &parts,
            );
        }
        SampleModel::Coalescent(m) => m,
    };
    let sampler = HistorySampler::new(&m, a.n, a.method)?;
    let histories = stream.try_par_replicates(a.reps, |rng| {
        let h = sampler.sample(a.n, rng)?;
        let marks = match a.what {
            What::Spectrum | What::Alleles => {
                let rho = a
                    .rho
                    .ok_or_else(|| invalid("--rho is required for spectrum and alleles"))?;
                Some(throw_mutations(&h, rho, rng)?)
            }
            _ => None,
        };
        Ok((h, marks))
    })?;
    let base = |op: &str, formula: &str| ctx.report(op, formula).model(m.label());
    match a.what {
        What::History => {
            let mut table = Table::new(["rep", "t", "merged"]);
            let mut out = Vec::with_capacity(histories.len());
            for (i, (h, _)) in histories.iter().enumerate() {
                for e in h.events() {
                    let merged: Vec<String> = e.merged.iter().map(|x| x.to_string()).collect();
                    table.push([i.to_string(), e.t.to_string(), merged.join(" ")]);
                }
                out.push(
                    h.to_json(json!({"seed": ctx.seed, "stream": ctx.stream, "replicate": i})),
                );
            }
            base(
                "sample.history",
                "merger events of the block-counting jump chain",
            )
            .results(&out)
            .map(|r| r.table(table))
        }
        What::Partition => {
            let t =
                a.t.ok_or_else(|| invalid("--t is required for coalescent partitions"))?;
            let parts: Vec<Partition> = histories.iter().map(|(h, _)| h.partition_at(t)).collect();
            partitions_report(
                ctx,
                "sample.partition",
                "coalescent partition at time t",
                a,
                &parts,
            )
            .map(|r| r.model(m.label()).tolerance("t", t))
        }
        What::Spectrum => {
            let spectra = histories
                .iter()
                .map(|(h, mk)| site_spectrum(h, mk.as_ref().expect("marks were thrown")))
                .collect::<Result<Vec<_>>>()?;
            let rho = a.rho.expect("checked above");
            let theta = 2.0 * rho;
            let mut table = Table::new(["j", "M_j", "expected_theta_over_j"]);
            let mut rows = Vec::new();
            for j in 1..=a.n {
                let xs: Vec<f64> = spectra.iter().map(|s| s.m(j) as f64).collect();
                let (mean, se) = mean_se(&xs);
                table.push([
                    j.to_string(),
                    mean.to_string(),
                    (theta / j as f64).to_string(),
                ]);
                rows.push(json!({"j": j, "mean": mean, "se": se, "expected": theta / j as f64}));
            }
            let s: Vec<f64> = spectra
                .iter()
                .map(|s| s.segregating_sites() as f64)
                .collect();
            let (s_mean, s_se) = mean_se(&s);
            base(
                "sample.spectrum",
                "E(M_j) = theta/j under Kingman's coalescent, theta = 2 rho",
            )
            .results(&json!({
                "n": a.n, "reps": a.reps, "rho": rho, "theta": theta,
                "spectrum": rows,
                "segregating_sites": {"mean": s_mean, "se": s_se},
            }))
            .map(|r| r.table(table))
        }
        What::Alleles => {
            let parts = histories
                .iter()
                .map(|(h, mk)| allelic_partition(h, mk.as_ref().expect("marks were thrown")))
                .collect::<Result<Vec<_>>>()?;
            partitions_report(
                ctx,
                "sample.alleles",
                "infinite-alleles partition (Ewens(2 rho) for Kingman)",
                a,
                &parts,
            )
            .map(|r| r.model(m.label()))
        }
    }
}

fn partitions_report(
    ctx: &Ctx,
    op: &str,
    formula: &str,
    a: &SampleArgs,
    parts: &[Partition],
) -> Result<Report> {
    let mut table = Table::new(["rep", "k", "blocks"]);
    for (i, p) in parts.iter().enumerate() {
        table.push([i.to_string(), p.k().to_string(), blocks_string(p)]);
    }
    let ks: Vec<f64> = parts.iter().map(|p| p.k() as f64).collect();
    let (mean, se) = mean_se(&ks);
    let blocks: Vec<&[Vec<usize>]> = parts.iter().map(|p| p.blocks()).collect();
    ctx.report(op, formula)
        .model(a.model.clone())
        .results(&json!({"n": a.n, "reps": a.reps, "mean_blocks": mean, "mean_blocks_se": se, "partitions": blocks}))
        .map(|r| r.table(table))
}

fn exact(ctx: &Ctx, c: &ExactCmd) -> Result<Report> {
    match c {
        ExactCmd::Rates { model, b, k } => {
            let m = parse_measure(model)?;
            let summary = rate_summaries(&m, *b)?;
            let ks: Vec<usize> = match k {
                Some(k) => vec![*k],
                None => (2..=*b).collect(),
            };
            let mut table = Table::new(["b", "k", "lambda_bk"]);
            let mut rates = Vec::new();
            for k in ks {
                let v = lambda_bk(&m, *b, k)?;
                table.push([b.to_string(), k.to_string(), v.to_string()]);
                rates.push(json!({"k": k, "lambda_bk": v}));
            }
            let mut results = json!({"b": b, "lambda_b": summary.lambda_b, "gamma_b": summary.gamma_b, "rates": rates});
            if let Some(k) = k {
                results["value"] = json!(rates[0]["lambda_bk"]);
                results["k"] = json!(k);
            }
            ctx.report(
                "exact.rates",
                "lambda_{b,k} = ∫ x^{k-2} (1-x)^{b-k} Lambda(dx)",
            )
            .model(m.label())
            .results(&results)
            .map(|r| r.table(table))
        }
        ExactCmd::Speed { model, t } => {
            let m = parse_measure(model)?;
            let v = speed_v(&m, *t)?;
            let mut table = Table::new(["t", "v"]);
            table.push([t.to_string(), v.to_string()]);
            ctx.report("exact.speed", "∫_{v(t)}^∞ dq / psi(q) = t")
                .model(m.label())
                .results(&json!({"t": t, "v": v}))
                .map(|r| r.table(table))
        }
        ExactCmd::Transition { model, n, t } => {
            let m = parse_measure(model)?;
            let law = transition_law(&m, *n, *t)?;
            let mut table = Table::new(["partition", "prob"]);
            let mut rows = Vec::new();
            for (p, q) in &law {
                table.push([blocks_string(p), q.to_string()]);
                rows.push(json!({"blocks": p.blocks(), "prob": q}));
            }
            ctx.report(
                "exact.transition",
                "exp(t Q) for the restricted coalescent generator Q",
            )
            .model(m.label())
            .results(&json!({"n": n, "t": t, "law": rows}))
            .map(|r| r.table(table))
        }
        ExactCmd::Ewens { theta, n } => {
            let law = ewens_block_count_law(*theta, *n)?;
            let mut table = Table::new(["k", "prob"]);
            for (k, p) in law.iter().enumerate().skip(1) {
                table.push([k.to_string(), p.to_string()]);
            }
            ctx.report("exact.ewens", "P(K_n = k) = theta^k |s(n,k)| / theta^{(n)}")
                .results(&json!({
                    "theta": theta, "n": n,
                    "expected_blocks": ewens_expected_blocks(*theta, *n),
                    "law": &law[1..],
                }))
                .map(|r| r.table(table))
        }
        ExactCmd::Psi { model, q } => {
            let m = parse_measure(model)?;
            let mut table = Table::new(["q", "psi"]);
            let mut rows = Vec::new();
            for q in q {
                let v = psi(&m, *q)?;
                table.push([q.to_string(), v.to_string()]);
                rows.push(json!({"q": q, "psi": v}));
            }
            ctx.report(
                "exact.psi",
                "psi(q) = ∫ (e^{-qx} - 1 + qx) x^{-2} Lambda(dx)",
            )
            .model(m.label())
            .results(&rows)
            .map(|r| r.table(table))
        }
    }
}

fn check(ctx: &Ctx, c: &CheckCmd) -> Result<Report> {
    match c {
        CheckCmd::Duality { p, t, n, reps, dt } => {
            let rows = duality_check(*p, *t, *n, *dt, *reps, &ctx.rng_stream())?;
            let mut table = Table::new([
                "n",
                "diffusion_moment",
                "diffusion_se",
                "coalescent_moment",
                "z_score",
            ]);
            for r in &rows {
                table.push([
                    r.n.to_string(),
                    r.diffusion_moment.to_string(),
                    r.diffusion_se.to_string(),
                    r.coalescent_moment.to_string(),
                    r.z_score.to_string(),
                ]);
            }
            let max_abs_z = rows.iter().map(|r| r.z_score.abs()).fold(0.0, f64::max);
            ctx.report("check.duality", "E(X_t^n | X_0 = p) = E(p^{N_t} | N_0 = n)")
                .model("kingman")
                .tolerance("dt", *dt)
                .results(
                    &json!({"p": p, "t": t, "reps": reps, "rows": rows, "max_abs_z": max_abs_z}),
                )
                .map(|r| r.table(table))
        }
        CheckCmd::Criteria { model, b_max } => {
            let m = parse_measure(model)?;
            let dust = dust_test(&m)?;
            let cdi = cdi_test(&m, *b_max)?;
            let mut table = Table::new([
                "criterion",
                "converges",
                "value",
                "partial",
                "heuristic",
                "reason",
            ]);
            for (name, cert) in [
                ("dust: ∫ x^{-1} Lambda(dx)", &dust.certificate),
                ("cdi: sum 1/gamma_b", &cdi.gamma_series),
                ("cdi: ∫ dq/psi(q)", &cdi.psi_integral),
            ] {
                table.push([
                    name.to_string(),
                    cert.converges.to_string(),
                    cert.value.map_or_else(String::new, |v| v.to_string()),
                    cert.partial.to_string(),
                    cert.heuristic.to_string(),
                    cert.reason.clone(),
                ]);
            }
            ctx.report(
                "check.criteria",
                "dust iff ∫ x^{-1} Lambda(dx) < ∞; CDI iff sum 1/gamma_b < ∞ iff ∫^∞ dq/psi < ∞",
            )
            .model(m.label())
            .results(&json!({"dust": dust, "cdi": cdi}))
            .map(|r| r.table(table))
        }
        CheckCmd::FirstCoagulation { model, n, reps } => {
            let m = parse_measure(model)?;
            let obs = first_coagulation_observables(&m, *n, *reps, &ctx.rng_stream())?;
            let total = m.total_mass();
            let ts: Vec<f64> = obs.iter().map(|o| o.t).collect();
            let fs: Vec<f64> = obs.iter().map(|o| o.fraction).collect();
            let marks: Vec<f64> = obs.iter().map(|o| o.mark).collect();
            let ks_t = ks_one_sample(&ts, |x| -(-total * x).exp_m1())?;
            // the KS closure cannot return errors; the cdf only fails outside [0, 1]
            let ks_mark = ks_one_sample(&marks, |x| {
                m.cdf(x.clamp(0.0, 1.0)).map_or(f64::NAN, |v| v / total)
            })?;
            let mut table = Table::new(["rep", "t", "fraction", "mark"]);
            for (i, o) in obs.iter().enumerate() {
                table.push([
                    i.to_string(),
                    o.t.to_string(),
                    o.fraction.to_string(),
                    o.mark.to_string(),
                ]);
            }
            ctx.report("check.first-coagulation", "T ~ Exp(Lambda([0,1])); merger mark F ~ Lambda / Lambda([0,1])")
                .model(m.label())
                .results(&json!({
                    "n": n, "reps": reps, "total_mass": total,
                    "mean_t": mean_se(&ts).0, "mean_fraction": mean_se(&fs).0, "mean_mark": mean_se(&marks).0,
                    "ks_t": ks_t, "ks_mark": ks_mark,
                }))
                .map(|r| r.table(table))
        }
    }
}

fn popmodel(ctx: &Ctx, c: &PopCmd) -> Result<Report> {
    match c {
        PopCmd::Cannings {
            kind,
            n,
            generations,
            alpha,
            c,
            mu,
            threshold,
        } => {
            let spec = match kind {
                CanningsKind::Wf => CanningsSpec::WrightFisher { n: *n },
                CanningsKind::Moran => CanningsSpec::MoranStep { n: *n },
                CanningsKind::Gw => {
                    CanningsSpec::GaltonWatson(GwSpec::heavy_tailed(*n, *alpha, *c, *mu)?)
                }
            };
            let diag = cannings_diagnostics(&spec, *generations, threshold, &ctx.rng_stream())?;
            let mut predictions = json!({});
            if let CanningsSpec::GaltonWatson(gw) = &spec {
                predictions["c_n"] = json!(gw.c_n_prediction());
                if *alpha > 1.0 && *alpha < 2.0 {
                    let tails = threshold
                        .iter()
                        .filter(|p| **p < 1.0)
                        .map(|p| {
                            Ok(json!({"p": p, "scaled_tail": gw_pmerger_prediction(*alpha, *p)?}))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    predictions["scaled_tail"] = json!(tails);
                }
            }
            let mut table = Table::new(["p", "tail_prob", "tail_se", "scaled_tail"]);
            for (p, q, se) in &diag.tail {
                table.push([
                    p.to_string(),
                    q.to_string(),
                    se.to_string(),
                    (q * *n as f64 / diag.c_n).to_string(),
                ]);
            }
            let model = match kind {
                CanningsKind::Wf => "wright-fisher".to_string(),
                CanningsKind::Moran => "moran".to_string(),
                CanningsKind::Gw => format!("galton-watson(alpha={alpha}, c={c}, mu={mu})"),
            };
            ctx.report(
                "popmodel.cannings",
                "c_N = E(nu_1(nu_1-1))/(N-1); Mohle ratio E(nu_1(nu_1-1)(nu_1-2))/(N^2 c_N)",
            )
            .model(model)
            .results(&json!({"diagnostics": diag, "predictions": predictions}))
            .map(|r| r.table(table))
        }
        PopCmd::Absorption {
            p,
            dt,
            reps,
            max_time,
        } => {
            let outcomes = ctx
                .rng_stream()
                .try_par_replicates(*reps, |rng| wf_absorption(*p, *dt, *max_time, rng))?;
            let done: Vec<_> = outcomes.iter().flatten().collect();
            let fixed: Vec<f64> = done.iter().map(|a| f64::from(a.fixed)).collect();
            let times: Vec<f64> = done.iter().map(|a| a.time).collect();
            let (fix, fix_se) = mean_se(&fixed);
            let (tm, tm_se) = mean_se(&times);
            let mut table = Table::new(["rep", "time", "fixed"]);
            for (i, o) in outcomes.iter().enumerate() {
                match o {
                    Some(a) => table.push([i.to_string(), a.time.to_string(), a.fixed.to_string()]),
                    None => table.push([i.to_string(), String::new(), String::new()]),
                }
            }
            ctx.report(
                "popmodel.absorption",
                "P(fix) = p; E(T) = -2 (p log p + (1-p) log(1-p))",
            )
            .tolerance("dt", *dt)
            .results(&json!({
                "p": p, "reps": reps, "unabsorbed": outcomes.len() - done.len(),
                "fixation_prob": fix, "fixation_se": fix_se, "expected_fixation_prob": p,
                "mean_time": tm, "mean_time_se": tm_se,
                "expected_time": wf_expected_absorption_time(*p),
            }))
            .map(|r| r.table(table))
        }
        PopCmd::Diffusion { p, dt, horizon } => {
            let path = wf_diffusion(*p, *dt, *horizon, &mut ctx.rng_stream().rng())?;
            let mut table = Table::new(["t", "X_t"]);
            for (t, x) in path.times.iter().zip(&path.values) {
                table.push([t.to_string(), x.to_string()]);
            }
            ctx.report(
                "popmodel.diffusion",
                "Euler scheme for dX = sqrt(X(1-X)) dW",
            )
            .tolerance("dt", *dt)
            .results(&path)
            .map(|r| r.table(table))
        }
    }
}

fn parse_initial(s: &str) -> Result<Initial> {
    match s.trim() {
        "full" => Ok(Initial::Full),
        other => other
            .strip_prefix("origin:")
            .and_then(|n| n.trim().parse().ok())
            .map(Initial::AtOrigin)
            .ok_or_else(|| {
                Error::Parse(format!(
                    "initial configuration must be 'full' or 'origin:<n>', not '{s}'"
                ))
            }),
    }
}

fn spatial_run_report(ctx: &Ctx, op: &str, formula: &str, run: &SpatialRun) -> Result<Report> {
    let mut table = Table::new(["t", "particle_count", "density"]);
    for p in &run.series {
        table.push([
            p.t.to_string(),
            p.particle_count.to_string(),
            p.density.to_string(),
        ]);
    }
    ctx.report(op, formula).results(run).map(|r| r.table(table))
}

fn spatial(ctx: &Ctx, c: &SpatialCmd) -> Result<Report> {
    match c {
        SpatialCmd::Crw { torus, t, initial } => {
            let run = simulate_crw(
                torus.config()?,
                &parse_initial(initial)?,
                *t,
                &mut ctx.rng_stream().rng(),
            )?;
            spatial_run_report(
                ctx,
                "spatial.crw",
                "coalescing rate-rho walks on the torus",
                &run,
            )
            .map(|r| r.model("coalescing-walks"))
        }
        SpatialCmd::Lambda {
            model,
            torus,
            t,
            initial,
        } => {
            let m = parse_measure(model)?;
            let run = simulate_spatial_lambda(
                torus.config()?,
                &m,
                &parse_initial(initial)?,
                *t,
                &mut ctx.rng_stream().rng(),
            )?;
            spatial_run_report(
                ctx,
                "spatial.lambda",
                "rate-rho walks with a Lambda-coalescent on each site",
                &run,
            )
            .map(|r| r.model(m.label()))
        }
        SpatialCmd::Escape {
            model,
            torus,
            n,
            reps,
        } => {
            let m = parse_measure(model)?;
            let counts = origin_escape_count(&torus.config()?, *n, &m, *reps, &ctx.rng_stream())?;
            let mut hist = vec![0u64; n + 1];
            for c in &counts {
                hist[*c] += 1;
            }
            let xs: Vec<f64> = counts.iter().map(|c| *c as f64).collect();
            let (mean, se) = mean_se(&xs);
            let ewens = (m.label() == "kingman")
                .then(|| ewens_block_count_law(2.0 * torus.rho, *n))
                .transpose()?;
            let mut table = Table::new(["escaped", "count", "ewens_prob"]);
            for (k, h) in hist.iter().enumerate().skip(1) {
                let e = ewens
                    .as_ref()
                    .map_or_else(String::new, |law| law[k].to_string());
                table.push([k.to_string(), h.to_string(), e]);
            }
            ctx.report("spatial.escape", "under Kingman the count is K_n of an Ewens(2 rho) partition")
                .model(m.label())
                .results(&json!({
                    "n": n, "rho": torus.rho, "reps": reps,
                    "mean": mean, "se": se,
                    "ewens_expected": (m.label() == "kingman").then(|| ewens_expected_blocks(2.0 * torus.rho, *n)),
                    "histogram": &hist[1..],
                }))
                .map(|r| r.table(table))
        }
        SpatialCmd::Dispersion { torus, t } => {
            let rep = arratia_dispersion_test(torus.config()?, *t, &mut ctx.rng_stream().rng())?;
            let mut table = Table::new([
                "t",
                "particles",
                "box_side",
                "boxes",
                "dispersion_index",
                "dispersion_z",
                "poisson_p",
            ]);
            table.push([
                rep.t.to_string(),
                rep.particles.to_string(),
                rep.box_side.to_string(),
                rep.boxes.to_string(),
                rep.dispersion_index.to_string(),
                rep.dispersion_z.to_string(),
                rep.poisson_fit.p_value.to_string(),
            ]);
            ctx.report(
                "spatial.dispersion",
                "box counts after rescaling to unit density; Poisson in d >= 2",
            )
            .model("coalescing-walks")
            .results(&rep)
            .map(|r| r.table(table))
        }
        SpatialCmd::LimicSturm {
            model,
            torus,
            n,
            k,
            reps,
        } => {
            let m = parse_measure(model)?;
            let cfg = torus.config()?;
            let bound = limic_sturm_bound(&m, *k)?;
            let times = ctx
                .rng_stream()
                .try_par_replicates(*reps, |rng| limic_sturm_time(cfg, &m, *n, *k, rng))?;
            let (mean, se) = mean_se(&times);
            let mut table = Table::new(["rep", "time"]);
            for (i, t) in times.iter().enumerate() {
                table.push([i.to_string(), t.to_string()]);
            }
            ctx.report(
                "spatial.limic-sturm",
                "E(time to <= k particles) <= sum_{b>=k} 1/gamma_b + k/gamma_k",
            )
            .model(m.label())
            .results(&json!({"n": n, "k": k, "reps": reps, "mean": mean, "se": se, "bound": bound}))
            .map(|r| r.table(table))
        }
        SpatialCmd::Logstar { x } => {
            let v = log_star(*x);
            let mut table = Table::new(["x", "log_star"]);
            table.push([x.to_string(), v.to_string()]);
            ctx.report(
                "spatial.logstar",
                "number of iterated logarithms until below 1",
            )
            .results(&json!({"x": x, "log_star": v}))
            .map(|r| r.table(table))
        }
    }
}

/// `feller`, `feller:<scale>`, `neveu`, or a Lambda measure.
pub fn parse_mechanism(s: &str) -> Result<BranchingMechanism> {
    match s.trim() {
        "feller" => Ok(BranchingMechanism::feller()),
        "neveu" => Ok(BranchingMechanism::neveu()),
        other => match other.strip_prefix("feller:") {
            Some(scale) => {
                let v = scale
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("expected a number, found '{scale}'")))?;
                BranchingMechanism::feller_scaled(v)
            }
            None => Ok(BranchingMechanism::from_lambda(parse_measure(other)?)),
        },
    }
}

fn path_report(ctx: &Ctx, op: &str, formula: &str, path: &CsbpPath) -> Result<Report> {
    let mut table = Table::new(["t", "Z_t"]);
    for (t, z) in path.times.iter().zip(&path.masses) {
        table.push([t.to_string(), z.to_string()]);
    }
    ctx.report(op, formula)
        .results(path)
        .map(|r| r.table(table))
}

fn csbp(ctx: &Ctx, c: &CsbpCmd) -> Result<Report> {
    match c {
        CsbpCmd::U {
            mechanism,
            t,
            lambda,
            tol,
        } => {
            let psi = parse_mechanism(mechanism)?;
            let (u, route) = u_t_lambda_with(&psi, *t, *lambda, *tol)?;
            let mut table = Table::new(["t", "lambda", "u"]);
            table.push([t.to_string(), lambda.to_string(), u.to_string()]);
            ctx.report("csbp.u", "du/dt = -psi(u), u_0 = lambda")
                .model(psi.label())
                .tolerance("u_rel", *tol)
                .results(&json!({"t": t, "lambda": lambda, "u": u, "route": route}))
                .map(|r| r.table(table))
        }
        CsbpCmd::Grey { mechanism } => {
            let psi = parse_mechanism(mechanism)?;
            let v = grey_test(&psi)?;
            let mut table = Table::new(["extinct", "value", "partial", "heuristic", "reason"]);
            let cert = &v.certificate;
            table.push([
                v.extinct.to_string(),
                cert.value.map_or_else(String::new, |x| x.to_string()),
                cert.partial.to_string(),
                cert.heuristic.to_string(),
                cert.reason.clone(),
            ]);
            ctx.report(
                "csbp.grey",
                "extinction in finite time iff ∫_1^∞ dq/psi(q) < ∞",
            )
            .model(psi.label())
            .results(&v)
            .map(|r| r.table(table))
        }
        CsbpCmd::Extinction { mechanism, z, t } => {
            let psi = parse_mechanism(mechanism)?;
            let ext = extinction_prob(&psi, *z, *t)?;
            let surv = survival_prob(&psi, *z, *t)?;
            let v = csbp_speed(&psi, *t)?;
            let mut table = Table::new(["z", "t", "extinction_prob", "survival_prob", "v"]);
            table.push([
                z.to_string(),
                t.to_string(),
                ext.to_string(),
                surv.to_string(),
                v.to_string(),
            ]);
            ctx.report(
                "csbp.extinction",
                "P(Z_t = 0 | Z_0 = z) = exp(-z v(t)), v(t) = lim u_t(lambda)",
            )
            .model(psi.label())
            .results(
                &json!({"z": z, "t": t, "extinction_prob": ext, "survival_prob": surv, "v": v}),
            )
            .map(|r| r.table(table))
        }
        CsbpCmd::Feller { z0, dt, horizon } => {
            let path = feller_simulate(*z0, *dt, *horizon, &mut ctx.rng_stream().rng())?;
            path_report(
                ctx,
                "csbp.feller",
                "Euler scheme for dZ = sqrt(Z) dW, absorbed at 0",
                &path,
            )
            .map(|r| r.model("feller").tolerance("dt", *dt))
        }
        CsbpCmd::Lamperti { model, z0, horizon } => {
            let m = parse_measure(model)?;
            let path = lamperti_csbp(&m, *z0, *horizon, &mut ctx.rng_stream().rng())?;
            path_report(
                ctx,
                "csbp.lamperti",
                "Lamperti time change of a compound-Poisson Levy process",
                &path,
            )
            .map(|r| r.model(m.label()))
        }
    }
}
