//! The computations behind each subcommand, sharing one ground-state cache.

use std::sync::{Arc, Mutex};
use std::time::Instant;

use anyhow::{anyhow, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use nfl_core::convex::{convex_diff_lower_bound, delta_p_bruteforce, delta_p_closed_form, ConvexDiffReport, Parabola};
use nfl_core::fock::{ModeGrid, OneBosonFunction};
use nfl_core::infrared::{
    apriori_bound_check, compactness_diagnostics, dressed_flow, dressed_pull_through, lipschitz_pairs, pull_through_residual,
    resolvent_approx_check, resolvent_lipschitz, AprioriReport, CompactnessDiagnostics, DressedFlowRecord, DressedPullThroughReport,
    FlowOptions, LipschitzOptions, LipschitzReport, PullThroughReport, ResolventApproxReport,
};
use nfl_core::massshell::{
    convexity_check, delta_p, scan_mass_shell, schedule_check, shell_bound_suite, ConvexityReport, MassShellTable, ScanOptions, ScheduleReport,
    ShellBoundReport,
};
use nfl_core::model::{check_hypotheses, dressing_function, FockSpace, HypothesisReport, ModelSpec};
use nfl_core::spectral::{hellmann_feynman_gradient, FiberSolver};

use crate::config::Config;

#[derive(Clone, Debug, Serialize)]
pub struct TaskStatus {
    pub name: String,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_seconds: Option<f64>,
}

pub struct Context {
    pub cfg: Config,
    pub hash: String,
    pub space: Arc<FockSpace>,
    pub solver: FiberSolver,
    status: Mutex<Vec<TaskStatus>>,
}

fn build_space(grid: ModeGrid<f64>, n_max: usize, limit: usize) -> Result<FockSpace> {
    Ok(FockSpace::new(grid, n_max, limit)?.with_extension(limit.saturating_mul(8))?)
}

impl Context {
    pub fn new(cfg: Config) -> Result<Self> {
        let space = Arc::new(build_space(cfg.grid()?, cfg.grid.n_max, cfg.grid.basis_limit)?);
        let solver = FiberSolver::new(space.clone(), cfg.spec(), cfg.solver_options())?;
        Ok(Self {
            hash: cfg.hash(),
            cfg,
            space,
            solver,
            status: Mutex::new(Vec::new()),
        })
    }

    /// Runs `f`, recording its status. Failures are kept, not propagated.
    pub fn task<T>(&self, name: &str, f: impl FnOnce() -> Result<T>) -> Option<T> {
        let t0 = Instant::now();
        let r = f();
        let wall = (!self.cfg.run.deterministic).then(|| t0.elapsed().as_secs_f64());
        let (ok, error, out) = match r {
            Ok(v) => (true, None, Some(v)),
            Err(e) => (false, Some(format!("{e:#}")), None),
        };
        self.status.lock().unwrap().push(TaskStatus {
            name: name.into(),
            ok,
            error,
            wall_seconds: wall,
        });
        out
    }

    pub fn statuses(&self) -> Vec<TaskStatus> {
        self.status.lock().unwrap().clone()
    }

    pub fn momentum(&self) -> &[f64] {
        &self.cfg.model.momentum
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MassShellOutput {
    pub table: MassShellTable,
    pub convexity: ConvexityReport,
    pub shell: ShellBoundReport,
    /// A priori bound per scanned row, in row order; rows that failed are skipped.
    pub apriori: Vec<AprioriReport>,
    pub schedule: ScheduleReport,
}

pub fn massshell(ctx: &Context) -> Result<MassShellOutput> {
    let c = &ctx.cfg;
    let opts = ScanOptions {
        grad_step: c.scan.grad_step,
        hess_step: c.scan.hess_step,
        small_k_modes: c.scan.small_k_modes,
    };
    let table = scan_mass_shell(&ctx.solver, &c.scan_points(), c.model.mu, &opts);
    let convexity = convexity_check(&table, &ctx.solver.spec);
    let shell = shell_bound_suite(&table, &ctx.solver);
    let apriori = table
        .rows
        .iter()
        .filter(|r| r.error.is_none())
        .map(|r| {
            let rec = ctx.solver.ground_state(&r.momentum, table.mu);
            apriori_bound_check(&ctx.solver, &rec, &r.delta_p)
        })
        .collect();
    let schedule = schedule_check(&ctx.solver, ctx.momentum(), &c.schedule.mu, c.scan.hess_step, 0.0)?;
    Ok(MassShellOutput {
        table,
        convexity,
        shell,
        apriori,
        schedule,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct FlowRun {
    pub alpha: f64,
    pub record: DressedFlowRecord,
    pub compactness: CompactnessDiagnostics,
}

#[derive(Clone, Debug, Serialize)]
pub struct FlowOutput {
    pub momentum: Vec<f64>,
    pub primary: FlowRun,
    /// Same flow at the comparison exponent of the form factor.
    pub comparison: Option<FlowRun>,
    pub momentum_continuity: MomentumContinuity,
}

/// ‖Φ(P) − Φ(P + δP e_0)‖ at the smallest mass; recorded, never asserted.
#[derive(Clone, Debug, Serialize)]
pub struct MomentumContinuity {
    pub step: f64,
    pub mu: f64,
    pub distance: f64,
}

fn flow_run(ctx: &Context, solver: &FiberSolver) -> Result<FlowRun> {
    let opts = FlowOptions {
        max_leakage: ctx.cfg.flow.max_leakage,
        keep_states: true,
    };
    let record = dressed_flow(solver, ctx.momentum(), &ctx.cfg.schedule.mu, &opts)?;
    let compactness = compactness_diagnostics(&record, &ctx.space.basis, &ctx.space.grid, &solver.spec);
    Ok(FlowRun {
        alpha: solver.spec.form_factor.alpha,
        record,
        compactness,
    })
}

pub fn flow(ctx: &Context) -> Result<FlowOutput> {
    let primary = flow_run(ctx, &ctx.solver)?;
    let alpha = ctx.cfg.flow.regular_alpha;
    let comparison = if alpha != ctx.cfg.model.alpha {
        let mut spec = ctx.cfg.spec();
        spec.form_factor.alpha = alpha;
        let solver = FiberSolver::new(ctx.space.clone(), spec, ctx.cfg.solver_options())?;
        Some(flow_run(ctx, &solver)?)
    } else {
        None
    };
    let step = ctx.cfg.scan.hess_step;
    let mu = *ctx.cfg.schedule.mu.last().unwrap();
    let mut q = ctx.momentum().to_vec();
    q[0] += step;
    let opts = FlowOptions {
        max_leakage: ctx.cfg.flow.max_leakage,
        keep_states: true,
    };
    let shifted = dressed_flow(&ctx.solver, &q, &[mu], &opts)?;
    let last = primary.record.phi.last().unwrap();
    let momentum_continuity = MomentumContinuity {
        step,
        mu,
        distance: nfl_core::linalg::distance(last, &shifted.phi[0]),
    };
    Ok(FlowOutput {
        momentum: ctx.momentum().to_vec(),
        primary,
        comparison,
        momentum_continuity,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct InfraredOutput {
    /// Schedule masses at the configured momentum first, then the scanned
    /// momenta at the scan mass.
    pub pull_through: Vec<PullThroughReport>,
    pub dressed_pull_through: Vec<DressedPullThroughReport>,
    pub apriori: Vec<AprioriReport>,
    pub resolvent_approx: Vec<ResolventApproxReport>,
    pub lipschitz: Vec<LipschitzReport>,
    /// Failures of individual points, as "label: error".
    pub errors: Vec<String>,
}

fn dressing_at(solver: &FiberSolver, p: &[f64], mu: f64) -> Result<(Vec<f64>, OneBosonFunction<f64>)> {
    let rec = solver.ground_state(p, mu);
    let grad = hellmann_feynman_gradient(&solver.space, &solver.spec_at(p, mu), &rec)?;
    let g = dressing_function(&solver.space.grid, &solver.spec, &grad, mu)?;
    Ok((grad, g.values))
}

pub fn infrared(ctx: &Context) -> Result<InfraredOutput> {
    let c = &ctx.cfg;
    let solver = &ctx.solver;
    let p = ctx.momentum();
    let mut out = InfraredOutput {
        pull_through: Vec::new(),
        dressed_pull_through: Vec::new(),
        apriori: Vec::new(),
        resolvent_approx: Vec::new(),
        lipschitz: Vec::new(),
        errors: Vec::new(),
    };
    let mut mus = c.schedule.mu.clone();
    mus.sort_by(|a, b| b.partial_cmp(a).unwrap());
    for &mu in &mus {
        let label = format!("P={p:?} mu={mu}");
        let rec = solver.ground_state(p, mu);
        match pull_through_residual(solver, &rec) {
            Ok(r) => out.pull_through.push(r),
            Err(e) => out.errors.push(format!("pull-through {label}: {e}")),
        }
        let dressed = dressing_at(solver, p, mu).and_then(|(grad, g)| {
            let d = dressed_pull_through(solver, &rec, &g)?;
            let ra = resolvent_approx_check(solver, &rec, &grad)?;
            let dp = delta_p(solver, &rec, &grad, mu, c.scan.small_k_modes);
            Ok((d, ra, apriori_bound_check(solver, &rec, &dp)))
        });
        match dressed {
            Ok((d, ra, ap)) => {
                out.dressed_pull_through.push(d);
                out.resolvent_approx.push(ra);
                out.apriori.push(ap);
            }
            Err(e) => out.errors.push(format!("dressed pull-through {label}: {e:#}")),
        }
    }
    if c.scan.pull_through {
        for q in c.scan_points() {
            let rec = solver.ground_state(&q, c.model.mu);
            match pull_through_residual(solver, &rec) {
                Ok(r) => out.pull_through.push(r),
                Err(e) => out.errors.push(format!("pull-through P={q:?} mu={}: {e}", c.model.mu)),
            }
        }
    }
    let spec = ctx.cfg.spec();
    let pairs = lipschitz_pairs(&spec, c.grid.k_max, c.lipschitz.pairs, c.lipschitz.target)?;
    for &m in &c.lipschitz.modes {
        let r = ModeGrid::build(c.model.dimension, c.grid.k_max, m)
            .map_err(anyhow::Error::from)
            .and_then(|g| build_space(g, c.lipschitz.n_max, c.grid.basis_limit))
            .and_then(|space| Ok(resolvent_lipschitz(&space, &spec, &pairs, &LipschitzOptions::default())?));
        match r {
            Ok(rep) => out.lipschitz.push(rep),
            Err(e) => out.errors.push(format!("lipschitz m={m}: {e:#}")),
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct ParabolaCase {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub closed_form: f64,
    pub brute_force: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ParabolaSweep {
    pub count: usize,
    pub resolution: usize,
    pub seed: u64,
    pub max_difference: f64,
    /// Largest brute − closed; the closed form is a supremum, so this
    /// should never be positive beyond roundoff.
    pub max_excess: f64,
    pub worst: Option<ParabolaCase>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvexOutput {
    pub sweep: ParabolaSweep,
    pub instances: Vec<ParabolaCase>,
    /// C of the lower bound on the mass shell, 1/M.
    pub convexdiff_constant: f64,
    pub convexdiff: Option<ConvexDiffReport>,
}

fn parabola_case(a: f64, b: f64, c: f64, resolution: usize, expected: Option<f64>) -> Result<ParabolaCase> {
    let p = Parabola::new(a, b, c)?;
    let brute = delta_p_bruteforce(&p, resolution)?;
    Ok(ParabolaCase {
        a,
        b,
        c,
        closed_form: delta_p_closed_form(&p),
        brute_force: brute.best,
        expected,
    })
}

/// Random parabolas inside both admissibility conditions.
pub fn random_parabolas(seed: u64, count: usize) -> Vec<(f64, f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let c: f64 = rng.gen_range(0.25..4.0);
            let b: f64 = rng.gen_range(-1.5..1.5);
            let floor = (b * b / (2.0 * c * c)).max(b * b / (2.0 * c));
            let a = floor + rng.gen_range(0.0..2.0);
            (a, b, c)
        })
        .collect()
}

pub fn convex(ctx: &Context, shell: Option<&MassShellTable>) -> Result<ConvexOutput> {
    let c = &ctx.cfg;
    let res = c.convex.resolution;
    let cases: Vec<ParabolaCase> = random_parabolas(c.run.seed, c.convex.parabolas)
        .par_iter()
        .map(|&(a, b, cc)| parabola_case(a, b, cc, res, None))
        .collect::<Result<_>>()?;
    let mut worst: Option<ParabolaCase> = None;
    let mut max_excess = f64::NEG_INFINITY;
    for case in &cases {
        let d = (case.closed_form - case.brute_force).abs();
        max_excess = max_excess.max(case.brute_force - case.closed_form);
        if worst.as_ref().map_or(true, |w| d > (w.closed_form - w.brute_force).abs()) {
            worst = Some(case.clone());
        }
    }
    let sweep = ParabolaSweep {
        count: cases.len(),
        resolution: res,
        seed: c.run.seed,
        max_difference: worst.as_ref().map_or(0.0, |w| (w.closed_form - w.brute_force).abs()),
        max_excess,
        worst,
    };
    let instances = vec![
        parabola_case(1.0, 0.0, 1.0, res, Some(2f64.sqrt()))?,
        parabola_case(0.1, 0.0, 1.0, res, Some(0.6))?,
    ];
    let k = 1.0 / c.model.mass;
    let convexdiff = match shell {
        Some(t) => {
            let samples: Vec<(f64, f64)> = t.rows.iter().filter(|r| r.error.is_none()).map(|r| (r.momentum[0], r.energy)).collect();
            Some(convex_diff_lower_bound(&samples, k, 1e-10)?)
        }
        None => None,
    };
    Ok(ConvexOutput {
        sweep,
        instances,
        convexdiff_constant: k,
        convexdiff,
    })
}

pub fn hypotheses(ctx: &Context) -> HypothesisReport {
    check_hypotheses(&ctx.space.grid, &ctx.solver.spec, &ctx.cfg.schedule.mu)
}

/// The smallest nontrivial fiber: two modes ±1 of weight 2 and one boson.
/// At P = 0 the antisymmetric one-boson state decouples and the vacuum
/// couples to the symmetric one with strength 2v(1), leaving
/// [[0, g], [g, Θ(1) + ω(1)]].
pub fn two_level(spec: &ModelSpec, solver_opts: &nfl_core::spectral::SolverOptions) -> Result<(f64, f64)> {
    let grid = ModeGrid::build(1, 2.0, 2)?;
    let space = Arc::new(FockSpace::new(grid, 1, 16)?);
    let mut s = spec.with_momentum(&[0.0]);
    s.form_factor.cutoff = s.form_factor.cutoff.max(1.0);
    let solver = FiberSolver::new(space, s.clone(), solver_opts.clone())?;
    let rec = solver.ground_state(&[0.0], s.boson.mu);
    let diag = s.dispersion.theta(&[1.0]) + s.boson.omega(&[1.0]) - s.dispersion.theta(&[0.0]);
    let g = 2.0 * s.form_factor.value(&[1.0]);
    let closed = s.dispersion.theta(&[0.0]) + diag / 2.0 - (diag * diag / 4.0 + g * g).sqrt();
    if !rec.converged {
        return Err(anyhow!("eigensolver did not converge on the two-level fiber"));
    }
    Ok((rec.energy, closed))
}
