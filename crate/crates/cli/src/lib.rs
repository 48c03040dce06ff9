//! Driver for the `nfl` command line tool: configuration, task scheduling,
//! output files and the verification suite.

pub mod config;
pub mod output;
pub mod tasks;
pub mod verify;

use std::fmt::Write as _;
use std::time::Instant;

use anyhow::Result;
use serde::Serialize;

use config::Config;
use output::{float, OutDir, OutputFile};
use tasks::{Context, FlowOutput, MassShellOutput, TaskStatus};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Verify,
    MassShell,
    Flow,
    Infrared,
    Convex,
    Hypotheses,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Verify => "verify",
            Command::MassShell => "massshell",
            Command::Flow => "flow",
            Command::Infrared => "infrared",
            Command::Convex => "convex",
            Command::Hypotheses => "hypotheses",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub workers: usize,
    pub deterministic: bool,
    pub tasks: Vec<TaskStatus>,
    pub outputs: Vec<OutputFile>,
    /// Hash over the command, config hash and output hashes; stable across
    /// reruns whenever the outputs are.
    pub content_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_seconds: Option<f64>,
}

/// Exit status of a run: `Ok(true)` when every task and every gating check
/// succeeded.
pub fn run(cmd: Command, cfg: Config) -> Result<bool> {
    let t0 = Instant::now();
    let workers = if cfg.run.deterministic { 1 } else { cfg.run.workers };
    // a second call in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global();
    let mut out = OutDir::create(&cfg.run.out)?;
    let ctx = Context::new(cfg)?;
    let mut ok = true;
    match cmd {
        Command::Verify => {
            let v = verify::run(&ctx);
            if let Some(m) = &v.massshell {
                write_massshell(&ctx, &mut out, m)?;
            }
            if let Some(f) = &v.flow {
                write_flow(&ctx, &mut out, f)?;
            }
            if let Some(i) = &v.infrared {
                out.write_json("infrared.json", i)?;
            }
            if let Some(c) = &v.convex {
                out.write_json("convex_report.json", c)?;
            }
            out.write_json("hypotheses.json", &v.hypotheses)?;
            out.write_json("verify.json", &v.report)?;
            for c in &v.report.checks {
                let mark = match (c.passed, c.gating) {
                    (true, _) => "ok  ",
                    (false, true) => "FAIL",
                    (false, false) => "note",
                };
                eprintln!("{mark} {:<36} {}", c.name, float(c.value));
            }
            eprintln!(
                "{} of {} gating checks passed",
                v.report.gating_checks - v.report.failed.len(),
                v.report.gating_checks
            );
            if !v.report.failed.is_empty() {
                eprintln!("failed: {}", v.report.failed.join(", "));
            }
            ok &= v.report.passed;
        }
        Command::MassShell => {
            if let Some(m) = ctx.task("massshell", || tasks::massshell(&ctx)) {
                write_massshell(&ctx, &mut out, &m)?;
            }
        }
        Command::Flow => {
            if let Some(f) = ctx.task("flow", || tasks::flow(&ctx)) {
                write_flow(&ctx, &mut out, &f)?;
            }
        }
        Command::Infrared => {
            if let Some(i) = ctx.task("infrared", || tasks::infrared(&ctx)) {
                out.write_json("infrared.json", &i)?;
            }
        }
        Command::Convex => {
            let m = ctx.task("massshell", || tasks::massshell(&ctx));
            if let Some(c) = ctx.task("convex", || tasks::convex(&ctx, m.as_ref().map(|m| &m.table))) {
                out.write_json("convex_report.json", &c)?;
            }
        }
        Command::Hypotheses => {
            let h = ctx.task("hypotheses", || Ok(tasks::hypotheses(&ctx))).unwrap();
            out.write_json("hypotheses.json", &h)?;
        }
    }
    let statuses = ctx.statuses();
    for s in statuses.iter().filter(|s| !s.ok) {
        eprintln!("task {} failed: {}", s.name, s.error.as_deref().unwrap_or(""));
    }
    ok &= statuses.iter().all(|s| s.ok);
    let outputs = out.files()?;
    let mut content = format!("{}\n{}\n", cmd.name(), ctx.hash);
    for f in &outputs {
        let _ = writeln!(content, "{} {}", f.path, f.sha256);
    }
    let manifest = RunManifest {
        tool: "nfl".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: cmd.name().into(),
        config_hash: ctx.hash.clone(),
        seed: ctx.cfg.run.seed,
        workers,
        deterministic: ctx.cfg.run.deterministic,
        tasks: statuses,
        outputs,
        content_hash: output::sha256_hex(content.as_bytes()),
        wall_seconds: (!ctx.cfg.run.deterministic).then(|| t0.elapsed().as_secs_f64()),
    };
    out.write_json("manifest.json", &manifest)?;
    Ok(ok)
}

fn write_massshell(ctx: &Context, out: &mut OutDir, m: &MassShellOutput) -> Result<()> {
    let d = ctx.cfg.model.dimension;
    let mut s = String::new();
    writeln!(s, "# model: {}", serde_json::to_string(&ctx.solver.spec)?)?;
    writeln!(s, "# config_hash: {}", ctx.hash)?;
    writeln!(s, "# mu: {}", float(m.table.mu))?;
    let mut cols = Vec::new();
    for name in ["P", "E", "gradHF", "gradFD", "hessFD"] {
        if name == "E" {
            cols.push("E".to_string());
        } else {
            cols.extend((0..d).map(|a| format!("{name}_{a}")));
        }
    }
    cols.extend(["deltaP", "gap", "inI0", "inB"].map(String::from));
    writeln!(s, "{}", cols.join(","))?;
    for r in &m.table.rows {
        let mut f: Vec<String> = r.momentum.iter().map(|&x| float(x)).collect();
        f.push(float(r.energy));
        for v in [&r.grad_hf, &r.grad_fd, &r.hess_fd] {
            f.extend((0..d).map(|a| float(v.get(a).copied().unwrap_or(f64::NAN))));
        }
        f.push(float(r.delta_p.value));
        f.push(float(r.gap));
        f.push(r.delta_p.in_i0.to_string());
        f.push(r.in_b.to_string());
        writeln!(s, "{}", f.join(","))?;
    }
    out.write("massshell.csv", s.as_bytes())?;
    out.write_json("massshell.json", m)?;
    Ok(())
}

fn write_flow(ctx: &Context, out: &mut OutDir, f: &FlowOutput) -> Result<()> {
    out.write_json("flow.json", f)?;
    let rec = &f.primary.record;
    let hash = output::basis_hash(&ctx.space.grid, &ctx.space.basis);
    let records: Vec<(f64, &[f64], &[f64])> = rec
        .schedule
        .iter()
        .zip(rec.psi.iter().zip(&rec.phi))
        .map(|(&mu, (psi, phi))| (mu, psi.as_slice(), phi.as_slice()))
        .collect();
    out.write("flow_states.bin", &output::encode_states(&hash, ctx.space.dim(), &records))?;

    let mut s = String::new();
    writeln!(s, "# config_hash: {}", ctx.hash)?;
    writeln!(s, "# basis_hash: {}", hex::encode(hash))?;
    writeln!(
        s,
        "run,alpha,mu,E,gap,N_undressed,N_dressed,N_weyl,leakage,energy_consistency,frame_energy_shift,top_weight,majorant,majorant_undressed,tail_top,tail_bound,dist_dressed_next,dist_undressed_next,dist_weyl_next"
    )?;
    let runs = std::iter::once(("primary", &f.primary)).chain(f.comparison.iter().map(|c| ("comparison", c)));
    for (label, run) in runs {
        let r = &run.record;
        let c = &run.compactness;
        let next = |m: &Vec<Vec<f64>>, j: usize| if j + 1 < m.len() { m[j][j + 1] } else { f64::NAN };
        for (j, st) in r.steps.iter().enumerate() {
            let tails = &c.tails[j];
            let tail_top = tails.get(tails.len().saturating_sub(2)).copied().unwrap_or(f64::NAN);
            let vals = [
                run.alpha,
                st.mu,
                st.ground.energy,
                st.ground.gap,
                st.n_undressed,
                st.n_dressed,
                st.n_weyl,
                st.leakage,
                st.energy_consistency,
                st.frame_energy_shift,
                st.top_weight_frame,
                c.majorant[j],
                c.majorant_undressed[j],
                tail_top,
                c.tail_bounds[j],
                next(&r.dressed_distances, j),
                next(&r.undressed_distances, j),
                next(&r.weyl_distances, j),
            ];
            let cells: Vec<String> = vals.iter().map(|&v| float(v)).collect();
            writeln!(s, "{label},{}", cells.join(","))?;
        }
    }
    out.write("diagnostics.csv", s.as_bytes())?;
    Ok(())
}
