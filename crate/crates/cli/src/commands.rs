use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use mfg_core::{
    best_response_gap, chaos_error, check_monotonicity, consistency_residual, deviation_gain,
    deviation_grid, derive_stream, evaluate_policy_cost, importance_cost, martingale_residual,
    picard_solve, simulate_nplayer, simulate_path, states_on_grid, total_cost, validate_spec, ControlledDynamics,
    EquilibriumSolution, McEstimate, PicardOptions, ProblemSpec, TimeGrid,
};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::{Loaded, ScenarioConfig};
use crate::error::CliError;

/// Everything a subcommand needs: the model, settings and the output directory.
pub struct Context {
    pub command: &'static str,
    pub config: ScenarioConfig,
    pub spec: ProblemSpec,
    pub grid: TimeGrid,
    pub picard: PicardOptions,
    pub seed: u64,
    pub config_sha256: String,
    pub config_source: String,
    pub out: PathBuf,
    written: Vec<String>,
}

impl Context {
    pub fn new(command: &'static str, loaded: Loaded, seed: Option<u64>, out: Option<PathBuf>) -> Result<Self, CliError> {
        let Loaded {
            config,
            sha256,
            source,
        } = loaded;
        let spec = config.build_spec()?;
        let grid = config.time_grid(&spec)?;
        let picard = config.picard()?;
        let seed = seed.unwrap_or(config.mc.seed);
        let out = out
            .or_else(|| config.outputs.clone())
            .unwrap_or_else(|| PathBuf::from("mfg-out"));
        std::fs::create_dir_all(&out)?;
        Ok(Self {
            command,
            config,
            spec,
            grid,
            picard,
            seed,
            config_sha256: sha256,
            config_source: source,
            out,
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        std::fs::write(self.out.join(name), contents)?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
        text.push('\n');
        self.write(name, &text)
    }

    /// Writes `manifest.json`; called on success and on non-convergence alike.
    pub fn finish(&mut self, status: &str) -> Result<(), CliError> {
        let mut files = self.written.clone();
        files.sort();
        let manifest = json!({
            "command": self.command,
            "status": status,
            "config": self.config_source,
            "config_sha256": self.config_sha256,
            "seed": self.seed,
            "versions": {
                "mfg-cli": env!("CARGO_PKG_VERSION"),
                "mfg-core": mfg_core::VERSION,
            },
            "files": files,
        });
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        std::fs::write(self.out.join("manifest.json"), text)?;
        Ok(())
    }

    pub fn out_dir(&self) -> &Path {
        &self.out
    }
}

fn trace_csv(sol: &EquilibriumSolution) -> String {
    let mut s = String::from("iter,state_res,control_res\n");
    for r in &sol.trace {
        let _ = writeln!(s, "{},{},{}", r.iter, r.state_res, r.control_res);
    }
    s
}

fn equilibrium_csv(spec: &ProblemSpec, sol: &EquilibriumSolution) -> String {
    let m = spec.num_states();
    let l = spec.control_dim();
    let mut s = String::from("t");
    for i in 1..=m {
        let _ = write!(s, ",p_{i}");
    }
    for i in 1..=m {
        if l == 1 {
            let _ = write!(s, ",alpha_{i}");
        } else {
            for c in 1..=l {
                let _ = write!(s, ",alpha_{i}_{c}");
            }
        }
    }
    s.push('\n');
    let grid = sol.p_flow.grid();
    for k in 0..grid.n_nodes() {
        let _ = write!(s, "{}", grid.node(k));
        for w in sol.p_flow.node(k).weights() {
            let _ = write!(s, ",{w}");
        }
        for i in 0..m {
            for a in sol.policy.node(k, i) {
                let _ = write!(s, ",{a}");
            }
        }
        s.push('\n');
    }
    s
}

/// Runs the Picard solver and writes the trace; non-convergence becomes exit code 2.
fn solve_equilibrium(ctx: &mut Context) -> Result<EquilibriumSolution, CliError> {
    let sol = picard_solve(&ctx.spec, ctx.grid, None, ctx.picard)?;
    ctx.write("trace.csv", &trace_csv(&sol))?;
    let last = sol.final_residual();
    log::info!(
        "picard: {} iterations, converged = {}",
        sol.trace.len(),
        sol.converged
    );
    if !sol.converged {
        return Err(CliError::NotConverged {
            iterations: sol.trace.len(),
            residual: last.map(|r| r.combined).unwrap_or(f64::NAN),
        });
    }
    Ok(sol)
}

fn estimate_json(e: &McEstimate, n_paths: usize, seed: u64) -> serde_json::Value {
    json!({ "estimate": e.mean, "se": e.se, "n_paths": n_paths, "seed": seed })
}

pub fn solve(ctx: &mut Context) -> Result<String, CliError> {
    let sol = solve_equilibrium(ctx)?;
    ctx.write("equilibrium.csv", &equilibrium_csv(&ctx.spec, &sol))?;
    ctx.write("value.csv", &sol.value.to_csv())?;
    let (state_res, control_res) = consistency_residual(&ctx.spec, &sol)?;
    let report = json!({
        "converged": sol.converged,
        "iterations": sol.trace.len(),
        "state_res": state_res,
        "control_res": control_res,
        "tol": ctx.picard.tol,
        "total_cost": total_cost(&ctx.spec, &sol.value),
    });
    ctx.write_json("solve.json", &report)?;
    Ok(format!(
        "equilibrium found in {} iterations (residual {:.3e})",
        sol.trace.len(),
        state_res + control_res
    ))
}

pub fn simulate(ctx: &mut Context) -> Result<String, CliError> {
    let sol = solve_equilibrium(ctx)?;
    let n = ctx.config.mc.n_paths;
    let seed = ctx.seed;
    let spec = &ctx.spec;
    let dynamics = ControlledDynamics::new(spec, &sol.policy, &sol.p_flow, &sol.nu_flow)?;
    let paths = (0..n)
        .into_par_iter()
        .map(|k| {
            let mut rng = derive_stream(seed, &[k as u64]);
            simulate_path(&dynamics, spec.p_init(), spec.horizon(), &mut rng)
        })
        .collect::<mfg_core::Result<Vec<_>>>()?;
    let mut text = String::from("path,time,state\n");
    for (k, p) in paths.iter().enumerate() {
        for line in p.to_csv().lines().skip(1) {
            let _ = writeln!(text, "{k},{line}");
        }
    }
    let m = spec.num_states();
    let grid = sol.p_flow.grid();
    let mut counts = vec![vec![0usize; m]; grid.n_nodes()];
    for p in &paths {
        for (k, s) in states_on_grid(p, grid).into_iter().enumerate() {
            counts[k][s] += 1;
        }
    }
    let mut marg = String::from("t");
    for i in 1..=m {
        let _ = write!(marg, ",p_{i}");
    }
    for i in 1..=m {
        let _ = write!(marg, ",freq_{i}");
    }
    marg.push('\n');
    for (k, row) in counts.iter().enumerate() {
        let _ = write!(marg, "{}", grid.node(k));
        for w in sol.p_flow.node(k).weights() {
            let _ = write!(marg, ",{w}");
        }
        for c in row {
            let _ = write!(marg, ",{}", *c as f64 / n as f64);
        }
        marg.push('\n');
    }
    ctx.write("paths.csv", &text)?;
    ctx.write("marginals.csv", &marg)?;
    Ok(format!("{n} equilibrium paths written"))
}

pub fn evaluate_cost(ctx: &mut Context) -> Result<String, CliError> {
    let sol = solve_equilibrium(ctx)?;
    let spec = &ctx.spec;
    let n = ctx.config.mc.n_paths;
    let seed = ctx.seed;
    let j = evaluate_policy_cost(spec, &sol.policy, &sol.p_flow, &sol.nu_flow)?;
    let ode = total_cost(spec, &j);
    let dynamics = ControlledDynamics::new(spec, &sol.policy, &sol.p_flow, &sol.nu_flow)?;
    let costs = (0..n)
        .into_par_iter()
        .map(|k| {
            let mut rng = derive_stream(seed, &[2, k as u64]);
            let path = simulate_path(&dynamics, spec.p_init(), spec.horizon(), &mut rng)?;
            dynamics.path_cost(&path)
        })
        .collect::<mfg_core::Result<Vec<f64>>>()?;
    let direct = McEstimate::from_samples(&costs);
    let imp = importance_cost(spec, &sol.policy, &sol.p_flow, &sol.nu_flow, n, seed)?;
    let report = json!({
        "ode": { "per_state": j.initial(), "total": ode },
        "direct": estimate_json(&direct, n, seed),
        "importance": {
            "estimate": imp.estimate,
            "se": imp.se,
            "n_paths": imp.n_paths,
            "seed": imp.seed,
            "mean_weight": imp.mean_weight,
        },
        "direct_agrees": direct.within(ode, 3.0),
        "importance_agrees": (imp.estimate - ode).abs() <= 3.0 * imp.se,
    });
    ctx.write_json("cost.json", &report)?;
    Ok(format!(
        "cost: ode {ode:.6}, direct {:.6} +- {:.2e}, importance {:.6} +- {:.2e}",
        direct.mean, direct.se, imp.estimate, imp.se
    ))
}

pub fn verify_equilibrium(ctx: &mut Context) -> Result<String, CliError> {
    let sol = solve_equilibrium(ctx)?;
    let spec = &ctx.spec;
    let (state_res, control_res) = consistency_residual(spec, &sol)?;
    let gap = best_response_gap(spec, &sol, ctx.config.verify.n_candidates, ctx.seed)?;
    let residual = martingale_residual(
        spec,
        &sol.value,
        &sol.policy,
        &sol.p_flow,
        &sol.nu_flow,
        ctx.config.mc.n_paths,
        ctx.seed,
    )?;
    let consistent = state_res + control_res < ctx.picard.tol;
    let optimal = gap.gap <= 1e-9;
    let martingale = residual.is_consistent(3.0);
    let report = json!({
        "state_res": state_res,
        "control_res": control_res,
        "best_response_gap": gap,
        "martingale_residual": estimate_json(&residual.estimate, ctx.config.mc.n_paths, ctx.seed),
        "consistent": consistent,
        "optimal": optimal,
        "martingale_ok": martingale,
        "certified": consistent && optimal && martingale,
    });
    ctx.write_json("verify.json", &report)?;
    Ok(format!(
        "equilibrium {}: residual {:.2e}, gap {:.2e} over {} candidates, martingale residual {:.2e} +- {:.2e}",
        if consistent && optimal && martingale { "certified" } else { "NOT certified" },
        state_res + control_res,
        gap.gap,
        gap.n_candidates,
        residual.estimate.mean,
        residual.estimate.se
    ))
}

pub fn nplayer(ctx: &mut Context) -> Result<String, CliError> {
    if ctx.spec.mean_field_in_q() {
        return Err(CliError::Validation(
            "nplayer needs transition rates that do not depend on the mean field".into(),
        ));
    }
    let sol = solve_equilibrium(ctx)?;
    let cfg = ctx.config.nplayer.clone();
    let spec = &ctx.spec;
    let chaos = chaos_error(spec, &sol, &cfg.n_list, cfg.reps, ctx.seed)?;
    let mut chaos_csv = String::from("N,mse_state,se_state,mse_w1,se_w1,bound_m_over_4N\n");
    for r in &chaos.rows {
        let _ = writeln!(
            chaos_csv,
            "{},{},{},{},{},{}",
            r.n, r.mse_state, r.se_state, r.mse_w1, r.se_w1, r.bound
        );
    }
    let devs = deviation_grid(spec, &sol.policy, &cfg.scalings, &cfg.offsets)?;
    let mut dev_csv = String::from("deviation_id,gain,se,N\n");
    let mut per_n = Vec::new();
    for &n in &cfg.deviation_n {
        let rep = deviation_gain(spec, &sol, n, &devs, cfg.n_mc, ctx.seed)?;
        for row in &rep.rows {
            let _ = writeln!(dev_csv, "{},{},{},{}", row.id, row.gain.mean, row.gain.se, n);
        }
        // Tracked against a fixed ceiling; large values mean reweighting is unreliable.
        let m2 = simulate_nplayer(spec, &sol, n, ctx.seed)?.likelihood_second_moment(spec, &sol)?;
        per_n.push(json!({
            "N": n,
            "max_profitable_gain": rep.max_profitable_gain,
            "likelihood_second_moment": { "estimate": m2.mean, "se": m2.se },
        }));
    }
    ctx.write("chaos.csv", &chaos_csv)?;
    ctx.write("deviations.csv", &dev_csv)?;
    let report = json!({
        "state_slope": chaos.state_slope,
        "w1_slope": chaos.w1_slope,
        "reps": chaos.reps,
        "within_bound": chaos.within_bound(3.0),
        "deviations": per_n,
        "seed": ctx.seed,
    });
    ctx.write_json("nplayer.json", &report)?;
    Ok(format!(
        "chaos slope {:.3}, W1^2 slope {:.3}, bound {}",
        chaos.state_slope,
        chaos.w1_slope,
        if chaos.within_bound(3.0) { "respected" } else { "EXCEEDED" }
    ))
}

pub fn check_monotone(ctx: &mut Context) -> Result<String, CliError> {
    let mut rng = derive_stream(ctx.seed, &[0]);
    let n = ctx.config.mc.n_paths;
    let mono = check_monotonicity(&ctx.spec, n, &mut rng)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let validity = validate_spec(&ctx.spec, n, &mut rng);
    let pass = mono.g_monotone && mono.f1_monotone;
    let report = json!({
        "pass": pass,
        "monotonicity": mono,
        "spec_valid": validity.is_valid(),
        "seed": ctx.seed,
    });
    ctx.write_json("monotone.json", &report)?;
    Ok(format!(
        "monotonicity {}: g {}, f1 {} (min sums {:.3e}, {:.3e})",
        if pass { "PASS" } else { "FAIL" },
        if mono.g_monotone { "ok" } else { "violated" },
        if mono.f1_monotone { "ok" } else { "violated" },
        mono.min_g_sum,
        mono.min_f1_sum
    ))
}

pub fn likelihood_check(ctx: &mut Context) -> Result<String, CliError> {
    let sol = solve_equilibrium(ctx)?;
    let spec = &ctx.spec;
    let n = ctx.config.mc.n_paths;
    let ode = total_cost(spec, &sol.value);
    let imp = importance_cost(spec, &sol.policy, &sol.p_flow, &sol.nu_flow, n, ctx.seed)?;
    let cost_ok = (imp.estimate - ode).abs() <= 3.0 * imp.se;
    let weight_ok = imp.mean_weight.within(1.0, 3.0);
    let report = json!({
        "importance": {
            "estimate": imp.estimate,
            "se": imp.se,
            "n_paths": imp.n_paths,
            "seed": imp.seed,
        },
        "ode_cost": ode,
        "mean_weight": estimate_json(&imp.mean_weight, n, ctx.seed),
        "second_moment": estimate_json(&imp.second_moment, n, ctx.seed),
        "cost_agrees": cost_ok,
        "weight_mean_one": weight_ok,
    });
    ctx.write_json("likelihood.json", &report)?;
    Ok(format!(
        "likelihood check {}: reweighted cost {:.6} +- {:.2e} vs {ode:.6}; E[W] {:.4} +- {:.2e}",
        if cost_ok && weight_ok { "PASS" } else { "FAIL" },
        imp.estimate,
        imp.se,
        imp.mean_weight.mean,
        imp.mean_weight.se
    ))
}
