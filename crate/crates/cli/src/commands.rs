use std::fs;
use std::path::PathBuf;

use ris_core::control::{optimize as compass_search, SearchStatus};
use ris_core::table::{Cell, Table};
use ris_core::verify::{
    compatibility_check, dual_equivalence, history_lipschitz_check, lipschitz_experiment, uniform_bound_experiment,
    uniqueness_probe,
};
use ris_core::viscous::solve_with;
use ris_core::vv::{vv_sweep, VvOptions};
use ris_core::{Scenario, Trajectory};

use crate::config::{Config, DissipationKindConfig};
use crate::{CliError, Common, Experiment};

pub struct Run {
    pub config: Config,
    pub hash: String,
    pub out: PathBuf,
}

impl Run {
    pub fn load(common: &Common) -> Result<Self, CliError> {
        let text = fs::read_to_string(&common.config)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", common.config.display())))?;
        let mut config = Config::from_toml(&text)?;
        if let Some(eps) = common.eps {
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(CliError::Config(format!("--eps must be positive, got {eps}")));
            }
            config.viscosity.epsilon = eps;
        }
        if let Some(seed) = common.seed {
            config.seed = seed;
        }
        if let Some(out) = &common.out {
            config.output_dir = out.clone();
        }
        let hash = config.hash();
        let out = config.output_dir.clone();
        Ok(Self { config, hash, out })
    }

    fn write(&self, name: &str, table: &Table) -> Result<(), CliError> {
        fs::create_dir_all(&self.out)?;
        let path = self.out.join(name);
        let file = fs::File::create(&path)?;
        table.write_csv(std::io::BufWriter::new(file), &self.hash)?;
        Ok(())
    }
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn trajectory_table(traj: &Trajectory<f64>) -> Table {
    let n = traj.state(0).len();
    let mut table = Table::new(std::iter::once("t".to_string()).chain((0..n).map(|i| format!("q{i}"))));
    for (k, q) in traj.states().iter().enumerate() {
        let mut row: Vec<Cell> = vec![traj.time(k).into()];
        row.extend(q.values().iter().map(|&v| Cell::from(v)));
        table.push(row);
    }
    table
}

fn warn_if_incompatible(scenario: &Scenario<f64>) -> bool {
    let cert = compatibility_check(scenario);
    if !cert.compatible {
        println!(
            "WARNING: compatibility condition ℓ(0) ∈ ∂₂R(y₀, 0) fails at {} node(s) (max violation {:e}); the solution may jump at t = 0",
            cert.violating_nodes.len(),
            cert.max_violation
        );
    }
    cert.compatible
}

pub fn solve(run: &Run) -> Result<(), CliError> {
    let cfg = &run.config;
    let scenario = cfg.scenario()?;
    warn_if_incompatible(&scenario);
    let eps = cfg.viscosity.epsilon;
    let (traj, report) = solve_with(&scenario, eps, &cfg.solve_options())?;
    run.write("trajectory.csv", &trajectory_table(&traj))?;
    let mut table = Table::new([
        "step",
        "t",
        "energy",
        "dissipation",
        "balance_residual",
        "polar_violation",
        "inner_iterations",
    ]);
    for k in 0..traj.n_steps() {
        table.push(vec![
            k.into(),
            traj.time(k + 1).into(),
            report.energies[k].into(),
            report.dissipation_values[k].into(),
            report.energy_balance_residuals[k].into(),
            report.polar_violations[k].into(),
            report.inner_iterations[k].into(),
        ]);
    }
    run.write("report.csv", &table)?;
    println!(
        "solve: eps={eps:e} steps={} |q|_C={:e} max balance residual={:e} max polar violation={:e}",
        traj.n_steps(),
        traj.c_norm(&scenario.mesh),
        report.max_balance_residual(),
        report.max_polar_violation()
    );
    Ok(())
}

pub fn sweep(run: &Run) -> Result<(), CliError> {
    let cfg = &run.config;
    let scenario = cfg.scenario()?;
    warn_if_incompatible(&scenario);
    let opts = VvOptions {
        solve: cfg.solve_options(),
        n_test_dirs: cfg.verify.n_test_dirs,
        tolerance: cfg.verify.certificate_tolerance,
        seed: cfg.seed,
    };
    let result = vv_sweep(&scenario, &cfg.schedule(), &opts)?;
    let ratios = result.cauchy_ratios();
    let mut summary = Table::new([
        "level",
        "epsilon",
        "cauchy_c",
        "cauchy_h1",
        "cauchy_ratio",
        "max_balance_residual",
        "state_c_norm",
    ]);
    for (k, traj) in result.trajectories.iter().enumerate() {
        let (c, h1) = if k == 0 {
            (f64::NAN, f64::NAN)
        } else {
            (result.cauchy_c[k - 1], result.cauchy_h1[k - 1])
        };
        let ratio = if k >= 2 { ratios[k - 2] } else { f64::NAN };
        summary.push(vec![
            k.into(),
            result.eps_schedule[k].into(),
            c.into(),
            h1.into(),
            ratio.into(),
            result.reports[k].max_balance_residual().into(),
            traj.c_norm(&scenario.mesh).into(),
        ]);
        run.write(&format!("trajectory_level{k:02}.csv"), &trajectory_table(traj))?;
    }
    run.write("sweep_summary.csv", &summary)?;
    let cert = &result.certificate;
    let mut table = Table::new(["step", "stability_violation", "balance_residual"]);
    for (i, &k) in cert.sampled_steps.iter().enumerate() {
        table.push(vec![
            k.into(),
            cert.stability_violations[i].into(),
            cert.balance_residuals[i].into(),
        ]);
    }
    run.write("certificate.csv", &table)?;
    println!(
        "{} limit certificate: levels={} max stability violation={:e} max balance residual={:e} tolerance={:e}",
        verdict(cert.pass),
        result.trajectories.len(),
        cert.max_stability_violation(),
        cert.max_balance_residual(),
        cert.tolerance
    );
    if let Some((level, err)) = &result.failure {
        return Err(CliError::Numerical(format!("sweep stopped at level {level}: {err}")));
    }
    Ok(())
}

pub fn verify(run: &Run, experiment: Experiment) -> Result<(), CliError> {
    let cfg = &run.config;
    let v = &cfg.verify;
    let scenario = cfg.scenario()?;
    match experiment {
        Experiment::Compat => {
            let cert = compatibility_check(&scenario);
            let mut table = Table::new(["compatible", "violating_nodes", "max_violation", "tolerance"]);
            table.push(vec![
                cert.compatible.into(),
                cert.violating_nodes.len().into(),
                cert.max_violation.into(),
                cert.tolerance.into(),
            ]);
            run.write("compat.csv", &table)?;
            println!(
                "{} compat: violating nodes={} max violation={:e}",
                verdict(cert.compatible),
                cert.violating_nodes.len(),
                cert.max_violation
            );
        }
        Experiment::Bounds => {
            let result = uniform_bound_experiment(&cfg.experiment(&scenario, &v.bound_eps))?;
            let mut table = Table::new(["load", "epsilon", "state_norm", "load_norm", "ratio"]);
            for r in &result.rows {
                table.push(vec![
                    r.load_index.into(),
                    r.epsilon.into(),
                    r.state_norm.into(),
                    r.load_norm.into(),
                    r.ratio.into(),
                ]);
            }
            run.write("bounds.csv", &table)?;
            let pass = result.max_variation <= v.variation_limit && result.skipped_loads.is_empty();
            println!(
                "{} bounds: max ratio variation={:.4} limit={} skipped loads={}",
                verdict(pass),
                result.max_variation,
                v.variation_limit,
                result.skipped_loads.len()
            );
        }
        Experiment::Lipschitz => {
            if cfg.dissipation.kind != DissipationKindConfig::Fatigue || cfg.dissipation.threshold_prime.is_none() {
                return Err(CliError::Config(
                    "dissipation: the lipschitz experiment needs kind = \"fatigue\" and threshold_prime".into(),
                ));
            }
            let result = lipschitz_experiment(&cfg.experiment(&scenario, &v.lipschitz_eps))?;
            let mut table = Table::new(["pair", "epsilon", "state_gap", "load_gap", "ratio"]);
            for r in &result.rows {
                table.push(vec![
                    r.pair_index.into(),
                    r.epsilon.into(),
                    r.state_gap.into(),
                    r.load_gap.into(),
                    r.ratio.into(),
                ]);
            }
            run.write("lipschitz.csv", &table)?;
            let pass = result.all_finite && result.variation <= v.variation_limit;
            println!(
                "{} lipschitz: per-eps max ratio variation={:.4} limit={}",
                verdict(pass),
                result.variation,
                v.variation_limit
            );
        }
        Experiment::Unique => {
            let report = uniqueness_probe(&scenario, &v.lipschitz_eps, &cfg.solve_options())?;
            let mut table = Table::new(["epsilon", "max_gap"]);
            for &(e, g) in &report.gaps {
                table.push(vec![e.into(), g.into()]);
            }
            run.write("unique.csv", &table)?;
            let tag = match cfg.dissipation.kind {
                DissipationKindConfig::Fatigue => verdict(report.max_gap <= v.uniqueness_tolerance),
                DissipationKindConfig::WeightedL1 => "INFO",
            };
            println!(
                "{tag} unique: max integrator gap={:e} tolerance={:e} explicit substeps={}",
                report.max_gap, v.uniqueness_tolerance, report.explicit_substeps
            );
        }
        Experiment::Dual => {
            let eps = cfg.viscosity.epsilon;
            let factors = [1usize, 2, 4];
            let reports = factors
                .iter()
                .map(|&f| {
                    dual_equivalence(
                        &scenario.with_steps(scenario.n_steps * f),
                        eps,
                        &cfg.solve_options(),
                        cfg.seed,
                    )
                })
                .collect::<Result<Vec<_>, _>>()?;
            let mut table = Table::new([
                "steps",
                "primal",
                "complementarity",
                "consistency",
                "conjugate",
                "conjugate_agree",
            ]);
            for (f, r) in factors.iter().zip(&reports) {
                table.push(vec![
                    (scenario.n_steps * f).into(),
                    r.primal_residual.into(),
                    r.complementarity_residual.into(),
                    r.consistency_residual.into(),
                    r.conjugate_residual.into(),
                    r.conjugate_agree.into(),
                ]);
            }
            run.write("dual.csv", &table)?;
            let first = reports[0].consistency_residual;
            let last = reports[2].consistency_residual;
            let order = if first > 0.0 && last > 0.0 {
                (first / last).log2() / 2.0
            } else {
                f64::INFINITY
            };
            let frozen = reports.iter().map(|r| r.max_frozen_residual()).fold(0.0, f64::max);
            let agree = reports.iter().all(|r| r.conjugate_agree);
            // a history-independent threshold leaves nothing to converge
            let converged = last <= v.dual_tolerance || order >= v.dual_min_order;
            let pass = frozen <= v.dual_tolerance && agree && converged;
            println!(
                "{} dual: frozen-history residual={frozen:e} consistency order={order:.3} conjugate agree={agree}",
                verdict(pass)
            );
        }
        Experiment::History => {
            let (traj, _) = solve_with(&scenario, cfg.viscosity.epsilon, &cfg.solve_options())?;
            let result = history_lipschitz_check(&traj, &scenario, v.history_samples, cfg.seed)?;
            let mut table = Table::new(["s_index", "t_index", "slope", "bound", "excess"]);
            for r in &result.rows {
                table.push(vec![
                    r.s_index.into(),
                    r.t_index.into(),
                    r.slope.into(),
                    r.bound.into(),
                    r.excess.into(),
                ]);
            }
            run.write("history.csv", &table)?;
            let pass = result.max_excess <= v.history_tolerance;
            println!(
                "{} history: max excess={:e} tolerance={:e} skipped={}",
                verdict(pass),
                result.max_excess,
                v.history_tolerance,
                result.skipped
            );
        }
    }
    Ok(())
}

pub fn optimize(run: &Run) -> Result<(), CliError> {
    let cfg = &run.config;
    let scenario = cfg.scenario()?;
    let (problem, theta0, opts) = cfg.control(&scenario)?;
    let result = compass_search(&problem, &theta0, &opts)?;
    let dim = theta0.len();
    let mut table = Table::new(
        ["evaluation", "value", "step", "accepted", "failed", "bound_ratio"]
            .into_iter()
            .map(String::from)
            .chain((0..dim).map(|i| format!("theta{i}"))),
    );
    for e in &result.trace {
        let mut row: Vec<Cell> = vec![
            e.evaluation.into(),
            e.value.into(),
            e.step.into(),
            e.accepted.into(),
            e.failed.into(),
            e.bound_ratio.unwrap_or(f64::NAN).into(),
        ];
        row.extend(e.theta.iter().map(|&t| Cell::from(t)));
        table.push(row);
    }
    run.write("trace.csv", &table)?;
    let status = match result.status {
        SearchStatus::Converged => "converged",
        SearchStatus::BudgetExhausted => "budget exhausted",
    };
    let theta: Vec<String> = result.theta.iter().map(|t| format!("{t:.6}")).collect();
    println!(
        "optimize: {status} after {} evaluations, value={:e}, theta=[{}]",
        result.trace.len(),
        result.value,
        theta.join(", ")
    );
    Ok(())
}
