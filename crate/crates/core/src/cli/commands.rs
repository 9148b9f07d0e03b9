use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::output::{opt, write_atomic, write_csv, write_json};
use super::spec::ExperimentSpec;
use super::PLOT_SCRIPT;
use crate::analysis::{
    accessible_distribution_in, accessible_states, certify_family, default_reference_theta,
    js_divergence, verify_return_bound, verify_value_discrepancy, CertifyOptions,
    DiscrepancyReport, FamilyCertificate,
};
use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::lavaworld::{LavaWorld, ACTION_NAMES};
use crate::mdp::{occupancy, optimal_policy, HipMdp, StateDistribution, StateId, TabularPolicy};
use crate::train::{
    evaluate_per_theta, exact_per_theta, train, EvalMode, TrainOutcome, TrainerConfig,
};

/// How a command ended when it did not error.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// A certificate was infeasible or a bound was violated.
    VerificationFailed(String),
}

/// Progress and summary printer honouring `--quiet`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Console {
    pub quiet: bool,
}

impl Console {
    pub fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }
}

struct Family {
    world: LavaWorld,
    mdp: HipMdp,
}

impl Family {
    fn load(spec: &ExperimentSpec) -> Result<Self> {
        let world = LavaWorld::new(spec.lava_layout()?)?;
        let mdp = world.build_hipmdp()?;
        Ok(Self { world, mdp })
    }

    fn theta_labels(&self) -> Vec<String> {
        self.mdp.thetas().iter().map(|t| t.label.clone()).collect()
    }

    /// `state,label,row,col,lava_adjacent`.
    fn state_cells(&self, s: usize) -> Result<Vec<String>> {
        let g = self.world.decode(StateId(s))?;
        Ok(vec![
            s.to_string(),
            self.mdp.state_label(StateId(s)),
            g.row.to_string(),
            g.col.to_string(),
            u8::from(g.lava_adjacent).to_string(),
        ])
    }
}

const STATE_HEADER: [&str; 5] = ["state", "label", "row", "col", "lava_adjacent"];

fn header(fixed: &[&str], per: impl IntoIterator<Item = String>) -> Vec<String> {
    fixed.iter().map(|s| s.to_string()).chain(per).collect()
}

fn subdir(spec: &ExperimentSpec, name: &str) -> PathBuf {
    spec.out.join(name)
}

/// Accessible set, per-θ optimal values and policies, occupancies, accessible
/// distributions and the pairwise divergence matrices.
pub fn cmd_analyze(spec: &ExperimentSpec, console: Console) -> Result<Outcome> {
    let fam = Family::load(spec)?;
    let (mdp, labels) = (&fam.mdp, fam.theta_labels());
    let dir = subdir(spec, "analyze");
    let set = accessible_states(mdp);
    let ns = mdp.num_states();

    write_csv(&dir.join("accessible_states.csv"), |w| {
        w.write_record(header(
            &STATE_HEADER,
            ["accessible".into()]
                .into_iter()
                .chain(labels.iter().map(|l| format!("reachable_{l}"))),
        ))?;
        for s in 0..ns {
            let mut row = fam.state_cells(s)?;
            row.push(u8::from(set.contains(StateId(s))).to_string());
            for reach in &set.per_theta_reachable {
                row.push(u8::from(reach.contains(&StateId(s))).to_string());
            }
            w.write_record(&row)?;
        }
        Ok(())
    })?;

    let tol = Tolerances::DEFAULT.bellman;
    let optimal = (0..mdp.num_thetas())
        .into_par_iter()
        .map(|t| optimal_policy(mdp, t, tol))
        .collect::<Result<Vec<_>>>()?;
    let start = fam.world.start_state();
    for (t, (_, v)) in optimal.iter().enumerate() {
        console.say(format!(
            "V*(start) under {} = {:.6}",
            labels[t], v.v[start.0]
        ));
    }
    console.say(format!("states {ns}, globally accessible {}", set.len()));

    if spec.analysis.values {
        write_csv(&dir.join("optimal_values.csv"), |w| {
            let per = labels
                .iter()
                .map(|l| format!("v_{l}"))
                .chain(labels.iter().map(|l| format!("action_{l}")));
            w.write_record(header(&STATE_HEADER, per))?;
            for s in 0..ns {
                let mut row = fam.state_cells(s)?;
                row.extend(optimal.iter().map(|(_, v)| v.v[s].to_string()));
                row.extend(
                    optimal
                        .iter()
                        .map(|(pi, _)| ACTION_NAMES[pi.greedy_action(StateId(s)).0].to_string()),
                );
                w.write_record(&row)?;
            }
            Ok(())
        })?;
        let policies: Vec<(&String, &TabularPolicy)> =
            labels.iter().zip(optimal.iter().map(|(p, _)| p)).collect();
        write_json(&dir.join("optimal_policies.json"), &policies)?;
    }

    if spec.analysis.occupancy || spec.analysis.js {
        let occ = optimal
            .iter()
            .enumerate()
            .map(|(t, (pi, _))| occupancy(mdp, t, pi))
            .collect::<Result<Vec<_>>>()?;
        let acc = optimal
            .iter()
            .enumerate()
            .map(
                |(t, (pi, _))| match accessible_distribution_in(mdp, t, pi, &set) {
                    Ok(d) => Ok(Some(d)),
                    Err(Error::DegenerateSupport) => Ok(None),
                    Err(e) => Err(e),
                },
            )
            .collect::<Result<Vec<_>>>()?;
        if spec.analysis.occupancy {
            write_occupancy(&fam, &dir.join("occupancy.csv"), &labels, &occ, &acc)?;
        }
        if spec.analysis.js {
            write_js_matrix(
                &dir.join("js_occupancy.csv"),
                &labels,
                &occ.iter().map(Some).collect::<Vec<_>>(),
            )?;
            write_js_matrix(
                &dir.join("js_accessible.csv"),
                &labels,
                &acc.iter().map(Option::as_ref).collect::<Vec<_>>(),
            )?;
        }
    }
    console.say(format!("wrote {}", dir.display()));
    Ok(Outcome::Success)
}

fn write_occupancy(
    fam: &Family,
    path: &Path,
    labels: &[String],
    occ: &[StateDistribution],
    acc: &[Option<StateDistribution>],
) -> Result<()> {
    write_csv(path, |w| {
        let per = labels
            .iter()
            .map(|l| format!("d_{l}"))
            .chain(labels.iter().map(|l| format!("accessible_{l}")));
        w.write_record(header(&STATE_HEADER, per))?;
        for s in 0..fam.mdp.num_states() {
            let mut row = fam.state_cells(s)?;
            row.extend(occ.iter().map(|d| d.get(StateId(s)).to_string()));
            row.extend(
                acc.iter()
                    .map(|d| opt(d.as_ref().map(|d| d.get(StateId(s))))),
            );
            w.write_record(&row)?;
        }
        Ok(())
    })
}

fn write_js_matrix(
    path: &Path,
    labels: &[String],
    dists: &[Option<&StateDistribution>],
) -> Result<()> {
    write_csv(path, |w| {
        w.write_record(header(&["theta"], labels.iter().cloned()))?;
        for (i, p) in dists.iter().enumerate() {
            let mut row = vec![labels[i].clone()];
            for q in dists {
                row.push(match (p, q) {
                    (Some(p), Some(q)) => js_divergence(p, q)?.to_string(),
                    _ => String::new(),
                });
            }
            w.write_record(&row)?;
        }
        Ok(())
    })
}

/// Certifies every ordered pair and checks the value-discrepancy bound on
/// the feasible ones.
pub fn cmd_certify(spec: &ExperimentSpec, console: Console) -> Result<Outcome> {
    let fam = Family::load(spec)?;
    let (mdp, labels) = (&fam.mdp, fam.theta_labels());
    let dir = subdir(spec, "certify");
    let family = certify_family(mdp, &CertifyOptions::with_m_max(spec.m_max))?;
    write_json(&dir.join("certificates.json"), &family)?;

    let checks = family
        .pairs
        .iter()
        .map(|c| match c.feasible {
            true => verify_value_discrepancy(mdp, c.theta1, c.theta2, c).map(Some),
            false => Ok(None),
        })
        .collect::<Result<Vec<Option<DiscrepancyReport>>>>()?;

    write_csv(&dir.join("summary.csv"), |w| {
        w.write_record([
            "theta1",
            "theta2",
            "label1",
            "label2",
            "m",
            "r_s",
            "feasible",
            "covered",
            "uncovered",
            "value_gap",
            "value_gap_bound",
            "value_gap_holds",
        ])?;
        for (c, chk) in family.pairs.iter().zip(&checks) {
            w.write_record([
                c.theta1.to_string(),
                c.theta2.to_string(),
                labels[c.theta1].clone(),
                labels[c.theta2].clone(),
                c.m.to_string(),
                c.r_s.to_string(),
                c.feasible.to_string(),
                c.witnesses.len().to_string(),
                c.uncovered.len().to_string(),
                opt(chk.as_ref().map(|r| r.measured)),
                opt(chk.as_ref().map(|r| r.bound)),
                chk.as_ref()
                    .map(|r| r.holds.to_string())
                    .unwrap_or_default(),
            ])?;
        }
        Ok(())
    })?;

    for c in &family.pairs {
        console.say(format!(
            "{} -> {}: m={} r_s={:.6} feasible={} uncovered={}",
            labels[c.theta1],
            labels[c.theta2],
            c.m,
            c.r_s,
            c.feasible,
            c.uncovered.len()
        ));
    }
    console.say(format!(
        "family: m={} r_s={:.6} feasible={}",
        family.m, family.r_s, family.feasible
    ));

    if !family.feasible {
        let n: usize = family.pairs.iter().map(|c| c.uncovered.len()).sum();
        return Ok(Outcome::VerificationFailed(format!(
            "certificate infeasible: {n} transitions have no detour within {} steps",
            spec.m_max
        )));
    }
    let violated = checks.iter().flatten().filter(|r| !r.holds).count();
    if violated > 0 {
        return Ok(Outcome::VerificationFailed(format!(
            "value-discrepancy bound violated on {violated} pairs"
        )));
    }
    Ok(Outcome::Success)
}

/// One finished training run.
pub struct Run {
    pub label: String,
    pub seed: u64,
    pub outcome: TrainOutcome,
}

/// Trains every configuration on every seed, in parallel, results in
/// (configuration, seed) order.
pub fn run_all(
    mdp: &HipMdp,
    trainers: &[(String, TrainerConfig)],
    seeds: &[u64],
) -> Result<Vec<Run>> {
    let jobs: Vec<(&String, &TrainerConfig, u64)> = trainers
        .iter()
        .flat_map(|(l, c)| seeds.iter().map(move |&s| (l, c, s)))
        .collect();
    jobs.into_par_iter()
        .map(|(label, cfg, seed)| {
            let cfg = TrainerConfig {
                seed,
                ..cfg.clone()
            };
            Ok(Run {
                label: label.clone(),
                seed,
                outcome: train(mdp, &cfg)?,
            })
        })
        .collect()
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn mean_opt(xs: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = xs.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn policy_file(dir: &Path, label: &str, seed: u64) -> PathBuf {
    dir.join(format!("policy_{label}_seed{seed}.json"))
}

/// Trains the configured algorithms across seeds and writes learning curves,
/// per-θ final returns, discriminator diagnostics, policies and a plot script.
pub fn cmd_train(spec: &ExperimentSpec, console: Console) -> Result<Outcome> {
    let fam = Family::load(spec)?;
    let (mdp, labels) = (&fam.mdp, fam.theta_labels());
    let dir = subdir(spec, "train");
    let trainers: Vec<(String, TrainerConfig)> = spec
        .trainer_labels()
        .into_iter()
        .zip(spec.trainers.iter().cloned())
        .collect();
    let runs = run_all(mdp, &trainers, &spec.seeds)?;

    for (label, _) in &trainers {
        let group: Vec<&Run> = runs.iter().filter(|r| &r.label == label).collect();
        write_curves(&dir.join(format!("curves_{label}.csv")), &group)?;
        write_discriminator(
            &fam,
            &dir.join(format!("discriminator_{label}.csv")),
            &group,
        )?;
        for r in &group {
            write_json(&policy_file(&dir, label, r.seed), &r.outcome.policy)?;
            write_json(
                &dir.join(format!("report_{label}_seed{}.json", r.seed)),
                &r.outcome.report,
            )?;
        }
    }

    write_csv(&dir.join("eval_per_theta.csv"), |w| {
        w.write_record(header(
            &["algorithm", "seed", "diverged"],
            labels.iter().cloned().chain(["mean".to_string()]),
        ))?;
        for r in &runs {
            let rep = &r.outcome.report;
            let mut row = vec![
                r.label.clone(),
                r.seed.to_string(),
                rep.diverged.to_string(),
            ];
            row.extend(rep.final_per_theta.iter().map(f64::to_string));
            row.push(rep.final_mean_return.to_string());
            w.write_record(&row)?;
        }
        Ok(())
    })?;

    write_csv(&dir.join("eval_summary.csv"), |w| {
        w.write_record(["algorithm", "theta", "mean", "std", "min", "max"])?;
        for (label, _) in &trainers {
            let group: Vec<&Run> = runs.iter().filter(|r| &r.label == label).collect();
            let columns = labels
                .iter()
                .enumerate()
                .map(|(t, l)| (l.clone(), Some(t)))
                .chain([("mean".to_string(), None)]);
            for (name, t) in columns {
                let xs: Vec<f64> = group
                    .iter()
                    .map(|r| {
                        t.map_or(r.outcome.report.final_mean_return, |t| {
                            r.outcome.report.final_per_theta[t]
                        })
                    })
                    .collect();
                let (m, sd) = mean_std(&xs);
                let (lo, hi) = xs
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
                        (a.min(x), b.max(x))
                    });
                w.write_record([
                    label.clone(),
                    name,
                    m.to_string(),
                    sd.to_string(),
                    lo.to_string(),
                    hi.to_string(),
                ])?;
            }
            let (m, _) = mean_std(
                &group
                    .iter()
                    .map(|r| r.outcome.report.final_mean_return)
                    .collect::<Vec<_>>(),
            );
            console.say(format!(
                "{label}: mean final return {m:.4} over {} seeds",
                group.len()
            ));
        }
        Ok(())
    })?;

    write_atomic(&spec.out.join("plot.py"), PLOT_SCRIPT.as_bytes())?;
    console.say(format!("wrote {}", dir.display()));
    Ok(Outcome::Success)
}

fn write_curves(path: &Path, group: &[&Run]) -> Result<()> {
    write_csv(path, |w| {
        let per = group.iter().map(|r| format!("return_seed{}", r.seed));
        w.write_record(header(
            &[
                "iteration",
                "mean_return",
                "std_return",
                "mean_length",
                "mean_augmented_reward",
                "mean_bonus",
                "discriminator_loss",
                "positive_fraction",
            ],
            per,
        ))?;
        let iterations = group
            .first()
            .map_or(0, |r| r.outcome.report.iterations.len());
        for i in 0..iterations {
            let its: Vec<_> = group
                .iter()
                .map(|r| &r.outcome.report.iterations[i])
                .collect();
            let returns: Vec<f64> = its.iter().map(|s| s.mean_return).collect();
            let (m, sd) = mean_std(&returns);
            let avg = |f: &dyn Fn(&crate::train::IterationStats) -> f64| {
                its.iter().map(|s| f(s)).sum::<f64>() / its.len() as f64
            };
            let mut row = vec![
                i.to_string(),
                m.to_string(),
                sd.to_string(),
                avg(&|s| s.mean_length).to_string(),
                avg(&|s| s.mean_augmented_reward).to_string(),
                avg(&|s| s.mean_bonus).to_string(),
                opt(mean_opt(its.iter().map(|s| s.discriminator_loss))),
                opt(mean_opt(its.iter().map(|s| s.positive_fraction))),
            ];
            row.extend(returns.iter().map(f64::to_string));
            w.write_record(&row)?;
        }
        Ok(())
    })
}

fn write_discriminator(fam: &Family, path: &Path, group: &[&Run]) -> Result<()> {
    use crate::asor::CountSource;
    write_csv(path, |w| {
        w.write_record(header(
            &["seed"],
            STATE_HEADER.iter().map(|s| s.to_string()).chain(
                [
                    "exact_count",
                    "hashed_count",
                    "n_p",
                    "n_q",
                    "omega",
                    "log_omega",
                ]
                .map(String::from),
            ),
        ))?;
        for r in group {
            let disc = r.outcome.discriminator.as_ref();
            for s in 0..fam.mdp.num_states() {
                let id = StateId(s);
                let mut row = vec![r.seed.to_string()];
                row.extend(fam.state_cells(s)?);
                row.push(r.outcome.visits.count(id, CountSource::Exact).to_string());
                row.push(r.outcome.visits.count(id, CountSource::Hashed).to_string());
                row.push(opt(disc.map(|d| d.n_p[s])));
                row.push(opt(disc.map(|d| d.n_q[s])));
                row.push(opt(disc.map(|d| d.omega(id))));
                row.push(opt(disc.map(|d| d.log_omega(id))));
                w.write_record(&row)?;
            }
        }
        Ok(())
    })
}

/// Re-evaluates the policies written by `train`: exact stochastic and greedy
/// returns plus a seeded Monte-Carlo estimate.
pub fn cmd_eval(spec: &ExperimentSpec, console: Console) -> Result<Outcome> {
    let fam = Family::load(spec)?;
    let (mdp, labels) = (&fam.mdp, fam.theta_labels());
    let train_dir = subdir(spec, "train");
    let mut rows = Vec::new();
    for (label, cfg) in spec.trainer_labels().iter().zip(&spec.trainers) {
        for &seed in &spec.seeds {
            let path = policy_file(&train_dir, label, seed);
            let text = std::fs::read_to_string(&path).map_err(|e| {
                Error::Config(format!(
                    "cannot read {} ({e}); run `train` with the same spec first",
                    path.display()
                ))
            })?;
            let pi: TabularPolicy = serde_json::from_str(&text)?;
            mdp.check_policy(&pi)?;
            let stoch = exact_per_theta(mdp, &pi, cfg.horizon_cap, EvalMode::Stochastic)?;
            let greedy = exact_per_theta(mdp, &pi, cfg.horizon_cap, EvalMode::Greedy)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mc = evaluate_per_theta(
                mdp,
                &pi,
                spec.eval_episodes,
                cfg.horizon_cap,
                EvalMode::Stochastic,
                &mut rng,
            )?;
            for t in 0..mdp.num_thetas() {
                rows.push([
                    label.clone(),
                    seed.to_string(),
                    labels[t].clone(),
                    stoch[t].to_string(),
                    greedy[t].to_string(),
                    mc[t].to_string(),
                ]);
            }
        }
    }
    let path = subdir(spec, "eval").join("eval_per_theta.csv");
    write_csv(&path, |w| {
        w.write_record([
            "algorithm",
            "seed",
            "theta",
            "exact_stochastic",
            "exact_greedy",
            "monte_carlo",
        ])?;
        rows.iter().try_for_each(|r| w.write_record(r))?;
        Ok(())
    })?;
    console.say(format!(
        "evaluated {} policies, wrote {}",
        rows.len() / mdp.num_thetas().max(1),
        path.display()
    ));
    Ok(Outcome::Success)
}

/// Softmax policy with independent standard-normal logits scaled by `temperature`.
pub fn random_policy(
    num_states: usize,
    num_actions: usize,
    temperature: f64,
    rng: &mut ChaCha8Rng,
) -> TabularPolicy {
    let logits: Vec<f64> = (0..num_states * num_actions)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            temperature * z
        })
        .collect();
    TabularPolicy::softmax(num_states, num_actions, &logits)
}

/// Checks the return lower bound on random, optimal and previously trained
/// policies.
pub fn cmd_verify_bounds(spec: &ExperimentSpec, console: Console) -> Result<Outcome> {
    let fam = Family::load(spec)?;
    let (mdp, labels) = (&fam.mdp, fam.theta_labels());
    let dir = subdir(spec, "bounds");
    let family = certify_family(mdp, &CertifyOptions::with_m_max(spec.m_max))?;
    if !family.feasible {
        write_json(&dir.join("certificates.json"), &family)?;
        let err = family.require_feasible().expect_err("infeasible family");
        return Ok(Outcome::VerificationFailed(format!(
            "cannot evaluate the bound: {err}"
        )));
    }
    let reference = default_reference_theta(mdp)?;

    let mut policies: Vec<(String, TabularPolicy)> = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.policy_seed);
    for i in 0..spec.policy_samples {
        policies.push((
            format!("random{i}"),
            random_policy(mdp.num_states(), mdp.num_actions(), 2.0, &mut rng),
        ));
    }
    for (t, label) in labels.iter().enumerate() {
        policies.push((
            format!("optimal_{label}"),
            optimal_policy(mdp, t, Tolerances::DEFAULT.bellman)?.0,
        ));
    }
    let train_dir = subdir(spec, "train");
    for label in spec.trainer_labels() {
        for &seed in &spec.seeds {
            if let Ok(text) = std::fs::read_to_string(policy_file(&train_dir, &label, seed)) {
                policies.push((format!("{label}_seed{seed}"), serde_json::from_str(&text)?));
            }
        }
    }
    let reports = bound_reports(mdp, &policies, reference, &family)?;

    write_csv(&dir.join("bounds.csv"), |w| {
        w.write_record([
            "policy",
            "eta_hat",
            "eta_star_max",
            "epsilon",
            "r_s",
            "bound",
            "slack",
            "holds",
        ])?;
        for ((name, _), r) in policies.iter().zip(&reports) {
            w.write_record([
                name.clone(),
                r.eta_hat.to_string(),
                r.eta_star_max.to_string(),
                r.epsilon.to_string(),
                r.r_s.to_string(),
                r.bound_value.to_string(),
                r.slack().to_string(),
                r.holds.to_string(),
            ])?;
        }
        Ok(())
    })?;
    let violations = reports.iter().filter(|r| !r.holds).count();
    console.say(format!(
        "{} policies checked against reference {}, {violations} violations",
        reports.len(),
        labels[reference]
    ));
    if violations > 0 {
        return Ok(Outcome::VerificationFailed(format!(
            "return bound violated by {violations} policies"
        )));
    }
    Ok(Outcome::Success)
}

fn bound_reports(
    mdp: &HipMdp,
    policies: &[(String, TabularPolicy)],
    reference: usize,
    family: &FamilyCertificate,
) -> Result<Vec<crate::analysis::BoundReport>> {
    policies
        .par_iter()
        .map(|(_, pi)| verify_return_bound(mdp, pi, reference, family))
        .collect()
}

/// λ sweep of the first `ppo_asor` configuration (or the default one), plus
/// the same settings with the count filter and with the value filter off.
pub fn cmd_ablate(spec: &ExperimentSpec, console: Console) -> Result<Outcome> {
    use crate::train::Algorithm;
    let fam = Family::load(spec)?;
    let (mdp, labels) = (&fam.mdp, fam.theta_labels());
    let base = spec
        .trainers
        .iter()
        .find(|t| t.algorithm == Algorithm::PpoAsor)
        .cloned()
        .unwrap_or(TrainerConfig {
            algorithm: Algorithm::PpoAsor,
            ..Default::default()
        });

    let mut variants: Vec<(String, TrainerConfig)> = spec
        .ablation_lambdas
        .iter()
        .map(|&l| {
            let mut c = base.clone();
            c.partition.lambda_aug = l;
            (format!("lambda={l}"), c)
        })
        .collect();
    variants.push((
        "no_count_filter".into(),
        TrainerConfig {
            algorithm: Algorithm::PpoSrpoStyle,
            ..base.clone()
        },
    ));
    let mut value_off = base.clone();
    value_off.partition.rho1 = 1.0;
    variants.push(("no_value_filter".into(), value_off));
    variants.iter().try_for_each(|(_, c)| c.validate())?;

    let runs = run_all(mdp, &variants, &spec.seeds)?;
    let last = mdp.num_thetas() - 1;
    let mut rows = Vec::new();
    for (name, cfg) in &variants {
        let group: Vec<&Run> = runs.iter().filter(|r| &r.label == name).collect();
        let (m, sd) = mean_std(
            &group
                .iter()
                .map(|r| r.outcome.report.final_mean_return)
                .collect::<Vec<_>>(),
        );
        let per: Vec<f64> = (0..mdp.num_thetas())
            .map(|t| {
                mean_std(
                    &group
                        .iter()
                        .map(|r| r.outcome.report.final_per_theta[t])
                        .collect::<Vec<_>>(),
                )
                .0
            })
            .collect();
        console.say(format!(
            "{name}: mean {m:.4} ± {sd:.4}, {} {:.4}",
            labels[last], per[last]
        ));
        rows.push((name.clone(), cfg.clone(), m, sd, per));
    }
    let sweep: Vec<f64> = rows
        .iter()
        .take(spec.ablation_lambdas.len())
        .map(|r| r.2)
        .collect();
    let monotone = sweep.windows(2).all(|w| w[1] >= w[0]);
    console.say(format!("mean return non-decreasing in lambda: {monotone}"));

    write_csv(&subdir(spec, "ablate").join("ablation.csv"), |w| {
        w.write_record(header(
            &[
                "variant",
                "algorithm",
                "lambda",
                "rho1",
                "rho2",
                "mean_return",
                "std_return",
            ],
            labels.iter().cloned(),
        ))?;
        for (name, cfg, m, sd, per) in &rows {
            let p = cfg.effective_partition();
            let mut row = vec![
                name.clone(),
                cfg.algorithm.name().to_string(),
                p.lambda_aug.to_string(),
                p.rho1.to_string(),
                p.rho2.to_string(),
                m.to_string(),
                sd.to_string(),
            ];
            row.extend(per.iter().map(f64::to_string));
            w.write_record(&row)?;
        }
        Ok(())
    })?;
    Ok(Outcome::Success)
}
