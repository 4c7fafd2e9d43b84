use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::Context;
use dgsp_core::auction::toy::{format_toy, toy_mismatches, toy_tables};
use dgsp_core::auction::Mechanism;
use dgsp_core::audit::{audit_actor, format_table, AuditRow};
use dgsp_core::net::{load_actor, save_actor, save_critic, Actor};
use dgsp_core::sim::{evaluate, EvalSpec, Evaluation, Metric, MetricWeights, World};
use dgsp_core::sweep::{pareto, transition, ParetoReport, TransitionReport};
use dgsp_core::train::{train, TrainReport};
use rayon::prelude::*;

use crate::config::{RunConfig, Section};
use crate::output::{ModelCache, OutDir};
use crate::{Cli, Command, Failure};

type Res = Result<(), Failure>;

pub fn run(cli: &Cli) -> Res {
    let cfg = RunConfig::load(cli.config.as_deref(), cli.seed)?;
    let (name, sections): (&str, &[Section]) = match &cli.command {
        Command::Table1 => ("table1", &[]),
        Command::GenWorld => ("gen-world", &[Section::World]),
        Command::Train => ("train", &[Section::World, Section::Train]),
        Command::Evaluate { .. } => ("evaluate", &[Section::World, Section::Evaluate]),
        Command::Pareto => (
            "pareto",
            &[Section::World, Section::TrainTemplate, Section::Pareto],
        ),
        Command::Transition => (
            "transition",
            &[Section::World, Section::TrainTemplate, Section::Transition],
        ),
        Command::Audit { .. } => (
            "audit",
            &[Section::World, Section::TrainTemplate, Section::Audit],
        ),
    };
    cfg.validate(sections)?;
    let resolved = cfg.to_toml();
    println!(
        "# dgsp {name}: resolved configuration (world seed {})",
        cfg.world.seed
    );
    println!("{resolved}");
    let mut out = OutDir::create(&cli.out)?;
    out.write("config.toml", resolved.as_bytes())?;
    let cache = ModelCache::new(cli.cache.clone().unwrap_or_else(|| cli.out.join("cache")));
    let result = match &cli.command {
        Command::Table1 => table1(&mut out),
        Command::GenWorld => gen_world(&cfg, &mut out),
        Command::Train => train_cmd(&cfg, &mut out),
        Command::Evaluate { models } => evaluate_cmd(&cfg, models, &mut out),
        Command::Pareto => pareto_cmd(&cfg, &cache, &mut out),
        Command::Transition => transition_cmd(&cfg, &cache, &mut out),
        Command::Audit { models } => audit_cmd(&cfg, models, &cache, &mut out),
    };
    // the manifest is written even when the golden comparison fails
    out.finish(name, &resolved)?;
    result
}

fn build_world(cfg: &RunConfig) -> Result<World, Failure> {
    Ok(World::build(cfg.world.clone())?)
}

fn table1(out: &mut OutDir) -> Res {
    let tables = toy_tables()?;
    let text = format_toy(&tables);
    print!("{text}");
    out.write("table1.txt", text.as_bytes())?;
    let bad = toy_mismatches(&tables);
    if bad.is_empty() {
        println!("table1: match");
        Ok(())
    } else {
        Err(Failure::Golden(bad))
    }
}

fn gen_world(cfg: &RunConfig, out: &mut OutDir) -> Res {
    let world = build_world(cfg)?;
    let mut csv = String::from(
        "ad_id,value_log_mean,base_ctr,cart_given_click,order_given_click,product_price,budget,category,bias_ctr,bias_acr,bias_cvr\n",
    );
    for a in &world.advertisers {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{}",
            a.id.0,
            a.value_log_mean,
            a.base_ctr,
            a.cart_given_click,
            a.order_given_click,
            a.product_price,
            a.budget,
            a.category,
            a.prediction_bias[0],
            a.prediction_bias[1],
            a.prediction_bias[2]
        );
    }
    let mut norm = String::from("metric,normalizer\n");
    for m in Metric::ALL {
        let _ = writeln!(norm, "{},{}", m.name(), world.normalizers.scale[m.index()]);
    }
    out.write("world.toml", world.config.to_toml().as_bytes())?;
    out.write("advertisers.csv", csv.as_bytes())?;
    out.write("normalizers.csv", norm.as_bytes())?;
    println!(
        "world: {} advertisers, {} slots, fingerprint {:016x}",
        world.n_advertisers(),
        world.config.slots,
        world.fingerprint()
    );
    Ok(())
}

fn train_cmd(cfg: &RunConfig, out: &mut OutDir) -> Res {
    let world = build_world(cfg)?;
    let outcome = train(&world, cfg.train.clone())?;
    save_actor(&out.path("model.actor"), &outcome.actor)?;
    out.adopt("model.actor")?;
    save_critic(&out.path("model.critic"), &outcome.critic)?;
    out.adopt("model.critic")?;
    let mut csv = Vec::new();
    outcome.report.write_csv(&mut csv)?;
    out.write("train.csv", &csv)?;
    summarize_training(&outcome.report);
    Ok(())
}

fn summarize_training(r: &TrainReport) {
    if let Some(s) = r.warm_start_sigma {
        println!("warm start: GSP sigma {s}");
    }
    let selected = r.selected_iteration.unwrap_or(0);
    let v = r
        .records
        .iter()
        .find(|rec| rec.iteration == selected)
        .and_then(|rec| rec.validation)
        .or_else(|| r.last_validation());
    if let Some(v) = v {
        println!(
            "selected iteration {selected}: validation objective {:.4}, utility ratio {:.4}, T_m {}",
            v.objective,
            v.utility_ratio,
            v.t_m.map_or("n/a".into(), |t| format!("{t:.3}"))
        );
    }
}

/// `label=path` or a bare path labelled by its file stem.
fn parse_models(specs: &[String]) -> Result<Vec<(String, PathBuf)>, Failure> {
    specs
        .iter()
        .map(|s| {
            let (label, path) = match s.split_once('=') {
                Some((l, p)) if !l.is_empty() => (l.to_string(), PathBuf::from(p)),
                _ => {
                    let p = PathBuf::from(s);
                    let stem = p
                        .file_stem()
                        .map_or_else(|| s.clone(), |x| x.to_string_lossy().into_owned());
                    (stem, p)
                }
            };
            if path.exists() {
                Ok((label, path))
            } else {
                Err(Failure::Validation(format!(
                    "model checkpoint {} does not exist",
                    path.display()
                )))
            }
        })
        .collect()
}

fn load_models(specs: &[String]) -> Result<Vec<(String, Actor)>, Failure> {
    parse_models(specs)?
        .into_iter()
        .map(|(l, p)| {
            let a = load_actor(&p).with_context(|| format!("loading {}", p.display()))?;
            Ok((l, a))
        })
        .collect()
}

fn evaluate_cmd(cfg: &RunConfig, models: &[String], out: &mut OutDir) -> Res {
    let world = build_world(cfg)?;
    let actors = load_models(models)?;
    for (label, a) in &actors {
        if a.feature_len() != world.feature_len() {
            return Err(Failure::Validation(format!(
                "model {label} expects {} features, the world has {}",
                a.feature_len(),
                world.feature_len()
            )));
        }
    }
    let e = &cfg.evaluate;
    let weights = e
        .weights
        .or(cfg.train.weights)
        .unwrap_or_else(MetricWeights::rpm_only);
    let mut spec = EvalSpec::new(e.seed, e.rounds);
    if e.sampled {
        spec = spec.sampled();
    }
    let mut mechs: Vec<(String, String, Mechanism<'_>)> = e
        .sigmas
        .iter()
        .map(|&s| {
            (
                "gsp".to_string(),
                s.to_string(),
                Mechanism::Gsp { sigma: s },
            )
        })
        .collect();
    mechs.push(("fixed".into(), String::new(), Mechanism::Fixed));
    for (label, a) in &actors {
        mechs.push(("deep_gsp".into(), label.clone(), Mechanism::DeepGsp(a)));
    }
    let evals: Vec<Evaluation> = mechs
        .par_iter()
        .map(|(_, _, m)| evaluate(&world, m, &spec))
        .collect::<dgsp_core::Result<_>>()?;
    let mut csv = String::from(
        "mechanism,param,RPM,CTR,ACR,CVR,GPM,objective,total_utility,mean_ppc,saturated\n",
    );
    println!("objective weights {}", weights.label());
    println!(
        "{:<9} {:<10} {:>7} {:>7} {:>7} {:>7} {:>7} {:>9}",
        "mechanism", "param", "RPM", "CTR", "ACR", "CVR", "GPM", "objective"
    );
    for ((kind, param, _), ev) in mechs.iter().zip(&evals) {
        let v = ev.metrics.values;
        let obj = ev.objective(&weights);
        let _ = writeln!(
            csv,
            "{kind},{param},{},{},{},{},{},{obj},{},{},{}",
            v[0],
            v[1],
            v[2],
            v[3],
            v[4],
            ev.total_utility(),
            ev.mean_payment_per_click(),
            ev.metrics.saturated
        );
        println!(
            "{kind:<9} {param:<10} {:>7.4} {:>7.4} {:>7.4} {:>7.4} {:>7.4} {obj:>9.4}",
            v[0], v[1], v[2], v[3], v[4]
        );
    }
    out.write("evaluation.csv", csv.as_bytes())?;
    Ok(())
}

fn pareto_cmd(cfg: &RunConfig, cache: &ModelCache, out: &mut OutDir) -> Res {
    let world = build_world(cfg)?;
    let report = pareto(&world, &cfg.pareto, &cfg.template(), |c| {
        cache.get_or_train(&world, c).map_err(to_core)
    })?;
    let (points, rows) = pareto_csv(&report);
    out.write("pareto_points.csv", points.as_bytes())?;
    out.write("pareto_rows.csv", rows.as_bytes())?;
    print!("{rows}");
    println!(
        "Deep GSP on or above both baseline curves at {:.0}% of the weights",
        100.0 * report.dominance_fraction()
    );
    Ok(())
}

fn pareto_csv(r: &ParetoReport) -> (String, String) {
    let mut points = format!("{}\n", ParetoReport::CSV_HEADER);
    for p in r.points() {
        let _ = writeln!(
            points,
            "{},{},{},{}",
            p.family.name(),
            p.param,
            p.other,
            p.rpm
        );
    }
    let mut rows = format!(
        "lambda,{},RPM,objective,best_baseline_objective,dominated_by_gsp,dominated_by_ugsp\n",
        r.other.name()
    );
    for row in &r.rows {
        let _ = writeln!(
            rows,
            "{},{:.6},{:.6},{:.6},{:.6},{},{}",
            row.lambda,
            row.deep.other,
            row.deep.rpm,
            row.objective,
            row.best_baseline_objective,
            row.dominated_by_gsp,
            row.dominated_by_ugsp
        );
    }
    (points, rows)
}

fn transition_cmd(cfg: &RunConfig, cache: &ModelCache, out: &mut OutDir) -> Res {
    let world = build_world(cfg)?;
    let report = transition(&world, &cfg.transition, &cfg.template(), |c| {
        cache.get_or_train(&world, c).map_err(to_core)
    })?;
    let csv = transition_csv(&report);
    out.write("transition.csv", csv.as_bytes())?;
    print!("{csv}");
    println!(
        "trend with epsilon: utility {:?}, objective {:?}",
        report.utility_trend()?,
        report.objective_trend()?
    );
    Ok(())
}

fn transition_csv(r: &TransitionReport) -> String {
    let mut csv = format!("{}\n", TransitionReport::CSV_HEADER);
    for row in &r.rows {
        let _ = writeln!(
            csv,
            "{},{:.3},{:.3}",
            row.epsilon, row.utility_pct, row.objective_pct
        );
    }
    csv
}

fn audit_cmd(cfg: &RunConfig, models: &[String], cache: &ModelCache, out: &mut OutDir) -> Res {
    let world = build_world(cfg)?;
    let actors: Vec<(String, Actor)> = if models.is_empty() {
        cfg.audit
            .configs
            .par_iter()
            .map(|w| {
                let c = dgsp_core::train::TrainConfig {
                    weights: Some(*w),
                    ..cfg.template()
                };
                Ok((w.label(), cache.get_or_train(&world, &c)?))
            })
            .collect::<anyhow::Result<_>>()?
    } else {
        load_models(models)?
    };
    let rows: Vec<AuditRow> = actors
        .par_iter()
        .map(|(label, a)| audit_actor(label, a, &world, &cfg.audit.audit))
        .collect::<dgsp_core::Result<_>>()?;
    let table = format_table(&rows);
    print!("{table}");
    let mut csv = format!("{}\n", AuditRow::CSV_HEADER);
    for r in &rows {
        csv.push_str(&r.csv_line());
        csv.push('\n');
    }
    out.write("audit.txt", table.as_bytes())?;
    out.write("audit.csv", csv.as_bytes())?;
    Ok(())
}

fn to_core(e: anyhow::Error) -> dgsp_core::Error {
    match e.downcast::<dgsp_core::Error>() {
        Ok(c) => c,
        Err(e) => dgsp_core::Error::InvalidInput(format!("{e:#}")),
    }
}
