use std::path::PathBuf;

use super::config::ExperimentConfig;
use super::manifest::{ensure_dir, write_csv, write_json, RunManifest};
use super::{Context, Outcome, ToyArgs};
use crate::error::Result;
use crate::toy::{compare_objectives, Comparison, GridSpec};

/// Seeds from `--seeds`, then `--seed`, then the config file.
fn resolve_config(ctx: &Context, args: &ToyArgs) -> Result<ExperimentConfig> {
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seeds) = &args.seeds {
        config.seeds = seeds.clone();
    } else if ctx.seed_given {
        config.seeds = vec![ctx.seed];
    }
    if let Some(steps) = args.steps {
        config.toy.steps = steps;
    }
    config.validate()?;
    Ok(config)
}

fn grid_rows(
    w: &mut csv::Writer<std::fs::File>,
    grid: &GridSpec,
    probs: &[f64],
) -> csv::Result<()> {
    let axis = grid.axis().expect("validated grid");
    let n = grid.n_per_axis;
    w.write_record(["token", "x", "y", "probability"])?;
    for (k, p) in probs.iter().enumerate() {
        w.write_record([
            k.to_string(),
            axis[k % n].to_string(),
            axis[k / n].to_string(),
            p.to_string(),
        ])?;
    }
    Ok(())
}

fn summary_rows(w: &mut csv::Writer<std::fs::File>, cmp: &Comparison) -> csv::Result<()> {
    w.write_record([
        "label",
        "seed",
        "kl_to_truth",
        "tv_to_truth",
        "support_size",
        "empirical_fit_mass",
        "distinct_training_tokens",
        "final_loss",
        "point_to_data_mean",
    ])?;
    for r in &cmp.runs {
        let m = &r.report.metrics;
        w.write_record([
            r.label.clone(),
            r.seed.to_string(),
            m.kl_to_truth.to_string(),
            m.tv_to_truth.to_string(),
            m.support_size_at_threshold.to_string(),
            m.empirical_fit_mass.to_string(),
            m.distinct_training_tokens.to_string(),
            r.report.final_loss.to_string(),
            m.point_to_data_mean.map(|d| d.to_string()).unwrap_or_default(),
        ])?;
    }
    for a in &cmp.aggregates {
        w.write_record([
            a.label.clone(),
            "mean".into(),
            a.mean_kl_to_truth.to_string(),
            a.mean_tv_to_truth.to_string(),
            a.mean_support_size.to_string(),
            a.mean_empirical_fit_mass.to_string(),
            String::new(),
            a.mean_final_loss.to_string(),
            String::new(),
        ])?;
    }
    Ok(())
}

pub(crate) fn run(ctx: &Context, args: &ToyArgs) -> Result<Outcome> {
    let config = resolve_config(ctx, args)?;
    let out = ctx.out.clone().unwrap_or_else(|| PathBuf::from("runs/toy"));
    let mut manifest = RunManifest::start("toy", &config, config.seeds[0]);
    ensure_dir(&out)?;
    write_json(&out, "config.json", &config, &mut manifest)?;

    let cmp = compare_objectives(&config.toy, &config.seeds, &config.sweep())?;
    let grid = &config.toy.grid;
    for r in &cmp.runs {
        let dir = format!("{}/seed{}", r.label, r.seed);
        write_json(&out, &format!("{dir}/report.json"), &r.report, &mut manifest)?;
        write_csv(&out, &format!("{dir}/learned_grid.csv"), &mut manifest, |w| {
            grid_rows(w, grid, &r.report.learned_distribution)
        })?;
    }
    write_csv(&out, "truth_grid.csv", &mut manifest, |w| grid_rows(w, grid, &cmp.truth))?;
    write_csv(&out, "summary.csv", &mut manifest, |w| summary_rows(w, &cmp))?;

    if ctx.json {
        emit!("{}", serde_json::to_string_pretty(&cmp.aggregates)?);
    } else {
        emit!(
            "{:<14} {:>5} {:>12} {:>10} {:>10} {:>10}",
            "objective", "runs", "kl_to_truth", "tv", "support", "fit_mass"
        );
        for a in &cmp.aggregates {
            emit!(
                "{:<14} {:>5} {:>12.4} {:>10.4} {:>10.1} {:>10.4}",
                a.label,
                a.runs,
                a.mean_kl_to_truth,
                a.mean_tv_to_truth,
                a.mean_support_size,
                a.mean_empirical_fit_mass
            );
        }
    }
    manifest.finish(Some(&out))?;
    Ok(Outcome::Ok)
}
