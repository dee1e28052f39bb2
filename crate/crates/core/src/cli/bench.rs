use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::manifest::{ensure_dir, write_json, RunManifest};
use super::{BenchArgs, Context, Outcome};
use crate::codebook::Metric;
use crate::error::{Error, Result};
use crate::neighbor::reference::naive_neighbor_probs;
use crate::neighbor::{probs_from_distances, topk_from_distances, Temperature};
use crate::rng::SplitMix64;
use crate::verify::random_codebook;

/// Codebook storage cap: 2^28 f32 values (1 GiB).
const MAX_CODEBOOK_VALUES: usize = 1 << 28;
const MAX_LATENTS: usize = 1 << 16;
const NAIVE_LATENTS: usize = 8;

#[derive(Debug, Serialize)]
struct BenchReport {
    k: usize,
    d: usize,
    l: usize,
    topk: Option<usize>,
    tau: f64,
    threads: usize,
    dense_seconds: f64,
    dense_latents_per_sec: f64,
    dense_probs_per_sec: f64,
    topk_seconds: Option<f64>,
    topk_latents_per_sec: Option<f64>,
    max_dense_sum_deviation: f64,
    max_topk_sum_deviation: Option<f64>,
    naive_checked_latents: usize,
    max_naive_deviation: f64,
}

fn check_size(args: &BenchArgs) -> Result<()> {
    if args.k < 2 || args.d == 0 || args.l == 0 {
        return Err(Error::invalid("bench", "need K >= 2, D >= 1 and L >= 1"));
    }
    if args.k.checked_mul(args.d).is_none_or(|n| n > MAX_CODEBOOK_VALUES) {
        return Err(Error::invalid(
            "bench",
            format!("K*D = {}*{} exceeds the {MAX_CODEBOOK_VALUES}-value limit", args.k, args.d),
        ));
    }
    if args.l > MAX_LATENTS {
        return Err(Error::invalid("bench", format!("L = {} exceeds {MAX_LATENTS}", args.l)));
    }
    if let Some(m) = args.topk {
        if m == 0 || m > args.k {
            return Err(Error::invalid("--topk", format!("must lie in 1..={}", args.k)));
        }
    }
    Ok(())
}

pub(crate) fn run(ctx: &Context, args: &BenchArgs) -> Result<Outcome> {
    check_size(args)?;
    let temp = Temperature::new(args.tau)?;
    let mut manifest = RunManifest::start(
        "bench",
        &serde_json::json!({"k": args.k, "d": args.d, "l": args.l, "topk": args.topk, "tau": args.tau}),
        ctx.seed,
    );
    let mut rng = SplitMix64::from_stream(ctx.seed, "bench.codebook");
    let cb = random_codebook(&mut rng, args.k, args.d, Metric::L2Squared);
    let mut rng = SplitMix64::from_stream(ctx.seed, "bench.latents");
    let latents: Vec<Vec<f64>> = (0..args.l)
        .map(|_| (0..args.d).map(|_| rng.standard_normal()).collect())
        .collect();

    let timer = Instant::now();
    let max_dense_sum_deviation = latents
        .par_iter()
        .map(|z| -> Result<f64> {
            let q = probs_from_distances(&cb.distances(z)?, temp)?;
            Ok((q.iter().sum::<f64>() - 1.0).abs())
        })
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))?;
    let dense_seconds = timer.elapsed().as_secs_f64();

    let (topk_seconds, max_topk_sum_deviation) = match args.topk {
        Some(m) => {
            let timer = Instant::now();
            let dev = latents
                .par_iter()
                .map(|z| -> Result<f64> {
                    let q = topk_from_distances(&cb.distances(z)?, temp, m)?;
                    Ok((q.total() - 1.0).abs())
                })
                .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))?;
            (Some(timer.elapsed().as_secs_f64()), Some(dev))
        }
        None => (None, None),
    };

    let naive_checked_latents = args.l.min(NAIVE_LATENTS);
    let mut max_naive_deviation = 0.0f64;
    for z in &latents[..naive_checked_latents] {
        let d = cb.distances(z)?;
        let fast = probs_from_distances(&d, temp)?;
        let slow = naive_neighbor_probs(&d, temp);
        for (a, b) in fast.iter().zip(&slow) {
            max_naive_deviation = max_naive_deviation.max((a - b).abs());
        }
    }

    let report = BenchReport {
        k: args.k,
        d: args.d,
        l: args.l,
        topk: args.topk,
        tau: args.tau,
        threads: rayon::current_num_threads(),
        dense_seconds,
        dense_latents_per_sec: args.l as f64 / dense_seconds,
        dense_probs_per_sec: (args.l * args.k) as f64 / dense_seconds,
        topk_seconds,
        topk_latents_per_sec: topk_seconds.map(|s| args.l as f64 / s),
        max_dense_sum_deviation,
        max_topk_sum_deviation,
        naive_checked_latents,
        max_naive_deviation,
    };
    if ctx.json {
        emit!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        emit!("{}", serde_json::to_string(&report)?);
    }
    if let Some(dir) = &ctx.out {
        ensure_dir(dir)?;
        write_json(dir, "bench.json", &report, &mut manifest)?;
    }
    manifest.finish(ctx.out.as_deref())?;

    let mut failures = Vec::new();
    if max_naive_deviation.is_nan() || max_naive_deviation >= 1e-6 {
        failures.push(format!("naive reference deviation {max_naive_deviation:.3e}"));
    }
    if max_dense_sum_deviation.is_nan() || max_dense_sum_deviation >= 1e-6 {
        failures.push(format!("dense normalization {max_dense_sum_deviation:.3e}"));
    }
    if let Some(dev) = max_topk_sum_deviation {
        if dev.is_nan() || dev > 1e-9 {
            failures.push(format!("top-M normalization {dev:.3e}"));
        }
    }
    Ok(if failures.is_empty() {
        Outcome::Ok
    } else {
        Outcome::Failed(failures)
    })
}
