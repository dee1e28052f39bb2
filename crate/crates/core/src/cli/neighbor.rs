use serde::Serialize;

use super::manifest::{ensure_dir, write_csv, RunManifest};
use super::{Context, NeighborArgs, Outcome};
use crate::codebook::{grid_codebook, load_codebook, Codebook};
use crate::error::{Error, Result};
use crate::neighbor::{
    probs_from_distances, topk_from_distances, NeighborDistribution, Temperature, DEFAULT_TAU,
};

#[derive(Serialize)]
struct Line {
    rank: usize,
    token: usize,
    probability: f64,
    distance: f64,
}

fn codebook(args: &NeighborArgs) -> Result<Codebook> {
    if let Some(path) = &args.codebook {
        return load_codebook(path);
    }
    match args.grid.as_deref() {
        None => grid_codebook(-5.0, 5.0, 50),
        Some(&[lo, hi, n]) => {
            if n.fract() != 0.0 || n < 1.0 {
                return Err(Error::invalid("--grid", format!("n must be a positive integer, got {n}")));
            }
            grid_codebook(lo, hi, n as usize)
        }
        Some(other) => Err(Error::invalid(
            "--grid",
            format!("expected lo,hi,n, got {} values", other.len()),
        )),
    }
}

fn temperature(args: &NeighborArgs) -> Result<Temperature> {
    match (args.tau, args.two_tau_sq) {
        (_, Some(s)) => Temperature::from_two_tau_sq(s),
        (Some(t), None) => Temperature::new(t),
        (None, None) => Temperature::new(DEFAULT_TAU),
    }
}

pub(crate) fn run(ctx: &Context, args: &NeighborArgs) -> Result<Outcome> {
    let cb = codebook(args)?;
    let temp = temperature(args)?;
    let mut manifest = RunManifest::start(
        "neighbor",
        &serde_json::json!({
            "codebook": args.codebook,
            "grid": args.grid,
            "z": args.z,
            "tau": temp.tau(),
            "topk": args.topk,
            "top_n": args.top_n,
        }),
        ctx.seed,
    );
    let distances = cb.distances(&args.z)?;
    let q = match args.topk {
        Some(m) => topk_from_distances(&distances, temp, m)?,
        None => NeighborDistribution::Dense(probs_from_distances(&distances, temp)?),
    };
    let mut support: Vec<(usize, f64)> = match &q {
        NeighborDistribution::Dense(p) => p.iter().copied().enumerate().collect(),
        NeighborDistribution::Sparse { entries, .. } => entries.clone(),
    };
    support.sort_by(|a, b| distances[a.0].total_cmp(&distances[b.0]).then(a.0.cmp(&b.0)));

    for (rank, &(token, probability)) in support.iter().take(args.top_n).enumerate() {
        let line = Line {
            rank,
            token,
            probability,
            distance: distances[token],
        };
        emit!("{}", serde_json::to_string(&line)?);
    }

    let out = ctx.out.as_deref();
    if let Some(path) = &args.csv {
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => std::path::PathBuf::from("."),
        };
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        write_csv(&dir, &name, &mut manifest, |w| {
            w.write_record(["token", "probability", "distance"])?;
            for &(k, p) in &support {
                w.write_record([k.to_string(), p.to_string(), distances[k].to_string()])?;
            }
            Ok(())
        })?;
        if let Some(last) = manifest.outputs.last_mut() {
            *last = path.display().to_string();
        }
    }
    if let Some(dir) = out {
        ensure_dir(dir)?;
    }
    manifest.finish(out)?;
    Ok(Outcome::Ok)
}
