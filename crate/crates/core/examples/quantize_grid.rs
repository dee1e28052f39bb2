// Quantize a few latents onto the 50x50 grid codebook and round-trip the
// codebook through its binary file format.

use snce::codebook::{grid_codebook, load_codebook, save_codebook};

pub fn run_example() -> snce::Result<()> {
    let cb = grid_codebook(-5.0, 5.0, 50)?;
    for z in [[-2.03, 0.04], [2.0, 0.0], [4.9, -4.9]] {
        let token = cb.quantize(&z)?;
        let code = cb.code_f64(token);
        println!(
            "z = ({:+.2}, {:+.2}) -> token {token:4} at ({:+.3}, {:+.3})",
            z[0], z[1], code[0], code[1]
        );
    }

    let path = std::env::temp_dir().join(format!("snce-grid-{}.sncb", std::process::id()));
    save_codebook(&cb, &path)?;
    let back = load_codebook(&path)?;
    let _ = std::fs::remove_file(&path);
    assert_eq!(back, cb);
    println!("round-tripped {} codes of dim {} through {}", back.size(), back.dim(), path.display());
    Ok(())
}

fn main() -> snce::Result<()> {
    run_example()
}
