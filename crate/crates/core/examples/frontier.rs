//! Builds a naturalness/adversarialness frontier from attack results,
//! prints the Pareto set and AUC, and writes the CSV, JSON and SVG files.
//!
//! cargo run --release --example frontier -- [out_dir]

use natadv::frontier::{Frontier, Normalization, RunPoint};

fn main() -> natadv::Result<()> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "frontier-example".into());
    // Cooperative return 450, unconstrained adversary return -30.
    let norm = Normalization::from_returns(450.0, -30.0)?;
    let runs: Vec<RunPoint> = [
        (1e-5, 0.0, -25.0),
        (1e-3, 0.2, 60.0),
        (1e-2, 0.5, 150.0),
        (1e-1, 0.45, 300.0),
        (10.0, 1.0, 440.0),
    ]
    .iter()
    .enumerate()
    .map(|(i, &(lambda, naturalness, robot_return))| RunPoint {
        run_id: format!("run{i}"),
        lambda,
        seed: 0,
        naturalness,
        robot_return,
    })
    .collect();
    let f = Frontier::build(&runs, norm)?;
    for p in &f.pareto_points {
        println!(
            "pareto: {} nat {:.2} adv {:.3}",
            p.run_id, p.naturalness, p.adversarialness
        );
    }
    println!("auc {:.4}", f.auc);
    std::fs::create_dir_all(&out)?;
    std::fs::write(format!("{out}/frontier.csv"), f.to_csv())?;
    std::fs::write(format!("{out}/frontier.json"), f.to_json())?;
    std::fs::write(format!("{out}/frontier.svg"), f.to_svg())?;
    println!("wrote {out}/frontier.{{csv,json,svg}}");
    Ok(())
}
