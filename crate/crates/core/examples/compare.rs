//! Runs the bundled intersection in both modes and prints the risk curves.

use std::time::Instant;

use gridrisk::filter::FilterConfig;
use gridrisk::risk::LossConfig;
use gridrisk::scenarios::occluded_intersection;
use gridrisk::sim::{run, Cooperation, RunOptions};

fn main() -> gridrisk::Result<()> {
    let seed: u64 = std::env::args().nth(1).map_or(7, |s| s.parse().expect("seed"));
    let cell: f64 = std::env::args().nth(2).map_or(0.5, |s| s.parse().expect("cell size"));
    let scenario = occluded_intersection().with_cell_size(cell)?;
    let mut outs = Vec::new();
    for mode in [Cooperation::EgoOnly, Cooperation::Cooperative] {
        let start = Instant::now();
        let out = run(
            &scenario,
            FilterConfig::default(),
            LossConfig::default(),
            RunOptions {
                cooperation: mode,
                seed,
                ..RunOptions::default()
            },
        )?;
        println!(
            "{mode:?}: {:.2?}, peak particles {}, max |w - r| {:.2e}",
            start.elapsed(),
            out.peak_particles,
            out.max_weight_discrepancy
        );
        outs.push(out);
    }
    println!("epoch   ego_R  ego_acc   ego_var |  coop_R coop_acc  coop_var");
    for (a, b) in outs[0].profile.rows.iter().zip(&outs[1].profile.rows) {
        if a.epoch % 5 == 0 || a.epoch + 1 == outs[0].profile.len() as u64 {
            println!(
                "{:5} {:7.3} {:8.2} {:9.3} | {:7.3} {:8.2} {:9.3}",
                a.epoch, a.risk_mean, a.acc_mean, a.acc_var, b.risk_mean, b.acc_mean, b.acc_var
            );
        }
    }
    for (name, out) in ["ego", "coop"].iter().zip(&outs) {
        let [a, b, c] = out.profile.third_means();
        println!("{name}: third means {a:.3} {b:.3} {c:.3}");
    }
    Ok(())
}
