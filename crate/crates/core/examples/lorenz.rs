//! Runs the bundled Lorenz scenarios and prints trigger counts and tail error.

use etreg_core::scenario::{Scenario, LORENZ_D001, LORENZ_D01};

fn main() -> etreg_core::Result<()> {
    let h: Option<f64> = std::env::args().nth(1).map(|s| s.parse().expect("step size"));
    for text in [LORENZ_D01, LORENZ_D001] {
        let mut sc = Scenario::from_toml_str(text)?;
        if let Some(h) = h {
            sc = sc.with_step(h);
        }
        let t0 = std::time::Instant::now();
        let (res, m) = sc.build()?.run()?;
        println!(
            "delta = {}: {} triggers, tail sup |e| = {:.5}, min dwell = {:?}, status {} ({:.1?})",
            sc.trigger.delta,
            m.trigger_count_total,
            m.tail_sup_error,
            m.min_dwell,
            res.status,
            t0.elapsed()
        );
    }
    Ok(())
}
