//! Draw test sets skewed toward a chosen quality level, to see how much the
//! mean quality drifts with the mix.

use canmt::eval::{level_weights, levels_from_oracle, quality_biased_sample};
use canmt::numerics::Rng;

fn main() -> canmt::Result<()> {
    let mut rng = Rng::new(3);
    let oracle: Vec<f64> = (0..1000).map(|_| -rng.uniform().powi(2)).collect();
    let levels = levels_from_oracle(&oracle);
    let overall = oracle.iter().sum::<f64>() / oracle.len() as f64;
    println!("pool of {} items, mean oracle {overall:.4}", oracle.len());
    for target in 1..=4 {
        let w = level_weights(target)?;
        let draws = quality_biased_sample(&levels, target, 20_000, target as u64)?;
        let mut freq = [0.0; 4];
        for &i in &draws {
            freq[levels[i] - 1] += 1.0 / draws.len() as f64;
        }
        let mean = draws.iter().map(|&i| oracle[i]).sum::<f64>() / draws.len() as f64;
        println!(
            "target {target}: weights {:?}  observed {:?}  mean oracle {mean:.4}",
            w.map(|x| (x * 1000.0).round() / 1000.0),
            freq.map(|x| (x * 1000.0).round() / 1000.0)
        );
    }
    Ok(())
}
