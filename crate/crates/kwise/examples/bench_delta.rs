//! Rough throughput check for the streaming pair statistic at the
//! sample sizes the estimation tester requests at n = 16.

use kwise::sampling::{trial_rng, ParityPlantedSource, UniformSource};
use kwise::testers::delta_from_source;
use std::time::Instant;

fn main() {
    let n = 16;
    let m: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(20_000_000);

    let mut rng = trial_rng(1);
    let mut src = UniformSource { n };
    let t0 = Instant::now();
    let d = delta_from_source(&mut src, m, 2, &mut rng).unwrap();
    let dt = t0.elapsed().as_secs_f64();
    println!(
        "uniform: m={m} delta={d:.3e} in {dt:.2}s ({:.1} ns/sample)",
        dt / m as f64 * 1e9
    );

    let mut rng = trial_rng(2);
    let mut src = ParityPlantedSource::new(n, 0b1, 0.135);
    let t0 = Instant::now();
    let d = delta_from_source(&mut src, m, 2, &mut rng).unwrap();
    let dt = t0.elapsed().as_secs_f64();
    println!(
        "planted: m={m} delta={d:.3e} in {dt:.2}s ({:.1} ns/sample)",
        dt / m as f64 * 1e9
    );
}
