//! Wall-clock check for the exact-distance program at tilt instances.

use kwise::closeness::closeness_exact;
use kwise::construct::{random_density, theorem12_density, LowerBoundParams};
use std::time::Instant;

fn main() {
    for n in [6usize, 8, 10] {
        let params = LowerBoundParams::new(n, 2, 4.0).unwrap();
        let phi = theorem12_density(&params).unwrap();
        let phi = phi.expand_explicit().unwrap();
        let t0 = Instant::now();
        let r = closeness_exact(&phi, 2).unwrap();
        println!(
            "tilt n={n}: distance {:.6e} in {:.2}s",
            r.distance,
            t0.elapsed().as_secs_f64()
        );
    }
    for (n, k) in [(7usize, 2usize), (8, 2), (8, 3)] {
        let phi = random_density(n, 4242);
        let t0 = Instant::now();
        let r = closeness_exact(&phi, k).unwrap();
        println!(
            "random n={n} k={k}: distance {:.6e} in {:.2}s",
            r.distance,
            t0.elapsed().as_secs_f64()
        );
    }
}
