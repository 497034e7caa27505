//! Shared fixtures for the throughput benchmarks.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use bellsim_core::{Axis, OrderPolicy, PairBatchSpec};

/// A four-batch layout at the standard violation angles, one spec per term.
pub fn chsh_specs(n: u64) -> [PairBatchSpec; 4] {
    let (x, w, y, z) = (0.0, FRAC_PI_2, FRAC_PI_4, 7.0 * FRAC_PI_4);
    let mut k = 0u32;
    [(x, y), (x, z), (w, y), (w, z)].map(|(a, b)| {
        let spec = PairBatchSpec {
            batch: k,
            base_index: u64::from(k) * n,
            n,
            axis_p: Axis::new(a),
            axis_pp: Axis::new(b),
            order: OrderPolicy::Random,
        };
        k += 1;
        spec
    })
}
