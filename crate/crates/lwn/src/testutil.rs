//! Shared helpers for unit tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::network::{init_network, Network, NetworkSpec};

/// Random network with every weight already exactly in {-1, 0, +1},
/// leaning sparse the way trained models do.
pub(crate) fn random_discrete_network(sizes: &[usize], seed: u64) -> Network {
    random_discrete_network_with_sparsity(sizes, 0.6, seed)
}

pub(crate) fn random_discrete_network_with_sparsity(
    sizes: &[usize],
    zero_fraction: f64,
    seed: u64,
) -> Network {
    let spec = NetworkSpec::new(sizes.to_vec()).unwrap();
    let mut net = init_network(&spec, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(31).wrapping_add(7));
    for w in net.weights_mut() {
        for v in w.as_mut_slice() {
            *v = if rng.gen_bool(zero_fraction) {
                0.0
            } else if rng.gen_bool(0.5) {
                1.0
            } else {
                -1.0
            };
        }
    }
    net
}
