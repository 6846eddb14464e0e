use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Edge, Graph};
use crate::error::{Error, Result};

/// Preferential-attachment graph with unit weights.
///
/// The first `m` nodes start isolated; node `m` links to all of them and
/// every later node draws `m` distinct targets with probability proportional
/// to current degree. The result is connected with exactly `m (n − m)` edges.
pub fn barabasi_albert(n: usize, m: usize, seed: u64) -> Result<Graph> {
    if m < 1 || m >= n {
        return Err(Error::InvalidParams(format!(
            "Barabási–Albert needs 1 <= m < n, got n = {n}, m = {m}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::with_capacity(m * (n - m));
    // Each node appears once per incident edge, so uniform draws from this
    // list are degree-proportional.
    let mut repeated: Vec<usize> = Vec::with_capacity(2 * m * (n - m));
    let mut targets: Vec<usize> = (0..m).collect();

    for source in m..n {
        for &t in &targets {
            edges.push(Edge::new(source, t, 1.0));
            repeated.push(t);
            repeated.push(source);
        }
        targets.clear();
        while targets.len() < m {
            let pick = repeated[rng.random_range(0..repeated.len())];
            if !targets.contains(&pick) {
                targets.push(pick);
            }
        }
        targets.sort_unstable();
    }
    Graph::new(n, edges, Default::default())
}
