pub mod ep;
pub mod fwd;
pub mod probe;
pub mod ratio;
pub mod rmt;
pub mod spectrum;
pub mod train;
pub mod transfer;

use pclab_core::RngStream;
use rayon::prelude::*;

/// Network seed of replicate `r`, split off the base seed so that cells
/// never share a stream.
pub fn replicate_seed(base: u64, r: usize) -> u64 {
    RngStream::new(base).split(r as u64).next_u64()
}

/// Runs `f` over `cells` in the rayon pool; results keep the input order.
pub fn par_map<T: Sync, R: Send>(cells: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    cells.par_iter().map(f).collect()
}
