//! Thread-count-independent parallel helpers.
//!
//! Every helper maps each output cell from its index alone and never does a
//! parallel reduction, so results are bit-identical for any worker count.

use rayon::prelude::*;

const CHUNK: usize = 4096;

/// Fills `out[i] = f(i)` in parallel over fixed-size chunks.
pub fn par_fill<T: Send, F: Fn(usize) -> T + Sync>(out: &mut [T], f: F) {
    out.par_chunks_mut(CHUNK).enumerate().for_each(|(ci, chunk)| {
        let base = ci * CHUNK;
        for (k, slot) in chunk.iter_mut().enumerate() {
            *slot = f(base + k);
        }
    });
}
