//! Row-major run-length encoding of binary masks.
//!
//! Runs alternate background/foreground counts and always start with a
//! background run, which is `0` when the first pixel is set.

use crate::error::{Error, Result};
use crate::mask::BinaryMask;

pub fn rle_encode(m: &BinaryMask) -> Vec<u32> {
    let mut runs = Vec::new();
    let mut current = false;
    let mut count = 0u32;
    for i in 0..m.len() {
        let v = m.get_index(i);
        if v != current {
            runs.push(count);
            count = 0;
            current = v;
        }
        count += 1;
    }
    runs.push(count);
    runs
}

pub fn rle_decode(runs: &[u32], width: usize, height: usize) -> Result<BinaryMask> {
    let mut mask = BinaryMask::new(width, height)?;
    let expected = width * height;
    let actual: usize = runs.iter().map(|&r| r as usize).sum();
    if actual != expected {
        return Err(Error::RunLengthSum { expected, actual });
    }
    let mut pos = 0usize;
    for (k, &run) in runs.iter().enumerate() {
        let run = run as usize;
        if k % 2 == 1 {
            for i in pos..pos + run {
                mask.set_index(i, true);
            }
        }
        pos += run;
    }
    Ok(mask)
}
