//! Seeded random inputs for the property suites.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::control::{DyadicTail, PiecewiseControl, Segment};
use crate::rational::{int, ratio, Rational};
use crate::schedule::t_n;

/// Independent stream `index` of the generator for `seed`, labelled by `tag`
/// so different properties never share draws.
pub fn case_rng(seed: u64, tag: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((tag << 32) | index);
    rng
}

#[derive(Debug, Clone, Copy)]
pub struct ControlShape {
    /// Segment starts lie on the grid `2^{-grid_depth}`.
    pub grid_depth: u32,
    pub max_segments: usize,
    /// Probability of closing the control with a dyadic tail pattern.
    pub tail_probability: f64,
}

impl Default for ControlShape {
    fn default() -> Self {
        ControlShape { grid_depth: 8, max_segments: 20, tail_probability: 0.25 }
    }
}

fn unit_value(rng: &mut impl Rng) -> Rational {
    ratio(rng.gen_range(-64..=64), 64)
}

/// Random admissible (`|α| ≤ 1`) piecewise-linear control on `[0, 1]`.
/// Each segment interpolates two values in `[-1, 1]`, so the bound holds
/// by convexity.
pub fn random_control(rng: &mut impl Rng, shape: ControlShape) -> PiecewiseControl {
    let cells = 1i64 << shape.grid_depth;
    let tail = (rng.gen_bool(shape.tail_probability)).then(|| {
        let generation = rng.gen_range(1..=shape.grid_depth.min(6));
        DyadicTail { generation, a_value: unit_value(rng), b_value: unit_value(rng) }
    });
    let end = tail.as_ref().map(|t| t_n(t.generation)).unwrap_or_else(|| int(1));
    // t_g = 1 − 2^{-g} is a whole number of cells since g ≤ grid_depth
    let end_cells = match &tail {
        Some(t) => cells - (cells >> t.generation),
        None => cells,
    };
    let count = rng.gen_range(1..=shape.max_segments).min(end_cells as usize);
    let mut starts: Vec<i64> = vec![0];
    while starts.len() < count {
        let k = rng.gen_range(1..end_cells);
        if !starts.contains(&k) {
            starts.push(k);
        }
    }
    starts.sort_unstable();
    let starts: Vec<Rational> = starts.into_iter().map(|k| ratio(k, cells)).collect();
    let mut segments = Vec::with_capacity(count);
    for (i, a) in starts.iter().enumerate() {
        let b = starts.get(i + 1).cloned().unwrap_or_else(|| end.clone());
        let (va, vb) = (unit_value(rng), unit_value(rng));
        let c1 = (&vb - &va) / (&b - a);
        let c0 = &va - &c1 * a;
        segments.push(Segment { start: a.clone(), c0, c1 });
    }
    PiecewiseControl::new(int(1), Some(int(1)), segments, tail).expect("generated control is admissible")
}

/// Random time `k / 2^depth` in `[0, 1)`.
pub fn random_time(rng: &mut impl Rng, depth: u32) -> Rational {
    let cells = 1i64 << depth;
    ratio(rng.gen_range(0..cells), cells)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_controls_are_admissible_and_reproducible() {
        for i in 0..50 {
            let a = random_control(&mut case_rng(7, 1, i), ControlShape::default());
            let b = random_control(&mut case_rng(7, 1, i), ControlShape::default());
            assert_eq!(a, b);
            assert!(a.check_admissible().is_ok());
            assert!(a.segments().len() <= 20);
        }
    }
}
