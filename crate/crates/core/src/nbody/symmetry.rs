//! Projection onto functions symmetric under permutations of particles.

use rayon::prelude::*;

use crate::grid::Shape;

/// Averages a tensor over all `N!` coordinate permutations.
///
/// Each orbit is summed in sorted index order, so the output is bitwise
/// identical at every point of the orbit. Orbit tables are built once.
#[derive(Debug, Clone)]
pub(crate) struct Symmetrizer {
    shape: Shape,
    /// Canonical (sorted-digit) representative slot of every point.
    slot: Vec<u32>,
    /// `N!` sorted member indices per representative, duplicates included.
    members: Vec<u32>,
    order: usize,
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 1 {
        return vec![vec![0]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..k {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

fn digits(shape: Shape, idx: usize, out: &mut [usize]) {
    let mut rem = idx;
    for d in out.iter_mut() {
        *d = rem % shape.n;
        rem /= shape.n;
    }
}

fn index(shape: Shape, digits: &[usize]) -> usize {
    digits.iter().rev().fold(0, |acc, d| acc * shape.n + d)
}

impl Symmetrizer {
    pub fn new(shape: Shape) -> Self {
        let axes = shape.axes;
        let perms = permutations(axes);
        let order = perms.len();
        if axes == 1 {
            return Self {
                shape,
                slot: Vec::new(),
                members: Vec::new(),
                order,
            };
        }
        assert!(shape.len() <= u32::MAX as usize, "tensor too large for orbit tables");
        let sorted = |idx: usize| {
            let mut d = [0usize; 8];
            digits(shape, idx, &mut d[..axes]);
            d[..axes].windows(2).all(|w| w[0] <= w[1])
        };
        let reps: Vec<usize> = (0..shape.len()).filter(|&i| sorted(i)).collect();
        let members: Vec<u32> = reps
            .par_iter()
            .flat_map_iter(|&rep| {
                let mut d = [0usize; 8];
                digits(shape, rep, &mut d[..axes]);
                let mut permuted = [0usize; 8];
                let mut orbit: Vec<u32> = perms
                    .iter()
                    .map(|p| {
                        for a in 0..axes {
                            permuted[a] = d[p[a]];
                        }
                        index(shape, &permuted[..axes]) as u32
                    })
                    .collect();
                orbit.sort_unstable();
                orbit
            })
            .collect();
        let slot: Vec<u32> = (0..shape.len())
            .into_par_iter()
            .with_min_len(4096)
            .map(|idx| {
                let mut d = [0usize; 8];
                digits(shape, idx, &mut d[..axes]);
                d[..axes].sort_unstable();
                let canonical = index(shape, &d[..axes]);
                reps.binary_search(&canonical).expect("representative exists") as u32
            })
            .collect();
        Self {
            shape,
            slot,
            members,
            order,
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        if self.shape.axes == 1 {
            return x.to_vec();
        }
        let means: Vec<f64> = self
            .members
            .par_chunks(self.order)
            .with_min_len(256)
            .map(|orbit| orbit.iter().map(|&i| x[i as usize]).sum::<f64>() / self.order as f64)
            .collect();
        self.slot
            .par_iter()
            .with_min_len(4096)
            .map(|&s| means[s as usize])
            .collect()
    }

    /// Whether `x` is bitwise constant on every orbit.
    pub fn is_symmetric(&self, x: &[f64]) -> bool {
        if self.shape.axes == 1 {
            return true;
        }
        self.slot
            .par_iter()
            .with_min_len(4096)
            .enumerate()
            .all(|(i, &s)| x[i].to_bits() == x[self.members[s as usize * self.order] as usize].to_bits())
    }

    /// Largest `|x − x∘σ|` over coordinate transpositions `σ`.
    pub fn asymmetry(&self, x: &[f64]) -> f64 {
        let shape = self.shape;
        let axes = shape.axes;
        let mut worst: f64 = 0.0;
        for i in 0..axes {
            for j in i + 1..axes {
                let m = (0..x.len())
                    .into_par_iter()
                    .with_min_len(4096)
                    .map(|idx| {
                        let mut d = [0usize; 8];
                        digits(shape, idx, &mut d[..axes]);
                        d.swap(i, j);
                        (x[idx] - x[index(shape, &d[..axes])]).abs()
                    })
                    .reduce(|| 0.0, f64::max);
                worst = worst.max(m);
            }
        }
        worst
    }
}
