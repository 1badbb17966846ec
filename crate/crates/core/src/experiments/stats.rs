use serde::{Deserialize, Serialize};

/// Mean and sample standard deviation (`n − 1` denominator).
///
/// The mean is absent for an empty sample and the deviation for fewer than
/// two observations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Summary {
    pub n: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

impl Summary {
    pub fn of<I: IntoIterator<Item = f64>>(xs: I) -> Summary {
        let xs: Vec<f64> = xs.into_iter().collect();
        let n = xs.len();
        if n == 0 {
            return Summary::default();
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let std = (n > 1).then(|| {
            let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
            (ss / (n - 1) as f64).sqrt()
        });
        Summary {
            n,
            mean: Some(mean),
            std,
        }
    }
}

/// SplitMix64 finalizer.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of one run, a function of its coordinates only.
pub fn run_seed(base: u64, cell: usize, run: usize) -> u64 {
    mix(mix(mix(base) ^ cell as u64) ^ run as u64)
}
