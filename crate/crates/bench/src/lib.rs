//! Fixtures shared by the benchmarks.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use volumecast_core::model::BinEntry;
use volumecast_core::{BinId, Ellipsoid, ModelConfig, TrainedModel, Vec3};

/// Deterministic point cloud resembling per-bin offsets: a stretched blob a
/// few centimeters across.
pub fn offset_cloud(n: usize, seed: u64) -> Vec<Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut next = move || rng.gen::<f64>() - 0.5;
    (0..n)
        .map(|_| Vec3::new(0.04 * next(), 0.01 * next(), 0.03 * next()))
        .collect()
}

/// Model with `bins` entries laid out on a cube of bin ids around zero.
pub fn model_with_bins(bins: usize) -> TrainedModel {
    let side = (bins as f64).cbrt().ceil() as i32;
    let half = side / 2;
    let entry = BinEntry {
        ellipsoid: Ellipsoid::ball(Vec3::zeros(), 0.01).expect("valid radius"),
        support: 1,
    };
    let mut map = HashMap::with_capacity(bins);
    'fill: for ix in -half..side - half {
        for iy in -half..side - half {
            for iz in -half..side - half {
                if map.len() == bins {
                    break 'fill;
                }
                map.insert(BinId { ix, iy, iz }, entry);
            }
        }
    }
    TrainedModel {
        config: ModelConfig::default(),
        bins: map,
        global: entry,
        meta: None,
    }
}
