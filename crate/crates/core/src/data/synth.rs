//! Seeded synthetic datasets used in place of clinical data.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::Dataset;
use crate::error::{Error, Result};
use crate::nn::Matrix;

/// Centers of `n_classes` unit-variance Gaussians whose pairwise distance is `separation`.
///
/// With enough features the centers are scaled basis vectors (a regular simplex);
/// otherwise they sit on a circle in the first two features with adjacent centers
/// `separation` apart.
pub fn gaussian_centers(n_classes: usize, n_features: usize, separation: f64) -> Vec<Vec<f64>> {
    if n_features >= n_classes {
        let s = separation / std::f64::consts::SQRT_2;
        (0..n_classes)
            .map(|k| {
                let mut c = vec![0.0; n_features];
                c[k] = s;
                c
            })
            .collect()
    } else {
        let radius = separation / (2.0 * (std::f64::consts::PI / n_classes as f64).sin());
        ring_centers(n_classes, radius)
            .into_iter()
            .map(|xy| {
                let mut c = vec![0.0; n_features];
                c[0] = xy[0];
                if n_features > 1 {
                    c[1] = xy[1];
                }
                c
            })
            .collect()
    }
}

/// Isotropic unit-variance Gaussian classes, `n_per_class` rows each, grouped by class.
pub fn make_gaussian_mixture(
    n_per_class: usize,
    n_classes: usize,
    n_features: usize,
    class_separation: f64,
    seed: u64,
) -> Result<Dataset> {
    if n_per_class == 0 || n_classes < 2 || n_features == 0 {
        return Err(Error::invalid("gaussian mixture needs n_per_class >= 1, n_classes >= 2, n_features >= 1"));
    }
    if !class_separation.is_finite() || class_separation < 0.0 {
        return Err(Error::invalid("class separation must be finite and >= 0"));
    }
    let centers = gaussian_centers(n_classes, n_features, class_separation);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(n_per_class * n_classes * n_features);
    let mut labels = Vec::with_capacity(n_per_class * n_classes);
    for (k, c) in centers.iter().enumerate() {
        for _ in 0..n_per_class {
            for &cj in c {
                let e: f64 = StandardNormal.sample(&mut rng);
                values.push(cj + e);
            }
            labels.push(k);
        }
    }
    Dataset::new(Matrix::from_vec(labels.len(), n_features, values)?, labels, n_classes)
}

/// Points `(r cos 2πk/n, r sin 2πk/n)`.
pub fn ring_centers(n_modes: usize, radius: f64) -> Vec<Vec<f64>> {
    (0..n_modes)
        .map(|k| {
            let a = 2.0 * std::f64::consts::PI * k as f64 / n_modes as f64;
            vec![radius * a.cos(), radius * a.sin()]
        })
        .collect()
}

/// Two-dimensional ring of Gaussian modes; the label is the mode index.
pub fn make_ring_mixture(n_modes: usize, n_per_mode: usize, radius: f64, sigma: f64, seed: u64) -> Result<Dataset> {
    if n_modes < 2 || n_per_mode == 0 {
        return Err(Error::invalid("ring mixture needs n_modes >= 2 and n_per_mode >= 1"));
    }
    if !(radius.is_finite() && sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::invalid("ring radius and sigma must be finite, sigma >= 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(n_modes * n_per_mode * 2);
    let mut labels = Vec::with_capacity(n_modes * n_per_mode);
    for (k, c) in ring_centers(n_modes, radius).iter().enumerate() {
        for _ in 0..n_per_mode {
            let ex: f64 = StandardNormal.sample(&mut rng);
            let ey: f64 = StandardNormal.sample(&mut rng);
            values.push(c[0] + sigma * ex);
            values.push(c[1] + sigma * ey);
            labels.push(k);
        }
    }
    Dataset::new(Matrix::from_vec(labels.len(), 2, values)?, labels, n_modes)
}
