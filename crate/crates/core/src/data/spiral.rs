use super::{Dataset, Source};
use crate::error::{Error, Result};
use crate::linalg::{RngStream, Tensor};

/// Two interleaved spiral arms in the plane.
///
/// For `t` uniform in `(0, 1]` the class-0 point is `t·(cos φ, sin φ)` with
/// `φ = 2π·turns·t` and the class-1 point is its rotation by π; isotropic
/// Gaussian noise is added to both. Rows `0..n` are class 0 and row `n + j`
/// is the partner of row `j`.
pub fn gen_spiral(turns: f64, n_per_class: usize, noise_std: f64, rng: &mut RngStream) -> Result<Dataset> {
    if !(turns > 0.0) || n_per_class == 0 {
        return Err(Error::Domain(format!(
            "need turns > 0 and at least one point per class, got {turns} and {n_per_class}"
        )));
    }
    if !(noise_std >= 0.0) {
        return Err(Error::Domain(format!("noise std must be nonnegative, got {noise_std}")));
    }
    let n = n_per_class;
    let mut data = vec![0.0; 4 * n];
    for j in 0..n {
        let t = 1.0 - rng.uniform();
        let phi = 2.0 * std::f64::consts::PI * turns * t;
        let (x, y) = (t * phi.cos(), t * phi.sin());
        let mut noise = || if noise_std > 0.0 { noise_std * rng.standard_normal() } else { 0.0 };
        data[2 * j] = x + noise();
        data[2 * j + 1] = y + noise();
        data[2 * (n + j)] = -x + noise();
        data[2 * (n + j) + 1] = -y + noise();
    }
    let labels = (0..2 * n).map(|i| usize::from(i >= n)).collect();
    Dataset::new(Tensor::new(vec![2 * n, 2], data)?, labels, 2, Source::Spiral)
}
