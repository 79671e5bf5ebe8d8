use crate::cost::CostCounters;
use crate::error::{Error, Result};

fn check(k: usize, layers: usize, fast: usize) -> Result<()> {
    if k == 0 || fast == 0 || fast > layers {
        return Err(Error::Domain(format!(
            "need k >= 1 and 1 <= fast <= layers, got k={k}, layers={layers}, fast={fast}"
        )));
    }
    Ok(())
}

/// Layer visits for `k` steps of full training and for one multirate macro
/// step, as `(full, multirate)`: `2kL` against `kL + L + (k−1)ℓ`.
pub fn visit_counts(k: usize, layers: usize, fast: usize) -> Result<(u64, u64)> {
    check(k, layers, fast)?;
    let (k, l, f) = (k as u64, layers as u64, fast as u64);
    Ok((2 * k * l, k * l + l + (k - 1) * f))
}

/// Cost ratio of full-network training to multirate training over `k`
/// steps, `2kL / ((k+1)L + (k−1)ℓ)`.
pub fn speedup_ratio(k: usize, layers: usize, fast: usize) -> Result<f64> {
    let (full, multi) = visit_counts(k, layers, fast)?;
    Ok(full as f64 / multi as f64)
}

/// The same ratio from measured counters.
pub fn counted_speedup(full: &CostCounters, multirate: &CostCounters) -> Result<f64> {
    let denom = multirate.layer_visits();
    if denom == 0 {
        return Err(Error::Domain("multirate run recorded no layer visits".into()));
    }
    Ok(full.layer_visits() as f64 / denom as f64)
}
