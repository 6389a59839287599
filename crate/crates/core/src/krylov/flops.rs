use crate::error::{Error, Result};

fn non_negative(name: &str, v: i64) -> Result<u64> {
    u64::try_from(v).map_err(|_| Error::InvalidParameter(alloc::format!("{name} must be non-negative, got {v}")))
}

/// FLOPs of `k_total` MINRES iterations: `H + 4n + k (H + 16n)`.
pub fn flops_minres(k_total: i64, n: i64, h_cost: i64) -> Result<u64> {
    let (k, n, h) = (
        non_negative("k_total", k_total)?,
        non_negative("n", n)?,
        non_negative("H_cost", h_cost)?,
    );
    Ok(h + 4 * n + k * (h + 16 * n))
}

/// FLOPs of `k_total` recycling MINRES iterations with a recycle space of
/// dimension `s`: `H + 4n + 6ns + k (H + 21n + 6ns - s)`.
pub fn flops_rminres(k_total: i64, n: i64, s: i64, h_cost: i64) -> Result<u64> {
    let (k, n, s, h) = (
        non_negative("k_total", k_total)?,
        non_negative("n", n)?,
        non_negative("s", s)?,
        non_negative("H_cost", h_cost)?,
    );
    Ok(h + 4 * n + 6 * n * s + k * (h + 21 * n + 6 * n * s - s))
}
