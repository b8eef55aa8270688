//! Chi-squared upper quantiles by bisection on the regularized incomplete
//! gamma function.

use statrs::function::gamma::checked_gamma_ur;

use crate::error::{Error, Result};

/// Relative width at which bisection stops.
pub const QUANTILE_RTOL: f64 = 1e-10;

/// `Pr{χ²_df > x}`.
pub fn chi2_survival(df: f64, x: f64) -> Result<f64> {
    if x <= 0.0 {
        return Ok(1.0);
    }
    checked_gamma_ur(df / 2.0, x / 2.0).map_err(|e| Error::Domain(format!("incomplete gamma: {e}")))
}

/// The `x` with `Pr{χ²_df > x} = alpha`.
pub fn chi2_upper_quantile(df: f64, alpha: f64) -> Result<f64> {
    if !(df > 0.0 && df.is_finite()) {
        return Err(Error::Domain(format!("degrees of freedom {df} must be positive")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("upper quantile needs 0 < α < 1, got {alpha}")));
    }
    let mut lo = 0.0;
    let mut hi = df.max(1.0);
    while chi2_survival(df, hi)? > alpha {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > QUANTILE_RTOL * hi {
        let mid = 0.5 * (lo + hi);
        if chi2_survival(df, mid)? > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
