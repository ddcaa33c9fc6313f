//! Small numeric helpers: compensated summation and tie-aware argmax.

/// Neumaier-compensated sum. Order dependence is limited to the last bit or so,
/// which keeps grid masses reproducible at the 1e-9 level.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Index of the largest value. Ties resolve to the smallest index and set the flag.
///
/// NaN entries never win. Returns `None` for an empty slice.
pub fn argmax_with_tie(values: &[f64]) -> Option<(usize, bool)> {
    let mut best: Option<usize> = None;
    let mut tie = false;
    for (i, &v) in values.iter().enumerate() {
        if v.is_nan() {
            continue;
        }
        match best {
            None => best = Some(i),
            Some(b) => {
                if v > values[b] {
                    best = Some(i);
                    tie = false;
                } else if v == values[b] {
                    tie = true;
                }
            }
        }
    }
    best.map(|b| (b, tie))
}

/// Exact probability-vector check used by validators.
pub(crate) fn check_masses(field: &'static str, masses: &[f64]) -> crate::Result<()> {
    for (i, &m) in masses.iter().enumerate() {
        if !(m.is_finite() && m >= 0.0) {
            return Err(crate::Error::NegativeMass {
                field,
                index: i,
                value: m,
            });
        }
    }
    Ok(())
}
