//! Least-squares cubic fit through the 4×4 normal equations.
//!
//! Raw sizes reach 16384, so `Σx⁶` is ~10²⁵ while `Σx⁰` is the sample count;
//! the raw normal matrix is hopeless in double precision. The fitter
//! therefore maps x onto `t = (x − mean) / max|x − mean| ∈ [−1, 1]`, solves
//! the normal equations of the cubic in `t` with partial pivoting, and expands
//! the result back into powers of x. Accumulation, elimination and the
//! back-transform run in double-double arithmetic so that exactly cubic data
//! is recovered to well below 1e-6 relative even when `|y|` is ~10¹⁵.

use twofloat::TwoFloat;

use super::{stats_for_points, FitProvenance, FitStats, MeasurementDataset, PolynomialModel, TimeUnit};

/// Smallest admissible ratio between the smallest and largest elimination
/// pivot of the scaled normal matrix. Below it the design is reported as
/// ill-conditioned instead of returning meaningless coefficients.
pub const PIVOT_RATIO_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FitError {
    #[error("degenerate design: {distinct} distinct x value(s), a cubic needs at least 4")]
    DegenerateDesign { distinct: usize },
    #[error(
        "normal equations are ill-conditioned for x in [{x_min}, {x_max}] \
         (pivot ratio {pivot_ratio:e} below {PIVOT_RATIO_FLOOR:e})"
    )]
    IllConditioned { x_min: f64, x_max: f64, pivot_ratio: f64 },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("unit mismatch: model is in {model}, data is in {data}")]
    UnitMismatch { model: TimeUnit, data: TimeUnit },
    #[error("sample {index} is not finite")]
    NonFiniteSample { index: usize },
    #[error("x has {xs} values but y has {ys}")]
    LengthMismatch { xs: usize, ys: usize },
    #[error("fitted coefficients overflowed")]
    NonFiniteResult,
}

/// Fits the least-squares cubic to a measurement dataset.
///
/// Repeated x values are fine; fewer than four distinct ones are not.
pub fn fit_cubic(data: &MeasurementDataset) -> Result<(PolynomialModel, FitStats), FitError> {
    let (model, stats) = fit_cubic_points(&data.xs(), &data.ys(), data.unit())?;
    let provenance = FitProvenance { digest: data.digest(), samples: data.len() };
    Ok((model.with_provenance(provenance), stats))
}

/// Same as [`fit_cubic`] on raw points. Unlike a [`MeasurementDataset`] the
/// values may be negative, which is what synthetic cubics with negative
/// coefficients produce.
pub fn fit_cubic_points(
    xs: &[f64],
    ys: &[f64],
    unit: TimeUnit,
) -> Result<(PolynomialModel, FitStats), FitError> {
    if xs.len() != ys.len() {
        return Err(FitError::LengthMismatch { xs: xs.len(), ys: ys.len() });
    }
    if xs.is_empty() {
        return Err(FitError::EmptyDataset);
    }
    if let Some(index) = xs.iter().zip(ys).position(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(FitError::NonFiniteSample { index });
    }

    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    if sorted.len() < 4 {
        return Err(FitError::DegenerateDesign { distinct: sorted.len() });
    }
    let (x_min, x_max) = (sorted[0], sorted[sorted.len() - 1]);

    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let half_width = xs.iter().map(|x| (x - mean).abs()).fold(0.0, f64::max);

    // Power sums Σtᵏ (k ≤ 6) and moments Σy·tᵏ (k ≤ 3).
    let zero = TwoFloat::from_f64(0.0);
    let mut power_sums = [zero; 7];
    let mut moments = [zero; 4];
    for (&x, &y) in xs.iter().zip(ys) {
        let t = (TwoFloat::from_f64(x) - mean) / half_width;
        let mut tk = TwoFloat::from_f64(1.0);
        for k in 0..7 {
            power_sums[k] += tk;
            if k < 4 {
                moments[k] += tk * y;
            }
            tk *= t;
        }
    }

    let mut normal = [[zero; 4]; 4];
    for (i, row) in normal.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = power_sums[i + j];
        }
    }
    let scaled = solve4(normal, moments).map_err(|pivot_ratio| FitError::IllConditioned {
        x_min,
        x_max,
        pivot_ratio,
    })?;

    // Σₖ βₖ ((x − m)/h)ᵏ expanded into powers of x.
    let inv_h = TwoFloat::from_f64(1.0) / half_width;
    let neg_m = TwoFloat::from_f64(-mean);
    let mut alpha = [zero; 4];
    for (k, beta) in scaled.iter().enumerate() {
        let scale_k = pow(inv_h, k);
        for (j, a) in alpha.iter_mut().enumerate().take(k + 1) {
            *a += *beta * scale_k * pow(neg_m, k - j) * binomial(k, j);
        }
    }
    let coefficients = alpha.map(|a| a.hi() + a.lo());
    if coefficients.iter().any(|c| !c.is_finite()) {
        return Err(FitError::NonFiniteResult);
    }
    let model = PolynomialModel::new(coefficients, unit).map_err(|_| FitError::NonFiniteResult)?;
    let stats = stats_for_points(&model, xs, ys)?;
    Ok((model, stats))
}

fn pow(base: TwoFloat, exp: usize) -> TwoFloat {
    (0..exp).fold(TwoFloat::from_f64(1.0), |acc, _| acc * base)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `a / b` to full double-double accuracy. twofloat's own TwoFloat÷TwoFloat
/// only delivers about f64 precision; three-step long division fixes that.
fn div(a: TwoFloat, b: TwoFloat) -> TwoFloat {
    let q1 = a.hi() / b.hi();
    let r = a - b * q1;
    let q2 = r.hi() / b.hi();
    let r = r - b * q2;
    let q3 = r.hi() / b.hi();
    TwoFloat::new_add(q1, q2) + q3
}

/// Gaussian elimination with partial pivoting. On failure returns the
/// smallest/largest pivot ratio that tripped [`PIVOT_RATIO_FLOOR`].
fn solve4(mut a: [[TwoFloat; 4]; 4], mut b: [TwoFloat; 4]) -> Result<[TwoFloat; 4], f64> {
    let mut pivots = [0.0f64; 4];
    for col in 0..4 {
        let pivot_row = (col..4)
            .max_by(|&r, &s| a[r][col].abs().hi().total_cmp(&a[s][col].abs().hi()))
            .unwrap_or(col);
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        let pivot = a[col][col];
        pivots[col] = pivot.abs().hi();
        if pivots[col] == 0.0 {
            return Err(0.0);
        }
        for row in col + 1..4 {
            let factor = div(a[row][col], pivot);
            let pivot_row = a[col];
            for (dst, src) in a[row].iter_mut().zip(pivot_row).skip(col) {
                *dst -= factor * src;
            }
            let delta = factor * b[col];
            b[row] -= delta;
        }
    }
    let largest = pivots.iter().copied().fold(0.0, f64::max);
    let smallest = pivots.iter().copied().fold(f64::INFINITY, f64::min);
    let ratio = smallest / largest;
    if ratio < PIVOT_RATIO_FLOOR {
        return Err(ratio);
    }
    let mut x = [TwoFloat::from_f64(0.0); 4];
    for row in (0..4).rev() {
        let mut acc = b[row];
        for k in row + 1..4 {
            acc -= a[row][k] * x[k];
        }
        x[row] = div(acc, a[row][row]);
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fit(points: &[(f64, f64)]) -> Result<(PolynomialModel, FitStats), FitError> {
        let data = MeasurementDataset::from_pairs(points, TimeUnit::Ns).unwrap();
        fit_cubic(&data)
    }

    #[test]
    fn exact_cubic_is_reproduced() {
        let pts: Vec<_> = (1..=5).map(|x| (x as f64, (x * x * x) as f64)).collect();
        let (m, s) = fit(&pts).unwrap();
        let [a1, a2, a3, a4] = m.coefficients();
        assert!((a4 - 1.0).abs() < 1e-6);
        for c in [a1, a2, a3] {
            assert!(c.abs() < 1e-6, "{c}");
        }
        assert!(s.rmse < 1e-9);
        assert_eq!(m.fitted_on().unwrap().samples, 5);
    }

    #[test]
    fn constant_data() {
        let pts: Vec<_> = (1..=5).map(|x| (x as f64, 5.0)).collect();
        let (m, _) = fit(&pts).unwrap();
        let [a1, a2, a3, a4] = m.coefficients();
        assert!((a1 - 5.0).abs() < 1e-6);
        for c in [a2, a3, a4] {
            assert!(c.abs() < 1e-6);
        }
    }

    #[test]
    fn three_distinct_points_are_degenerate_even_with_repeats() {
        let pts = [(1.0, 1.0), (2.0, 2.0), (3.0, 3.0), (3.0, 3.5), (1.0, 0.5)];
        assert_eq!(fit(&pts).unwrap_err(), FitError::DegenerateDesign { distinct: 3 });
    }

    #[test]
    fn repeated_x_is_allowed() {
        let pts = [(1.0, 1.0), (2.0, 8.0), (3.0, 27.0), (4.0, 64.0), (4.0, 64.0), (1.0, 1.0)];
        let (m, _) = fit(&pts).unwrap();
        assert!((m.alpha4() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn clustered_design_is_ill_conditioned() {
        let pts = [(0.0, 1.0), (1e-9, 1.0), (2e-9, 1.0), (3e-9, 1.0), (1e4, 2.0)];
        match fit(&pts).unwrap_err() {
            FitError::IllConditioned { x_min, x_max, pivot_ratio } => {
                assert_eq!((x_min, x_max), (0.0, 1e4));
                assert!(pivot_ratio < PIVOT_RATIO_FLOOR);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn point_entry_validates_shape() {
        assert!(matches!(
            fit_cubic_points(&[1.0], &[], TimeUnit::Ns),
            Err(FitError::LengthMismatch { .. })
        ));
        assert_eq!(fit_cubic_points(&[], &[], TimeUnit::Ns).unwrap_err(), FitError::EmptyDataset);
        assert!(matches!(
            fit_cubic_points(&[1.0, f64::NAN], &[1.0, 1.0], TimeUnit::Ns),
            Err(FitError::NonFiniteSample { index: 1 })
        ));
    }

    #[test]
    fn long_division_is_double_double_accurate() {
        let one = TwoFloat::from_f64(1.0);
        let seven = TwoFloat::from_f64(7.0);
        let r = div(one, seven) * seven - one;
        assert!(r.hi().abs() < 1e-30, "{r:?}");
    }

    #[test]
    fn negative_values_through_point_entry() {
        let xs: Vec<f64> = (1..=8).map(|i| (i * 1000) as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| -3.0 * x * x * x + 7.0 * x - 11.0).collect();
        let (m, _) = fit_cubic_points(&xs, &ys, TimeUnit::Ns).unwrap();
        let [a1, a2, a3, a4] = m.coefficients();
        assert!((a1 + 11.0).abs() < 1e-5 && (a2 - 7.0).abs() < 1e-6);
        assert!(a3.abs() < 1e-6 && (a4 + 3.0).abs() < 1e-9);
    }
}
