use crate::error::{invalid, Result};
use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

/// Riesz transform of periodic samples on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleOutput {
    /// One array per axis, same layout as the input.
    pub components: Vec<Vec<f64>>,
    /// Mean removed from the input before transforming.
    pub removed_mean: f64,
}

/// `R_j f` via the multiplier `i ξ_j / |ξ|` on `[0, 2π)^n` sampled row-major with the
/// given `shape` (last axis contiguous). The Nyquist frequency of each even axis gets
/// a zero multiplier.
pub fn fft_riesz_oracle(samples: &[f64], shape: &[usize]) -> Result<OracleOutput> {
    if shape.is_empty() || shape.contains(&0) {
        return invalid("oracle shape must be nonempty with positive extents");
    }
    let total: usize = shape.iter().product();
    if total != samples.len() {
        return invalid(format!("shape {shape:?} holds {total} samples, got {}", samples.len()));
    }
    let removed_mean = samples.iter().sum::<f64>() / total as f64;
    let mut spec: Vec<Complex64> = samples.iter().map(|v| Complex64::new(v - removed_mean, 0.0)).collect();
    let mut planner = FftPlanner::new();
    transform(&mut spec, shape, &mut planner, FftDirection::Forward);

    let strides: Vec<usize> = (0..shape.len()).map(|a| shape[a + 1..].iter().product()).collect();
    let freq = |a: usize, idx: usize| -> f64 {
        let m = shape[a];
        let k = (idx / strides[a]) % m;
        if 2 * k == m {
            f64::NAN
        } else if 2 * k < m {
            k as f64
        } else {
            k as f64 - m as f64
        }
    };
    let mut components = Vec::with_capacity(shape.len());
    for j in 0..shape.len() {
        let mut buf: Vec<Complex64> = spec
            .iter()
            .enumerate()
            .map(|(idx, c)| {
                let xi: Vec<f64> = (0..shape.len()).map(|a| freq(a, idx)).collect();
                if xi.iter().any(|v| v.is_nan()) {
                    return Complex64::new(0.0, 0.0);
                }
                let norm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm == 0.0 {
                    return Complex64::new(0.0, 0.0);
                }
                c * Complex64::new(0.0, xi[j] / norm)
            })
            .collect();
        transform(&mut buf, shape, &mut planner, FftDirection::Inverse);
        components.push(buf.iter().map(|c| c.re / total as f64).collect());
    }
    Ok(OracleOutput { components, removed_mean })
}

fn transform(data: &mut [Complex64], shape: &[usize], planner: &mut FftPlanner<f64>, dir: FftDirection) {
    let total = data.len();
    for a in 0..shape.len() {
        let len = shape[a];
        let stride: usize = shape[a + 1..].iter().product();
        let fft = planner.plan_fft(len, dir);
        let mut line = vec![Complex64::new(0.0, 0.0); len];
        for start in 0..total {
            if !(start / stride).is_multiple_of(len) {
                continue;
            }
            for (i, v) in line.iter_mut().enumerate() {
                *v = data[start + i * stride];
            }
            fft.process(&mut line);
            for (i, v) in line.iter().enumerate() {
                data[start + i * stride] = *v;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn cosine_maps_to_negative_sine() {
        let m = 64;
        let xs: Vec<f64> = (0..m).map(|j| TAU * j as f64 / m as f64).collect();
        let f: Vec<f64> = xs.iter().map(|x| 3.0 * x.cos() + 0.25).collect();
        let out = fft_riesz_oracle(&f, &[m]).unwrap();
        assert!((out.removed_mean - 0.25).abs() < 1e-14);
        for (x, r) in xs.iter().zip(&out.components[0]) {
            assert!((r + 3.0 * x.sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn two_dimensional_mode() {
        let m = 16;
        let mut f = Vec::new();
        for i in 0..m {
            for j in 0..m {
                let (x, y) = (TAU * i as f64 / m as f64, TAU * j as f64 / m as f64);
                f.push((x + 2.0 * y).cos());
            }
        }
        let out = fft_riesz_oracle(&f, &[m, m]).unwrap();
        let s5 = 5f64.sqrt();
        for i in 0..m {
            for j in 0..m {
                let (x, y) = (TAU * i as f64 / m as f64, TAU * j as f64 / m as f64);
                let s = (x + 2.0 * y).sin();
                assert!((out.components[0][i * m + j] + s / s5).abs() < 1e-12);
                assert!((out.components[1][i * m + j] + 2.0 * s / s5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_shape() {
        assert!(fft_riesz_oracle(&[1.0, 2.0, 3.0], &[2]).is_err());
        assert!(fft_riesz_oracle(&[], &[0]).is_err());
    }
}
