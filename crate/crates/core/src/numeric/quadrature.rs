//! Globally adaptive Gauss–Kronrod (7/15 point) quadrature.
//!
//! The integrand may return several components at once; all components share
//! the subdivision and every one of them must meet the tolerance. Error
//! estimates follow the QUADPACK rescaling of `|K15 - G7|`.

use crate::error::{Error, QuadratureDiagnostics, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5] and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Tolerances and subdivision budget for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadratureOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subintervals: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-14,
            rel_tol: 1e-11,
            max_subintervals: 400,
        }
    }
}

/// Integral estimate with its error bound, per component.
#[derive(Debug, Clone, Copy)]
pub struct Integral<const N: usize> {
    pub value: [f64; N],
    pub error: [f64; N],
    pub subintervals: usize,
}

#[derive(Clone, Copy)]
struct Segment<const N: usize> {
    a: f64,
    b: f64,
    value: [f64; N],
    error: [f64; N],
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut scaled = err.abs();
    if res_asc != 0.0 && scaled != 0.0 {
        scaled = res_asc * (200.0 * scaled / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        scaled = scaled.max(50.0 * f64::EPSILON * res_abs);
    }
    scaled
}

fn gauss_kronrod<const N: usize, F>(f: &F, a: f64, b: f64) -> Segment<N>
where
    F: Fn(f64) -> [f64; N],
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let abs_half = half.abs();

    let fc = f(center);
    let mut kronrod = [0.0; N];
    let mut gauss = [0.0; N];
    let mut res_abs = [0.0; N];
    let mut samples = [[[0.0; N]; 2]; 7];
    for c in 0..N {
        kronrod[c] = fc[c] * WGK[7];
        gauss[c] = fc[c] * WG[3];
        res_abs[c] = kronrod[c].abs();
    }
    for (j, s) in samples.iter_mut().enumerate() {
        let dx = half * XGK[j];
        let lo = f(center - dx);
        let hi = f(center + dx);
        for c in 0..N {
            let sum = lo[c] + hi[c];
            kronrod[c] += WGK[j] * sum;
            res_abs[c] += WGK[j] * (lo[c].abs() + hi[c].abs());
            if j % 2 == 1 {
                gauss[c] += WG[j / 2] * sum;
            }
        }
        *s = [lo, hi];
    }

    let mut value = [0.0; N];
    let mut error = [0.0; N];
    for c in 0..N {
        let mean = 0.5 * kronrod[c];
        let mut res_asc = WGK[7] * (fc[c] - mean).abs();
        for (j, s) in samples.iter().enumerate() {
            res_asc += WGK[j] * ((s[0][c] - mean).abs() + (s[1][c] - mean).abs());
        }
        value[c] = kronrod[c] * half;
        error[c] = rescale_error(
            (kronrod[c] - gauss[c]) * half,
            res_abs[c] * abs_half,
            res_asc * abs_half,
        );
    }
    Segment { a, b, value, error }
}

/// Integrates a vector-valued function over the finite interval `[a, b]`.
///
/// The endpoints are never evaluated, so integrable endpoint singularities
/// (for example a logarithm at zero) are handled by repeated bisection.
pub fn integrate<const N: usize, F>(f: F, a: f64, b: f64, opts: QuadratureOptions) -> Result<Integral<N>>
where
    F: Fn(f64) -> [f64; N],
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Input(format!("quadrature limits must be finite, got [{a}, {b}]")));
    }
    if a == b {
        return Ok(Integral {
            value: [0.0; N],
            error: [0.0; N],
            subintervals: 0,
        });
    }

    let mut segments = vec![gauss_kronrod(&f, a, b)];
    loop {
        let mut total = [0.0; N];
        let mut total_err = [0.0; N];
        for s in &segments {
            for c in 0..N {
                total[c] += s.value[c];
                total_err[c] += s.error[c];
            }
        }
        let converged = (0..N).all(|c| total_err[c] <= opts.abs_tol.max(opts.rel_tol * total[c].abs()));
        if converged {
            return Ok(Integral {
                value: total,
                error: total_err,
                subintervals: segments.len(),
            });
        }
        if segments.len() >= opts.max_subintervals {
            let worst = (0..N)
                .max_by(|&i, &j| total_err[i].total_cmp(&total_err[j]))
                .unwrap_or(0);
            return Err(Error::Quadrature(QuadratureDiagnostics {
                lower: a,
                upper: b,
                estimate: total[worst],
                error_estimate: total_err[worst],
                subintervals: segments.len(),
            }));
        }

        // Bisect the segment with the largest error relative to its tolerance share.
        let scale: [f64; N] = std::array::from_fn(|c| opts.abs_tol.max(opts.rel_tol * total[c].abs()));
        let (idx, _) = segments
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let worst = (0..N).map(|c| s.error[c] / scale[c]).fold(0.0, f64::max);
                (i, worst)
            })
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .expect("segments is never empty");
        let seg = segments.swap_remove(idx);
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a.min(seg.b) || mid >= seg.a.max(seg.b) {
            // Interval can no longer be split in floating point.
            return Err(Error::Quadrature(QuadratureDiagnostics {
                lower: a,
                upper: b,
                estimate: total[0],
                error_estimate: total_err[0],
                subintervals: segments.len() + 1,
            }));
        }
        segments.push(gauss_kronrod(&f, seg.a, mid));
        segments.push(gauss_kronrod(&f, mid, seg.b));
    }
}

/// Scalar convenience wrapper around [`integrate`].
pub fn integrate_scalar<F>(f: F, a: f64, b: f64, opts: QuadratureOptions) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    integrate(|x| [f(x)], a, b, opts).map(|r| r.value[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomials_are_exact() {
        // K15 integrates polynomials up to degree 22 exactly.
        let v = integrate_scalar(|x| x.powi(9) - 3.0 * x * x, -1.0, 2.0, QuadratureOptions::default()).unwrap();
        let exact = (2f64.powi(10) - 1.0) / 10.0 - (8.0 + 1.0);
        assert_relative_eq!(v, exact, max_relative = 1e-14);
    }

    #[test]
    fn log_singularity_at_endpoint() {
        // ∫_0^1 ln(x)^2 dx = 2
        let v = integrate_scalar(|x| x.ln().powi(2), 0.0, 1.0, QuadratureOptions::default()).unwrap();
        assert_relative_eq!(v, 2.0, max_relative = 1e-10);
    }

    #[test]
    fn vector_components_share_subdivision() {
        let r = integrate(|x: f64| [x.exp(), x.sin(), 1.0], 0.0, 3.0, QuadratureOptions::default()).unwrap();
        assert_relative_eq!(r.value[0], 3f64.exp() - 1.0, max_relative = 1e-12);
        assert_relative_eq!(r.value[1], 1.0 - 3f64.cos(), max_relative = 1e-12);
        assert_relative_eq!(r.value[2], 3.0, max_relative = 1e-14);
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let v = integrate_scalar(|x| x * x, 1.0, 0.0, QuadratureOptions::default()).unwrap();
        assert_relative_eq!(v, -1.0 / 3.0, max_relative = 1e-14);
    }

    #[test]
    fn budget_exhaustion_reports_diagnostics() {
        let opts = QuadratureOptions {
            abs_tol: 0.0,
            rel_tol: 1e-15,
            max_subintervals: 3,
        };
        let err = integrate_scalar(|x: f64| (1.0 / x).sin(), 1e-6, 1.0, opts).unwrap_err();
        assert!(matches!(err, Error::Quadrature(d) if d.subintervals >= 3));
    }
}
