//! Embedded Runge–Kutta–Fehlberg 4(5) integrator with step-size control.
//!
//! The fourth-order solution is propagated and the fifth-order companion only drives the
//! error estimate, so the global error behaves as `O(h⁴)` on smooth problems.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const C: [f64; 6] = [0.0, 0.25, 0.375, 12.0 / 13.0, 1.0, 0.5];

#[rustfmt::skip]
const A: [[f64; 5]; 6] = [
    [0.0, 0.0, 0.0, 0.0, 0.0],
    [0.25, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 32.0, 9.0 / 32.0, 0.0, 0.0, 0.0],
    [1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0, 0.0, 0.0],
    [439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0, 0.0],
    [-8.0 / 27.0, 2.0, -3544.0 / 2565.0, 1859.0 / 4104.0, -11.0 / 40.0],
];

const B4: [f64; 6] = [25.0 / 216.0, 0.0, 1408.0 / 2565.0, 2197.0 / 4104.0, -0.2, 0.0];
/// Extent of the propagated fourth-order method's stability region along the negative real axis.
pub const REAL_AXIS_STABILITY: f64 = 3.02;

const B5: [f64; 6] = [16.0 / 135.0, 0.0, 6656.0 / 12825.0, 28561.0 / 56430.0, -9.0 / 50.0, 2.0 / 55.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOptions<T> {
    pub rtol: T,
    pub atol: T,
    pub dt_max: T,
    /// Steps below this size abort with [`Error::StepSizeUnderflow`].
    pub dt_min: T,
    /// Take every step at `dt_max` (clipped at segment ends) without error control.
    pub fixed_step: bool,
}

impl<T: Scalar> IntegratorOptions<T> {
    pub fn adaptive(dt_max: T) -> Self {
        IntegratorOptions {
            rtol: T::lit(1e-8),
            atol: T::lit(1e-10),
            dt_max,
            dt_min: T::lit(1e-12),
            fixed_step: false,
        }
    }

    pub fn fixed(dt: T) -> Self {
        IntegratorOptions {
            fixed_step: true,
            ..Self::adaptive(dt)
        }
    }
}

/// One accepted step with the data needed for Hermite interpolation.
#[derive(Debug, Clone)]
pub struct AcceptedStep<'a, T: Scalar> {
    pub t0: T,
    pub y0: &'a DVector<T>,
    pub f0: &'a DVector<T>,
    pub t1: T,
    pub y1: &'a DVector<T>,
    pub f1: &'a DVector<T>,
}

impl<T: Scalar> AcceptedStep<'_, T> {
    /// Cubic Hermite interpolant on `[t0, t1]`.
    pub fn interpolate(&self, t: T) -> DVector<T> {
        let h = self.t1 - self.t0;
        let s = (t - self.t0) / h;
        let one = T::one();
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = two * s3 - three * s2 + one;
        let h10 = s3 - two * s2 + s;
        let h01 = -two * s3 + three * s2;
        let h11 = s3 - s2;
        self.y0 * h00 + self.f0 * (h10 * h) + self.y1 * h01 + self.f1 * (h11 * h)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evaluations: usize,
}

impl std::ops::AddAssign for IntegrationStats {
    fn add_assign(&mut self, other: Self) {
        self.accepted += other.accepted;
        self.rejected += other.rejected;
        self.rhs_evaluations += other.rhs_evaluations;
    }
}

/// Result of integrating one smooth segment.
#[derive(Debug, Clone)]
pub struct SegmentEnd<T: Scalar> {
    pub y: DVector<T>,
    pub f: DVector<T>,
    /// Step size to try first on a following segment.
    pub next_dt: T,
    pub stats: IntegrationStats,
}

fn error_norm<T: Scalar>(err: &DVector<T>, y0: &DVector<T>, y1: &DVector<T>, opts: &IntegratorOptions<T>) -> T {
    let mut worst = T::zero();
    for i in 0..err.len() {
        let scale = opts.atol + opts.rtol * y0[i].abs().max(y1[i].abs());
        worst = worst.max(err[i].abs() / scale);
    }
    worst
}

fn initial_step<T: Scalar>(y: &DVector<T>, f: &DVector<T>, opts: &IntegratorOptions<T>) -> T {
    let mut d0 = T::zero();
    let mut d1 = T::zero();
    for i in 0..y.len() {
        let scale = opts.atol + opts.rtol * y[i].abs();
        d0 = d0.max(y[i].abs() / scale);
        d1 = d1.max(f[i].abs() / scale);
    }
    let guess = if d0 < T::lit(1e-5) || d1 < T::lit(1e-5) {
        T::lit(1e-6)
    } else {
        T::lit(0.01) * d0 / d1
    };
    guess.min(opts.dt_max)
}

/// Integrates `ẏ = rhs(t, y)` from `t0` to `t1`, calling `on_step` after every accepted step.
///
/// `f0` must equal `rhs(t0, y0)`. `dt_hint` seeds the first trial step (`None` picks one).
pub fn integrate<T, F, S>(
    mut rhs: F,
    t0: T,
    y0: DVector<T>,
    f0: DVector<T>,
    t1: T,
    opts: &IntegratorOptions<T>,
    dt_hint: Option<T>,
    mut on_step: S,
) -> Result<SegmentEnd<T>>
where
    T: Scalar,
    F: FnMut(T, &DVector<T>) -> Result<DVector<T>>,
    S: FnMut(&AcceptedStep<'_, T>) -> Result<()>,
{
    let mut stats = IntegrationStats::default();
    let mut t = t0;
    let mut y = y0;
    let mut f = f0;
    let span = t1 - t0;
    if span <= T::zero() {
        return Ok(SegmentEnd {
            y,
            f,
            next_dt: dt_hint.unwrap_or(opts.dt_max),
            stats,
        });
    }
    let mut h = if opts.fixed_step {
        opts.dt_max
    } else {
        dt_hint.unwrap_or_else(|| initial_step(&y, &f, opts)).min(opts.dt_max)
    };
    let end_slack = span * T::lit(1e-12);
    let mut last_full_h = h;

    let mut k: Vec<DVector<T>> = Vec::with_capacity(6);
    loop {
        let remaining = t1 - t;
        if remaining <= end_slack {
            break;
        }
        let clipped = h >= remaining;
        let step = if clipped { remaining } else { h };
        if !opts.fixed_step && step < opts.dt_min && !clipped {
            return Err(Error::StepSizeUnderflow {
                time: t.to_f64_lossy(),
                dt: step.to_f64_lossy(),
            });
        }

        k.clear();
        k.push(f.clone());
        for stage in 1..6 {
            let mut ys = y.clone();
            for (j, kj) in k.iter().enumerate().take(stage) {
                let a = A[stage][j];
                if a != 0.0 {
                    ys.axpy(step * T::lit(a), kj, T::one());
                }
            }
            k.push(rhs(t + step * T::lit(C[stage]), &ys)?);
        }
        stats.rhs_evaluations += 5;

        let mut y_new = y.clone();
        let mut err = DVector::zeros(y.len());
        for (j, kj) in k.iter().enumerate() {
            if B4[j] != 0.0 {
                y_new.axpy(step * T::lit(B4[j]), kj, T::one());
            }
            let e = B5[j] - B4[j];
            if e != 0.0 {
                err.axpy(step * T::lit(e), kj, T::one());
            }
        }
        if y_new.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState {
                time: (t + step).to_f64_lossy(),
            });
        }

        let accept = if opts.fixed_step {
            true
        } else {
            let en = error_norm(&err, &y, &y_new, opts);
            let factor = if en == T::zero() {
                T::lit(5.0)
            } else {
                (T::lit(0.9) * en.powf(T::lit(-0.2))).min(T::lit(5.0)).max(T::lit(0.2))
            };
            if en <= T::one() {
                if !clipped {
                    last_full_h = step;
                }
                h = (step * factor).min(opts.dt_max);
                true
            } else {
                stats.rejected += 1;
                h = step * factor.min(T::one());
                false
            }
        };
        if !accept {
            continue;
        }

        let t_new = if clipped { t1 } else { t + step };
        let f_new = rhs(t_new, &y_new)?;
        stats.rhs_evaluations += 1;
        stats.accepted += 1;
        on_step(&AcceptedStep {
            t0: t,
            y0: &y,
            f0: &f,
            t1: t_new,
            y1: &y_new,
            f1: &f_new,
        })?;
        t = t_new;
        y = y_new;
        f = f_new;
        if clipped {
            break;
        }
    }
    let next_dt = if opts.fixed_step { opts.dt_max } else { last_full_h.max(h) };
    Ok(SegmentEnd { y, f, next_dt, stats })
}
