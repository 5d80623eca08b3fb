//! Steady-state and stability analysis of the closed loop.
//!
//! * [`solve_equilibrium`] solves the incremental equilibrium equations directly.
//! * [`spectral_equilibrium`] reaches the same point through the eigen-decomposition of
//!   `A₁ = ((k^ω + k^droop) V_nom / k^ω) L_R + (k^droop k^V / k^ω) I` (uniform gains only).
//! * [`certify_stability`] builds the quadratic form `Q₁` whose positivity makes
//!   `W` a strict Lyapunov function, and cross-checks with the spectrum of `A`.
//! * [`theorem2_bounds`] evaluates the closed-form steady-state error bounds `e_droop`
//!   (also known as `e^gen`), `e_V`, `e_ω` and compares them with the achieved errors.

use nalgebra::linalg::balancing::balance_parlett_reinsch;
use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::grid::{sorted_symmetric_eigen, LaplacianBundle};
use crate::plant::{assemble_closed_loop, droop_power, SystemParams};
use crate::scalar::{tolerance, Scalar};

/// Incremental equilibrium `(ω̂, V̂)` for a constant disturbance.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumResult<T: Scalar> {
    pub omega_hat: DVector<T>,
    pub v_hat: DVector<T>,
    pub pdroop: DVector<T>,
    /// `‖lhs·x̂ − rhs‖_∞` of the equilibrium equations.
    pub residual_norm: T,
}

impl<T: Scalar> EquilibriumResult<T> {
    /// `[ω̂; V̂]`.
    pub fn stacked(&self) -> DVector<T> {
        let n = self.omega_hat.len();
        DVector::from_fn(2 * n, |k, _| if k < n { self.omega_hat[k] } else { self.v_hat[k - n] })
    }
}

fn check_pm<T: Scalar>(params: &SystemParams<T>, p_m: &DVector<T>) -> Result<()> {
    if p_m.len() != params.n() {
        return Err(Error::DimensionMismatch {
            what: "p_m",
            expected: params.n(),
            found: p_m.len(),
        });
    }
    if p_m.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("p_m", None, "must be finite"));
    }
    Ok(())
}

fn check_inputs<T: Scalar>(params: &SystemParams<T>, laplacian: &LaplacianBundle<T>, p_m: &DVector<T>) -> Result<()> {
    params.validate()?;
    if laplacian.n() != params.n() {
        return Err(Error::DimensionMismatch {
            what: "Laplacian",
            expected: params.n(),
            found: laplacian.n(),
        });
    }
    check_pm(params, p_m)?;
    params.require_reference_equilibrium(laplacian)
}

/// Left-hand matrix of the equilibrium equations
/// `[−(K^ω+K^droop), K^V; K^ω, −(K^V + V_nom L_R)] [ω̂; V̂] = [−P^m; 0]`.
fn equilibrium_matrix<T: Scalar>(params: &SystemParams<T>, laplacian: &LaplacianBundle<T>) -> DMatrix<T> {
    let n = params.n();
    let l = laplacian.laplacian();
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        m[(i, i)] = -(params.k_omega[i] + params.k_droop[i]);
        m[(i, n + i)] = params.k_v[i];
        m[(n + i, i)] = params.k_omega[i];
        for j in 0..n {
            m[(n + i, n + j)] = -params.v_nom * l[(i, j)];
        }
        m[(n + i, n + i)] -= params.k_v[i];
    }
    m
}

fn equilibrium_residual<T: Scalar>(lhs: &DMatrix<T>, x: &DVector<T>, rhs: &DVector<T>) -> (T, T) {
    let residual = (lhs * x - rhs).amax();
    let scale = (lhs.amax() * x.amax()).max(rhs.amax()).max(T::one());
    (residual, scale)
}

/// Direct solve of the 2n×2n equilibrium system. Requires balanced nominals and references that
/// carry the nominal injections.
pub fn solve_equilibrium<T: Scalar>(
    params: &SystemParams<T>,
    laplacian: &LaplacianBundle<T>,
    p_m: &DVector<T>,
) -> Result<EquilibriumResult<T>> {
    check_inputs(params, laplacian, p_m)?;
    let n = params.n();
    let lhs = equilibrium_matrix(params, laplacian);
    let rhs = DVector::from_fn(2 * n, |k, _| if k < n { -p_m[k] } else { T::zero() });
    let x = lhs
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("equilibrium matrix is singular".into()))?;
    let (residual, scale) = equilibrium_residual(&lhs, &x, &rhs);
    if !(residual <= tolerance::<T>(1e-9) * scale) {
        return Err(Error::Numerical(format!(
            "equilibrium residual {residual:e} exceeds tolerance"
        )));
    }
    let omega_hat = x.rows(0, n).into_owned();
    let v_hat = x.rows(n, n).into_owned();
    let omega = omega_hat.map(|w| w + params.omega_ref);
    Ok(EquilibriumResult {
        pdroop: droop_power(params, &omega),
        omega_hat,
        v_hat,
        residual_norm: residual,
    })
}

/// Scalar gains shared by every node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformGains<T> {
    pub k_omega: T,
    pub k_droop: T,
    pub k_v: T,
}

/// Extracts the common gains, naming the nodes that deviate from node 1.
pub fn uniform_gains<T: Scalar>(params: &SystemParams<T>) -> Result<UniformGains<T>> {
    let tol = tolerance::<T>(1e-12);
    let check = |gain: &'static str, values: &DVector<T>| -> Result<T> {
        let first = values[0];
        let nodes: Vec<usize> = values
            .iter()
            .enumerate()
            .filter(|(_, &x)| (x - first).abs() > tol * first.abs().max(x.abs()))
            .map(|(i, _)| i)
            .collect();
        if nodes.is_empty() {
            Ok(first)
        } else {
            Err(Error::NonUniformGains { gain, nodes })
        }
    };
    Ok(UniformGains {
        k_omega: check("k_omega", &params.k_omega)?,
        k_droop: check("k_droop", &params.k_droop)?,
        k_v: check("k_v", &params.k_v)?,
    })
}

/// Equilibrium reached through the eigenbasis of `A₁`, with the decomposition data.
#[derive(Debug, Clone)]
pub struct SpectralEquilibrium<T: Scalar> {
    pub equilibrium: EquilibriumResult<T>,
    pub gains: UniformGains<T>,
    pub a1: DMatrix<T>,
    /// Eigenvalues `λ¹_i` of `A₁`, ascending.
    pub eigenvalues: DVector<T>,
    /// Orthonormal eigenvectors `v¹_i` (columns).
    pub eigenvectors: DMatrix<T>,
    /// `a¹_i = (v¹_i)ᵀ P^m / λ¹_i`.
    pub coefficients: DVector<T>,
}

impl<T: Scalar> SpectralEquilibrium<T> {
    /// The value `k^droop k^V / k^ω` that the smallest eigenvalue of `A₁` must take.
    pub fn expected_smallest_eigenvalue(&self) -> T {
        self.gains.k_droop * self.gains.k_v / self.gains.k_omega
    }
}

pub fn spectral_equilibrium<T: Scalar>(
    params: &SystemParams<T>,
    laplacian: &LaplacianBundle<T>,
    p_m: &DVector<T>,
) -> Result<SpectralEquilibrium<T>> {
    check_inputs(params, laplacian, p_m)?;
    let gains = uniform_gains(params)?;
    let UniformGains { k_omega: kw, k_droop: kd, k_v: kv } = gains;
    let n = params.n();
    let nf = T::from_usize(n).expect("node count");

    let coupling = (kw + kd) * params.v_nom / kw;
    let shift = kd * kv / kw;
    let mut a1 = laplacian.laplacian() * coupling;
    for i in 0..n {
        a1[(i, i)] += shift;
    }
    let (eigenvalues, eigenvectors) = sorted_symmetric_eigen(&a1)?;
    let coefficients = DVector::from_fn(n, |k, _| eigenvectors.column(k).dot(p_m) / eigenvalues[k]);

    let total: T = p_m.sum();
    let mean_v = kw * total / (nf * kd * kv);
    let mut v_hat = DVector::from_element(n, mean_v);
    let mut omega_sum = DVector::from_element(n, kw * total / (nf * kd)) + p_m;
    for k in 1..n {
        let col = eigenvectors.column(k);
        v_hat += col * coefficients[k];
        omega_sum += col * (kv * coefficients[k]);
    }
    let omega_hat = omega_sum / (kw + kd);

    let lhs = equilibrium_matrix(params, laplacian);
    let rhs = DVector::from_fn(2 * n, |k, _| if k < n { -p_m[k] } else { T::zero() });
    let x = DVector::from_fn(2 * n, |k, _| if k < n { omega_hat[k] } else { v_hat[k - n] });
    let (residual, _) = equilibrium_residual(&lhs, &x, &rhs);
    let omega = omega_hat.map(|w| w + params.omega_ref);

    Ok(SpectralEquilibrium {
        equilibrium: EquilibriumResult {
            pdroop: droop_power(params, &omega),
            omega_hat,
            v_hat,
            residual_norm: residual,
        },
        gains,
        a1,
        eigenvalues,
        eigenvectors,
        coefficients,
    })
}

/// Outcome of the stability certificate.
#[derive(Debug, Clone)]
pub struct CertificateReport<T: Scalar> {
    /// Eigenvalues of `Q₁`, ascending.
    pub q1_eigenvalues: DVector<T>,
    /// Eigenvalues of the unit-diagonal congruent form `D Q₁ D`, `D = diag(Q₁)^{-1/2}`, ascending.
    pub q1_scaled_eigenvalues: DVector<T>,
    pub q1_positive_definite: bool,
    /// Diagonal of the Schur complement `K^ω (K^V)⁻¹ K^droop`.
    pub schur_matrix_eigenvalues: DVector<T>,
    /// Eigenvalues of `A`, sorted by real part then imaginary part.
    pub a_eigenvalues: Vec<Complex<T>>,
    pub spectral_abscissa: T,
}

impl<T: Scalar> CertificateReport<T> {
    pub fn q1_min_eigenvalue(&self) -> T {
        self.q1_eigenvalues[0]
    }

    pub fn is_stable(&self) -> bool {
        self.q1_positive_definite && self.spectral_abscissa < T::zero()
    }
}

/// `Q₁ = [K^ω(K^V)⁻¹(K^ω+K^droop), −K^ω; −K^ω, V_nom L_R + K^V]`, so that `Ẇ = −x̄ᵀ Q₁ x̄`.
pub fn q1_matrix<T: Scalar>(params: &SystemParams<T>, laplacian: &LaplacianBundle<T>) -> DMatrix<T> {
    let n = params.n();
    let l = laplacian.laplacian();
    let mut q = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        let (kw, kd, kv) = (params.k_omega[i], params.k_droop[i], params.k_v[i]);
        q[(i, i)] = kw / kv * (kw + kd);
        q[(i, n + i)] = -kw;
        q[(n + i, i)] = -kw;
        for j in 0..n {
            q[(n + i, n + j)] = params.v_nom * l[(i, j)];
        }
        q[(n + i, n + i)] += kv;
    }
    q
}

/// Eigenvalues of a general real matrix after Parlett–Reinsch balancing.
pub fn balanced_eigenvalues<T: Scalar>(matrix: &DMatrix<T>) -> Result<Vec<Complex<T>>> {
    let mut balanced = matrix.clone();
    balance_parlett_reinsch(&mut balanced);
    let schur = Schur::try_new(balanced, T::epsilon(), 0)
        .ok_or_else(|| Error::Numerical("Schur decomposition did not converge".into()))?;
    let mut values: Vec<Complex<T>> = schur.complex_eigenvalues().iter().copied().collect();
    values.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.im.partial_cmp(&b.im).unwrap_or(std::cmp::Ordering::Equal))
    });
    Ok(values)
}

/// Relative threshold for declaring the scaled `Q₁` positive definite.
pub const PD_RELATIVE_THRESHOLD: f64 = 1e-10;

pub fn certify_stability<T: Scalar>(
    params: &SystemParams<T>,
    laplacian: &LaplacianBundle<T>,
) -> Result<CertificateReport<T>> {
    let matrices = assemble_closed_loop(params, laplacian)?;
    let q1 = q1_matrix(params, laplacian);
    let (q1_eigenvalues, _) = sorted_symmetric_eigen(&q1)?;

    // Definiteness is invariant under congruence; the unit-diagonal form is far better
    // conditioned when the gains span many decades.
    let d = q1.diagonal().map(|x| T::one() / x.sqrt());
    let scaled = DMatrix::from_fn(q1.nrows(), q1.ncols(), |i, j| d[i] * q1[(i, j)] * d[j]);
    let (q1_scaled_eigenvalues, _) = sorted_symmetric_eigen(&scaled)?;
    let last = q1_scaled_eigenvalues.len() - 1;
    let q1_positive_definite = q1_scaled_eigenvalues[0] > T::lit(PD_RELATIVE_THRESHOLD) * q1_scaled_eigenvalues[last];

    let schur_matrix_eigenvalues = DVector::from_fn(params.n(), |i, _| {
        params.k_omega[i] / params.k_v[i] * params.k_droop[i]
    });

    let a_eigenvalues = balanced_eigenvalues(&matrices.a)?;
    let spectral_abscissa = a_eigenvalues
        .iter()
        .map(|z| z.re)
        .fold(-T::max_value().expect("bounded scalar"), |a, b| a.max(b));

    Ok(CertificateReport {
        q1_eigenvalues,
        q1_scaled_eigenvalues,
        q1_positive_definite,
        schur_matrix_eigenvalues,
        a_eigenvalues,
        spectral_abscissa,
    })
}

/// Three-way satisfaction flags in the order droop, voltage, frequency.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Satisfied {
    pub droop: bool,
    pub voltage: bool,
    pub omega: bool,
}

impl Satisfied {
    pub fn all(&self) -> bool {
        self.droop && self.voltage && self.omega
    }

    pub fn as_array(&self) -> [bool; 3] {
        [self.droop, self.voltage, self.omega]
    }
}

/// Steady-state error bounds and the errors actually reached.
#[derive(Debug, Clone)]
pub struct BoundsReport<T: Scalar> {
    /// Droop-sharing bound (also written `e^gen`).
    pub e_droop: T,
    pub e_v: T,
    pub e_omega: T,
    /// `‖P^droop + mean(P^m)·1‖_∞` at the equilibrium.
    pub achieved_droop_error: T,
    /// `‖V̂‖_∞`.
    pub achieved_v_error: T,
    /// `‖ω̂‖_∞`.
    pub achieved_omega_error: T,
    pub satisfied: Satisfied,
    /// `max_ij |P^droop_i − P^droop_j|`, informational.
    pub fairness_spread: T,
    pub equilibrium: EquilibriumResult<T>,
}

/// Relative slack when comparing an achieved error with its bound.
pub const BOUND_RELATIVE_TOLERANCE: f64 = 1e-12;

fn within<T: Scalar>(achieved: T, bound: T, scale: T) -> bool {
    achieved <= bound + T::lit(BOUND_RELATIVE_TOLERANCE) * bound.max(scale)
}

struct NaturalScales<T> {
    droop: T,
    voltage: T,
    omega: T,
}

fn natural_scales<T: Scalar>(params: &SystemParams<T>, p_m: &DVector<T>) -> NaturalScales<T> {
    // Magnitudes of each error for a unit-norm disturbance; used as the floor for the slack
    // so that an exact zero is not rejected over rounding.
    let p = p_m.amax();
    let kd = params.k_droop.min();
    let kv = params.k_v.min();
    let kw = params.k_omega.max();
    NaturalScales {
        droop: p,
        voltage: p * kw / (kd * kv),
        omega: p / kd,
    }
}

pub fn theorem2_bounds<T: Scalar>(
    params: &SystemParams<T>,
    laplacian: &LaplacianBundle<T>,
    p_m: &DVector<T>,
) -> Result<BoundsReport<T>> {
    let spectral = spectral_equilibrium(params, laplacian, p_m)?;
    let UniformGains { k_omega: kw, k_droop: kd, k_v: kv } = spectral.gains;
    let n = params.n();
    let nf = T::from_usize(n).expect("node count");
    let vn = params.v_nom;
    let inv_sum = laplacian.inverse_nonzero_eigenvalue_sum();
    let p_max = p_m.amax();
    let total_abs = p_m.sum().abs();
    let graph_term = (nf - T::one()) + kv / vn * inv_sum;

    let e_droop = kd * p_max / (kd + kw) * graph_term;
    let e_v = kw * total_abs / (nf * kd * kv) + kw * p_max / ((kw + kd) * vn) * inv_sum;
    let e_omega = total_abs / (nf * kd) + p_max / (kd + kw) * graph_term;

    let eq = spectral.equilibrium;
    let objective = objective_errors(&eq, p_m);
    let scales = natural_scales(params, p_m);
    let satisfied = Satisfied {
        droop: within(objective.droop_error, e_droop, scales.droop),
        voltage: within(objective.v_error, e_v, scales.voltage),
        omega: within(objective.omega_error, e_omega, scales.omega),
    };
    let fairness_spread = if n == 0 { T::zero() } else { eq.pdroop.max() - eq.pdroop.min() };

    Ok(BoundsReport {
        e_droop,
        e_v,
        e_omega,
        achieved_droop_error: objective.droop_error,
        achieved_v_error: objective.v_error,
        achieved_omega_error: objective.omega_error,
        satisfied,
        fairness_spread,
        equilibrium: eq,
    })
}

/// Steady-state objective errors of an equilibrium.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveErrors<T> {
    pub droop_error: T,
    pub v_error: T,
    pub omega_error: T,
}

pub fn objective_errors<T: Scalar>(eq: &EquilibriumResult<T>, p_m: &DVector<T>) -> ObjectiveErrors<T> {
    let n = p_m.len();
    let mean = if n == 0 { T::zero() } else { p_m.sum() / T::from_usize(n).expect("node count") };
    ObjectiveErrors {
        droop_error: eq.pdroop.map(|p| p + mean).amax(),
        v_error: eq.v_hat.amax(),
        omega_error: eq.omega_hat.amax(),
    }
}

/// Objective check at the equilibrium against supplied bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveCheck<T> {
    pub errors: ObjectiveErrors<T>,
    pub bounds: [T; 3],
    pub satisfied: Satisfied,
}

pub fn check_objective<T: Scalar>(
    equilibrium: &EquilibriumResult<T>,
    p_m: &DVector<T>,
    bounds: &BoundsReport<T>,
) -> ObjectiveCheck<T> {
    let errors = objective_errors(equilibrium, p_m);
    // Rounding floor relative to the disturbance size only; the gains are not known here.
    let floor = p_m.amax();
    let ok = |achieved: T, bound: T| achieved <= bound + T::lit(BOUND_RELATIVE_TOLERANCE) * bound.max(floor);
    ObjectiveCheck {
        errors,
        bounds: [bounds.e_droop, bounds.e_v, bounds.e_omega],
        satisfied: Satisfied {
            droop: ok(errors.droop_error, bounds.e_droop),
            voltage: ok(errors.v_error, bounds.e_v),
            omega: ok(errors.omega_error, bounds.e_omega),
        },
    }
}
