//! Aggregate AC areas coupled through droop-controlled converters.
//!
//! Each area `i` follows the first-order swing equation
//! `m_i ω̇_i = −K^droop_i (ω_i − ω_ref) + P^nom_i + P^m_i − P^inj_i`
//! and each converter capacitor `C_i V̇_i = −Σ_j (V_i − V_j)/R_ij + I^inj_i`.
//! The converter injects `P^inj_i = P^inj,nom_i + K^ω_i (ω_i − ω_ref) + K^V_i (V^ref_i − V_i)`,
//! related to the DC current either exactly (`V_i I_i = P_i`) or linearized
//! around the nominal voltage (`V_nom I_i = P_i`).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid::LaplacianBundle;
use crate::scalar::Scalar;

/// Physical and controller constants in per-unit. Vectors are indexed by node.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams<T: Scalar> {
    pub inertia: DVector<T>,
    pub capacitance: DVector<T>,
    pub k_droop: DVector<T>,
    pub k_omega: DVector<T>,
    pub k_v: DVector<T>,
    pub v_ref: DVector<T>,
    pub p_nom: DVector<T>,
    pub p_inj_nom: DVector<T>,
    pub omega_ref: T,
    pub v_nom: T,
}

impl<T: Scalar> SystemParams<T> {
    /// Identical areas with zero nominal powers and `V^ref = V^nom`.
    #[allow(clippy::too_many_arguments)]
    pub fn uniform(n: usize, inertia: T, capacitance: T, k_droop: T, k_omega: T, k_v: T, omega_ref: T, v_nom: T) -> Self {
        let fill = |x: T| DVector::from_element(n, x);
        SystemParams {
            inertia: fill(inertia),
            capacitance: fill(capacitance),
            k_droop: fill(k_droop),
            k_omega: fill(k_omega),
            k_v: fill(k_v),
            v_ref: fill(v_nom),
            p_nom: fill(T::zero()),
            p_inj_nom: fill(T::zero()),
            omega_ref,
            v_nom,
        }
    }

    pub fn n(&self) -> usize {
        self.inertia.len()
    }

    fn per_node(&self) -> [(&'static str, &DVector<T>, bool); 8] {
        [
            ("inertia", &self.inertia, true),
            ("capacitance", &self.capacitance, true),
            ("k_droop", &self.k_droop, true),
            ("k_omega", &self.k_omega, true),
            ("k_v", &self.k_v, true),
            ("v_ref", &self.v_ref, false),
            ("p_nom", &self.p_nom, false),
            ("p_inj_nom", &self.p_inj_nom, false),
        ]
    }

    /// Checks lengths, finiteness and strict positivity of inertias, capacitances and gains.
    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n == 0 {
            return Err(Error::invalid("inertia", None, "at least one node is required"));
        }
        for (name, values, positive) in self.per_node() {
            if values.len() != n {
                return Err(Error::invalid(
                    name,
                    None,
                    format!("expected {n} entries, found {}", values.len()),
                ));
            }
            for (i, &x) in values.iter().enumerate() {
                if !x.is_finite() {
                    return Err(Error::invalid(name, Some(i), "must be finite"));
                }
                if positive && x <= T::zero() {
                    return Err(Error::invalid(name, Some(i), format!("must be > 0, got {x}")));
                }
            }
        }
        if !self.omega_ref.is_finite() {
            return Err(Error::invalid("omega_ref", None, "must be finite"));
        }
        if !self.v_nom.is_finite() || self.v_nom <= T::zero() {
            return Err(Error::invalid("v_nom", None, format!("must be > 0, got {}", self.v_nom)));
        }
        Ok(())
    }

    /// Nodes where nominal generation and nominal injection differ by more than `tol`.
    pub fn unbalanced_nodes(&self, tol: T) -> Vec<usize> {
        (0..self.n())
            .filter(|&i| (self.p_nom[i] - self.p_inj_nom[i]).abs() > tol)
            .collect()
    }

    /// Balanced nominals: `P^nom = P^inj,nom` elementwise.
    pub fn balanced_nominals(&self) -> bool {
        self.unbalanced_nodes(self.nominal_tolerance()).is_empty()
    }

    fn nominal_tolerance(&self) -> T {
        let scale = self.p_nom.amax().max(self.p_inj_nom.amax()).max(T::one());
        crate::scalar::tolerance::<T>(1e-12) * scale
    }

    pub fn require_balanced(&self) -> Result<()> {
        let nodes = self.unbalanced_nodes(self.nominal_tolerance());
        if nodes.is_empty() {
            Ok(())
        } else {
            Err(Error::UnbalancedNominals { nodes })
        }
    }

    /// `‖V_nom L_R V^ref − P^inj,nom‖_∞`: zero when the reference voltages carry the nominal injections.
    pub fn reference_flow_mismatch(&self, laplacian: &LaplacianBundle<T>) -> T {
        let flow = laplacian.laplacian() * &self.v_ref * self.v_nom;
        (flow - &self.p_inj_nom).amax()
    }

    /// Requires `(ω_ref·1, V^ref)` to be an equilibrium when `P^m = 0`.
    pub fn require_reference_equilibrium(&self, laplacian: &LaplacianBundle<T>) -> Result<()> {
        self.require_balanced()?;
        let mismatch = self.reference_flow_mismatch(laplacian);
        let scale = (laplacian.laplacian().amax() * self.v_ref.amax() * self.v_nom)
            .max(self.p_inj_nom.amax())
            .max(T::one());
        if mismatch > crate::scalar::tolerance::<T>(1e-10) * scale {
            return Err(Error::ReferenceNotEquilibrium {
                residual: mismatch.to_f64_lossy(),
            });
        }
        Ok(())
    }

    fn check_dimension(&self, laplacian: &LaplacianBundle<T>) -> Result<()> {
        if laplacian.n() != self.n() {
            return Err(Error::DimensionMismatch {
                what: "Laplacian",
                expected: self.n(),
                found: laplacian.n(),
            });
        }
        Ok(())
    }
}

/// Reference voltages with mean `v_mean` that carry `p_inj_nom` in the linearized DC grid
/// (`V_nom L_R V^ref = P^inj,nom`). Requires `Σ P^inj,nom = 0`.
pub fn consistent_reference_voltages<T: Scalar>(
    laplacian: &LaplacianBundle<T>,
    v_nom: T,
    p_inj_nom: &DVector<T>,
    v_mean: T,
) -> Result<DVector<T>> {
    let n = laplacian.n();
    if p_inj_nom.len() != n {
        return Err(Error::DimensionMismatch {
            what: "p_inj_nom",
            expected: n,
            found: p_inj_nom.len(),
        });
    }
    let vecs = laplacian.eigenvectors();
    let vals = laplacian.eigenvalues();
    let mut v = DVector::from_element(n, v_mean);
    for k in 1..n {
        let col = vecs.column(k);
        let coeff = col.dot(p_inj_nom) / (vals[k] * v_nom);
        v += col * coeff;
    }
    Ok(v)
}

/// Uncontrolled generation deviation `P^m`, piecewise constant in time.
#[derive(Debug, Clone, PartialEq)]
pub struct Disturbance<T: Scalar> {
    initial: DVector<T>,
    steps: Vec<DisturbanceStep<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceStep<T: Scalar> {
    pub time: T,
    pub p_m: DVector<T>,
}

impl<T: Scalar> Disturbance<T> {
    pub fn constant(p_m: DVector<T>) -> Result<Self> {
        Self::new(p_m, Vec::new())
    }

    pub fn new(initial: DVector<T>, steps: Vec<DisturbanceStep<T>>) -> Result<Self> {
        let n = initial.len();
        if initial.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("p_m", None, "initial disturbance must be finite"));
        }
        for (k, step) in steps.iter().enumerate() {
            if step.p_m.len() != n {
                return Err(Error::DimensionMismatch {
                    what: "disturbance step",
                    expected: n,
                    found: step.p_m.len(),
                });
            }
            if !step.time.is_finite() || step.p_m.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid("disturbance.steps", None, format!("step {} is not finite", k + 1)));
            }
            if k > 0 && step.time <= steps[k - 1].time {
                return Err(Error::invalid(
                    "disturbance.steps",
                    None,
                    "step times must be strictly increasing",
                ));
            }
        }
        Ok(Disturbance { initial, steps })
    }

    pub fn n(&self) -> usize {
        self.initial.len()
    }

    pub fn initial(&self) -> &DVector<T> {
        &self.initial
    }

    pub fn steps(&self) -> &[DisturbanceStep<T>] {
        &self.steps
    }

    /// `P^m` in force at time `t`; a step at `t_s` applies from `t_s` onward.
    pub fn at(&self, t: T) -> &DVector<T> {
        self.steps
            .iter()
            .rev()
            .find(|s| s.time <= t)
            .map_or(&self.initial, |s| &s.p_m)
    }
}

/// Frequencies and DC voltages in per-unit.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState<T: Scalar> {
    pub omega: DVector<T>,
    pub voltage: DVector<T>,
}

impl<T: Scalar> SystemState<T> {
    /// The reference point `(ω_ref·1, V^ref)`.
    pub fn at_reference(params: &SystemParams<T>) -> Self {
        SystemState {
            omega: DVector::from_element(params.n(), params.omega_ref),
            voltage: params.v_ref.clone(),
        }
    }

    pub fn n(&self) -> usize {
        self.omega.len()
    }

    /// `[ω; V]`.
    pub fn stacked(&self) -> DVector<T> {
        let n = self.n();
        DVector::from_fn(2 * n, |k, _| if k < n { self.omega[k] } else { self.voltage[k - n] })
    }

    pub fn from_stacked(x: &DVector<T>) -> Self {
        let n = x.len() / 2;
        SystemState {
            omega: x.rows(0, n).into_owned(),
            voltage: x.rows(n, n).into_owned(),
        }
    }

    /// Incremental coordinates `[ω − ω_ref·1; V − V^ref]`.
    pub fn incremental(&self, params: &SystemParams<T>) -> DVector<T> {
        let mut x = self.stacked();
        let n = self.n();
        for i in 0..n {
            x[i] -= params.omega_ref;
            x[n + i] -= params.v_ref[i];
        }
        x
    }

    pub fn from_incremental(params: &SystemParams<T>, x_hat: &DVector<T>) -> Self {
        let n = params.n();
        SystemState {
            omega: DVector::from_fn(n, |i, _| x_hat[i] + params.omega_ref),
            voltage: DVector::from_fn(n, |i, _| x_hat[n + i] + params.v_ref[i]),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.omega.iter().chain(self.voltage.iter()).all(|x| x.is_finite())
    }
}

/// Closed-loop affine dynamics `ẋ = A x + b_const + b_dist_map P^m` in absolute coordinates `x = [ω; V]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopMatrices<T: Scalar> {
    pub a: DMatrix<T>,
    pub b_const: DVector<T>,
    pub b_dist_map: DMatrix<T>,
}

impl<T: Scalar> ClosedLoopMatrices<T> {
    pub fn n(&self) -> usize {
        self.b_dist_map.ncols()
    }

    /// Right-hand side in absolute coordinates.
    pub fn full_rhs(&self, x: &DVector<T>, p_m: &DVector<T>) -> Result<DVector<T>> {
        self.check(x, p_m)?;
        Ok(&self.a * x + &self.b_const + &self.b_dist_map * p_m)
    }

    /// Equilibrium of the affine dynamics for a constant `P^m`.
    pub fn affine_equilibrium(&self, p_m: &DVector<T>) -> Result<DVector<T>> {
        let rhs = -(&self.b_const + &self.b_dist_map * p_m);
        self.a
            .clone()
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Numerical("closed-loop matrix is singular".into()))
    }

    fn check(&self, x: &DVector<T>, p_m: &DVector<T>) -> Result<()> {
        let n = self.n();
        if x.len() != 2 * n {
            return Err(Error::DimensionMismatch {
                what: "state",
                expected: 2 * n,
                found: x.len(),
            });
        }
        if p_m.len() != n {
            return Err(Error::DimensionMismatch {
                what: "p_m",
                expected: n,
                found: p_m.len(),
            });
        }
        Ok(())
    }
}

/// Assembles `A`, the constant input and the disturbance map of the linearized closed loop.
///
/// ```text
/// A = [ −M(K^ω + K^droop)        M K^V                  ]
///     [ (1/V_nom) E K^ω         −E(L_R + K^V / V_nom)   ]
/// ```
/// with `M = diag(1/m_i)` and `E = diag(1/C_i)`.
pub fn assemble_closed_loop<T: Scalar>(
    params: &SystemParams<T>,
    laplacian: &LaplacianBundle<T>,
) -> Result<ClosedLoopMatrices<T>> {
    params.validate()?;
    params.check_dimension(laplacian)?;
    let n = params.n();
    let l = laplacian.laplacian();
    let vn = params.v_nom;
    let mut a = DMatrix::zeros(2 * n, 2 * n);
    let mut b_const = DVector::zeros(2 * n);
    let mut b_dist_map = DMatrix::zeros(2 * n, n);
    for i in 0..n {
        let mi = T::one() / params.inertia[i];
        let ei = T::one() / params.capacitance[i];
        let (kw, kd, kv) = (params.k_omega[i], params.k_droop[i], params.k_v[i]);

        a[(i, i)] = -mi * (kw + kd);
        a[(i, n + i)] = mi * kv;
        a[(n + i, i)] = ei * kw / vn;
        for j in 0..n {
            a[(n + i, n + j)] = -ei * l[(i, j)];
        }
        a[(n + i, n + i)] -= ei * kv / vn;

        b_const[i] = mi
            * ((kw + kd) * params.omega_ref - kv * params.v_ref[i] + params.p_nom[i] - params.p_inj_nom[i]);
        b_const[n + i] = ei * (kv * params.v_ref[i] - params.omega_ref * kw + params.p_inj_nom[i]) / vn;

        b_dist_map[(i, i)] = mi;
    }
    Ok(ClosedLoopMatrices {
        a,
        b_const,
        b_dist_map,
    })
}

/// Incremental dynamics `A x̂ + [M P^m; 0]` about the reference point.
pub fn linear_rhs<T: Scalar>(
    matrices: &ClosedLoopMatrices<T>,
    state_incremental: &DVector<T>,
    p_m: &DVector<T>,
) -> Result<DVector<T>> {
    matrices.check(state_incremental, p_m)?;
    Ok(&matrices.a * state_incremental + &matrices.b_dist_map * p_m)
}

/// How the converter maps injected power to DC current.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurrentRelation {
    /// `V_i I_i = P_i`.
    Exact,
    /// `V_nom I_i = P_i`.
    Linearized,
}

/// `P^droop_i = −K^droop_i (ω_i − ω_ref)`.
pub fn droop_power<T: Scalar>(params: &SystemParams<T>, omega: &DVector<T>) -> DVector<T> {
    DVector::from_fn(omega.len(), |i, _| -params.k_droop[i] * (omega[i] - params.omega_ref))
}

/// Converter power set-point from the local frequency and voltage.
pub fn injected_power<T: Scalar>(params: &SystemParams<T>, state: &SystemState<T>) -> DVector<T> {
    DVector::from_fn(state.n(), |i, _| {
        params.p_inj_nom[i]
            + params.k_omega[i] * (state.omega[i] - params.omega_ref)
            + params.k_v[i] * (params.v_ref[i] - state.voltage[i])
    })
}

/// Node-by-node evaluation of the plant and controller, independent of the matrix assembly.
pub fn closed_loop_rhs<T: Scalar>(
    params: &SystemParams<T>,
    laplacian: &LaplacianBundle<T>,
    state: &SystemState<T>,
    p_m: &DVector<T>,
    relation: CurrentRelation,
) -> Result<DVector<T>> {
    let n = params.n();
    params.check_dimension(laplacian)?;
    for (what, len) in [("omega", state.omega.len()), ("voltage", state.voltage.len()), ("p_m", p_m.len())] {
        if len != n {
            return Err(Error::DimensionMismatch {
                what,
                expected: n,
                found: len,
            });
        }
    }
    if relation == CurrentRelation::Exact {
        if let Some(i) = state.voltage.iter().position(|&v| !(v > T::zero())) {
            return Err(Error::VoltageSingularity {
                node: i,
                value: state.voltage[i].to_f64_lossy(),
                time: None,
            });
        }
    }

    let p_inj = injected_power(params, state);
    let p_droop = droop_power(params, &state.omega);
    let line_current = laplacian.laplacian() * &state.voltage;
    let mut dx = DVector::zeros(2 * n);
    for i in 0..n {
        dx[i] = (p_droop[i] + params.p_nom[i] + p_m[i] - p_inj[i]) / params.inertia[i];
        let divisor = match relation {
            CurrentRelation::Exact => state.voltage[i],
            CurrentRelation::Linearized => params.v_nom,
        };
        let i_inj = p_inj[i] / divisor;
        dx[n + i] = (i_inj - line_current[i]) / params.capacitance[i];
    }
    Ok(dx)
}

/// Closed loop with the exact power–current relation.
pub fn nonlinear_rhs<T: Scalar>(
    params: &SystemParams<T>,
    laplacian: &LaplacianBundle<T>,
    state: &SystemState<T>,
    p_m: &DVector<T>,
) -> Result<DVector<T>> {
    closed_loop_rhs(params, laplacian, state, p_m, CurrentRelation::Exact)
}

/// Quadratic storage `W(ω̄, V̄) = ½ ω̄ᵀ K^ω (K^V)⁻¹ M⁻¹ ω̄ + (V_nom/2) V̄ᵀ C V̄`, with `M⁻¹ = diag(m_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovFunction<T: Scalar> {
    weights: DVector<T>,
}

impl<T: Scalar> LyapunovFunction<T> {
    pub fn new(params: &SystemParams<T>) -> Self {
        let n = params.n();
        let weights = DVector::from_fn(2 * n, |k, _| {
            if k < n {
                params.k_omega[k] * params.inertia[k] / params.k_v[k]
            } else {
                params.v_nom * params.capacitance[k - n]
            }
        });
        LyapunovFunction { weights }
    }

    /// Diagonal of the weight matrix `P` with `W = ½ x̄ᵀ P x̄`.
    pub fn weights(&self) -> &DVector<T> {
        &self.weights
    }

    /// `W` at the shifted state `x̄ = x − x₀`.
    pub fn value(&self, shifted: &DVector<T>) -> T {
        let half = T::lit(0.5);
        shifted
            .iter()
            .zip(self.weights.iter())
            .fold(T::zero(), |acc, (&x, &w)| acc + half * w * x * x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_laplacian, GridTopology};
    use approx::assert_relative_eq;

    fn single_node() -> (SystemParams<f64>, LaplacianBundle<f64>) {
        let lap = build_laplacian(&GridTopology::new(1, vec![]).unwrap()).unwrap();
        (SystemParams::uniform(1, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0), lap)
    }

    fn three_area() -> (SystemParams<f64>, LaplacianBundle<f64>) {
        let topo = GridTopology::from_triples(3, &[(0, 1, 0.0015), (0, 2, 0.0045), (1, 2, 0.0015)]).unwrap();
        let params = SystemParams::uniform(3, 10.0, 0.1, 667.0, 501.0, 10.0, 1.0, 1.0);
        (params, build_laplacian(&topo).unwrap())
    }

    #[test]
    fn single_node_matrix() {
        let (params, lap) = single_node();
        let m = assemble_closed_loop(&params, &lap).unwrap();
        assert_eq!(m.a, DMatrix::from_row_slice(2, 2, &[-2.0, 1.0, 1.0, -1.0]));
        let dx = linear_rhs(&m, &DVector::from_vec(vec![1.0, 0.0]), &DVector::zeros(1)).unwrap();
        assert_eq!(dx, DVector::from_vec(vec![-2.0, 1.0]));
        let zero = linear_rhs(&m, &DVector::zeros(2), &DVector::zeros(1)).unwrap();
        assert_eq!(zero, DVector::zeros(2));
    }

    #[test]
    fn reference_is_equilibrium_when_balanced() {
        let (mut params, lap) = three_area();
        params.p_nom = DVector::from_vec(vec![0.4, -0.1, -0.3]);
        params.p_inj_nom = params.p_nom.clone();
        params.v_ref = consistent_reference_voltages(&lap, params.v_nom, &params.p_inj_nom, 1.0).unwrap();
        params.require_reference_equilibrium(&lap).unwrap();
        let m = assemble_closed_loop(&params, &lap).unwrap();
        let x = SystemState::at_reference(&params).stacked();
        let dx = m.full_rhs(&x, &DVector::zeros(3)).unwrap();
        assert!(dx.amax() < 1e-9, "{dx}");
    }

    #[test]
    fn nonlinear_rest_at_reference() {
        let (params, lap) = three_area();
        let nl = nonlinear_rhs(&params, &lap, &SystemState::at_reference(&params), &DVector::zeros(3)).unwrap();
        assert!(nl.amax() < 1e-9);
    }

    #[test]
    fn three_area_grid_matrix_is_hurwitz() {
        let (params, lap) = three_area();
        let m = assemble_closed_loop(&params, &lap).unwrap();
        let eig = m.a.complex_eigenvalues();
        assert!(eig.iter().all(|z| z.re < 0.0), "{eig}");
    }

    #[test]
    fn linearized_relation_matches_linear_rhs() {
        let (params, lap) = three_area();
        let m = assemble_closed_loop(&params, &lap).unwrap();
        let state = SystemState {
            omega: DVector::from_vec(vec![0.999, 1.0004, 1.0]),
            voltage: DVector::from_vec(vec![1.002, 0.999, 1.0007]),
        };
        let pm = DVector::from_vec(vec![-0.1, 0.05, 0.0]);
        let via_nodes = closed_loop_rhs(&params, &lap, &state, &pm, CurrentRelation::Linearized).unwrap();
        let via_matrix = linear_rhs(&m, &state.incremental(&params), &pm).unwrap();
        assert!((via_nodes - via_matrix).amax() < 1e-9);
    }

    #[test]
    fn nonlinear_single_node_hand_expansion() {
        // V = 2 V_nom with everything else nominal: P^inj = K^V (V^ref − V) = −1,
        // so C V̇ = P^inj / V = −1/2 while the linearized model gives −1.
        let (params, lap) = single_node();
        let state = SystemState {
            omega: DVector::from_element(1, 1.0),
            voltage: DVector::from_element(1, 2.0),
        };
        let pm = DVector::zeros(1);
        let nl = nonlinear_rhs(&params, &lap, &state, &pm).unwrap();
        let lin = closed_loop_rhs(&params, &lap, &state, &pm, CurrentRelation::Linearized).unwrap();
        assert_relative_eq!(nl[1], -0.5);
        assert_relative_eq!(lin[1], -1.0);
        assert_relative_eq!(nl[0], lin[0]);
        assert_relative_eq!(nl[0], 1.0);
    }

    #[test]
    fn nonpositive_voltage_is_a_singularity() {
        let (params, lap) = three_area();
        let mut state = SystemState::at_reference(&params);
        state.voltage[1] = 0.0;
        match nonlinear_rhs(&params, &lap, &state, &DVector::zeros(3)) {
            Err(Error::VoltageSingularity { node: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn droop_power_examples() {
        let (params, _) = three_area();
        let at_ref = droop_power(&params, &DVector::from_element(3, 1.0));
        assert_eq!(at_ref, DVector::zeros(3));
        let p = droop_power(&params, &DVector::from_element(3, 1.0 - 0.001));
        assert_relative_eq!(p[0], 0.667, max_relative = 1e-12);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let (params, _) = three_area();
        let (_, lap1) = single_node();
        assert!(matches!(
            assemble_closed_loop(&params, &lap1),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn invalid_params_named() {
        let (mut params, lap) = three_area();
        params.k_v[2] = 0.0;
        let err = assemble_closed_loop(&params, &lap).unwrap_err();
        assert_eq!(err.to_string(), "invalid parameter `k_v` at node 3: must be > 0, got 0");
    }

    #[test]
    fn unbalanced_nominals_reported() {
        let (mut params, lap) = three_area();
        params.p_nom[1] = 0.2;
        match params.require_reference_equilibrium(&lap) {
            Err(Error::UnbalancedNominals { nodes }) => assert_eq!(nodes, vec![1]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn disturbance_schedule() {
        let d = Disturbance::new(
            DVector::from_element(2, 0.0),
            vec![DisturbanceStep {
                time: 1.0,
                p_m: DVector::from_vec(vec![-0.1, 0.0]),
            }],
        )
        .unwrap();
        assert_eq!(d.at(0.999)[0], 0.0);
        assert_eq!(d.at(1.0)[0], -0.1);
        assert!(Disturbance::new(
            DVector::from_element(1, 0.0),
            vec![
                DisturbanceStep { time: 2.0, p_m: DVector::zeros(1) },
                DisturbanceStep { time: 2.0, p_m: DVector::zeros(1) },
            ],
        )
        .is_err());
    }

    #[test]
    fn lyapunov_single_term() {
        let (params, _) = single_node();
        let w = LyapunovFunction::new(&params);
        assert_relative_eq!(w.value(&DVector::from_vec(vec![1.0, 0.0])), 0.5);

        let mut p = params.clone();
        p.k_omega[0] = 4.0;
        p.k_v[0] = 2.0;
        p.inertia[0] = 3.0;
        let w = LyapunovFunction::new(&p);
        assert_relative_eq!(w.value(&DVector::from_vec(vec![1.0, 0.0])), 0.5 * 4.0 * 3.0 / 2.0);
    }
}
