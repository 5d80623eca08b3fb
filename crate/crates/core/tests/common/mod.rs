#![allow(dead_code)]

use mtdc_droop::grid::{build_laplacian, GridTopology, LaplacianBundle, Line};
use mtdc_droop::plant::SystemParams;
use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn log_uniform(rng: &mut Rng, lo: f64, hi: f64) -> f64 {
    10f64.powf(rng.random_range(lo.log10()..hi.log10()))
}

/// Random spanning tree plus up to `n - 1` extra distinct lines, resistances log-uniform in `[lo, hi]`.
pub fn connected_grid(rng: &mut Rng, n: usize, lo: f64, hi: f64) -> GridTopology<f64> {
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let mut pairs = std::collections::BTreeSet::new();
    for k in 1..n {
        let j = order[rng.random_range(0..k)];
        let i = order[k];
        pairs.insert((i.min(j), i.max(j)));
    }
    if n > 2 {
        for _ in 0..rng.random_range(0..n) {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            if i != j {
                pairs.insert((i.min(j), i.max(j)));
            }
        }
    }
    let lines = pairs
        .into_iter()
        .map(|(i, j)| Line::new(i, j, log_uniform(rng, lo, hi)))
        .collect();
    GridTopology::new(n, lines).expect("valid random grid")
}

fn per_node(rng: &mut Rng, n: usize, lo: f64, hi: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| log_uniform(rng, lo, hi))
}

/// Per-node parameters log-uniform in `[lo, hi]`, zero nominals, uniform references.
pub fn nonuniform_params(rng: &mut Rng, n: usize, lo: f64, hi: f64) -> SystemParams<f64> {
    let v_nom = log_uniform(rng, lo, hi);
    SystemParams {
        inertia: per_node(rng, n, lo, hi),
        capacitance: per_node(rng, n, lo, hi),
        k_droop: per_node(rng, n, lo, hi),
        k_omega: per_node(rng, n, lo, hi),
        k_v: per_node(rng, n, lo, hi),
        v_ref: DVector::from_element(n, v_nom),
        p_nom: DVector::zeros(n),
        p_inj_nom: DVector::zeros(n),
        omega_ref: 1.0,
        v_nom,
    }
}

/// Scalar gains shared by every node, log-uniform in `[lo, hi]`; `V_nom = 1`.
pub fn uniform_params(rng: &mut Rng, n: usize, lo: f64, hi: f64) -> SystemParams<f64> {
    let m = log_uniform(rng, lo, hi);
    let c = log_uniform(rng, lo, hi);
    let kd = log_uniform(rng, lo, hi);
    let kw = log_uniform(rng, lo, hi);
    let kv = log_uniform(rng, lo, hi);
    SystemParams::uniform(n, m, c, kd, kw, kv, 1.0, 1.0)
}

pub fn uniform_disturbance(rng: &mut Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
}

pub struct Instance {
    pub topology: GridTopology<f64>,
    pub laplacian: LaplacianBundle<f64>,
    pub params: SystemParams<f64>,
    pub p_m: DVector<f64>,
}

/// Uniform-gain instance: `n ∈ [2, 12]`, gains and resistances log-uniform in `[1e-2, 1e3]`.
pub fn uniform_instance(rng: &mut Rng) -> Instance {
    let n = rng.random_range(2..=12);
    let topology = connected_grid(rng, n, 1e-2, 1e3);
    let laplacian = build_laplacian(&topology).expect("connected");
    let params = uniform_params(rng, n, 1e-2, 1e3);
    let p_m = uniform_disturbance(rng, n);
    Instance {
        topology,
        laplacian,
        params,
        p_m,
    }
}

/// Closed-loop matrix built entry by entry from its block definition.
pub fn block_matrix(params: &SystemParams<f64>, l: &DMatrix<f64>) -> DMatrix<f64> {
    let n = params.n();
    let vn = params.v_nom;
    let mut a = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        let (m, c) = (params.inertia[i], params.capacitance[i]);
        a[(i, i)] = -(params.k_omega[i] + params.k_droop[i]) / m;
        a[(i, n + i)] = params.k_v[i] / m;
        a[(n + i, i)] = params.k_omega[i] / (vn * c);
        for j in 0..n {
            a[(n + i, n + j)] = -l[(i, j)] / c;
        }
        a[(n + i, n + i)] -= params.k_v[i] / (vn * c);
    }
    a
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
