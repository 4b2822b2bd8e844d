#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use delay_dkf::model::{LtvSystem, Transition};
use delay_dkf::noise::SimRng;
use delay_dkf::sensing::{DelaySpec, SensorNode};

/// Random 2x2 matrix with largest singular value in [0.5, 1] and smallest
/// above 0.05.
pub fn random_transition(rng: &mut SimRng) -> DMatrix<f64> {
    loop {
        let a = DMatrix::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0));
        let sv = a.clone().svd(false, false).singular_values;
        let (smax, smin) = (sv.max(), sv.min());
        if smin > 0.05 * smax {
            return a * (rng.random_range(0.5..1.0) / smax);
        }
    }
}

/// Symmetric positive definite `L Lᵀ + floor·I`.
pub fn random_spd(rng: &mut SimRng, n: usize, scale: f64, floor: f64) -> DMatrix<f64> {
    let l = DMatrix::from_fn(n, n, |_, _| rng.random_range(-scale..scale));
    &l * l.transpose() + DMatrix::identity(n, n) * floor
}

/// Random positive semi-definite matrix of rank at most `rank`.
pub fn random_psd(rng: &mut SimRng, n: usize, rank: usize, scale: f64) -> DMatrix<f64> {
    let l = DMatrix::from_fn(n, rank, |_, _| rng.random_range(-scale..scale));
    &l * l.transpose()
}

/// Two-state system with a fresh random `A(k)` at every step.
pub fn random_ltv(rng: &mut SimRng, steps: usize) -> LtvSystem {
    let table = (0..steps).map(|_| random_transition(rng)).collect();
    let q = random_spd(rng, 2, 0.5, 0.01);
    let x0 = DVector::from_fn(2, |_, _| rng.random_range(-2.0..2.0));
    LtvSystem::new(Transition::Table(table), q, x0, 0.01).unwrap()
}

/// Node with a random 1x2 output row and variance in [0.05, 1].
pub fn random_node(rng: &mut SimRng, id: usize, delay: f64) -> SensorNode {
    let h = loop {
        let h = DMatrix::from_fn(1, 2, |_, _| rng.random_range(-1.0..1.0));
        if h.norm() > 0.1 {
            break h;
        }
    };
    let r = DMatrix::from_element(1, 1, rng.random_range(0.05..1.0));
    SensorNode::new(id, h, r, DelaySpec::constant(delay)).unwrap()
}

/// Symmetric square root of a PSD matrix, computed independently of the
/// library helpers.
pub fn sqrtm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = a.clone().symmetric_eigen();
    let d = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose()
}

pub fn min_eig(a: &DMatrix<f64>) -> f64 {
    ((a + a.transpose()) * 0.5).symmetric_eigenvalues().min()
}
