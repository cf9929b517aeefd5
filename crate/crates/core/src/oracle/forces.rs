//! Quasi-static stance force distribution and joint torques.

use nalgebra::{DMatrix, DVector, Vector3};

use crate::kinematics::{leg_jacobian, BasePose, QuadrupedGeometry};

pub const GRAVITY: f64 = 9.81;

/// Vertical contact forces that carry `mass·g` with zero moment about the
/// base origin, least-norm over the stance feet, then clamped to ≥ 0 and
/// renormalized.
pub fn distribute_weight(mass: f64, base_xy: [f64; 2], feet_world: &[Vector3<f64>; 4], contacts: [bool; 4]) -> [f64; 4] {
    let stance: Vec<usize> = (0..4).filter(|&i| contacts[i]).collect();
    let mut lambda = [0.0; 4];
    let weight = mass * GRAVITY;
    match stance.len() {
        0 => return lambda,
        1 => {
            lambda[stance[0]] = weight;
            return lambda;
        }
        _ => {}
    }
    let n = stance.len();
    let mut a = DMatrix::zeros(3, n);
    for (c, &i) in stance.iter().enumerate() {
        a[(0, c)] = 1.0;
        a[(1, c)] = feet_world[i].x - base_xy[0];
        a[(2, c)] = feet_world[i].y - base_xy[1];
    }
    let b = DVector::from_vec(vec![weight, 0.0, 0.0]);
    let pinv = a.clone().pseudo_inverse(1e-12).expect("pseudo-inverse of a finite matrix");
    let sol = pinv * b;
    let mut total = 0.0;
    for (c, &i) in stance.iter().enumerate() {
        lambda[i] = sol[c].max(0.0);
        total += lambda[i];
    }
    if total > 0.0 {
        for l in &mut lambda {
            *l *= weight / total;
        }
    } else {
        for &i in &stance {
            lambda[i] = weight / n as f64;
        }
    }
    lambda
}

/// τ = Jᵀ f per leg, with `f` the world-vertical contact force expressed in
/// the base frame.
pub fn joint_torques(geometry: &QuadrupedGeometry, pose: &BasePose, q: &[f64; 12], lambda: &[f64; 4]) -> [f64; 12] {
    let mut tau = [0.0; 12];
    for leg in 0..4 {
        if lambda[leg] == 0.0 {
            continue;
        }
        let f = pose.orientation.inverse() * Vector3::new(0.0, 0.0, lambda[leg]);
        let j = leg_jacobian(&[q[3 * leg], q[3 * leg + 1], q[3 * leg + 2]], &geometry.legs[leg]);
        let t = j.transpose() * f;
        tau[3 * leg..3 * leg + 3].copy_from_slice(t.as_slice());
    }
    tau
}
