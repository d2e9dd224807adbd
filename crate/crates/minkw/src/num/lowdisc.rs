//! Low-discrepancy direction samples on S^1 and S^2.

use std::f64::consts::PI;

/// Golden-ratio Kronecker sequence mapped to angles in [0, 2pi).
///
/// Successive points fill the circle without aligning to any fixed lattice,
/// which keeps sampled suprema honest against axis-aligned geometry.
pub fn golden_angles(count: usize) -> Vec<f64> {
    let inv_phi = 0.618_033_988_749_894_9_f64;
    (0..count)
        .map(|k| 2.0 * PI * ((k as f64 * inv_phi) % 1.0))
        .collect()
}

/// Fibonacci lattice on the unit sphere.
pub fn fibonacci_sphere(count: usize) -> Vec<[f64; 3]> {
    let golden_angle = PI * (3.0 - 5.0_f64.sqrt());
    (0..count)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / count as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let theta = golden_angle * i as f64;
            [r * theta.cos(), r * theta.sin(), z]
        })
        .collect()
}

/// Unit vectors of a low-discrepancy sample, dimension 2 or 3.
pub fn sphere_sample(dim: usize, count: usize) -> Vec<[f64; 3]> {
    match dim {
        2 => golden_angles(count)
            .into_iter()
            .map(|a| [a.cos(), a.sin(), 0.0])
            .collect(),
        3 => fibonacci_sphere(count),
        _ => panic!("dimension must be 2 or 3"),
    }
}
