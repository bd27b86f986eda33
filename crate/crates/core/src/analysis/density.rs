//! Density evolution for IRSA (and CRDSA as regular IRSA) under the collision channel.
//!
//! With load `G` in packets per slot and degree distribution `Lambda`, the erasure
//! probabilities of user-to-slot edges `q` and slot-to-user edges `p` evolve as
//!
//! ```text
//! p_t     = 1 - exp(-G Lambda'(1) q_t)
//! q_{t+1} = lambda(p_t),   lambda(x) = Lambda'(x) / Lambda'(1)
//! ```
//!
//! starting from `q_0 = 1`. The asymptotic loss ratio is `Lambda(p_inf)`.

use crate::slotted::DegreeDistribution;

/// Erasure probability below which the recursion is considered to have reached zero.
pub const ZERO_ERASURE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeResult {
    pub q_inf: f64,
    pub plr_inf: f64,
    pub iterations: u64,
    pub converged: bool,
}

pub fn density_evolution(dist: &DegreeDistribution, g: f64, max_iter: u64, tol: f64) -> DeResult {
    let mean = dist.mean();
    let slot_erasure = |q: f64| -(-g * mean * q).exp_m1();
    let mut q = 1.0f64;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let next = dist.edge_poly(slot_erasure(q));
        let delta = (next - q).abs();
        q = next;
        if q < ZERO_ERASURE * 1e-3 {
            q = 0.0;
            converged = true;
            break;
        }
        if delta < tol {
            converged = true;
            break;
        }
    }
    let q_inf = q.clamp(0.0, 1.0);
    DeResult {
        q_inf,
        plr_inf: dist.node_poly(slot_erasure(q_inf)).clamp(0.0, 1.0),
        iterations,
        converged,
    }
}

const THRESHOLD_MAX_ITER: u64 = 20_000_000;

fn vanishes(dist: &DegreeDistribution, g: f64) -> bool {
    density_evolution(dist, g, THRESHOLD_MAX_ITER, 1e-14).q_inf < ZERO_ERASURE
}

/// Largest load for which the erasure probability vanishes, found by bisection to
/// within `tol`. The bracket starts at `[0, 1]` and widens to `[0, 2]` if needed.
pub fn de_threshold(dist: &DegreeDistribution, tol: f64) -> f64 {
    if dist.edge_poly(0.0) > 0.0 {
        // degree-1 users keep a positive erasure floor at every load
        return 0.0;
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    if vanishes(dist, hi) {
        lo = hi;
        hi = 2.0;
        if vanishes(dist, hi) {
            return hi;
        }
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if vanishes(dist, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
