//! One-dimensional Legendre machinery on (-1, 1): polynomial evaluation,
//! Legendre-Gauss-Lobatto (LGL) nodes and weights, and nodal
//! differentiation matrices of the Lagrange basis.

use crate::error::{Error, Result};

const NEWTON_TOL: f64 = 1e-14;
const NEWTON_MAX_ITER: usize = 100;

/// Returns `(L_n(x), L_n'(x))` using the three-term recurrence.
///
/// The derivative uses `L'_{k+1} = L'_{k-1} + (2k+1) L_k`, which stays
/// well defined at the endpoints.
pub fn legendre_eval(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p_prev, mut p) = (1.0, x);
    let (mut dp_prev, mut dp) = (0.0, 1.0);
    for k in 1..n {
        let kf = k as f64;
        let p_next = ((2.0 * kf + 1.0) * x * p - kf * p_prev) / (kf + 1.0);
        let dp_next = dp_prev + (2.0 * kf + 1.0) * p;
        p_prev = p;
        p = p_next;
        dp_prev = dp;
        dp = dp_next;
    }
    (p, dp)
}

/// LGL rule of degree `N`: `N + 1` nodes including both endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct LglRule {
    degree: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    bary: Vec<f64>,
    diff1: Vec<f64>,
    diff2: Vec<f64>,
}

impl LglRule {
    /// Builds the rule for degree `n >= 2`.
    ///
    /// Interior nodes are the roots of `(1 - x^2) L_N'(x)`, found by Newton
    /// iteration from the Chebyshev-Gauss-Lobatto points. Because
    /// `d/dx[(1 - x^2) L_N'] = -N(N+1) L_N`, the Newton update needs only
    /// `L_N` and `L_N'`.
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!(
                "LGL degree must be at least 2, got {n}"
            )));
        }
        let nf = n as f64;
        let nn1 = nf * (nf + 1.0);
        let mut nodes = vec![0.0; n + 1];
        nodes[0] = -1.0;
        nodes[n] = 1.0;
        // Solve for the right half and mirror; the midpoint of an even rule is 0.
        for k in (n / 2 + 1)..n {
            let mut x = (std::f64::consts::PI * (n - k) as f64 / nf).cos();
            let mut converged = false;
            for _ in 0..NEWTON_MAX_ITER {
                let (l, dl) = legendre_eval(n, x);
                let step = (1.0 - x * x) * dl / (nn1 * l);
                x += step;
                if step.abs() <= NEWTON_TOL {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::RootFinding {
                    degree: n,
                    iterations: NEWTON_MAX_ITER,
                });
            }
            nodes[k] = x;
            nodes[n - k] = -x;
        }
        if n % 2 == 0 {
            nodes[n / 2] = 0.0;
        }

        let legendre_at_nodes: Vec<f64> = nodes.iter().map(|&x| legendre_eval(n, x).0).collect();
        let mut weights: Vec<f64> = legendre_at_nodes
            .iter()
            .map(|l| 2.0 / (nn1 * l * l))
            .collect();
        weights[0] = 2.0 / nn1;
        weights[n] = 2.0 / nn1;

        let bary = barycentric_weights(&nodes);
        let (diff1, diff2) = differentiation_matrices(&nodes, &legendre_at_nodes);
        Ok(Self {
            degree: n,
            nodes,
            weights,
            bary,
            diff1,
            diff2,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Number of nodes, `N + 1`.
    pub fn len(&self) -> usize {
        self.degree + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// First-derivative collocation matrix, row-major `(N+1) x (N+1)`.
    pub fn diff1(&self) -> &[f64] {
        &self.diff1
    }

    /// Second-derivative collocation matrix, row-major `(N+1) x (N+1)`.
    pub fn diff2(&self) -> &[f64] {
        &self.diff2
    }

    pub fn d1(&self, i: usize, j: usize) -> f64 {
        self.diff1[i * self.len() + j]
    }

    pub fn d2(&self, i: usize, j: usize) -> f64 {
        self.diff2[i * self.len() + j]
    }

    /// Values `Psi_0(x), ..., Psi_N(x)` of the Lagrange cardinal functions.
    pub fn lagrange_basis_all(&self, x: f64) -> Vec<f64> {
        let n = self.len();
        if let Some(j) = self.nodes.iter().position(|&xj| xj == x) {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            return e;
        }
        let terms: Vec<f64> = self
            .nodes
            .iter()
            .zip(&self.bary)
            .map(|(&xj, &wj)| wj / (x - xj))
            .collect();
        let denom: f64 = terms.iter().sum();
        terms.into_iter().map(|t| t / denom).collect()
    }

    /// Nodal derivatives of the two edge cardinal functions:
    /// `(Psi_N'(x_k), Psi_0'(x_k))` for every node `x_k`.
    pub fn lagrange_edge_derivatives(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.degree;
        let psi_n = (0..=n).map(|k| self.d1(k, n)).collect();
        let psi_0 = (0..=n).map(|k| self.d1(k, 0)).collect();
        (psi_n, psi_0)
    }

    /// Row-major matrix mapping nodal values on this rule to values of the
    /// interpolant at `points`.
    pub fn interpolation_matrix(&self, points: &[f64]) -> Vec<f64> {
        points
            .iter()
            .flat_map(|&x| self.lagrange_basis_all(x))
            .collect()
    }
}

fn barycentric_weights(nodes: &[f64]) -> Vec<f64> {
    let mut w: Vec<f64> = nodes
        .iter()
        .enumerate()
        .map(|(j, &xj)| {
            let prod: f64 = nodes
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != j)
                .map(|(_, &xk)| xj - xk)
                .product();
            1.0 / prod
        })
        .collect();
    let scale = w.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    w.iter_mut().for_each(|v| *v /= scale);
    w
}

/// Lagrange differentiation matrices at LGL nodes. Off-diagonal entries
/// use the closed forms; diagonals use the negative-sum identity (rows of
/// an exact differentiation matrix annihilate constants).
fn differentiation_matrices(nodes: &[f64], legendre_at_nodes: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = nodes.len();
    let mut d1 = vec![0.0; n * n];
    for i in 0..n {
        let mut row_sum = 0.0;
        for j in 0..n {
            if i != j {
                let v = legendre_at_nodes[i] / (legendre_at_nodes[j] * (nodes[i] - nodes[j]));
                d1[i * n + j] = v;
                row_sum += v;
            }
        }
        d1[i * n + i] = -row_sum;
    }
    let mut d2 = vec![0.0; n * n];
    for i in 0..n {
        let mut row_sum = 0.0;
        for j in 0..n {
            if i != j {
                let v = 2.0 * d1[i * n + j] * (d1[i * n + i] - 1.0 / (nodes[i] - nodes[j]));
                d2[i * n + j] = v;
                row_sum += v;
            }
        }
        d2[i * n + i] = -row_sum;
    }
    (d1, d2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn legendre_values() {
        assert_eq!(legendre_eval(0, 0.7), (1.0, 0.0));
        let (v, d) = legendre_eval(2, 0.0);
        assert_abs_diff_eq!(v, -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(d, 0.0, epsilon = 1e-15);
        let (v, d) = legendre_eval(3, 1.0);
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d, 6.0, epsilon = 1e-14);
        // L_n'(1) = n(n+1)/2 for a larger n as well
        let (v, d) = legendre_eval(17, 1.0);
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(d, 153.0, epsilon = 1e-10);
    }

    #[test]
    fn degree_two_and_three_rules() {
        let r = LglRule::new(2).unwrap();
        assert_eq!(r.nodes(), &[-1.0, 0.0, 1.0]);
        for (w, e) in r.weights().iter().zip([1.0 / 3.0, 4.0 / 3.0, 1.0 / 3.0]) {
            assert_abs_diff_eq!(*w, e, epsilon = 1e-15);
        }
        let r = LglRule::new(3).unwrap();
        assert_abs_diff_eq!(r.nodes()[2], 1.0 / 5f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(r.nodes()[1], -1.0 / 5f64.sqrt(), epsilon = 1e-15);
        for (w, e) in r.weights().iter().zip([1.0 / 6.0, 5.0 / 6.0, 5.0 / 6.0, 1.0 / 6.0]) {
            assert_abs_diff_eq!(*w, e, epsilon = 1e-14);
        }
        let r = LglRule::new(10).unwrap();
        assert_abs_diff_eq!(r.weights()[0], 2.0 / 110.0, epsilon = 1e-16);
    }

    #[test]
    fn rejects_low_degree() {
        assert!(matches!(LglRule::new(1), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn basis_at_nodes_and_between() {
        let r = LglRule::new(2).unwrap();
        assert_eq!(r.lagrange_basis_all(0.0), vec![0.0, 1.0, 0.0]);
        let psi = r.lagrange_basis_all(0.5);
        for (p, e) in psi.iter().zip([-0.125, 0.75, 0.375]) {
            assert_abs_diff_eq!(*p, e, epsilon = 1e-15);
        }
    }

    #[test]
    fn edge_derivatives() {
        let r = LglRule::new(2).unwrap();
        let (psi_n, psi_0) = r.lagrange_edge_derivatives();
        assert_abs_diff_eq!(psi_n[2], 1.5, epsilon = 1e-14);
        assert_abs_diff_eq!(psi_n[1], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(psi_0[0], -1.5, epsilon = 1e-14);
        for n in [4, 9, 16, 33] {
            let r = LglRule::new(n).unwrap();
            let (psi_n, _) = r.lagrange_edge_derivatives();
            let nf = n as f64;
            assert_abs_diff_eq!(psi_n[n], nf * (nf + 1.0) / 4.0, epsilon = 1e-10 * nf * nf);
        }
    }

    #[test]
    fn diff2_matches_squared_diff1_on_polynomials() {
        for n in [3, 8, 15, 24] {
            let r = LglRule::new(n).unwrap();
            let m = r.len();
            for p in 0..=n {
                let f: Vec<f64> = r.nodes().iter().map(|x| x.powi(p as i32)).collect();
                let d1f: Vec<f64> = (0..m).map(|i| (0..m).map(|j| r.d1(i, j) * f[j]).sum()).collect();
                for i in 0..m {
                    let dd: f64 = (0..m).map(|j| r.d1(i, j) * d1f[j]).sum();
                    let d2: f64 = (0..m).map(|j| r.d2(i, j) * f[j]).sum();
                    assert!((dd - d2).abs() < 1e-9 * (n * n) as f64, "n={n} p={p}");
                }
            }
        }
    }
}
