//! Sine basis `e_n(x) = √2 sin(nπx)` on the uniform interior grid
//! `x_i = i/(N+1)` and the [`Field`] type carrying both nodal and modal views.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::sync::Arc;

use rustdct::{Dst1, DctPlanner};

/// Discrete sine transform for `N` interior nodes and modes `1..=N`.
#[derive(Clone)]
pub struct SineBasis {
    n: usize,
    dst: Arc<dyn Dst1<f64>>,
}

impl fmt::Debug for SineBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SineBasis").field("n", &self.n).finish()
    }
}

impl PartialEq for SineBasis {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
    }
}

impl SineBasis {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "sine basis needs at least one mode");
        let dst = DctPlanner::new().plan_dst1(n);
        Self { n, dst }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Grid spacing `1/(N+1)`.
    pub fn spacing(&self) -> f64 {
        1.0 / (self.n as f64 + 1.0)
    }

    /// Interior nodes `i/(N+1)`, `i = 1..=N`.
    pub fn nodes(&self) -> Vec<f64> {
        (1..=self.n).map(|i| i as f64 * self.spacing()).collect()
    }

    /// `½ n² π²`, the decay rate of mode `n` (1-based).
    pub fn eigenvalue(n: usize) -> f64 {
        let n = n as f64;
        0.5 * n * n * PI * PI
    }

    /// Nodal values of `Σ_n c_n e_n`.
    pub fn to_nodal(&self, modes: &[f64]) -> Vec<f64> {
        assert_eq!(modes.len(), self.n);
        let mut buf = modes.to_vec();
        self.dst.process_dst1(&mut buf);
        buf.iter_mut().for_each(|v| *v *= SQRT_2);
        buf
    }

    /// Discrete sine coefficients of nodal data (exact inverse of [`Self::to_nodal`]).
    pub fn to_modes(&self, nodal: &[f64]) -> Vec<f64> {
        assert_eq!(nodal.len(), self.n);
        let mut buf = nodal.to_vec();
        self.dst.process_dst1(&mut buf);
        let s = SQRT_2 / (self.n as f64 + 1.0);
        buf.iter_mut().for_each(|v| *v *= s);
        buf
    }
}

/// A real function on `[0, 1]` with zero Dirichlet data, held both as nodal
/// values on the interior grid and as sine coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    basis: SineBasis,
    nodal: Vec<f64>,
    modes: Vec<f64>,
}

impl Field {
    pub fn zeros(basis: &SineBasis) -> Self {
        Self { basis: basis.clone(), nodal: vec![0.0; basis.len()], modes: vec![0.0; basis.len()] }
    }

    pub fn from_nodal(basis: &SineBasis, nodal: Vec<f64>) -> Self {
        let modes = basis.to_modes(&nodal);
        Self { basis: basis.clone(), nodal, modes }
    }

    pub fn from_modes(basis: &SineBasis, modes: Vec<f64>) -> Self {
        let nodal = basis.to_nodal(&modes);
        Self { basis: basis.clone(), nodal, modes }
    }

    /// Samples `f` at the interior nodes.
    pub fn from_fn(basis: &SineBasis, f: impl Fn(f64) -> f64) -> Self {
        Self::from_nodal(basis, basis.nodes().into_iter().map(f).collect())
    }

    /// `amp · e_k`, set exactly in the modal view.
    pub fn mode(basis: &SineBasis, k: usize, amp: f64) -> Self {
        assert!((1..=basis.len()).contains(&k), "mode {k} outside 1..={}", basis.len());
        let mut modes = vec![0.0; basis.len()];
        modes[k - 1] = amp;
        Self::from_modes(basis, modes)
    }

    pub fn basis(&self) -> &SineBasis {
        &self.basis
    }

    pub fn len(&self) -> usize {
        self.nodal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodal.is_empty()
    }

    pub fn nodal(&self) -> &[f64] {
        &self.nodal
    }

    pub fn modes(&self) -> &[f64] {
        &self.modes
    }

    /// Nodal values including the two boundary zeros, length `N + 2`.
    pub fn with_boundary(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len() + 2);
        v.push(0.0);
        v.extend_from_slice(&self.nodal);
        v.push(0.0);
        v
    }

    /// `L²(0,1)` norm by Parseval on the sine coefficients.
    pub fn l2_norm(&self) -> f64 {
        self.modes.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.nodal.iter().all(|v| v.is_finite())
    }

    /// Scales the field by `s` in both views.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            basis: self.basis.clone(),
            nodal: self.nodal.iter().map(|v| v * s).collect(),
            modes: self.modes.iter().map(|v| v * s).collect(),
        }
    }

    /// Modal `L²` distance to another field, zero-extending the coarser one.
    pub fn l2_distance(&self, other: &Field) -> f64 {
        modal_distance(&self.modes, &other.modes)
    }
}

/// `L²` distance between two modal vectors of possibly different length.
pub fn modal_distance(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| {
            let d = a.get(i).copied().unwrap_or(0.0) - b.get(i).copied().unwrap_or(0.0);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn first_mode_nodal_values() {
        let basis = SineBasis::new(7);
        let f = Field::mode(&basis, 1, 1.0);
        for (x, v) in basis.nodes().iter().zip(f.nodal()) {
            assert!((v - SQRT_2 * (PI * x).sin()).abs() < 1e-14);
        }
        assert!((f.l2_norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn parseval_matches_nodal_sum() {
        let basis = SineBasis::new(31);
        let f = Field::from_fn(&basis, |x| x * (1.0 - x) * (3.0 * x).cos());
        let nodal_sq: f64 = f.nodal().iter().map(|v| v * v).sum::<f64>() * basis.spacing();
        assert!((f.l2_norm().powi(2) - nodal_sq).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn nodal_and_modal_views_agree(values in proptest::collection::vec(-1e3f64..1e3, 16)) {
            let basis = SineBasis::new(16);
            let f = Field::from_nodal(&basis, values.clone());
            let back = basis.to_nodal(f.modes());
            let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for (a, b) in back.iter().zip(&values) {
                prop_assert!((a - b).abs() <= 1e-12 * scale);
            }
        }
    }
}
