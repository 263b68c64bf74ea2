//! Geometric grids in the reduced wealth variable `ξ = x / a`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    /// Number of nodes, including both ends.
    pub n: usize,
    /// Right end of the grid; `None` means `50 · max(z̲, 1)`.
    pub xi_max: Option<f64>,
    /// First spacing as a fraction of the grid length.
    pub first_step: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n: 512,
            xi_max: None,
            first_step: 1e-8,
        }
    }
}

impl GridConfig {
    pub fn with_n(n: usize) -> Self {
        Self { n, ..Self::default() }
    }

    pub fn resolved_xi_max(&self, zlow: f64) -> f64 {
        self.xi_max.unwrap_or(50.0 * zlow.max(1.0))
    }

    pub fn build(&self, zlow: f64) -> Result<XiGrid> {
        XiGrid::geometric(zlow, self.resolved_xi_max(zlow), self.n, self.first_step)
    }
}

/// Nodes `ξ₀ = z̲ < ξ₁ < … < ξ_{n-1} = Ξmax` with spacings growing by a fixed ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct XiGrid {
    nodes: Vec<f64>,
}

impl XiGrid {
    pub fn geometric(start: f64, end: f64, n: usize, first_step: f64) -> Result<Self> {
        if n < 64 {
            return Err(Error::config(format!("grid needs at least 64 nodes, got {n}")));
        }
        if !(end > start && start.is_finite() && end.is_finite()) {
            return Err(Error::config(format!("grid end {end} must exceed the start {start}")));
        }
        let intervals = n - 1;
        let uniform = 1.0 / intervals as f64;
        if !(first_step > 0.0 && first_step <= uniform) {
            return Err(Error::config(format!(
                "relative first step must lie in (0, {uniform}], got {first_step}"
            )));
        }
        let len = end - start;
        let nodes = if (first_step - uniform).abs() < 1e-15 {
            (0..n).map(|i| start + len * i as f64 * uniform).collect::<Vec<_>>()
        } else {
            let ratio = spacing_ratio(intervals, first_step);
            let mut nodes = Vec::with_capacity(n);
            let mut h = first_step * len;
            let mut x = start;
            nodes.push(x);
            for _ in 0..intervals {
                x += h;
                nodes.push(x);
                h *= ratio;
            }
            // Remove the accumulated rounding in the last node.
            let scale = len / (x - start);
            for v in nodes.iter_mut() {
                *v = start + (*v - start) * scale;
            }
            nodes
        };
        let mut grid = Self { nodes };
        grid.nodes[n - 1] = end;
        Ok(grid)
    }

    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 || nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::config("grid nodes must be strictly increasing"));
        }
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.nodes[0]
    }

    pub fn end(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn min_spacing(&self) -> f64 {
        self.nodes.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }

    /// Index `i` with `ξᵢ ≤ x ≤ ξᵢ₊₁`, clamped to the valid intervals.
    pub fn locate(&self, x: f64) -> usize {
        let n = self.nodes.len();
        match self.nodes.partition_point(|&v| v <= x) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        }
    }
}

/// Ratio `r` with `f (r^m - 1)/(r - 1) = 1`.
fn spacing_ratio(m: usize, f: f64) -> f64 {
    let total = |r: f64| f * ((m as f64) * r.ln()).exp_m1() / (r - 1.0);
    let (mut lo, mut hi) = (1.0 + 1e-15, 2.0);
    while total(hi) < 1.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn default_grid_shape() {
        let g = GridConfig::default().build(0.5).unwrap();
        assert_eq!(g.len(), 512);
        assert_eq!(g.start(), 0.5);
        assert_eq!(g.end(), 50.0);
        let h0 = g.nodes()[1] - g.nodes()[0];
        assert_relative_eq!(h0, 1e-8 * 49.5, max_relative = 1e-9);
        let r1 = (g.nodes()[2] - g.nodes()[1]) / h0;
        let r2 = (g.nodes()[101] - g.nodes()[100]) / (g.nodes()[100] - g.nodes()[99]);
        assert_relative_eq!(r1, r2, max_relative = 1e-8);
        assert!(g.nodes().windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn uniform_limit() {
        let g = XiGrid::geometric(1.0, 2.0, 101, 0.01).unwrap();
        assert_relative_eq!(g.nodes()[37], 1.37, epsilon = 1e-14);
    }

    #[test]
    fn locate_is_clamped() {
        let g = XiGrid::geometric(1.0, 2.0, 101, 0.01).unwrap();
        assert_eq!(g.locate(0.5), 0);
        assert_eq!(g.locate(1.0), 0);
        assert_eq!(g.locate(1.015), 1);
        assert_eq!(g.locate(2.0), 99);
        assert_eq!(g.locate(3.0), 99);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(XiGrid::geometric(1.0, 2.0, 10, 1e-3).is_err());
        assert!(XiGrid::geometric(1.0, 0.5, 100, 1e-3).is_err());
        assert!(XiGrid::geometric(1.0, 2.0, 100, 0.5).is_err());
    }
}
