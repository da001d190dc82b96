//! High-order finite differences on the phase-space axes.
//!
//! Weights come from Fornberg's recursion on unit-spaced points. Interior
//! nodes use centred stencils; near the edges the same number of points is
//! kept and the window is shifted inward, so the formal order is preserved
//! everywhere on the axis.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::scalar::{creal, from_usize, lit, Complex, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    P,
}

/// Default formal accuracy order of the difference stencils.
pub const DEFAULT_ACCURACY: usize = 8;

/// Fornberg weights for the `m`-th derivative at `z` from samples at `xs`.
pub fn fornberg_weights<T: Real>(z: T, xs: &[T], m: usize) -> Vec<T> {
    let n = xs.len();
    // c[j][k]: weight of point j for derivative k
    let mut c = vec![vec![T::zero(); m + 1]; n];
    let mut c1 = T::one();
    let mut c4 = xs[0] - z;
    c[0][0] = T::one();
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = T::one();
        let c5 = c4;
        c4 = xs[i] - z;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (from_usize::<T>(k) * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - from_usize::<T>(k) * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}

/// Number of points used for derivative `order` at formal `accuracy`.
pub fn stencil_width(order: usize, accuracy: usize) -> usize {
    2 * order.div_ceil(2) - 1 + accuracy.max(2)
}

/// Precomputed weights for one derivative order on a uniform axis.
#[derive(Debug, Clone)]
pub struct Stencil<T> {
    order: usize,
    width: usize,
    n: usize,
    /// `weights[o]`: stencil for a node sitting at offset `o` in its window.
    weights: Vec<Vec<T>>,
}

impl<T: Real> Stencil<T> {
    pub fn new(order: usize, accuracy: usize, n: usize, spacing: T) -> Result<Self> {
        let width = stencil_width(order, accuracy);
        if width > n {
            return Err(Error::StencilTooWide { needed: width, available: n });
        }
        let pts: Vec<T> = (0..width).map(from_usize).collect();
        let scale = T::one() / spacing.powi(order as i32);
        let weights = (0..width)
            .map(|o| {
                fornberg_weights(from_usize(o), &pts, order)
                    .into_iter()
                    .map(|w| w * scale)
                    .collect()
            })
            .collect();
        Ok(Self { order, width, n, weights })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    fn window(&self, j: usize) -> (usize, usize) {
        let half = self.width / 2;
        let start = j.saturating_sub(half).min(self.n - self.width);
        (start, j - start)
    }

    /// Apply along a strided 1-D view: `get(i)` reads sample `i`.
    pub fn apply_at(&self, j: usize, get: impl Fn(usize) -> Complex<T>) -> Complex<T> {
        let (start, o) = self.window(j);
        // derivative weights sum to zero; differencing against the centre
        // makes locally constant data give exact zeros
        let centre = if self.order > 0 { get(j) } else { creal(T::zero()) };
        let mut acc = creal(T::zero());
        for (t, w) in self.weights[o].iter().enumerate() {
            acc += (get(start + t) - centre) * *w;
        }
        acc
    }
}

/// `∂^order f / ∂axis^order` on every fine-axis sample.
pub fn derivative<T: Real>(
    f: &GridFunction<T>,
    axis: Axis,
    order: usize,
    accuracy: usize,
) -> Result<GridFunction<T>> {
    if order == 0 {
        return Ok(f.clone());
    }
    let g = f.grid();
    let data = f.fine();
    let (rows, cols) = data.shape();
    let out = match axis {
        Axis::X => {
            let st = Stencil::new(order, accuracy, rows, g.dx() * lit(0.5))?;
            DMatrix::from_fn(rows, cols, |r, k| st.apply_at(r, |i| data[(i, k)]))
        }
        Axis::P => {
            let st = Stencil::new(order, accuracy, cols, g.dp())?;
            DMatrix::from_fn(rows, cols, |r, k| st.apply_at(k, |i| data[(r, i)]))
        }
    };
    Ok(GridFunction::from_fine_unchecked(g, out))
}

/// Mixed partial `∂x^nx ∂p^np f`.
pub fn partial<T: Real>(
    f: &GridFunction<T>,
    nx: usize,
    np: usize,
    accuracy: usize,
) -> Result<GridFunction<T>> {
    let fp = derivative(f, Axis::P, np, accuracy)?;
    derivative(&fp, Axis::X, nx, accuracy)
}

/// All mixed partials `∂x^a ∂p^b f` with `a + b ≤ max_total`, indexed `[a][b]`.
pub fn partial_table<T: Real>(
    f: &GridFunction<T>,
    max_total: usize,
    accuracy: usize,
) -> Result<Vec<Vec<GridFunction<T>>>> {
    let mut table = Vec::with_capacity(max_total + 1);
    // p derivatives first, then x derivatives of each
    let mut p_derivs = Vec::with_capacity(max_total + 1);
    for b in 0..=max_total {
        p_derivs.push(derivative(f, Axis::P, b, accuracy)?);
    }
    for a in 0..=max_total {
        let mut row = Vec::with_capacity(max_total + 1 - a);
        for pd in p_derivs.iter().take(max_total - a + 1) {
            row.push(derivative(pd, Axis::X, a, accuracy)?);
        }
        table.push(row);
    }
    Ok(table)
}
