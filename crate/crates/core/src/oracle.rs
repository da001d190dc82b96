//! Position-space reference solver: fourth-order finite differences with
//! hard walls at the box edges, diagonalized densely.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, PhaseSpaceGrid, QuantizationParams};
use crate::hamiltonian::HamiltonianSpec;
use crate::scalar::{creal, from_usize, lit, Complex, Real};
use crate::weyl::{inverse_weyl, OperatorKernel};

pub const DEFAULT_EIGENPAIRS: usize = 6;

/// `−ħ²/2m ∂ₓ² + V(x)` on cell-midpoint nodes.
#[derive(Debug, Clone)]
pub struct PositionHamiltonian<T: Real> {
    pub x: Vec<T>,
    pub dx: T,
    pub mass: T,
    pub matrix: DMatrix<T>,
}

/// Builds the finite-difference Hamiltonian on `n` midpoint nodes of
/// `[x_min, x_max]`.
pub fn build_position_hamiltonian<T: Real>(
    potential: impl Fn(T) -> T,
    mass: T,
    x_min: T,
    x_max: T,
    n: usize,
    q: QuantizationParams<T>,
) -> Result<PositionHamiltonian<T>> {
    if n < 5 {
        return Err(Error::InvalidGrid(format!("oracle needs at least 5 nodes, got {n}")));
    }
    if !(x_min < x_max) {
        return Err(Error::InvalidGrid(format!("need x_min < x_max, got [{x_min}, {x_max}]")));
    }
    if !(mass > T::zero()) {
        return Err(Error::InvalidParameter(format!("mass must be positive, got {mass}")));
    }
    let dx = (x_max - x_min) / from_usize(n);
    let x: Vec<T> = (0..n).map(|i| x_min + dx * (from_usize::<T>(i) + lit(0.5))).collect();
    let c = -q.hbar * q.hbar / (lit::<T>(2.0) * mass) / (lit::<T>(12.0) * dx * dx);
    let stencil: [(isize, f64); 5] = [(-2, -1.0), (-1, 16.0), (0, -30.0), (1, 16.0), (2, -1.0)];
    let mut matrix = DMatrix::zeros(n, n);
    for i in 0..n {
        for (off, w) in stencil {
            let j = i as isize + off;
            if j >= 0 && (j as usize) < n {
                matrix[(i, j as usize)] += c * lit(w);
            }
        }
        let v = potential(x[i]);
        if !v.is_finite() {
            return Err(Error::NonFiniteSample { x: crate::scalar::to_f64(x[i]), p: 0.0 });
        }
        matrix[(i, i)] += v;
    }
    Ok(PositionHamiltonian { x, dx, mass, matrix })
}

/// Oracle Hamiltonian for a family, on the x axis of `grid` refined by the
/// odd factor `refine` (so the grid's nodes are oracle nodes).
pub fn oracle_for<T: Real>(
    spec: &HamiltonianSpec<T>,
    grid: &PhaseSpaceGrid<T>,
    q: QuantizationParams<T>,
    refine: usize,
) -> Result<PositionHamiltonian<T>> {
    if refine.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!("refinement factor must be odd, got {refine}")));
    }
    let half = lit::<T>(0.5);
    let (mass, v): (T, Box<dyn Fn(T) -> T>) = match spec {
        HamiltonianSpec::Harmonic { mass, omega } => {
            let k = *mass * *omega * *omega * half;
            (*mass, Box::new(move |x| k * x * x))
        }
        HamiltonianSpec::Free { mass } => (*mass, Box::new(|_| T::zero())),
        HamiltonianSpec::Linear => (half, Box::new(|x| x)),
        HamiltonianSpec::Quadratic { a, b, c } if *c == T::zero() && *a > T::zero() => {
            let b = *b;
            (half / *a, Box::new(move |x| b * x * x))
        }
        _ => {
            return Err(Error::Unsupported(format!(
                "no position-space oracle for the {} family",
                spec.family_name()
            )))
        }
    };
    build_position_hamiltonian(v, mass, grid.x_min(), grid.x_max(), grid.n_x() * refine, q)
}

/// Lowest `k` eigenpairs, ascending, with `Σψ²dx = 1` and the first
/// significant component of each vector positive.
pub fn eigen_ground<T: Real>(h: &PositionHamiltonian<T>, k: usize) -> Result<Vec<(T, DVector<T>)>> {
    let n = h.matrix.nrows();
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!("requested {k} eigenpairs of a {n}×{n} matrix")));
    }
    let eig = SymmetricEigen::try_new(h.matrix.clone(), T::default_epsilon(), 0)
        .ok_or_else(|| Error::Eigensolver("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).expect("finite eigenvalues"));
    let norm = T::one() / h.dx.sqrt();
    Ok(order
        .into_iter()
        .take(k)
        .map(|j| {
            let mut v = eig.eigenvectors.column(j).into_owned() * norm;
            let big = v.amax();
            if let Some(first) = v.iter().copied().find(|c| c.abs() > big * lit(1e-3)) {
                if first < T::zero() {
                    v = -v;
                }
            }
            (eig.eigenvalues[j], v)
        })
        .collect())
}

/// Restricts a state from an oracle grid refined by the odd `refine` onto
/// the coarse nodes and renormalizes to `Σψ²dx = 1` there.
pub fn restrict<T: Real>(psi: &DVector<T>, refine: usize, coarse_dx: T) -> DVector<T> {
    let off = (refine - 1) / 2;
    let v = DVector::from_iterator(psi.len() / refine, (0..psi.len() / refine).map(|i| psi[i * refine + off]));
    let n2 = v.norm_squared() * coarse_dx;
    v / n2.sqrt()
}

/// Wigner function `(1/2πħ)·W⁻¹[ψψ*]` of a normalized state on the
/// grid's x nodes.
pub fn wigner_of_state<T: Real>(
    psi: &DVector<T>,
    grid: &PhaseSpaceGrid<T>,
    q: QuantizationParams<T>,
) -> Result<GridFunction<T>> {
    let n = grid.n_x();
    if psi.len() != n {
        return Err(Error::ShapeMismatch { expected: (n, 1), found: (psi.len(), 1) });
    }
    let m = DMatrix::<Complex<T>>::from_fn(n, n, |i, j| creal(psi[i] * psi[j]));
    let kernel = OperatorKernel::from_matrix(grid, q, m)?;
    Ok(inverse_weyl(&kernel).scale_real(T::one() / q.cell()))
}

/// Matrix elements `⟨φₘ|K|φₙ⟩` of an operator kernel between real states
/// normalized on its grid.
pub fn matrix_elements<T: Real>(kernel: &OperatorKernel<T>, states: &[DVector<T>]) -> DMatrix<Complex<T>> {
    let dx = kernel.grid().dx();
    let k = kernel.values();
    let s = states.len();
    DMatrix::from_fn(s, s, |a, b| {
        let va = states[a].map(creal);
        let vb = states[b].map(creal);
        (va.transpose() * k * vb)[(0, 0)] * (dx * dx)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{integrate, sample_real};
    use crate::star::star_kernel_route;
    use crate::weyl::{weyl_kernel, HermitianSpectrum};

    fn q1() -> QuantizationParams<f64> {
        QuantizationParams::new(1.0).unwrap()
    }

    #[test]
    fn kinetic_rows_sum_to_zero() {
        let h = build_position_hamiltonian(|_| 0.0, 1.0, -4.0, 4.0, 20, q1()).unwrap();
        for i in 2..18 {
            assert!(h.matrix.row(i).sum().abs() < 1e-10);
        }
        assert!((h.matrix.clone() - h.matrix.transpose()).amax() == 0.0);
    }

    #[test]
    fn harmonic_levels() {
        let h = build_position_hamiltonian(|x| 0.5 * x * x, 1.0, -8.0, 8.0, 256, q1()).unwrap();
        let pairs = eigen_ground(&h, DEFAULT_EIGENPAIRS).unwrap();
        for (n, (e, _)) in pairs.iter().enumerate() {
            assert!((e - (n as f64 + 0.5)).abs() < 1e-4, "E{n} = {e}");
        }
        for a in 0..pairs.len() {
            for b in 0..pairs.len() {
                let dot = pairs[a].1.dot(&pairs[b].1) * h.dx;
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn quadratic_without_cross_term() {
        let spec = HamiltonianSpec::quadratic(2.0, 1.0, 0.0).unwrap();
        let g = PhaseSpaceGrid::matched(-8.0, 8.0, 64, q1()).unwrap();
        let h = oracle_for(&spec, &g, q1(), 3).unwrap();
        let (e, _) = &eigen_ground(&h, 1).unwrap()[0];
        assert!((e - 2f64.sqrt()).abs() < 1e-4);
        let cross = HamiltonianSpec::quadratic(2.0, 1.0, 0.5).unwrap();
        assert!(matches!(oracle_for(&cross, &g, q1(), 3), Err(Error::Unsupported(_))));
        assert!(oracle_for(&spec, &g, q1(), 2).is_err());
    }

    #[test]
    fn linear_levels_drop_with_the_box() {
        let e = |l: f64| {
            let h = build_position_hamiltonian(|x| x, 0.5, -l, l, (40.0 * l) as usize, q1()).unwrap();
            eigen_ground(&h, 1).unwrap()[0].0
        };
        let (a, b, c) = (e(5.0), e(10.0), e(20.0));
        assert!(a > b && b > c);
    }

    #[test]
    fn ground_and_excited_wigner() {
        let qq = q1();
        let g = PhaseSpaceGrid::matched(-8.0, 8.0, 64, qq).unwrap();
        let spec = HamiltonianSpec::harmonic(1.0, 1.0).unwrap();
        let h = oracle_for(&spec, &g, qq, 5).unwrap();
        let pairs = eigen_ground(&h, 2).unwrap();
        let psi0 = restrict(&pairs[0].1, 5, g.dx());
        let psi1 = restrict(&pairs[1].1, 5, g.dx());
        let r0 = wigner_of_state(&psi0, &g, qq).unwrap();
        let r1 = wigner_of_state(&psi1, &g, qq).unwrap();
        assert!(r0.max_imag_abs() < 1e-12);
        assert!((integrate(&r0).re - 1.0).abs() < 1e-12);
        assert!(r0.min_real() > -1e-8);
        assert!(r1.min_real() < -0.1);
        let exact = sample_real(&g, |x, p| (-x * x - p * p).exp() / std::f64::consts::PI).unwrap();
        assert!(r0.max_abs_diff(&exact).unwrap() < 1e-4);
        let cross = star_kernel_route(&r0, &r1, qq).unwrap();
        assert!(integrate(&cross).norm() < 1e-8);
    }

    #[test]
    fn engine_matrix_elements_match_oracle() {
        let qq = q1();
        let g = PhaseSpaceGrid::matched(-8.0, 8.0, 64, qq).unwrap();
        let spec = HamiltonianSpec::harmonic(1.0, 1.0).unwrap();
        let h = oracle_for(&spec, &g, qq, 5).unwrap();
        let pairs = eigen_ground(&h, 4).unwrap();
        let states: Vec<_> = pairs.iter().map(|(_, v)| restrict(v, 5, g.dx())).collect();
        let kernel = weyl_kernel(&spec.sample(&g).unwrap(), qq);
        let m = matrix_elements(&kernel, &states);
        for a in 0..4 {
            for b in 0..4 {
                let want = if a == b { pairs[a].0 } else { 0.0 };
                assert!((m[(a, b)].re - want).abs() < 1e-4, "({a},{b}) {} {want}", m[(a, b)]);
            }
        }
        let engine = HermitianSpectrum::new(&kernel).unwrap();
        for (n, (e, _)) in pairs.iter().enumerate() {
            assert!((engine.eigenvalues()[n] - e).abs() < 1e-4);
        }
    }

    #[test]
    fn input_validation() {
        assert!(build_position_hamiltonian(|x: f64| x, 1.0, 0.0, 1.0, 3, q1()).is_err());
        assert!(build_position_hamiltonian(|x: f64| x, 0.0, 0.0, 1.0, 10, q1()).is_err());
        assert!(build_position_hamiltonian(|x: f64| 1.0 / x.abs().min(0.0), 1.0, -1.0, 1.0, 10, q1()).is_err());
        let h = build_position_hamiltonian(|x: f64| x, 1.0, 0.0, 1.0, 10, q1()).unwrap();
        assert!(eigen_ground(&h, 11).is_err());
        let g = PhaseSpaceGrid::matched(-4.0, 4.0, 16, q1()).unwrap();
        assert!(wigner_of_state(&DVector::zeros(5), &g, q1()).is_err());
    }
}
