//! Periodic grids, grid functions, and the spectral decomposition of
//! `A = -d²/dt² - U(t)` acting on `ℝᴺ`-valued loops.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use std::io::Write;

use crate::error::{Error, Result};
use crate::fourier::second_derivative_matrix;

/// Uniform grid `t_j = jT/M`, `j = 0..M`, for loops in `ℝᴺ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    period: f64,
    nodes: usize,
    dim: usize,
}

impl TimeGrid {
    pub fn new(period: f64, nodes: usize, dim: usize) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::InvalidGrid(format!("period must be positive, got {period}")));
        }
        if nodes == 0 || nodes % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "node count must be even and positive, got {nodes}"
            )));
        }
        if dim == 0 {
            return Err(Error::InvalidGrid("dimension must be positive".into()));
        }
        Ok(Self { period, nodes, dim })
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Total number of unknowns `M·N`.
    pub fn len(&self) -> usize {
        self.nodes * self.dim
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight `T/M` of the periodic rectangle rule.
    pub fn spacing(&self) -> f64 {
        self.period / self.nodes as f64
    }

    pub fn time(&self, j: usize) -> f64 {
        j as f64 * self.spacing()
    }
}

/// Samples `u(t_j) ∈ ℝᴺ`, stored node-major (`values[j*N + a]`).
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: TimeGrid,
    values: DVector<f64>,
}

impl GridFunction {
    pub fn new(grid: TimeGrid, values: DVector<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "grid value", node: idx / grid.dim() });
        }
        Ok(Self { grid, values })
    }

    pub fn from_vec(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        Self::new(grid, DVector::from_vec(values))
    }

    pub fn zeros(grid: TimeGrid) -> Self {
        Self { grid, values: DVector::zeros(grid.len()) }
    }

    /// Builds `u` from `f(t, out)` writing `u(t) ∈ ℝᴺ` into `out`.
    pub fn from_fn(grid: TimeGrid, mut f: impl FnMut(f64, &mut [f64])) -> Self {
        let n = grid.dim();
        let mut values = DVector::zeros(grid.len());
        for j in 0..grid.nodes() {
            f(grid.time(j), &mut values.as_mut_slice()[j * n..(j + 1) * n]);
        }
        Self { grid, values }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn into_values(self) -> DVector<f64> {
        self.values
    }

    pub fn node(&self, j: usize) -> &[f64] {
        let n = self.grid.dim();
        &self.values.as_slice()[j * n..(j + 1) * n]
    }

    pub fn ensure_same_grid(&self, other: &TimeGrid) -> Result<()> {
        if &self.grid != other {
            return Err(Error::GridMismatch(format!("{:?} vs {:?}", self.grid, other)));
        }
        Ok(())
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { grid: self.grid, values: &self.values * s }
    }

    /// `self + s·other`
    pub fn axpy(&self, s: f64, other: &GridFunction) -> Result<Self> {
        other.ensure_same_grid(&self.grid)?;
        Ok(Self { grid: self.grid, values: &self.values + &other.values * s })
    }

    /// Discrete `L²` inner product `(T/M) Σ_j u_j·v_j`.
    pub fn l2_inner(&self, other: &GridFunction) -> Result<f64> {
        other.ensure_same_grid(&self.grid)?;
        Ok(self.grid.spacing() * self.values.dot(&other.values))
    }

    pub fn l2_norm(&self) -> f64 {
        (self.grid.spacing() * self.values.norm_squared()).sqrt()
    }

    /// Discrete `Lᵖ` norm; `p = f64::INFINITY` gives `max_j |u_j|`.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        if !(p >= 1.0) {
            return Err(Error::InvalidArgument(format!("Lp norm needs p >= 1, got {p}")));
        }
        let n = self.grid.dim();
        let pointwise = self
            .values
            .as_slice()
            .chunks(n)
            .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt());
        if p.is_infinite() {
            return Ok(pointwise.fold(0.0, f64::max));
        }
        let sum: f64 = pointwise.map(|r| r.powf(p)).sum();
        Ok((self.grid.spacing() * sum).powf(1.0 / p))
    }
}

/// Samples `U(t_j)` of the symmetric matrix path.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPath {
    samples: Vec<DMatrix<f64>>,
}

impl MatrixPath {
    pub fn from_samples(grid: &TimeGrid, samples: Vec<DMatrix<f64>>) -> Result<Self> {
        if samples.len() != grid.nodes() {
            return Err(Error::GridMismatch(format!(
                "expected {} matrix samples, got {}",
                grid.nodes(),
                samples.len()
            )));
        }
        let n = grid.dim();
        if let Some(j) = samples.iter().position(|s| s.nrows() != n || s.ncols() != n) {
            return Err(Error::GridMismatch(format!("U(t_{j}) is not {n}x{n}")));
        }
        Ok(Self { samples })
    }

    pub fn zero(grid: &TimeGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    /// `U(t) ≡ ω²·I`.
    pub fn constant(grid: &TimeGrid, omega_sq: f64) -> Self {
        let n = grid.dim();
        Self { samples: vec![DMatrix::identity(n, n) * omega_sq; grid.nodes()] }
    }

    pub fn from_fn(grid: &TimeGrid, f: impl Fn(f64) -> DMatrix<f64>) -> Result<Self> {
        Self::from_samples(grid, (0..grid.nodes()).map(|j| f(grid.time(j))).collect())
    }

    pub fn sample(&self, j: usize) -> &DMatrix<f64> {
        &self.samples[j]
    }

    pub fn is_constant(&self) -> bool {
        self.samples.windows(2).all(|w| w[0] == w[1])
    }
}

/// Assembles `(-D₂) ⊗ I_N - blockdiag(U(t_j))`, with `D₂` the Fourier
/// second-derivative matrix.
pub fn assemble_operator(grid: &TimeGrid, path: &MatrixPath) -> Result<DMatrix<f64>> {
    let n = grid.dim();
    let m = grid.nodes();
    if path.samples.len() != m {
        return Err(Error::GridMismatch("matrix path does not match grid".into()));
    }
    for (j, s) in path.samples.iter().enumerate() {
        let asym = (s - s.transpose()).amax();
        if asym > 1e-12 * s.amax().max(1.0) {
            return Err(Error::NonSymmetric { node: j, asymmetry: asym });
        }
    }
    let d2 = second_derivative_matrix(m, grid.period());
    let mut op = DMatrix::zeros(m * n, m * n);
    for i in 0..m {
        for j in 0..m {
            let v = -d2[(i, j)];
            for a in 0..n {
                op[(i * n + a, j * n + a)] = v;
            }
        }
    }
    for (j, s) in path.samples.iter().enumerate() {
        let sym = (s + s.transpose()) * 0.5;
        let mut block = op.view_mut((j * n, j * n), (n, n));
        block -= sym;
    }
    Ok(op)
}

/// Which part of `E = E⁻ ⊕ E⁰ ⊕ E⁺` an eigenvector belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Part {
    Minus,
    Zero,
    Plus,
}

impl Part {
    pub fn as_str(&self) -> &'static str {
        match self {
            Part::Minus => "minus",
            Part::Zero => "zero",
            Part::Plus => "plus",
        }
    }
}

/// Eigenpairs of `A`, orthonormal in the discrete `L²` product, together with
/// the sign counts and the weights of the `E` inner product.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    grid: TimeGrid,
    eigenvalues: Vec<f64>,
    basis: DMatrix<f64>,
    weights: Vec<f64>,
    zero_tol: f64,
    n_minus: usize,
    n_zero: usize,
    operator: DMatrix<f64>,
}

/// Default `ε₀ = 1e-8·max(1, max|λ|)`.
pub fn default_zero_tol(eigenvalues: &[f64]) -> f64 {
    1e-8 * eigenvalues.iter().fold(1.0f64, |m, l| m.max(l.abs()))
}

impl SpectralDecomposition {
    /// Full eigendecomposition of the assembled operator.
    pub fn new(op: DMatrix<f64>, grid: TimeGrid, zero_tol: Option<f64>) -> Result<Self> {
        let len = grid.len();
        if op.nrows() != len || op.ncols() != len {
            return Err(Error::GridMismatch(format!(
                "operator is {}x{}, grid has {len} unknowns",
                op.nrows(),
                op.ncols()
            )));
        }
        let asym = (&op - op.transpose()).amax();
        if asym > 1e-12 * op.amax().max(1.0) {
            return Err(Error::InvalidArgument(format!("operator not symmetric ({asym:.3e})")));
        }
        let eig = SymmetricEigen::try_new(op.clone(), f64::EPSILON, 10_000).ok_or_else(|| {
            let mut off = op.clone();
            off.fill_diagonal(0.0);
            Error::EigenNoConvergence { residual: off.norm() }
        })?;
        let mut order: Vec<usize> = (0..len).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

        let inv_sqrt_h = 1.0 / grid.spacing().sqrt();
        let mut basis = DMatrix::zeros(len, len);
        let mut eigenvalues = Vec::with_capacity(len);
        for (col, &src) in order.iter().enumerate() {
            eigenvalues.push(eig.eigenvalues[src]);
            let v = eig.eigenvectors.column(src);
            let peak = v.amax();
            let pivot = v.iter().position(|x| x.abs() > 1e-8 * peak).unwrap_or(0);
            let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
            basis.set_column(col, &(v * (sign * inv_sqrt_h)));
        }

        let zero_tol = zero_tol.unwrap_or_else(|| default_zero_tol(&eigenvalues));
        if !(zero_tol > 0.0) {
            return Err(Error::InvalidArgument("zero tolerance must be positive".into()));
        }
        let n_minus = eigenvalues.iter().filter(|&&l| l < -zero_tol).count();
        let n_zero = eigenvalues.iter().filter(|&&l| l.abs() <= zero_tol).count();
        let weights = eigenvalues
            .iter()
            .map(|&l| if l.abs() > zero_tol { l.abs() } else { 1.0 })
            .collect();
        Ok(Self { grid, eigenvalues, basis, weights, zero_tol, n_minus, n_zero, operator: op })
    }

    /// Assembles and decomposes `A` for the given matrix path.
    pub fn from_path(grid: TimeGrid, path: &MatrixPath, zero_tol: Option<f64>) -> Result<Self> {
        Self::new(assemble_operator(&grid, path)?, grid, zero_tol)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Grid values of the eigenvectors, one per column.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn operator(&self) -> &DMatrix<f64> {
        &self.operator
    }

    pub fn zero_tol(&self) -> f64 {
        self.zero_tol
    }

    pub fn n_minus(&self) -> usize {
        self.n_minus
    }

    pub fn n_zero(&self) -> usize {
        self.n_zero
    }

    pub fn n_plus(&self) -> usize {
        self.eigenvalues.len() - self.n_minus - self.n_zero
    }

    /// `n̄ = n⁻ + n⁰`.
    pub fn n_bar(&self) -> usize {
        self.n_minus + self.n_zero
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn part(&self, i: usize) -> Part {
        if i < self.n_minus {
            Part::Minus
        } else if i < self.n_minus + self.n_zero {
            Part::Zero
        } else {
            Part::Plus
        }
    }

    pub fn eigenvector(&self, i: usize) -> GridFunction {
        GridFunction { grid: self.grid, values: self.basis.column(i).into_owned() }
    }

    /// Eigen-coordinates `c_i = (u, e_i)₂`.
    pub fn coefficients(&self, u: &GridFunction) -> Result<DVector<f64>> {
        u.ensure_same_grid(&self.grid)?;
        Ok(self.basis.tr_mul(&u.values) * self.grid.spacing())
    }

    pub fn synthesize(&self, coeffs: &DVector<f64>) -> GridFunction {
        GridFunction { grid: self.grid, values: &self.basis * coeffs }
    }

    /// `Σ_{i ∈ part} (u, e_i)₂ e_i`.
    pub fn project(&self, u: &GridFunction, part: Part) -> Result<GridFunction> {
        let mut c = self.coefficients(u)?;
        for i in 0..c.len() {
            if self.part(i) != part {
                c[i] = 0.0;
            }
        }
        Ok(self.synthesize(&c))
    }

    /// `(|A|^{1/2}u, |A|^{1/2}v)₂ + (u⁰, v⁰)₂`.
    pub fn e_inner(&self, u: &GridFunction, v: &GridFunction) -> Result<f64> {
        let cu = self.coefficients(u)?;
        let cv = self.coefficients(v)?;
        Ok(self.e_inner_coeffs(&cu, &cv))
    }

    pub fn e_inner_coeffs(&self, cu: &DVector<f64>, cv: &DVector<f64>) -> f64 {
        cu.iter().zip(cv.iter()).zip(&self.weights).map(|((a, b), w)| w * a * b).sum()
    }

    pub fn e_norm(&self, u: &GridFunction) -> Result<f64> {
        self.e_inner(u, u).map(f64::sqrt)
    }

    /// Extremal constants `c ≤ ‖u‖/‖u‖_{H¹} ≤ C` over the grid space, where
    /// `‖u‖²_{H¹} = |u|₂² + |u̇|₂²`.
    pub fn norm_equivalence(&self) -> Result<(f64, f64)> {
        let m = self.grid.nodes();
        let n = self.grid.dim();
        let d2 = second_derivative_matrix(m, self.grid.period());
        // -D₂ ⊗ I applied to the basis
        let mut kb = DMatrix::zeros(m * n, self.len());
        for col in 0..self.len() {
            for a in 0..n {
                let comp = DVector::from_fn(m, |j, _| self.basis[(j * n + a, col)]);
                let dk = -(&d2 * comp);
                for j in 0..m {
                    kb[(j * n + a, col)] = dk[j];
                }
            }
        }
        let mut gram = self.basis.tr_mul(&kb) * self.grid.spacing();
        for i in 0..self.len() {
            gram[(i, i)] += 1.0;
        }
        let gram = (&gram + gram.transpose()) * 0.5;
        let chol = gram
            .cholesky()
            .ok_or_else(|| Error::InvalidArgument("H1 Gram matrix not positive definite".into()))?;
        let l_inv = chol
            .l()
            .try_inverse()
            .ok_or_else(|| Error::InvalidArgument("singular Cholesky factor".into()))?;
        let w = DMatrix::from_diagonal(&DVector::from_column_slice(&self.weights));
        let pencil = &l_inv * w * l_inv.transpose();
        let pencil = (&pencil + pencil.transpose()) * 0.5;
        let ev = SymmetricEigen::new(pencil).eigenvalues;
        let lo = ev.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ev.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Ok((lo.max(0.0).sqrt(), hi.sqrt()))
    }

    /// Writes `index,eigenvalue,classification` rows (1-based index).
    pub fn write_spectrum_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "index,eigenvalue,classification")?;
        for (i, l) in self.eigenvalues.iter().enumerate() {
            writeln!(w, "{},{:.16e},{}", i + 1, l, self.part(i).as_str())?;
        }
        Ok(())
    }

    /// Writes the eigenvectors as consecutive `M×N` blocks, each preceded by a
    /// `# eigenvector <i>` comment line.
    pub fn write_eigenvectors_csv<W: Write>(&self, mut w: W, count: usize) -> std::io::Result<()> {
        let n = self.grid.dim();
        for i in 0..count.min(self.len()) {
            writeln!(w, "# eigenvector {}", i + 1)?;
            for j in 0..self.grid.nodes() {
                let row: Vec<String> =
                    (0..n).map(|a| format!("{:.16e}", self.basis[(j * n + a, i)])).collect();
                writeln!(w, "{}", row.join(","))?;
            }
        }
        Ok(())
    }
}
