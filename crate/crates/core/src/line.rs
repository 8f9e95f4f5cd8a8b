//! The discretized line: a self-dual grid standing in for the Schwartz
//! space, the centered Fourier transform, multiplication and derivative
//! operators, Hermite modes and interior projection.
//!
//! The grid has K points (a power of two) with spacing h = √(2π/K) and
//! nodes x_j = (j − K/2)h, so the frequency nodes of the centered DFT
//! coincide with the position nodes. All operators are dense K×K matrices:
//!   w(s) = diag(i·s·x_j)                 multiplication by isx,
//!   W(s) = diag(exp(i·s·x_j))            the corresponding phase,
//!   l(s) = −s·D,   D = T†·diag(−iξ)·T    derivative via the spectral route,
//!   T    the centered unitary DFT with e^{+iξx} kernel,
//!   a    = (x + d/dx)/√2 = (−i·w(1) − l(1))/√2,   a† its mirror.
//! Canonical commutation relations cannot hold exactly on a finite space;
//! the defect sits in the top modes and is confined there by compressing
//! onto low Hermite modes (interior projection) before any assertion.

use crate::error::{Error, Result};
use crate::linalg::{self, cr, CMat, CVec, I};
use num_complex::Complex64 as C64;

/// Self-dual grid: K nodes x_j = (j − K/2)·h with h = √(2π/K).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineGrid {
    pub k: usize,
    pub h: f64,
}

impl LineGrid {
    pub fn new(k: usize) -> Result<Self> {
        if k < 32 || !k.is_power_of_two() {
            return Err(Error::InvalidInput(format!(
                "grid size must be a power of two ≥ 32, got {k}"
            )));
        }
        Ok(Self {
            k,
            h: (2.0 * std::f64::consts::PI / k as f64).sqrt(),
        })
    }

    pub fn node(&self, j: usize) -> f64 {
        (j as f64 - (self.k / 2) as f64) * self.h
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.k).map(|j| self.node(j)).collect()
    }

    /// Half-width L = (K/2)·h of the grid window.
    pub fn half_width(&self) -> f64 {
        (self.k / 2) as f64 * self.h
    }
}

/// Which line operator a matrix stands for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LineOpKind {
    /// diag(i·s·x_j)
    SmallW(f64),
    /// diag(exp(i·s·x_j))
    BigW(f64),
    /// −s·(spectral derivative)
    L(f64),
    /// +s·(spectral derivative), the right-translation generator
    R(f64),
    Fourier,
    Position,
    Derivative,
    Lowering,
    Raising,
    /// translation by t (exact permutation when t is grid-aligned)
    Shift(f64),
}

#[derive(Debug, Clone)]
pub struct LineOperator {
    pub kind: LineOpKind,
    pub grid: LineGrid,
    pub matrix: CMat,
}

/// Precomputed operator context for one grid: the DFT, the spectral
/// derivative, position, and the Hermite mode basis.
#[derive(Debug, Clone)]
pub struct LineContext {
    pub grid: LineGrid,
    pub fourier: CMat,
    pub derivative: CMat,
    pub position: CMat,
    pub hermite: HermiteBasis,
}

impl LineContext {
    pub fn new(grid: LineGrid) -> Self {
        let k = grid.k;
        let fourier = fourier_matrix(&grid);
        // D = T†·diag(−iξ_m)·T realizes d/dx with the e^{+iξx} kernel
        let mut dphase = CMat::zeros(k, k);
        for m in 0..k {
            dphase[(m, m)] = -I * cr(grid.node(m));
        }
        let derivative = fourier.adjoint() * dphase * &fourier;
        let mut position = CMat::zeros(k, k);
        for j in 0..k {
            position[(j, j)] = cr(grid.node(j));
        }
        let hermite = HermiteBasis::new(&grid, k / 4);
        Self {
            grid,
            fourier,
            derivative,
            position,
            hermite,
        }
    }

    pub fn build(&self, kind: LineOpKind) -> LineOperator {
        let k = self.grid.k;
        let matrix = match kind {
            LineOpKind::SmallW(s) => CMat::from_fn(k, k, |i, j| {
                if i == j {
                    I * cr(s * self.grid.node(i))
                } else {
                    C64::new(0.0, 0.0)
                }
            }),
            LineOpKind::BigW(s) => CMat::from_fn(k, k, |i, j| {
                if i == j {
                    (I * cr(s * self.grid.node(i))).exp()
                } else {
                    C64::new(0.0, 0.0)
                }
            }),
            LineOpKind::L(s) => &self.derivative * cr(-s),
            LineOpKind::R(s) => &self.derivative * cr(s),
            LineOpKind::Fourier => self.fourier.clone(),
            LineOpKind::Position => self.position.clone(),
            LineOpKind::Derivative => self.derivative.clone(),
            LineOpKind::Lowering => {
                (&self.position + &self.derivative) * cr(std::f64::consts::FRAC_1_SQRT_2)
            }
            LineOpKind::Raising => {
                (&self.position - &self.derivative) * cr(std::f64::consts::FRAC_1_SQRT_2)
            }
            LineOpKind::Shift(t) => self.shift_matrix(t),
        };
        LineOperator {
            kind,
            grid: self.grid,
            matrix,
        }
    }

    /// Translation (Sχ)(x) = χ(x − t). Grid-aligned t gives an exact cyclic
    /// permutation; otherwise the Fourier phase e^{iξt} is used, exact on
    /// band-limited vectors with wrap-around error at the window boundary.
    fn shift_matrix(&self, t: f64) -> CMat {
        let k = self.grid.k;
        let steps = t / self.grid.h;
        if (steps - steps.round()).abs() < 1e-12 {
            let m = steps.round() as i64;
            let mut p = CMat::zeros(k, k);
            for j in 0..k {
                let src = (j as i64 - m).rem_euclid(k as i64) as usize;
                p[(j, src)] = C64::new(1.0, 0.0);
            }
            return p;
        }
        let mut phase = CMat::zeros(k, k);
        for m in 0..k {
            phase[(m, m)] = (I * cr(self.grid.node(m) * t)).exp();
        }
        self.fourier.adjoint() * phase * &self.fourier
    }

    /// Compression onto the first `k_h − margin` Hermite modes.
    pub fn interior_project(&self, op: &CMat, margin: usize) -> Result<CMat> {
        let q = self.interior_modes(margin)?;
        Ok(q.adjoint() * op * q)
    }

    /// The isometry onto the interior Hermite modes (K × (k_h − margin)).
    pub fn interior_modes(&self, margin: usize) -> Result<CMat> {
        if margin >= self.grid.k / 4 {
            return Err(Error::InvalidInput(format!(
                "margin {} too large for grid {} (must stay below K/4)",
                margin, self.grid.k
            )));
        }
        let m = self.hermite.k_h.saturating_sub(margin).max(1);
        Ok(self.hermite.q.columns(0, m).into())
    }
}

/// Centered unitary DFT T_{mj} = e^{i·ξ_m·x_j}/√K.
pub fn fourier_matrix(grid: &LineGrid) -> CMat {
    let k = grid.k;
    let scale = cr(1.0 / (k as f64).sqrt());
    CMat::from_fn(k, k, |m, j| {
        (I * cr(grid.node(m) * grid.node(j))).exp() * scale
    })
}

/// Sampled Hermite functions, orthonormalized on the grid.
#[derive(Debug, Clone)]
pub struct HermiteBasis {
    pub k_h: usize,
    /// K × k_h, columns orthonormal.
    pub q: CMat,
    /// Worst Gram-matrix deviation of the raw sampled modes from identity.
    pub raw_gram_deviation: f64,
}

impl HermiteBasis {
    pub fn new(grid: &LineGrid, k_h: usize) -> Self {
        let k = grid.k;
        let k_h = k_h.min(k);
        let sqrt_h = grid.h.sqrt();
        let mut raw = CMat::zeros(k, k_h);
        let norm0 = std::f64::consts::PI.powf(-0.25);
        let mut prev: Vec<f64> = vec![0.0; k];
        let mut cur: Vec<f64> = (0..k)
            .map(|j| norm0 * (-grid.node(j) * grid.node(j) / 2.0).exp() * sqrt_h)
            .collect();
        for q in 0..k_h {
            for j in 0..k {
                raw[(j, q)] = cr(cur[j]);
            }
            if q + 1 < k_h {
                let c1 = (2.0 / (q as f64 + 1.0)).sqrt();
                let c2 = (q as f64 / (q as f64 + 1.0)).sqrt();
                let next: Vec<f64> = (0..k)
                    .map(|j| c1 * grid.node(j) * cur[j] - c2 * prev[j])
                    .collect();
                prev = std::mem::take(&mut cur);
                cur = next;
            }
        }
        let gram = raw.adjoint() * &raw;
        let raw_gram_deviation = linalg::max_abs(&(&gram - CMat::identity(k_h, k_h)));
        let q = linalg::orthonormal_columns(&raw, 1e-8);
        Self {
            k_h: q.ncols(),
            q,
            raw_gram_deviation,
        }
    }

    pub fn mode(&self, q: usize) -> CVec {
        self.q.column(q).into()
    }
}

/// Max interior residual of [w(t), l(s)] − i·st·I over (s,t) ∈ {±1,±2}².
///
/// The sign of the constant follows from w(t) = i·t·x̂ and l(s) = −s·d/dx
/// together with [x̂, d/dx] = −1; it is the orientation that makes
/// [a, a†] = I come out positive.
pub fn ccr_check(ctx: &LineContext, margin: usize) -> Result<f64> {
    let q = ctx.interior_modes(margin)?;
    let mut worst = 0.0f64;
    for s in [-2.0, -1.0, 1.0, 2.0] {
        for t in [-2.0, -1.0, 1.0, 2.0] {
            let w = ctx.build(LineOpKind::SmallW(t)).matrix;
            let l = ctx.build(LineOpKind::L(s)).matrix;
            let comm = linalg::commutator(&w, &l);
            let expect = CMat::identity(ctx.grid.k, ctx.grid.k) * (I * cr(s * t));
            let res = q.adjoint() * (comm - expect) * &q;
            worst = worst.max(linalg::frob_norm(&res));
        }
    }
    Ok(worst)
}

/// Max interior residual of T·l(t)·T⁻¹ − w(t) over t ∈ {±1, ±2}.
pub fn fourier_intertwine_check(ctx: &LineContext, margin: usize) -> Result<f64> {
    let q = ctx.interior_modes(margin)?;
    let tmat = &ctx.fourier;
    let mut worst = 0.0f64;
    for t in [-2.0, -1.0, 1.0, 2.0] {
        let l = ctx.build(LineOpKind::L(t)).matrix;
        let w = ctx.build(LineOpKind::SmallW(t)).matrix;
        let conj = tmat * l * tmat.adjoint();
        let res = q.adjoint() * (conj - w) * &q;
        worst = worst.max(linalg::frob_norm(&res));
    }
    Ok(worst)
}
