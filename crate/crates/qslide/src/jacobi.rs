//! Engineered 1-D chain Hamiltonians.
//!
//! All chains here are symmetric tridiagonal (Jacobi) matrices: couplings
//! `J_1..J_N` on the off-diagonal and on-site fields `B_0..B_N` on the
//! diagonal. Four families are built:
//!
//! * `pst`: `J_n = sqrt(n(N+1-n))`, zero field. Transfers a walker from
//!   site 0 to site N exactly at `t = pi/2`.
//! * `field`: the same couplings with a linear field `B_n = a*n`, which
//!   steers the packet momentum while preserving the binomial profile.
//! * `half_slide`: the first half of a virtual doubled `field` chain,
//!   `J_n = sqrt(n(2N-n))` with `B_n = a*n`. Used as the launch slide in
//!   the gate circuits; its junction coupling to the wire is exactly `N`.
//! * `uniform`: constant coupling, zero field. The transport wire.

use ndarray::Array2;

use crate::error::{QslideError, Result};
use crate::linalg::{self, EighResult};

/// Eigendecomposition of a chain, eigenvalues ascending.
pub type Spectrum = EighResult;

/// Chain family selector for [`build_chain`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainKind {
    Pst,
    Field,
    HalfSlide,
    Uniform,
}

/// Symmetric tridiagonal chain: `couplings[n-1]` is `J_n` (between sites
/// `n-1` and `n`), `fields[n]` is the on-site term `B_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobiChain {
    pub n_sites: usize,
    pub couplings: Vec<f64>,
    pub fields: Vec<f64>,
}

impl JacobiChain {
    /// Validates lengths and coupling positivity (a connected chain).
    pub fn new(couplings: Vec<f64>, fields: Vec<f64>) -> Result<Self> {
        let n_sites = fields.len();
        if n_sites < 2 {
            return Err(QslideError::InvalidSize(format!(
                "chain needs at least 2 sites, got {n_sites}"
            )));
        }
        if couplings.len() + 1 != n_sites {
            return Err(QslideError::Shape(format!(
                "{} couplings do not fit {} sites",
                couplings.len(),
                n_sites
            )));
        }
        if let Some(j) = couplings.iter().find(|&&j| !(j > 0.0)) {
            return Err(QslideError::Domain(format!(
                "couplings must be strictly positive, got {j}"
            )));
        }
        Ok(Self {
            n_sites,
            couplings,
            fields,
        })
    }

    /// Dense matrix form.
    pub fn to_matrix(&self) -> Array2<f64> {
        let n = self.n_sites;
        let mut h = Array2::zeros((n, n));
        for (i, &b) in self.fields.iter().enumerate() {
            h[(i, i)] = b;
        }
        for (i, &j) in self.couplings.iter().enumerate() {
            h[(i, i + 1)] = j;
            h[(i + 1, i)] = j;
        }
        h
    }
}

/// Build one of the four chain families over `n_sites` sites.
///
/// `a` is the linear-field slope (used by `field` and `half_slide`);
/// `j_uniform` is the constant coupling (used by `uniform` only).
pub fn build_chain(kind: ChainKind, n_sites: usize, a: f64, j_uniform: f64) -> Result<JacobiChain> {
    if n_sites < 2 {
        return Err(QslideError::InvalidSize(format!(
            "chain needs at least 2 sites, got {n_sites}"
        )));
    }
    if !a.is_finite() {
        return Err(QslideError::Domain(format!("field slope must be finite, got {a}")));
    }
    match kind {
        ChainKind::Pst | ChainKind::Field => {
            let n = n_sites - 1;
            let couplings = (1..=n)
                .map(|k| ((k * (n + 1 - k)) as f64).sqrt())
                .collect();
            let fields = match kind {
                ChainKind::Pst => vec![0.0; n_sites],
                _ => (0..n_sites).map(|k| a * k as f64).collect(),
            };
            JacobiChain::new(couplings, fields)
        }
        ChainKind::HalfSlide => {
            let n = n_sites;
            let couplings = (1..n).map(|k| ((k * (2 * n - k)) as f64).sqrt()).collect();
            let fields = (0..n).map(|k| a * k as f64).collect();
            JacobiChain::new(couplings, fields)
        }
        ChainKind::Uniform => {
            if !(j_uniform > 0.0) {
                return Err(QslideError::Domain(format!(
                    "uniform coupling must be strictly positive, got {j_uniform}"
                )));
            }
            JacobiChain::new(vec![j_uniform; n_sites - 1], vec![0.0; n_sites])
        }
    }
}

/// Coupling between the last slide site and the first wire site: the
/// half-slide continues a doubled chain, so `J_N = sqrt(N(2N-N)) = N`.
pub fn half_slide_junction_coupling(n_sites: usize) -> f64 {
    n_sites as f64
}

/// Chain with couplings `sqrt(p(1-p) n(N+1-n))` and fields `(1-2p)n + pN`.
///
/// Its eigenvalues are exactly the integers `0..N` for every `p` in (0,1),
/// and its eigenvectors are binomial-weighted Krawtchouk polynomials. The
/// `field` chain is this matrix divided by `sqrt(p(1-p))`, minus a constant
/// diagonal, with slope `a = (1-2p)/sqrt(p(1-p))`.
pub fn krawtchouk_chain(n_sites: usize, p: f64) -> Result<JacobiChain> {
    if n_sites < 2 {
        return Err(QslideError::InvalidSize(format!(
            "chain needs at least 2 sites, got {n_sites}"
        )));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(QslideError::Domain(format!("p must lie in (0,1), got {p}")));
    }
    let n = n_sites - 1;
    let scale = (p * (1.0 - p)).sqrt();
    let couplings = (1..=n)
        .map(|k| scale * ((k * (n + 1 - k)) as f64).sqrt())
        .collect();
    let fields = (0..=n)
        .map(|k| (1.0 - 2.0 * p) * k as f64 + p * n as f64)
        .collect();
    JacobiChain::new(couplings, fields)
}

/// Eigendecompose a chain; eigenvalues ascending, residual below
/// `1e-10 * ||H||` per pair.
pub fn eigendecompose(chain: &JacobiChain) -> Result<Spectrum> {
    linalg::eigh_tridiagonal(&chain.fields, &chain.couplings)
}
