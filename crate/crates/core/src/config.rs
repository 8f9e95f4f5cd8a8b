//! Run configuration shared by the verification campaigns and the CLI.

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// How the flow Hamiltonian is chosen.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "kebab-case")]
pub enum HamiltonianSpec {
    PauliZ,
    RandomHermitian,
    Zero,
    File(String),
}

impl std::str::FromStr for HamiltonianSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "pauli-z" => Self::PauliZ,
            "random-hermitian" => Self::RandomHermitian,
            "zero" => Self::Zero,
            path => Self::File(path.to_string()),
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub n: usize,
    pub k: usize,
    pub margin: usize,
    pub seed: u64,
    pub tol_scale: f64,
    /// Per-check tolerance overrides by check name.
    pub tolerances: BTreeMap<String, f64>,
    pub hamiltonian: HamiltonianSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n: 2,
            k: 128,
            margin: 8,
            seed: 7,
            tol_scale: 1.0,
            tolerances: BTreeMap::new(),
            hamiltonian: HamiltonianSpec::PauliZ,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(2..=6).contains(&self.n) {
            return Err(Error::Config(format!(
                "n must be between 2 and 6, got {}",
                self.n
            )));
        }
        if !(32..=512).contains(&self.k) || !self.k.is_power_of_two() {
            return Err(Error::Config(format!(
                "grid size must be a power of two in [32, 512], got {}",
                self.k
            )));
        }
        if self.margin >= self.k / 4 {
            return Err(Error::Config(format!(
                "margin {} must stay below K/4 = {}",
                self.margin,
                self.k / 4
            )));
        }
        if !(self.tol_scale > 0.0) || !self.tol_scale.is_finite() {
            return Err(Error::Config("tol-scale must be a positive number".into()));
        }
        if self.hamiltonian == HamiltonianSpec::PauliZ && self.n != 2 {
            return Err(Error::Config(
                "the pauli-z preset is a 2×2 Hamiltonian; pick random-hermitian for n > 2".into(),
            ));
        }
        Ok(())
    }

    /// The flow Hamiltonian before grid snapping.
    pub fn hamiltonian_matrix(&self) -> Result<CMat> {
        match &self.hamiltonian {
            HamiltonianSpec::PauliZ => Ok(CMat::from_row_slice(
                2,
                2,
                &[
                    linalg::ONE,
                    linalg::ZERO,
                    linalg::ZERO,
                    -linalg::ONE,
                ],
            )),
            HamiltonianSpec::Zero => Ok(CMat::zeros(self.n, self.n)),
            HamiltonianSpec::RandomHermitian => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x48_41_4d);
                Ok(linalg::random_hermitian(&mut rng, self.n))
            }
            HamiltonianSpec::File(path) => {
                let m = crate::matfile::read_matrix(std::path::Path::new(path))?;
                if m.nrows() != self.n || m.ncols() != self.n {
                    return Err(Error::Config(format!(
                        "hamiltonian file is {}×{}, expected {}×{}",
                        m.nrows(),
                        m.ncols(),
                        self.n,
                        self.n
                    )));
                }
                if !linalg::is_hermitian(&m, 1e-12) {
                    return Err(Error::Config("hamiltonian file is not Hermitian".into()));
                }
                Ok(m)
            }
        }
    }

    /// Tolerance for a named check: override, else default × tol_scale.
    pub fn tol(&self, name: &str, default: f64) -> f64 {
        self.tolerances
            .get(name)
            .copied()
            .unwrap_or(default * self.tol_scale)
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}
