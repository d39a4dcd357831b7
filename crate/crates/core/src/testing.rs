//! Random admissible states and pairing helpers shared by the unit,
//! integration and acceptance tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mesh::Mesh;
use crate::ops::{CellField, EdgeField};
use crate::rsw::State;

pub const EARTH_RADIUS: f64 = 6.371229e6;
pub const EARTH_ROTATION: f64 = 7.292e-5;
pub const GRAVITY: f64 = 9.80616;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Velocity uniform in ±`vmax` per edge, depth `mean·(1 ± spread)` per cell.
pub fn random_state(m: &Mesh, rng: &mut impl Rng, mean: f64, spread: f64, vmax: f64) -> State {
    State {
        v: EdgeField::from_fn(m.n_edges(), |_| rng.random_range(-vmax..vmax)),
        h: CellField::from_fn(m.n_cells(), |_| mean * (1.0 + rng.random_range(-spread..spread))),
    }
}

/// Default admissible state: 10 km mean depth ±10 %, velocities up to 20 m/s.
pub fn admissible_state(m: &Mesh, rng: &mut impl Rng) -> State {
    random_state(m, rng, 1e4, 0.1, 20.0)
}

/// Sum of termwise products and the sum of their magnitudes.
#[derive(Debug, Clone, Copy)]
pub struct Pairing {
    pub sum: f64,
    pub magnitude: f64,
}

impl Pairing {
    pub fn of(a: &[f64], b: &[f64]) -> Self {
        let mut p = Pairing {
            sum: 0.0,
            magnitude: 0.0,
        };
        for (x, y) in a.iter().zip(b) {
            p.sum += x * y;
            p.magnitude += (x * y).abs();
        }
        p
    }

    pub fn plus(self, other: Pairing) -> Self {
        Pairing {
            sum: self.sum + other.sum,
            magnitude: self.magnitude + other.magnitude,
        }
    }

    /// `|Σ| / Σ|·|`, zero when every term vanishes.
    pub fn relative(&self) -> f64 {
        if self.magnitude == 0.0 {
            0.0
        } else {
            self.sum.abs() / self.magnitude
        }
    }
}
