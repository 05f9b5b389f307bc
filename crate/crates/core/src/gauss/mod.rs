//! Seeded sampling and small dense linear algebra shared by the rest of the
//! crate.

mod mc;
mod mvn;
mod rng;
mod spd;

pub use mc::{mc_moments, mc_moments_with, Moments, CHUNK_REPS};
pub use mvn::{mvn_sample, mvn_sample_into, standard_normal};
pub use rng::{rng_fork, SeededRng};
pub use spd::{quad_form_inv2, spd_validate, SpdMatrix};
