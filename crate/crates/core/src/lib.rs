//! Exact exponential sums over F_q[T].
//!
//! Field and polynomial arithmetic, Möbius and von Mangoldt weights, additive
//! characters with histogram-valued sums, inversion energies, Vaughan
//! decompositions and the experiment drivers built on them.

pub mod arith;
pub mod budget;
pub mod charsum;
pub mod energy;
pub mod error;
pub mod experiments;
pub mod gf;
mod literal;
pub mod modulus;
pub mod poly;
pub mod transform;
pub mod vaughan;
pub mod weights;

pub use error::{Error, Result};
pub use gf::{FieldCtx, FqElem};
pub use modulus::{Modulus, ResidueRing};
pub use poly::{Degree, Factorization, Poly};
pub use budget::Budget;
pub use charsum::{CharExponent, ExpHistogram, SumValue};
pub use weights::WeightSeq;
