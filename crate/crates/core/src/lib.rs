//! Zero-bit watermarking schemes built as solutions of the fundamental
//! detector/embedder partial differential equation, with the machinery to
//! embed, attack, detect and measure them.
//!
//! The crate is `no_std` (it needs `alloc`). The default `std` feature uses
//! the platform math library; `parallel` spreads Monte Carlo chunks over a
//! rayon pool without changing any result.

#![no_std]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod analysis;
pub mod channel;
pub mod engine;
pub mod error;
pub mod host;
pub mod lattice;
pub mod rng;
pub mod schemes;
pub mod specfn;
pub mod stats;

pub use channel::AttackChannel;
pub use error::{Error, Result};
pub use host::HostModel;
pub use lattice::Lattice;
pub use schemes::Scheme;
pub use specfn::SeriesControl;
