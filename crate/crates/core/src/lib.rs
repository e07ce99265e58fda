//! Alpha-potential analysis and gated learning dynamics for asymmetric
//! network games.

pub mod error;
pub mod game;
pub mod linalg;
pub mod dynamics;
pub mod network;
pub mod potential;
pub mod welfare;

pub use error::{Error, Result};
pub use game::{ActionProfile, Interval, LqGame, SmoothGame};
pub use network::{Family, Network, NetworkMetrics};
