//! Live interactive-evolution sessions over HTTP/JSON.
//!
//! A human plays the judge: the service asks for pair choices (IDE, TIGA1),
//! pair choices with a magnitude (TIGA2) or per-item ratings (IGA), and the
//! evolutionary engine advances exactly as it would with a simulated judge
//! giving the same answers. A session is fully determined by its seed and
//! its ordered answers, which are kept in an append-only log.

pub mod error;
pub mod protocol;
pub mod render;
pub mod server;
pub mod service;
pub mod session;
pub mod store;

pub use error::{Result, SessionError};
pub use service::Service;
pub use session::Session;
