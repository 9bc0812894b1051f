//! Comparison methods: a plain MLP Lagrangian and parametric system
//! identification of the pendulum's masses and lengths.

mod mlp;
mod sysid;

pub use mlp::{ElStencil, Mlp, MlpConfig, DEFAULT_STENCIL_STEP};
pub use sysid::SysId;
