//! Dense function approximators with hand-written reverse-mode gradients.

mod adam;
mod mlp;
mod policy;
mod tape;

pub use adam::{clip_grad_norm, AdamState};
pub use mlp::{Mlp, MlpTrace};
pub use policy::{ActionMode, GaussianPolicy, Policy, PolicyVars, UniformPolicy, ZeroPolicy};
pub use tape::{Gradients, Tape, Var};
