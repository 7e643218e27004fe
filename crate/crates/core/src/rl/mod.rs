mod ppo;
mod train;

pub use ppo::*;
pub use train::*;
