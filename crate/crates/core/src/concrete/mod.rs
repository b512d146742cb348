//! Concrete semantics: values, heaps, expression evaluation and trajectories.

mod interp;
mod memory;
mod shapes;
mod text;

pub use interp::*;
pub use memory::*;
pub use shapes::*;
pub use text::*;
