//! Concrete and abstract program slicing for a small imperative language with
//! heap objects.

pub mod lang;
pub mod concrete;
pub mod domains;
pub mod absint;
pub mod criteria;
pub mod deps;
pub mod pdg;
pub mod agreements;
pub mod slicer;
