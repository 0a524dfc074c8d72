pub mod codegen;
pub mod data;
pub mod derivation;
pub mod disambiguation;
pub mod dsl;
pub mod graph;
pub mod model;
pub mod session;
