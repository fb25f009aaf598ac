//! Config files, the expression language, and bundled example systems.

pub mod bundled;
pub mod config;
pub mod expr;

pub use config::{load_str, load_system, LoadedSystem, SimulationConfig};
pub use expr::{parse_expression, Expr, ExprMap, Scope};
