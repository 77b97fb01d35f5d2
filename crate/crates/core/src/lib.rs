//! Canard explosions and super-explosions in planar piecewise-smooth
//! Liénard systems.

pub mod bifurcation;
pub mod certificates;
pub mod integrator;
pub mod orbit;
pub mod poly;
pub mod shadow;
pub mod stommel;
pub mod sweep;
pub mod system;

pub use integrator::{
    first_return, integrate, Direction, EventAction, EventKind, EventSpec, IntegrateError, IntegrateOptions,
    PiecewiseField, Status, Trajectory,
};
pub use poly::PolyBranch;
pub use system::{Preset, Side, State, SystemError, SystemSpec};
