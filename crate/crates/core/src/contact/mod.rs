//! Contact detection, dual-cone facets and the quasi-dynamic
//! complementarity-free stepper.

mod detect;
mod facets;
mod params;
mod step;

pub use detect::{detect_contacts, tangent_basis, BodyPair, Contact, SystemState};
pub use facets::{build_facets, facet_directions, FacetSystem};
pub use params::{ContactSolve, DynamicsParams, Plane, Scene, Vector9};
pub use step::{comfree_step, free_displacement, generalized_force, StepResult, Wrench};
