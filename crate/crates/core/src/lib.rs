//! Attack modeling and safe-controllability analysis for supervisory control
//! systems under partial observation.
//!
//! A plant `G` and a supervisor `H` are extended with attacker transitions
//! (actuator enablement, sensor erasure or sensor insertion). The closed loop
//! is then checked for safe controllability: every attack that can drive the
//! plant into an unsafe state must be detected early enough that disabling
//! all controllable events prevents the damage.

pub mod attack;
pub mod automaton;
pub mod diagnosis;
pub mod dot;
pub mod error;
pub mod fixtures;
pub mod generate;
pub mod io;
pub mod language;
pub mod ops;
pub mod runtime;
pub mod safety;
pub mod synthesis;

pub use attack::{build_model, AttackMode, AttackedModel, SiteSelection, VulnerabilitySpec};
pub use automaton::{Alphabet, Automaton, EventAttrs, EventSet, StateId, StateSet, Trace};
pub use error::{Error, Result};
pub use safety::{Condition, Method, Verdict};
