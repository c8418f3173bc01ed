pub mod mesh;
pub mod polybasis;
pub mod spaces;
pub mod assembly;
pub mod solver;
pub mod manufactured;
pub mod verify;
pub mod cli;
