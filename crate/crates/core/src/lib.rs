pub mod control;
pub mod coverage;
pub mod experiment;
pub mod explore;
pub mod io;
pub mod model;
pub mod simkit;
pub mod synth;
pub mod twca;
