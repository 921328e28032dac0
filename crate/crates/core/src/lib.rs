pub mod analysis;
pub mod cases;
pub mod cosim;
pub mod dynamics;
pub mod grid;
pub mod pipeline;
pub mod powerflow;
pub mod profiles;
pub mod records;
