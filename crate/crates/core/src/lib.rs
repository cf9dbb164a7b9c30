pub mod cli;
pub mod data;
pub mod logic;
pub mod netcore;
pub mod rng;
pub mod speclang;
pub mod tensor;
pub mod train;
pub mod verify;
