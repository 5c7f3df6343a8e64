pub mod cli;
pub mod geometry;
pub mod gradcheck;
pub mod image;
pub mod io;
pub mod optimize;
pub mod perception;
pub mod render;
pub mod run;
