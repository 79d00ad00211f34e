#![allow(dead_code)]

pub mod dense;
pub mod oracles;
pub mod toy;
