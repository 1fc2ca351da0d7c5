#![allow(dead_code)]

pub mod channels;
pub mod fresnel;
pub mod pseudospectral;
