#![allow(dead_code)]
pub mod vertex_oracle;
