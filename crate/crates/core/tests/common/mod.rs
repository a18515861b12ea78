#![allow(dead_code)]
pub mod bessel_oracle;
pub mod fed_oracle;
pub mod interface_oracle;
pub mod mode_oracle;
