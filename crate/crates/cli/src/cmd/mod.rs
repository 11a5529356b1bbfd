pub mod bench;
pub mod ppcg;
pub mod ptsn;
pub mod scan;
pub mod toy;
pub mod validate;
