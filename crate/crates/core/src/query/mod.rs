pub mod circuits;
pub mod lp;
pub mod poly;
pub mod rdeg;
pub mod tree;
