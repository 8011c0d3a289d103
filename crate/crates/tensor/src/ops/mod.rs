pub mod basic;
pub mod conv;
pub mod pool;
