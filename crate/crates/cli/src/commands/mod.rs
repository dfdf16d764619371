pub mod complexity;
pub mod free_pairs;
pub mod g2;
pub mod simulate;
pub mod validate;
