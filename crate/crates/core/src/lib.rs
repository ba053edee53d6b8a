pub mod cycles;
pub mod intervals;
pub mod logic;
pub mod markov;
pub mod monoid;
pub mod simulate;
pub mod word_types;
