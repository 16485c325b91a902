//! Proving failure of definite logic program queries.
//!
//! A query fails if some model of the program makes it false. The search
//! looks for such a model among pre-interpretations: maps from function
//! symbols to functions over a small finite domain. Each candidate is checked
//! by a tabled evaluation of the compiled program, and when the query still
//! succeeds the evaluation reports a conflict set, the components of the
//! candidate that the proof depended on. The search uses it to decide which
//! cell to change next.
//!
//! The pipeline is [`parser`] → [`transform`] → [`eval`] inside [`search`].
//! [`oracle`] is an independent brute-force implementation used to check the
//! others.

pub mod conflict;
pub mod corpus;
pub mod eval;
pub mod oracle;
pub mod parser;
pub mod preinterp;
pub mod report;
pub mod search;
pub mod syntax;
pub mod transform;
