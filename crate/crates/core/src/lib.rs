//! Goal-oriented dialogue agents that look ahead several turns before replying.
//!
//! The crate bundles everything needed to reproduce the approach end to end:
//!
//! - [`tensor`]: f64 tensors with a reverse-mode tape.
//! - [`corpus`]: dialogue sessions, vocabulary, sample preparation and corpus files.
//! - [`datagen`]: a STRIPS-planned restaurant-reservation dialogue generator.
//! - [`model`]: goal/history/current encoders, the look-ahead module and the decoder.
//! - [`training`]: the joint loss, alternating E/M schedule and SGD.
//! - [`evaluation`]: self-play against a seq2seq user simulator and parameter sweeps.
//! - [`checkpoint`] and [`chat`]: persistence and the shared inference engine.

pub mod tensor;
pub mod corpus;
pub mod datagen;
pub mod model;
pub mod training;
pub mod evaluation;
pub mod checkpoint;
pub mod chat;
