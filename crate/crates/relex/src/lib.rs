//! File formats, configuration, synthetic corpora and the command line
//! around [`relex_core`].

pub mod cli;
pub mod config;
pub mod corpus_io;
pub mod model_io;
pub mod run;
pub mod synthetic;
pub mod vectors;
