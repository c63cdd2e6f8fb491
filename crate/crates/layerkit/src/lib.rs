//! File formats, plotting data and the command-line front end for
//! [`layerkit_core`].

pub mod cli;
pub mod dataio;
pub mod plot;
