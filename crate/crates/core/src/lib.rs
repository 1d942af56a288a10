//! Inverse molecular design by gradient descent on a network's input.
//!
//! A regression network learns a molecular property from one-hot encoded
//! token strings. Dreaming then freezes the network and moves the encoding
//! itself toward a target property value; because the token grammar decodes
//! every string to a valid molecule, each intermediate state is a molecule.

pub mod dream;
pub mod molgraph;
pub mod net;
pub mod oracle;
pub mod pipeline;
pub mod selfies;

pub(crate) mod keyvalue;
