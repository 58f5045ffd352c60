//! Front-end support for the `macregions` binary: run manifests and the
//! verification battery shared with the acceptance tests.

pub mod manifest;
pub mod verify;
