//! Acceptance suite for `fibquant`; see `tests/acceptance.rs`.
